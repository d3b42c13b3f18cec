use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::pattern::{object_permutation, BlockPattern};
use crate::error::{Error, Result};
use crate::fellbundle::{classify_matrix, FellBundleGeometry, RealStructure};
use crate::lincore::{get_block, random_complex, set_block, CMatrix, Complex64};

/// Factor data of one object of a product bundle `E ⊗ E^opp`: the unit
/// fibers `M_fiber` and `M_opp_fiber` and the dimensions they act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductFactors {
    pub fiber: usize,
    pub fiber_rep: usize,
    pub opp_fiber: usize,
    pub opp_rep: usize,
}

impl ProductFactors {
    pub fn trivial(dim: usize) -> Self {
        Self {
            fiber: dim,
            fiber_rep: dim,
            opp_fiber: 1,
            opp_rep: 1,
        }
    }
}

/// How a factor block smaller than its carrier is placed inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BimoduleEmbedding {
    /// Top-left placement, so a vector `C² → M₂` fills the first column.
    #[default]
    Column,
    /// Vectors go onto the diagonal, scalars become multiples of the identity.
    Diagonal,
}

impl std::str::FromStr for BimoduleEmbedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column" => Ok(Self::Column),
            "diagonal" => Ok(Self::Diagonal),
            other => Err(Error::Config(format!(
                "unknown bimodule embedding {other:?} (expected column or diagonal)"
            ))),
        }
    }
}

impl BimoduleEmbedding {
    pub fn name(self) -> &'static str {
        match self {
            Self::Column => "column",
            Self::Diagonal => "diagonal",
        }
    }

    /// Place an `f_r × f_c` factor into an `r × c` carrier block.
    pub fn embed(self, x: &CMatrix, rows: usize, cols: usize) -> CMatrix {
        let (fr, fc) = x.shape();
        if (fr, fc) == (rows, cols) {
            return x.clone();
        }
        let mut out = CMatrix::zeros(rows, cols);
        match self {
            Self::Diagonal if fr == 1 && fc == 1 => {
                for i in 0..rows.min(cols) {
                    out[(i, i)] = x[(0, 0)];
                }
            }
            Self::Diagonal if fc == 1 && fr == rows.min(cols) => {
                for i in 0..fr {
                    out[(i, i)] = x[(i, 0)];
                }
            }
            Self::Diagonal if fr == 1 && fc == rows.min(cols) => {
                for i in 0..fc {
                    out[(i, i)] = x[(0, i)];
                }
            }
            _ => set_block(&mut out, 0, 0, x),
        }
        out
    }

    /// Left inverse of [`Self::embed`] on its image.
    pub fn extract(self, m: &CMatrix, fr: usize, fc: usize) -> CMatrix {
        let (rows, cols) = m.shape();
        if (fr, fc) == (rows, cols) {
            return m.clone();
        }
        match self {
            Self::Diagonal if fr == 1 && fc == 1 => {
                let k = rows.min(cols).max(1);
                let s: Complex64 = (0..rows.min(cols)).map(|i| m[(i, i)]).sum();
                CMatrix::from_element(1, 1, s / k as f64)
            }
            Self::Diagonal if fc == 1 && fr == rows.min(cols) => {
                CMatrix::from_fn(fr, 1, |i, _| m[(i, i)])
            }
            Self::Diagonal if fr == 1 && fc == rows.min(cols) => {
                CMatrix::from_fn(1, fc, |_, i| m[(i, i)])
            }
            _ => get_block(m, 0, 0, fr, fc),
        }
    }

    /// Relative distance of `m` from the image of the embedding.
    pub fn image_residual(self, m: &CMatrix, fr: usize, fc: usize) -> f64 {
        let back = self.embed(&self.extract(m, fr, fc), m.nrows(), m.ncols());
        (m - back).norm() / 1f64.max(m.norm())
    }
}

/// A Fell bundle geometry together with its product-bundle factorisation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBundle {
    geom: FellBundleGeometry,
    factors: Vec<ProductFactors>,
    embedding: BimoduleEmbedding,
}

impl ProductBundle {
    pub fn new(
        geom: FellBundleGeometry,
        factors: Vec<ProductFactors>,
        embedding: BimoduleEmbedding,
    ) -> Result<Self> {
        if !geom.is_product_bundle() {
            return Err(Error::Geometry(
                "geometry is not flagged as a product bundle E ⊗ E^opp".into(),
            ));
        }
        if factors.len() != geom.len() {
            return Err(Error::Geometry(format!(
                "{} factor records for {} objects",
                factors.len(),
                geom.len()
            )));
        }
        for (i, (f, &n)) in factors.iter().zip(geom.dims()).enumerate() {
            if f.fiber_rep * f.opp_rep != n
                || f.fiber == 0
                || f.opp_fiber == 0
                || f.fiber > f.fiber_rep
                || f.opp_fiber > f.opp_rep
            {
                return Err(Error::Geometry(format!(
                    "object {}: factors {f:?} do not fit a block of dimension {n}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            geom,
            factors,
            embedding,
        })
    }

    pub fn geometry(&self) -> &FellBundleGeometry {
        &self.geom
    }

    pub fn factors(&self) -> &[ProductFactors] {
        &self.factors
    }

    pub fn embedding(&self) -> BimoduleEmbedding {
        self.embedding
    }

    /// Shapes `(e, o)` of the two factors over the arrow `(r, c)`.
    pub fn factor_shapes(&self, r: usize, c: usize) -> ((usize, usize), (usize, usize)) {
        let (a, b) = (self.factors[r], self.factors[c]);
        ((a.fiber, b.fiber), (a.opp_fiber, b.opp_fiber))
    }

    /// Block `(r, c)` of the product fiber: `emb(o) ⊗ emb(e)`.
    pub fn product_block(&self, r: usize, c: usize, e: &CMatrix, o: &CMatrix) -> CMatrix {
        let (a, b) = (self.factors[r], self.factors[c]);
        let ee = self.embedding.embed(e, a.fiber_rep, b.fiber_rep);
        let oe = self.embedding.embed(o, a.opp_rep, b.opp_rep);
        oe.kronecker(&ee)
    }

    /// Best rank-one fit `block ≈ O ⊗ E` in the carrier shapes of `(r, c)`,
    /// returning the carrier factors and the relative residual.
    pub fn factorize_block(&self, r: usize, c: usize, block: &CMatrix) -> (CMatrix, CMatrix, f64) {
        let (a, b) = (self.factors[r], self.factors[c]);
        let (p, q) = (a.opp_rep, b.opp_rep);
        let (m, n) = (a.fiber_rep, b.fiber_rep);
        // Rearrangement R[(i1, j1), (i2, j2)] = T[i1 m + i2, j1 n + j2].
        let mut rr = CMatrix::zeros(p * q, m * n);
        for i1 in 0..p {
            for j1 in 0..q {
                for i2 in 0..m {
                    for j2 in 0..n {
                        rr[(i1 * q + j1, i2 * n + j2)] = block[(i1 * m + i2, j1 * n + j2)];
                    }
                }
            }
        }
        let svd = rr.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let top = svd.singular_values.imax();
        let s0 = svd.singular_values[top].sqrt();
        let o = CMatrix::from_fn(p, q, |i, j| u[(i * q + j, top)] * s0);
        let e = CMatrix::from_fn(m, n, |i, j| vt[(top, i * n + j)] * s0);
        let residual = (o.kronecker(&e) - block).norm() / 1f64.max(block.norm());
        (o, e, residual)
    }
}

/// Orbits of the pattern blocks under `(r, c) ↦ (c, r)` and
/// `(r, c) ↦ (τr, τc)`, each listed from its minimal block.
pub fn block_orbits(pattern: &BlockPattern, tau: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let mut blocks: Vec<(usize, usize)> = pattern
        .pairing()
        .iter()
        .enumerate()
        .map(|(c, &r)| (r, c))
        .collect();
    blocks.sort();
    let mut seen = vec![false; blocks.len()];
    let mut orbits = Vec::new();
    for start in 0..blocks.len() {
        if seen[start] {
            continue;
        }
        let mut orbit = vec![blocks[start]];
        let mut k = 0;
        while k < orbit.len() {
            let (r, c) = orbit[k];
            for next in [(c, r), (tau[r], tau[c])] {
                if !orbit.contains(&next) {
                    orbit.push(next);
                }
            }
            k += 1;
        }
        orbit.sort();
        for b in &orbit {
            if let Some(i) = blocks.iter().position(|x| x == b) {
                seen[i] = true;
            }
        }
        orbits.push(orbit);
    }
    orbits
}

/// Dirac operators built from one product block per orbit:
/// `D₀` carries `emb(o) ⊗ emb(e)` on each representative,
/// `D₁ = D₀ + D₀*` and `D = D₁ ± J D₁ J⁻¹`.
#[derive(Debug, Clone)]
pub struct ProductParameterization {
    bundle: ProductBundle,
    j: RealStructure,
    tau: Vec<usize>,
    pairing: Vec<usize>,
    reps: Vec<(usize, usize)>,
}

impl ProductParameterization {
    pub fn new(bundle: &ProductBundle, pattern: &BlockPattern, j: &RealStructure) -> Result<Self> {
        let geom = bundle.geometry();
        if pattern.len() != geom.len() {
            return Err(Error::InconsistentPattern(format!(
                "pattern on {} objects, geometry has {}",
                pattern.len(),
                geom.len()
            )));
        }
        let tau = object_permutation(geom, Some(j))?;
        let sigma = pattern.pairing();
        if (0..sigma.len()).any(|i| sigma[tau[i]] != tau[sigma[i]]) {
            return Err(Error::InconsistentPattern(format!(
                "pairing {} does not commute with the object permutation of J",
                pattern.pairing_string()
            )));
        }
        let reps = block_orbits(pattern, &tau).iter().map(|o| o[0]).collect();
        Ok(Self {
            bundle: bundle.clone(),
            j: j.clone(),
            tau,
            pairing: sigma.to_vec(),
            reps,
        })
    }

    pub fn bundle(&self) -> &ProductBundle {
        &self.bundle
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn matrix_dim(&self) -> usize {
        self.bundle.geometry().total_dim()
    }

    pub fn representatives(&self) -> &[(usize, usize)] {
        &self.reps
    }

    pub fn object_permutation(&self) -> &[usize] {
        &self.tau
    }

    /// Complex parameters per representative: `(e entries, o entries)`.
    pub fn factor_sizes(&self) -> Vec<(usize, usize)> {
        self.reps
            .iter()
            .map(|&(r, c)| {
                let (e, o) = self.bundle.factor_shapes(r, c);
                (e.0 * e.1, o.0 * o.1)
            })
            .collect()
    }

    /// Number of complex parameters, every factor entry counted.
    pub fn len(&self) -> usize {
        self.factor_sizes().iter().map(|(a, b)| a + b).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Additive count: factor sizes summed over representatives, where a
    /// `1 × 1` factor adds nothing because its scalar can be absorbed into
    /// the other factor.
    pub fn naive_param_count(&self) -> usize {
        self.factor_sizes()
            .iter()
            .map(|&(e, o)| match (e, o) {
                (1, 1) => 1,
                (1, o) => o,
                (e, 1) => e,
                (e, o) => e + o,
            })
            .sum()
    }

    /// `(e, o)` factor pairs for every representative.
    pub fn split(&self, params: &[Complex64]) -> Vec<(CMatrix, CMatrix)> {
        let mut k = 0;
        let mut take = |rows: usize, cols: usize| {
            let m = CMatrix::from_fn(rows, cols, |i, j| params[k + i * cols + j]);
            k += rows * cols;
            m
        };
        self.reps
            .iter()
            .map(|&(r, c)| {
                let (es, os) = self.bundle.factor_shapes(r, c);
                let e = take(es.0, es.1);
                let o = take(os.0, os.1);
                (e, o)
            })
            .collect()
    }

    pub fn assemble(&self, params: &[Complex64]) -> Result<CMatrix> {
        if params.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.len()),
                found: format!("{}", params.len()),
            });
        }
        let geom = self.bundle.geometry();
        let n = geom.total_dim();
        let offsets = geom.offsets();
        let mut d0 = CMatrix::zeros(n, n);
        for (&(r, c), (e, o)) in self.reps.iter().zip(self.split(params)) {
            let blk = self.bundle.product_block(r, c, &e, &o);
            set_block(&mut d0, offsets[r], offsets[c], &blk);
        }
        let d1 = &d0 + d0.adjoint();
        let s = Complex64::new(f64::from(self.j.sign_dj()), 0.0);
        Ok(&d1 + self.j.conjugate_operator(&d1) * s)
    }

    pub fn random_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        random_complex(rng, self.len(), 1).iter().copied().collect()
    }

    /// Real Jacobian of `params ↦ W D(params) W†` by central differences.
    pub fn jacobian(&self, params: &[Complex64], basis: Option<&CMatrix>) -> Result<DMatrix<f64>> {
        let n = self.bundle.geometry().total_dim();
        let h = 1e-4;
        let eval = |p: &[Complex64]| -> Result<Vec<f64>> {
            let d = self.assemble(p)?;
            let d = match basis {
                Some(w) => w * d * w.adjoint(),
                None => d,
            };
            Ok(d.iter().flat_map(|z| [z.re, z.im]).collect())
        };
        let cols = 2 * params.len();
        let mut jac = DMatrix::<f64>::zeros(2 * n * n, cols);
        for k in 0..cols {
            let step = if k % 2 == 0 {
                Complex64::new(h, 0.0)
            } else {
                Complex64::new(0.0, h)
            };
            let mut plus = params.to_vec();
            let mut minus = params.to_vec();
            plus[k / 2] += step;
            minus[k / 2] -= step;
            let (fp, fm) = (eval(&plus)?, eval(&minus)?);
            for (row, (a, b)) in fp.iter().zip(&fm).enumerate() {
                jac[(row, k)] = (a - b) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

/// Number of singular values above `1e−8 · σ_max`.
pub fn jacobian_rank(jac: &DMatrix<f64>) -> usize {
    crate::lincore::real_rank(jac, 1e-8)
}

/// Jacobian rank at `seeds` generic points, optionally after the change of
/// basis `W`; the points must agree.
pub fn manifold_real_rank(
    param: &ProductParameterization,
    seed: u64,
    seeds: usize,
    basis: Option<&CMatrix>,
) -> Result<usize> {
    if param.is_empty() {
        return Ok(0);
    }
    let ranks: Vec<usize> = (0..seeds.max(1) as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1000 + s);
            let p = param.random_params(&mut rng);
            param.jacobian(&p, basis).map(|j| jacobian_rank(&j))
        })
        .collect::<Result<Vec<_>>>()?;
    if ranks.iter().any(|&r| r != ranks[0]) {
        return Err(Error::RankInstability { ranks });
    }
    Ok(ranks[0])
}

/// One block relation forced by `D = J D J⁻¹`, in factor notation.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorEquation {
    pub image: (usize, usize),
    pub source: (usize, usize),
    /// `true` when `J` exchanges the roles of `E` and `E^opp`.
    pub swapped: bool,
}

impl std::fmt::Display for TensorEquation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, b) = (self.image.0 + 1, self.image.1 + 1);
        let (c, d) = (self.source.0 + 1, self.source.1 + 1);
        if self.swapped {
            write!(
                f,
                "o[{a},{b}] ⊗ e[{a},{b}] = conj(e[{c},{d}]) ⊗ conj(o[{c},{d}])"
            )
        } else {
            write!(
                f,
                "o[{a},{b}] ⊗ e[{a},{b}] = conj(o[{c},{d}]) ⊗ conj(e[{c},{d}])"
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSolution {
    pub pattern: BlockPattern,
    pub equations: Vec<TensorEquation>,
    pub naive_param_count: usize,
    pub manifold_dim: usize,
    pub real_rank: usize,
    pub witnesses: Vec<CMatrix>,
    /// Worst residual of the section and tensor checks over the witnesses.
    pub witness_residual: f64,
}

pub const RANK_SEEDS: usize = 5;
pub const WITNESSES: usize = 3;

/// Solve `D = D* = J D* J⁻¹` on a product bundle for a block pattern.
pub fn solve_reality_constraint(
    bundle: &ProductBundle,
    pattern: &BlockPattern,
    j: &RealStructure,
    seed: u64,
    tol: f64,
) -> Result<ConstraintSolution> {
    let param = ProductParameterization::new(bundle, pattern, j)?;
    let tau = param.object_permutation().to_vec();
    let factors = bundle.factors();

    let mut equations = Vec::new();
    for &(r, c) in param.representatives() {
        let image = (tau[r], tau[c]);
        if image == (r, c) {
            continue;
        }
        let (fr, fc) = (factors[r], factors[c]);
        let (gr, gc) = (factors[image.0], factors[image.1]);
        let swapped = (gr.fiber, gc.fiber) == (fr.opp_fiber, fc.opp_fiber)
            && (gr.opp_fiber, gc.opp_fiber) == (fr.fiber, fc.fiber)
            && (fr.fiber, fc.fiber) != (fr.opp_fiber, fc.opp_fiber);
        equations.push(TensorEquation {
            image,
            source: (r, c),
            swapped,
        });
    }

    let real_rank = manifold_real_rank(&param, seed, RANK_SEEDS, None)?;

    let geom = bundle.geometry();
    let offsets = geom.offsets();
    let dims = geom.dims();
    let mut witnesses = Vec::new();
    let mut worst: f64 = 0.0;
    for w in 0..WITNESSES as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(w);
        let d = param.assemble(&param.random_params(&mut rng))?;
        let verdict = classify_matrix(geom, &d, Some(j), tol)?;
        if !verdict.accepted {
            return Err(Error::InconsistentPattern(format!(
                "witness {w} is not a Dirac section: {}",
                verdict
                    .diagnostics
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join("; ")
            )));
        }
        for eq in &equations {
            let (r, c) = eq.image;
            let blk = get_block(&d, offsets[r], offsets[c], dims[r], dims[c]);
            let (o, e, fit) = bundle.factorize_block(r, c, &blk);
            let (es, os) = bundle.factor_shapes(r, c);
            let emb = bundle.embedding();
            let res = fit
                .max(emb.image_residual(&e, es.0, es.1))
                .max(emb.image_residual(&o, os.0, os.1));
            worst = worst.max(res);
        }
        witnesses.push(d);
    }
    if worst > tol {
        return Err(Error::InconsistentPattern(format!(
            "J-image blocks are not product blocks (residual {worst:.3e})"
        )));
    }

    Ok(ConstraintSolution {
        pattern: pattern.clone(),
        equations,
        naive_param_count: param.naive_param_count(),
        manifold_dim: real_rank / 2,
        real_rank,
        witnesses,
        witness_residual: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::{build_fell_bundle, build_pair_groupoid};
    use crate::lincore::{c64, HilbertSpace};

    #[test]
    fn embeddings_round_trip() {
        let v = CMatrix::from_column_slice(2, 1, &[c64(1.0, 2.0), c64(-3.0, 0.5)]);
        for emb in [BimoduleEmbedding::Column, BimoduleEmbedding::Diagonal] {
            let m = emb.embed(&v, 2, 2);
            assert_eq!(emb.extract(&m, 2, 1), v);
            assert!(emb.image_residual(&m, 2, 1) < 1e-15);
        }
        let d = BimoduleEmbedding::Diagonal.embed(&v, 2, 2);
        assert_eq!(d[(1, 1)], v[(1, 0)]);
        assert_eq!(d[(1, 0)], c64(0.0, 0.0));
        assert!(BimoduleEmbedding::Column.image_residual(&d, 2, 1) > 0.1);
    }

    #[test]
    fn rank_one_fit_recovers_kronecker() {
        let g = build_fell_bundle(build_pair_groupoid(&["a", "b"]).unwrap(), &[6, 6])
            .unwrap()
            .with_product_bundle(true);
        let f = ProductFactors {
            fiber: 2,
            fiber_rep: 2,
            opp_fiber: 3,
            opp_rep: 3,
        };
        let b = ProductBundle::new(g, vec![f, f], BimoduleEmbedding::Column).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_complex(&mut rng, 2, 2);
        let o = random_complex(&mut rng, 3, 3);
        let blk = b.product_block(0, 1, &e, &o);
        let (o2, e2, res) = b.factorize_block(0, 1, &blk);
        assert!(res < 1e-12);
        assert!((o2.kronecker(&e2) - &blk).norm() < 1e-10);
        let noise = random_complex(&mut rng, 6, 6);
        assert!(b.factorize_block(0, 1, &noise).2 > 1e-3);
    }

    #[test]
    fn requires_product_flag() {
        let g = build_fell_bundle(build_pair_groupoid(&["a"]).unwrap(), &[2]).unwrap();
        assert!(matches!(
            ProductBundle::new(
                g,
                vec![ProductFactors::trivial(2)],
                BimoduleEmbedding::Column
            ),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn two_point_line_bundle() {
        let g = build_fell_bundle(build_pair_groupoid(&["a", "b"]).unwrap(), &[1, 1])
            .unwrap()
            .with_product_bundle(true);
        let b = ProductBundle::new(
            g,
            vec![ProductFactors::trivial(1); 2],
            BimoduleEmbedding::Column,
        )
        .unwrap();
        let j = RealStructure::from_permutation(
            HilbertSpace::anonymous(2).unwrap(),
            &[0, 1],
            None,
            1,
            1,
        )
        .unwrap();
        let swap = BlockPattern::new(vec![1, 0]).unwrap();
        let sol = solve_reality_constraint(&b, &swap, &j, 7, 1e-10).unwrap();
        // D = [[0, m], [m̄, 0]] with m forced real by J = complex conjugation.
        assert_eq!(sol.naive_param_count, 1);
        assert_eq!(sol.real_rank, 1);
        assert!(sol.equations.is_empty());
        for w in &sol.witnesses {
            assert!(w[(0, 1)].im.abs() < 1e-12);
        }
    }

    #[test]
    fn orbits_cover_pattern() {
        let p = BlockPattern::new(vec![1, 0, 3, 2]).unwrap();
        let orbits = block_orbits(&p, &[2, 3, 0, 1]);
        assert_eq!(orbits, vec![vec![(0, 1), (1, 0), (2, 3), (3, 2)]]);
        let orbits = block_orbits(&BlockPattern::new(vec![0, 1, 2, 3]).unwrap(), &[2, 3, 0, 1]);
        assert_eq!(orbits.len(), 2);
    }
}
