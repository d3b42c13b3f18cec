use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constraints::{BlockPattern, ProductParameterization};
use crate::error::{Error, Result};
use crate::fellbundle::{project_to_dirac, FellBundleGeometry, RealStructure};
use crate::lincore::{set_block, CMatrix, Complex64};

/// Real inner product `Re Tr(A† B)`.
fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Dirac sections parameterised by real coordinates.
#[derive(Debug, Clone)]
pub enum ConfigurationSpace {
    /// `D = Σ x_k B_k` over an orthonormal real basis `B_k` of the
    /// pattern-supported matrices with `D = D* = ±J D J⁻¹`.
    Linear {
        geometry: FellBundleGeometry,
        pattern: BlockPattern,
        basis: Vec<CMatrix>,
    },
    /// Product-bundle sections, coordinates the real and imaginary parts of
    /// the factor entries.
    Product(ProductParameterization),
}

impl ConfigurationSpace {
    pub fn linear(
        geom: &FellBundleGeometry,
        pattern: &BlockPattern,
        j: Option<&RealStructure>,
    ) -> Result<Self> {
        if pattern.len() != geom.len() {
            return Err(Error::InconsistentPattern(format!(
                "pattern on {} objects, geometry has {}",
                pattern.len(),
                geom.len()
            )));
        }
        let n = geom.total_dim();
        let offsets = geom.offsets();
        let dims = geom.dims();
        let mut basis: Vec<CMatrix> = Vec::new();
        for (c, &r) in pattern.pairing().iter().enumerate() {
            for a in 0..dims[r] {
                for b in 0..dims[c] {
                    for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                        let mut blk = CMatrix::zeros(dims[r], dims[c]);
                        blk[(a, b)] = unit;
                        let mut m = CMatrix::zeros(n, n);
                        set_block(&mut m, offsets[r], offsets[c], &blk);
                        let mut v = project_to_dirac(&m, j);
                        for _ in 0..2 {
                            for q in &basis {
                                let p = real_inner(q, &v);
                                v -= q * Complex64::new(p, 0.0);
                            }
                        }
                        let norm = v.norm();
                        if norm > 1e-9 {
                            basis.push(v / Complex64::new(norm, 0.0));
                        }
                    }
                }
            }
        }
        Ok(ConfigurationSpace::Linear {
            geometry: geom.clone(),
            pattern: pattern.clone(),
            basis,
        })
    }

    /// Number of real coordinates.
    pub fn dimension(&self) -> usize {
        match self {
            ConfigurationSpace::Linear { basis, .. } => basis.len(),
            ConfigurationSpace::Product(p) => 2 * p.len(),
        }
    }

    pub fn matrix_dim(&self) -> usize {
        match self {
            ConfigurationSpace::Linear { geometry, .. } => geometry.total_dim(),
            ConfigurationSpace::Product(p) => p.matrix_dim(),
        }
    }

    pub fn measure_description(&self) -> &'static str {
        match self {
            ConfigurationSpace::Linear { .. } => {
                "lebesgue on orthonormal real coordinates of the constrained section space"
            }
            ConfigurationSpace::Product(_) => {
                "lebesgue on real and imaginary parts of the product-factor entries"
            }
        }
    }

    pub fn point(&self, x: &[f64]) -> Result<CMatrix> {
        if x.len() != self.dimension() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coordinates", self.dimension()),
                found: format!("{}", x.len()),
            });
        }
        match self {
            ConfigurationSpace::Linear {
                basis, geometry, ..
            } => {
                let n = geometry.total_dim();
                let mut d = CMatrix::zeros(n, n);
                for (b, &xk) in basis.iter().zip(x) {
                    d += b * Complex64::new(xk, 0.0);
                }
                Ok(d)
            }
            ConfigurationSpace::Product(p) => {
                let params: Vec<Complex64> =
                    x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
                p.assemble(&params)
            }
        }
    }

    pub fn random_coordinates<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dimension())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Least-squares coordinates of `m` in a linear space.
    pub fn project(&self, m: &CMatrix) -> Option<Vec<f64>> {
        match self {
            ConfigurationSpace::Linear { basis, .. } => {
                Some(basis.iter().map(|b| real_inner(b, m)).collect())
            }
            ConfigurationSpace::Product(_) => None,
        }
    }
}

/// Dimensions of the algebras generated by sampled sections.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDims {
    pub samples: usize,
    /// Generated by the sections themselves.
    pub full: usize,
    /// Generated by the products `D_i D_j`.
    pub units: usize,
    pub expected_full: usize,
    pub expected_units: usize,
}

impl GeneratedDims {
    pub fn rank_deficient(&self) -> bool {
        self.full < self.expected_full || self.units < self.expected_units
    }
}

/// Complex Gram-Schmidt basis of a span of matrices.
struct SpanBasis {
    basis: Vec<CMatrix>,
    tol: f64,
}

impl SpanBasis {
    fn new(tol: f64) -> Self {
        Self {
            basis: Vec::new(),
            tol,
        }
    }

    fn insert(&mut self, m: &CMatrix) -> bool {
        let scale = m.norm();
        if scale == 0.0 {
            return false;
        }
        let mut v = m / Complex64::new(scale, 0.0);
        for _ in 0..2 {
            for q in &self.basis {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let norm = v.norm();
        if norm > self.tol {
            self.basis.push(v / Complex64::new(norm, 0.0));
            true
        } else {
            false
        }
    }
}

/// Dimension of the (non-unital) algebra generated by `gens`.
pub fn generated_dimension(gens: &[CMatrix], tol: f64) -> usize {
    let mut span = SpanBasis::new(tol);
    for g in gens {
        span.insert(g);
    }
    let mut frontier = span.basis.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for w in &frontier {
            for g in gens {
                let p = w * g;
                if span.insert(&p) {
                    next.push(span.basis.last().unwrap().clone());
                }
            }
        }
        frontier = next;
    }
    span.basis.len()
}

/// Sample sections, then report the dimensions of the algebra they generate
/// and of the algebra generated by their pairwise products. The expected
/// values are the full matrix algebra over each connected block of the
/// pattern and the direct sum of the unit fibers.
pub fn generated_algebra_dims(
    space: &ConfigurationSpace,
    samples: usize,
    seed: u64,
) -> Result<GeneratedDims> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sections: Vec<CMatrix> = (0..samples)
        .map(|_| {
            let x = space.random_coordinates(&mut rng);
            space.point(&x)
        })
        .collect::<Result<_>>()?;
    let products: Vec<CMatrix> = sections
        .iter()
        .flat_map(|a| sections.iter().map(move |b| a * b))
        .collect();
    let tol = 1e-9;
    let (expected_full, expected_units) = expected_dims(space);
    let degenerate = space.dimension() == 0;
    Ok(GeneratedDims {
        samples,
        full: if degenerate {
            0
        } else {
            generated_dimension(&sections, tol)
        },
        units: if degenerate {
            0
        } else {
            generated_dimension(&products, tol)
        },
        expected_full,
        expected_units,
    })
}

fn expected_dims(space: &ConfigurationSpace) -> (usize, usize) {
    let (geom, pairing) = match space {
        ConfigurationSpace::Linear {
            geometry, pattern, ..
        } => (geometry.clone(), pattern.pairing().to_vec()),
        ConfigurationSpace::Product(p) => (p.bundle().geometry().clone(), p.pairing().to_vec()),
    };
    let dims = geom.dims();
    let mut seen = vec![false; dims.len()];
    let mut full = 0;
    let mut units = 0;
    for i in 0..dims.len() {
        units += dims[i] * dims[i];
        if !seen[i] {
            let s = pairing[i];
            seen[i] = true;
            seen[s] = true;
            let n = if s == i { dims[i] } else { dims[i] + dims[s] };
            full += n * n;
        }
    }
    (full, units)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::{build_fell_bundle, build_pair_groupoid};
    use crate::lincore::is_hermitian;

    fn line_space() -> ConfigurationSpace {
        let g = build_fell_bundle(build_pair_groupoid(&["a", "b"]).unwrap(), &[1, 1]).unwrap();
        ConfigurationSpace::linear(&g, &BlockPattern::new(vec![1, 0]).unwrap(), None).unwrap()
    }

    #[test]
    fn line_bundle_space() {
        let s = line_space();
        assert_eq!(s.dimension(), 2);
        let d = s.point(&[1.0, 0.0]).unwrap();
        assert!(is_hermitian(&d, 1e-14));
        assert_eq!(d[(0, 0)], Complex64::new(0.0, 0.0));
        let x = [0.3, -1.1];
        assert_eq!(s.project(&s.point(&x).unwrap()).unwrap().len(), 2);
        let back = s.project(&s.point(&x).unwrap()).unwrap();
        assert!((back[0] - x[0]).abs() < 1e-14 && (back[1] - x[1]).abs() < 1e-14);
    }

    #[test]
    fn generated_dims_examples() {
        let got = generated_algebra_dims(&line_space(), 4, 1).unwrap();
        assert_eq!((got.full, got.units), (4, 2));
        assert!(!got.rank_deficient());

        let g = build_fell_bundle(build_pair_groupoid(&["p"]).unwrap(), &[2]).unwrap();
        let s = ConfigurationSpace::linear(&g, &BlockPattern::new(vec![0]).unwrap(), None).unwrap();
        let got = generated_algebra_dims(&s, 4, 1).unwrap();
        assert_eq!((got.full, got.units), (4, 4));
    }

    #[test]
    fn generated_dimension_oracle() {
        // Diagonal matrices generate only the diagonal algebra.
        let d1 = crate::lincore::real_diag(&[1.0, 2.0, 3.0]);
        assert_eq!(generated_dimension(std::slice::from_ref(&d1), 1e-9), 3);
        assert_eq!(generated_dimension(&[CMatrix::zeros(2, 2)], 1e-9), 0);
        let n = CMatrix::from_fn(2, 2, |i, j| {
            Complex64::new(if i == 0 && j == 1 { 1.0 } else { 0.0 }, 0.0)
        });
        assert_eq!(generated_dimension(&[n], 1e-9), 1);
    }
}
