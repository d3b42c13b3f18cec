use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{StateFunctional, TripleData};
use crate::error::{Error, Result};
use crate::lincore::{hermitian_eigen, CMatrix, Complex64};

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Restarts whose distances agree within this relative tolerance count
    /// towards convergence.
    pub agreement_tol: f64,
    pub required_agreement: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            seed: 0,
            agreement_tol: 1e-6,
            required_agreement: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    /// `f64::INFINITY` when unbounded.
    pub distance: f64,
    pub unbounded: bool,
    /// Represented maximizer `a`, normalised so that `‖[D, a]‖ = 1`.
    /// For an unbounded distance it is a commutant direction with `ω₁(a) > ω₂(a)`.
    pub maximizer: Option<CMatrix>,
    pub restarts: usize,
    pub agreeing_restarts: usize,
    pub converged: bool,
}

/// `λ ↦ max|eig(H0 + Σ w_j H_j)|`, the operator norm of a Hermitian pencil.
struct Pencil {
    h0: CMatrix,
    hs: Vec<CMatrix>,
}

impl Pencil {
    fn at(&self, w: &[f64]) -> CMatrix {
        let mut h = self.h0.clone();
        for (hj, &wj) in self.hs.iter().zip(w) {
            h += hj * Complex64::new(wj, 0.0);
        }
        h
    }

    fn norm(&self, w: &[f64]) -> f64 {
        hermitian_eigen(&self.at(w))
            .0
            .iter()
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Log-sum-exp smoothing of the spectral radius and its gradient.
    fn smoothed(&self, w: &[f64], beta: f64) -> (f64, Vec<f64>) {
        let (vals, vecs) = hermitian_eigen(&self.at(w));
        let top = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut z = 0.0;
        let mut weights = Vec::with_capacity(vals.len());
        for &l in &vals {
            let p = (beta * (l - top)).exp();
            let q = (beta * (-l - top)).exp();
            z += p + q;
            weights.push(p - q);
        }
        let value = top + z.ln() / beta;
        let grad = self
            .hs
            .iter()
            .map(|hj| {
                let mut g = 0.0;
                for (i, wi) in weights.iter().enumerate() {
                    if *wi == 0.0 {
                        continue;
                    }
                    let v = vecs.column(i);
                    g += wi * (v.adjoint() * hj * v)[(0, 0)].re;
                }
                g / z
            })
            .collect();
        (value, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking on the smoothed objective.
fn bfgs(p: &Pencil, start: Vec<f64>, beta: f64, max_iter: usize) -> Vec<f64> {
    let n = start.len();
    let mut x = start;
    let (mut fx, mut gx) = p.smoothed(&x, beta);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    for _ in 0..max_iter {
        let g = DVector::from_column_slice(&gx);
        if g.norm() < 1e-14 {
            break;
        }
        let mut dir = -(&hinv * &g);
        if dir.dot(&g) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x
                .iter()
                .zip(dir.iter())
                .map(|(a, d)| a + step * d)
                .collect();
            let (fn_, gn) = p.smoothed(&xn, beta);
            if fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, gn.iter().zip(&gx).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        gx = gn;
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let id = DMatrix::<f64>::identity(n, n);
            let a = &id - &s * y.transpose() * rho;
            let b = &id - &y * s.transpose() * rho;
            hinv = &a * &hinv * &b + &s * s.transpose() * rho;
        }
        if improvement.abs() <= 1e-16 * fx.abs().max(1e-300) {
            break;
        }
    }
    x
}

fn minimize_from(p: &Pencil, start: Vec<f64>) -> Vec<f64> {
    let g0 = p.norm(&start).max(1e-300);
    let n = p.h0.nrows().max(1) as f64;
    let mut x = start;
    let mut beta = 1.0 / g0;
    while beta * g0 < 1e10 {
        x = bfgs(p, x, beta, 300);
        beta *= 10.0;
        // log(2n)/β bounds the smoothing bias; stop once it is negligible.
        if (2.0 * n).ln() / beta < 1e-11 * g0 {
            break;
        }
    }
    x
}

/// Orthonormal basis of the complement of `c` inside `R^r`.
fn complement(c: &[f64]) -> Vec<Vec<f64>> {
    let r = c.len();
    let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = vec![c.iter().map(|x| x / cn).collect()];
    for e in 0..r {
        if basis.len() == r {
            break;
        }
        let mut v = vec![0.0; r];
        v[e] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= p * bi;
                }
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-8 {
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    basis.remove(0);
    basis
}

/// `sup { |ω₁(a) − ω₂(a)| : a = a*, ‖[D, a]‖ ≤ 1 }`.
///
/// `a` runs over the self-adjoint part of the represented algebra. Because
/// `a ↦ ‖[D, a]‖` is a seminorm, the supremum equals `1 / min ‖[D, a]‖` over
/// the hyperplane `ω₁(a) − ω₂(a) = 1`, which is convex and minimised from
/// several starts.
pub fn connes_distance(
    t: &TripleData,
    w1: &StateFunctional,
    w2: &StateFunctional,
    opts: &DistanceOptions,
) -> Result<DistanceResult> {
    let n = t.dimension();
    if w1.dimension() != n || w2.dimension() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("states on dimension {n}"),
            found: format!("{} and {}", w1.dimension(), w2.dimension()),
        });
    }
    let d = t.dirac();
    let basis: Vec<CMatrix> = t
        .rep()
        .algebra()
        .hermitian_basis()
        .iter()
        .map(|h| t.rep().embed(h))
        .collect();
    let c: Vec<f64> = basis
        .iter()
        .map(|h| Ok((w1.evaluate(h)? - w2.evaluate(h)?).re))
        .collect::<Result<_>>()?;
    let c_norm = dot(&c, &c).sqrt();
    let done = |distance: f64, unbounded: bool, maximizer: Option<CMatrix>| DistanceResult {
        distance,
        unbounded,
        maximizer,
        restarts: opts.restarts,
        agreeing_restarts: opts.restarts,
        converged: true,
    };
    if c_norm <= 1e-13 {
        return Ok(done(0.0, false, Some(CMatrix::zeros(n, n))));
    }

    let i = Complex64::new(0.0, 1.0);
    let comms: Vec<CMatrix> = basis.iter().map(|h| (d * h - h * d) * i).collect();
    let k = basis.len();
    let mut real = DMatrix::<f64>::zeros(2 * n * n, k);
    for (col, m) in comms.iter().enumerate() {
        for (idx, z) in m.iter().enumerate() {
            real[(2 * idx, col)] = z.re;
            real[(2 * idx + 1, col)] = z.im;
        }
    }
    // Right singular vectors of the real commutator map split into kernel and range.
    let svd = real.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let (mut kernel, mut range) = (Vec::new(), Vec::new());
    for j in 0..k {
        let sj = if j < svd.singular_values.len() {
            svd.singular_values[j]
        } else {
            0.0
        };
        let v: Vec<f64> = if j < vt.nrows() {
            vt.row(j).iter().cloned().collect()
        } else {
            Vec::new()
        };
        if v.is_empty() {
            continue;
        }
        if sj <= 1e-10 * smax || smax == 0.0 {
            kernel.push(v);
        } else {
            range.push(v);
        }
    }

    let embed_coords = |z: &[f64]| -> CMatrix {
        let mut a = CMatrix::zeros(n, n);
        for (h, &zk) in basis.iter().zip(z) {
            a += h * Complex64::new(zk, 0.0);
        }
        a
    };

    // A commutant direction that separates the states makes the distance infinite.
    let mut kz = vec![0.0; k];
    for v in &kernel {
        let p = dot(&c, v);
        for (a, b) in kz.iter_mut().zip(v) {
            *a += p * b;
        }
    }
    if dot(&kz, &kz).sqrt() > 1e-9 * c_norm {
        return Ok(done(f64::INFINITY, true, Some(embed_coords(&kz))));
    }

    let c_red: Vec<f64> = range.iter().map(|v| dot(&c, v)).collect();
    let c_red_norm2 = dot(&c_red, &c_red);
    let reduced: Vec<CMatrix> = range
        .iter()
        .map(|v| {
            let mut m = CMatrix::zeros(n, n);
            for (ck, &vk) in comms.iter().zip(v) {
                m += ck * Complex64::new(vk, 0.0);
            }
            m
        })
        .collect();
    let y0: Vec<f64> = c_red.iter().map(|x| x / c_red_norm2).collect();
    let comp = complement(&c_red);
    let mut h0 = CMatrix::zeros(n, n);
    for (m, &y) in reduced.iter().zip(&y0) {
        h0 += m * Complex64::new(y, 0.0);
    }
    let hs: Vec<CMatrix> = comp
        .iter()
        .map(|u| {
            let mut m = CMatrix::zeros(n, n);
            for (rm, &ui) in reduced.iter().zip(u) {
                m += rm * Complex64::new(ui, 0.0);
            }
            m
        })
        .collect();
    let pencil = Pencil { h0, hs };
    let m = pencil.hs.len();

    let to_coords = |w: &[f64]| -> Vec<f64> {
        let mut y = y0.clone();
        for (u, &wj) in comp.iter().zip(w) {
            for (yi, ui) in y.iter_mut().zip(u) {
                *yi += wj * ui;
            }
        }
        let mut z = vec![0.0; k];
        for (v, &yj) in range.iter().zip(&y) {
            for (zi, vi) in z.iter_mut().zip(v) {
                *zi += yj * vi;
            }
        }
        z
    };

    // Frobenius-optimal point of the hyperplane: least squares in w.
    let w_frob: Vec<f64> = if m == 0 {
        Vec::new()
    } else {
        let mut g = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for a in 0..m {
            for bb in 0..m {
                g[(a, bb)] = super::trace_product(&pencil.hs[a], &pencil.hs[bb]).re;
            }
            b[a] = -super::trace_product(&pencil.hs[a], &pencil.h0).re;
        }
        g.lu()
            .solve(&b)
            .map(|v| v.iter().cloned().collect())
            .unwrap_or_else(|| vec![0.0; m])
    };
    let spread = 1f64.max(dot(&w_frob, &w_frob).sqrt());
    let restarts = opts.restarts.max(1);

    let finals: Vec<(f64, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|s| {
            let start: Vec<f64> = if s == 0 || m == 0 {
                w_frob.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(s as u64);
                w_frob
                    .iter()
                    .map(|x| x + spread * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            };
            let w = if m == 0 {
                start
            } else {
                minimize_from(&pencil, start)
            };
            (pencil.norm(&w), w)
        })
        .collect();

    let (best_idx, best) = finals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, f)| (i, f.0))
        .expect("at least one restart");
    if best <= 0.0 {
        return Ok(done(f64::INFINITY, true, None));
    }
    let distance = 1.0 / best;
    let agreeing = finals
        .iter()
        .filter(|(g, _)| (1.0 / g - distance).abs() <= opts.agreement_tol * 1f64.max(distance))
        .count();
    let z = to_coords(&finals[best_idx].1);
    let maximizer = embed_coords(&z) / Complex64::new(best, 0.0);
    Ok(DistanceResult {
        distance,
        unbounded: false,
        maximizer: Some(maximizer),
        restarts,
        agreeing_restarts: agreeing,
        converged: agreeing >= opts.required_agreement.min(restarts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::Signature;
    use crate::lincore::{
        c64, offdiag, random_hermitian, BlockAlgebra, HilbertSpace, Placement, Representation,
    };

    fn commutative(n: usize, d: CMatrix) -> TripleData {
        let alg = BlockAlgebra::new(vec![1; n], None).unwrap();
        let rep = Representation::new(
            alg,
            HilbertSpace::anonymous(n).unwrap(),
            (0..n)
                .map(|i| Placement {
                    summand: i,
                    indices: vec![i],
                    conjugate: false,
                })
                .collect(),
            true,
        )
        .unwrap();
        TripleData::new(rep, d, None, None, Signature::Euclidean).unwrap()
    }

    #[test]
    fn two_point_distance() {
        let m = c64(0.6, -1.7);
        let t = commutative(2, offdiag(m, m.conj()));
        let (p, q) = (
            StateFunctional::basis(2, 0).unwrap(),
            StateFunctional::basis(2, 1).unwrap(),
        );
        let r = connes_distance(&t, &p, &q, &DistanceOptions::default()).unwrap();
        assert!((r.distance - 1.0 / m.norm()).abs() < 1e-9);
        assert!(r.converged);
        let same = connes_distance(&t, &p, &p, &DistanceOptions::default()).unwrap();
        assert_eq!(same.distance, 0.0);
    }

    #[test]
    fn zero_dirac_is_unbounded() {
        let t = commutative(2, CMatrix::zeros(2, 2));
        let (p, q) = (
            StateFunctional::basis(2, 0).unwrap(),
            StateFunctional::basis(2, 1).unwrap(),
        );
        let r = connes_distance(&t, &p, &q, &DistanceOptions::default()).unwrap();
        assert!(r.unbounded && r.distance.is_infinite());
    }

    /// Independent oracle for three points: `a = (0, cos θ, sin θ)` modulo the
    /// identity, scanned over θ, then refined by golden section.
    fn three_point_oracle(d: &CMatrix, i: usize, j: usize) -> f64 {
        let value = |theta: f64| -> f64 {
            let a = crate::lincore::real_diag(&[0.0, theta.cos(), theta.sin()]);
            let comm = d * &a - &a * d;
            let diff = (a[(i, i)] - a[(j, j)]).re.abs();
            if diff < 1e-14 {
                0.0
            } else {
                diff / crate::lincore::op_norm(&comm)
            }
        };
        let steps = 20000;
        let (mut best_t, mut best_v) = (0.0, 0.0);
        for s in 0..steps {
            let th = std::f64::consts::PI * s as f64 / steps as f64;
            let v = value(th);
            if v > best_v {
                best_v = v;
                best_t = th;
            }
        }
        let h = std::f64::consts::PI / steps as f64;
        let (mut lo, mut hi) = (best_t - h, best_t + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if value(a) > value(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        value(0.5 * (lo + hi)).max(best_v)
    }

    #[test]
    fn three_point_matches_angle_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let d = random_hermitian(&mut rng, 3);
            let t = commutative(3, d.clone());
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let p = StateFunctional::basis(3, i).unwrap();
                let q = StateFunctional::basis(3, j).unwrap();
                let r = connes_distance(&t, &p, &q, &DistanceOptions::default()).unwrap();
                let oracle = three_point_oracle(&d, i, j);
                assert!(
                    (r.distance - oracle).abs() < 1e-6 * oracle.max(1.0),
                    "{} vs {oracle}",
                    r.distance
                );
                assert!(r.converged);
            }
        }
    }
}
