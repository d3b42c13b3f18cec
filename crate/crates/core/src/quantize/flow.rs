use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lincore::{
    ensure_hermitian, hermitian_eigen, hermitian_function, random_complex, CMatrix, Complex64,
    Representation,
};
use crate::triple::StateFunctional;

/// `exp(i t |D|)` with `|D| = √(D²)`.
pub fn geodesic_flow(d: &CMatrix, t: f64) -> Result<CMatrix> {
    ensure_hermitian(d, 1e-10)?;
    Ok(hermitian_function(d, |x| {
        Complex64::from_polar(1.0, t * x.abs())
    }))
}

/// `σ_t(a) = ρ^{it} a ρ^{−it}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularFlow {
    pub t: f64,
    pub forward: CMatrix,
    pub backward: CMatrix,
}

impl ModularFlow {
    pub fn apply(&self, a: &CMatrix) -> CMatrix {
        &self.forward * a * &self.backward
    }

    pub fn is_trivial(&self) -> bool {
        let n = self.forward.nrows();
        self.forward == CMatrix::identity(n, n) && self.backward == CMatrix::identity(n, n)
    }
}

/// Smallest eigenvalue of the density, or `NotFaithful` when it is not
/// strictly positive.
fn faithful_spectrum(omega: &StateFunctional) -> Result<(Vec<f64>, CMatrix)> {
    let (vals, vecs) = hermitian_eigen(omega.density());
    let min = vals.first().copied().unwrap_or(0.0);
    if min <= 1e-14 {
        return Err(Error::NotFaithful {
            min_eigenvalue: min,
        });
    }
    Ok((vals, vecs))
}

pub fn modular_flow(omega: &StateFunctional, t: f64) -> Result<ModularFlow> {
    let (vals, vecs) = faithful_spectrum(omega)?;
    let n = vals.len();
    let (lo, hi) = (vals[0], vals[n - 1]);
    // A multiple of the identity has trivial modular group.
    if hi - lo <= 1e-15 * hi {
        return Ok(ModularFlow {
            t,
            forward: CMatrix::identity(n, n),
            backward: CMatrix::identity(n, n),
        });
    }
    let power = |s: f64| {
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            vals.iter().map(|&p| Complex64::from_polar(1.0, s * p.ln())),
        ));
        &vecs * diag * vecs.adjoint()
    };
    Ok(ModularFlow {
        t,
        forward: power(t),
        backward: power(-t),
    })
}

/// `(ρ, a) ↦ σ_{−i}(a)`.
pub type ContinuationFn = Arc<dyn Fn(&CMatrix, &CMatrix) -> CMatrix + Send + Sync>;

/// Analytic continuation `σ_{−i}` used on the right-hand side of the KMS
/// identity `ω(a b) = ω(b σ_{−i}(a))`.
#[derive(Clone)]
pub enum KmsContinuation {
    /// `a ↦ ρ a ρ⁻¹`.
    Modular,
    Custom(ContinuationFn),
}

impl KmsContinuation {
    /// The inverted continuation `a ↦ ρ⁻¹ a ρ`, which must be flagged.
    pub fn inverted() -> Self {
        KmsContinuation::Custom(Arc::new(|rho, a| {
            let inv = rho.clone().try_inverse().expect("faithful density");
            &inv * a * rho
        }))
    }

    fn apply(&self, rho: &CMatrix, a: &CMatrix) -> CMatrix {
        match self {
            KmsContinuation::Modular => {
                let inv = rho.clone().try_inverse().expect("faithful density");
                rho * a * inv
            }
            KmsContinuation::Custom(f) => f(rho, a),
        }
    }
}

impl std::fmt::Debug for KmsContinuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KmsContinuation::Modular => write!(f, "Modular"),
            KmsContinuation::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmsReport {
    pub samples: usize,
    pub max_residual: f64,
    pub passed: bool,
    /// First sample above tolerance.
    pub first_violation: Option<usize>,
}

/// Check `ω(a b) = ω(b σ_{−i}(a))` on random pairs drawn from the
/// represented algebra, or from all matrices when no representation is given.
pub fn kms_check(
    rep: Option<&Representation>,
    omega: &StateFunctional,
    continuation: &KmsContinuation,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<KmsReport> {
    faithful_spectrum(omega)?;
    let n = omega.dimension();
    if let Some(r) = rep {
        if r.dimension() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("representation on dimension {n}"),
                found: format!("{}", r.dimension()),
            });
        }
    }
    let rho = omega.density();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    let mut first_violation = None;
    for s in 0..samples {
        let (a, b) = match rep {
            Some(r) => (
                r.embed(&r.algebra().random(&mut rng)),
                r.embed(&r.algebra().random(&mut rng)),
            ),
            None => (
                random_complex(&mut rng, n, n),
                random_complex(&mut rng, n, n),
            ),
        };
        let lhs = omega.evaluate(&(&a * &b))?;
        let rhs = omega.evaluate(&(&b * continuation.apply(rho, &a)))?;
        let scale = 1f64.max(lhs.norm()).max(rhs.norm());
        let r = (lhs - rhs).norm() / scale;
        max_residual = max_residual.max(r);
        if r > tol && first_violation.is_none() {
            first_violation = Some(s);
        }
    }
    Ok(KmsReport {
        samples,
        max_residual,
        passed: first_violation.is_none(),
        first_violation,
    })
}

/// Exploratory association of a Dirac operator to a faithful state: the
/// modular generator `K = −ln ρ` and its least-squares projection onto a
/// space of Dirac sections. Heuristic only.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicDirac {
    pub generator: CMatrix,
    pub nearest_section: CMatrix,
    pub relative_residual: f64,
}

pub const HEURISTIC_LABEL: &str = "heuristic (exploratory, not a verified construction)";

pub fn heuristic_dirac_from_state(
    omega: &StateFunctional,
    space: &super::ConfigurationSpace,
) -> Result<HeuristicDirac> {
    faithful_spectrum(omega)?;
    let generator = hermitian_function(omega.density(), |p| Complex64::new(-p.ln(), 0.0));
    let coords = space.project(&generator).ok_or_else(|| {
        Error::Config("heuristic projection needs a linear configuration space".into())
    })?;
    let nearest_section = space.point(&coords)?;
    let relative_residual = (&generator - &nearest_section).norm() / 1f64.max(generator.norm());
    Ok(HeuristicDirac {
        generator,
        nearest_section,
        relative_residual,
    })
}
