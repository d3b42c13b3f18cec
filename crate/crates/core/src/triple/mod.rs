//! Real even finite spectral triples.

mod action;
mod distance;
mod state;

pub use action::{fermion_bilinear, fluctuate, spectral_action, SpectralFunction};
pub use distance::{connes_distance, DistanceOptions, DistanceResult};
pub use state::{expectation, trace_product, StateFunctional};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fellbundle::{Grading, RealStructure, Signature};
use crate::lincore::{hermitian_residual, opposite_action, CMatrix, Complex64, Representation};

/// `(A, H, D, J, χ)`. `J` and `χ` are optional so that plain and odd
/// triples can be checked with the same battery.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleData {
    rep: Representation,
    d: CMatrix,
    j: Option<RealStructure>,
    grading: Option<Grading>,
    signature: Signature,
}

impl TripleData {
    pub fn new(
        rep: Representation,
        d: CMatrix,
        j: Option<RealStructure>,
        grading: Option<Grading>,
        signature: Signature,
    ) -> Result<Self> {
        let n = rep.dimension();
        if d.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: format!("Dirac operator of shape ({n}, {n})"),
                found: format!("{:?}", d.shape()),
            });
        }
        if let Some(j) = &j {
            if j.dimension() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("real structure on dimension {n}"),
                    found: format!("dimension {}", j.dimension()),
                });
            }
        }
        if let Some(g) = &grading {
            if g.dimension() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("grading on dimension {n}"),
                    found: format!("dimension {}", g.dimension()),
                });
            }
        }
        Ok(Self {
            rep,
            d,
            j,
            grading,
            signature,
        })
    }

    pub fn rep(&self) -> &Representation {
        &self.rep
    }

    pub fn dirac(&self) -> &CMatrix {
        &self.d
    }

    pub fn real_structure(&self) -> Option<&RealStructure> {
        self.j.as_ref()
    }

    pub fn grading(&self) -> Option<&Grading> {
        self.grading.as_ref()
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn dimension(&self) -> usize {
        self.rep.dimension()
    }

    pub fn with_dirac(&self, d: CMatrix) -> Result<Self> {
        Self::new(
            self.rep.clone(),
            d,
            self.j.clone(),
            self.grading.clone(),
            self.signature,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Passed,
    Failed,
    Skipped,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Passed => "pass",
            CheckStatus::Failed => "FAIL",
            CheckStatus::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub max_residual: f64,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleReport {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub checks: Vec<TripleCheck>,
}

impl TripleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Failed)
    }

    pub fn check(&self, name: &str) -> Option<&TripleCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_SELF_ADJOINT: &str = "self-adjoint";
pub const CHECK_J_SIGN: &str = "DJ = ±JD";
pub const CHECK_GRADING: &str = "Dχ = −χD";
pub const CHECK_J_SQUARED: &str = "J² = ±1";
pub const CHECK_ZEROTH_ORDER: &str = "zeroth order";
pub const CHECK_FIRST_ORDER: &str = "first order";

fn structural(name: &'static str, residual: Option<f64>, tol: f64, what: &str) -> TripleCheck {
    match residual {
        None => TripleCheck {
            name,
            status: CheckStatus::Skipped,
            max_residual: 0.0,
            witness: None,
        },
        Some(r) => TripleCheck {
            name,
            status: if r <= tol {
                CheckStatus::Passed
            } else {
                CheckStatus::Failed
            },
            max_residual: r,
            witness: (r > tol).then(|| format!("{what} (relative residual {r:.3e})")),
        },
    }
}

/// Run the real-even-triple battery. Order-one conditions are sampled on
/// `samples` random pairs `(a, b)`, sample `s` drawing from ChaCha stream `s`.
pub fn check_axioms(t: &TripleData, samples: usize, seed: u64, tol: f64) -> TripleReport {
    let d = &t.d;
    let scale = 1f64.max(d.norm());
    let mut checks = Vec::new();

    checks.push(structural(
        CHECK_SELF_ADJOINT,
        Some(hermitian_residual(d)),
        tol,
        "D != D*",
    ));

    let j_sign = t.j.as_ref().map(|j| {
        let s = Complex64::new(f64::from(j.sign_dj()), 0.0);
        (d - j.conjugate_operator(d) * s).norm() / scale
    });
    checks.push(structural(CHECK_J_SIGN, j_sign, tol, "D J != ±J D"));

    let grading = t.grading.as_ref().map(|g| {
        let chi = g.matrix();
        (d * &chi + &chi * d).norm() / scale
    });
    checks.push(structural(CHECK_GRADING, grading, tol, "D χ != −χ D"));

    checks.push(structural(
        CHECK_J_SQUARED,
        t.j.as_ref().map(|j| j.j_squared_residual()),
        tol,
        "J² != ±1",
    ));

    match &t.j {
        None => {
            checks.push(structural(CHECK_ZEROTH_ORDER, None, tol, ""));
            checks.push(structural(CHECK_FIRST_ORDER, None, tol, ""));
        }
        Some(j) => {
            let alg = t.rep.algebra();
            let results: Vec<(f64, f64)> = (0..samples.max(1))
                .into_par_iter()
                .map(|s| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(s as u64);
                    let a = t.rep.embed(&alg.random(&mut rng));
                    let b = opposite_action(&alg.random(&mut rng), j, &t.rep)
                        .expect("dimensions checked");
                    let zeroth = &a * &b - &b * &a;
                    let da = d * &a - &a * d;
                    let first = &da * &b - &b * &da;
                    let ab = 1f64.max(a.norm() * b.norm());
                    (zeroth.norm() / ab, first.norm() / (ab * scale))
                })
                .collect();
            for (name, idx, what) in [
                (CHECK_ZEROTH_ORDER, 0, "[a, b°] != 0"),
                (CHECK_FIRST_ORDER, 1, "[[D, a], b°] != 0"),
            ] {
                let vals: Vec<f64> = results
                    .iter()
                    .map(|r| if idx == 0 { r.0 } else { r.1 })
                    .collect();
                let max = vals.iter().cloned().fold(0.0, f64::max);
                let first_bad = vals.iter().position(|&v| v > tol);
                checks.push(TripleCheck {
                    name,
                    status: if first_bad.is_some() {
                        CheckStatus::Failed
                    } else {
                        CheckStatus::Passed
                    },
                    max_residual: max,
                    witness: first_bad.map(|s| {
                        format!("{what} at sample {s} (relative residual {:.3e})", vals[s])
                    }),
                });
            }
        }
    }

    TripleReport {
        samples: samples.max(1),
        seed,
        tol,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincore::{c64, offdiag, BlockAlgebra, HilbertSpace, Placement};

    fn two_point(m: Complex64) -> TripleData {
        let alg = BlockAlgebra::new(vec![1, 1], None).unwrap();
        let space = HilbertSpace::anonymous(2).unwrap();
        let rep = Representation::new(
            alg,
            space,
            vec![
                Placement {
                    summand: 0,
                    indices: vec![0],
                    conjugate: false,
                },
                Placement {
                    summand: 1,
                    indices: vec![1],
                    conjugate: false,
                },
            ],
            true,
        )
        .unwrap();
        TripleData::new(rep, offdiag(m, m.conj()), None, None, Signature::Euclidean).unwrap()
    }

    #[test]
    fn zero_dirac_passes() {
        let t = two_point(c64(0.0, 0.0));
        let r = check_axioms(&t, 50, 1, 1e-10);
        assert!(r.all_passed());
        assert_eq!(
            r.check(CHECK_FIRST_ORDER).unwrap().status,
            CheckStatus::Skipped
        );
    }

    #[test]
    fn non_hermitian_dirac_fails() {
        let t = two_point(c64(1.0, 0.0));
        let bad = t.with_dirac(offdiag(c64(1.0, 0.0), c64(2.0, 0.0))).unwrap();
        let r = check_axioms(&bad, 10, 1, 1e-10);
        assert_eq!(
            r.check(CHECK_SELF_ADJOINT).unwrap().status,
            CheckStatus::Failed
        );
    }

    #[test]
    fn shape_checked() {
        let t = two_point(c64(1.0, 0.0));
        assert!(t.with_dirac(CMatrix::zeros(3, 3)).is_err());
    }
}
