use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lincore::{
    eigenvalues_hermitian, ensure_hermitian, ensure_unitary, CMatrix, CVector, Complex64,
};

/// Real function applied to the Dirac spectrum.
#[derive(Clone)]
pub enum SpectralFunction {
    /// `Σ c_k x^k`.
    Polynomial(Vec<f64>),
    /// `exp(−x²/Λ²)`.
    GaussianCutoff(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl SpectralFunction {
    pub fn square() -> Self {
        SpectralFunction::Polynomial(vec![0.0, 0.0, 1.0])
    }

    pub fn quartic() -> Self {
        SpectralFunction::Polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SpectralFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            SpectralFunction::GaussianCutoff(l) => (-(x * x) / (l * l)).exp(),
            SpectralFunction::Custom(f) => f(x),
        }
    }

    /// Plus a constant.
    pub fn shifted(&self, c: f64) -> Self {
        match self {
            SpectralFunction::Polynomial(coef) => {
                let mut coef = coef.clone();
                if coef.is_empty() {
                    coef.push(0.0);
                }
                coef[0] += c;
                SpectralFunction::Polynomial(coef)
            }
            other => {
                let f = other.clone();
                SpectralFunction::Custom(Arc::new(move |x| f.eval(x) + c))
            }
        }
    }
}

impl fmt::Debug for SpectralFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralFunction::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            SpectralFunction::GaussianCutoff(l) => write!(f, "GaussianCutoff({l})"),
            SpectralFunction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl std::str::FromStr for SpectralFunction {
    type Err = Error;

    /// `x2`, `x4`, `poly:c0,c1,…`, or `cutoff:Λ`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "unknown spectral function {s:?} (use x2, x4, poly:c0,c1,..., cutoff:L)"
            ))
        };
        match s {
            "x2" => return Ok(Self::square()),
            "x4" => return Ok(Self::quartic()),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            let coef = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            return Ok(SpectralFunction::Polynomial(coef));
        }
        if let Some(rest) = s.strip_prefix("cutoff:") {
            let l: f64 = rest.trim().parse().map_err(|_| bad())?;
            if l <= 0.0 {
                return Err(bad());
            }
            return Ok(SpectralFunction::GaussianCutoff(l));
        }
        Err(bad())
    }
}

/// `Tr f(D) = Σ f(λ_i)`.
pub fn spectral_action(d: &CMatrix, f: &SpectralFunction) -> Result<f64> {
    ensure_hermitian(d, 1e-10)?;
    Ok(eigenvalues_hermitian(d)
        .into_iter()
        .map(|x| f.eval(x))
        .sum())
}

/// `Σ r_j U_j D U_j⁻¹`.
pub fn fluctuate(d: &CMatrix, autos: &[CMatrix], weights: &[f64]) -> Result<CMatrix> {
    if autos.len() != weights.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} weights", autos.len()),
            found: format!("{}", weights.len()),
        });
    }
    let mut out = CMatrix::zeros(d.nrows(), d.ncols());
    for (u, &r) in autos.iter().zip(weights) {
        if u.shape() != d.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", d.shape()),
                found: format!("{:?}", u.shape()),
            });
        }
        ensure_unitary(u, 1e-10)?;
        out += (u * d * u.adjoint()) * Complex64::new(r, 0.0);
    }
    Ok(out)
}

/// `⟨ψ, Dψ⟩`.
pub fn fermion_bilinear(psi: &CVector, d: &CMatrix) -> Result<Complex64> {
    if d.nrows() != psi.len() || d.ncols() != psi.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("({0}, {0})", psi.len()),
            found: format!("{:?}", d.shape()),
        });
    }
    Ok(psi.dotc(&(d * psi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincore::{approx_eq, c64, offdiag, random_hermitian, random_unitary, real_diag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn action_values() {
        let m = c64(1.3, -0.4);
        let d = offdiag(m, m.conj());
        let got = spectral_action(&d, &SpectralFunction::square()).unwrap();
        assert!((got - 2.0 * m.norm_sqr()).abs() < 1e-12);

        let f = SpectralFunction::Polynomial(vec![0.7, 1.0, 3.0]);
        let got = spectral_action(&CMatrix::zeros(5, 5), &f).unwrap();
        assert!((got - 5.0 * 0.7).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(&mut rng, 6);
        let h2 = &h * &h;
        let direct = (&h2 * &h2).trace().re;
        let got = spectral_action(&h, &SpectralFunction::quartic()).unwrap();
        assert!((got - direct).abs() <= 1e-10 * direct.abs());

        assert!(spectral_action(&offdiag(m, m), &SpectralFunction::square()).is_err());
    }

    #[test]
    fn fluctuation_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_hermitian(&mut rng, 3);
        let id = CMatrix::identity(3, 3);
        assert!(approx_eq(&fluctuate(&d, &[id], &[1.0]).unwrap(), &d, 1e-14));

        let u = random_unitary(&mut rng, 3);
        let got = fluctuate(&d, &[u.clone(), u.clone()], &[0.5, 0.5]).unwrap();
        assert!(approx_eq(&got, &(&u * &d * u.adjoint()), 1e-12));

        let swap = offdiag(c64(1.0, 0.0), c64(1.0, 0.0));
        let got = fluctuate(
            &real_diag(&[1.0, -1.0]),
            &[CMatrix::identity(2, 2), swap],
            &[0.5, 0.5],
        )
        .unwrap();
        assert_eq!(got, CMatrix::zeros(2, 2));

        assert!(fluctuate(&d, std::slice::from_ref(&d), &[1.0]).is_err());
    }

    #[test]
    fn bilinear_values() {
        let m = c64(0.8, 2.0);
        let d = offdiag(m, m.conj());
        assert_eq!(
            fermion_bilinear(&CVector::zeros(2), &d).unwrap(),
            c64(0.0, 0.0)
        );
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = CVector::from_vec(vec![c64(s, 0.0), c64(s, 0.0)]);
        let got = fermion_bilinear(&psi, &d).unwrap();
        assert!((got - (m + m.conj()) / 2.0).norm() < 1e-14);
        let e = CVector::from_vec(vec![c64(0.6, 0.0), c64(0.0, 0.8)]);
        assert!(
            (fermion_bilinear(&e, &CMatrix::identity(2, 2)).unwrap() - c64(1.0, 0.0)).norm()
                < 1e-14
        );
    }

    #[test]
    fn parse_functions() {
        let f: SpectralFunction = "poly:1,0,2".parse().unwrap();
        assert_eq!(f.eval(2.0), 9.0);
        assert!("cutoff:0".parse::<SpectralFunction>().is_err());
        assert!("sin".parse::<SpectralFunction>().is_err());
        assert_eq!(f.shifted(1.5).eval(0.0), 2.5);
    }
}
