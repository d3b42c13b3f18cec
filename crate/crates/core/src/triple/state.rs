use crate::error::{Error, Result};
use crate::lincore::{
    eigenvalues_hermitian, ensure_hermitian, hermitian_residual, CMatrix, CVector, Complex64,
};

/// Density operator of a state on a represented algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFunctional {
    density: CMatrix,
    pure: bool,
}

impl StateFunctional {
    /// Validates `ρ = ρ†`, `ρ ⪰ 0` and `Tr ρ = 1` within `tol`.
    pub fn new(density: CMatrix, tol: f64) -> Result<Self> {
        let n = density.nrows();
        if n == 0 || density.ncols() != n {
            return Err(Error::InvalidState(format!(
                "density has shape {:?}",
                density.shape()
            )));
        }
        let herm = hermitian_residual(&density);
        if herm > tol {
            return Err(Error::InvalidState(format!(
                "density not Hermitian (residual {herm:.3e})"
            )));
        }
        let tr = density.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > tol.max(1e-12) * n as f64 {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let eig = eigenvalues_hermitian(&density);
        let min = eig.first().copied().unwrap_or(0.0);
        if min < -tol.max(1e-12) {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        let sq = &density * &density;
        let pure = crate::lincore::rel_diff(&sq, &density) <= tol.max(1e-10);
        Ok(Self { density, pure })
    }

    /// Vector state `|ψ⟩⟨ψ|/‖ψ‖²`.
    pub fn from_vector(psi: &CVector) -> Result<Self> {
        let norm2 = psi.norm_squared();
        if norm2 == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let rho = psi * psi.adjoint() / Complex64::new(norm2, 0.0);
        Self::new(rho, 1e-10)
    }

    /// Vector state of the `i`-th basis vector.
    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::InvalidState(format!(
                "basis index {i} outside dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[i] = Complex64::new(1.0, 0.0);
        Self::from_vector(&v)
    }

    /// `I / dim`, the tracial state.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidState("dimension 0".into()));
        }
        Self::new(
            CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
            1e-12,
        )
    }

    pub fn density(&self) -> &CMatrix {
        &self.density
    }

    pub fn dimension(&self) -> usize {
        self.density.nrows()
    }

    pub fn is_pure(&self) -> bool {
        self.pure
    }

    /// `ω(a) = Tr(ρ a)`.
    pub fn evaluate(&self, a: &CMatrix) -> Result<Complex64> {
        if a.shape() != self.density.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.density.shape()),
                found: format!("{:?}", a.shape()),
            });
        }
        Ok(trace_product(&self.density, a))
    }
}

/// `Tr(x y)` without forming the product.
pub fn trace_product(x: &CMatrix, y: &CMatrix) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..x.nrows() {
        for k in 0..x.ncols() {
            acc += x[(i, k)] * y[(k, i)];
        }
    }
    acc
}

/// `Tr(ρ X)` for Hermitian `X`.
pub fn expectation(rho: &StateFunctional, x: &CMatrix) -> Result<f64> {
    ensure_hermitian(x, 1e-10)?;
    Ok(rho.evaluate(x)?.re)
}
