//! Dense complex linear algebra shared by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Equality between matrices is
//! always a relative Frobenius comparison; see [`approx_eq`].

mod algebra;
mod hilbert;

pub use algebra::{AlgebraElement, BlockAlgebra};
pub use hilbert::{opposite_action, HilbertSpace, Placement, Representation};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative tolerance for matrix identities.
pub const DEFAULT_TOL: f64 = 1e-10;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn commutator(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    if x.shape() != y.shape() || x.nrows() != x.ncols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?} square", x.shape()),
            found: format!("{:?}", y.shape()),
        });
    }
    Ok(x * y - y * x)
}

/// `‖a − b‖_F / max(1, ‖a‖_F, ‖b‖_F)`.
pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let scale = 1f64.max(a.norm()).max(b.norm());
    (a - b).norm() / scale
}

pub fn approx_eq(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    a.shape() == b.shape() && rel_diff(a, b) <= tol
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    rel_diff(m, &m.adjoint())
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    hermitian_residual(m) <= tol
}

pub fn ensure_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    let residual = hermitian_residual(m);
    if residual <= tol {
        Ok(())
    } else {
        Err(Error::NotHermitian { residual })
    }
}

pub fn unitary_residual(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let id = CMatrix::identity(u.nrows(), u.ncols());
    rel_diff(&(u.adjoint() * u), &id)
}

pub fn ensure_unitary(u: &CMatrix, tol: f64) -> Result<()> {
    let residual = unitary_residual(u);
    if residual <= tol {
        Ok(())
    } else {
        Err(Error::NotUnitary { residual })
    }
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
///
/// The input is symmetrised first so that round-off asymmetry never leaks
/// into the solver.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigenvalues_hermitian(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Apply a real function to a Hermitian matrix through its spectrum.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&x| f(x)),
    ));
    &vectors * diag * vectors.adjoint()
}

/// Numerical rank of a set of real vectors given as columns.
pub fn real_rank(columns: &DMatrix<f64>, rel_cutoff: f64) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let sv = columns.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_cutoff * max).count()
}

/// Complex dimension of the span of a set of matrices.
pub fn complex_span_dim(mats: &[CMatrix], rel_cutoff: f64) -> usize {
    if mats.is_empty() {
        return 0;
    }
    let len = mats[0].len();
    let mut cols = CMatrix::zeros(len, mats.len());
    for (k, m) in mats.iter().enumerate() {
        for (i, z) in m.iter().enumerate() {
            cols[(i, k)] = *z;
        }
    }
    let sv = cols.svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_cutoff * max).count()
}

/// Real-linear coordinates `(re, im)` of every entry, column-major.
pub fn realify(m: &CMatrix) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_complex(rng, n, n);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_complex(rng, n, n);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut phases = CMatrix::zeros(n, n);
    for i in 0..n {
        let d = r[(i, i)];
        let norm = d.norm();
        phases[(i, i)] = if norm > 0.0 {
            d / norm
        } else {
            Complex64::new(1.0, 0.0)
        };
    }
    q * phases
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_iterator(
        n,
        (0..n).map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        }),
    )
}

/// Copy `block` into `target` with its top-left corner at `(row, col)`.
pub fn set_block(target: &mut CMatrix, row: usize, col: usize, block: &CMatrix) {
    target
        .view_mut((row, col), (block.nrows(), block.ncols()))
        .copy_from(block);
}

pub fn get_block(source: &CMatrix, row: usize, col: usize, rows: usize, cols: usize) -> CMatrix {
    source.view((row, col), (rows, cols)).into_owned()
}

pub fn offdiag(a: Complex64, b: Complex64) -> CMatrix {
    let z = Complex64::new(0.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[z, a, b, z])
}

pub fn diag(values: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| Complex64::new(v, 0.0)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn op_norm_cases() {
        assert_eq!(op_norm(&CMatrix::zeros(3, 3)), 0.0);
        assert!((op_norm(&CMatrix::identity(3, 3)) - 1.0).abs() < 1e-14);
        assert!((op_norm(&real_diag(&[2.0, -5.0])) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn commutator_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_complex(&mut rng, 3, 3);
        let id = CMatrix::identity(3, 3);
        assert_eq!(commutator(&id, &y).unwrap().norm(), 0.0);
        assert_eq!(commutator(&y, &y).unwrap().norm(), 0.0);

        // [diag(1,2), offdiag(1,1)] = offdiag(1·1 − 1·2, 2·1 − 1·1) = offdiag(−1, 1)
        let x = real_diag(&[1.0, 2.0]);
        let o = offdiag(c64(1.0, 0.0), c64(1.0, 0.0));
        let got = commutator(&x, &o).unwrap();
        assert_eq!(got, offdiag(c64(-1.0, 0.0), c64(1.0, 0.0)));

        assert!(matches!(
            commutator(&CMatrix::zeros(2, 2), &CMatrix::zeros(3, 3)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..6 {
            let u = random_unitary(&mut rng, n);
            assert!(unitary_residual(&u) < 1e-12);
        }
    }

    #[test]
    fn hermitian_eigen_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 5);
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = &vecs * real_diag(&vals) * vecs.adjoint();
        assert!(approx_eq(&rebuilt, &h, 1e-12));
    }

    #[test]
    fn span_dimension() {
        let a = real_diag(&[1.0, 0.0]);
        let b = real_diag(&[0.0, 1.0]);
        let c = real_diag(&[2.0, 3.0]);
        assert_eq!(complex_span_dim(&[a, b, c], 1e-10), 2);
        assert_eq!(complex_span_dim(&[CMatrix::zeros(2, 2)], 1e-10), 0);
    }
}
