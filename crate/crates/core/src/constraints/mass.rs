use crate::lincore::{hermitian_eigen, CMatrix};

/// Singular values of a mass block and the rotations to mass eigenstates,
/// `M = U Σ V†` with full unitaries `U` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassSpectrum {
    /// Descending, padded with zeros to `max(rows, cols)`.
    pub masses: Vec<f64>,
    /// `(mass, multiplicity)` groups in descending order.
    pub multiplicities: Vec<(f64, usize)>,
    pub u: CMatrix,
    pub v: CMatrix,
}

/// Complete the orthonormal columns of `q` to a unitary of size `n`.
fn complete_unitary(q: &CMatrix, n: usize) -> CMatrix {
    let k = q.ncols();
    if k >= n {
        return q.columns(0, n).into_owned();
    }
    let proj = CMatrix::identity(n, n) - q * q.adjoint();
    let (vals, vecs) = hermitian_eigen(&proj);
    let mut out = CMatrix::zeros(n, n);
    out.columns_mut(0, k).copy_from(q);
    // Eigenvalue-1 eigenvectors of the complementary projector, largest last.
    for (c, idx) in (0..n).rev().take(n - k).enumerate() {
        debug_assert!(vals[idx] > 0.5);
        out.column_mut(k + c).copy_from(&vecs.column(idx));
    }
    out
}

/// Group nearly equal masses, the tolerance relative to the largest mass.
pub fn group_masses(masses: &[f64], rel_tol: f64) -> Vec<(f64, usize)> {
    let max = masses.iter().cloned().fold(0.0, f64::max);
    let tol = if max == 0.0 { 0.0 } else { rel_tol * max };
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &m in masses {
        match groups.last_mut() {
            Some((g, count)) if (*g - m).abs() <= tol => *count += 1,
            _ => groups.push((m, 1)),
        }
    }
    groups
}

pub fn diagonalize_mass(m: &CMatrix) -> MassSpectrum {
    let (rows, cols) = m.shape();
    let size = rows.max(cols);
    if rows == 0 || cols == 0 {
        return MassSpectrum {
            masses: vec![0.0; size],
            multiplicities: if size == 0 { vec![] } else { vec![(0.0, size)] },
            u: CMatrix::identity(rows, rows),
            v: CMatrix::identity(cols, cols),
        };
    }
    let svd = m.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u_thin = svd.u.unwrap();
    let v_thin = svd.v_t.unwrap().adjoint();
    let u_sorted = CMatrix::from_fn(rows, order.len(), |i, c| u_thin[(i, order[c])]);
    let v_sorted = CMatrix::from_fn(cols, order.len(), |i, c| v_thin[(i, order[c])]);
    let mut masses: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    masses.resize(size, 0.0);
    let multiplicities = group_masses(&masses, 1e-10);
    MassSpectrum {
        masses,
        multiplicities,
        u: complete_unitary(&u_sorted, rows),
        v: complete_unitary(&v_sorted, cols),
    }
}

impl MassSpectrum {
    /// `U† M V`, which is diagonal with the masses on the diagonal.
    pub fn rotated(&self, m: &CMatrix) -> CMatrix {
        self.u.adjoint() * m * &self.v
    }

    pub fn nonzero_count(&self, rel_tol: f64) -> usize {
        let max = self.masses.first().copied().unwrap_or(0.0);
        self.masses
            .iter()
            .filter(|&&x| max > 0.0 && x > rel_tol * max)
            .count()
    }
}

/// `kron(I_k, m)`, the same mass block repeated over `k` copies.
pub fn repeated_block(m: &CMatrix, k: usize) -> CMatrix {
    CMatrix::identity(k, k).kronecker(m)
}
