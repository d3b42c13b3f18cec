use rand::Rng;

use super::bundle::FellBundleGeometry;
use super::structures::RealStructure;
use crate::error::{Error, Result};
use crate::lincore::{get_block, random_complex, random_hermitian, set_block, CMatrix, Complex64};

/// One fiber element per object, sitting over the arrow `(pairing[i], i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracSection {
    pairing: Vec<usize>,
    elements: Vec<CMatrix>,
}

impl DiracSection {
    pub fn new(
        geom: &FellBundleGeometry,
        pairing: Vec<usize>,
        elements: Vec<CMatrix>,
    ) -> Result<Self> {
        let n = geom.len();
        if pairing.len() != n || elements.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} pairing entries and elements"),
                found: format!("{} and {}", pairing.len(), elements.len()),
            });
        }
        for (i, (&s, e)) in pairing.iter().zip(&elements).enumerate() {
            if s >= n {
                return Err(Error::Geometry(format!(
                    "pairing sends object {i} to missing object {s}"
                )));
            }
            let shape = (geom.dims()[s], geom.dims()[i]);
            if e.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: format!("{shape:?} for the element at object {i}"),
                    found: format!("{:?}", e.shape()),
                });
            }
        }
        Ok(Self { pairing, elements })
    }

    pub fn zero(geom: &FellBundleGeometry, pairing: Vec<usize>) -> Result<Self> {
        let elements = pairing
            .iter()
            .enumerate()
            .map(|(i, &s)| CMatrix::zeros(geom.dims()[s.min(geom.len() - 1)], geom.dims()[i]))
            .collect();
        Self::new(geom, pairing, elements)
    }

    /// Random section with `e_{σ(i)} = e_i†` for an involutive pairing `σ`.
    pub fn random_self_adjoint<R: Rng + ?Sized>(
        geom: &FellBundleGeometry,
        pairing: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        if !is_involution(&pairing) {
            return Err(Error::Geometry(format!(
                "pairing {pairing:?} is not an involution"
            )));
        }
        let dims = geom.dims();
        let mut elements: Vec<Option<CMatrix>> = vec![None; pairing.len()];
        for i in 0..pairing.len() {
            let s = pairing[i];
            if elements[i].is_some() {
                continue;
            }
            if s == i {
                elements[i] = Some(random_hermitian(rng, dims[i]));
            } else {
                let e = random_complex(rng, dims[s], dims[i]);
                elements[s] = Some(e.adjoint());
                elements[i] = Some(e);
            }
        }
        Self::new(
            geom,
            pairing,
            elements.into_iter().map(Option::unwrap).collect(),
        )
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }
}

pub fn is_involution(sigma: &[usize]) -> bool {
    sigma
        .iter()
        .enumerate()
        .all(|(i, &s)| s < sigma.len() && sigma[s] == i)
}

/// Block matrix on `⊕ C^{n_i}` with block `(σ(i), i) = e_i`.
pub fn assemble(geom: &FellBundleGeometry, section: &DiracSection) -> CMatrix {
    let n = geom.total_dim();
    let offsets = geom.offsets();
    let mut m = CMatrix::zeros(n, n);
    for (i, (&s, e)) in section.pairing.iter().zip(&section.elements).enumerate() {
        set_block(&mut m, offsets[s], offsets[i], e);
    }
    m
}

/// Random matrix supported on the blocks `(σ(i), i)` of a pairing.
pub fn random_supported<R: Rng + ?Sized>(
    geom: &FellBundleGeometry,
    pairing: &[usize],
    rng: &mut R,
) -> CMatrix {
    let n = geom.total_dim();
    let offsets = geom.offsets();
    let dims = geom.dims();
    let mut m = CMatrix::zeros(n, n);
    for (i, &s) in pairing.iter().enumerate() {
        set_block(
            &mut m,
            offsets[s],
            offsets[i],
            &random_complex(rng, dims[s], dims[i]),
        );
    }
    m
}

/// Orthogonal projection onto `{D = D*, D = ±J D J⁻¹}`: the average over
/// the group generated by the adjoint and conjugation by `J`.
pub fn project_to_dirac(m: &CMatrix, j: Option<&RealStructure>) -> CMatrix {
    let half = Complex64::new(0.5, 0.0);
    let sa = (m + m.adjoint()) * half;
    match j {
        None => sa,
        Some(j) => {
            let s = Complex64::new(f64::from(j.sign_dj()), 0.0);
            (&sa + j.conjugate_operator(&sa) * s) * half
        }
    }
}

/// Why a block matrix fails to be a Dirac section.
#[derive(Debug, Clone, PartialEq)]
pub enum SectionDiagnostic {
    /// More than one nonzero block in these block rows / columns.
    MultipleBlocksPerRow { rows: Vec<usize>, cols: Vec<usize> },
    NotSelfAdjoint {
        block: (usize, usize),
        residual: f64,
    },
    RealityViolation {
        block: (usize, usize),
        residual: f64,
    },
}

impl SectionDiagnostic {
    pub fn reason(&self) -> &'static str {
        match self {
            SectionDiagnostic::MultipleBlocksPerRow { .. } => "multiple blocks per row/column",
            SectionDiagnostic::NotSelfAdjoint { .. } => "not self-adjoint",
            SectionDiagnostic::RealityViolation { .. } => "violates D = J D J^-1",
        }
    }
}

impl std::fmt::Display for SectionDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let one = |v: &[usize]| {
            v.iter()
                .map(|x| (x + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            SectionDiagnostic::MultipleBlocksPerRow { rows, cols } => {
                write!(
                    f,
                    "{} (rows {{{}}}, columns {{{}}})",
                    self.reason(),
                    one(rows),
                    one(cols)
                )
            }
            SectionDiagnostic::NotSelfAdjoint { block, residual }
            | SectionDiagnostic::RealityViolation { block, residual } => write!(
                f,
                "{} at block ({}, {}) (residual {residual:.3e})",
                self.reason(),
                block.0 + 1,
                block.1 + 1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionVerdict {
    pub accepted: bool,
    pub diagnostics: Vec<SectionDiagnostic>,
}

impl SectionVerdict {
    pub fn has_multiple_blocks(&self) -> bool {
        self.diagnostics
            .iter()
            .any(|d| matches!(d, SectionDiagnostic::MultipleBlocksPerRow { .. }))
    }
}

fn block_views(geom: &FellBundleGeometry, m: &CMatrix) -> Vec<Vec<CMatrix>> {
    let offsets = geom.offsets();
    let dims = geom.dims();
    (0..geom.len())
        .map(|r| {
            (0..geom.len())
                .map(|c| get_block(m, offsets[r], offsets[c], dims[r], dims[c]))
                .collect()
        })
        .collect()
}

/// Nonzero-block grid of `m`, a block counting as zero below `tol·max(1, ‖m‖)`.
pub fn block_support(geom: &FellBundleGeometry, m: &CMatrix, tol: f64) -> Vec<Vec<bool>> {
    let cutoff = tol * 1f64.max(m.norm());
    block_views(geom, m)
        .iter()
        .map(|row| row.iter().map(|b| b.norm() > cutoff).collect())
        .collect()
}

/// Classify an arbitrary block matrix against the Dirac-section conditions:
/// one block per row and column, self-adjointness, and `D = ±J D J⁻¹`.
pub fn classify_matrix(
    geom: &FellBundleGeometry,
    m: &CMatrix,
    j: Option<&RealStructure>,
    tol: f64,
) -> Result<SectionVerdict> {
    let n = geom.total_dim();
    if m.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            expected: format!("({n}, {n})"),
            found: format!("{:?}", m.shape()),
        });
    }
    let scale = 1f64.max(m.norm());
    let support = block_support(geom, m, tol);
    let k = geom.len();
    let rows: Vec<usize> = (0..k)
        .filter(|&r| support[r].iter().filter(|&&b| b).count() > 1)
        .collect();
    let cols: Vec<usize> = (0..k)
        .filter(|&c| (0..k).filter(|&r| support[r][c]).count() > 1)
        .collect();

    let mut diagnostics = Vec::new();
    if !rows.is_empty() || !cols.is_empty() {
        diagnostics.push(SectionDiagnostic::MultipleBlocksPerRow { rows, cols });
    }

    let sa = block_views(geom, &(m - m.adjoint()));
    for (r, row) in sa.iter().enumerate() {
        for (c, b) in row.iter().enumerate() {
            let residual = b.norm() / scale;
            if residual > tol && r <= c {
                diagnostics.push(SectionDiagnostic::NotSelfAdjoint {
                    block: (r, c),
                    residual,
                });
            }
        }
    }

    if let Some(j) = j {
        if j.dimension() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("real structure on dimension {n}"),
                found: format!("dimension {}", j.dimension()),
            });
        }
        let jd = j.conjugate_operator(m) * Complex64::new(f64::from(j.sign_dj()), 0.0);
        let diff = block_views(geom, &(m - jd));
        for (r, row) in diff.iter().enumerate() {
            for (c, b) in row.iter().enumerate() {
                let residual = b.norm() / scale;
                if residual > tol {
                    diagnostics.push(SectionDiagnostic::RealityViolation {
                        block: (r, c),
                        residual,
                    });
                }
            }
        }
    }

    Ok(SectionVerdict {
        accepted: diagnostics.is_empty(),
        diagnostics,
    })
}

/// Accept iff the assembled section is self-adjoint and satisfies `DJ = ±JD`.
pub fn is_dirac_section(
    geom: &FellBundleGeometry,
    section: &DiracSection,
    j: Option<&RealStructure>,
    tol: f64,
) -> Result<SectionVerdict> {
    classify_matrix(geom, &assemble(geom, section), j, tol)
}

/// Read a block matrix back as a section. Fails with the verdict when some
/// row or column holds more than one nonzero block.
pub fn section_from_matrix(
    geom: &FellBundleGeometry,
    m: &CMatrix,
    tol: f64,
) -> std::result::Result<DiracSection, SectionVerdict> {
    let verdict = classify_matrix(geom, m, None, tol).map_err(|_| SectionVerdict {
        accepted: false,
        diagnostics: Vec::new(),
    })?;
    if verdict.has_multiple_blocks() {
        return Err(verdict);
    }
    let support = block_support(geom, m, tol);
    let k = geom.len();
    let mut pairing: Vec<Option<usize>> = (0..k).map(|c| (0..k).find(|&r| support[r][c])).collect();
    for c in 0..k {
        if pairing[c].is_none() {
            let partner = (0..k).find(|&r| pairing[r] == Some(c));
            pairing[c] = Some(partner.unwrap_or(c));
        }
    }
    let pairing: Vec<usize> = pairing.into_iter().map(Option::unwrap).collect();
    let blocks = block_views(geom, m);
    let elements = pairing
        .iter()
        .enumerate()
        .map(|(c, &r)| blocks[r][c].clone())
        .collect();
    Ok(DiracSection::new(geom, pairing, elements).expect("shapes come from the geometry"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::{build_fell_bundle, build_pair_groupoid};
    use crate::lincore::{c64, is_hermitian, offdiag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom(dims: &[usize]) -> FellBundleGeometry {
        let ids: Vec<String> = (1..=dims.len()).map(|i| i.to_string()).collect();
        build_fell_bundle(build_pair_groupoid(&ids).unwrap(), dims).unwrap()
    }

    #[test]
    fn swap_section_on_line_bundle() {
        let g = geom(&[1, 1]);
        let m = c64(0.3, -1.2);
        let s = DiracSection::new(
            &g,
            vec![1, 0],
            vec![
                CMatrix::from_element(1, 1, m),
                CMatrix::from_element(1, 1, m.conj()),
            ],
        )
        .unwrap();
        // Block (2, 1) holds e_1 = m, block (1, 2) holds e_2 = m̄.
        assert_eq!(assemble(&g, &s), offdiag(m.conj(), m));
        assert!(is_dirac_section(&g, &s, None, 1e-10).unwrap().accepted);
    }

    #[test]
    fn diagonal_hermitian_section_is_block_diagonal() {
        let g = geom(&[2, 1, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = DiracSection::random_self_adjoint(&g, vec![0, 1, 2], &mut rng).unwrap();
        let d = assemble(&g, &s);
        assert!(is_hermitian(&d, 1e-14));
        let sup = block_support(&g, &d, 1e-12);
        for (r, row) in sup.iter().enumerate() {
            for (c, &b) in row.iter().enumerate() {
                assert_eq!(b, r == c);
            }
        }
    }

    #[test]
    fn zero_section_accepted() {
        let g = geom(&[2, 2, 1, 1]);
        let s = DiracSection::zero(&g, vec![1, 0, 3, 2]).unwrap();
        assert_eq!(assemble(&g, &s), CMatrix::zeros(6, 6));
        assert!(is_dirac_section(&g, &s, None, 1e-10).unwrap().accepted);
    }

    #[test]
    fn non_injective_pairing_reports_rows() {
        let g = geom(&[1, 1, 1]);
        let one = CMatrix::from_element(1, 1, c64(1.0, 0.0));
        let s = DiracSection::new(&g, vec![0, 0, 2], vec![one.clone(), one.clone(), one]).unwrap();
        let v = is_dirac_section(&g, &s, None, 1e-10).unwrap();
        assert!(!v.accepted);
        assert!(v
            .diagnostics
            .contains(&SectionDiagnostic::MultipleBlocksPerRow {
                rows: vec![0],
                cols: vec![]
            }));
    }

    #[test]
    fn matrix_round_trip() {
        let g = geom(&[2, 1, 3, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = DiracSection::random_self_adjoint(&g, vec![2, 3, 0, 1], &mut rng).unwrap();
        let d = assemble(&g, &s);
        let back = section_from_matrix(&g, &d, 1e-12).unwrap();
        assert_eq!(back, s);
    }
}
