use rand::Rng;
use std::fmt;

use super::{random_complex, random_hermitian, random_unitary, CMatrix, Complex64};
use crate::error::{Error, Result};

/// Finite direct sum `M_{n_1}(C) ⊕ … ⊕ M_{n_k}(C)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockAlgebra {
    summands: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl BlockAlgebra {
    pub fn new(summands: Vec<usize>, labels: Option<Vec<String>>) -> Result<Self> {
        if summands.is_empty() {
            return Err(Error::Geometry("algebra needs at least one summand".into()));
        }
        if let Some(i) = summands.iter().position(|&n| n == 0) {
            return Err(Error::Geometry(format!("summand {i} has size 0")));
        }
        if let Some(l) = &labels {
            if l.len() != summands.len() {
                return Err(Error::Geometry(format!(
                    "{} labels for {} summands",
                    l.len(),
                    summands.len()
                )));
            }
        }
        Ok(Self { summands, labels })
    }

    /// The full matrix algebra `M_n(C)`.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(vec![n], None)
    }

    pub fn summands(&self) -> &[usize] {
        &self.summands
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => format!("M{}", self.summands[i]),
        }
    }

    /// Complex dimension `Σ n_i²`.
    pub fn dimension(&self) -> usize {
        self.summands.iter().map(|n| n * n).sum()
    }

    pub fn element(&self, blocks: Vec<CMatrix>) -> Result<AlgebraElement> {
        if blocks.len() != self.summands.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} blocks", self.summands.len()),
                found: format!("{} blocks", blocks.len()),
            });
        }
        for (i, (b, &n)) in blocks.iter().zip(&self.summands).enumerate() {
            if b.shape() != (n, n) {
                return Err(Error::ShapeMismatch {
                    expected: format!("block {i} of shape ({n}, {n})"),
                    found: format!("{:?}", b.shape()),
                });
            }
        }
        Ok(AlgebraElement { blocks })
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self
                .summands
                .iter()
                .map(|&n| CMatrix::identity(n, n))
                .collect(),
        }
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self
                .summands
                .iter()
                .map(|&n| CMatrix::zeros(n, n))
                .collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement {
            blocks: self
                .summands
                .iter()
                .map(|&n| random_complex(rng, n, n))
                .collect(),
        }
    }

    pub fn random_hermitian<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement {
            blocks: self
                .summands
                .iter()
                .map(|&n| random_hermitian(rng, n))
                .collect(),
        }
    }

    pub fn random_unitary<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement {
            blocks: self
                .summands
                .iter()
                .map(|&n| random_unitary(rng, n))
                .collect(),
        }
    }

    /// Orthonormal basis (for `Re Tr(a* b)`) of the real space of
    /// self-adjoint elements. Its length is `Σ n_i²`.
    pub fn hermitian_basis(&self) -> Vec<AlgebraElement> {
        let mut basis = Vec::with_capacity(self.dimension());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (k, &n) in self.summands.iter().enumerate() {
            let mut push = |m: CMatrix| {
                let mut e = self.zero();
                e.blocks[k] = m;
                basis.push(e);
            };
            for i in 0..n {
                let mut m = CMatrix::zeros(n, n);
                m[(i, i)] = Complex64::new(1.0, 0.0);
                push(m);
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut re = CMatrix::zeros(n, n);
                    re[(i, j)] = Complex64::new(s, 0.0);
                    re[(j, i)] = Complex64::new(s, 0.0);
                    push(re);
                    let mut im = CMatrix::zeros(n, n);
                    im[(i, j)] = Complex64::new(0.0, -s);
                    im[(j, i)] = Complex64::new(0.0, s);
                    push(im);
                }
            }
        }
        basis
    }
}

impl fmt::Display for BlockAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .summands
            .iter()
            .map(|&n| {
                if n == 1 {
                    "C".to_string()
                } else {
                    format!("M{n}(C)")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

/// One complex matrix per summand. Arithmetic is summand-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    blocks: Vec<CMatrix>,
}

impl AlgebraElement {
    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<CMatrix> {
        self.blocks
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        let same = self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.shape() == b.shape());
        if same {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: "elements of the same algebra".into(),
                found: "different block structure".into(),
            })
        }
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b * c).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    /// C*-norm: the largest operator norm over summands.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(super::op_norm).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| super::approx_eq(a, b, tol))
    }
}
