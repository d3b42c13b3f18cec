use rand::Rng;

use super::groupoid::{Arrow, PairGroupoid};
use crate::error::{Error, Result};
use crate::lincore::{op_norm, random_complex, CMatrix, Complex64};

/// How the bundle's involution acts on a fiber element.
///
/// Only `ConjugateTranspose` yields a Fell bundle. The other rules exist so
/// that broken bundles can be declared and caught by the axiom verifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InvolutionRule {
    ConjugateTranspose,
    Transpose,
    ScaledAdjoint(f64),
}

/// How the bundle multiplies composable fiber elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProductRule {
    Matrix,
    Scaled(f64),
}

/// A fiber element together with the arrow it lies over.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberElement {
    pub arrow: Arrow,
    pub matrix: CMatrix,
}

impl FiberElement {
    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }
}

/// Fell bundle over a finite pair groupoid whose fiber over `(i, j)` is the
/// space of `n_i × n_j` complex matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FellBundleGeometry {
    groupoid: PairGroupoid,
    dims: Vec<usize>,
    product_bundle: bool,
    involution: InvolutionRule,
    product: ProductRule,
}

pub fn build_fell_bundle(groupoid: PairGroupoid, dims: &[usize]) -> Result<FellBundleGeometry> {
    FellBundleGeometry::new(groupoid, dims.to_vec())
}

impl FellBundleGeometry {
    pub fn new(groupoid: PairGroupoid, dims: Vec<usize>) -> Result<Self> {
        if dims.len() != groupoid.len() {
            return Err(Error::Geometry(format!(
                "{} fiber dimensions for {} objects (missing dim for {:?})",
                dims.len(),
                groupoid.len(),
                groupoid
                    .objects()
                    .get(dims.len())
                    .cloned()
                    .unwrap_or_default()
            )));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Geometry(format!(
                "object {:?} has fiber dimension 0",
                groupoid.objects()[i]
            )));
        }
        Ok(Self {
            groupoid,
            dims,
            product_bundle: false,
            involution: InvolutionRule::ConjugateTranspose,
            product: ProductRule::Matrix,
        })
    }

    pub fn with_product_bundle(mut self, flag: bool) -> Self {
        self.product_bundle = flag;
        self
    }

    pub fn with_involution(mut self, rule: InvolutionRule) -> Self {
        self.involution = rule;
        self
    }

    pub fn with_product(mut self, rule: ProductRule) -> Self {
        self.product = rule;
        self
    }

    pub fn groupoid(&self) -> &PairGroupoid {
        &self.groupoid
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn is_product_bundle(&self) -> bool {
        self.product_bundle
    }

    pub fn involution_rule(&self) -> InvolutionRule {
        self.involution
    }

    pub fn product_rule(&self) -> ProductRule {
        self.product
    }

    /// `Σ n_i`, the dimension of `⊕ C^{n_i}`.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Start index of each object's block in `⊕ C^{n_i}`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.dims
            .iter()
            .map(|&d| {
                let o = acc;
                acc += d;
                o
            })
            .collect()
    }

    pub fn fiber_shape(&self, arrow: Arrow) -> (usize, usize) {
        (self.dims[arrow.range], self.dims[arrow.source])
    }

    pub fn element(&self, arrow: Arrow, matrix: CMatrix) -> Result<FiberElement> {
        let shape = self.fiber_shape(arrow);
        if matrix.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{shape:?} for arrow ({}, {})", arrow.range, arrow.source),
                found: format!("{:?}", matrix.shape()),
            });
        }
        Ok(FiberElement { arrow, matrix })
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, arrow: Arrow) -> FiberElement {
        let (r, c) = self.fiber_shape(arrow);
        FiberElement {
            arrow,
            matrix: random_complex(rng, r, c),
        }
    }

    pub fn multiply(&self, a: &FiberElement, b: &FiberElement) -> Result<FiberElement> {
        let arrow = self.groupoid.compose(a.arrow, b.arrow).ok_or_else(|| {
            Error::Geometry(format!(
                "arrows ({}, {}) and ({}, {}) are not composable",
                a.arrow.range, a.arrow.source, b.arrow.range, b.arrow.source
            ))
        })?;
        let m = &a.matrix * &b.matrix;
        let matrix = match self.product {
            ProductRule::Matrix => m,
            ProductRule::Scaled(s) => m * Complex64::new(s, 0.0),
        };
        Ok(FiberElement { arrow, matrix })
    }

    pub fn involution(&self, e: &FiberElement) -> FiberElement {
        let matrix = match self.involution {
            InvolutionRule::ConjugateTranspose => e.matrix.adjoint(),
            InvolutionRule::Transpose => e.matrix.transpose(),
            InvolutionRule::ScaledAdjoint(s) => e.matrix.adjoint() * Complex64::new(s, 0.0),
        };
        FiberElement {
            arrow: e.arrow.inverse(),
            matrix,
        }
    }
}
