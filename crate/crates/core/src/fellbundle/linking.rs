use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bundle::{FellBundleGeometry, FiberElement};
use super::groupoid::Arrow;
use crate::lincore::{complex_span_dim, set_block, BlockAlgebra, CMatrix};

/// Full matrix algebra on `⊕ C^{n_i}` with its block grid indexed by objects.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkingAlgebra {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    algebra: BlockAlgebra,
}

impl LinkingAlgebra {
    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn block_grid(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Complex dimension `(Σ n_i)²`.
    pub fn dimension(&self) -> usize {
        self.size() * self.size()
    }

    pub fn embed(&self, e: &FiberElement) -> CMatrix {
        let n = self.size();
        let mut m = CMatrix::zeros(n, n);
        set_block(
            &mut m,
            self.offsets[e.arrow.range],
            self.offsets[e.arrow.source],
            &e.matrix,
        );
        m
    }

    pub fn contains(&self, m: &CMatrix) -> bool {
        m.shape() == (self.size(), self.size())
    }
}

pub fn linking_algebra(geom: &FellBundleGeometry) -> LinkingAlgebra {
    let n = geom.total_dim();
    LinkingAlgebra {
        dims: geom.dims().to_vec(),
        offsets: geom.offsets(),
        algebra: BlockAlgebra::full(n).expect("geometry has positive dimension"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationEntry {
    pub first: Arrow,
    pub second: Arrow,
    pub rank: usize,
    pub expected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    pub entries: Vec<SaturationEntry>,
}

impl SaturationReport {
    pub fn saturated(&self) -> bool {
        self.entries.iter().all(|e| e.rank == e.expected)
    }
}

/// For every composable pair `(i, j), (j, k)`, the complex rank of the span
/// of random products `E_{ij} · E_{jk}` compared with `dim E_{ik}`.
pub fn saturation_check(geom: &FellBundleGeometry, seed: u64) -> SaturationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = geom.len();
    let dims = geom.dims();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (a, b) = (Arrow::new(i, j), Arrow::new(j, k));
                let expected = dims[i] * dims[k];
                let products: Vec<CMatrix> = (0..expected + 4)
                    .map(|_| {
                        let x = geom.random_element(&mut rng, a);
                        let y = geom.random_element(&mut rng, b);
                        geom.multiply(&x, &y).expect("composable").matrix
                    })
                    .collect();
                entries.push(SaturationEntry {
                    first: a,
                    second: b,
                    rank: complex_span_dim(&products, 1e-10),
                    expected,
                });
            }
        }
    }
    SaturationReport { entries }
}
