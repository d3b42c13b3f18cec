use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::Rng;

use super::{AlgebraElement, BlockAlgebra, CMatrix, Complex64};
use crate::error::{Error, Result};
use crate::fellbundle::RealStructure;

/// Finite-dimensional Hilbert space with a labelled orthonormal basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    labels: Vec<String>,
}

impl HilbertSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Representation("Hilbert space of dimension 0".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Representation(format!(
                    "duplicate basis label {l:?}"
                )));
            }
        }
        Ok(Self { labels })
    }

    /// Basis labelled `e0, e1, …`.
    pub fn anonymous(dim: usize) -> Result<Self> {
        Self::new((0..dim).map(|i| format!("e{i}")).collect())
    }

    pub fn dimension(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One copy of a summand acting on the listed basis vectors, optionally
/// through complex conjugation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub summand: usize,
    pub indices: Vec<usize>,
    pub conjugate: bool,
}

/// A *-representation declared by a block-placement table.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    algebra: BlockAlgebra,
    space: HilbertSpace,
    placements: Vec<Placement>,
    faithful: bool,
}

impl Representation {
    /// Validates the table. When `faithful` is declared it is also checked.
    pub fn new(
        algebra: BlockAlgebra,
        space: HilbertSpace,
        placements: Vec<Placement>,
        faithful: bool,
    ) -> Result<Self> {
        let dim = space.dimension();
        let mut used = vec![false; dim];
        for (k, p) in placements.iter().enumerate() {
            let n = *algebra.summands().get(p.summand).ok_or_else(|| {
                Error::Representation(format!("placement {k}: no summand {}", p.summand))
            })?;
            if p.indices.len() != n {
                return Err(Error::Representation(format!(
                    "placement {k}: summand {} has size {n} but {} indices were given",
                    p.summand,
                    p.indices.len()
                )));
            }
            for &i in &p.indices {
                if i >= dim {
                    return Err(Error::Representation(format!(
                        "placement {k}: index {i} outside Hilbert space of dimension {dim}"
                    )));
                }
                if used[i] {
                    return Err(Error::Representation(format!(
                        "placement {k}: basis vector {i} is already acted on"
                    )));
                }
                used[i] = true;
            }
        }
        let rep = Self {
            algebra,
            space,
            placements,
            faithful,
        };
        if faithful && !rep.is_faithful() {
            return Err(Error::Representation(
                "declared faithful but some summand is not represented".into(),
            ));
        }
        Ok(rep)
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn declared_faithful(&self) -> bool {
        self.faithful
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    pub fn embed(&self, a: &AlgebraElement) -> CMatrix {
        let n = self.dimension();
        let mut m = CMatrix::zeros(n, n);
        for p in &self.placements {
            let block = &a.blocks()[p.summand];
            for (r, &i) in p.indices.iter().enumerate() {
                for (c, &j) in p.indices.iter().enumerate() {
                    let z = block[(r, c)];
                    m[(i, j)] = if p.conjugate { z.conj() } else { z };
                }
            }
        }
        m
    }

    /// The kernel of `embed` is zero, checked as the real rank of the
    /// real-linear embedding map.
    pub fn is_faithful(&self) -> bool {
        let basis: Vec<AlgebraElement> = self.complex_basis();
        let n = self.dimension();
        let mut cols = DMatrix::<f64>::zeros(2 * n * n, 2 * basis.len());
        for (k, e) in basis.iter().enumerate() {
            for (part, elem) in [e.clone(), e.scaled(Complex64::new(0.0, 1.0))]
                .iter()
                .enumerate()
            {
                let m = self.embed(elem);
                for (idx, z) in m.iter().enumerate() {
                    cols[(2 * idx, 2 * k + part)] = z.re;
                    cols[(2 * idx + 1, 2 * k + part)] = z.im;
                }
            }
        }
        super::real_rank(&cols, 1e-12) == 2 * basis.len()
    }

    fn complex_basis(&self) -> Vec<AlgebraElement> {
        let mut out = Vec::new();
        for (k, &n) in self.algebra.summands().iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let mut blocks: Vec<CMatrix> = self
                        .algebra
                        .summands()
                        .iter()
                        .map(|&m| CMatrix::zeros(m, m))
                        .collect();
                    blocks[k][(i, j)] = Complex64::new(1.0, 0.0);
                    out.push(self.algebra.element(blocks).expect("shapes match"));
                }
            }
        }
        out
    }

    /// Largest relative residual of `embed(ab) = embed(a)embed(b)` and
    /// `embed(a*) = embed(a)†` over random samples.
    pub fn homomorphism_residual<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let a = self.algebra.random(rng);
            let b = self.algebra.random(rng);
            let ab = a.product(&b).expect("same algebra");
            let ea = self.embed(&a);
            let eb = self.embed(&b);
            worst = worst.max(super::rel_diff(&self.embed(&ab), &(&ea * &eb)));
            worst = worst.max(super::rel_diff(&self.embed(&a.adjoint()), &ea.adjoint()));
        }
        worst
    }
}

/// `b ↦ J b* J⁻¹` on the representation space.
pub fn opposite_action(
    b: &AlgebraElement,
    j: &RealStructure,
    rep: &Representation,
) -> Result<CMatrix> {
    if j.dimension() != rep.dimension() {
        return Err(Error::ShapeMismatch {
            expected: format!("real structure on dimension {}", rep.dimension()),
            found: format!("dimension {}", j.dimension()),
        });
    }
    Ok(j.conjugate_operator(&rep.embed(b).adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincore::{approx_eq, random_complex, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_sector() -> (Representation, RealStructure) {
        // M2 ⊕ M2 acting on C² ⊕ C², J = conjugation composed with the sector swap.
        let alg = BlockAlgebra::new(vec![2, 2], None).unwrap();
        let space = HilbertSpace::anonymous(4).unwrap();
        let rep = Representation::new(
            alg,
            space.clone(),
            vec![
                Placement {
                    summand: 0,
                    indices: vec![0, 1],
                    conjugate: false,
                },
                Placement {
                    summand: 1,
                    indices: vec![2, 3],
                    conjugate: false,
                },
            ],
            true,
        )
        .unwrap();
        let j = RealStructure::from_permutation(space, &[2, 3, 0, 1], None, 1, 1).unwrap();
        (rep, j)
    }

    #[test]
    fn placements_validated() {
        let alg = BlockAlgebra::new(vec![2], None).unwrap();
        let space = HilbertSpace::anonymous(3).unwrap();
        let overlap = vec![
            Placement {
                summand: 0,
                indices: vec![0, 1],
                conjugate: false,
            },
            Placement {
                summand: 0,
                indices: vec![1, 2],
                conjugate: false,
            },
        ];
        assert!(Representation::new(alg.clone(), space.clone(), overlap, false).is_err());
        let wrong_len = vec![Placement {
            summand: 0,
            indices: vec![0],
            conjugate: false,
        }];
        assert!(Representation::new(alg.clone(), space.clone(), wrong_len, false).is_err());
        assert!(HilbertSpace::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn faithfulness_checked_when_declared() {
        let alg = BlockAlgebra::new(vec![2, 1], None).unwrap();
        let space = HilbertSpace::anonymous(2).unwrap();
        let only_first = vec![Placement {
            summand: 0,
            indices: vec![0, 1],
            conjugate: false,
        }];
        assert!(Representation::new(alg.clone(), space.clone(), only_first.clone(), true).is_err());
        let rep = Representation::new(alg, space, only_first, false).unwrap();
        assert!(!rep.is_faithful());
    }

    #[test]
    fn embedding_is_star_homomorphism() {
        // A placement with conjugation is still a real *-homomorphism.
        let alg = BlockAlgebra::new(vec![2, 1, 3], None).unwrap();
        let space = HilbertSpace::anonymous(8).unwrap();
        let rep = Representation::new(
            alg,
            space,
            vec![
                Placement {
                    summand: 0,
                    indices: vec![0, 1],
                    conjugate: false,
                },
                Placement {
                    summand: 1,
                    indices: vec![2],
                    conjugate: true,
                },
                Placement {
                    summand: 1,
                    indices: vec![3],
                    conjugate: false,
                },
                Placement {
                    summand: 2,
                    indices: vec![4, 6, 5],
                    conjugate: false,
                },
            ],
            true,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(rep.homomorphism_residual(&mut rng, 200) < 1e-12);
    }

    #[test]
    fn opposite_action_cases() {
        let (rep, j) = two_sector();
        let alg = rep.algebra().clone();
        let id = opposite_action(&alg.identity(), &j, &rep).unwrap();
        assert!(approx_eq(&id, &CMatrix::identity(4, 4), 0.0));

        // b = (X, Y): J b* J⁻¹ = swap(conj(b†)) = diag(Yᵀ, Xᵀ).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_complex(&mut rng, 2, 2);
        let y = random_complex(&mut rng, 2, 2);
        let b = alg.element(vec![x.clone(), y.clone()]).unwrap();
        let got = opposite_action(&b, &j, &rep).unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        crate::lincore::set_block(&mut expected, 0, 0, &y.transpose());
        crate::lincore::set_block(&mut expected, 2, 2, &x.transpose());
        assert!(approx_eq(&got, &expected, 1e-15));

        // For self-adjoint blocks this is diag(Ȳ, X̄).
        let xh = random_hermitian(&mut rng, 2);
        let yh = random_hermitian(&mut rng, 2);
        let bh = alg.element(vec![xh.clone(), yh.clone()]).unwrap();
        let got = opposite_action(&bh, &j, &rep).unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        crate::lincore::set_block(&mut expected, 0, 0, &yh.conjugate());
        crate::lincore::set_block(&mut expected, 2, 2, &xh.conjugate());
        assert!(approx_eq(&got, &expected, 1e-15));
    }

    #[test]
    fn opposite_action_of_real_diagonal_under_plain_conjugation() {
        let alg = BlockAlgebra::new(vec![1, 1, 1], None).unwrap();
        let space = HilbertSpace::anonymous(3).unwrap();
        let rep = Representation::new(
            alg.clone(),
            space.clone(),
            (0..3)
                .map(|i| Placement {
                    summand: i,
                    indices: vec![i],
                    conjugate: false,
                })
                .collect(),
            true,
        )
        .unwrap();
        let j = RealStructure::from_permutation(space, &[0, 1, 2], None, 1, 1).unwrap();
        let b = alg
            .element(vec![
                CMatrix::from_element(1, 1, Complex64::new(1.5, 0.0)),
                CMatrix::from_element(1, 1, Complex64::new(-2.0, 0.0)),
                CMatrix::from_element(1, 1, Complex64::new(0.25, 0.0)),
            ])
            .unwrap();
        let got = opposite_action(&b, &j, &rep).unwrap();
        assert_eq!(got, rep.embed(&b));
    }

    #[test]
    fn opposite_action_reverses_products() {
        let (rep, j) = two_sector();
        let alg = rep.algebra().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let b1 = alg.random(&mut rng);
            let b2 = alg.random(&mut rng);
            let lhs = opposite_action(&b1.product(&b2).unwrap(), &j, &rep).unwrap();
            let rhs =
                opposite_action(&b2, &j, &rep).unwrap() * opposite_action(&b1, &j, &rep).unwrap();
            assert!(approx_eq(&lhs, &rhs, 1e-12));
        }
    }
}
