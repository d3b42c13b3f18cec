use rand::Rng;

use crate::error::{Error, Result};
use crate::lincore::{
    approx_eq, ensure_unitary, random_vector, rel_diff, CMatrix, CVector, Complex64, HilbertSpace,
};

/// Antiunitary `J v = U · conj(v)` with its sign data.
#[derive(Debug, Clone, PartialEq)]
pub struct RealStructure {
    space: HilbertSpace,
    unitary: CMatrix,
    sign_j2: i8,
    sign_dj: i8,
}

fn check_sign(name: &str, s: i32) -> Result<i8> {
    match s {
        1 => Ok(1),
        -1 => Ok(-1),
        _ => Err(Error::RealStructure(format!(
            "{name} must be +1 or -1, got {s}"
        ))),
    }
}

impl RealStructure {
    /// `unitary` must be unitary and satisfy `U Ū = sign_j2 · I`, i.e. `J² = sign_j2`.
    pub fn new(space: HilbertSpace, unitary: CMatrix, sign_j2: i32, sign_dj: i32) -> Result<Self> {
        let n = space.dimension();
        if unitary.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: format!("({n}, {n})"),
                found: format!("{:?}", unitary.shape()),
            });
        }
        ensure_unitary(&unitary, 1e-10)?;
        let sign_j2 = check_sign("sign_j2", sign_j2)?;
        let sign_dj = check_sign("sign_dj", sign_dj)?;
        let j = Self {
            space,
            unitary,
            sign_j2,
            sign_dj,
        };
        let r = j.j_squared_residual();
        if r > 1e-10 {
            return Err(Error::RealStructure(format!(
                "J² differs from {sign_j2}·I (relative residual {r:.3e})"
            )));
        }
        Ok(j)
    }

    /// `U e_i = phase_i e_{perm(i)}`. The permutation must be an involution
    /// for `J²` to be a multiple of the identity.
    pub fn from_permutation(
        space: HilbertSpace,
        perm: &[usize],
        phases: Option<&[Complex64]>,
        sign_j2: i32,
        sign_dj: i32,
    ) -> Result<Self> {
        let n = space.dimension();
        if perm.len() != n {
            return Err(Error::RealStructure(format!(
                "permutation has {} entries for dimension {n}",
                perm.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::RealStructure(format!(
                    "{perm:?} is not a permutation of 0..{n}"
                )));
            }
            seen[p] = true;
        }
        if let Some(i) = (0..n).find(|&i| perm[perm[i]] != i) {
            return Err(Error::RealStructure(format!(
                "non-involutive J permutation: {i} -> {} -> {}",
                perm[i], perm[perm[i]]
            )));
        }
        let mut u = CMatrix::zeros(n, n);
        for (i, &p) in perm.iter().enumerate() {
            let phase = match phases {
                Some(ph) => {
                    if ph.len() != n {
                        return Err(Error::RealStructure(format!(
                            "{} phases for dimension {n}",
                            ph.len()
                        )));
                    }
                    ph[i]
                }
                None => Complex64::new(1.0, 0.0),
            };
            u[(p, i)] = phase;
        }
        Self::new(space, u, sign_j2, sign_dj)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn sign_j2(&self) -> i8 {
        self.sign_j2
    }

    pub fn sign_dj(&self) -> i8 {
        self.sign_dj
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.unitary * v.conjugate()
    }

    /// `J M J⁻¹ = U M̄ U†`.
    pub fn conjugate_operator(&self, m: &CMatrix) -> CMatrix {
        &self.unitary * m.conjugate() * self.unitary.adjoint()
    }

    /// Relative residual of `J² = sign_j2 · I`, where `J² = U Ū`.
    pub fn j_squared_residual(&self) -> f64 {
        let n = self.dimension();
        let j2 = &self.unitary * self.unitary.conjugate();
        let target = CMatrix::identity(n, n) * Complex64::new(f64::from(self.sign_j2), 0.0);
        rel_diff(&j2, &target)
    }

    /// Largest deviation from `⟨Jx, Jy⟩ = conj⟨x, y⟩` over random vectors.
    pub fn antiunitarity_residual<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> f64 {
        let n = self.dimension();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = random_vector(rng, n);
            let y = random_vector(rng, n);
            let lhs = self.apply(&x).dotc(&self.apply(&y));
            let rhs = x.dotc(&y).conj();
            let scale = 1f64.max(x.norm() * y.norm());
            worst = worst.max((lhs - rhs).norm() / scale);
        }
        worst
    }

    /// Object permutation induced on a block decomposition of the space.
    ///
    /// Fails when `U` maps some block onto more than one block.
    pub fn object_permutation(&self, offsets: &[usize], dims: &[usize]) -> Result<Vec<usize>> {
        let mut tau = Vec::with_capacity(dims.len());
        for (j, (&oj, &nj)) in offsets.iter().zip(dims).enumerate() {
            let mut target = None;
            for (i, (&oi, &ni)) in offsets.iter().zip(dims).enumerate() {
                let blk = self.unitary.view((oi, oj), (ni, nj));
                if blk.iter().any(|z| z.norm() > 1e-12) {
                    if target.is_some() {
                        return Err(Error::RealStructure(format!(
                            "J maps object {j} onto more than one object"
                        )));
                    }
                    target = Some(i);
                }
            }
            tau.push(
                target.ok_or_else(|| Error::RealStructure(format!("J annihilates object {j}")))?,
            );
        }
        Ok(tau)
    }

    /// `true` when `D J = sign_dj · J D`.
    pub fn commutes_with(&self, d: &CMatrix, tol: f64) -> bool {
        let jd = self.conjugate_operator(d) * Complex64::new(f64::from(self.sign_dj), 0.0);
        approx_eq(d, &jd, tol)
    }
}

/// Diagonal ±1 grading operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grading {
    signs: Vec<i8>,
}

impl Grading {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Geometry(
                "grading on a zero-dimensional space".into(),
            ));
        }
        if let Some(i) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::Geometry(format!(
                "grading entry {i} is {}, expected +1 or -1",
                signs[i]
            )));
        }
        Ok(Self { signs })
    }

    /// Expand one sign per object into one sign per basis vector.
    pub fn from_object_signs(object_signs: &[i8], dims: &[usize]) -> Result<Self> {
        if object_signs.len() != dims.len() {
            return Err(Error::Geometry(format!(
                "{} grading signs for {} objects",
                object_signs.len(),
                dims.len()
            )));
        }
        Self::new(
            object_signs
                .iter()
                .zip(dims)
                .flat_map(|(&s, &n)| std::iter::repeat_n(s, n))
                .collect(),
        )
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn dimension(&self) -> usize {
        self.signs.len()
    }

    pub fn matrix(&self) -> CMatrix {
        let v: Vec<f64> = self.signs.iter().map(|&s| f64::from(s)).collect();
        crate::lincore::real_diag(&v)
    }

    /// One sign per block, or `None` when a block mixes signs.
    pub fn object_signs(&self, offsets: &[usize], dims: &[usize]) -> Option<Vec<i8>> {
        offsets
            .iter()
            .zip(dims)
            .map(|(&o, &n)| {
                let s = self.signs[o];
                self.signs[o..o + n].iter().all(|&t| t == s).then_some(s)
            })
            .collect()
    }

    /// `true` when `Dχ = −χD`.
    pub fn anticommutes_with(&self, d: &CMatrix, tol: f64) -> bool {
        let chi = self.matrix();
        let ac = d * &chi + &chi * d;
        ac.norm() <= tol * 1f64.max(d.norm())
    }
}

/// Signature convention selecting the grading of the four-sector layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signature {
    Euclidean,
    Lorentzian,
}

impl Signature {
    /// Grading sign of a sector: `(L, R, L̄, R̄)` is `(1, −1, −1, 1)` in
    /// Euclidean signature and `(1, −1, 1, −1)` in Lorentzian signature.
    pub fn sector_sign(self, left: bool, conjugate: bool) -> i8 {
        let chiral: i8 = if left { 1 } else { -1 };
        match self {
            Signature::Euclidean if conjugate => -chiral,
            _ => chiral,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Signature::Euclidean => "euclidean",
            Signature::Lorentzian => "lorentzian",
        }
    }
}

impl std::str::FromStr for Signature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Signature::Euclidean),
            "lorentzian" => Ok(Signature::Lorentzian),
            other => Err(Error::Config(format!(
                "unknown signature {other:?} (expected euclidean or lorentzian)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permutation_structure() {
        let space = HilbertSpace::anonymous(4).unwrap();
        let j = RealStructure::from_permutation(space.clone(), &[2, 3, 0, 1], None, 1, 1).unwrap();
        assert!(j.j_squared_residual() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(j.antiunitarity_residual(&mut rng, 100) < 1e-12);
        assert_eq!(j.object_permutation(&[0, 2], &[2, 2]).unwrap(), vec![1, 0]);
        assert_eq!(
            j.object_permutation(&[0, 1, 2, 3], &[1, 1, 1, 1]).unwrap(),
            vec![2, 3, 0, 1]
        );
        assert!(j.object_permutation(&[0, 1], &[1, 3]).is_err());
    }

    #[test]
    fn non_involutive_permutation_rejected() {
        let space = HilbertSpace::anonymous(3).unwrap();
        let err = RealStructure::from_permutation(space, &[1, 2, 0], None, 1, 1).unwrap_err();
        assert!(err.to_string().contains("non-involutive"), "{err}");
    }

    #[test]
    fn quaternionic_sign() {
        // U = [[0, 1], [-1, 0]] gives J² = −1.
        let space = HilbertSpace::anonymous(2).unwrap();
        let phases = [Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(
            RealStructure::from_permutation(space.clone(), &[1, 0], Some(&phases), 1, 1).is_err()
        );
        let j = RealStructure::from_permutation(space, &[1, 0], Some(&phases), -1, 1).unwrap();
        assert_eq!(j.sign_j2(), -1);
    }

    #[test]
    fn grading_tables() {
        let euc: Vec<i8> = [(true, false), (false, false), (true, true), (false, true)]
            .iter()
            .map(|&(l, c)| Signature::Euclidean.sector_sign(l, c))
            .collect();
        assert_eq!(euc, vec![1, -1, -1, 1]);
        let ltz: Vec<i8> = [(true, false), (false, false), (true, true), (false, true)]
            .iter()
            .map(|&(l, c)| Signature::Lorentzian.sector_sign(l, c))
            .collect();
        assert_eq!(ltz, vec![1, -1, 1, -1]);

        let g = Grading::from_object_signs(&[1, -1], &[2, 1]).unwrap();
        assert_eq!(g.signs(), &[1, 1, -1]);
        let chi = g.matrix();
        assert_eq!(&chi * &chi, CMatrix::identity(3, 3));
        assert_eq!(g.object_signs(&[0, 2], &[2, 1]), Some(vec![1, -1]));
        assert_eq!(g.object_signs(&[0, 1], &[1, 2]), None);
        assert!(Grading::new(vec![1, 0]).is_err());
    }
}
