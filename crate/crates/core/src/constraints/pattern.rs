use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fellbundle::{
    block_support, is_involution, project_to_dirac, random_supported, FellBundleGeometry, Grading,
    RealStructure,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chirality {
    Left,
    Right,
    Neutral,
}

impl std::str::FromStr for Chirality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Chirality::Left),
            "right" | "r" => Ok(Chirality::Right),
            "none" | "neutral" => Ok(Chirality::Neutral),
            other => Err(Error::Config(format!(
                "unknown chirality {other:?} (expected left, right or none)"
            ))),
        }
    }
}

impl Chirality {
    pub fn name(self) -> &'static str {
        match self {
            Chirality::Left => "left",
            Chirality::Right => "right",
            Chirality::Neutral => "none",
        }
    }
}

/// Physical role of an object: chirality, particle/antiparticle, sector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectRole {
    pub chirality: Chirality,
    pub conjugate: bool,
    pub sector: String,
}

/// Which objects a block pattern connects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    /// Every object maps to itself.
    Diagonal,
    /// Left ↔ right within particles and within antiparticles.
    Chiral,
    /// Particle ↔ antiparticle of the same chirality.
    ChargeConjugate,
    /// Particle ↔ antiparticle of opposite chirality.
    Crossed,
    Other,
}

impl PatternKind {
    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Diagonal => "diagonal",
            PatternKind::Chiral => "chiral",
            PatternKind::ChargeConjugate => "charge-conjugate",
            PatternKind::Crossed => "crossed",
            PatternKind::Other => "other",
        }
    }
}

/// Block support of a Dirac section: the permutation matrix of an involution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockPattern {
    pairing: Vec<usize>,
}

impl BlockPattern {
    pub fn new(pairing: Vec<usize>) -> Result<Self> {
        if !is_involution(&pairing) {
            return Err(Error::InconsistentPattern(format!(
                "pairing {pairing:?} is not an involution"
            )));
        }
        Ok(Self { pairing })
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn len(&self) -> usize {
        self.pairing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairing.is_empty()
    }

    pub fn grid(&self) -> Vec<Vec<bool>> {
        let n = self.pairing.len();
        (0..n)
            .map(|r| (0..n).map(|c| self.pairing[c] == r).collect())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let g = self.grid();
        (0..g.len()).all(|r| (0..g.len()).all(|c| g[r][c] == g[c][r]))
    }

    pub fn kind(&self, roles: &[ObjectRole]) -> PatternKind {
        if self.pairing.iter().enumerate().all(|(i, &s)| s == i) {
            return PatternKind::Diagonal;
        }
        let classify = |i: usize, s: usize| -> PatternKind {
            let (a, b) = (&roles[i], &roles[s]);
            let opposite = matches!(
                (a.chirality, b.chirality),
                (Chirality::Left, Chirality::Right) | (Chirality::Right, Chirality::Left)
            );
            let same = a.chirality == b.chirality && a.chirality != Chirality::Neutral;
            match (a.conjugate == b.conjugate, opposite, same) {
                (true, true, _) => PatternKind::Chiral,
                (false, false, true) => PatternKind::ChargeConjugate,
                (false, true, _) => PatternKind::Crossed,
                _ => PatternKind::Other,
            }
        };
        let kinds: Vec<PatternKind> = self
            .pairing
            .iter()
            .enumerate()
            .filter(|(i, s)| *i != **s)
            .map(|(i, &s)| classify(i, s))
            .collect();
        if self.pairing.iter().enumerate().any(|(i, &s)| i == s) {
            return PatternKind::Other;
        }
        if kinds.iter().all(|k| *k == kinds[0]) {
            kinds[0]
        } else {
            PatternKind::Other
        }
    }

    /// Text grid, one row per line, `X` for an allowed block.
    pub fn render(&self) -> String {
        self.grid()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&b| if b { "X" } else { "." })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// 1-based pairing, e.g. `2 1 4 3`.
    pub fn pairing_string(&self) -> String {
        self.pairing
            .iter()
            .map(|s| (s + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationOptions {
    /// Keep only the identity and fixed-point-free involutions.
    pub homogeneous: bool,
    pub seed: u64,
    pub tol: f64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            homogeneous: true,
            seed: 0,
            tol: 1e-10,
        }
    }
}

/// All involutions of `{0, …, n−1}` in lexicographic order.
pub fn involutions(n: usize) -> Vec<Vec<usize>> {
    fn rec(sigma: &mut Vec<Option<usize>>, out: &mut Vec<Vec<usize>>) {
        let Some(i) = sigma.iter().position(Option::is_none) else {
            out.push(sigma.iter().map(|s| s.unwrap()).collect());
            return;
        };
        sigma[i] = Some(i);
        rec(sigma, out);
        for j in (i + 1)..sigma.len() {
            if sigma[j].is_none() {
                sigma[i] = Some(j);
                sigma[j] = Some(i);
                rec(sigma, out);
                sigma[j] = None;
            }
        }
        sigma[i] = None;
    }
    let mut out = Vec::new();
    rec(&mut vec![None; n], &mut out);
    out.sort();
    out
}

/// Object permutation of `J`, the identity when there is no real structure.
pub fn object_permutation(
    geom: &FellBundleGeometry,
    j: Option<&RealStructure>,
) -> Result<Vec<usize>> {
    match j {
        None => Ok((0..geom.len()).collect()),
        Some(j) => {
            if j.dimension() != geom.total_dim() {
                return Err(Error::InconsistentPattern(format!(
                    "real structure acts on dimension {} but the geometry has dimension {}",
                    j.dimension(),
                    geom.total_dim()
                )));
            }
            j.object_permutation(&geom.offsets(), geom.dims())
        }
    }
}

/// `true` when a generic projected section keeps every block of the pattern.
fn generic_witness_fills(
    geom: &FellBundleGeometry,
    pairing: &[usize],
    j: Option<&RealStructure>,
    seed: u64,
    tol: f64,
) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = project_to_dirac(&random_supported(geom, pairing, &mut rng), j);
    let support = block_support(geom, &d, tol.max(1e-8));
    pairing.iter().enumerate().all(|(i, &s)| support[s][i])
        && support
            .iter()
            .enumerate()
            .all(|(r, row)| row.iter().enumerate().all(|(c, &b)| !b || pairing[c] == r))
}

/// Involutive block patterns whose sections can satisfy `x = x*` and
/// `x = J x* J⁻¹`: the pairing must commute with the object permutation of
/// `J`, and a generic projected section must fill every pattern block.
/// With a grading, the pairing must also flip the grading sign of each object.
pub fn enumerate_admissible_patterns(
    geom: &FellBundleGeometry,
    j: Option<&RealStructure>,
    grading: Option<&Grading>,
    opts: &EnumerationOptions,
) -> Result<Vec<BlockPattern>> {
    let tau = object_permutation(geom, j)?;
    let signs = match grading {
        None => None,
        Some(g) => Some(
            g.object_signs(&geom.offsets(), geom.dims())
                .ok_or_else(|| {
                    Error::InconsistentPattern("grading is not constant on every object".into())
                })?,
        ),
    };
    let n = geom.len();
    let candidates: Vec<Vec<usize>> = involutions(n)
        .into_iter()
        .filter(|s| (0..n).all(|i| s[tau[i]] == tau[s[i]]))
        .filter(|s| {
            !opts.homogeneous
                || s.iter().enumerate().all(|(i, &x)| x == i)
                || s.iter().enumerate().all(|(i, &x)| x != i)
        })
        .filter(|s| match &signs {
            None => true,
            Some(sg) => s.iter().enumerate().all(|(i, &x)| sg[x] == -sg[i]),
        })
        .collect();
    let keep: Vec<bool> = candidates
        .par_iter()
        .map(|s| generic_witness_fills(geom, s, j, opts.seed, opts.tol))
        .collect();
    let mut out: Vec<BlockPattern> = candidates
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(s, _)| BlockPattern { pairing: s })
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassSelection {
    pub chosen: BlockPattern,
    pub rejected: Vec<(BlockPattern, String)>,
}

/// Pick the pattern that pairs every left object with a right object of the
/// same particle type and sector. With object grading signs, patterns that
/// do not anticommute with the grading are rejected first.
pub fn select_mass_pattern(
    patterns: &[BlockPattern],
    roles: &[ObjectRole],
    grading_signs: Option<&[i8]>,
) -> Result<MassSelection> {
    let mut chosen = None;
    let mut rejected = Vec::new();
    for p in patterns {
        if p.len() != roles.len() {
            return Err(Error::InconsistentPattern(format!(
                "pattern on {} objects, {} roles",
                p.len(),
                roles.len()
            )));
        }
        if let Some(sg) = grading_signs {
            if p.pairing()
                .iter()
                .enumerate()
                .any(|(i, &s)| sg[s] != -sg[i])
            {
                rejected.push((
                    p.clone(),
                    "commutes with the grading on some block".to_string(),
                ));
                continue;
            }
        }
        let lefts: Vec<usize> = (0..roles.len())
            .filter(|&i| roles[i].chirality == Chirality::Left)
            .collect();
        let connects = !lefts.is_empty()
            && lefts.iter().all(|&i| {
                let s = p.pairing()[i];
                roles[s].chirality == Chirality::Right
                    && roles[s].conjugate == roles[i].conjugate
                    && roles[s].sector == roles[i].sector
            });
        if connects && chosen.is_none() {
            chosen = Some(p.clone());
        } else if connects {
            rejected.push((
                p.clone(),
                "duplicate chirality-connecting pattern".to_string(),
            ));
        } else {
            rejected.push((
                p.clone(),
                "does not map every left object to a right object".to_string(),
            ));
        }
    }
    chosen
        .map(|chosen| MassSelection { chosen, rejected })
        .ok_or(Error::NoChiralityConnectingPattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::{build_fell_bundle, build_pair_groupoid};
    use crate::lincore::HilbertSpace;

    #[test]
    fn involution_counts() {
        let counts: Vec<usize> = (1..=8).map(|n| involutions(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 4, 10, 26, 76, 232, 764]);
        assert!(involutions(4).windows(2).all(|w| w[0] < w[1]));
    }

    fn geom(dims: &[usize]) -> FellBundleGeometry {
        let ids: Vec<String> = (0..dims.len()).map(|i| format!("o{i}")).collect();
        build_fell_bundle(build_pair_groupoid(&ids).unwrap(), dims).unwrap()
    }

    #[test]
    fn trivial_cases() {
        let g = geom(&[1]);
        assert_eq!(
            enumerate_admissible_patterns(&g, None, None, &Default::default())
                .unwrap()
                .len(),
            1
        );

        let g = geom(&[1, 1]);
        let j = RealStructure::from_permutation(
            HilbertSpace::anonymous(2).unwrap(),
            &[0, 1],
            None,
            1,
            1,
        )
        .unwrap();
        let got = enumerate_admissible_patterns(&g, Some(&j), None, &Default::default()).unwrap();
        let pairings: Vec<Vec<usize>> = got.iter().map(|p| p.pairing().to_vec()).collect();
        assert_eq!(pairings, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn pattern_grid_and_render() {
        let p = BlockPattern::new(vec![1, 0, 3, 2]).unwrap();
        assert!(p.is_symmetric());
        assert_eq!(p.render().lines().next().unwrap(), ". X . .");
        assert_eq!(p.pairing_string(), "2 1 4 3");
        assert!(BlockPattern::new(vec![1, 2, 0]).is_err());
    }

    #[test]
    fn single_object_has_no_mass_pattern() {
        let roles = vec![ObjectRole {
            chirality: Chirality::Left,
            conjugate: false,
            sector: "q".into(),
        }];
        let p = BlockPattern::new(vec![0]).unwrap();
        assert_eq!(
            select_mass_pattern(&[p], &roles, None),
            Err(Error::NoChiralityConnectingPattern)
        );
    }
}
