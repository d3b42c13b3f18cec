use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::pattern::{
    enumerate_admissible_patterns, involutions, object_permutation, BlockPattern, Chirality,
    EnumerationOptions, ObjectRole, PatternKind,
};
use crate::error::{Error, Result};
use crate::fellbundle::{
    classify_matrix, project_to_dirac, random_supported, FellBundleGeometry, Grading,
    RealStructure, SectionVerdict, Signature,
};
use crate::lincore::{hermitian_residual, CMatrix};

/// Generic matrix with `D = D*` and `D = ±J D J⁻¹` supported on a pattern.
pub fn pattern_witness(
    geom: &FellBundleGeometry,
    pattern: &BlockPattern,
    j: Option<&RealStructure>,
    seed: u64,
) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    project_to_dirac(&random_supported(geom, pattern.pairing(), &mut rng), j)
}

/// A sum of two admissible patterns tested as a candidate Dirac section.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLayout {
    pub signature: Signature,
    pub patterns: Vec<BlockPattern>,
    pub verdict: SectionVerdict,
    /// Block rows holding more than one nonzero block.
    pub offending_rows: Vec<usize>,
    pub self_adjoint: bool,
    pub real: bool,
    /// Whether the combined matrix anticommutes with each signature's grading.
    pub anticommutes: Vec<(Signature, bool)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeptoquarkReport {
    pub mass_pattern: BlockPattern,
    pub mass_pattern_verdict: SectionVerdict,
    pub layouts: Vec<CombinedLayout>,
}

impl LeptoquarkReport {
    /// Pure mass pattern accepted, every combined layout rejected for
    /// having several blocks in a row.
    pub fn confirmed(&self) -> bool {
        self.mass_pattern_verdict.accepted
            && self
                .layouts
                .iter()
                .all(|l| !l.verdict.accepted && l.verdict.has_multiple_blocks())
    }
}

fn grading_for(sig: Signature, roles: &[ObjectRole], dims: &[usize]) -> Result<Grading> {
    let signs: Vec<i8> = roles
        .iter()
        .map(|r| sig.sector_sign(r.chirality == Chirality::Left, r.conjugate))
        .collect();
    Grading::from_object_signs(&signs, dims)
}

/// Combine the mass pattern with the crossed pattern (Euclidean layout) and
/// with the charge-conjugate pattern (Lorentzian layout) and check that
/// neither sum is a section of the domain map.
pub fn check_leptoquark_exclusion(
    geom: &FellBundleGeometry,
    j: &RealStructure,
    roles: &[ObjectRole],
    seed: u64,
    tol: f64,
) -> Result<LeptoquarkReport> {
    if roles.len() != geom.len() {
        return Err(Error::InconsistentPattern(format!(
            "{} roles for {} objects",
            roles.len(),
            geom.len()
        )));
    }
    let opts = EnumerationOptions {
        seed,
        tol,
        ..Default::default()
    };
    let patterns = enumerate_admissible_patterns(geom, Some(j), None, &opts)?;
    let find = |kind: PatternKind| {
        patterns
            .iter()
            .find(|p| p.kind(roles) == kind)
            .cloned()
            .ok_or_else(|| {
                Error::InconsistentPattern(format!("no {} pattern is admissible", kind.name()))
            })
    };
    let mass = find(PatternKind::Chiral)?;
    let m_witness = pattern_witness(geom, &mass, Some(j), seed);
    let mass_pattern_verdict = classify_matrix(geom, &m_witness, Some(j), tol)?;

    let gradings: Vec<(Signature, Grading)> = [Signature::Euclidean, Signature::Lorentzian]
        .into_iter()
        .map(|s| grading_for(s, roles, geom.dims()).map(|g| (s, g)))
        .collect::<Result<_>>()?;

    let mut layouts = Vec::new();
    for (sig, kind) in [
        (Signature::Euclidean, PatternKind::Crossed),
        (Signature::Lorentzian, PatternKind::ChargeConjugate),
    ] {
        let other = find(kind)?;
        let d = &m_witness + pattern_witness(geom, &other, Some(j), seed.wrapping_add(1));
        let verdict = classify_matrix(geom, &d, Some(j), tol)?;
        let offending_rows = verdict
            .diagnostics
            .iter()
            .find_map(|x| match x {
                crate::fellbundle::SectionDiagnostic::MultipleBlocksPerRow { rows, .. } => {
                    Some(rows.clone())
                }
                _ => None,
            })
            .unwrap_or_default();
        let scale = 1f64.max(d.norm());
        layouts.push(CombinedLayout {
            signature: sig,
            patterns: vec![mass.clone(), other],
            offending_rows,
            self_adjoint: hermitian_residual(&d) <= tol,
            real: j.commutes_with(&d, tol),
            anticommutes: gradings
                .iter()
                .map(|(s, g)| (*s, g.anticommutes_with(&d, tol * scale)))
                .collect(),
            verdict,
        });
    }
    Ok(LeptoquarkReport {
        mass_pattern: mass,
        mass_pattern_verdict,
        layouts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    pub sectors: Vec<String>,
    pub involutions_checked: usize,
    /// Pairings whose generic section gives left-right entries in every sector.
    pub mass_bearing: Vec<BlockPattern>,
    /// Mass-bearing pairings with nonzero entries between different sectors.
    pub mixing: Vec<BlockPattern>,
}

impl MixingReport {
    pub fn passed(&self) -> bool {
        self.mixing.is_empty()
    }
}

/// Over every involution compatible with `J`, find the sections that carry
/// left-right entries in all sectors and check that none of them connects
/// two sectors. Sectors are read per basis vector.
pub fn check_sector_mixing(
    geom: &FellBundleGeometry,
    j: &RealStructure,
    roles: &[ObjectRole],
    basis_sectors: &[String],
    seed: u64,
    tol: f64,
) -> Result<MixingReport> {
    let n = geom.total_dim();
    if basis_sectors.len() != n || roles.len() != geom.len() {
        return Err(Error::InconsistentPattern(format!(
            "{} basis sectors and {} roles for dimension {n} with {} objects",
            basis_sectors.len(),
            roles.len(),
            geom.len()
        )));
    }
    let mut sectors: Vec<String> = Vec::new();
    for s in basis_sectors {
        if !sectors.contains(s) {
            sectors.push(s.clone());
        }
    }
    let offsets = geom.offsets();
    let object_of: Vec<usize> = (0..n)
        .map(|a| offsets.iter().rposition(|&o| o <= a).unwrap())
        .collect();
    let tau = object_permutation(geom, Some(j))?;
    let candidates: Vec<Vec<usize>> = involutions(geom.len())
        .into_iter()
        .filter(|s| (0..s.len()).all(|i| s[tau[i]] == tau[s[i]]))
        .collect();

    let results: Vec<(Vec<usize>, bool, bool)> = candidates
        .into_par_iter()
        .map(|sigma| {
            let pattern = BlockPattern::new(sigma.clone()).expect("involution");
            let d = pattern_witness(geom, &pattern, Some(j), seed);
            let cutoff = tol * 1f64.max(d.norm());
            let mut lr = vec![false; sectors.len()];
            let mut mixes = false;
            for a in 0..n {
                for b in 0..n {
                    if d[(a, b)].norm() <= cutoff {
                        continue;
                    }
                    if basis_sectors[a] != basis_sectors[b] {
                        mixes = true;
                        continue;
                    }
                    let (ra, rb) = (&roles[object_of[a]], &roles[object_of[b]]);
                    let chiral = matches!(
                        (ra.chirality, rb.chirality),
                        (Chirality::Left, Chirality::Right) | (Chirality::Right, Chirality::Left)
                    );
                    if chiral && ra.conjugate == rb.conjugate {
                        let k = sectors.iter().position(|s| *s == basis_sectors[a]).unwrap();
                        lr[k] = true;
                    }
                }
            }
            (sigma, lr.iter().all(|&x| x), mixes)
        })
        .collect();

    let involutions_checked = results.len();
    let mut mass_bearing = Vec::new();
    let mut mixing = Vec::new();
    for (sigma, bearing, mixes) in results {
        if bearing {
            let p = BlockPattern::new(sigma).expect("involution");
            if mixes {
                mixing.push(p.clone());
            }
            mass_bearing.push(p);
        }
    }
    Ok(MixingReport {
        sectors,
        involutions_checked,
        mass_bearing,
        mixing,
    })
}
