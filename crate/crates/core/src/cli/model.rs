//! Validated geometry built from a [`GeometryConfig`].

use std::collections::HashMap;

use toml::Spanned;

use super::config::{error_at, GeometryConfig, ObjectSpec};
use crate::constraints::{BimoduleEmbedding, Chirality, ObjectRole, ProductBundle, ProductFactors};
use crate::error::{Error, Result};
use crate::fellbundle::{
    FellBundleGeometry, Grading, InvolutionRule, PairGroupoid, ProductRule, RealStructure,
    Signature,
};
use crate::lincore::{
    set_block, BlockAlgebra, CMatrix, CVector, Complex64, HilbertSpace, Placement, Representation,
};
use crate::quantize::{PartitionMode, ProductIndex, StateSet};
use crate::triple::{StateFunctional, TripleData};

#[derive(Debug, Clone)]
pub struct Model {
    pub config: GeometryConfig,
    /// Text the config was parsed from, for line-anchored errors.
    pub source: String,
    pub name: String,
    pub signature: Signature,
    pub geometry: FellBundleGeometry,
    /// Present for product bundles.
    pub factors: Option<Vec<ProductFactors>>,
    pub embedding: BimoduleEmbedding,
    pub roles: Vec<ObjectRole>,
    /// One label per basis vector.
    pub basis: Vec<String>,
    /// Sector of each basis vector.
    pub basis_sectors: Vec<String>,
    pub rep: Representation,
    pub j: Option<RealStructure>,
    pub grading: Option<Grading>,
    pub dirac: CMatrix,
    pub states: StateSet,
    pub partition_mode: PartitionMode,
    pub partition_product: ProductIndex,
}

/// Line of the first top-level `key =` assignment, for errors on scalars.
fn key_line(src: &str, key: &str) -> usize {
    src.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
        .unwrap_or(1)
}

fn key_error(src: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {}: {msg}", key_line(src, key)))
}

fn parse_involution(s: &str) -> Result<InvolutionRule> {
    match s {
        "conjugate-transpose" => Ok(InvolutionRule::ConjugateTranspose),
        "transpose" => Ok(InvolutionRule::Transpose),
        _ => match s.strip_prefix("scaled-adjoint:").map(str::parse::<f64>) {
            Some(Ok(f)) => Ok(InvolutionRule::ScaledAdjoint(f)),
            _ => Err(Error::Config(format!(
                "unknown involution {s:?} (expected conjugate-transpose, transpose or scaled-adjoint:F)"
            ))),
        },
    }
}

fn parse_product(s: &str) -> Result<ProductRule> {
    match s {
        "matrix" => Ok(ProductRule::Matrix),
        _ => match s.strip_prefix("scaled:").map(str::parse::<f64>) {
            Some(Ok(f)) => Ok(ProductRule::Scaled(f)),
            _ => Err(Error::Config(format!(
                "unknown fiber product {s:?} (expected matrix or scaled:F)"
            ))),
        },
    }
}

fn complex_matrix(re: &[Vec<f64>], im: &[Vec<f64>], rows: usize, cols: usize) -> Result<CMatrix> {
    let shape_ok = |m: &[Vec<f64>]| m.len() == rows && m.iter().all(|r| r.len() == cols);
    if !shape_ok(re) {
        return Err(Error::Config(format!("re must be a {rows}x{cols} array")));
    }
    if !im.is_empty() && !shape_ok(im) {
        return Err(Error::Config(format!(
            "im must be empty or a {rows}x{cols} array"
        )));
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| {
        Complex64::new(re[r][c], im.get(r).map_or(0.0, |row| row[c]))
    }))
}

struct ObjectData {
    dim: usize,
    factors: Option<ProductFactors>,
    role: ObjectRole,
    basis: Vec<String>,
    basis_sectors: Vec<String>,
}

fn object_data(spec: &ObjectSpec, product: bool) -> std::result::Result<ObjectData, String> {
    let factors = match (spec.fiber, spec.opp_fiber) {
        (Some(f), Some(o)) => Some(ProductFactors {
            fiber: f,
            fiber_rep: spec.fiber_rep.unwrap_or(f),
            opp_fiber: o,
            opp_rep: spec.opp_rep.unwrap_or(o),
        }),
        (None, None) if spec.fiber_rep.is_none() && spec.opp_rep.is_none() => None,
        _ => return Err("fiber and opp_fiber must be given together".into()),
    };
    if product && factors.is_none() {
        return Err("product bundles need fiber and opp_fiber on every object".into());
    }
    let dim = match (spec.dim, factors) {
        (Some(d), Some(f)) if d != f.fiber_rep * f.opp_rep => {
            return Err(format!(
                "dim {d} disagrees with fiber_rep * opp_rep = {}",
                f.fiber_rep * f.opp_rep
            ))
        }
        (Some(d), _) => d,
        (None, Some(f)) => f.fiber_rep * f.opp_rep,
        (None, None) => return Err("missing dim".into()),
    };
    if dim == 0 {
        return Err("dim must be positive".into());
    }
    let chirality: Chirality = spec.chirality.parse().map_err(|e: Error| e.to_string())?;
    let basis = if spec.basis.is_empty() {
        if dim == 1 {
            vec![spec.id.clone()]
        } else {
            (0..dim).map(|k| format!("{}_{k}", spec.id)).collect()
        }
    } else if spec.basis.len() == dim {
        spec.basis.clone()
    } else {
        return Err(format!(
            "{} basis labels for dimension {dim}",
            spec.basis.len()
        ));
    };
    let basis_sectors = if spec.basis_sectors.is_empty() {
        vec![spec.sector.clone(); dim]
    } else if spec.basis_sectors.len() == dim {
        spec.basis_sectors.clone()
    } else {
        return Err(format!(
            "{} basis sectors for dimension {dim}",
            spec.basis_sectors.len()
        ));
    };
    Ok(ObjectData {
        dim,
        factors,
        role: ObjectRole {
            chirality,
            conjugate: spec.conjugate,
            sector: spec.sector.clone(),
        },
        basis,
        basis_sectors,
    })
}

impl Model {
    /// Validate a parsed config. `src` is the text it came from, used to
    /// anchor diagnostics to lines.
    pub fn from_config(config: GeometryConfig, src: &str) -> Result<Self> {
        let cfg = &config;
        let at = |span: std::ops::Range<usize>, msg: String| error_at(src, span, msg);
        let signature: Signature = cfg
            .signature
            .parse()
            .map_err(|e: Error| key_error(src, "signature", e))?;

        if cfg.objects.is_empty() {
            return Err(key_error(
                src,
                "name",
                "at least one [[objects]] entry is required",
            ));
        }
        let mut objects = Vec::new();
        for o in &cfg.objects {
            let data = object_data(o.get_ref(), cfg.product_bundle)
                .map_err(|m| at(o.span(), format!("object {:?}: {m}", o.get_ref().id)))?;
            objects.push(data);
        }
        let ids: Vec<&str> = cfg
            .objects
            .iter()
            .map(|o| o.get_ref().id.as_str())
            .collect();
        let groupoid =
            PairGroupoid::new(&ids).map_err(|e| at(cfg.objects[0].span(), e.to_string()))?;
        let dims: Vec<usize> = objects.iter().map(|o| o.dim).collect();
        let mut geometry = FellBundleGeometry::new(groupoid, dims.clone())
            .map_err(|e| at(cfg.objects[0].span(), e.to_string()))?
            .with_product_bundle(cfg.product_bundle);
        if let Some(b) = &cfg.bundle {
            let inv = parse_involution(&b.get_ref().involution)
                .map_err(|e| at(b.span(), e.to_string()))?;
            let prod =
                parse_product(&b.get_ref().product).map_err(|e| at(b.span(), e.to_string()))?;
            geometry = geometry.with_involution(inv).with_product(prod);
        }
        let offsets = geometry.offsets();
        let n = geometry.total_dim();
        let object_index = |id: &str| ids.iter().position(|&x| x == id);

        let factors = if cfg.product_bundle {
            Some(
                objects
                    .iter()
                    .map(|o| o.factors.expect("checked"))
                    .collect::<Vec<_>>(),
            )
        } else {
            None
        };
        let embedding = match &cfg.embeddings {
            None => BimoduleEmbedding::default(),
            Some(e) => e
                .get_ref()
                .bimodule
                .parse()
                .map_err(|x: Error| at(e.span(), x.to_string()))?,
        };

        let basis: Vec<String> = objects.iter().flat_map(|o| o.basis.clone()).collect();
        let basis_sectors: Vec<String> = objects
            .iter()
            .flat_map(|o| o.basis_sectors.clone())
            .collect();
        let roles: Vec<ObjectRole> = objects.iter().map(|o| o.role.clone()).collect();
        let space = HilbertSpace::new(basis.clone())
            .map_err(|e| at(cfg.objects[0].span(), e.to_string()))?;

        let alg = cfg.algebra.get_ref();
        let labels = (!alg.labels.is_empty()).then(|| alg.labels.clone());
        let algebra = BlockAlgebra::new(alg.summands.clone(), labels)
            .map_err(|e| at(cfg.algebra.span(), e.to_string()))?;
        let mut placements = Vec::new();
        for p in &cfg.representation {
            let spec = p.get_ref();
            let summand = alg
                .labels
                .iter()
                .position(|l| *l == spec.summand)
                .or_else(|| spec.summand.parse::<usize>().ok())
                .ok_or_else(|| at(p.span(), format!("unknown summand {:?}", spec.summand)))?;
            let obj = object_index(&spec.object)
                .ok_or_else(|| at(p.span(), format!("unknown object {:?}", spec.object)))?;
            if let Some(&bad) = spec.indices.iter().find(|&&i| i >= dims[obj]) {
                return Err(at(
                    p.span(),
                    format!(
                        "index {bad} outside object {:?} of dimension {}",
                        spec.object, dims[obj]
                    ),
                ));
            }
            placements.push(Placement {
                summand,
                indices: spec.indices.iter().map(|&i| offsets[obj] + i).collect(),
                conjugate: spec.conjugate,
            });
        }
        let rep =
            Representation::new(algebra, space.clone(), placements, alg.faithful).map_err(|e| {
                let span = cfg
                    .representation
                    .first()
                    .map_or(cfg.algebra.span(), |p| p.span());
                at(span, e.to_string())
            })?;

        let j = match &cfg.real_structure {
            None => None,
            Some(r) => {
                let spec = r.get_ref();
                let phases: Option<Vec<Complex64>> = (!spec.phases.is_empty()).then(|| {
                    spec.phases
                        .iter()
                        .map(|p| Complex64::new(p[0], p[1]))
                        .collect()
                });
                Some(
                    RealStructure::from_permutation(
                        space.clone(),
                        &spec.permutation,
                        phases.as_deref(),
                        spec.sign_j2,
                        spec.sign_dj,
                    )
                    .map_err(|e| at(r.span(), e.to_string()))?,
                )
            }
        };

        let grading = match &cfg.grading {
            None => None,
            Some(g) => {
                let spec = g.get_ref();
                let signs: Vec<i8> = match spec.from.as_deref() {
                    Some("signature") => {
                        if !spec.object_signs.is_empty() {
                            return Err(at(
                                g.span(),
                                "give either from or object_signs, not both".into(),
                            ));
                        }
                        roles
                            .iter()
                            .zip(&ids)
                            .map(|(r, id)| match r.chirality {
                                Chirality::Neutral => Err(at(
                                    g.span(),
                                    format!("object {id:?} has no chirality to derive a grading sign from"),
                                )),
                                c => Ok(signature.sector_sign(c == Chirality::Left, r.conjugate)),
                            })
                            .collect::<Result<_>>()?
                    }
                    Some(other) => {
                        return Err(at(g.span(), format!("unknown grading source {other:?}")))
                    }
                    None => spec.object_signs.clone(),
                };
                Some(
                    Grading::from_object_signs(&signs, &dims)
                        .map_err(|e| at(g.span(), e.to_string()))?,
                )
            }
        };

        let mut dirac = CMatrix::zeros(n, n);
        if let Some(d) = &cfg.dirac {
            let spec = d.get_ref();
            let mut b = CMatrix::zeros(n, n);
            for blk in &spec.blocks {
                let bs = blk.get_ref();
                let r = object_index(&bs.row)
                    .ok_or_else(|| at(blk.span(), format!("unknown object {:?}", bs.row)))?;
                let c = object_index(&bs.col)
                    .ok_or_else(|| at(blk.span(), format!("unknown object {:?}", bs.col)))?;
                let m = complex_matrix(&bs.re, &bs.im, dims[r], dims[c])
                    .map_err(|e| at(blk.span(), format!("block ({}, {}): {e}", bs.row, bs.col)))?;
                let mut tmp = CMatrix::zeros(n, n);
                set_block(&mut tmp, offsets[r], offsets[c], &m);
                b += tmp;
            }
            dirac = match spec.completion.as_str() {
                "none" => b,
                "adjoint" => &b + b.adjoint(),
                "real" => {
                    let jj = j.as_ref().ok_or_else(|| {
                        at(
                            d.span(),
                            "completion \"real\" needs a [real_structure]".into(),
                        )
                    })?;
                    let d1 = &b + b.adjoint();
                    let s = Complex64::new(f64::from(jj.sign_dj()), 0.0);
                    &d1 + jj.conjugate_operator(&d1) * s
                }
                other => {
                    return Err(at(
                        d.span(),
                        format!("unknown completion {other:?} (expected none, adjoint or real)"),
                    ))
                }
            };
        }

        let states = if cfg.states.is_empty() {
            StateSet::basis(n)?
        } else {
            let mut list = Vec::new();
            for s in &cfg.states {
                let st = state_from_spec(s, n)
                    .map_err(|e| at(s.span(), format!("state {:?}: {e}", s.get_ref().name)))?;
                list.push((s.get_ref().name.clone(), st));
            }
            StateSet::new(list)?
        };

        let (partition_mode, partition_product) = match &cfg.partition {
            None => (PartitionMode::default(), ProductIndex::default()),
            Some(p) => (
                p.get_ref()
                    .mode
                    .parse()
                    .map_err(|e: Error| at(p.span(), e.to_string()))?,
                p.get_ref()
                    .product
                    .parse()
                    .map_err(|e: Error| at(p.span(), e.to_string()))?,
            ),
        };
        if partition_mode == PartitionMode::StateWeighted
            && partition_product == ProductIndex::PerObject
        {
            let span = cfg.partition.as_ref().expect("non-default").span();
            return Err(at(
                span,
                "per-object products are only defined in trace mode".into(),
            ));
        }

        Ok(Self {
            name: cfg.name.clone(),
            signature,
            geometry,
            factors,
            embedding,
            roles,
            basis,
            basis_sectors,
            rep,
            j,
            grading,
            dirac,
            states,
            partition_mode,
            partition_product,
            config,
            source: src.to_string(),
        })
    }

    pub fn object_ids(&self) -> &[String] {
        self.geometry.groupoid().objects()
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.geometry.groupoid().index_of(id)
    }

    /// Sector names in order of first appearance.
    pub fn sectors(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.roles {
            if !out.contains(&r.sector) {
                out.push(r.sector.clone());
            }
        }
        out
    }

    pub fn triple(&self) -> Result<TripleData> {
        TripleData::new(
            self.rep.clone(),
            self.dirac.clone(),
            self.j.clone(),
            self.grading.clone(),
            self.signature,
        )
    }

    pub fn product_bundle(&self) -> Result<ProductBundle> {
        let factors = self.factors.clone().ok_or_else(|| {
            Error::Geometry(format!("{} is not declared as a product bundle", self.name))
        })?;
        ProductBundle::new(self.geometry.clone(), factors, self.embedding)
    }

    /// Sub-geometry on the objects of one sector. `J` must map the sector to
    /// itself. The algebra is kept whole and no longer declared faithful;
    /// declared states are replaced by the basis states of the sector.
    pub fn restrict(&self, sector: &str) -> Result<Model> {
        let keep: Vec<usize> = (0..self.roles.len())
            .filter(|&i| self.roles[i].sector == sector)
            .collect();
        if keep.is_empty() {
            return Err(Error::Config(format!(
                "no objects in sector {sector:?} (sectors: {})",
                self.sectors().join(", ")
            )));
        }
        if keep.len() == self.roles.len() {
            return Ok(self.clone());
        }
        let cfg = &self.config;
        let ids = self.object_ids();
        let kept_ids: Vec<&str> = keep.iter().map(|&i| ids[i].as_str()).collect();
        let offsets = self.geometry.offsets();
        let dims = self.geometry.dims();
        let mut global: HashMap<usize, usize> = HashMap::new();
        for &i in &keep {
            for k in 0..dims[i] {
                let next = global.len();
                global.insert(offsets[i] + k, next);
            }
        }

        let mut out = cfg.clone();
        out.objects = keep.iter().map(|&i| cfg.objects[i].clone()).collect();
        out.algebra = Spanned::new(cfg.algebra.span(), {
            let mut a = cfg.algebra.get_ref().clone();
            a.faithful = false;
            a
        });
        out.representation = cfg
            .representation
            .iter()
            .filter(|p| kept_ids.contains(&p.get_ref().object.as_str()))
            .cloned()
            .collect();
        if let Some(r) = &cfg.real_structure {
            let mut spec = r.get_ref().clone();
            let mut perm = vec![0; global.len()];
            let mut phases = Vec::new();
            let mut old_of_new = vec![0; global.len()];
            for (&old, &new) in &global {
                old_of_new[new] = old;
            }
            for (new, &old) in old_of_new.iter().enumerate() {
                let target = spec.permutation.get(old).copied().unwrap_or(usize::MAX);
                perm[new] = *global.get(&target).ok_or_else(|| {
                    Error::Config(format!("J maps sector {sector:?} outside itself"))
                })?;
                if let Some(p) = spec.phases.get(old) {
                    phases.push(*p);
                }
            }
            spec.permutation = perm;
            if !spec.phases.is_empty() {
                spec.phases = phases;
            }
            out.real_structure = Some(Spanned::new(r.span(), spec));
        }
        if let Some(g) = &cfg.grading {
            let mut spec = g.get_ref().clone();
            if !spec.object_signs.is_empty() {
                spec.object_signs = keep
                    .iter()
                    .map(|&i| spec.object_signs.get(i).copied().unwrap_or(0))
                    .collect();
            }
            out.grading = Some(Spanned::new(g.span(), spec));
        }
        if let Some(d) = &cfg.dirac {
            let mut spec = d.get_ref().clone();
            spec.blocks.retain(|b| {
                let b = b.get_ref();
                kept_ids.contains(&b.row.as_str()) && kept_ids.contains(&b.col.as_str())
            });
            out.dirac = Some(Spanned::new(d.span(), spec));
        }
        out.states.clear();
        out.name = format!("{}[{sector}]", cfg.name);
        Model::from_config(out, &self.source)
    }
}

fn state_from_spec(s: &Spanned<super::config::StateSpec>, n: usize) -> Result<StateFunctional> {
    let spec = s.get_ref();
    match spec.kind.as_str() {
        "basis" => {
            let i = spec
                .index
                .ok_or_else(|| Error::Config("basis state needs index".into()))?;
            StateFunctional::basis(n, i)
        }
        "mixed" => StateFunctional::maximally_mixed(n),
        "diagonal" => {
            if spec.weights.len() != n {
                return Err(Error::Config(format!(
                    "{} weights for dimension {n}",
                    spec.weights.len()
                )));
            }
            StateFunctional::new(crate::lincore::real_diag(&spec.weights), 1e-10)
        }
        "vector" => {
            if spec.re.len() != n || !(spec.im.is_empty() || spec.im.len() == n) {
                return Err(Error::Config(format!("vector state needs {n} components")));
            }
            let v = CVector::from_fn(n, |i, _| {
                Complex64::new(spec.re[i], spec.im.get(i).copied().unwrap_or(0.0))
            });
            StateFunctional::from_vector(&v)
        }
        other => Err(Error::Config(format!(
            "unknown state kind {other:?} (expected basis, mixed, diagonal or vector)"
        ))),
    }
}
