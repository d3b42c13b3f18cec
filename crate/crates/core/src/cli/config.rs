//! TOML geometry configuration: schema, parsing with line-anchored
//! diagnostics, canonical emission, and the bundled examples.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default = "default_signature")]
    pub signature: String,
    #[serde(default)]
    pub product_bundle: bool,
    pub objects: Vec<Spanned<ObjectSpec>>,
    pub algebra: Spanned<AlgebraSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub representation: Vec<Spanned<PlacementSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_structure: Option<Spanned<RealStructureSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<Spanned<GradingSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<Spanned<EmbeddingSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<Spanned<BundleSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirac: Option<Spanned<DiracSpec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<Spanned<StateSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Spanned<PartitionSpec>>,
}

fn default_signature() -> String {
    "euclidean".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    /// Block dimension; derived from the factors for product bundles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_rep: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opp_fiber: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opp_rep: Option<usize>,
    #[serde(default = "default_chirality")]
    pub chirality: String,
    #[serde(default)]
    pub conjugate: bool,
    #[serde(default = "default_sector")]
    pub sector: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis_sectors: Vec<String>,
}

fn default_chirality() -> String {
    "none".into()
}

fn default_sector() -> String {
    "main".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub summands: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default)]
    pub faithful: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    /// Summand label or 0-based index as a string.
    pub summand: String,
    pub object: String,
    /// Indices local to the object.
    pub indices: Vec<usize>,
    #[serde(default)]
    pub conjugate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealStructureSpec {
    pub sign_j2: i32,
    pub sign_dj: i32,
    /// Global 0-based basis permutation: `J e_i = phase_i e_{perm[i]}`.
    pub permutation: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradingSpec {
    /// `"signature"` derives the object signs from chirality and the
    /// particle/antiparticle flag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub object_signs: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    #[serde(default = "default_embedding")]
    pub bimodule: String,
}

fn default_embedding() -> String {
    "column".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    #[serde(default = "default_involution")]
    pub involution: String,
    #[serde(default = "default_product")]
    pub product: String,
}

fn default_involution() -> String {
    "conjugate-transpose".into()
}

fn default_product() -> String {
    "matrix".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracSpec {
    /// `none`: D is the sum of the blocks; `adjoint`: D = B + B*;
    /// `real`: D₁ = B + B*, D = D₁ ± J D₁ J⁻¹.
    #[serde(default = "default_completion")]
    pub completion: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<Spanned<BlockSpec>>,
}

fn default_completion() -> String {
    "real".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub row: String,
    pub col: String,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub name: String,
    /// `basis`, `mixed`, `diagonal` or `vector`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    #[serde(default = "default_partition_product")]
    pub product: String,
    #[serde(default = "default_partition_mode")]
    pub mode: String,
}

fn default_partition_product() -> String {
    "single".into()
}

fn default_partition_mode() -> String {
    "trace".into()
}

/// 1-based line of a byte offset.
pub fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Error anchored at the start of a span.
pub fn error_at(src: &str, span: Range<usize>, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {}: {msg}", line_of(src, span.start)))
}

/// Parse the schema. Semantic validation happens when the config is turned
/// into a model.
pub fn parse_config(text: &str) -> Result<GeometryConfig> {
    toml::from_str::<GeometryConfig>(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
        Error::Config(format!("line {line}: {}", e.message()))
    })
}

/// Canonical text form.
pub fn emit_config(cfg: &GeometryConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(format!("cannot emit config: {e}")))
}

/// Example geometries shipped with the binary.
pub const BUNDLED: &[(&str, &str)] = &[
    ("two_point", include_str!("../../configs/two_point.toml")),
    ("qubit", include_str!("../../configs/qubit.toml")),
    (
        "quarks_uncoloured",
        include_str!("../../configs/quarks_uncoloured.toml"),
    ),
    (
        "quarks_coloured",
        include_str!("../../configs/quarks_coloured.toml"),
    ),
    (
        "one_generation",
        include_str!("../../configs/one_generation.toml"),
    ),
    (
        "merged_sectors",
        include_str!("../../configs/merged_sectors.toml"),
    ),
    (
        "corrupt_bundle",
        include_str!("../../configs/corrupt_bundle.toml"),
    ),
    (
        "scaled_involution",
        include_str!("../../configs/scaled_involution.toml"),
    ),
    (
        "scaled_product",
        include_str!("../../configs/scaled_product.toml"),
    ),
    (
        "broken_first_order",
        include_str!("../../configs/broken_first_order.toml"),
    ),
    (
        "broken_reality",
        include_str!("../../configs/broken_reality.toml"),
    ),
    (
        "broken_grading",
        include_str!("../../configs/broken_grading.toml"),
    ),
];

/// Bundled configs that are expected to fail `check`.
pub const NEGATIVE_CONTROLS: &[&str] = &[
    "corrupt_bundle",
    "scaled_involution",
    "scaled_product",
    "broken_first_order",
    "broken_reality",
    "broken_grading",
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Bundled name or path to a TOML file.
pub fn load_config_text(name_or_path: &str) -> Result<(String, String)> {
    if let Some(text) = bundled(name_or_path) {
        return Ok((name_or_path.to_string(), text.to_string()));
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|e| {
        Error::Config(format!(
            "{name_or_path:?} is neither a bundled config nor a readable file ({e})"
        ))
    })?;
    Ok((name_or_path.to_string(), text))
}
