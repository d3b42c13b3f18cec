use crate::error::{Error, Result};
use crate::fellbundle::FellBundleGeometry;
use crate::lincore::{get_block, CMatrix};
use crate::triple::StateFunctional;

/// Named, nonempty list of states summed over in the partition sum.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    states: Vec<(String, StateFunctional)>,
}

impl StateSet {
    pub fn new(states: Vec<(String, StateFunctional)>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyStateSet);
        }
        let dim = states[0].1.dimension();
        if let Some((name, s)) = states.iter().find(|(_, s)| s.dimension() != dim) {
            return Err(Error::InvalidState(format!(
                "state {name} has dimension {}, expected {dim}",
                s.dimension()
            )));
        }
        Ok(Self { states })
    }

    /// Vector states of the standard basis.
    pub fn basis(dim: usize) -> Result<Self> {
        let states = (0..dim)
            .map(|i| StateFunctional::basis(dim, i).map(|s| (format!("e{i}"), s)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states)
    }

    pub fn states(&self) -> &[(String, StateFunctional)] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.states[0].1.dimension()
    }

    pub fn names(&self) -> Vec<&str> {
        self.states.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Every density replaced by `U ρ U†`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        let states = self
            .states
            .iter()
            .map(|(n, s)| {
                StateFunctional::new(u * s.density() * u.adjoint(), 1e-9).map(|s| (n.clone(), s))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(states)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionMode {
    /// Per-state factor `Tr(D²)`; the state only indexes the sum.
    #[default]
    Trace,
    /// Per-state factor `ω(D²) = Tr(ρ D²)`.
    StateWeighted,
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(Self::Trace),
            "state-weighted" => Ok(Self::StateWeighted),
            other => Err(Error::Config(format!(
                "unknown partition mode {other:?} (expected trace or state-weighted)"
            ))),
        }
    }
}

impl PartitionMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Trace => "trace",
            Self::StateWeighted => "state-weighted",
        }
    }
}

/// Index set of the product inside each summand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProductIndex {
    /// A single factor per state.
    #[default]
    Single,
    /// Product over objects of the loop traces `Tr((D²)_{ii})`.
    PerObject,
}

impl std::str::FromStr for ProductIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Self::Single),
            "per-object" => Ok(Self::PerObject),
            other => Err(Error::Config(format!(
                "unknown partition product {other:?} (expected single or per-object)"
            ))),
        }
    }
}

impl ProductIndex {
    pub fn name(self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::PerObject => "per-object",
        }
    }
}

/// `Z = Σ_ω Π factor(ω)`. Per-object products are only defined in trace
/// mode; combining them with state weights is rejected.
pub fn partition_sum(
    d: &CMatrix,
    geom: &FellBundleGeometry,
    states: &StateSet,
    mode: PartitionMode,
    product: ProductIndex,
) -> Result<f64> {
    let n = geom.total_dim();
    if d.shape() != (n, n) || states.dimension() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("({n}, {n}) and states on dimension {n}"),
            found: format!("{:?} and {}", d.shape(), states.dimension()),
        });
    }
    if states.is_empty() {
        return Err(Error::EmptyStateSet);
    }
    let d2 = d * d;
    match (mode, product) {
        (PartitionMode::Trace, ProductIndex::Single) => Ok(states.len() as f64 * d2.trace().re),
        (PartitionMode::Trace, ProductIndex::PerObject) => {
            let offsets = geom.offsets();
            let prod: f64 = geom
                .dims()
                .iter()
                .zip(&offsets)
                .map(|(&k, &o)| get_block(&d2, o, o, k, k).trace().re)
                .product();
            Ok(states.len() as f64 * prod)
        }
        (PartitionMode::StateWeighted, ProductIndex::Single) => Ok(states
            .states()
            .iter()
            .map(|(_, s)| crate::triple::trace_product(s.density(), &d2).re)
            .sum()),
        (PartitionMode::StateWeighted, ProductIndex::PerObject) => Err(Error::Config(
            "per-object products are only defined in trace mode".into(),
        )),
    }
}
