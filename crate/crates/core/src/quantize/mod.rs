//! Dynamics on spaces of Dirac sections: generated algebras, the partition
//! sum, geodesic and modular flows, and a Metropolis sampler.

mod flow;
mod partition;
mod sampler;
mod space;

pub use flow::{
    geodesic_flow, heuristic_dirac_from_state, kms_check, modular_flow, HeuristicDirac,
    KmsContinuation, KmsReport, ModularFlow, HEURISTIC_LABEL,
};
pub use partition::{partition_sum, PartitionMode, ProductIndex, StateSet};
pub use sampler::{ks_distance, metropolis_sample, Ensemble, MetropolisOptions, Sample};
pub use space::{generated_algebra_dims, generated_dimension, ConfigurationSpace, GeneratedDims};
