//! Fell bundles over finite pair groupoids, their axioms, and Dirac sections.

mod axioms;
mod bundle;
mod groupoid;
mod linking;
mod section;
mod structures;

pub use axioms::{verify_fell_axioms, AxiomResult, AxiomWitness, FellAxiomReport, AXIOM_NAMES};
pub use bundle::{
    build_fell_bundle, FellBundleGeometry, FiberElement, InvolutionRule, ProductRule,
};
pub use groupoid::{build_pair_groupoid, Arrow, PairGroupoid};
pub use linking::{
    linking_algebra, saturation_check, LinkingAlgebra, SaturationEntry, SaturationReport,
};
pub use section::{
    assemble, block_support, classify_matrix, is_dirac_section, is_involution, project_to_dirac,
    random_supported, section_from_matrix, DiracSection, SectionDiagnostic, SectionVerdict,
};
pub use structures::{Grading, RealStructure, Signature};
