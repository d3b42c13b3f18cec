//! Constraints on Fell-bundle Dirac operators: admissible block patterns,
//! the reality condition on product bundles, and the exclusion results that
//! follow from one block per row and column.

mod exclusion;
mod mass;
mod pattern;
mod product;

pub use exclusion::{
    check_leptoquark_exclusion, check_sector_mixing, pattern_witness, CombinedLayout,
    LeptoquarkReport, MixingReport,
};
pub use mass::{diagonalize_mass, group_masses, repeated_block, MassSpectrum};
pub use pattern::{
    enumerate_admissible_patterns, involutions, object_permutation, select_mass_pattern,
    BlockPattern, Chirality, EnumerationOptions, MassSelection, ObjectRole, PatternKind,
};
pub use product::{
    block_orbits, jacobian_rank, manifold_real_rank, solve_reality_constraint, BimoduleEmbedding,
    ConstraintSolution, ProductBundle, ProductFactors, ProductParameterization, TensorEquation,
    RANK_SEEDS, WITNESSES,
};
