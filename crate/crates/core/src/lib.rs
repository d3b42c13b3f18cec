//! Finite spectral triples and Fell-bundle geometries over pair groupoids.
//!
//! The crate is organised bottom-up:
//!
//! * [`lincore`]: block algebras, representations and dense complex helpers.
//! * [`fellbundle`]: pair groupoids, Fell bundles, axiom checks and Dirac sections.
//! * [`triple`]: real even spectral triples, spectral action, state distance.
//! * [`constraints`]: admissible block patterns and the reality constraint.
//! * [`quantize`]: configuration spaces, partition sums, sampling, modular flow.
//! * [`cli`]: configuration files, bundled examples and the command surface.

pub mod cli;
pub mod constraints;
pub mod error;
pub mod fellbundle;
pub mod lincore;
pub mod quantize;
pub mod triple;

pub use error::{Error, Result};
