//! Truncated bosonic Gibbs states and their classical field limit.
//!
//! One-body spectral models sit at the bottom and every other module is
//! built on them. [`experiment`] compares the quantum and classical sides.

pub mod counterterm;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod ineq;
pub mod linalg;
pub mod measure;
pub mod quad;
pub mod rng;
pub mod spectral;
pub mod special;
pub mod thermo;

pub use error::{Error, Result};
pub use fock::{FockModel, FockOperator, GibbsEnsemble, NmaxPolicy};
pub use linalg::{CMat, C64};
pub use measure::{FieldSample, MCEstimate};
pub use spectral::{BasisKind, InteractionSpec, ModeBasis};
pub use thermo::{ExpansionReport, ThermoParams};
