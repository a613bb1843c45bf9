pub mod eigen;
pub mod error;
pub mod matrix;
pub mod measure;
pub mod proximality;
pub mod quad;
pub mod renewal;
pub mod rng;
pub mod stats;
pub mod transfer;
pub mod walk;

pub use error::{Error, Result};
pub use matrix::{CartanDecomposition, DualProjectivePoint, GroupElement, ProjectivePoint};
pub use measure::GeneratorMeasure;
pub use proximality::ProximalCertificate;
pub use transfer::{DiscretizedOperator, GridFunction, StateGrid};
pub use walk::{EmpiricalMeasure, LyapunovEstimate};
