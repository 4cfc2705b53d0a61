//! Closed-loop chromatographic process development.
//!
//! The pipeline runs design → simulated rig → assay → response-surface fit →
//! NSGA-II optimization → design space → validation. Each stage lives in its
//! own module and can be driven independently.

pub mod assay;
pub mod calibration;
pub mod campaign;
pub mod case_study;
pub mod doe;
pub mod dspace;
pub mod params;
pub mod pareto;
pub mod replicate;
pub mod plant;
pub mod rsm;

pub use params::{FactorSpec, MaterialAttributes, ProcessParams};
