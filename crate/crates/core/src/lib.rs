//! Carbon-footprint estimation for computational workloads.
//!
//! The energy model lives in [`model`] and is generic over the scalar type
//! (see [`num::Scalar`]). The aliases at the crate root fix the scalar to
//! `f64`, which is what the catalogs, ingestion and the service use.

pub mod constants;
pub mod error;
pub mod ingest;
pub mod model;
pub mod num;
pub mod presets;
pub mod reference;
pub mod report;
pub mod request;
pub mod scenario;
pub mod service;

pub use error::{ModelError, ModelResult};
pub use model::{
    energy, energy_from_power, equivalences, estimate, estimate_with, footprint, per_unit_power,
    ProcessorKind,
};
pub use num::Scalar;
pub use reference::{DataError, ReferenceData};

pub type ProcessorProfile = model::ProcessorProfile<f64>;
pub type MemorySpec = model::MemorySpec<f64>;
pub type Workload = model::Workload<f64>;
pub type Facility = model::Facility<f64>;
pub type GridCarbonIntensity = model::GridCarbonIntensity<f64>;
pub type EnergyEstimate = model::EnergyEstimate<f64>;
pub type FootprintEstimate = model::FootprintEstimate<f64>;
pub type EquivalenceSet = model::EquivalenceSet<f64>;
pub type ReferenceConstants = constants::ReferenceConstants<f64>;
