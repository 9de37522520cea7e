//! Quantum state tomography algorithms: a standard linear-inversion baseline,
//! an adaptive Bayesian particle filter, and a neural adaptive estimator whose
//! particle weighting, perturbation and guess aggregation are learned.
//!
//! All randomness flows through caller-supplied generators, so every run is
//! reproducible from its seed.

pub mod abqt;
pub mod adapt;
pub mod error;
pub mod naqst;
pub mod nn;
pub mod povm;
pub mod qcore;
pub mod rng;
pub mod schedule;
pub mod source;
pub mod standard;

pub use error::{Error, Result};
pub use povm::{build_povm, random_orientation, OrientationAngles, PovmFamily, ProductPovm};
pub use qcore::{DensityMatrix, OutcomeCounts, OutcomeDistribution, StatePrior};
pub use source::{MeasurementRecord, MeasurementSource, SimulatedSource};
