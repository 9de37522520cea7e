//! Dimension-generic linear algebra for quantum states.
//!
//! Density matrices are stored as dense complex `d x d` matrices. Every
//! operation is a pure function of its inputs; randomness is always passed in
//! explicitly so that parallel callers can hold independent streams.

mod linalg;
mod measure;
mod metrics;
mod state;

pub use linalg::{hermitian_eigh, C64};
pub use measure::{
    born_into, born_probabilities, log_likelihood, prob_distance, sample_counts, DistanceMetric,
    OutcomeCounts, OutcomeDistribution,
};
pub use metrics::{bures_sq, fidelity, hs_distance};
pub use state::{
    depurify, perturb_purification, purify, random_state, DensityMatrix, Purification, StatePrior,
};
pub(crate) use state::state_from_spectrum;
