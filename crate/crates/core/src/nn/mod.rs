//! Small feed-forward networks for the learned heads of the neural
//! estimator, with a zeroth-order trainer.

mod adam;
mod es;
mod mlp;
mod model;

pub use adam::{optimizer_step, AdamHyper, AdamState};
pub use es::{estimate_gradient, GradientEstimate};
pub use mlp::{mlp_forward, sigmoid, Activation, MlpSpec, Squash};
pub use model::{
    epsilon_head, particle_features, score_head, softmax, weight_head, HeadSpecs, ModelParameters, NamedSlice,
    CHECKPOINT_VERSION, PARTICLE_FEATURES, SCORE_FEATURES,
};
