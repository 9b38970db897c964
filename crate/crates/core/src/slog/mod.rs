//! The unrolled network. Each layer runs a filter solve, a soft-threshold
//! source update and a multiplier update whose weights are all learned.

mod backward;
mod checkpoint;
mod forward;
mod params;
mod train;

pub use backward::{backward, loss, loss_with_grad, Gradients};
pub use checkpoint::{load_checkpoint, save_checkpoint, ModelHeader, CHECKPOINT_VERSION, MODEL_FILE, PARAMS_FILE};
pub use forward::{
    filter_sublayer, forward, forward_lifted, multipliers_sublayer, sources_sublayer, ForwardTrace, InitStates,
    LayerCache, LayerState,
};
pub use params::{admm_initial_mu, admm_mu_from_network, init_model, LayerParams, SlogModel};
pub use train::{
    adam_step, infer, train, validation_loss, AdamState, StepRecord, TrainConfig, TrainLog, ValidationRecord,
};
