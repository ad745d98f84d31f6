//! Convolutional and fully connected regression networks.

mod arch;
mod checkpoint;
mod layers;
mod model;
mod train;
mod visualize;

pub use arch::{
    parse_architecture, ArchOptions, ArchitectureSpec, LayerSpec, LayerToken, Shape3, REFERENCE_CNN_MODELS, REFERENCE_FC_MODELS,
};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use layers::{backward_from, forward, loss_and_gradients, mse_and_grad, predict_normalized, Dropout, ForwardCache};
pub use model::{initialize_network, InputNorm, LayerParams, NetworkModel};
pub use train::{
    evaluate_mse, fit_normalization, predict, sgd_update, train_early_stopping, train_with_validator, EarlyStopper,
    EvalPoint, InputNormMode, SampleSource, StopDecision, TrainConfig, TrainHistory, VecSamples,
};
pub use visualize::{maximize_activation, AscentParams, AscentResult, UnitSelector};
