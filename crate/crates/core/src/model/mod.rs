//! Dense position-regression network written from scratch.

mod layers;
mod loss;
mod matrix;
mod network;
mod persist;
mod predict;
mod train;

pub use layers::{
    default_architecture, Activation, BatchNormLayer, DenseLayer, Layer, LayerSpec, BATCH_NORM_EPSILON,
    BATCH_NORM_MOMENTUM,
};
pub use loss::{mae_gradient, mae_loss};
pub use matrix::Matrix;
pub use network::{ForwardCache, Gradients, LayerGradient, MlpRegressor, Mode, ModelError};
pub use persist::{decode_model, encode_model, load_model, save_model, PersistError, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use predict::{prepare_matrices, ModelBundle, PredictError};
pub use train::{
    batch_norm_layers, evaluate, train, EpochLoss, Optimizer, TestMetrics, TrainConfig, TrainError, TrainReport,
    DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, DEFAULT_VALIDATION_SPLIT,
};
