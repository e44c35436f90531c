mod arch;
mod checkpoint;
mod gradcheck;
mod model;
mod net;
mod train;

pub use arch::{Architecture, LayerSpec, LATENT_DIM};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use gradcheck::{gradient_check, GradCheck, GRADCHECK_FLOOR};
pub use model::Autoencoder;
pub use train::{encode_all, train, Optimizer, StopReason, TrainConfig, TrainReport};
