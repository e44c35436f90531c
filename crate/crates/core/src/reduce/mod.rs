pub mod autoencoder;
mod pca;

pub use autoencoder::{Architecture, Autoencoder, TrainConfig, TrainReport, LATENT_DIM};
pub use pca::{pca_fit, PcaModel, DEFAULT_COMPONENTS};
