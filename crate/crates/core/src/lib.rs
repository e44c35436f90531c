//! Synthetic quantum-diamond-microscope testbed for detecting hardware
//! trojans without a golden chip.

pub mod cluster;
pub mod config;
pub mod error;
pub mod fieldsynth;
pub mod kv;
pub mod layoutpower;
pub mod logicsim;
pub mod odmr;
pub mod pipeline;
pub mod preprocess;
pub mod reduce;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type FieldImage32 = fieldsynth::FieldImage<f32>;
pub type FieldImage64 = fieldsynth::FieldImage<f64>;
pub type Autoencoder32 = reduce::Autoencoder<f32>;
pub type Autoencoder64 = reduce::Autoencoder<f64>;
