mod biot_savart;
mod container;
mod dataset;
mod image;
mod noise;

pub use biot_savart::{biot_savart_segment, field_at, GUARD_DISTANCE, MU0_OVER_4PI};
pub use container::{
    decode_frames, encode_dataset, manifest_path, read_dataset, sha256_hex, write_dataset,
    DATASET_MAGIC,
};
pub use dataset::{
    capture_frames,
    default_pblock, generate_dataset, Dataset, Frame, FrameRole, Protocol, SimulationSetup,
};
pub use image::{render_at_height, render_field_image, FieldImage, ImageSpec, CHANNELS};
pub use noise::{calibrate_noise, calibrate_noise_for, DriftModel, DriftState, NOISE_FLOOR_CURRENT};
