mod fit;
mod spectrum;

pub use fit::{fit_lorentzian, LorentzFit, MAX_ITERATIONS, STEP_TOLERANCE};
pub use spectrum::{
    dip_model, extract_field, synthesize_odmr, uniform_grid, OdmrSpec, Spectrum,
    HYPERFINE_SPLITTING, NV_GAMMA, ZERO_FIELD_SPLITTING,
};
