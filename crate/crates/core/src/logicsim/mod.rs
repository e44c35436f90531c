//! Cycle-level simulation of base circuits and trojan blocks, producing
//! per-primitive switching activity.

mod base;
mod design;
mod design_file;
mod simulate;
mod trojan;

pub use base::{counter_step, lfsr_step, primitive_taps, shipped_lfsr_widths, BaseCircuit, BaseKind};
pub use design::{LogicDesign, Primitive, PrimitiveKind, PrimitiveRole, TrojanSpec};
pub use design_file::{
    design_from_kv, design_to_kv, format_design, parse_design, DEFAULT_COUNTER_WIDTH,
    DEFAULT_LFSR_WIDTH,
};
pub use simulate::{simulate_activity, SwitchingProfile, DEFAULT_WINDOW};
pub use trojan::{comparator_trigger, counter_trojan_step, shiftreg_step, TrojanBlock, TrojanKind};

