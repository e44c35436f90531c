//! Placement of design primitives in a pblock, activity-to-current
//! conversion, and top-metal rail current solving.

mod currents;
mod placement;
mod rails;

pub use currents::{activity_to_currents, CellCurrentMap, CurrentWeights};
pub use placement::{place_cells, place_design, place_design_with_pitch, Placement, Rect, DEFAULT_CELL_PITCH};
pub use rails::{solve_rail_currents, PadSide, PowerGridSpec, WireSegment};
