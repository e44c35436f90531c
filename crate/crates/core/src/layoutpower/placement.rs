use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::logicsim::LogicDesign;

/// Default spacing between placement sites, micrometers.
pub const DEFAULT_CELL_PITCH: f64 = 10.0;

/// Axis-aligned rectangle in micrometers on the die plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Cell centers indexed by primitive id.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub pblock: Rect,
    pub cell_pitch: f64,
    pub positions: Vec<[f64; 2]>,
}

impl Placement {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn site_grid(pblock: Rect, pitch: f64) -> Result<(usize, usize)> {
    if !(pitch > 0.0) || !(pblock.width() > 0.0) || !(pblock.height() > 0.0) {
        return Err(Error::Config(format!(
            "invalid pblock {pblock:?} or cell pitch {pitch}"
        )));
    }
    let cols = (pblock.width() / pitch + 1e-9).floor() as usize;
    let rows = (pblock.height() / pitch + 1e-9).floor() as usize;
    Ok((rows, cols))
}

/// Places `base_cells` in raster order from the pblock's first site, then
/// `trojan_cells` in consecutive free sites starting at a seed-chosen free
/// site (seed 0 starts right after the base). Base sites never depend on the
/// trojan cells.
pub fn place_cells(
    base_cells: usize,
    trojan_cells: usize,
    pblock: Rect,
    cell_pitch: f64,
    seed: u64,
) -> Result<Placement> {
    let (rows, cols) = site_grid(pblock, cell_pitch)?;
    let sites = rows * cols;
    let cells = base_cells + trojan_cells;
    if cells > sites {
        return Err(Error::Capacity { sites, cells });
    }
    let site_center = |s: usize| {
        let (r, c) = (s / cols, s % cols);
        [
            pblock.x0 + (c as f64 + 0.5) * cell_pitch,
            pblock.y0 + (r as f64 + 0.5) * cell_pitch,
        ]
    };
    let mut positions: Vec<[f64; 2]> = (0..base_cells).map(site_center).collect();
    let free = sites - base_cells;
    if trojan_cells > 0 {
        let start = if seed == 0 {
            0
        } else {
            ChaCha8Rng::seed_from_u64(seed).gen_range(0..free)
        };
        positions.extend((0..trojan_cells).map(|k| site_center(base_cells + (start + k) % free)));
    }
    Ok(Placement {
        pblock,
        cell_pitch,
        positions,
    })
}

pub fn place_design(design: &LogicDesign, pblock: Rect, seed: u64) -> Result<Placement> {
    place_design_with_pitch(design, pblock, DEFAULT_CELL_PITCH, seed)
}

pub fn place_design_with_pitch(
    design: &LogicDesign,
    pblock: Rect,
    cell_pitch: f64,
    seed: u64,
) -> Result<Placement> {
    let prims = design.primitives();
    let base = prims.iter().filter(|p| p.is_base()).count();
    place_cells(base, prims.len() - base, pblock, cell_pitch, seed)
}
