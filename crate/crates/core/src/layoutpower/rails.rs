use std::collections::BTreeMap;

use super::currents::CellCurrentMap;
use super::placement::{Placement, Rect};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadSide {
    Left,
    Right,
}

impl PadSide {
    pub fn as_str(self) -> &'static str {
        match self {
            PadSide::Left => "left",
            PadSide::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(PadSide::Left),
            "right" => Some(PadSide::Right),
            _ => None,
        }
    }
}

/// Parallel horizontal top-metal rails at a fixed pitch, fed from pads on one
/// edge of the pblock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGridSpec {
    pub rail_pitch: f64,
    pub pad_side: PadSide,
    /// Height of the rail plane above the cell plane, micrometers.
    pub rail_height: f64,
}

impl Default for PowerGridSpec {
    fn default() -> Self {
        Self {
            rail_pitch: 60.0,
            pad_side: PadSide::Left,
            rail_height: 5.0,
        }
    }
}

impl PowerGridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rail_pitch > 0.0 && self.rail_pitch.is_finite()) {
            return Err(Error::Config(format!("rail pitch must be positive, got {}", self.rail_pitch)));
        }
        if !self.rail_height.is_finite() {
            return Err(Error::Config("rail height must be finite".into()));
        }
        Ok(())
    }

    /// Rail centerlines covering `pblock`: `y0 + (k + 1/2) * pitch`.
    pub fn rail_y_positions(&self, pblock: Rect) -> Vec<f64> {
        let n = (pblock.height() / self.rail_pitch).ceil().max(1.0) as usize;
        (0..n)
            .map(|k| pblock.y0 + (k as f64 + 0.5) * self.rail_pitch)
            .collect()
    }

    /// Index of the rail serving a cell at height `y`.
    pub fn rail_index(&self, pblock: Rect, y: f64) -> usize {
        let n = self.rail_y_positions(pblock).len();
        let k = ((y - pblock.y0) / self.rail_pitch).floor();
        (k.max(0.0) as usize).min(n - 1)
    }

    pub fn pad_x(&self, pblock: Rect) -> f64 {
        match self.pad_side {
            PadSide::Left => pblock.x0,
            PadSide::Right => pblock.x1,
        }
    }
}

/// Straight current filament. Positive current flows from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireSegment<T = f64> {
    pub start: [T; 3],
    pub end: [T; 3],
    pub current: T,
}

impl<T: Real> WireSegment<T> {
    pub fn new(start: [T; 3], end: [T; 3], current: T) -> Self {
        Self {
            start,
            end,
            current,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            current: -self.current,
            ..*self
        }
    }

    pub fn length(&self) -> T {
        (0..3)
            .map(|k| (self.end[k] - self.start[k]).powi(2))
            .sum::<T>()
            .sqrt()
    }

    pub fn cast<U: Real>(&self) -> WireSegment<U> {
        let c = |v: [T; 3]| v.map(|x| U::lit(x.to_f64_lossy()));
        WireSegment {
            start: c(self.start),
            end: c(self.end),
            current: U::lit(self.current.to_f64_lossy()),
        }
    }
}

/// Injects every cell's current into the nearest rail at the cell's x and
/// returns the loaded rail segments. Each segment carries the total current
/// injected beyond it as seen from the pad. Return currents are not modeled.
pub fn solve_rail_currents(
    cells: &CellCurrentMap,
    placement: &Placement,
    grid: &PowerGridSpec,
) -> Result<Vec<WireSegment>> {
    grid.validate()?;
    if cells.currents.len() != placement.positions.len() {
        return Err(Error::Shape(format!(
            "{} cell currents for {} placed cells",
            cells.currents.len(),
            placement.positions.len()
        )));
    }
    let pblock = placement.pblock;
    let rails = grid.rail_y_positions(pblock);
    // rail -> x (as ordered bits) -> injected current
    let mut injections: Vec<BTreeMap<u64, f64>> = vec![BTreeMap::new(); rails.len()];
    for (&i, p) in cells.currents.iter().zip(&placement.positions) {
        if i == 0.0 {
            continue;
        }
        let r = grid.rail_index(pblock, p[1]);
        *injections[r].entry(ordered_key(p[0])).or_insert(0.0) += i;
    }

    let pad = grid.pad_x(pblock);
    let z = grid.rail_height;
    let mut out = Vec::new();
    for (y, inj) in rails.iter().zip(&injections) {
        let mut points: Vec<(f64, f64)> = inj.iter().map(|(&k, &c)| (from_key(k), c)).collect();
        if grid.pad_side == PadSide::Right {
            points.reverse();
        }
        let mut remaining: f64 = points.iter().map(|p| p.1).sum();
        let mut from = pad;
        for (x, c) in points {
            if x != from {
                out.push(WireSegment::new([from, *y, z], [x, *y, z], remaining));
            }
            remaining -= c;
            from = x;
        }
    }
    Ok(out)
}

// Maps finite floats to u64 keys with the same ordering.
fn ordered_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

fn from_key(k: u64) -> f64 {
    if k >> 63 == 1 {
        f64::from_bits(k & !(1 << 63))
    } else {
        f64::from_bits(!k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layoutpower::CurrentWeights;

    fn placement(positions: Vec<[f64; 2]>) -> Placement {
        Placement {
            pblock: Rect::new(0.0, 0.0, 600.0, 240.0),
            cell_pitch: 10.0,
            positions,
        }
    }

    fn cells(currents: Vec<f64>) -> CellCurrentMap {
        CellCurrentMap {
            currents,
            weights: CurrentWeights::default(),
        }
    }

    #[test]
    fn ordered_key_roundtrip() {
        for x in [-3.5, -0.0, 0.0, 1e-9, 42.0] {
            assert_eq!(from_key(ordered_key(x)), x);
        }
        assert!(ordered_key(-1.0) < ordered_key(0.5));
    }

    #[test]
    fn single_cell() {
        let segs = solve_rail_currents(
            &cells(vec![3.0]),
            &placement(vec![[105.0, 15.0]]),
            &PowerGridSpec::default(),
        )
        .unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].start, [0.0, 30.0, 5.0]);
        assert_eq!(segs[0].end, [105.0, 30.0, 5.0]);
        assert_eq!(segs[0].current, 3.0);
    }

    #[test]
    fn two_cells_accumulate_from_pad() {
        let p = placement(vec![[205.0, 15.0], [55.0, 25.0]]);
        let segs = solve_rail_currents(&cells(vec![2.0, 1.5]), &p, &PowerGridSpec::default()).unwrap();
        // brute force: segment [a,b] carries every injection at x >= b
        let inj = [(55.0, 1.5), (205.0, 2.0)];
        assert_eq!(segs.len(), 2);
        for s in &segs {
            let expect: f64 = inj.iter().filter(|(x, _)| *x >= s.end[0]).map(|p| p.1).sum();
            assert_eq!(s.current, expect);
        }
        assert_eq!(segs[0].current, 3.5);
        assert_eq!(segs[1].current, 2.0);
    }

    #[test]
    fn right_pad_mirrors() {
        let grid = PowerGridSpec {
            pad_side: PadSide::Right,
            ..Default::default()
        };
        let p = placement(vec![[205.0, 15.0], [55.0, 25.0]]);
        let segs = solve_rail_currents(&cells(vec![2.0, 1.5]), &p, &grid).unwrap();
        assert_eq!(segs[0].start[0], 600.0);
        assert_eq!(segs[0].end[0], 205.0);
        assert_eq!(segs[0].current, 3.5);
        assert_eq!(segs[1].current, 1.5);
    }

    #[test]
    fn no_cells_no_segments() {
        let segs = solve_rail_currents(&cells(vec![0.0, 0.0]), &placement(vec![[5.0, 5.0], [15.0, 5.0]]), &PowerGridSpec::default()).unwrap();
        assert!(segs.is_empty());
    }

    #[test]
    fn rails_cover_pblock() {
        let g = PowerGridSpec::default();
        let r = g.rail_y_positions(Rect::new(0.0, 100.0, 10.0, 250.0));
        assert_eq!(r, vec![130.0, 190.0, 250.0]);
        assert_eq!(g.rail_index(Rect::new(0.0, 100.0, 10.0, 250.0), 249.0), 2);
    }
}
