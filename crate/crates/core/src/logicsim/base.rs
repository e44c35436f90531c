//! Trojan-free base circuits: a binary up-counter and a Fibonacci LFSR.

use crate::error::{Error, Result};

/// Published maximal-length tap sets, 1-based as tabulated (XNOR/XOR form).
/// Converted to 0-based indices by [`primitive_taps`].
const MAXIMAL_TAPS: &[(usize, &[usize])] = &[
    (3, &[3, 2]),
    (4, &[4, 3]),
    (5, &[5, 3]),
    (6, &[6, 5]),
    (7, &[7, 6]),
    (8, &[8, 6, 5, 4]),
    (9, &[9, 5]),
    (10, &[10, 7]),
    (11, &[11, 9]),
    (12, &[12, 6, 4, 1]),
    (13, &[13, 4, 3, 1]),
    (14, &[14, 5, 3, 1]),
    (15, &[15, 14]),
    (16, &[16, 15, 13, 4]),
    (17, &[17, 14]),
    (18, &[18, 11]),
    (19, &[19, 6, 2, 1]),
    (20, &[20, 17]),
    (21, &[21, 19]),
    (22, &[22, 21]),
    (23, &[23, 18]),
    (24, &[24, 23, 22, 17]),
    (32, &[32, 22, 2, 1]),
    (64, &[64, 63, 61, 60]),
    (128, &[128, 126, 101, 99]),
    (167, &[167, 161]),
];

/// Widths for which a maximal-length tap set ships with the crate.
pub fn shipped_lfsr_widths() -> impl Iterator<Item = usize> {
    MAXIMAL_TAPS.iter().map(|(w, _)| *w)
}

/// 0-based tap indices of a maximal-length LFSR of `width` bits, if shipped.
pub fn primitive_taps(width: usize) -> Option<Vec<usize>> {
    MAXIMAL_TAPS
        .iter()
        .find(|(w, _)| *w == width)
        .map(|(_, taps)| taps.iter().map(|t| t - 1).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseKind {
    Counter,
    Lfsr,
}

impl BaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Counter => "counter",
            BaseKind::Lfsr => "lfsr",
        }
    }
}

/// Binary increment modulo `2^len`. Bit 0 is the least significant.
pub fn counter_step(state: &[bool]) -> Vec<bool> {
    let mut next = state.to_vec();
    increment_in_place(&mut next);
    next
}

/// Increments in place and returns the number of bits that flipped.
fn increment_in_place(bits: &mut [bool]) -> usize {
    for (i, b) in bits.iter_mut().enumerate() {
        if *b {
            *b = false;
        } else {
            *b = true;
            return i + 1;
        }
    }
    bits.len()
}

/// One Fibonacci LFSR shift: bits move toward higher indices and the XOR of
/// the tapped (pre-shift) bits enters bit 0.
pub fn lfsr_step(state: &[bool], taps: &[usize]) -> Result<Vec<bool>> {
    validate_taps(state.len(), taps)?;
    let mut next = vec![false; state.len()];
    lfsr_shift_into(state, taps, &mut next);
    Ok(next)
}

fn lfsr_shift_into(state: &[bool], taps: &[usize], next: &mut [bool]) {
    let feedback = taps.iter().fold(false, |acc, &t| acc ^ state[t]);
    next[1..].copy_from_slice(&state[..state.len() - 1]);
    next[0] = feedback;
}

fn validate_taps(width: usize, taps: &[usize]) -> Result<()> {
    if taps.is_empty() {
        return Err(Error::Config("LFSR needs at least one tap".into()));
    }
    if let Some(bad) = taps.iter().find(|&&t| t >= width) {
        return Err(Error::Config(format!(
            "LFSR tap index {bad} out of range for width {width}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseCircuit {
    kind: BaseKind,
    taps: Vec<usize>,
    state: Vec<bool>,
    scratch: Vec<bool>,
}

impl BaseCircuit {
    /// Counter seeded at zero.
    pub fn counter(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::Config("base width must be at least 1".into()));
        }
        Ok(Self {
            kind: BaseKind::Counter,
            taps: Vec::new(),
            state: vec![false; width],
            scratch: vec![false; width],
        })
    }

    /// LFSR seeded at `0...01`.
    pub fn lfsr(width: usize, taps: Vec<usize>) -> Result<Self> {
        if width == 0 {
            return Err(Error::Config("base width must be at least 1".into()));
        }
        validate_taps(width, &taps)?;
        let mut state = vec![false; width];
        state[0] = true;
        Ok(Self {
            kind: BaseKind::Lfsr,
            taps,
            state,
            scratch: vec![false; width],
        })
    }

    /// LFSR with the shipped maximal-length taps for `width`.
    pub fn lfsr_maximal(width: usize) -> Result<Self> {
        let taps = primitive_taps(width).ok_or_else(|| {
            Error::Config(format!("no shipped maximal-length taps for width {width}"))
        })?;
        Self::lfsr(width, taps)
    }

    pub fn with_state(mut self, state: Vec<bool>) -> Result<Self> {
        if state.len() != self.state.len() {
            return Err(Error::Config(format!(
                "seed has {} bits, circuit has {}",
                state.len(),
                self.state.len()
            )));
        }
        self.state = state;
        Ok(self)
    }

    pub fn kind(&self) -> BaseKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.state.len()
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    pub fn state(&self) -> &[bool] {
        &self.state
    }

    /// Advances one clock, adding each bit's transition to `toggles`.
    pub(crate) fn step_counting(&mut self, toggles: &mut [u64]) {
        match self.kind {
            BaseKind::Counter => {
                let flipped = increment_in_place(&mut self.state);
                for t in &mut toggles[..flipped] {
                    *t += 1;
                }
            }
            BaseKind::Lfsr => {
                lfsr_shift_into(&self.state, &self.taps, &mut self.scratch);
                for ((t, &old), &new) in toggles.iter_mut().zip(&self.state).zip(&self.scratch) {
                    *t += u64::from(old != new);
                }
                std::mem::swap(&mut self.state, &mut self.scratch);
            }
        }
    }

    pub fn step(&mut self) {
        match self.kind {
            BaseKind::Counter => {
                increment_in_place(&mut self.state);
            }
            BaseKind::Lfsr => {
                lfsr_shift_into(&self.state, &self.taps, &mut self.scratch);
                std::mem::swap(&mut self.state, &mut self.scratch);
            }
        }
    }
}

#[cfg(test)]
pub(crate) fn bits_msb(s: &str) -> Vec<bool> {
    s.chars().rev().map(|c| c == '1').collect()
}
