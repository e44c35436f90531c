//! Scalable trojan trigger building blocks.
//!
//! Every block samples base-circuit state bits and never drives them. The
//! clocked blocks hold a 4-bit register; reset or a low enable clears it on
//! the next clock and takes priority over the shift/increment.

use crate::error::{Error, Result};

const FULL: u8 = 0b1111;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrojanKind {
    Comparator,
    ShiftRegister,
    Counter,
}

impl TrojanKind {
    /// Base-circuit bits sampled by one block.
    pub fn input_width(self) -> usize {
        match self {
            TrojanKind::Comparator => 4,
            TrojanKind::ShiftRegister | TrojanKind::Counter => 1,
        }
    }

    pub fn register_count(self) -> usize {
        match self {
            TrojanKind::Comparator => 0,
            TrojanKind::ShiftRegister | TrojanKind::Counter => 4,
        }
    }

    /// LUT primitives inside one block (excluding the accumulation tree).
    /// The counter has one next-state LUT per count bit plus the trigger LUT.
    pub fn lut_count(self) -> usize {
        match self {
            TrojanKind::Comparator | TrojanKind::ShiftRegister => 1,
            TrojanKind::Counter => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrojanKind::Comparator => "comparator",
            TrojanKind::ShiftRegister => "shift_register",
            TrojanKind::Counter => "counter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "comparator" => Some(TrojanKind::Comparator),
            "shift_register" | "shiftreg" => Some(TrojanKind::ShiftRegister),
            "counter" => Some(TrojanKind::Counter),
            _ => None,
        }
    }
}

/// One trojan building block: its wiring, 4-bit internal register (always 0
/// for the comparator), enable, and last trigger output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrojanBlock {
    pub kind: TrojanKind,
    pub inputs: Vec<usize>,
    pub internal: u8,
    pub enable: bool,
    pub trigger: bool,
}

impl TrojanBlock {
    pub fn new(kind: TrojanKind, inputs: Vec<usize>, enable: bool) -> Result<Self> {
        if inputs.len() != kind.input_width() {
            return Err(Error::Config(format!(
                "{} block takes {} input bits, got {}",
                kind.as_str(),
                kind.input_width(),
                inputs.len()
            )));
        }
        Ok(Self {
            kind,
            inputs,
            internal: 0,
            enable,
            trigger: false,
        })
    }

    /// Bit `i` of the internal register.
    pub fn bit(&self, i: usize) -> bool {
        self.internal >> i & 1 == 1
    }
}

/// Combinational comparator: fires when enabled and all four inputs are 1.
pub fn comparator_trigger(inputs: [bool; 4], enable: bool) -> bool {
    enable && inputs.iter().all(|&b| b)
}

pub(crate) fn shiftreg_next(reg: u8, input: bool, reset: bool, enable: bool) -> u8 {
    if reset || !enable {
        0
    } else {
        (reg << 1 | u8::from(input)) & FULL
    }
}

pub(crate) fn counter_next(count: u8, input: bool, reset: bool, enable: bool) -> u8 {
    if reset || !enable {
        0
    } else {
        count.wrapping_add(u8::from(input)) & FULL
    }
}

fn expect_kind(block: &TrojanBlock, kind: TrojanKind) -> Result<()> {
    if block.kind != kind {
        return Err(Error::Usage(format!(
            "expected a {} block, got {}",
            kind.as_str(),
            block.kind.as_str()
        )));
    }
    Ok(())
}

/// Clocks a shift-register block once. The trigger reflects the post-clock
/// register.
pub fn shiftreg_step(
    block: &TrojanBlock,
    input: bool,
    reset: bool,
    enable: bool,
) -> Result<(TrojanBlock, bool)> {
    expect_kind(block, TrojanKind::ShiftRegister)?;
    let internal = shiftreg_next(block.internal, input, reset, enable);
    let trigger = internal == FULL;
    Ok((
        TrojanBlock {
            internal,
            enable,
            trigger,
            ..block.clone()
        },
        trigger,
    ))
}

/// Clocks a counter block once. The 4-bit count wraps from `1111` to `0000`.
pub fn counter_trojan_step(
    block: &TrojanBlock,
    input: bool,
    reset: bool,
    enable: bool,
) -> Result<(TrojanBlock, bool)> {
    expect_kind(block, TrojanKind::Counter)?;
    let internal = counter_next(block.internal, input, reset, enable);
    let trigger = internal == FULL;
    Ok((
        TrojanBlock {
            internal,
            enable,
            trigger,
            ..block.clone()
        },
        trigger,
    ))
}
