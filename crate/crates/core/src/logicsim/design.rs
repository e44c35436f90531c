use super::base::BaseCircuit;
use super::trojan::{TrojanBlock, TrojanKind};
use crate::error::{Error, Result};

/// How a group of identical trojan blocks is instantiated and wired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrojanSpec {
    pub kind: TrojanKind,
    /// Number of blocks; an "n-bit trojan" has n blocks.
    pub scale: usize,
    /// Power of two. Divider `2^d` shifts every default input up by `d` bits,
    /// which on a counter base divides the input frequency by `2^d`.
    pub frequency_divider: u32,
    /// First base bit used by the default wiring.
    pub input_offset: usize,
    /// Explicit per-block wiring, overriding the default consecutive mapping.
    pub inputs: Option<Vec<Vec<usize>>>,
    pub enable: bool,
}

impl TrojanSpec {
    pub fn new(kind: TrojanKind, scale: usize) -> Self {
        Self {
            kind,
            scale,
            frequency_divider: 1,
            input_offset: 0,
            inputs: None,
            enable: true,
        }
    }

    pub fn with_divider(mut self, divider: u32) -> Self {
        self.frequency_divider = divider;
        self
    }

    pub fn with_enable(mut self, enable: bool) -> Self {
        self.enable = enable;
        self
    }

    /// Base bits wired to each block. Block `i` of width `w` reads bits
    /// `offset + log2(divider) + i*w ..+ w` unless wired explicitly.
    pub fn block_inputs(&self) -> Result<Vec<Vec<usize>>> {
        if let Some(explicit) = &self.inputs {
            if explicit.len() != self.scale {
                return Err(Error::Config(format!(
                    "trojan scale {} but {} explicit input groups",
                    self.scale,
                    explicit.len()
                )));
            }
            return Ok(explicit.clone());
        }
        if !self.frequency_divider.is_power_of_two() {
            return Err(Error::Config(format!(
                "frequency divider {} is not a power of two",
                self.frequency_divider
            )));
        }
        let shift = self.frequency_divider.trailing_zeros() as usize;
        let w = self.kind.input_width();
        Ok((0..self.scale)
            .map(|i| {
                let start = self.input_offset + shift + i * w;
                (start..start + w).collect()
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimitiveKind {
    Register,
    Lut,
}

impl PrimitiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveKind::Register => "register",
            PrimitiveKind::Lut => "lut",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveRole {
    BaseBit(usize),
    TrojanRegister { block: usize, bit: usize },
    TrojanLut { block: usize, index: usize },
    /// Node of the OR tree that accumulates block triggers.
    Accumulate { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub role: PrimitiveRole,
}

impl Primitive {
    pub fn is_base(&self) -> bool {
        matches!(self.role, PrimitiveRole::BaseBit(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Signal {
    Trigger(usize),
    Node(usize),
}

/// Balanced OR tree of 4-input LUTs over `n` trigger signals. A lone leftover
/// signal at a level is carried up without a LUT.
pub(crate) fn accumulation_tree(n: usize) -> Vec<Vec<Signal>> {
    let mut nodes: Vec<Vec<Signal>> = Vec::new();
    let mut level: Vec<Signal> = (0..n).map(Signal::Trigger).collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(4));
        for chunk in level.chunks(4) {
            if chunk.len() == 1 {
                next.push(chunk[0]);
            } else {
                nodes.push(chunk.to_vec());
                next.push(Signal::Node(nodes.len() - 1));
            }
        }
        level = next;
    }
    nodes
}

/// A base circuit plus an optional group of trojan blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicDesign {
    pub base: BaseCircuit,
    pub trojan: Option<TrojanSpec>,
    pub blocks: Vec<TrojanBlock>,
}

impl LogicDesign {
    pub fn trojan_free(base: BaseCircuit) -> Self {
        Self {
            base,
            trojan: None,
            blocks: Vec::new(),
        }
    }

    pub fn with_trojan(base: BaseCircuit, spec: TrojanSpec) -> Result<Self> {
        let wiring = spec.block_inputs()?;
        let mut blocks = Vec::with_capacity(wiring.len());
        for inputs in wiring {
            if let Some(bad) = inputs.iter().find(|&&i| i >= base.width()) {
                return Err(Error::Config(format!(
                    "trojan input bit {bad} outside base width {}",
                    base.width()
                )));
            }
            blocks.push(TrojanBlock::new(spec.kind, inputs, spec.enable)?);
        }
        Ok(Self {
            base,
            trojan: Some(spec).filter(|s| s.scale > 0),
            blocks,
        })
    }

    pub fn is_trojan_free(&self) -> bool {
        self.blocks.is_empty()
    }

    /// True when trojan blocks exist and are enabled.
    pub fn has_active_trojan(&self) -> bool {
        self.blocks.iter().any(|b| b.enable)
    }

    pub fn trojan_scale(&self) -> usize {
        self.blocks.len()
    }

    pub fn frequency_divider(&self) -> u32 {
        self.trojan.as_ref().map_or(1, |t| t.frequency_divider)
    }

    /// Copy of this design with its trojan removed; shares the base exactly.
    pub fn base_only(&self) -> Self {
        Self::trojan_free(self.base.clone())
    }

    /// All primitives in id order: base register bits, then per block its
    /// registers and LUTs, then the accumulation tree.
    pub fn primitives(&self) -> Vec<Primitive> {
        let mut out: Vec<Primitive> = (0..self.base.width())
            .map(|bit| Primitive {
                kind: PrimitiveKind::Register,
                role: PrimitiveRole::BaseBit(bit),
            })
            .collect();
        for (block, b) in self.blocks.iter().enumerate() {
            out.extend((0..b.kind.register_count()).map(|bit| Primitive {
                kind: PrimitiveKind::Register,
                role: PrimitiveRole::TrojanRegister { block, bit },
            }));
            out.extend((0..b.kind.lut_count()).map(|index| Primitive {
                kind: PrimitiveKind::Lut,
                role: PrimitiveRole::TrojanLut { block, index },
            }));
        }
        let tree = accumulation_tree(self.blocks.len());
        out.extend((0..tree.len()).map(|node| Primitive {
            kind: PrimitiveKind::Lut,
            role: PrimitiveRole::Accumulate { node },
        }));
        out
    }
}
