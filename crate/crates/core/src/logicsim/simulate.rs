use super::design::{accumulation_tree, LogicDesign, Primitive, PrimitiveKind, Signal};
use super::trojan::{comparator_trigger, counter_next, shiftreg_next, TrojanKind};
use crate::error::{Error, Result};

/// Default simulation window: 2^16 clock cycles.
pub const DEFAULT_WINDOW: u64 = 1 << 16;

/// Per-primitive output transition counts over a window of clock cycles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchingProfile {
    pub primitives: Vec<Primitive>,
    pub toggle_counts: Vec<u64>,
    pub window_cycles: u64,
}

impl SwitchingProfile {
    pub fn toggle_rate(&self, id: usize) -> f64 {
        self.toggle_counts[id] as f64 / self.window_cycles as f64
    }

    pub fn kind(&self, id: usize) -> PrimitiveKind {
        self.primitives[id].kind
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
}

/// Evaluates every LUT output of the design for the current register state.
/// Output order matches the LUT order of [`LogicDesign::primitives`].
struct CombEval {
    tree: Vec<Vec<Signal>>,
    triggers: Vec<bool>,
    nodes: Vec<bool>,
}

impl CombEval {
    fn new(design: &LogicDesign) -> Self {
        let tree = accumulation_tree(design.blocks.len());
        Self {
            triggers: vec![false; design.blocks.len()],
            nodes: vec![false; tree.len()],
            tree,
        }
    }

    fn eval(&mut self, design: &LogicDesign, out: &mut Vec<bool>) {
        out.clear();
        let state = design.base.state();
        for (i, b) in design.blocks.iter().enumerate() {
            let trig = match b.kind {
                TrojanKind::Comparator => {
                    let bits = [
                        state[b.inputs[0]],
                        state[b.inputs[1]],
                        state[b.inputs[2]],
                        state[b.inputs[3]],
                    ];
                    comparator_trigger(bits, b.enable)
                }
                TrojanKind::ShiftRegister => b.internal == 0b1111,
                TrojanKind::Counter => {
                    let next = counter_next(b.internal, state[b.inputs[0]], false, b.enable);
                    out.extend((0..4).map(|k| next >> k & 1 == 1));
                    b.internal == 0b1111
                }
            };
            out.push(trig);
            self.triggers[i] = trig;
        }
        for (n, inputs) in self.tree.iter().enumerate() {
            let v = inputs.iter().any(|s| match *s {
                Signal::Trigger(t) => self.triggers[t],
                Signal::Node(j) => self.nodes[j],
            });
            self.nodes[n] = v;
            out.push(v);
        }
    }
}

/// Steps `design` from its seed state for `window_cycles` clocks (reset held
/// low) and counts output transitions of every primitive.
///
/// LUT outputs are sampled once per clock period, so each primitive sees
/// exactly `window_cycles` opportunities to toggle.
pub fn simulate_activity(design: &LogicDesign, window_cycles: u64) -> Result<SwitchingProfile> {
    if window_cycles == 0 {
        return Err(Error::Parameter("window must be at least one cycle".into()));
    }
    let primitives = design.primitives();
    let mut counts = vec![0u64; primitives.len()];
    let width = design.base.width();

    // register ids of each block, then LUT ids in evaluation order
    let mut reg_offsets = Vec::with_capacity(design.blocks.len());
    let mut lut_ids = Vec::new();
    for (id, p) in primitives.iter().enumerate().skip(width) {
        if p.kind == PrimitiveKind::Lut {
            lut_ids.push(id);
        }
    }
    let mut cursor = width;
    for b in &design.blocks {
        reg_offsets.push(cursor);
        cursor += b.kind.register_count() + b.kind.lut_count();
    }

    let mut sim = design.clone();
    let mut comb = CombEval::new(&sim);
    let mut prev_luts = Vec::with_capacity(lut_ids.len());
    let mut luts = Vec::with_capacity(lut_ids.len());
    comb.eval(&sim, &mut prev_luts);

    for _ in 0..window_cycles {
        // trojans sample the pre-clock base state
        let state = sim.base.state();
        for (b, &off) in sim.blocks.iter_mut().zip(&reg_offsets) {
            let old = b.internal;
            match b.kind {
                TrojanKind::Comparator => {}
                TrojanKind::ShiftRegister => {
                    b.internal = shiftreg_next(old, state[b.inputs[0]], false, b.enable);
                    b.trigger = b.internal == 0b1111;
                }
                TrojanKind::Counter => {
                    b.internal = counter_next(old, state[b.inputs[0]], false, b.enable);
                    b.trigger = b.internal == 0b1111;
                }
            }
            let flipped = old ^ b.internal;
            for k in 0..b.kind.register_count() {
                counts[off + k] += u64::from(flipped >> k & 1);
            }
        }
        sim.base.step_counting(&mut counts[..width]);

        comb.eval(&sim, &mut luts);
        for ((&id, &now), &before) in lut_ids.iter().zip(&luts).zip(&prev_luts) {
            counts[id] += u64::from(now != before);
        }
        std::mem::swap(&mut luts, &mut prev_luts);
    }

    Ok(SwitchingProfile {
        primitives,
        toggle_counts: counts,
        window_cycles,
    })
}
