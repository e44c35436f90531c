//! Text form of a [`LogicDesign`].
//!
//! ```text
//! base.kind = counter              # counter | lfsr
//! base.width = 200
//! base.taps = 166,160              # lfsr only, 0-based; default: shipped table
//! trojan.kind = counter            # none | comparator | shift_register | counter
//! trojan.scale = 8                 # number of blocks
//! trojan.frequency_divider = 1     # power of two
//! trojan.input_offset = 0
//! trojan.inputs = 0;1;2;3          # optional explicit wiring, `;` between blocks
//! trojan.enable = true
//! ```
//!
//! Inside an experiment config the same keys appear under a chip prefix,
//! e.g. `test.trojan.scale`.

use super::base::{BaseCircuit, BaseKind};
use super::design::{LogicDesign, TrojanSpec};
use super::trojan::TrojanKind;
use crate::error::Result;
use crate::kv::{KvDocument, KvWriter};

const KEYS: &[&str] = &[
    "base.kind",
    "base.width",
    "base.taps",
    "trojan.kind",
    "trojan.scale",
    "trojan.frequency_divider",
    "trojan.input_offset",
    "trojan.inputs",
    "trojan.enable",
];

pub const DEFAULT_COUNTER_WIDTH: usize = 200;
pub const DEFAULT_LFSR_WIDTH: usize = 167;

/// Reads a design from keys under `prefix` (empty for a standalone file).
pub fn design_from_kv(doc: &KvDocument, prefix: &str) -> Result<LogicDesign> {
    doc.check_known(prefix, KEYS)?;
    let key = |k: &str| format!("{prefix}{k}");

    let kind_key = key("base.kind");
    let kind = match doc.get(&kind_key) {
        None => BaseKind::Counter,
        Some(e) => match e.value.as_str() {
            "counter" => BaseKind::Counter,
            "lfsr" => BaseKind::Lfsr,
            other => return Err(doc.entry_error(e, format!("unknown base kind `{other}`"))),
        },
    };
    let default_width = match kind {
        BaseKind::Counter => DEFAULT_COUNTER_WIDTH,
        BaseKind::Lfsr => DEFAULT_LFSR_WIDTH,
    };
    let width: usize = doc.parse_or(&key("base.width"), default_width)?;
    let locate = |k: &str, err: crate::error::Error| match doc.get(k) {
        Some(e) => doc.entry_error(e, err),
        None => err,
    };
    let base = match kind {
        BaseKind::Counter => {
            BaseCircuit::counter(width).map_err(|e| locate(&key("base.width"), e))?
        }
        BaseKind::Lfsr => match doc.parse_list::<usize>(&key("base.taps"))? {
            Some(taps) => {
                BaseCircuit::lfsr(width, taps).map_err(|e| locate(&key("base.taps"), e))?
            }
            None => BaseCircuit::lfsr_maximal(width).map_err(|e| locate(&key("base.width"), e))?,
        },
    };

    let tkey = key("trojan.kind");
    let tkind = match doc.get(&tkey) {
        None => None,
        Some(e) if e.value == "none" => None,
        Some(e) => Some(
            TrojanKind::parse(&e.value)
                .ok_or_else(|| doc.entry_error(e, format!("unknown trojan kind `{}`", e.value)))?,
        ),
    };
    let Some(tkind) = tkind else {
        return Ok(LogicDesign::trojan_free(base));
    };
    let mut spec = TrojanSpec::new(tkind, doc.parse_or(&key("trojan.scale"), 1usize)?);
    spec.frequency_divider = doc.parse_or(&key("trojan.frequency_divider"), 1u32)?;
    spec.input_offset = doc.parse_or(&key("trojan.input_offset"), 0usize)?;
    spec.enable = doc.parse_bool_or(&key("trojan.enable"), true)?;
    if let Some(e) = doc.get(&key("trojan.inputs")) {
        let groups = e
            .value
            .split(';')
            .map(|g| {
                g.split(',')
                    .map(|v| v.trim().parse::<usize>().map_err(|err| doc.entry_error(e, err)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        spec.inputs = Some(groups);
    }
    LogicDesign::with_trojan(base, spec).map_err(|e| locate(&tkey, e))
}

pub fn parse_design(text: &str, source: &str) -> Result<LogicDesign> {
    design_from_kv(&KvDocument::parse(text, source)?, "")
}

/// Writes every design key explicitly under `prefix`.
pub fn design_to_kv(design: &LogicDesign, prefix: &str, w: &mut KvWriter) {
    let key = |k: &str| format!("{prefix}{k}");
    w.put(&key("base.kind"), design.base.kind().as_str());
    w.put(&key("base.width"), design.base.width());
    if design.base.kind() == BaseKind::Lfsr {
        w.put_list(&key("base.taps"), design.base.taps());
    }
    match &design.trojan {
        None => {
            w.put(&key("trojan.kind"), "none");
        }
        Some(t) => {
            w.put(&key("trojan.kind"), t.kind.as_str());
            w.put(&key("trojan.scale"), t.scale);
            w.put(&key("trojan.frequency_divider"), t.frequency_divider);
            w.put(&key("trojan.input_offset"), t.input_offset);
            if let Some(groups) = &t.inputs {
                let text = groups
                    .iter()
                    .map(|g| g.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                    .collect::<Vec<_>>()
                    .join(";");
                w.put(&key("trojan.inputs"), text);
            }
            w.put(&key("trojan.enable"), t.enable);
        }
    }
}

pub fn format_design(design: &LogicDesign) -> String {
    let mut w = KvWriter::new();
    design_to_kv(design, "", &mut w);
    w.finish()
}
