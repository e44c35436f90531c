mod common;

use proptest::prelude::*;
use qdm_trojan::logicsim::{
    comparator_trigger, counter_trojan_step, primitive_taps, shiftreg_step, shipped_lfsr_widths, simulate_activity,
    BaseCircuit, LogicDesign, PrimitiveRole, TrojanBlock, TrojanKind, TrojanSpec,
};

use common::{oracle_comparator, oracle_counter, oracle_shiftreg};

fn bits_of(v: u8) -> [bool; 4] {
    [v & 1 == 1, v >> 1 & 1 == 1, v >> 2 & 1 == 1, v >> 3 & 1 == 1]
}

fn kind_of(k: u8) -> TrojanKind {
    match k % 3 {
        0 => TrojanKind::Comparator,
        1 => TrojanKind::ShiftRegister,
        _ => TrojanKind::Counter,
    }
}

fn toggles(design: &LogicDesign, window: u64, role: PrimitiveRole) -> u64 {
    let p = simulate_activity(design, window).unwrap();
    let id = p.primitives.iter().position(|q| q.role == role).unwrap();
    p.toggle_counts[id]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_register_matches_oracle(seq in prop::collection::vec((any::<bool>(), prop::bool::weighted(0.05), prop::bool::weighted(0.9)), 1..200)) {
        let mut block = TrojanBlock::new(TrojanKind::ShiftRegister, vec![0], true).unwrap();
        let mut reg = [false; 4];
        for (input, reset, enable) in seq {
            let (next, trig) = shiftreg_step(&block, input, reset, enable).unwrap();
            let (want, want_trig) = oracle_shiftreg(reg, input, reset, enable);
            prop_assert_eq!(bits_of(next.internal), want);
            prop_assert_eq!(trig, want_trig);
            block = next;
            reg = want;
        }
    }

    #[test]
    fn counter_matches_oracle(seq in prop::collection::vec((any::<bool>(), prop::bool::weighted(0.03), prop::bool::weighted(0.95)), 1..300)) {
        let mut block = TrojanBlock::new(TrojanKind::Counter, vec![0], true).unwrap();
        let mut count = 0u32;
        for (input, reset, enable) in seq {
            let (next, trig) = counter_trojan_step(&block, input, reset, enable).unwrap();
            let (want, want_trig) = oracle_counter(count, input, reset, enable);
            prop_assert_eq!(next.internal as u32, want);
            prop_assert_eq!(trig, want_trig);
            block = next;
            count = want;
        }
    }

    #[test]
    fn counter_base_bit_k_toggles_window_over_2k(width in 2usize..20, window in 1u64..5000) {
        let p = simulate_activity(&LogicDesign::trojan_free(BaseCircuit::counter(width).unwrap()), window).unwrap();
        for (q, &t) in p.primitives.iter().zip(&p.toggle_counts) {
            if let PrimitiveRole::BaseBit(k) = q.role {
                prop_assert_eq!(t, window >> k, "bit {}", k);
            }
        }
    }

    #[test]
    fn trojan_leaves_base_activity_unchanged(kind in 0u8..3, scale in 1usize..6, lfsr in any::<bool>(), window in 64u64..4096) {
        let base = if lfsr { BaseCircuit::lfsr_maximal(24).unwrap() } else { BaseCircuit::counter(24).unwrap() };
        let with = LogicDesign::with_trojan(base.clone(), TrojanSpec::new(kind_of(kind), scale)).unwrap();
        let a = simulate_activity(&LogicDesign::trojan_free(base), window).unwrap();
        let b = simulate_activity(&with, window).unwrap();
        let base_b: Vec<u64> = b.primitives.iter().zip(&b.toggle_counts).filter(|(p, _)| p.is_base()).map(|(_, &t)| t).collect();
        prop_assert_eq!(a.toggle_counts, base_b);
    }

    #[test]
    fn disabled_trojan_is_silent(kind in 0u8..3, scale in 1usize..6, window in 64u64..4096) {
        let d = LogicDesign::with_trojan(
            BaseCircuit::lfsr_maximal(24).unwrap(),
            TrojanSpec::new(kind_of(kind), scale).with_enable(false),
        )
        .unwrap();
        let p = simulate_activity(&d, window).unwrap();
        for (q, &t) in p.primitives.iter().zip(&p.toggle_counts) {
            if !q.is_base() {
                prop_assert_eq!(t, 0);
            }
        }
    }

    #[test]
    fn divider_halves_input_register_rate(d in 0u32..5, block in 0usize..3, k in 9u32..13) {
        let window = 1u64 << k;
        let reg0 = |div: u32| {
            let design = LogicDesign::with_trojan(
                BaseCircuit::counter(24).unwrap(),
                TrojanSpec::new(TrojanKind::ShiftRegister, 3).with_divider(div),
            )
            .unwrap();
            toggles(&design, window, PrimitiveRole::TrojanRegister { block, bit: 0 })
        };
        // the register trails its input by one clock and misses its last edge
        prop_assert_eq!(reg0(1 << d) + 1, 2 * (reg0(2 << d) + 1));
    }
}

#[test]
fn comparator_matches_oracle_exhaustively() {
    for v in 0..16u8 {
        for enable in [false, true] {
            assert_eq!(comparator_trigger(bits_of(v), enable), oracle_comparator(bits_of(v), enable));
        }
    }
}

#[test]
fn shipped_lfsr_taps_are_maximal() {
    for width in shipped_lfsr_widths().filter(|&w| w <= 20) {
        let taps = primitive_taps(width).unwrap();
        // own shift: bits move up, xor of tapped bits enters bit 0
        let mut s: u32 = 1;
        let mut period = 0u64;
        loop {
            let fb = taps.iter().fold(0, |acc, &t| acc ^ (s >> t & 1));
            s = (s << 1 | fb) & ((1u32 << width) - 1);
            period += 1;
            if s == 1 || period > 1 << width {
                break;
            }
        }
        assert_eq!(period, (1u64 << width) - 1, "width {width}");
    }
}

#[test]
fn lfsr_simulation_follows_its_sequence() {
    let width = 8;
    let window = 600;
    let p = simulate_activity(&LogicDesign::trojan_free(BaseCircuit::lfsr_maximal(width).unwrap()), window).unwrap();
    let taps = primitive_taps(width).unwrap();
    let mut s: u32 = 1;
    let mut flips = vec![0u64; width];
    for _ in 0..window {
        let fb = taps.iter().fold(0, |acc, &t| acc ^ (s >> t & 1));
        let n = (s << 1 | fb) & 0xff;
        for (b, f) in flips.iter_mut().enumerate() {
            *f += ((s ^ n) >> b & 1) as u64;
        }
        s = n;
    }
    let got: Vec<u64> = p.primitives.iter().zip(&p.toggle_counts).filter(|(q, _)| q.is_base()).map(|(_, &t)| t).collect();
    assert_eq!(got, flips);
}
