//! End-to-end link checks: demapper against theory, erasure semantics, and
//! the PER estimator's contracts.

use std::ops::Range;

use coexsim_core::channel::add_noise;
use coexsim_core::codec::SoftBit;
use coexsim_core::engine::{
    decode_soft_bits, estimate_per, estimate_per_with, receive, LinkSimulator, PerPoint, SimPoint,
    StopRule, TrialExecutor,
};
use coexsim_core::erasure::ErasureMask;
use coexsim_core::ofdm::{
    self, assemble_packet, demap_soft, demap_soft_with, map_symbols, ErasureStyle, ModeParams,
    DATA_SUBCARRIERS,
};
use coexsim_core::stats::{q_function, wilson_interval, Z95};
use coexsim_core::Complex64;
use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

const UNIT: [Complex64; 64] = [Complex64::new(1.0, 0.0); 64];

fn mode(rate: u32) -> ModeParams {
    ModeParams::from_rate(rate).unwrap()
}

#[test]
fn uncoded_qpsk_matches_theory() {
    let m = mode(12);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n_sym = 3000;
    for ebn0_db in [0.0, 4.0, 8.0] {
        // Es = 1 and two bits per symbol, so N0 = 1 / (2 Eb/N0).
        let n0 = 1.0 / (2.0 * 10f64.powf(ebn0_db / 10.0));
        let bits: Vec<u8> = (0..n_sym * m.n_cbps).map(|_| rng.random_range(0..2)).collect();
        let mut grid = map_symbols(&bits, &m).unwrap();
        add_noise(&mut grid, n0, &mut rng);
        let soft = demap_soft(&grid, &UNIT, n0, &ErasureMask::empty(n_sym), &m).unwrap();
        let errors = soft.iter().zip(&bits).filter(|(s, &b)| s.hard() != b).count() as u64;
        let (lo, hi) = wilson_interval(errors, bits.len() as u64, Z95);
        let theory = q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt());
        assert!(lo <= theory && theory <= hi, "{ebn0_db} dB: [{lo}, {hi}] vs {theory}");
    }
}

#[test]
fn zero_symbol_and_flag_erasures_decode_alike() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for m in ModeParams::ALL {
        for _ in 0..20 {
            let pkt = assemble_packet(40, &m, &mut rng).unwrap();
            let n_sym = pkt.n_symbols();
            let mut grid = pkt.grid.clone();
            let n0 = 0.3 * rng.random::<f64>() + 0.01;
            add_noise(&mut grid, n0, &mut rng);
            let mut mask = ErasureMask::empty(n_sym);
            for s in 0..n_sym {
                for _ in 0..rng.random_range(0..10) {
                    mask.set(s, DATA_SUBCARRIERS[rng.random_range(0..48)]);
                }
            }
            let il = m.interleaver();
            let flagged = demap_soft(&grid, &UNIT, n0, &mask, &m).unwrap();
            let zeroed = demap_soft_with(&grid, &UNIT, n0, &mask, &m, ErasureStyle::ZeroSymbol).unwrap();
            assert_eq!(
                decode_soft_bits(&flagged, &m, &il).unwrap(),
                decode_soft_bits(&zeroed, &m, &il).unwrap()
            );
        }
    }
}

#[test]
fn fully_erased_symbol_decodes_to_zeros() {
    let m = mode(12);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let pkt = assemble_packet(1, &m, &mut rng).unwrap();
    assert_eq!(pkt.n_symbols(), 1);
    let mut mask = ErasureMask::empty(1);
    for k in DATA_SUBCARRIERS {
        mask.set(0, k);
    }
    let soft = demap_soft(&pkt.grid, &UNIT, 1.0, &mask, &m).unwrap();
    assert!(soft.iter().all(|s| *s == SoftBit::ERASED));
    let decoded = receive(&pkt.grid, &UNIT, 1.0, &mask, &m).unwrap();
    assert!(decoded.iter().all(|&b| b == 0));
}

#[test]
fn noiseless_packets_survive_the_whole_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for m in ModeParams::ALL {
        for payload in [1, 7, 100, 1500] {
            let pkt = assemble_packet(payload, &m, &mut rng).unwrap();
            let n_sym = pkt.n_symbols();
            let decoded = receive(&pkt.grid, &UNIT, 1e-3, &ErasureMask::empty(n_sym), &m).unwrap();
            let r = pkt.payload_range();
            assert_eq!(decoded[r.clone()], pkt.info_bits[r], "{} Mb/s, {payload} B", m.rate_mbps);
        }
    }
}

#[test]
fn estimates_agree_across_master_seeds() {
    let stop = StopRule { min_errors: 100, max_trials: 20_000 };
    let mut p = SimPoint::new(mode(24), 20.0, 0);
    let a = estimate_per(&p, &stop).unwrap();
    p.seed = 0xdead_beef;
    let b = estimate_per(&p, &stop).unwrap();
    assert!(a.ci95.0 <= b.ci95.1 && b.ci95.0 <= a.ci95.1, "{:?} vs {:?}", a.ci95, b.ci95);
    assert_eq!(a.packet_errors, 100);
}

#[test]
fn erasures_do_no_harm_under_strong_interference() {
    // Same seed, so E0 and E5 see identical packets, fades and bursts.
    let stop = StopRule { min_errors: 60, max_trials: 3000 };
    for rate in [12, 54] {
        let e0 = estimate_per(&SimPoint::new(mode(rate), 25.0, 0), &stop).unwrap();
        let e5 = estimate_per(&SimPoint::new(mode(rate), 25.0, 5), &stop).unwrap();
        assert!(e5.per <= e0.per, "{rate} Mb/s: E5 {} > E0 {}", e5.per, e0.per);
        assert!(e5.ci95.1 < e0.ci95.0, "{rate} Mb/s: {:?} vs {:?}", e5.ci95, e0.ci95);
    }
}

#[test]
fn collided_flag_tracks_interference() {
    let p = SimPoint::new(mode(36), 60.0, 0);
    let sim = LinkSimulator::new(p).unwrap();
    let mut clean_hits = 0;
    for t in 0..400 {
        let o = sim.run_trial(t).unwrap();
        if !o.collided && o.packet_error {
            clean_hits += 1;
        }
    }
    // Without a collision the packet only sees deep fades at 60 dB.
    assert!(clean_hits <= 2, "{clean_hits}");
}

/// Runs each batch in reverse and in small pieces, like an out-of-order pool.
struct Shuffled;

impl TrialExecutor for Shuffled {
    fn run_trials(&self, sim: &LinkSimulator, trials: Range<u64>) -> coexsim_core::Result<Vec<bool>> {
        let mut out = vec![false; (trials.end - trials.start) as usize];
        for t in trials.clone().rev() {
            out[(t - trials.start) as usize] = sim.run_packet(t)?;
        }
        Ok(out)
    }
}

#[test]
fn estimate_is_independent_of_execution_order() {
    let stop = StopRule { min_errors: 30, max_trials: 5000 };
    let p = SimPoint::new(mode(48), 25.0, 0);
    assert_eq!(estimate_per(&p, &stop).unwrap(), estimate_per_with(&p, &stop, &Shuffled).unwrap());
}

#[test]
fn time_overlap_oracle_matches_slot_arithmetic() {
    let cfg = coexsim_core::bluetooth::BtConfig::default();
    let m = mode(12);
    let d = m.n_symbols(100) as f64 * ofdm::SYMBOL_US;
    assert_eq!(d, 72.0);
    let t = coexsim_core::engine::time_overlap_probability(d, &cfg);
    assert!((t - 438.0 / 625.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trials_are_pure(seed in any::<u64>(), trial in any::<u64>(), rate_ix in 0usize..5, e in 0usize..10) {
        let mut p = SimPoint::new(ModeParams::ALL[rate_ix], 15.0, e);
        p.seed = seed;
        p.payload_bytes = 30;
        let a = LinkSimulator::new(p).unwrap().run_trial(trial).unwrap();
        let b = LinkSimulator::new(p).unwrap().run_trial(trial).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn per_lies_inside_its_interval(errors in 0u64..500, extra in 0u64..5000) {
        let trials = errors + extra;
        let pp = PerPoint::from_counts(SimPoint::new(mode(12), 10.0, 0), errors, trials);
        prop_assert!(pp.packet_errors <= pp.trials);
        prop_assert!((0.0..=1.0).contains(&pp.per));
        prop_assert!(pp.ci95.0 <= pp.per && pp.per <= pp.ci95.1);
    }
}
