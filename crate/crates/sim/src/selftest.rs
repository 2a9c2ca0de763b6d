//! Fast invariant checks behind the `selftest` subcommand.
//!
//! The codec oracle re-derives the code from its tap vectors, enumerates
//! every message of a short length and keeps the best-correlating codeword.
//! The decoder under test must land on that codeword through the real
//! depuncture and Viterbi path.

use coexsim_core::bluetooth::{draw_episode, BtConfig};
use coexsim_core::channel::add_noise;
use coexsim_core::codec::{depuncture, CodeRate, ConvCode, SoftBit};
use coexsim_core::engine::analytic_collision_probability;
use coexsim_core::erasure::ErasureMask;
use coexsim_core::ofdm::{demap_soft, map_symbols, ModeParams, SYMBOL_US};
use coexsim_core::stats::{q_function, wilson_interval, Z95};
use coexsim_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator taps, index 0 on the newest input bit.
const TAPS: [[u8; 7]; 2] = [[1, 0, 1, 1, 0, 1, 1], [1, 1, 1, 1, 0, 0, 1]];
const MEMORY: usize = 6;

pub const CODEC_ORACLE: &str = "codec oracle";
pub const INTERLEAVER: &str = "interleaver bijectivity";
pub const COLLISION: &str = "collision probability";
pub const UNCODED_BER: &str = "uncoded BER";

/// Kept positions of the serialized (A, B) output pairs.
fn reference_mask(rate: CodeRate) -> &'static [u8] {
    match rate {
        CodeRate::Half => &[1, 1],
        CodeRate::TwoThirds => &[1, 1, 1, 0],
        CodeRate::ThreeQuarters => &[1, 1, 1, 0, 0, 1],
    }
}

/// Terminated, punctured codeword for `message`.
pub fn reference_codeword(message: &[u8], rate: CodeRate) -> Vec<u8> {
    let mut history = [0u8; 7];
    let mut out = Vec::new();
    let input = message.iter().copied().chain([0; MEMORY]);
    for bit in input {
        history.rotate_right(1);
        history[0] = bit;
        for taps in TAPS {
            out.push(taps.iter().zip(&history).map(|(t, h)| t & h).sum::<u8>() % 2);
        }
    }
    let mask = reference_mask(rate);
    out.iter()
        .zip(mask.iter().cycle())
        .filter(|(_, &keep)| keep == 1)
        .map(|(&c, _)| c)
        .collect()
}

/// Message lengths up to `max_len` whose coded length fills whole
/// puncture periods.
pub fn oracle_lengths(rate: CodeRate, max_len: usize) -> Vec<usize> {
    let period = reference_mask(rate).len();
    (1..=max_len).filter(|l| (2 * (l + MEMORY)).is_multiple_of(period)).collect()
}

fn correlation(codeword: &[u8], soft: &[f64]) -> f64 {
    codeword
        .iter()
        .zip(soft)
        .map(|(&c, &v)| if c == 0 { v } else { -v })
        .sum()
}

/// Maximum-likelihood message by enumeration, with the best and runner-up
/// correlations.
pub fn brute_force_ml(len: usize, soft: &[f64], rate: CodeRate) -> (Vec<u8>, f64, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY, f64::NEG_INFINITY);
    for m in 0u32..1 << len {
        let message: Vec<u8> = (0..len).map(|i| ((m >> i) & 1) as u8).collect();
        let score = correlation(&reference_codeword(&message, rate), soft);
        if score > best.1 {
            best = (message, score, best.1);
        } else if score > best.2 {
            best.2 = score;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rate: CodeRate,
    pub cases: usize,
    /// Cases whose ML message is unique but the decoder returned another.
    pub mismatches: usize,
    /// Cases skipped because two messages tie on the received values.
    pub ties: usize,
}

/// Compares `code` against enumeration on `cases` random inputs. Even cases
/// are noisy codewords of a random message, odd cases pure Gaussian noise.
pub fn codec_oracle(code: &ConvCode, rate: CodeRate, max_len: usize, cases: usize, seed: u64) -> OracleReport {
    let lengths = oracle_lengths(rate, max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport { rate, cases, mismatches: 0, ties: 0 };
    for case in 0..cases {
        let len = lengths[case % lengths.len()];
        let message: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
        let clean = reference_codeword(&message, rate);
        let sigma = rng.random_range(0.3..1.5);
        let soft: Vec<f64> = clean
            .iter()
            .map(|&c| {
                let noise = sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                if case % 2 == 0 {
                    1.0 - 2.0 * c as f64 + noise
                } else {
                    noise
                }
            })
            .collect();

        let (ml, best, runner_up) = brute_force_ml(len, &soft, rate);
        if best - runner_up < 1e-9 {
            report.ties += 1;
            continue;
        }
        let received: Vec<SoftBit> = soft.iter().map(|&v| SoftBit::new(v)).collect();
        let decoded = depuncture(&received, rate).and_then(|d| code.decode(&d));
        match decoded {
            Ok(bits) if bits[..] == ml[..] => {}
            _ => report.mismatches += 1,
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

pub fn check_codec(code: &ConvCode, cases: usize) -> Check {
    let mut detail = Vec::new();
    let mut passed = true;
    for (i, rate) in [CodeRate::Half, CodeRate::TwoThirds, CodeRate::ThreeQuarters].into_iter().enumerate() {
        let r = codec_oracle(code, rate, 10, cases, 0x5e1f + i as u64);
        let (k, n) = rate.ratio();
        passed &= r.mismatches == 0 && r.ties < cases / 100 + 1;
        detail.push(format!("rate {k}/{n}: {} mismatches in {} cases", r.mismatches, r.cases));
    }
    check(CODEC_ORACLE, passed, detail.join("; "))
}

pub fn check_interleaver() -> Check {
    for m in ModeParams::ALL {
        let il = m.interleaver();
        let mut seen = vec![false; il.len()];
        for k in 0..il.len() {
            let j = il.position(k);
            if j >= il.len() || std::mem::replace(&mut seen[j], true) {
                return check(INTERLEAVER, false, format!("{} Mb/s: position {k} collides", m.rate_mbps));
            }
        }
        let block: Vec<u16> = (0..il.len() as u16).collect();
        let round_trip = il.interleave(&block).and_then(|x| il.deinterleave(&x));
        if round_trip.as_deref() != Ok(&block[..]) {
            return check(INTERLEAVER, false, format!("{} Mb/s: round trip differs", m.rate_mbps));
        }
    }
    check(INTERLEAVER, true, "all five rates are permutations".into())
}

pub fn check_collisions(trials: usize) -> Check {
    let cfg = BtConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc011);
    let mut detail = Vec::new();
    let mut passed = true;
    for n_sym in [4usize, 18] {
        let duration = n_sym as f64 * SYMBOL_US;
        let mut hits = 0usize;
        for _ in 0..trials {
            match draw_episode(duration, n_sym, &cfg, &mut rng) {
                Ok(ep) => hits += usize::from(ep.collided()),
                Err(e) => return check(COLLISION, false, e.to_string()),
            }
        }
        let empirical = hits as f64 / trials as f64;
        let analytic = analytic_collision_probability(duration, &cfg).unwrap_or(f64::NAN);
        passed &= (empirical - analytic).abs() < 0.01;
        detail.push(format!("{duration} us: {empirical:.4} vs {analytic:.4}"));
    }
    check(COLLISION, passed, detail.join("; "))
}

/// QPSK over AWGN at `ebn0_db` with unit channel; returns (errors, bits).
pub fn qpsk_bit_errors(ebn0_db: f64, n_sym: usize, seed: u64) -> coexsim_core::Result<(u64, u64)> {
    let m = ModeParams::from_rate(12)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Es = 1 carries two bits, so N0 = 1 / (2 Eb/N0).
    let n0 = 1.0 / (2.0 * 10f64.powf(ebn0_db / 10.0));
    let bits: Vec<u8> = (0..n_sym * m.n_cbps).map(|_| rng.random_range(0..2)).collect();
    let mut grid = map_symbols(&bits, &m)?;
    add_noise(&mut grid, n0, &mut rng);
    let unit = [Complex64::new(1.0, 0.0); 64];
    let soft = demap_soft(&grid, &unit, n0, &ErasureMask::empty(n_sym), &m)?;
    let errors = soft.iter().zip(&bits).filter(|(s, &b)| s.hard() != b).count();
    Ok((errors as u64, bits.len() as u64))
}

pub fn qpsk_theory(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

pub fn check_uncoded_ber(n_sym: usize) -> Check {
    let ebn0_db = 4.0;
    match qpsk_bit_errors(ebn0_db, n_sym, 0xbe4) {
        Ok((errors, bits)) => {
            let (lo, hi) = wilson_interval(errors, bits, Z95);
            let theory = qpsk_theory(ebn0_db);
            check(
                UNCODED_BER,
                lo <= theory && theory <= hi,
                format!("{ebn0_db} dB: [{lo:.5}, {hi:.5}] vs Q = {theory:.5}"),
            )
        }
        Err(e) => check(UNCODED_BER, false, e.to_string()),
    }
}

/// All checks in order; `code` is the decoder under test.
pub fn run_all(code: &ConvCode) -> Vec<Check> {
    vec![
        check_codec(code, 1000),
        check_interleaver(),
        check_collisions(20_000),
        check_uncoded_ber(2000),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use coexsim_core::codec::{conv_encode, puncture};

    #[test]
    fn reference_matches_library_encoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rate in [CodeRate::Half, CodeRate::TwoThirds, CodeRate::ThreeQuarters] {
            for len in oracle_lengths(rate, 30) {
                let msg: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
                let mut padded = msg.clone();
                padded.extend([0; MEMORY]);
                let lib = puncture(&conv_encode(&padded), rate).unwrap();
                assert_eq!(reference_codeword(&msg, rate), lib);
            }
        }
    }

    #[test]
    fn impulse_response_reads_the_generators() {
        // A single 1 walks through the register: output pair i is tap i of
        // each generator, 133 = 1011011 and 171 = 1111001 from the top bit.
        let cw = reference_codeword(&[1], CodeRate::Half);
        let a: Vec<u8> = cw.iter().step_by(2).copied().collect();
        let b: Vec<u8> = cw.iter().skip(1).step_by(2).copied().collect();
        assert_eq!(a, [1, 0, 1, 1, 0, 1, 1]);
        assert_eq!(b, [1, 1, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn lengths_fill_puncture_periods() {
        assert_eq!(oracle_lengths(CodeRate::Half, 10), (1..=10).collect::<Vec<_>>());
        assert_eq!(oracle_lengths(CodeRate::TwoThirds, 10), [2, 4, 6, 8, 10]);
        assert_eq!(oracle_lengths(CodeRate::ThreeQuarters, 10), [3, 6, 9]);
    }

    #[test]
    fn brute_force_recovers_clean_codewords() {
        let msg = [1, 0, 0, 1, 1, 0];
        let soft: Vec<f64> = reference_codeword(&msg, CodeRate::TwoThirds)
            .iter()
            .map(|&c| 1.0 - 2.0 * c as f64)
            .collect();
        let (ml, best, runner_up) = brute_force_ml(6, &soft, CodeRate::TwoThirds);
        assert_eq!(ml, msg);
        assert_eq!(best, soft.len() as f64);
        assert!(runner_up < best);
    }

    #[test]
    fn standard_decoder_passes_and_a_corrupted_one_fails() {
        assert!(check_codec(&ConvCode::IEEE80211, 200).passed);
        let corrupt = ConvCode::new(0o133, 0o175).unwrap();
        let c = check_codec(&corrupt, 200);
        assert!(!c.passed);
        assert_eq!(c.name, CODEC_ORACLE);
    }

    #[test]
    fn other_checks_pass() {
        assert!(check_interleaver().passed);
        assert!(check_uncoded_ber(500).passed);
        let c = check_collisions(20_000);
        assert!(c.passed, "{}", c.detail);
    }
}
