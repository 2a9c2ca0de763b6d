//! Packet transactions and the PER estimator.
//!
//! A trial is a pure function of `(SimPoint, trial index)`: it assembles a
//! packet, passes it through a fading channel, the interferer and noise,
//! and decodes it. [`estimate_per`] accumulates trials in index order and
//! stops at the first trial index where the error count reaches the stop
//! rule, so the estimate does not depend on how trials are scheduled.

use alloc::vec::Vec;
use core::ops::Range;

// Float supplies f64 math without std; test builds link std and shadow it.
#[allow(unused_imports)]
use num_traits::Float;

use crate::bluetooth::{self, BtConfig, BtEpisode, OverlapModel};
use crate::channel::{self, ChannelConfig, ChannelRealization};
use crate::codec::{self, Interleaver, SoftBit};
use crate::erasure::{self, ErasurePolicy};
use crate::error::{invalid, Result};
use crate::ofdm::{self, ModeParams, SubcarrierGrid, N_SUBCARRIERS, SYMBOL_US};
use crate::rng::{trial_rng, Lane};
use crate::stats::{wilson_interval, Z95};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelChoice {
    Rayleigh(ChannelConfig),
    /// Unit gain on every subcarrier; for debugging and AWGN checks.
    Flat,
}

/// One cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimPoint {
    pub mode: ModeParams,
    pub ebn0_db: f64,
    pub n_erasures: usize,
    pub bt_enabled: bool,
    pub sir_db: f64,
    /// Master seed. Points sharing it see identical packets, channels and
    /// interference for the same trial index.
    pub seed: u64,
    pub payload_bytes: usize,
    pub channel: ChannelChoice,
    pub wlan_center_mhz: f64,
    pub overlap_model: OverlapModel,
    pub erasure_estimate_error_mhz: f64,
}

impl SimPoint {
    /// 100-byte packets, 100 ns delay spread, BT at 0 dB SIR.
    pub fn new(mode: ModeParams, ebn0_db: f64, n_erasures: usize) -> Self {
        let bt = BtConfig::default();
        SimPoint {
            mode,
            ebn0_db,
            n_erasures,
            bt_enabled: true,
            sir_db: bt.sir_db,
            seed: 1,
            payload_bytes: 100,
            channel: ChannelChoice::Rayleigh(ChannelConfig::default()),
            wlan_center_mhz: bt.wlan_center_mhz,
            overlap_model: bt.overlap_model,
            erasure_estimate_error_mhz: 0.0,
        }
    }

    pub fn bt_config(&self) -> BtConfig {
        BtConfig {
            sir_db: self.sir_db,
            wlan_center_mhz: self.wlan_center_mhz,
            overlap_model: self.overlap_model,
            ..BtConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ebn0_db.is_finite() {
            return Err(invalid!("Eb/N0 must be finite"));
        }
        if self.payload_bytes == 0 {
            return Err(invalid!("payload must be at least one byte"));
        }
        ErasurePolicy::new(self.n_erasures)?;
        if let ChannelChoice::Rayleigh(cfg) = &self.channel {
            cfg.validate()?;
        }
        self.bt_config().validate()
    }
}

/// Result of one Monte Carlo cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerPoint {
    pub point: SimPoint,
    pub trials: u64,
    pub packet_errors: u64,
    pub per: f64,
    pub ci95: (f64, f64),
}

impl PerPoint {
    pub fn from_counts(point: SimPoint, packet_errors: u64, trials: u64) -> Self {
        PerPoint {
            point,
            trials,
            packet_errors,
            per: if trials == 0 {
                0.0
            } else {
                packet_errors as f64 / trials as f64
            },
            ci95: wilson_interval(packet_errors, trials, Z95),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_trials: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_errors: 100,
            max_trials: 200_000,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_errors == 0 || self.max_trials < self.min_errors {
            return Err(invalid!(
                "stop rule needs min_errors >= 1 and max_trials >= min_errors"
            ));
        }
        Ok(())
    }
}

/// What one trial observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub packet_error: bool,
    /// Some symbol overlapped an in-band burst.
    pub collided: bool,
}

/// A validated [`SimPoint`] with its derived constants.
#[derive(Debug, Clone)]
pub struct LinkSimulator {
    point: SimPoint,
    bt: BtConfig,
    policy: ErasurePolicy,
    noise_var: f64,
    n_sym: usize,
    interleaver: Interleaver,
}

impl LinkSimulator {
    pub fn new(point: SimPoint) -> Result<Self> {
        point.validate()?;
        let mut policy = ErasurePolicy::new(point.n_erasures)?;
        policy.estimate_error_mhz = point.erasure_estimate_error_mhz;
        Ok(LinkSimulator {
            point,
            bt: point.bt_config(),
            policy,
            noise_var: channel::noise_variance(point.ebn0_db, &point.mode),
            n_sym: point.mode.n_symbols(point.payload_bytes),
            interleaver: point.mode.interleaver(),
        })
    }

    pub fn point(&self) -> &SimPoint {
        &self.point
    }

    pub fn n_symbols(&self) -> usize {
        self.n_sym
    }

    pub fn run_packet(&self, trial: u64) -> Result<bool> {
        Ok(self.run_trial(trial)?.packet_error)
    }

    pub fn run_trial(&self, trial: u64) -> Result<TrialOutcome> {
        let p = &self.point;
        let mode = &p.mode;
        let packet = ofdm::assemble_packet(
            p.payload_bytes,
            mode,
            &mut trial_rng(p.seed, trial, Lane::Payload),
        )?;

        let fading = match &p.channel {
            ChannelChoice::Rayleigh(cfg) => {
                channel::draw_channel(cfg, &mut trial_rng(p.seed, trial, Lane::Channel))?
            }
            ChannelChoice::Flat => ChannelRealization::flat(),
        };
        let gains = fading.slot_gains();
        let mut grid = packet.grid.clone();
        grid.apply_gains(&gains);

        let episode = if p.bt_enabled {
            bluetooth::draw_episode(
                packet.duration_us(),
                self.n_sym,
                &self.bt,
                &mut trial_rng(p.seed, trial, Lane::Interferer),
            )?
        } else {
            BtEpisode::quiet(self.n_sym)
        };
        bluetooth::inject(&mut grid, &episode)?;
        channel::add_noise(
            &mut grid,
            self.noise_var,
            &mut trial_rng(p.seed, trial, Lane::Noise),
        );

        let mask = erasure::build_mask(&episode, &self.policy, &self.bt, self.n_sym)?;
        let soft = ofdm::demap_soft(&grid, &gains, self.noise_var, &mask, mode)?;
        let decoded = decode_soft_bits(&soft, mode, &self.interleaver)?;
        let payload = packet.payload_range();
        Ok(TrialOutcome {
            packet_error: decoded[payload.clone()] != packet.info_bits[payload],
            collided: episode.collided(),
        })
    }
}

/// Receiver back end: per-symbol deinterleaving, depuncturing and Viterbi
/// decoding of demapped soft bits. Returns `n_sym * n_dbps - 6` bits.
pub fn decode_soft_bits(
    soft: &[SoftBit],
    mode: &ModeParams,
    interleaver: &Interleaver,
) -> Result<Vec<u8>> {
    if !soft.len().is_multiple_of(mode.n_cbps) {
        return Err(invalid!("soft stream is not a whole number of symbols"));
    }
    let mut deinterleaved = Vec::with_capacity(soft.len());
    for block in soft.chunks_exact(mode.n_cbps) {
        deinterleaved.extend(interleaver.deinterleave(block)?);
    }
    let mother = codec::depuncture(&deinterleaved, mode.code_rate)?;
    codec::viterbi_decode(&mother)
}

/// Receives a grid with known gains and mask; convenience for tests and
/// tools that build their own impairments.
pub fn receive(
    grid: &SubcarrierGrid,
    gains: &[Complex64; N_SUBCARRIERS],
    noise_var: f64,
    mask: &erasure::ErasureMask,
    mode: &ModeParams,
) -> Result<Vec<u8>> {
    let soft = ofdm::demap_soft(grid, gains, noise_var, mask, mode)?;
    decode_soft_bits(&soft, mode, &mode.interleaver())
}

/// Deterministic single trial.
pub fn run_packet(point: &SimPoint, trial: u64) -> Result<bool> {
    LinkSimulator::new(*point)?.run_packet(trial)
}

/// Runs a contiguous range of trials and reports outcomes in index order.
pub trait TrialExecutor {
    fn run_trials(&self, sim: &LinkSimulator, trials: Range<u64>) -> Result<Vec<bool>>;
}

/// Runs trials one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialExecutor for Sequential {
    fn run_trials(&self, sim: &LinkSimulator, trials: Range<u64>) -> Result<Vec<bool>> {
        trials.map(|t| sim.run_packet(t)).collect()
    }
}

/// Trials handed to the executor per round.
pub const BATCH_TRIALS: u64 = 256;

pub fn estimate_per(point: &SimPoint, stop: &StopRule) -> Result<PerPoint> {
    estimate_per_with(point, stop, &Sequential)
}

/// Runs trials 0, 1, 2, ... and stops at the first index where
/// `min_errors` errors have accumulated, or after `max_trials`.
pub fn estimate_per_with<E: TrialExecutor + ?Sized>(
    point: &SimPoint,
    stop: &StopRule,
    exec: &E,
) -> Result<PerPoint> {
    stop.validate()?;
    let sim = LinkSimulator::new(*point)?;
    let mut trials = 0u64;
    let mut errors = 0u64;
    while trials < stop.max_trials {
        let end = (trials + BATCH_TRIALS).min(stop.max_trials);
        let outcomes = exec.run_trials(&sim, trials..end)?;
        for failed in outcomes {
            trials += 1;
            errors += u64::from(failed);
            if errors >= stop.min_errors {
                return Ok(PerPoint::from_counts(*point, errors, trials));
            }
        }
    }
    Ok(PerPoint::from_counts(*point, errors, trials))
}

pub fn sweep(points: &[SimPoint], stop: &StopRule) -> Result<Vec<PerPoint>> {
    sweep_with(points, stop, &Sequential)
}

pub fn sweep_with<E: TrialExecutor + ?Sized>(
    points: &[SimPoint],
    stop: &StopRule,
    exec: &E,
) -> Result<Vec<PerPoint>> {
    if points.is_empty() {
        return Err(invalid!("sweep needs at least one point"));
    }
    points
        .iter()
        .map(|p| estimate_per_with(p, stop, exec))
        .collect()
}

/// Delivered fraction of the 54 Mb/s top rate: (1 - PER) * rate / 54.
pub fn normalized_throughput(p: &PerPoint) -> f64 {
    (1.0 - p.per) * p.point.mode.rate_mbps as f64 / 54.0
}

/// Number of BT bursts (active windows) that a packet starting at `t_us`
/// overlaps for a positive time.
fn bursts_overlapped(t_us: f64, duration_us: f64, cfg: &BtConfig) -> usize {
    let last = ((t_us + duration_us) / cfg.slot_us).floor() as usize;
    (0..=last)
        .filter(|&j| {
            let w0 = j as f64 * cfg.slot_us;
            (t_us + duration_us).min(w0 + cfg.active_us) - t_us.max(w0) > 0.0
        })
        .count()
}

/// Integrates `f(bursts overlapped)` over `t_dt ~ U[0, slot)`, exactly: the
/// burst count is piecewise constant with breakpoints at burst edges.
fn integrate_over_offset(duration_us: f64, cfg: &BtConfig, f: impl Fn(usize) -> f64) -> f64 {
    let slot = cfg.slot_us;
    let last = ((slot + duration_us) / slot).ceil() as i64 + 1;
    let mut cuts: Vec<f64> = alloc::vec![0.0, slot];
    for j in 0..=last {
        let w0 = j as f64 * slot;
        for c in [w0 + cfg.active_us, w0 - duration_us, w0] {
            if c > 0.0 && c < slot {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0]) * f(bursts_overlapped(mid, duration_us, cfg))
        })
        .sum::<f64>()
        / slot
}

/// Probability that a packet of the given duration overlaps at least one
/// active BT window, for a uniform start offset.
pub fn time_overlap_probability(duration_us: f64, cfg: &BtConfig) -> f64 {
    integrate_over_offset(duration_us, cfg, |m| if m > 0 { 1.0 } else { 0.0 })
}

/// Probability that a packet overlaps, in time, at least one burst whose
/// hop lands in the occupied band. Hops are independent across slots.
pub fn analytic_collision_probability(duration_us: f64, cfg: &BtConfig) -> Result<f64> {
    if !(duration_us > 0.0 && duration_us.is_finite()) {
        return Err(invalid!("packet duration must be positive"));
    }
    let p_hit = cfg.in_band_probability();
    Ok(integrate_over_offset(duration_us, cfg, |m| {
        1.0 - (1.0 - p_hit).powi(m as i32)
    }))
}

/// Duration of a packet in µs.
pub fn packet_duration_us(mode: &ModeParams, payload_bytes: usize) -> f64 {
    mode.n_symbols(payload_bytes) as f64 * SYMBOL_US
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_flat(rate: u32, ebn0: f64) -> SimPoint {
        let mut p = SimPoint::new(ModeParams::from_rate(rate).unwrap(), ebn0, 0);
        p.bt_enabled = false;
        p.channel = ChannelChoice::Flat;
        p
    }

    #[test]
    fn clean_link_decodes_every_rate() {
        for mode in ModeParams::ALL {
            let p = quiet_flat(mode.rate_mbps, 60.0);
            for t in 0..5 {
                assert!(!run_packet(&p, t).unwrap(), "{} Mb/s", mode.rate_mbps);
            }
        }
    }

    #[test]
    fn drowned_link_always_fails() {
        let p = quiet_flat(12, -40.0);
        let sim = LinkSimulator::new(p).unwrap();
        let errs = (0..100).filter(|&t| sim.run_packet(t).unwrap()).count();
        assert!(errs >= 99, "{errs}");
        let est = estimate_per(&p, &StopRule { min_errors: 20, max_trials: 1000 }).unwrap();
        assert_eq!(est.trials, 20);
        assert_eq!(est.per, 1.0);
    }

    #[test]
    fn trial_is_deterministic() {
        let p = SimPoint::new(ModeParams::from_rate(36).unwrap(), 20.0, 5);
        let sim = LinkSimulator::new(p).unwrap();
        for t in 0..20 {
            assert_eq!(sim.run_trial(t).unwrap(), sim.run_trial(t).unwrap());
        }
    }

    #[test]
    fn invalid_points_rejected() {
        let mut p = SimPoint::new(ModeParams::from_rate(12).unwrap(), f64::NAN, 0);
        assert!(LinkSimulator::new(p).is_err());
        p.ebn0_db = 10.0;
        p.n_erasures = 49;
        assert!(LinkSimulator::new(p).is_err());
        p.n_erasures = 0;
        p.payload_bytes = 0;
        assert!(LinkSimulator::new(p).is_err());
        assert!(StopRule { min_errors: 0, max_trials: 10 }.validate().is_err());
        assert!(StopRule { min_errors: 11, max_trials: 10 }.validate().is_err());
        assert!(sweep(&[], &StopRule::default()).is_err());
    }

    #[test]
    fn throughput_convention() {
        let mode54 = ModeParams::from_rate(54).unwrap();
        let mode12 = ModeParams::from_rate(12).unwrap();
        let p = |mode, e, n| PerPoint::from_counts(SimPoint::new(mode, 0.0, 0), e, n);
        assert_eq!(normalized_throughput(&p(mode54, 0, 10)), 1.0);
        assert_eq!(normalized_throughput(&p(mode12, 10, 10)), 0.0);
        assert!((normalized_throughput(&p(mode12, 1, 10)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn collision_probability_limits() {
        let cfg = BtConfig::default();
        let short = analytic_collision_probability(1e-9, &cfg).unwrap();
        assert!((short - 366.0 / 625.0 * 16.0 / 79.0).abs() < 1e-9);
        assert!((366.0f64 / 625.0 * 16.0 / 79.0 - 0.1186).abs() < 1e-4);
        assert!((time_overlap_probability(259.0, &cfg) - 1.0).abs() < 1e-12);
        assert!(time_overlap_probability(258.0, &cfg) < 1.0);
        // A single burst at most for packets shorter than the gap.
        let t72 = time_overlap_probability(72.0, &cfg);
        assert!((t72 - (366.0 + 72.0) / 625.0).abs() < 1e-12);
        let c72 = analytic_collision_probability(72.0, &cfg).unwrap();
        assert!((c72 - t72 * 16.0 / 79.0).abs() < 1e-12);
        assert!(analytic_collision_probability(0.0, &cfg).is_err());
    }

    #[test]
    fn single_point_sweep_matches_estimate() {
        let p = quiet_flat(54, 8.0);
        let stop = StopRule { min_errors: 5, max_trials: 300 };
        let a = sweep(&[p], &stop).unwrap();
        let b = estimate_per(&p, &stop).unwrap();
        assert_eq!(a, [b]);
    }
}
