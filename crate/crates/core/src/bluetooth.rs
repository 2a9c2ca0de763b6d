//! Bluetooth HV1 interferer.
//!
//! The piconet transmits on every 625 µs slot (1600 hops/s), active for the
//! first 366 µs, on a channel drawn uniformly from the 79 one-MHz channels
//! at 2402..=2480 MHz. The WLAN packet starts at a uniform offset `t_dt`
//! inside the slot cycle.
//!
//! Interference is applied in the frequency domain. Each burst is a GFSK
//! waveform whose spectrum is evaluated at the OFDM subcarrier frequencies,
//! scaled to the configured SIR and added to every OFDM symbol the burst
//! overlaps in time, weighted by the square root of the overlap fraction.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI, TAU};
use core::ops::Range;

use num_complex::Complex64;
use rand::Rng;

// Float supplies f64 math without std; test builds link std and shadow it.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::ofdm::{self, SubcarrierGrid, N_DATA, N_SUBCARRIERS, SAMPLE_RATE_MHZ, SYMBOL_US};
use crate::rng::uniform_phase;

pub const N_CHANNELS: u8 = 79;
pub const FIRST_CHANNEL_MHZ: f64 = 2402.0;
pub const LAST_CHANNEL_MHZ: f64 = 2480.0;

/// Support of a footprint around the BT carrier. Beyond it the 20 MS/s
/// burst spectrum is dominated by images and the true emission is
/// negligible (below 1e-4 of the burst power).
pub const FOOTPRINT_SPAN_MHZ: f64 = 5.0;

/// Symbols either side of a bit that its Gaussian frequency pulse reaches.
const PULSE_HALF_SPAN: usize = 2;

/// How partial time overlap between a burst and an OFDM symbol is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapModel {
    /// Interference amplitude scaled by the square root of the overlapped
    /// fraction of the symbol.
    #[default]
    Amplitude,
    /// Any overlap counts as a full hit.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtConfig {
    /// OFDM data power (48 unit-energy subcarriers) over total BT power.
    pub sir_db: f64,
    pub wlan_center_mhz: f64,
    pub slot_us: f64,
    pub active_us: f64,
    pub hop_rate_hz: f64,
    pub modulation_index: f64,
    pub gaussian_bt: f64,
    pub symbol_rate_hz: f64,
    /// Samples per BT symbol; 20 puts the waveform on the 20 MHz OFDM grid.
    pub oversampling: usize,
    pub overlap_model: OverlapModel,
}

impl Default for BtConfig {
    fn default() -> Self {
        BtConfig {
            sir_db: 0.0,
            wlan_center_mhz: 2441.0,
            slot_us: 625.0,
            active_us: 366.0,
            hop_rate_hz: 1600.0,
            modulation_index: 0.32,
            gaussian_bt: 0.5,
            symbol_rate_hz: 1e6,
            oversampling: 20,
            overlap_model: OverlapModel::Amplitude,
        }
    }
}

impl BtConfig {
    pub fn with_sir(sir_db: f64) -> Self {
        BtConfig {
            sir_db,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.hop_rate_hz * self.slot_us - 1e6).abs() > 1e-6 {
            return Err(invalid!("hop rate and slot length disagree: one hop per slot"));
        }
        if !(self.active_us > 0.0 && self.active_us <= self.slot_us) {
            return Err(invalid!("active time must lie within the slot"));
        }
        if self.sir_db.is_nan() || !self.wlan_center_mhz.is_finite() {
            return Err(invalid!("SIR and WLAN centre must be numbers"));
        }
        if self.oversampling == 0 || self.symbol_rate_hz <= 0.0 {
            return Err(invalid!("GFSK needs a positive symbol rate and oversampling"));
        }
        Ok(())
    }

    pub fn duty_cycle(&self) -> f64 {
        self.active_us / self.slot_us
    }

    pub fn channel_mhz(channel: u8) -> f64 {
        FIRST_CHANNEL_MHZ + channel as f64
    }

    /// Hop channels counted as landing in the occupied OFDM band: the
    /// 16.25 MHz band holds 16 whole one-MHz channels, taken from the first
    /// channel at or above the lower band edge and clipped to the BT band.
    pub fn in_band_channels(&self) -> Range<u8> {
        let lower = self.wlan_center_mhz - ofdm::OCCUPIED_BANDWIDTH_MHZ / 2.0;
        let count = ofdm::OCCUPIED_BANDWIDTH_MHZ.floor() as i64;
        let first = (lower - FIRST_CHANNEL_MHZ).ceil() as i64;
        let start = first.clamp(0, N_CHANNELS as i64);
        let end = (first + count).clamp(0, N_CHANNELS as i64);
        start as u8..end as u8
    }

    pub fn is_in_band(&self, channel: u8) -> bool {
        self.in_band_channels().contains(&channel)
    }

    pub fn in_band_probability(&self) -> f64 {
        self.in_band_channels().len() as f64 / N_CHANNELS as f64
    }

    /// Total received BT power relative to one data subcarrier.
    pub fn interference_power(&self) -> f64 {
        N_DATA as f64 * 10f64.powf(-self.sir_db / 10.0)
    }

    pub fn burst_bits(&self) -> usize {
        (self.active_us * self.symbol_rate_hz * 1e-6).round() as usize
    }

    fn sample_rate_hz(&self) -> f64 {
        self.symbol_rate_hz * self.oversampling as f64
    }
}

/// GFSK modulator with a precomputed Gaussian frequency pulse.
#[derive(Debug, Clone)]
pub struct GfskModulator {
    /// Pulse response, `pulse[d * osr + s]` for a bit `d - PULSE_HALF_SPAN`
    /// symbols before the current one, at sub-sample `s`.
    pulse: Vec<f64>,
    osr: usize,
    /// Radians per sample at full frequency deviation (h/2 * Rs).
    phase_step: f64,
}

impl GfskModulator {
    pub fn new(cfg: &BtConfig) -> Self {
        let osr = cfg.oversampling;
        let sigma = LN_2.sqrt() / (2.0 * PI * cfg.gaussian_bt); // in symbol periods
        let phi = |x: f64| 0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2));
        let width = 2 * PULSE_HALF_SPAN + 1;
        let mut pulse = Vec::with_capacity(width * osr);
        for d in 0..width {
            for s in 0..osr {
                // Sample time measured from the centre of the contributing bit.
                let tau = (s as f64 + 0.5) / osr as f64 - 0.5 + (d as f64 - PULSE_HALF_SPAN as f64);
                pulse.push(phi((tau + 0.5) / sigma) - phi((tau - 0.5) / sigma));
            }
        }
        let deviation_hz = cfg.modulation_index / 2.0 * cfg.symbol_rate_hz;
        GfskModulator {
            pulse,
            osr,
            phase_step: TAU * deviation_hz / cfg.sample_rate_hz(),
        }
    }

    /// Instantaneous frequency, in units of the peak deviation, per sample.
    pub fn frequency_trajectory(&self, bits: &[u8]) -> Vec<f64> {
        let n = bits.len();
        let mut freq = Vec::with_capacity(n * self.osr);
        for sym in 0..n {
            for s in 0..self.osr {
                let mut f = 0.0;
                for d in 0..=2 * PULSE_HALF_SPAN {
                    let Some(bit) = (sym + d).checked_sub(PULSE_HALF_SPAN).and_then(|i| bits.get(i))
                    else {
                        continue;
                    };
                    let polarity = if *bit == 0 { -1.0 } else { 1.0 };
                    // Bit at sym + d - span sees this sample at offset -(d - span).
                    f += polarity * self.pulse[(2 * PULSE_HALF_SPAN - d) * self.osr + s];
                }
                freq.push(f);
            }
        }
        freq
    }

    /// Unit-modulus samples starting at `phase0`.
    pub fn modulate(&self, bits: &[u8], phase0: f64) -> Vec<Complex64> {
        let mut phase = phase0;
        self.frequency_trajectory(bits)
            .into_iter()
            .map(|f| {
                let s = Complex64::from_polar(1.0, phase);
                phase = (phase + self.phase_step * f) % TAU;
                s
            })
            .collect()
    }
}

/// One active burst worth (or more) of GFSK baseband at 20 Msample/s with a
/// random starting phase.
pub fn gfsk_baseband<R: Rng + ?Sized>(bits: &[u8], cfg: &BtConfig, rng: &mut R) -> Result<Vec<Complex64>> {
    if bits.len() < cfg.burst_bits() {
        return Err(invalid!(
            "GFSK burst needs at least {} bits, got {}",
            cfg.burst_bits(),
            bits.len()
        ));
    }
    Ok(GfskModulator::new(cfg).modulate(bits, uniform_phase(rng)))
}

/// Frequency response of `burst`, carried at `f_bt_mhz`, sampled at the 64
/// subcarrier frequencies `wlan_center + k * 312.5 kHz` (slot order).
///
/// The response is scaled so that its power summed over one full period of
/// the sampled spectrum equals [`BtConfig::interference_power`], then cut
/// to [`FOOTPRINT_SPAN_MHZ`] around the BT carrier. An in-band burst
/// therefore carries the configured power up to its negligible far tails,
/// whatever its alignment to the subcarrier grid. The result is rotated by
/// a uniformly random phase.
pub fn spectral_footprint<R: Rng + ?Sized>(
    burst: &[Complex64],
    f_bt_mhz: f64,
    cfg: &BtConfig,
    rng: &mut R,
) -> Result<[Complex64; N_SUBCARRIERS]> {
    if burst.is_empty() {
        return Err(invalid!("empty burst"));
    }
    if !(FIRST_CHANNEL_MHZ..=LAST_CHANNEL_MHZ).contains(&f_bt_mhz) {
        return Err(invalid!("BT carrier {f_bt_mhz} MHz outside 2402..=2480"));
    }
    let rotation = Complex64::from_polar(1.0, uniform_phase(rng));
    let mut out = [Complex64::new(0.0, 0.0); N_SUBCARRIERS];
    let power = cfg.interference_power();
    if power == 0.0 {
        return Ok(out);
    }
    let offset = f_bt_mhz - cfg.wlan_center_mhz;
    let fs = SAMPLE_RATE_MHZ;

    // Shift to the WLAN frame, then fold onto 64 samples: the 64-point DFT
    // of the folded sequence is the DTFT at exactly the subcarrier
    // frequencies (modulo the sample rate).
    let rot = Complex64::from_polar(1.0, TAU * offset / fs);
    let mut carrier = Complex64::new(1.0, 0.0);
    let mut folded = [Complex64::new(0.0, 0.0); N_SUBCARRIERS];
    for (n, &s) in burst.iter().enumerate() {
        folded[n % N_SUBCARRIERS] += s * carrier;
        carrier *= rot;
        if n % N_SUBCARRIERS == N_SUBCARRIERS - 1 {
            carrier /= carrier.norm();
        }
    }
    let twiddle: [Complex64; N_SUBCARRIERS] =
        core::array::from_fn(|t| Complex64::from_polar(1.0, -TAU * t as f64 / N_SUBCARRIERS as f64));
    for (i, o) in out.iter_mut().enumerate() {
        let kk = ofdm::subcarrier(i).rem_euclid(N_SUBCARRIERS as i32) as usize;
        *o = folded
            .iter()
            .enumerate()
            .map(|(r, &y)| y * twiddle[(kk * r) % N_SUBCARRIERS])
            .sum();
    }

    let total: f64 = out.iter().map(|x| x.norm_sqr()).sum();
    if total == 0.0 {
        return Err(invalid!("burst has no energy"));
    }
    let gain = rotation * (power / total).sqrt();
    for (i, o) in out.iter_mut().enumerate() {
        if (ofdm::subcarrier_offset_mhz(ofdm::subcarrier(i)) - offset).abs() > FOOTPRINT_SPAN_MHZ {
            *o = Complex64::new(0.0, 0.0);
        } else {
            *o *= gain;
        }
    }
    Ok(out)
}

/// One BT slot touched by the packet's time span.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotHop {
    /// Slot start on the timeline whose origin is the start of slot 0.
    pub start_us: f64,
    pub channel: u8,
    pub in_band: bool,
}

impl SlotHop {
    pub fn f_bt_mhz(&self) -> f64 {
        BtConfig::channel_mhz(self.channel)
    }
}

/// Interference seen by one OFDM symbol.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymbolInterference {
    /// Fraction of the 4 µs symbol inside an active BT window, any channel.
    pub time_overlap: f64,
    /// Weight actually applied: zero unless the overlapping hop is in band.
    pub overlap_fraction: f64,
    /// Index into [`BtEpisode::slots`] of the burst overlapping in time.
    pub slot: Option<usize>,
}

/// Interference context of one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct BtEpisode {
    pub t_dt_us: f64,
    pub slots: Vec<SlotHop>,
    pub per_symbol: Vec<SymbolInterference>,
    /// Interference cells of each hit symbol, before overlap weighting.
    pub footprints: Vec<Option<Box<[Complex64; N_SUBCARRIERS]>>>,
}

impl BtEpisode {
    /// No interferer at all.
    pub fn quiet(n_sym: usize) -> Self {
        BtEpisode {
            t_dt_us: 0.0,
            slots: Vec::new(),
            per_symbol: alloc::vec![SymbolInterference::default(); n_sym],
            footprints: alloc::vec![None; n_sym],
        }
    }

    pub fn n_symbols(&self) -> usize {
        self.per_symbol.len()
    }

    /// True when some symbol overlaps an in-band burst.
    pub fn collided(&self) -> bool {
        self.per_symbol.iter().any(|s| s.overlap_fraction > 0.0)
    }

    /// BT carrier hitting `symbol`, if its overlap weight is non-zero.
    pub fn hit_carrier_mhz(&self, symbol: usize) -> Option<f64> {
        let s = &self.per_symbol[symbol];
        if s.overlap_fraction > 0.0 {
            s.slot.map(|j| self.slots[j].f_bt_mhz())
        } else {
            None
        }
    }

    pub fn footprint(&self, symbol: usize) -> Option<&[Complex64; N_SUBCARRIERS]> {
        let s = &self.per_symbol[symbol];
        if s.overlap_fraction > 0.0 {
            self.footprints[symbol].as_deref()
        } else {
            None
        }
    }
}

/// One hop, uniform over the 79 channels.
pub fn draw_hop<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    rng.random_range(0..N_CHANNELS)
}

/// Draws the interferer timeline for one packet of `n_sym` OFDM symbols.
pub fn draw_episode<R: Rng + ?Sized>(
    packet_duration_us: f64,
    n_sym: usize,
    cfg: &BtConfig,
    rng: &mut R,
) -> Result<BtEpisode> {
    if (packet_duration_us - SYMBOL_US * n_sym as f64).abs() > 1e-9 {
        return Err(invalid!(
            "packet duration {packet_duration_us} µs does not match {n_sym} symbols"
        ));
    }
    let t_dt = rng.random::<f64>() * cfg.slot_us;
    let n_slots = ((t_dt + packet_duration_us) / cfg.slot_us).floor() as usize + 1;
    let hops: Vec<u8> = (0..n_slots).map(|_| draw_hop(rng)).collect();
    episode_with_timing(t_dt, &hops, n_sym, cfg, rng)
}

/// Builds an episode for a known offset and hop sequence (`hops[j]` is the
/// channel of slot `j`, which must cover the packet). Only the GFSK bursts
/// and their phases are drawn from `rng`.
pub fn episode_with_timing<R: Rng + ?Sized>(
    t_dt_us: f64,
    hops: &[u8],
    n_sym: usize,
    cfg: &BtConfig,
    rng: &mut R,
) -> Result<BtEpisode> {
    let t_dt = t_dt_us;
    let end = t_dt + SYMBOL_US * n_sym as f64;
    let needed = (end / cfg.slot_us).floor() as usize + 1;
    if !(0.0..cfg.slot_us).contains(&t_dt) || hops.len() < needed {
        return Err(invalid!("hop sequence does not cover the packet"));
    }
    if let Some(&ch) = hops.iter().find(|&&c| c >= N_CHANNELS) {
        return Err(invalid!("hop channel {ch} out of range"));
    }
    let slots: Vec<SlotHop> = hops
        .iter()
        .enumerate()
        .map(|(j, &channel)| SlotHop {
            start_us: j as f64 * cfg.slot_us,
            channel,
            in_band: cfg.is_in_band(channel),
        })
        .collect();

    let per_symbol: Vec<SymbolInterference> = (0..n_sym)
        .map(|i| {
            let a = t_dt + SYMBOL_US * i as f64;
            let b = a + SYMBOL_US;
            let j = (a / cfg.slot_us).floor() as usize;
            // A symbol is shorter than the inter-burst gap, so only the burst
            // of the slot it starts in or the next one can overlap it.
            [j, j + 1]
                .into_iter()
                .filter(|&j| j < slots.len())
                .find_map(|j| {
                    let w0 = slots[j].start_us;
                    let w1 = w0 + cfg.active_us;
                    let ov = b.min(w1) - a.max(w0);
                    (ov > 0.0).then(|| {
                        let time_overlap = ov / SYMBOL_US;
                        let overlap_fraction = match (slots[j].in_band, cfg.overlap_model) {
                            (false, _) => 0.0,
                            (true, OverlapModel::Amplitude) => time_overlap,
                            (true, OverlapModel::Binary) => 1.0,
                        };
                        SymbolInterference {
                            time_overlap,
                            overlap_fraction,
                            slot: Some(j),
                        }
                    })
                })
                .unwrap_or_default()
        })
        .collect();

    // One burst, hence one footprint, per hit slot.
    let modulator = GfskModulator::new(cfg);
    let mut footprints = alloc::vec![None; n_sym];
    for (j, slot) in slots.iter().enumerate() {
        let hit: Vec<usize> = (0..n_sym)
            .filter(|&s| per_symbol[s].slot == Some(j) && per_symbol[s].overlap_fraction > 0.0)
            .collect();
        if hit.is_empty() {
            continue;
        }
        let bits: Vec<u8> = (0..cfg.burst_bits()).map(|_| rng.random_range(0..2)).collect();
        let burst = modulator.modulate(&bits, uniform_phase(rng));
        let fp = Box::new(spectral_footprint(&burst, slot.f_bt_mhz(), cfg, rng)?);
        for s in hit {
            footprints[s] = Some(fp.clone());
        }
    }

    Ok(BtEpisode {
        t_dt_us: t_dt,
        slots,
        per_symbol,
        footprints,
    })
}

/// Adds each symbol's interference, `sqrt(overlap) * footprint`, to all 64
/// cells of that symbol.
pub fn inject(grid: &mut SubcarrierGrid, episode: &BtEpisode) -> Result<()> {
    if episode.n_symbols() != grid.n_symbols() {
        return Err(invalid!(
            "episode covers {} symbols, grid has {}",
            episode.n_symbols(),
            grid.n_symbols()
        ));
    }
    for (s, row) in grid.symbols.iter_mut().enumerate() {
        let Some(fp) = episode.footprint(s) else {
            continue;
        };
        let w = episode.per_symbol[s].overlap_fraction.sqrt();
        for (x, i) in row.iter_mut().zip(fp) {
            *x += i * w;
        }
    }
    Ok(())
}
