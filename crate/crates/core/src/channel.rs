//! Multipath Rayleigh block fading with an exponential power delay profile,
//! and receiver noise.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

// Float supplies f64 math without std; test builds link std and shadow it.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::ofdm::{self, ModeParams, SubcarrierGrid, N_DATA, N_SUBCARRIERS};
use crate::rng::complex_gaussian;

/// Guard interval the tap span has to fit into.
pub const CYCLIC_PREFIX_S: f64 = 800e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub tau_rms_s: f64,
    pub sample_period_s: f64,
    pub n_taps: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            tau_rms_s: 100e-9,
            sample_period_s: 50e-9,
            n_taps: 16,
        }
    }
}

impl ChannelConfig {
    pub fn with_tau_rms(tau_rms_s: f64) -> Self {
        ChannelConfig {
            tau_rms_s,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_rms_s >= 0.0 && self.tau_rms_s.is_finite()) {
            return Err(invalid!("tau_rms must be finite and non-negative"));
        }
        if !(self.sample_period_s > 0.0) || self.n_taps == 0 {
            return Err(invalid!("channel needs a positive sample period and at least one tap"));
        }
        // Small slack so 16 x 50 ns is not rejected by rounding.
        if self.n_taps as f64 * self.sample_period_s > CYCLIC_PREFIX_S * (1.0 + 1e-9) {
            return Err(invalid!(
                "{} taps at {} s exceed the cyclic prefix",
                self.n_taps,
                self.sample_period_s
            ));
        }
        Ok(())
    }

    /// Tap variances, exp(-k Ts / tau_rms) normalized to unit sum. A zero
    /// delay spread collapses to a single tap.
    pub fn power_profile(&self) -> Vec<f64> {
        let mut p: Vec<f64> = (0..self.n_taps)
            .map(|k| {
                if self.tau_rms_s == 0.0 {
                    if k == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (-(k as f64) * self.sample_period_s / self.tau_rms_s).exp()
                }
            })
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        p
    }
}

/// One block-fading draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Complex64>,
    /// Frequency response in DFT index order: `h_freq[k]` for `k = 0..64`,
    /// negative subcarriers at `64 + k`.
    pub h_freq: [Complex64; N_SUBCARRIERS],
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<Complex64>) -> Self {
        let mut h_freq = [Complex64::new(0.0, 0.0); N_SUBCARRIERS];
        for (k, h) in h_freq.iter_mut().enumerate() {
            let w = Complex64::from_polar(1.0, -TAU * k as f64 / N_SUBCARRIERS as f64);
            // Horner evaluation of sum_m taps[m] w^m.
            *h = taps.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &t| acc * w + t);
        }
        ChannelRealization { taps, h_freq }
    }

    /// Unit gain on every subcarrier.
    pub fn flat() -> Self {
        Self::from_taps(alloc::vec![Complex64::new(1.0, 0.0)])
    }

    pub fn gain(&self, k: i32) -> Complex64 {
        self.h_freq[k.rem_euclid(N_SUBCARRIERS as i32) as usize]
    }

    /// Gains rearranged into grid slot order (`k = -32..=31`).
    pub fn slot_gains(&self) -> [Complex64; N_SUBCARRIERS] {
        core::array::from_fn(|i| self.gain(ofdm::subcarrier(i)))
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }
}

pub fn draw_channel<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> Result<ChannelRealization> {
    cfg.validate()?;
    let taps = cfg
        .power_profile()
        .into_iter()
        .map(|var| complex_gaussian(rng, var))
        .collect();
    Ok(ChannelRealization::from_taps(taps))
}

/// Per-subcarrier complex noise variance for a given Eb/N0, with unit
/// energy per data subcarrier and every assembled bit counted as an
/// information bit: N0 = (48 / n_dbps) 10^(-Eb/N0 / 10).
pub fn noise_variance(ebn0_db: f64, mode: &ModeParams) -> f64 {
    N_DATA as f64 / mode.n_dbps as f64 * 10f64.powf(-ebn0_db / 10.0)
}

/// Adds circular complex Gaussian noise of variance `n0` to every occupied
/// (data and pilot) cell. Null cells are left untouched.
pub fn add_noise<R: Rng + ?Sized>(grid: &mut SubcarrierGrid, n0: f64, rng: &mut R) {
    if n0 == 0.0 {
        return;
    }
    for row in &mut grid.symbols {
        for (i, x) in row.iter_mut().enumerate() {
            if ofdm::is_occupied(ofdm::subcarrier(i)) {
                *x += complex_gaussian(rng, n0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{ModeParams, DATA_SUBCARRIERS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_profile_fits_prefix() {
        let cfg = ChannelConfig::default();
        cfg.validate().unwrap();
        let p = cfg.power_profile();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[1] / p[0] - (-0.5f64).exp()).abs() < 1e-12);
        assert!((p[1] / p[0] - 0.6065).abs() < 1e-4);
        let too_long = ChannelConfig {
            n_taps: 17,
            ..cfg
        };
        assert!(too_long.validate().is_err());
    }

    #[test]
    fn zero_delay_spread_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = draw_channel(&ChannelConfig::with_tau_rms(0.0), &mut rng).unwrap();
        let mag = ch.h_freq[0].norm();
        for h in ch.h_freq {
            assert!((h.norm() - mag).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_energy_is_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ChannelConfig::default();
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| draw_channel(&cfg, &mut rng).unwrap().energy())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean energy {mean}");
    }

    #[test]
    fn frequency_response_matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = draw_channel(&ChannelConfig::default(), &mut rng).unwrap();
        for k in 0..N_SUBCARRIERS {
            let mut direct = Complex64::new(0.0, 0.0);
            for (m, t) in ch.taps.iter().enumerate() {
                let ang = -TAU * (k * m) as f64 / 64.0;
                direct += t * Complex64::new(ang.cos(), ang.sin());
            }
            let err = (direct - ch.h_freq[k]).norm() / direct.norm().max(1e-300);
            assert!(err < 1e-10, "k={k} rel err {err}");
        }
    }

    #[test]
    fn subcarrier_gain_is_unit_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = ChannelConfig::default();
        let n = 10_000;
        let mut acc = [0.0f64; N_SUBCARRIERS];
        for _ in 0..n {
            let ch = draw_channel(&cfg, &mut rng).unwrap();
            for (a, h) in acc.iter_mut().zip(ch.h_freq) {
                *a += h.norm_sqr();
            }
        }
        for a in acc {
            assert!((a / n as f64 - 1.0).abs() < 0.03);
        }
    }

    #[test]
    fn noise_variance_calibration() {
        let m12 = ModeParams::from_rate(12).unwrap();
        let m54 = ModeParams::from_rate(54).unwrap();
        assert!((noise_variance(0.0, &m12) - 1.0).abs() < 1e-15);
        assert!((noise_variance(0.0, &m54) - 48.0 / 216.0).abs() < 1e-15);
        assert!((noise_variance(10.0, &m12) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mode = ModeParams::from_rate(24).unwrap();
        let pkt = crate::ofdm::assemble_packet(20, &mode, &mut rng).unwrap();
        let mut g = pkt.grid.clone();
        add_noise(&mut g, 0.0, &mut rng);
        assert_eq!(g, pkt.grid);
    }

    #[test]
    fn noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // 2100 symbols x 48 data cells > 1e5 samples.
        let mut g = SubcarrierGrid::zeros(2100);
        add_noise(&mut g, 1.0, &mut rng);
        let cells: Vec<Complex64> = g
            .symbols
            .iter()
            .flat_map(|row| DATA_SUBCARRIERS.iter().map(move |&k| row[ofdm::slot(k)]))
            .collect();
        let n = cells.len() as f64;
        let var: f64 = cells.iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
        let var_re: f64 = cells.iter().map(|c| c.re * c.re).sum::<f64>() / n;
        let var_im: f64 = cells.iter().map(|c| c.im * c.im).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.02, "{var}");
        assert!((var_re - 0.5).abs() < 0.01, "{var_re}");
        assert!((var_im - 0.5).abs() < 0.01, "{var_im}");
        for row in &g.symbols {
            assert_eq!(row[ofdm::slot(0)], Complex64::new(0.0, 0.0));
            assert_eq!(row[ofdm::slot(-32)], Complex64::new(0.0, 0.0));
        }
    }
}
