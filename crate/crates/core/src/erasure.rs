//! Symbol-erasure masks.
//!
//! For every OFDM symbol hit by an in-band burst, the receiver erases the
//! `E` data subcarriers nearest the BT carrier. The receiver is assumed to
//! know the carrier and the hit symbols; an optional offset models an error
//! in its carrier estimate. Erased cells reach the Viterbi decoder as
//! zero-confidence soft bits (see [`crate::ofdm::demap_soft`]).

use alloc::vec;
use alloc::vec::Vec;

use crate::bluetooth::{BtConfig, BtEpisode};
use crate::error::{invalid, Result};
use crate::ofdm::{self, DATA_SUBCARRIERS, N_DATA};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasurePolicy {
    pub n_erasures: usize,
    /// Added to the true carrier offset before choosing subcarriers.
    pub estimate_error_mhz: f64,
}

impl ErasurePolicy {
    pub fn new(n_erasures: usize) -> Result<Self> {
        if n_erasures > N_DATA {
            return Err(invalid!("cannot erase {n_erasures} of {N_DATA} data subcarriers"));
        }
        Ok(ErasurePolicy {
            n_erasures,
            estimate_error_mhz: 0.0,
        })
    }
}

/// Erased (symbol, subcarrier) cells; one 64-bit row per symbol, bit
/// `slot(k)` set when subcarrier `k` is erased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErasureMask {
    rows: Vec<u64>,
}

impl ErasureMask {
    pub fn empty(n_sym: usize) -> Self {
        ErasureMask { rows: vec![0; n_sym] }
    }

    pub fn n_symbols(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn is_erased(&self, symbol: usize, k: i32) -> bool {
        self.rows[symbol] >> ofdm::slot(k) & 1 == 1
    }

    pub fn set(&mut self, symbol: usize, k: i32) {
        self.rows[symbol] |= 1 << ofdm::slot(k);
    }

    pub fn count(&self, symbol: usize) -> usize {
        self.rows[symbol].count_ones() as usize
    }

    /// Erased subcarriers of one symbol, ascending.
    pub fn erased(&self, symbol: usize) -> Vec<i32> {
        (0..64)
            .filter(|&i| self.rows[symbol] >> i & 1 == 1)
            .map(ofdm::subcarrier)
            .collect()
    }
}

/// The `n` data subcarriers closest to `offset_mhz` from the WLAN centre,
/// ties resolved toward the lower subcarrier index.
pub fn nearest_data_subcarriers(offset_mhz: f64, n: usize) -> Vec<i32> {
    let mut ranked = DATA_SUBCARRIERS;
    // Stable sort over ascending k keeps the lower index first on ties.
    ranked.sort_by(|&a, &b| {
        let da = (ofdm::subcarrier_offset_mhz(a) - offset_mhz).abs();
        let db = (ofdm::subcarrier_offset_mhz(b) - offset_mhz).abs();
        da.total_cmp(&db)
    });
    ranked[..n.min(N_DATA)].to_vec()
}

pub fn build_mask(
    episode: &BtEpisode,
    policy: &ErasurePolicy,
    cfg: &BtConfig,
    n_sym: usize,
) -> Result<ErasureMask> {
    if episode.n_symbols() < n_sym {
        return Err(invalid!(
            "episode covers {} symbols, need {n_sym}",
            episode.n_symbols()
        ));
    }
    let mut mask = ErasureMask::empty(n_sym);
    if policy.n_erasures == 0 {
        return Ok(mask);
    }
    let mut cached: Option<(f64, Vec<i32>)> = None;
    for s in 0..n_sym {
        let Some(f_bt) = episode.hit_carrier_mhz(s) else {
            continue;
        };
        let offset = f_bt - cfg.wlan_center_mhz + policy.estimate_error_mhz;
        if cached.as_ref().is_none_or(|(o, _)| *o != offset) {
            cached = Some((offset, nearest_data_subcarriers(offset, policy.n_erasures)));
        }
        for &k in &cached.as_ref().expect("filled above").1 {
            mask.set(s, k);
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bluetooth::episode_with_timing;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_to_plus_one_mhz() {
        let mut got = nearest_data_subcarriers(1.0, 5);
        got.sort();
        assert_eq!(got, [1, 2, 3, 4, 5]);
    }

    #[test]
    fn nearest_to_dc_breaks_tie_low() {
        let mut got = nearest_data_subcarriers(0.0, 5);
        got.sort();
        assert_eq!(got, [-3, -2, -1, 1, 2]);
    }

    #[test]
    fn policy_bounds() {
        assert!(ErasurePolicy::new(48).is_ok());
        assert!(ErasurePolicy::new(49).is_err());
    }

    #[test]
    fn zero_erasures_give_empty_mask() {
        let cfg = BtConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ep = episode_with_timing(100.0, &[39], 18, &cfg, &mut rng).unwrap();
        assert!(ep.collided());
        let mask = build_mask(&ep, &ErasurePolicy::new(0).unwrap(), &cfg, 18).unwrap();
        assert_eq!(mask, ErasureMask::empty(18));
    }

    #[test]
    fn localization_over_all_in_band_offsets() {
        let cfg = BtConfig::default();
        for ch in cfg.in_band_channels() {
            let offset = BtConfig::channel_mhz(ch) - cfg.wlan_center_mhz;
            let nearest = *DATA_SUBCARRIERS
                .iter()
                .min_by(|&&a, &&b| {
                    let da = (ofdm::subcarrier_offset_mhz(a) - offset).abs();
                    let db = (ofdm::subcarrier_offset_mhz(b) - offset).abs();
                    da.total_cmp(&db)
                })
                .unwrap();
            for e in 1..=10 {
                assert!(nearest_data_subcarriers(offset, e).contains(&nearest));
            }
        }
    }

    #[test]
    fn cardinality_and_placement_on_random_episodes() {
        let cfg = BtConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n_sym = rng.random_range(1..40);
            let e = rng.random_range(0..=48);
            let ep = crate::bluetooth::draw_episode(4.0 * n_sym as f64, n_sym, &cfg, &mut rng).unwrap();
            let mask = build_mask(&ep, &ErasurePolicy::new(e).unwrap(), &cfg, n_sym).unwrap();
            for s in 0..n_sym {
                let expect = if ep.per_symbol[s].overlap_fraction > 0.0 { e } else { 0 };
                assert_eq!(mask.count(s), expect);
                for k in mask.erased(s) {
                    assert!(DATA_SUBCARRIERS.contains(&k));
                }
            }
        }
    }
}
