//! Rate table, constellations and the frequency-domain OFDM grid.
//!
//! The WLAN signal never leaves the frequency domain: a packet is a list of
//! OFDM symbols, each holding 64 complex subcarrier values indexed by
//! `k = -32..=31`. Data ride on the 48 standard data subcarriers, pilots
//! carry a fixed +1 and the 12 nulls stay at zero.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_complex::Complex64;
use rand::Rng;

// Float supplies f64 math without std; test builds link std and shadow it.
#[allow(unused_imports)]
use num_traits::Float;

use crate::codec::{self, CodeRate, Interleaver, SoftBit};
use crate::erasure::ErasureMask;
use crate::error::{invalid, Error, Result};

pub const N_SUBCARRIERS: usize = 64;
pub const N_DATA: usize = 48;
pub const SAMPLE_RATE_MHZ: f64 = 20.0;
pub const SUBCARRIER_SPACING_MHZ: f64 = SAMPLE_RATE_MHZ / N_SUBCARRIERS as f64;
pub const SYMBOL_US: f64 = 4.0;
pub const SERVICE_BITS: usize = 16;
/// Highest occupied subcarrier index; the occupied band is ±26 subcarriers.
pub const EDGE_SUBCARRIER: i32 = 26;
pub const OCCUPIED_BANDWIDTH_MHZ: f64 = 52.0 * SUBCARRIER_SPACING_MHZ;
pub const PILOT_SUBCARRIERS: [i32; 4] = [-21, -7, 7, 21];

/// The 48 data subcarriers in ascending order, which is also the order in
/// which coded bits fill a symbol.
pub const DATA_SUBCARRIERS: [i32; N_DATA] = {
    let mut out = [0i32; N_DATA];
    let mut n = 0;
    let mut k = -EDGE_SUBCARRIER;
    while k <= EDGE_SUBCARRIER {
        if k != 0 && k != -21 && k != -7 && k != 7 && k != 21 {
            out[n] = k;
            n += 1;
        }
        k += 1;
    }
    out
};

/// Array slot of subcarrier `k` in a grid row.
#[inline]
pub fn slot(k: i32) -> usize {
    (k + 32) as usize
}

/// Subcarrier index stored in array slot `i`.
#[inline]
pub fn subcarrier(i: usize) -> i32 {
    i as i32 - 32
}

pub fn is_occupied(k: i32) -> bool {
    k != 0 && (-EDGE_SUBCARRIER..=EDGE_SUBCARRIER).contains(&k)
}

pub fn subcarrier_offset_mhz(k: i32) -> f64 {
    k as f64 * SUBCARRIER_SPACING_MHZ
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    /// Bits carried on each of the I and Q axes (BPSK uses I only).
    fn axis_bits(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            m => m.bits_per_symbol() / 2,
        }
    }

    /// Axis amplitude indexed by the axis label (first bit most significant),
    /// before normalization. Labels follow the Gray tables; for the one-bit
    /// axis bit 0 maps to +1.
    fn axis_levels(self) -> &'static [f64] {
        match self {
            Modulation::Bpsk | Modulation::Qpsk => &[1.0, -1.0],
            Modulation::Qam16 => &[-3.0, -1.0, 3.0, 1.0],
            Modulation::Qam64 => &[-7.0, -5.0, -1.0, -3.0, 7.0, 5.0, 1.0, 3.0],
        }
    }

    /// Scale giving unit average symbol energy.
    pub fn normalization(self) -> f64 {
        match self {
            Modulation::Bpsk => 1.0,
            Modulation::Qpsk => 1.0 / 2.0.sqrt(),
            Modulation::Qam16 => 1.0 / 10.0.sqrt(),
            Modulation::Qam64 => 1.0 / 42.0.sqrt(),
        }
    }

    /// Constellation point for the `bits_per_symbol` bits in `bits`.
    pub fn map(self, bits: &[u8]) -> Complex64 {
        let m = self.axis_bits();
        let label = |b: &[u8]| b.iter().fold(0usize, |acc, &x| (acc << 1) | (x & 1) as usize);
        let levels = self.axis_levels();
        let i = levels[label(&bits[..m])];
        let q = match self {
            Modulation::Bpsk => 0.0,
            _ => levels[label(&bits[m..2 * m])],
        };
        Complex64::new(i, q) * self.normalization()
    }

    /// Max-log LLRs for the bits of an equalized point `y`, appended to `out`.
    /// `inv_noise` is `|h|^2 / N0`.
    fn demap(self, y: Complex64, inv_noise: f64, out: &mut Vec<SoftBit>) {
        let m = self.axis_bits();
        let scale = self.normalization();
        let levels = self.axis_levels();
        let axes: &[f64] = match self {
            Modulation::Bpsk => &[y.re],
            _ => &[y.re, y.im],
        };
        for &v in axes {
            for bit in 0..m {
                let shift = m - 1 - bit;
                let mut best = [f64::INFINITY; 2];
                for (label, &a) in levels.iter().enumerate() {
                    let d = v - a * scale;
                    let b = (label >> shift) & 1;
                    best[b] = best[b].min(d * d);
                }
                out.push(SoftBit::new((best[1] - best[0]) * inv_noise));
            }
        }
    }
}

/// Constants of one 802.11g OFDM rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeParams {
    pub rate_mbps: u32,
    pub modulation: Modulation,
    pub code_rate: CodeRate,
    pub n_bpsc: usize,
    pub n_cbps: usize,
    pub n_dbps: usize,
}

impl ModeParams {
    const fn new(rate_mbps: u32, modulation: Modulation, code_rate: CodeRate, n_bpsc: usize) -> Self {
        let n_cbps = N_DATA * n_bpsc;
        let n_dbps = match code_rate {
            CodeRate::Half => n_cbps / 2,
            CodeRate::TwoThirds => n_cbps * 2 / 3,
            CodeRate::ThreeQuarters => n_cbps * 3 / 4,
        };
        ModeParams {
            rate_mbps,
            modulation,
            code_rate,
            n_bpsc,
            n_cbps,
            n_dbps,
        }
    }

    pub const ALL: [ModeParams; 5] = [
        ModeParams::new(12, Modulation::Qpsk, CodeRate::Half, 2),
        ModeParams::new(24, Modulation::Qam16, CodeRate::Half, 4),
        ModeParams::new(36, Modulation::Qam16, CodeRate::ThreeQuarters, 4),
        ModeParams::new(48, Modulation::Qam64, CodeRate::TwoThirds, 6),
        ModeParams::new(54, Modulation::Qam64, CodeRate::ThreeQuarters, 6),
    ];

    pub fn from_rate(rate_mbps: u32) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.rate_mbps == rate_mbps)
            .ok_or_else(|| invalid!("unsupported rate {rate_mbps} Mb/s"))
    }

    pub fn n_symbols(&self, payload_octets: usize) -> usize {
        (SERVICE_BITS + 8 * payload_octets + codec::TAIL_BITS).div_ceil(self.n_dbps)
    }

    pub fn interleaver(&self) -> Interleaver {
        Interleaver::new(self.n_cbps, self.n_bpsc).expect("mode table geometry is valid")
    }
}

/// Per-symbol rows of 64 subcarrier values.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierGrid {
    pub symbols: Vec<[Complex64; N_SUBCARRIERS]>,
}

impl SubcarrierGrid {
    pub fn zeros(n_sym: usize) -> Self {
        SubcarrierGrid {
            symbols: vec![[Complex64::new(0.0, 0.0); N_SUBCARRIERS]; n_sym],
        }
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn cell(&self, symbol: usize, k: i32) -> Complex64 {
        self.symbols[symbol][slot(k)]
    }

    /// Multiplies every cell by the per-subcarrier gain (slot order).
    pub fn apply_gains(&mut self, gains: &[Complex64; N_SUBCARRIERS]) {
        for row in &mut self.symbols {
            for (x, h) in row.iter_mut().zip(gains) {
                *x *= h;
            }
        }
    }
}

/// Maps coded bits (a whole number of symbols) onto the grid.
pub fn map_symbols(coded_bits: &[u8], mode: &ModeParams) -> Result<SubcarrierGrid> {
    if !coded_bits.len().is_multiple_of(mode.n_cbps) {
        return Err(invalid!(
            "{} coded bits is not a multiple of n_cbps={}",
            coded_bits.len(),
            mode.n_cbps
        ));
    }
    let n_sym = coded_bits.len() / mode.n_cbps;
    let mut grid = SubcarrierGrid::zeros(n_sym);
    for (row, bits) in grid.symbols.iter_mut().zip(coded_bits.chunks_exact(mode.n_cbps)) {
        for (&k, b) in DATA_SUBCARRIERS.iter().zip(bits.chunks_exact(mode.n_bpsc)) {
            row[slot(k)] = mode.modulation.map(b);
        }
        for &k in &PILOT_SUBCARRIERS {
            row[slot(k)] = Complex64::new(1.0, 0.0);
        }
    }
    Ok(grid)
}

/// How masked cells reach the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErasureStyle {
    /// Soft bits flagged as erased.
    #[default]
    Flag,
    /// Cell overwritten with 0+j0 and its bits forced to LLR 0 without the
    /// erased flag. Decodes identically to [`ErasureStyle::Flag`].
    ZeroSymbol,
}

/// Max-log soft demapping of every data cell, symbol by symbol in coded-bit
/// order (before deinterleaving).
pub fn demap_soft(
    grid: &SubcarrierGrid,
    gains: &[Complex64; N_SUBCARRIERS],
    noise_var: f64,
    mask: &ErasureMask,
    mode: &ModeParams,
) -> Result<Vec<SoftBit>> {
    demap_soft_with(grid, gains, noise_var, mask, mode, ErasureStyle::Flag)
}

pub fn demap_soft_with(
    grid: &SubcarrierGrid,
    gains: &[Complex64; N_SUBCARRIERS],
    noise_var: f64,
    mask: &ErasureMask,
    mode: &ModeParams,
    style: ErasureStyle,
) -> Result<Vec<SoftBit>> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(invalid!("noise variance must be positive, got {noise_var}"));
    }
    if mask.n_symbols() != grid.n_symbols() {
        return Err(invalid!(
            "mask covers {} symbols, grid has {}",
            mask.n_symbols(),
            grid.n_symbols()
        ));
    }
    let mut out = Vec::with_capacity(grid.n_symbols() * mode.n_cbps);
    for (s, row) in grid.symbols.iter().enumerate() {
        for &k in &DATA_SUBCARRIERS {
            if mask.is_erased(s, k) {
                let bit = match style {
                    ErasureStyle::Flag => SoftBit::ERASED,
                    ErasureStyle::ZeroSymbol => SoftBit::new(0.0),
                };
                out.extend(core::iter::repeat_n(bit, mode.n_bpsc));
                continue;
            }
            let h = gains[slot(k)];
            let power = h.norm_sqr();
            if power == 0.0 {
                return Err(Error::DegenerateChannel { subcarrier: k });
            }
            mode.modulation
                .demap(row[slot(k)] / h, power / noise_var, &mut out);
        }
    }
    Ok(out)
}

/// One assembled packet.
#[derive(Debug, Clone)]
pub struct Packet {
    pub mode: ModeParams,
    pub payload_octets: usize,
    /// SERVICE + payload + tail + pad, `n_sym * n_dbps` bits.
    pub info_bits: Vec<u8>,
    pub grid: SubcarrierGrid,
}

impl Packet {
    pub fn n_symbols(&self) -> usize {
        self.grid.n_symbols()
    }

    pub fn duration_us(&self) -> f64 {
        self.n_symbols() as f64 * SYMBOL_US
    }

    /// Range of payload bits inside `info_bits`.
    pub fn payload_range(&self) -> Range<usize> {
        SERVICE_BITS..SERVICE_BITS + 8 * self.payload_octets
    }
}

/// Builds a packet with uniformly random payload and runs it through
/// encoder, puncturer, interleaver and mapper.
pub fn assemble_packet<R: Rng + ?Sized>(
    payload_octets: usize,
    mode: &ModeParams,
    rng: &mut R,
) -> Result<Packet> {
    if payload_octets == 0 {
        return Err(invalid!("payload must hold at least one octet"));
    }
    let n_sym = mode.n_symbols(payload_octets);
    let mut info_bits = vec![0u8; n_sym * mode.n_dbps];
    for b in &mut info_bits[SERVICE_BITS..SERVICE_BITS + 8 * payload_octets] {
        *b = rng.random_range(0..2);
    }
    let coded = codec::puncture(&codec::conv_encode(&info_bits), mode.code_rate)?;
    let il = mode.interleaver();
    let mut interleaved = Vec::with_capacity(coded.len());
    for block in coded.chunks_exact(mode.n_cbps) {
        interleaved.extend(il.interleave(block)?);
    }
    let grid = map_symbols(&interleaved, mode)?;
    Ok(Packet {
        mode: *mode,
        payload_octets,
        info_bits,
        grid,
    })
}
