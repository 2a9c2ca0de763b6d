//! Bit-level FEC chain of the 802.11 OFDM PHY.
//!
//! Rate-1/2 mother code with constraint length 7 and generators 133/171
//! (octal), puncturing to 2/3 and 3/4, the two-step block interleaver and a
//! full-traceback soft-decision Viterbi decoder.
//!
//! Soft values follow the LLR convention: positive favours bit 0. A
//! [`SoftBit`] flagged as erased contributes nothing to any path metric,
//! which is how both punctured positions and interference erasures reach
//! the decoder.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

pub const CONSTRAINT_LENGTH: usize = 7;
pub const TAIL_BITS: usize = CONSTRAINT_LENGTH - 1;
const N_STATES: usize = 1 << TAIL_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeRate {
    Half,
    TwoThirds,
    ThreeQuarters,
}

impl CodeRate {
    /// Keep/drop mask over the serialized A0 B0 A1 B1 ... coded stream.
    pub fn puncture_mask(self) -> &'static [bool] {
        match self {
            CodeRate::Half => &[true, true],
            CodeRate::TwoThirds => &[true, true, true, false],
            CodeRate::ThreeQuarters => &[true, true, true, false, false, true],
        }
    }

    pub fn period(self) -> usize {
        self.puncture_mask().len()
    }

    /// Coded bits surviving one mask period.
    pub fn kept_per_period(self) -> usize {
        self.puncture_mask().iter().filter(|&&k| k).count()
    }

    /// (numerator, denominator) of the code rate.
    pub fn ratio(self) -> (usize, usize) {
        match self {
            CodeRate::Half => (1, 2),
            CodeRate::TwoThirds => (2, 3),
            CodeRate::ThreeQuarters => (3, 4),
        }
    }
}

/// A decoder input position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SoftBit {
    pub value: f64,
    pub erased: bool,
}

impl SoftBit {
    pub const ERASED: SoftBit = SoftBit {
        value: 0.0,
        erased: true,
    };

    pub fn new(value: f64) -> Self {
        SoftBit {
            value,
            erased: false,
        }
    }

    /// Noiseless soft value for a hard bit: +1 for 0, -1 for 1.
    pub fn from_bit(bit: u8) -> Self {
        SoftBit::new(if bit == 0 { 1.0 } else { -1.0 })
    }

    #[inline]
    pub fn metric(self) -> f64 {
        if self.erased {
            0.0
        } else {
            self.value
        }
    }

    pub fn hard(self) -> u8 {
        u8::from(self.metric() < 0.0)
    }
}

/// Rate-1/2 feed-forward convolutional code with constraint length 7.
///
/// Generator bit 6 taps the current input, bit 0 the input six steps back,
/// so the octal constants read exactly as in the standard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvCode {
    generators: [u8; 2],
}

impl Default for ConvCode {
    fn default() -> Self {
        Self::IEEE80211
    }
}

impl ConvCode {
    pub const IEEE80211: ConvCode = ConvCode {
        generators: [0o133, 0o171],
    };

    pub fn new(g0: u8, g1: u8) -> Result<Self> {
        for g in [g0, g1] {
            if g >= 1 << CONSTRAINT_LENGTH || g & 0b100_0001 != 0b100_0001 {
                return Err(invalid!(
                    "generator {g:o} must have 7 taps with first and last set"
                ));
            }
        }
        Ok(ConvCode {
            generators: [g0, g1],
        })
    }

    pub fn generators(&self) -> [u8; 2] {
        self.generators
    }

    /// Output pair for a 7-bit register (current input in bit 6).
    #[inline]
    fn outputs(&self, register: u8) -> (u8, u8) {
        (
            ((register & self.generators[0]).count_ones() & 1) as u8,
            ((register & self.generators[1]).count_ones() & 1) as u8,
        )
    }

    /// Encodes from the all-zero state. The caller appends the tail.
    pub fn encode(&self, bits: &[u8]) -> Vec<u8> {
        let mut state = 0u8;
        let mut out = Vec::with_capacity(bits.len() * 2);
        for &b in bits {
            let register = ((b & 1) << TAIL_BITS) | state;
            let (a, c) = self.outputs(register);
            out.push(a);
            out.push(c);
            state = register >> 1;
        }
        out
    }

    /// Maximum-metric path through the 64-state trellis, starting and
    /// ending in state 0. Returns the `len/2 - 6` bits preceding the tail.
    ///
    /// On equal metrics the predecessor with the lower state index
    /// survives, so an all-erased input decodes to all zeros.
    pub fn decode(&self, soft: &[SoftBit]) -> Result<Vec<u8>> {
        if !soft.len().is_multiple_of(2) {
            return Err(invalid!("odd soft input length {}", soft.len()));
        }
        let steps = soft.len() / 2;
        if steps < TAIL_BITS {
            return Err(invalid!("{steps} trellis steps cannot hold the tail"));
        }

        // Branch label (2 bits, first output in bit 1) for entering `next`
        // from its lower (c = 0) or upper (c = 1) predecessor.
        let mut labels = [[0u8; 2]; N_STATES];
        for (next, label) in labels.iter_mut().enumerate() {
            for c in 0..2 {
                let prev = ((next << 1) & (N_STATES - 1)) | c;
                let register = (((next >> 5) as u8) << TAIL_BITS) | prev as u8;
                let (a, b) = self.outputs(register);
                label[c] = (a << 1) | b;
            }
        }

        let mut metric = [f64::NEG_INFINITY; N_STATES];
        metric[0] = 0.0;
        let mut next_metric = [0.0f64; N_STATES];
        let mut decisions = vec![0u64; steps];

        for (step, pair) in soft.chunks_exact(2).enumerate() {
            let (v0, v1) = (pair[0].metric(), pair[1].metric());
            let branch = [v0 + v1, v0 - v1, -v0 + v1, -v0 - v1];
            let mut chosen = 0u64;
            for next in 0..N_STATES {
                let p0 = (next << 1) & (N_STATES - 1);
                let m0 = metric[p0] + branch[labels[next][0] as usize];
                let m1 = metric[p0 | 1] + branch[labels[next][1] as usize];
                if m1 > m0 {
                    next_metric[next] = m1;
                    chosen |= 1 << next;
                } else {
                    next_metric[next] = m0;
                }
            }
            decisions[step] = chosen;
            metric = next_metric;
        }

        let mut bits = vec![0u8; steps];
        let mut state = 0usize;
        for step in (0..steps).rev() {
            bits[step] = (state >> 5) as u8;
            let c = ((decisions[step] >> state) & 1) as usize;
            state = ((state << 1) & (N_STATES - 1)) | c;
        }
        bits.truncate(steps - TAIL_BITS);
        Ok(bits)
    }
}

/// Encodes with the standard 133/171 code.
pub fn conv_encode(bits: &[u8]) -> Vec<u8> {
    ConvCode::IEEE80211.encode(bits)
}

/// Decodes with the standard 133/171 code.
pub fn viterbi_decode(soft: &[SoftBit]) -> Result<Vec<u8>> {
    ConvCode::IEEE80211.decode(soft)
}

/// Sum over non-erased positions of the sign-matched soft values: the
/// quantity the decoder maximizes.
pub fn path_metric(codeword: &[u8], soft: &[SoftBit]) -> f64 {
    codeword
        .iter()
        .zip(soft)
        .map(|(&c, s)| if c == 0 { s.metric() } else { -s.metric() })
        .sum()
}

pub fn puncture<T: Copy>(coded: &[T], rate: CodeRate) -> Result<Vec<T>> {
    let mask = rate.puncture_mask();
    if !coded.len().is_multiple_of(mask.len()) {
        return Err(invalid!(
            "coded length {} is not a multiple of the puncture period {}",
            coded.len(),
            mask.len()
        ));
    }
    Ok(coded
        .iter()
        .zip(mask.iter().cycle())
        .filter_map(|(&c, &keep)| keep.then_some(c))
        .collect())
}

/// Reinserts punctured positions as erasures.
pub fn depuncture(soft: &[SoftBit], rate: CodeRate) -> Result<Vec<SoftBit>> {
    let mask = rate.puncture_mask();
    let kept = rate.kept_per_period();
    if !soft.len().is_multiple_of(kept) {
        return Err(invalid!(
            "{} soft bits do not fill whole puncture periods of {kept}",
            soft.len()
        ));
    }
    let mut out = Vec::with_capacity(soft.len() / kept * mask.len());
    let mut input = soft.iter();
    for _ in 0..soft.len() / kept {
        for &keep in mask {
            out.push(if keep {
                *input.next().expect("length checked")
            } else {
                SoftBit::ERASED
            });
        }
    }
    Ok(out)
}

/// The 802.11 block interleaver for one OFDM symbol.
#[derive(Debug, Clone)]
pub struct Interleaver {
    /// `positions[k]` is where input bit `k` lands.
    positions: Vec<u16>,
}

impl Interleaver {
    pub fn new(n_cbps: usize, n_bpsc: usize) -> Result<Self> {
        if !matches!(n_bpsc, 1 | 2 | 4 | 6) || n_cbps != 48 * n_bpsc {
            return Err(invalid!(
                "unsupported interleaver geometry n_cbps={n_cbps}, n_bpsc={n_bpsc}"
            ));
        }
        let s = (n_bpsc / 2).max(1);
        let positions = (0..n_cbps)
            .map(|k| {
                let i = (n_cbps / 16) * (k % 16) + k / 16;
                let j = s * (i / s) + (i + n_cbps - (16 * i / n_cbps)) % s;
                j as u16
            })
            .collect();
        Ok(Interleaver { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, k: usize) -> usize {
        self.positions[k] as usize
    }

    pub fn interleave<T: Copy + Default>(&self, block: &[T]) -> Result<Vec<T>> {
        self.check(block.len())?;
        let mut out = vec![T::default(); block.len()];
        for (k, &v) in block.iter().enumerate() {
            out[self.positions[k] as usize] = v;
        }
        Ok(out)
    }

    pub fn deinterleave<T: Copy + Default>(&self, block: &[T]) -> Result<Vec<T>> {
        self.check(block.len())?;
        Ok(self.positions.iter().map(|&j| block[j as usize]).collect())
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.positions.len() {
            return Err(invalid!(
                "interleaver block of {len} bits, expected {}",
                self.positions.len()
            ));
        }
        Ok(())
    }
}

pub fn interleave(bits: &[u8], n_cbps: usize, n_bpsc: usize) -> Result<Vec<u8>> {
    Interleaver::new(n_cbps, n_bpsc)?.interleave(bits)
}

pub fn deinterleave(soft: &[SoftBit], n_cbps: usize, n_bpsc: usize) -> Result<Vec<SoftBit>> {
    Interleaver::new(n_cbps, n_bpsc)?.deinterleave(soft)
}
