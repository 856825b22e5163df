//! Modulation formats: alphabets, bit mappings and hard decisions.
//!
//! Conventions fixed here and relied on by the simulator and the closed
//! forms:
//!
//! * QPSK is Gray mapped: `00 → (1+i)/√2`, `01 → (−1+i)/√2`,
//!   `11 → (−1−i)/√2`, `10 → (1−i)/√2` (first bit selects the sign of the
//!   imaginary part, second bit the sign of the real part).
//! * BPSK maps `0 → +A`, `1 → −A`.
//! * PPM slot indices use natural binary, most significant bit first.
//! * PPM+QPSK takes the slot index from the first `log2 M` bits and the QPSK
//!   phase of the pulse from the last two.
//! * 3-PSK carries 3 bits on an ordered pair of symbols, using 8 of the 9
//!   pairs (see [`THREE_PSK_BLOCK_MAP`]).

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported PPM order.
pub const MAX_PPM_ORDER: u32 = 1024;

/// 3-PSK block map: entry `v` is the symbol pair carrying the big-endian
/// bit triple `v`. Symbol `c` is the point at angle `2πc/3`. The pair
/// `(2, 2)` is never sent.
pub const THREE_PSK_BLOCK_MAP: [(u8, u8); 8] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (1, 2),
    (2, 0),
    (2, 1),
    (1, 0),
    (1, 1),
];

/// A PPM order: a power of two in `2..=1024`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PpmOrder(u32);

impl PpmOrder {
    pub fn new(m: u32) -> Result<Self> {
        if !(2..=MAX_PPM_ORDER).contains(&m) || !m.is_power_of_two() {
            return Err(invalid(
                "M",
                format!("PPM order must be a power of two in 2..={MAX_PPM_ORDER}, got {m}"),
            ));
        }
        Ok(Self(m))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn log2(self) -> u32 {
        self.0.trailing_zeros()
    }
}

impl TryFrom<u32> for PpmOrder {
    type Error = Error;

    fn try_from(m: u32) -> Result<Self> {
        Self::new(m)
    }
}

impl From<PpmOrder> for u32 {
    fn from(m: PpmOrder) -> u32 {
        m.0
    }
}

/// Modulation format identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Format {
    Bpsk,
    Qpsk,
    ThreePsk,
    Ppm(PpmOrder),
    PpmQpsk(PpmOrder),
}

impl Format {
    pub fn ppm(m: u32) -> Result<Self> {
        Ok(Format::Ppm(PpmOrder::new(m)?))
    }

    pub fn ppm_qpsk(m: u32) -> Result<Self> {
        Ok(Format::PpmQpsk(PpmOrder::new(m)?))
    }

    /// Information bits carried per symbol (`N`).
    pub fn bits_per_symbol(&self) -> f64 {
        match *self {
            Format::Bpsk => 1.0,
            Format::Qpsk => 2.0,
            Format::ThreePsk => 1.5,
            Format::Ppm(m) => f64::from(m.log2()),
            Format::PpmQpsk(m) => f64::from(m.log2() + 2),
        }
    }

    /// Time slots occupied by one symbol.
    pub fn slots_per_symbol(&self) -> usize {
        match *self {
            Format::Bpsk | Format::Qpsk | Format::ThreePsk => 1,
            Format::Ppm(m) | Format::PpmQpsk(m) => m.get() as usize,
        }
    }

    /// PPM order for the PPM kinds.
    pub fn order(&self) -> Option<PpmOrder> {
        match *self {
            Format::Ppm(m) | Format::PpmQpsk(m) => Some(m),
            _ => None,
        }
    }

    /// Smallest unit of bits the format maps atomically.
    pub fn bits_per_block(&self) -> usize {
        match *self {
            Format::Bpsk => 1,
            Format::Qpsk => 2,
            Format::ThreePsk => 3,
            Format::Ppm(m) => m.log2() as usize,
            Format::PpmQpsk(m) => m.log2() as usize + 2,
        }
    }

    /// Symbols needed to carry one bit block.
    pub fn symbols_per_block(&self) -> usize {
        match self {
            Format::ThreePsk => 2,
            _ => 1,
        }
    }

    /// Information rate per unit of slot bandwidth, bits/(s·Hz), including
    /// code-rate overhead.
    pub fn spectral_efficiency(&self, code_rate: f64) -> f64 {
        code_rate * self.bits_per_symbol() / self.slots_per_symbol() as f64
    }

    /// Maps a whole bit sequence onto frames of amplitude `amplitude`.
    pub fn modulate(&self, bits: &[bool], amplitude: f64) -> Result<Vec<SymbolFrame>> {
        let block = self.bits_per_block();
        if !bits.len().is_multiple_of(block) {
            return Err(Error::BitLength {
                len: bits.len(),
                granularity: block,
            });
        }
        let slots = self.slots_per_symbol();
        let per_block = self.symbols_per_block() * slots;
        let mut buf = vec![Complex64::new(0.0, 0.0); per_block];
        let mut frames = Vec::with_capacity(bits.len() / block * self.symbols_per_block());
        for chunk in bits.chunks(block) {
            let occupied = self.modulate_block(chunk, amplitude, &mut buf);
            for s in buf.chunks(slots) {
                frames.push(SymbolFrame {
                    slots: s.to_vec(),
                    occupied_slot: occupied.map(|_| occupied_slot_of(s)),
                });
            }
        }
        Ok(frames)
    }

    /// Hard decision on a sequence of received frames. The frame count must
    /// be a multiple of [`Format::symbols_per_block`].
    pub fn hard_decide<R: Rng + ?Sized>(
        &self,
        frames: &[SymbolFrame],
        metric: Metric,
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        let slots = self.slots_per_symbol();
        let spb = self.symbols_per_block();
        if !frames.len().is_multiple_of(spb) {
            return Err(invalid(
                "frames",
                format!("{} frames do not form whole blocks of {spb}", frames.len()),
            ));
        }
        let mut buf = Vec::with_capacity(spb * slots);
        let mut bits = vec![false; frames.len() / spb * self.bits_per_block()];
        for (blk, out) in frames
            .chunks(spb)
            .zip(bits.chunks_mut(self.bits_per_block()))
        {
            buf.clear();
            for f in blk {
                if f.slots.len() != slots {
                    return Err(Error::FrameShape {
                        expected: slots,
                        got: f.slots.len(),
                    });
                }
                buf.extend_from_slice(&f.slots);
            }
            self.decide_block(&buf, metric, rng, out);
        }
        Ok(bits)
    }

    /// Writes the noiseless samples of one bit block into `out`
    /// (`symbols_per_block × slots_per_symbol` entries). Returns the occupied
    /// slot for PPM kinds.
    pub(crate) fn modulate_block(
        &self,
        bits: &[bool],
        amplitude: f64,
        out: &mut [Complex64],
    ) -> Option<usize> {
        debug_assert_eq!(bits.len(), self.bits_per_block());
        match *self {
            Format::Bpsk => {
                out[0] = Complex64::new(if bits[0] { -amplitude } else { amplitude }, 0.0);
                None
            }
            Format::Qpsk => {
                out[0] = amplitude * gray_qpsk(bits[0], bits[1]);
                None
            }
            Format::ThreePsk => {
                let (a, b) = THREE_PSK_BLOCK_MAP[bits_to_index(bits)];
                out[0] = amplitude * three_psk_point(a);
                out[1] = amplitude * three_psk_point(b);
                None
            }
            Format::Ppm(_) => {
                out.fill(Complex64::new(0.0, 0.0));
                let slot = bits_to_index(bits);
                out[slot] = Complex64::new(amplitude, 0.0);
                Some(slot)
            }
            Format::PpmQpsk(m) => {
                out.fill(Complex64::new(0.0, 0.0));
                let k = m.log2() as usize;
                let slot = bits_to_index(&bits[..k]);
                out[slot] = amplitude * gray_qpsk(bits[k], bits[k + 1]);
                Some(slot)
            }
        }
    }

    /// Decides one bit block from its received samples.
    pub(crate) fn decide_block<R: Rng + ?Sized>(
        &self,
        samples: &[Complex64],
        metric: Metric,
        rng: &mut R,
        out: &mut [bool],
    ) {
        match *self {
            Format::Bpsk => out[0] = samples[0].re < 0.0,
            Format::Qpsk => {
                let (b0, b1) = gray_qpsk_decide(samples[0]);
                out[0] = b0;
                out[1] = b1;
            }
            Format::ThreePsk => {
                let v = three_psk_decide(samples[0], samples[1]);
                index_to_bits(v, out);
            }
            Format::Ppm(_) => {
                let slot = match metric {
                    Metric::Envelope => {
                        argmax_random_tie(samples.iter().map(|r| r.norm_sqr()), rng)
                    }
                    Metric::CoherentReal => argmax_random_tie(samples.iter().map(|r| r.re), rng),
                };
                index_to_bits(slot, out);
            }
            Format::PpmQpsk(m) => {
                let k = m.log2() as usize;
                // With a known carrier phase the best QPSK projection of a
                // slot is (|Re| + |Im|)/√2.
                let slot = match metric {
                    Metric::Envelope => {
                        argmax_random_tie(samples.iter().map(|r| r.norm_sqr()), rng)
                    }
                    Metric::CoherentReal => {
                        argmax_random_tie(samples.iter().map(|r| r.re.abs() + r.im.abs()), rng)
                    }
                };
                index_to_bits(slot, &mut out[..k]);
                let (b0, b1) = gray_qpsk_decide(samples[slot]);
                out[k] = b0;
                out[k + 1] = b1;
            }
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Bpsk => f.write_str("bpsk"),
            Format::Qpsk => f.write_str("qpsk"),
            Format::ThreePsk => f.write_str("3psk"),
            Format::Ppm(m) => write!(f, "ppm:{}", m.get()),
            Format::PpmQpsk(m) => write!(f, "ppmqpsk:{}", m.get()),
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let order = |rest: &str| -> Result<PpmOrder> {
            let m: u32 = rest.parse().map_err(|_| Error::InvalidFormat(s.clone()))?;
            PpmOrder::new(m).map_err(|_| Error::InvalidFormat(s.clone()))
        };
        match s.as_str() {
            "bpsk" => Ok(Format::Bpsk),
            "qpsk" => Ok(Format::Qpsk),
            "3psk" => Ok(Format::ThreePsk),
            _ => {
                if let Some(rest) = s.strip_prefix("ppmqpsk:") {
                    Ok(Format::PpmQpsk(order(rest)?))
                } else if let Some(rest) = s.strip_prefix("ppm:") {
                    Ok(Format::Ppm(order(rest)?))
                } else {
                    Err(Error::InvalidFormat(s))
                }
            }
        }
    }
}

impl TryFrom<String> for Format {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Format> for String {
    fn from(f: Format) -> String {
        f.to_string()
    }
}

/// PPM slot decision metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Maximum envelope, phase agnostic.
    #[default]
    Envelope,
    /// Maximum real part under a known carrier phase.
    CoherentReal,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Envelope => "envelope",
            Metric::CoherentReal => "coherent",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "envelope" => Ok(Metric::Envelope),
            "coherent" | "coherent_real" => Ok(Metric::CoherentReal),
            other => Err(invalid(
                "metric",
                format!("expected `envelope` or `coherent`, got `{other}`"),
            )),
        }
    }
}

/// Received (or transmitted) samples of one symbol, one per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub slots: Vec<Complex64>,
    /// Pulse position for PPM kinds.
    pub occupied_slot: Option<usize>,
}

impl SymbolFrame {
    pub fn energy(&self) -> f64 {
        self.slots.iter().map(|s| s.norm_sqr()).sum()
    }
}

fn occupied_slot_of(slots: &[Complex64]) -> usize {
    slots.iter().position(|s| s.norm_sqr() > 0.0).unwrap_or(0)
}

pub(crate) fn gray_qpsk(b0: bool, b1: bool) -> Complex64 {
    let re = if b1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    let im = if b0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

fn gray_qpsk_decide(r: Complex64) -> (bool, bool) {
    (r.im < 0.0, r.re < 0.0)
}

pub(crate) fn three_psk_point(c: u8) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * f64::from(c) / 3.0)
}

/// Absolute angle between `r` and 3-PSK point `c`, in `[0, π]`.
fn angular_distance(r: Complex64, c: u8) -> f64 {
    (r * three_psk_point(c).conj()).arg().abs()
}

pub(crate) fn three_psk_nearest(r: Complex64) -> u8 {
    (0..3u8)
        .map(|c| (c, (r * three_psk_point(c).conj()).re))
        .fold((0, f64::NEG_INFINITY), |best, (c, v)| {
            if v > best.1 {
                (c, v)
            } else {
                best
            }
        })
        .0
}

/// Per-symbol nearest-point decisions; the unused pair `(2, 2)` falls back to
/// the used pair with the smallest total angular distance.
fn three_psk_decide(r0: Complex64, r1: Complex64) -> usize {
    let pair = (three_psk_nearest(r0), three_psk_nearest(r1));
    if let Some(v) = THREE_PSK_BLOCK_MAP.iter().position(|&p| p == pair) {
        return v;
    }
    THREE_PSK_BLOCK_MAP
        .iter()
        .enumerate()
        .map(|(v, &(a, b))| (v, angular_distance(r0, a) + angular_distance(r1, b)))
        .fold(
            (0, f64::INFINITY),
            |best, (v, d)| if d < best.1 { (v, d) } else { best },
        )
        .0
}

fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

fn index_to_bits(v: usize, out: &mut [bool]) {
    let n = out.len();
    for (i, b) in out.iter_mut().enumerate() {
        *b = (v >> (n - 1 - i)) & 1 == 1;
    }
}

/// Index of the largest value; equal maxima are resolved uniformly at random.
/// The RNG is only consumed when a tie occurs.
pub(crate) fn argmax_random_tie<T, I, R>(values: I, rng: &mut R) -> usize
where
    T: PartialOrd,
    I: IntoIterator<Item = T>,
    R: Rng + ?Sized,
{
    let mut best: Option<T> = None;
    let mut best_idx = 0;
    let mut ties = 0u32;
    for (i, v) in values.into_iter().enumerate() {
        match &best {
            Some(b) if v < *b => {}
            Some(b) if v == *b => {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best_idx = i;
                }
            }
            _ => {
                best = Some(v);
                best_idx = i;
                ties = 1;
            }
        }
    }
    best_idx
}
