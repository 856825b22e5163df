//! Symbol-level Monte Carlo simulation.
//!
//! Work is split into batches of [`BATCH_FRAMES`] bit blocks. Batch `i`
//! draws everything (data bits, noise, tie breaks) from
//! [`seed_stream`]`(master_seed, i)`, and batch tallies are accumulated in
//! index order with the stopping rule checked after every batch. The result
//! is therefore a pure function of the configuration and the master seed,
//! whatever the number of worker threads.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::formats::{argmax_random_tie, Format, Metric, PpmOrder, THREE_PSK_BLOCK_MAP};

/// Bit blocks per batch (and per RNG stream).
pub const BATCH_FRAMES: u64 = 4096;

const Z95: f64 = 1.959_963_984_540_054;

/// Independent random stream `stream_index` of a master seed.
///
/// ChaCha's 64-bit stream id selects one of 2^64 non-overlapping keystreams
/// for the same key, so `(master_seed, i)` maps to a fixed sequence no matter
/// which thread consumes it.
pub fn seed_stream(master_seed: u64, stream_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub target_bit_errors: u64,
    pub max_symbols: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            target_bit_errors: 100,
            max_symbols: 100_000_000,
        }
    }
}

impl StoppingRule {
    pub fn new(target_bit_errors: u64, max_symbols: u64) -> Result<Self> {
        if target_bit_errors == 0 {
            return Err(invalid("target_bit_errors", "must be positive"));
        }
        if max_symbols == 0 {
            return Err(invalid("max_symbols", "must be positive"));
        }
        Ok(Self {
            target_bit_errors,
            max_symbols,
        })
    }
}

/// Channel family and operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ChannelConfig {
    /// Every slot observed as `r = s + n`, `E|n|² = 1`, symbol energy
    /// `snr_sym`.
    GaussianCoherent { snr_sym: f64 },
    /// Occupied slot count ~ Poisson(n_s + background), empty slots
    /// ~ Poisson(background).
    PoissonCounting {
        photons_per_symbol: f64,
        background_rate: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetErrors,
    MaxSymbols,
}

/// Error counts of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub bit_errors: u64,
    pub bits_simulated: u64,
    pub symbol_errors: u64,
    pub symbols_simulated: u64,
    pub ber: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub master_seed: u64,
    pub stopped_by: StopReason,
}

impl BerEstimate {
    fn from_counts(
        tally: Tally,
        fmt_bits: u64,
        fmt_symbols: u64,
        master_seed: u64,
        stopped_by: StopReason,
    ) -> Self {
        let bits = tally.blocks * fmt_bits;
        let (lo, hi) = wilson_interval(tally.bit_errors, bits);
        Self {
            bit_errors: tally.bit_errors,
            bits_simulated: bits,
            symbol_errors: tally.symbol_errors,
            symbols_simulated: tally.blocks * fmt_symbols,
            ber: tally.bit_errors as f64 / bits as f64,
            ci95_low: lo,
            ci95_high: hi,
            master_seed,
            stopped_by,
        }
    }

    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.symbols_simulated as f64
    }

    /// Binomial standard error of the BER estimate.
    pub fn ber_standard_error(&self) -> f64 {
        binomial_standard_error(self.ber, self.bits_simulated)
    }

    pub fn ser_standard_error(&self) -> f64 {
        binomial_standard_error(self.ser(), self.symbols_simulated)
    }

    pub fn ser_ci95(&self) -> (f64, f64) {
        wilson_interval(self.symbol_errors, self.symbols_simulated)
    }

    pub fn reached_target(&self) -> bool {
        self.stopped_by == StopReason::TargetErrors
    }
}

fn binomial_standard_error(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Wilson score interval at 95% confidence for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if p == 1.0 {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    blocks: u64,
    bit_errors: u64,
    symbol_errors: u64,
}

/// Monte Carlo driver: stopping rule, master seed and worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub rule: StoppingRule,
    pub master_seed: u64,
    /// Worker threads; `0` uses the global rayon pool.
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(rule: StoppingRule, master_seed: u64) -> Self {
        Self {
            rule,
            master_seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    /// Coherent detection of `fmt` in circular Gaussian noise.
    pub fn simulate_coherent(
        &self,
        fmt: Format,
        snr_sym: f64,
        metric: Metric,
    ) -> Result<BerEstimate> {
        if !(snr_sym >= 0.0 && snr_sym.is_finite()) {
            return Err(invalid(
                "snr_sym",
                format!("must be finite and non-negative, got {snr_sym}"),
            ));
        }
        self.simulate_coherent_with_noise(
            fmt,
            snr_sym.sqrt(),
            std::f64::consts::FRAC_1_SQRT_2,
            metric,
        )
    }

    /// Like [`MonteCarlo::simulate_coherent`] with an explicit amplitude and
    /// per-quadrature noise standard deviation.
    pub(crate) fn simulate_coherent_with_noise(
        &self,
        fmt: Format,
        amplitude: f64,
        sigma: f64,
        metric: Metric,
    ) -> Result<BerEstimate> {
        let kernel = CoherentKernel {
            fmt,
            amplitude,
            sigma,
            metric,
        };
        self.run(fmt, |rng, blocks| kernel.run_batch(rng, blocks))
    }

    /// Photon-counting detection of `M`-PPM.
    pub fn simulate_photon_counting_ppm(
        &self,
        m: PpmOrder,
        photons_per_symbol: f64,
        background_rate: f64,
    ) -> Result<BerEstimate> {
        if !(photons_per_symbol >= 0.0 && photons_per_symbol.is_finite()) {
            return Err(invalid(
                "photons_per_symbol",
                format!("must be finite and non-negative, got {photons_per_symbol}"),
            ));
        }
        if !(background_rate >= 0.0 && background_rate.is_finite()) {
            return Err(invalid(
                "background_rate",
                format!("must be finite and non-negative, got {background_rate}"),
            ));
        }
        let kernel = CountingKernel {
            m,
            signal: poisson(photons_per_symbol + background_rate),
            background: poisson(background_rate),
        };
        self.run(Format::Ppm(m), |rng, blocks| kernel.run_batch(rng, blocks))
    }

    pub fn simulate(
        &self,
        fmt: Format,
        channel: ChannelConfig,
        metric: Metric,
    ) -> Result<BerEstimate> {
        match channel {
            ChannelConfig::GaussianCoherent { snr_sym } => {
                self.simulate_coherent(fmt, snr_sym, metric)
            }
            ChannelConfig::PoissonCounting {
                photons_per_symbol,
                background_rate,
            } => match fmt {
                Format::Ppm(m) => {
                    self.simulate_photon_counting_ppm(m, photons_per_symbol, background_rate)
                }
                other => Err(invalid(
                    "format",
                    format!("photon counting is only modelled for PPM, got {other}"),
                )),
            },
        }
    }

    fn run<F>(&self, fmt: Format, batch: F) -> Result<BerEstimate>
    where
        F: Fn(&mut ChaCha8Rng, u64) -> Tally + Sync,
    {
        let symbols_per_block = fmt.symbols_per_block() as u64;
        let bits_per_block = fmt.bits_per_block() as u64;
        let max_blocks = (self.rule.max_symbols / symbols_per_block).max(1);
        let n_batches = max_blocks.div_ceil(BATCH_FRAMES);
        let blocks_in = |i: u64| BATCH_FRAMES.min(max_blocks - i * BATCH_FRAMES);

        let pool = if self.workers > 0 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.workers)
                    .build()
                    .map_err(|e| invalid("workers", e.to_string()))?,
            )
        } else {
            None
        };
        let width = pool
            .as_ref()
            .map_or_else(rayon::current_num_threads, |p| p.current_num_threads())
            .max(1) as u64;

        let mut total = Tally::default();
        let mut next = 0u64;
        while next < n_batches {
            // Wider rounds once the error rate is known to be low.
            let round = (width
                * if total.bit_errors == 0 && next > 0 {
                    4
                } else {
                    1
                })
            .min(n_batches - next);
            let compute = || {
                (next..next + round)
                    .into_par_iter()
                    .map(|i| batch(&mut seed_stream(self.master_seed, i), blocks_in(i)))
                    .collect::<Vec<_>>()
            };
            let tallies = match &pool {
                Some(p) => p.install(compute),
                None => compute(),
            };
            for t in tallies {
                total.blocks += t.blocks;
                total.bit_errors += t.bit_errors;
                total.symbol_errors += t.symbol_errors;
                next += 1;
                if total.bit_errors >= self.rule.target_bit_errors {
                    return Ok(BerEstimate::from_counts(
                        total,
                        bits_per_block,
                        symbols_per_block,
                        self.master_seed,
                        StopReason::TargetErrors,
                    ));
                }
            }
        }
        Ok(BerEstimate::from_counts(
            total,
            bits_per_block,
            symbols_per_block,
            self.master_seed,
            StopReason::MaxSymbols,
        ))
    }
}

/// Coherent simulation with an explicit stopping rule and seed.
pub fn simulate_coherent(
    fmt: Format,
    snr_sym: f64,
    metric: Metric,
    rule: StoppingRule,
    master_seed: u64,
) -> Result<BerEstimate> {
    MonteCarlo::new(rule, master_seed).simulate_coherent(fmt, snr_sym, metric)
}

/// Photon-counting PPM simulation with an explicit stopping rule and seed.
pub fn simulate_photon_counting_ppm(
    m: PpmOrder,
    photons_per_symbol: f64,
    background_rate: f64,
    rule: StoppingRule,
    master_seed: u64,
) -> Result<BerEstimate> {
    MonteCarlo::new(rule, master_seed).simulate_photon_counting_ppm(
        m,
        photons_per_symbol,
        background_rate,
    )
}

fn poisson(mean: f64) -> Option<Poisson<f64>> {
    if mean > 0.0 {
        Some(Poisson::new(mean).expect("positive finite mean"))
    } else {
        None
    }
}

fn draw_bits<R: RngCore>(rng: &mut R, out: &mut [bool]) {
    let word = rng.next_u64();
    for (i, b) in out.iter_mut().enumerate() {
        *b = (word >> i) & 1 == 1;
    }
}

fn count_bit_errors(a: &[bool], b: &[bool]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn block_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

struct CoherentKernel {
    fmt: Format,
    amplitude: f64,
    sigma: f64,
    metric: Metric,
}

impl CoherentKernel {
    fn run_batch(&self, rng: &mut ChaCha8Rng, blocks: u64) -> Tally {
        let fmt = self.fmt;
        let n_bits = fmt.bits_per_block();
        let n_samples = fmt.symbols_per_block() * fmt.slots_per_symbol();
        let mut sent = vec![false; n_bits];
        let mut decided = vec![false; n_bits];
        let mut samples = vec![Complex64::new(0.0, 0.0); n_samples];
        let mut tally = Tally {
            blocks,
            ..Tally::default()
        };
        for _ in 0..blocks {
            draw_bits(rng, &mut sent);
            let occupied = fmt.modulate_block(&sent, self.amplitude, &mut samples);
            if self.sigma > 0.0 {
                for x in samples.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *x += Complex64::new(self.sigma * re, self.sigma * im);
                }
            }
            fmt.decide_block(&samples, self.metric, rng, &mut decided);
            tally.bit_errors += count_bit_errors(&sent, &decided);
            tally.symbol_errors += match fmt {
                // Individual nearest-point decisions, before the block fallback.
                Format::ThreePsk => {
                    let (a, b) = THREE_PSK_BLOCK_MAP[block_index(&sent)];
                    u64::from(crate::formats::three_psk_nearest(samples[0]) != a)
                        + u64::from(crate::formats::three_psk_nearest(samples[1]) != b)
                }
                Format::Ppm(m) | Format::PpmQpsk(m) => {
                    let k = m.log2() as usize;
                    let slot_wrong = block_index(&decided[..k]) != occupied.unwrap_or(0);
                    u64::from(slot_wrong)
                }
                _ => u64::from(sent != decided),
            };
        }
        tally
    }
}

struct CountingKernel {
    m: PpmOrder,
    signal: Option<Poisson<f64>>,
    background: Option<Poisson<f64>>,
}

impl CountingKernel {
    fn run_batch(&self, rng: &mut ChaCha8Rng, blocks: u64) -> Tally {
        let m = self.m.get() as usize;
        let k = self.m.log2() as usize;
        let mut sent = vec![false; k];
        let mut decided = vec![false; k];
        let mut counts = vec![0u64; m];
        let mut tally = Tally {
            blocks,
            ..Tally::default()
        };
        for _ in 0..blocks {
            draw_bits(rng, &mut sent);
            let slot = block_index(&sent);
            match &self.background {
                Some(bg) => counts.iter_mut().for_each(|c| *c = bg.sample(rng) as u64),
                None => counts.fill(0),
            }
            counts[slot] = self.signal.as_ref().map_or(0, |d| d.sample(rng) as u64);
            let guess = argmax_random_tie(counts.iter().copied(), rng);
            for (i, b) in decided.iter_mut().enumerate() {
                *b = (guess >> (k - 1 - i)) & 1 == 1;
            }
            tally.bit_errors += count_bit_errors(&sent, &decided);
            tally.symbol_errors += u64::from(guess != slot);
        }
        tally
    }
}
