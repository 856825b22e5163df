//! Sensitivity solving (PPB at a target BER), sensitivity tables, capacity
//! and BER crossovers, and a format recommender.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ber_at_ppb, capacity_coherent, capacity_ppm, guessing_ber, CapacityModel};
use crate::error::{invalid, Error, Result};
use crate::formats::{Format, Metric};
use crate::link::{
    db_to_linear, dbm_to_watts, linear_to_db, snr_bit_from_ppb, FecProfile, LinkBudget, NoiseFigure,
};
use crate::montecarlo::{MonteCarlo, StoppingRule};

/// Outer limit of the automatic PPB bracket, in dB.
pub const MAX_BRACKET_DB: f64 = 60.0;

/// Convergence threshold on `|log10 BER − log10 target|`.
pub const LOG_BER_TOLERANCE: f64 = 1e-4;

/// Default received-power bracket for capacity crossovers, dBm.
pub const DEFAULT_POWER_BRACKET_DBM: (f64, f64) = (-120.0, -20.0);

/// Default PPB bracket for BER crossovers, dB.
pub const DEFAULT_PPB_BRACKET_DB: (f64, f64) = (-12.0, 12.0);

// Bisection stops once the bracket is this narrow (dB); the analytic solver
// also requires the BER tolerance to hold.
const ANALYTIC_WIDTH_DB: f64 = 1e-7;
const MONTE_CARLO_WIDTH_DB: f64 = 0.01;
const CROSSOVER_WIDTH_DB: f64 = 1e-9;
const INITIAL_HALF_WIDTH_DB: f64 = 2.5;

/// How error rates are evaluated while inverting a BER curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverModel {
    Analytic,
    /// CI-aware bisection on simulated BER with common random numbers.
    MonteCarlo(MonteCarlo),
}

impl SolverModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SolverModel::Analytic => ModelKind::Analytic,
            SolverModel::MonteCarlo(_) => ModelKind::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Analytic,
    MonteCarlo,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Analytic => "analytic",
            ModelKind::MonteCarlo => "monte_carlo",
        })
    }
}

/// Photons per bit needed by one format to reach a target pre-FEC BER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub format: Format,
    pub target_pre_fec_ber: f64,
    pub nf: NoiseFigure,
    /// Raw photons per transmitted bit, dB.
    pub ppb_raw_db: f64,
    /// Photons per information bit after a code of rate `code_rate`, dB.
    pub ppb_post_fec_db: f64,
    pub code_rate: f64,
    /// BER evaluated (or simulated) at `ppb_raw_db`.
    pub ber_at_solution: f64,
    pub model: ModelKind,
    pub metric: Metric,
}

impl SensitivityResult {
    /// Re-labels the post-FEC column for code rate `k`.
    pub fn with_code_rate(mut self, code_rate: f64) -> Result<Self> {
        if !(code_rate > 0.0 && code_rate <= 1.0) {
            return Err(invalid(
                "code_rate",
                format!("must lie in (0, 1], got {code_rate}"),
            ));
        }
        self.code_rate = code_rate;
        self.ppb_post_fec_db = self.ppb_raw_db - linear_to_db(code_rate);
        Ok(self)
    }

    pub fn ppb_raw(&self) -> f64 {
        db_to_linear(self.ppb_raw_db)
    }
}

fn snr_sym_at(fmt: Format, ppb_db: f64, nf: NoiseFigure) -> f64 {
    fmt.bits_per_symbol() * snr_bit_from_ppb(db_to_linear(ppb_db), nf)
}

fn check_target(fmt: Format, target: f64) -> Result<()> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(invalid(
            "target_ber",
            format!("must be positive, got {target}"),
        ));
    }
    let guess = guessing_ber(fmt)?;
    if target >= guess {
        return Err(Error::UnreachableTarget {
            target,
            reason: format!("{fmt} guesses at BER {guess:.4}"),
        });
    }
    Ok(())
}

/// Raw PPB (dB) at which `fmt` reaches `target_ber`, as a result with
/// `code_rate = 1`; see [`SensitivityResult::with_code_rate`].
pub fn ppb_at_ber(
    fmt: Format,
    target_ber: f64,
    nf: NoiseFigure,
    model: SolverModel,
    metric: Metric,
) -> Result<SensitivityResult> {
    check_target(fmt, target_ber)?;
    let (ppb_raw_db, ber_at_solution) = match model {
        SolverModel::Analytic => solve_analytic(fmt, target_ber, nf, metric)?,
        SolverModel::MonteCarlo(mc) => solve_monte_carlo(fmt, target_ber, nf, metric, &mc)?,
    };
    Ok(SensitivityResult {
        format: fmt,
        target_pre_fec_ber: target_ber,
        nf,
        ppb_raw_db,
        ppb_post_fec_db: ppb_raw_db,
        code_rate: 1.0,
        ber_at_solution,
        model: model.kind(),
        metric,
    })
}

/// Finds `[lo, hi]` (dB) with `g(lo) > 0 > g(hi)` for a decreasing `g`,
/// widening by a factor of 4 around 0 dB up to ±[`MAX_BRACKET_DB`].
fn expand_bracket(target: f64, mut g: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut half = INITIAL_HALF_WIDTH_DB;
    loop {
        let (lo, hi) = (-half, half);
        let (g_lo, g_hi) = (g(lo)?, g(hi)?);
        if g_lo > 0.0 && g_hi <= 0.0 {
            return Ok((lo, hi));
        }
        if half >= MAX_BRACKET_DB {
            let reason = if g_lo <= 0.0 {
                format!("BER already below target at {lo} dB PPB")
            } else {
                format!("BER floor above target at {hi} dB PPB")
            };
            return Err(Error::UnreachableTarget { target, reason });
        }
        half = (half * 4.0).min(MAX_BRACKET_DB);
    }
}

fn solve_analytic(fmt: Format, target: f64, nf: NoiseFigure, metric: Metric) -> Result<(f64, f64)> {
    let log_target = target.log10();
    let g = |x: f64| -> Result<f64> {
        let ber = ber_at_ppb(fmt, db_to_linear(x), nf, metric)?;
        Ok(ber.log10() - log_target)
    };
    let (mut lo, mut hi) = expand_bracket(target, g)?;
    loop {
        let mid = 0.5 * (lo + hi);
        let d = g(mid)?;
        if d.abs() < LOG_BER_TOLERANCE && hi - lo < ANALYTIC_WIDTH_DB {
            return Ok((mid, 10f64.powf(d + log_target)));
        }
        if d > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < f64::EPSILON * 16.0 {
            return Ok((mid, 10f64.powf(d + log_target)));
        }
    }
}

fn solve_monte_carlo(
    fmt: Format,
    target: f64,
    nf: NoiseFigure,
    metric: Metric,
    mc: &MonteCarlo,
) -> Result<(f64, f64)> {
    let fine = mc.rule.target_bit_errors.max(100);
    let coarse = 25.min(fine);
    let simulate = |x: f64, errors: u64| {
        // Enough symbols to see `errors` at 1/20 of the target BER.
        let needed = (20.0 * errors as f64 / target / fmt.bits_per_symbol()).ceil() as u64;
        let rule = StoppingRule::new(errors, mc.rule.max_symbols.min(needed.max(1)))?;
        MonteCarlo { rule, ..*mc }.simulate_coherent(fmt, snr_sym_at(fmt, x, nf), metric)
    };
    // +1 when the CI sits above the target, -1 below, 0 when it straddles.
    // A straddling CI is refined with 4x the errors until `fine`.
    let side = |x: f64| -> Result<(f64, f64)> {
        let mut errors = coarse;
        loop {
            let est = simulate(x, errors)?;
            let s = if est.ci95_low > target {
                1.0
            } else if est.ci95_high < target {
                -1.0
            } else {
                0.0
            };
            if s != 0.0 || errors >= fine {
                return Ok((s, est.ber));
            }
            errors = (errors * 4).min(fine);
        }
    };
    let (mut lo, mut hi) = expand_bracket(target, |x| Ok(side(x)?.0 - 0.5))?;
    while hi - lo > MONTE_CARLO_WIDTH_DB {
        let mid = 0.5 * (lo + hi);
        let (s, ber) = side(mid)?;
        if s > 0.0 {
            lo = mid;
        } else if s < 0.0 {
            hi = mid;
        } else {
            return Ok((mid, ber));
        }
    }
    let mid = 0.5 * (lo + hi);
    Ok((mid, side(mid)?.1))
}

/// One cell of a sensitivity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub format: Format,
    pub target_pre_fec_ber: f64,
    pub code_rate: f64,
    pub result: Option<SensitivityResult>,
    /// Solver failure for this cell, if any.
    pub error: Option<String>,
    /// Minimum raw PPB among the formats at this target.
    pub best: bool,
}

/// Full format × target grid of sensitivities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub nf: NoiseFigure,
    pub metric: Metric,
    pub cells: Vec<TableCell>,
}

impl SensitivityTable {
    pub fn cell(&self, fmt: Format, target: f64) -> Option<&TableCell> {
        self.cells
            .iter()
            .find(|c| c.format == fmt && c.target_pre_fec_ber == target)
    }

    /// Format with the lowest raw PPB at `target`.
    pub fn best(&self, target: f64) -> Option<Format> {
        self.cells
            .iter()
            .find(|c| c.best && c.target_pre_fec_ber == target)
            .map(|c| c.format)
    }
}

/// Solves every (format, FEC profile) pair with the analytic model; cells
/// are independent and computed in parallel.
pub fn sensitivity_table(
    formats: &[Format],
    profiles: &[FecProfile],
    nf: NoiseFigure,
    metric: Metric,
) -> SensitivityTable {
    let jobs: Vec<(FecProfile, Format)> = profiles
        .iter()
        .flat_map(|p| formats.iter().map(move |f| (*p, *f)))
        .collect();
    let mut cells: Vec<TableCell> = jobs
        .par_iter()
        .map(|&(p, fmt)| {
            let solved = ppb_at_ber(
                fmt,
                p.target_pre_fec_ber(),
                nf,
                SolverModel::Analytic,
                metric,
            )
            .and_then(|r| r.with_code_rate(p.code_rate()));
            let (result, error) = match solved {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TableCell {
                format: fmt,
                target_pre_fec_ber: p.target_pre_fec_ber(),
                code_rate: p.code_rate(),
                result,
                error,
                best: false,
            }
        })
        .collect();
    for chunk in cells.chunks_mut(formats.len().max(1)) {
        let best = chunk
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.result.as_ref().map(|r| (i, r.ppb_raw_db)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        if let Some(i) = best {
            chunk[i].best = true;
        }
    }
    SensitivityTable { nf, metric, cells }
}

/// Received power at which two capacity curves intersect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverResult {
    pub model_a: String,
    pub model_b: String,
    /// Watts.
    pub crossover_power: f64,
    pub crossover_power_dbm: f64,
    pub capacity_a: f64,
    pub capacity_b: f64,
    pub bracket_dbm: (f64, f64),
}

fn check_bracket(name: &'static str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(
            name,
            format!("need finite lo < hi, got ({lo}, {hi})"),
        ));
    }
    Ok(())
}

/// Bisection for a sign change of `g` on `[lo, hi]`. `None` when the ends
/// do not strictly differ in sign.
fn bisect_sign(
    (mut lo, mut hi): (f64, f64),
    width: f64,
    mut g: impl FnMut(f64) -> Result<f64>,
) -> Result<Option<f64>> {
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if (g_lo * g_hi).is_nan() || g_lo * g_hi >= 0.0 {
        return Ok(None);
    }
    let lo_positive = g_lo > 0.0;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let d = g(mid)?;
        if d == 0.0 {
            return Ok(Some(mid));
        }
        if (d > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Crossover power of two capacity models over `bracket_dbm`. Only the
/// optical frequency and bandwidth of `link` are used.
pub fn capacity_crossover(
    a: &CapacityModel,
    b: &CapacityModel,
    link: &LinkBudget,
    bracket_dbm: (f64, f64),
) -> Result<CrossoverResult> {
    check_bracket("power_bracket", bracket_dbm)?;
    let at = |dbm: f64| link.with_power(dbm_to_watts(dbm));
    // Symmetric in a and b, so swapping models yields mirrored decisions.
    let g = |dbm: f64| -> Result<f64> {
        let l = at(dbm)?;
        let (ca, cb) = (a.capacity(&l), b.capacity(&l));
        let sum = ca + cb;
        Ok(if sum > 0.0 { (ca - cb) / sum } else { 0.0 })
    };
    let dbm =
        bisect_sign(bracket_dbm, CROSSOVER_WIDTH_DB, g)?.ok_or_else(|| Error::NoCrossover {
            a: a.to_string(),
            b: b.to_string(),
        })?;
    let l = at(dbm)?;
    Ok(CrossoverResult {
        model_a: a.to_string(),
        model_b: b.to_string(),
        crossover_power: l.received_power(),
        crossover_power_dbm: dbm,
        capacity_a: a.capacity(&l),
        capacity_b: b.capacity(&l),
        bracket_dbm,
    })
}

/// Intersection of two analytic BER-versus-PPB curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCrossover {
    pub format_a: Format,
    pub format_b: Format,
    pub nf: NoiseFigure,
    pub ppb_db: f64,
    pub ber: f64,
    pub bracket_db: (f64, f64),
}

/// Finds where the BER curves of `a` and `b` cross within `bracket_db`.
pub fn ber_crossover(
    a: Format,
    b: Format,
    nf: NoiseFigure,
    metric: Metric,
    bracket_db: (f64, f64),
) -> Result<BerCrossover> {
    check_bracket("ppb_bracket", bracket_db)?;
    let bers = |x: f64| -> Result<(f64, f64)> {
        let ppb = db_to_linear(x);
        Ok((
            ber_at_ppb(a, ppb, nf, metric)?,
            ber_at_ppb(b, ppb, nf, metric)?,
        ))
    };
    let g = |x: f64| -> Result<f64> {
        let (ba, bb) = bers(x)?;
        Ok(ba.log10() - bb.log10())
    };
    let x = bisect_sign(bracket_db, CROSSOVER_WIDTH_DB, g)?.ok_or_else(|| Error::NoCrossover {
        a: a.to_string(),
        b: b.to_string(),
    })?;
    let (ba, bb) = bers(x)?;
    Ok(BerCrossover {
        format_a: a,
        format_b: b,
        nf,
        ppb_db: x,
        ber: (ba * bb).sqrt(),
        bracket_db,
    })
}

/// Detection scheme of a recommendation candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Receiver {
    /// Optically pre-amplified coherent detection.
    Coherent { nf: NoiseFigure, metric: Metric },
    /// Ideal photon counting without background; PPM formats only.
    PhotonCounting,
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Receiver::Coherent { nf, .. } => write!(f, "coherent(nf={}dB)", nf.db()),
            Receiver::PhotonCounting => f.write_str("photon-counting"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub format: Format,
    pub receiver: Receiver,
}

impl Candidate {
    pub fn coherent(format: Format, nf: NoiseFigure) -> Self {
        Self {
            format,
            receiver: Receiver::Coherent {
                nf,
                metric: Metric::Envelope,
            },
        }
    }

    pub fn photon_counting(format: Format) -> Self {
        Self {
            format,
            receiver: Receiver::PhotonCounting,
        }
    }

    pub fn name(&self) -> String {
        format!("{}/{}", self.format, self.receiver)
    }
}

/// Which constraint sets a candidate's achievable rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateLimit {
    SymbolRate,
    PhotonBudget,
    Capacity,
    /// The target BER cannot be met at any power.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// 1-based.
    pub rank: usize,
    pub name: String,
    pub candidate: Candidate,
    /// Information bits per second.
    pub rate: f64,
    pub limited_by: RateLimit,
    pub spectral_efficiency: f64,
    pub required_ppb_db: Option<f64>,
}

fn required_ppb(c: &Candidate, target: f64) -> Result<Option<f64>> {
    match c.receiver {
        Receiver::Coherent { nf, metric } => {
            match ppb_at_ber(c.format, target, nf, SolverModel::Analytic, metric) {
                Ok(r) => Ok(Some(r.ppb_raw())),
                Err(Error::UnreachableTarget { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        }
        Receiver::PhotonCounting => {
            let Format::Ppm(m) = c.format else {
                return Err(invalid(
                    "candidate",
                    format!("photon counting needs plain PPM, got {}", c.format),
                ));
            };
            // BER = e^{-n_s} / 2 without background.
            if target >= 0.5 {
                return Ok(None);
            }
            Ok(Some((0.5 / target).ln() / f64::from(m.log2())))
        }
    }
}

fn receiver_capacity(c: &Candidate, link: &LinkBudget) -> f64 {
    match (c.receiver, c.format) {
        (Receiver::Coherent { nf, .. }, _) => capacity_coherent(link, nf),
        (Receiver::PhotonCounting, Format::Ppm(m)) => capacity_ppm(link, m),
        (Receiver::PhotonCounting, _) => 0.0,
    }
}

/// Ranks candidates by achievable information rate at `link` under `fec`:
/// `k · min(B · bits/slots, photon_rate / PPB_t)`, capped by the receiver's
/// capacity. Ties go to higher spectral efficiency, then name.
pub fn recommend_format(
    link: &LinkBudget,
    fec: FecProfile,
    candidates: &[Candidate],
) -> Result<Vec<Recommendation>> {
    if candidates.is_empty() {
        return Err(invalid("candidates", "need at least one candidate"));
    }
    let k = fec.code_rate();
    let mut out = candidates
        .iter()
        .map(|c| {
            let se = c.format.spectral_efficiency(k);
            let ppb = required_ppb(c, fec.target_pre_fec_ber())?;
            let (rate, limited_by) = match ppb {
                None => (0.0, RateLimit::Unreachable),
                Some(ppb) => {
                    let by_symbols = se * link.receiver_bandwidth();
                    let by_photons = k * link.photon_rate() / ppb;
                    let capacity = receiver_capacity(c, link);
                    [
                        (by_symbols, RateLimit::SymbolRate),
                        (by_photons, RateLimit::PhotonBudget),
                        (capacity, RateLimit::Capacity),
                    ]
                    .into_iter()
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("three entries")
                }
            };
            Ok(Recommendation {
                rank: 0,
                name: c.name(),
                candidate: *c,
                rate,
                limited_by,
                spectral_efficiency: se,
                required_ppb_db: ppb.map(linear_to_db),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        b.rate
            .total_cmp(&a.rate)
            .then(b.spectral_efficiency.total_cmp(&a.spectral_efficiency))
            .then_with(|| a.name.cmp(&b.name))
    });
    for (i, r) in out.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::DEFAULT_WAVELENGTH_M;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    const NF0: NoiseFigure = NoiseFigure::PSA_IDEAL_BER;

    fn analytic(fmt: Format, target: f64) -> Result<SensitivityResult> {
        ppb_at_ber(fmt, target, NF0, SolverModel::Analytic, Metric::Envelope)
    }

    fn link(dbm: f64) -> LinkBudget {
        LinkBudget::from_dbm(dbm, DEFAULT_WAVELENGTH_M, 1e10).unwrap()
    }

    fn qpsk_oracle_db(q_inverse: f64) -> f64 {
        // BER = Q(sqrt(2 SNR_bit)), SNR_bit = 2 PPB at NF = 1.
        10.0 * (q_inverse * q_inverse / 4.0).log10()
    }

    #[test]
    fn qpsk_matches_inverse_q() {
        let r = analytic(Format::Qpsk, 1e-3).unwrap();
        assert!((r.ppb_raw_db - qpsk_oracle_db(3.090_232_306_167_814)).abs() < 1e-6);
        let r = analytic(Format::Qpsk, 0.14).unwrap();
        assert!((r.ppb_raw_db - qpsk_oracle_db(1.080_319_340_814_956_5)).abs() < 1e-6);
        let b = analytic(Format::Bpsk, 0.14).unwrap();
        assert!((b.ppb_raw_db - r.ppb_raw_db).abs() < 1e-6);
        assert_eq!(r.model, ModelKind::Analytic);
        assert_eq!(r.code_rate, 1.0);
        assert_eq!(r.ppb_post_fec_db, r.ppb_raw_db);
    }

    #[test]
    fn noise_figure_shifts_uniformly() {
        let a = analytic(Format::ppm_qpsk(16).unwrap(), 1e-3).unwrap();
        let b = ppb_at_ber(
            Format::ppm_qpsk(16).unwrap(),
            1e-3,
            NoiseFigure::EDFA_IDEAL,
            SolverModel::Analytic,
            Metric::Envelope,
        )
        .unwrap();
        assert!((b.ppb_raw_db - a.ppb_raw_db - 10.0 * 2f64.log10()).abs() < 1e-5);
    }

    #[test]
    fn code_rate_bookkeeping() {
        let r = analytic(Format::Qpsk, 0.14).unwrap();
        let half = r.clone().with_code_rate(0.5).unwrap();
        assert!((half.ppb_post_fec_db - r.ppb_raw_db - 10.0 * 2f64.log10()).abs() < 1e-12);
        assert_eq!(
            r.clone().with_code_rate(1.0).unwrap().ppb_post_fec_db,
            r.ppb_raw_db
        );
        assert!(r.clone().with_code_rate(0.0).is_err());
        assert!(r.with_code_rate(1.5).is_err());
    }

    #[test]
    fn unreachable_and_invalid_targets() {
        assert!(matches!(
            analytic(Format::Qpsk, 0.5),
            Err(Error::UnreachableTarget { .. })
        ));
        assert!(matches!(
            analytic(Format::ppm(16).unwrap(), 0.6),
            Err(Error::UnreachableTarget { .. })
        ));
        assert!(matches!(
            analytic(Format::Qpsk, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            analytic(Format::Qpsk, f64::NAN),
            Err(Error::InvalidParameter { .. })
        ));
        let deep = analytic(Format::Qpsk, 1e-300).unwrap();
        assert!(deep.ppb_raw_db > 20.0 && deep.ppb_raw_db < MAX_BRACKET_DB);
    }

    #[test]
    fn table_values_and_best_marks() {
        let formats = [
            Format::ppm(16).unwrap(),
            Format::ppm(64).unwrap(),
            Format::Qpsk,
            Format::ppm_qpsk(16).unwrap(),
            Format::ppm_qpsk(64).unwrap(),
        ];
        let profiles = [FecProfile::HIGH_OVERHEAD, FecProfile::LOW_OVERHEAD];
        let table = sensitivity_table(&formats, &profiles, NF0, Metric::Envelope);
        assert_eq!(table.cells.len(), 10);
        assert_eq!(table.best(0.14), Some(Format::Qpsk));
        assert_eq!(table.best(1e-3), Some(Format::ppm_qpsk(64).unwrap()));
        assert_eq!(table.cells.iter().filter(|c| c.best).count(), 2);
        let expected = [
            (formats[0], 3.1, -2.4),
            (formats[1], 1.9, -2.8),
            (formats[2], 3.8, -5.4),
            (formats[3], 1.3, -4.1),
            (formats[4], 0.7, -4.1),
        ];
        for (fmt, at_1e3, at_014) in expected {
            let tol = if matches!(fmt, Format::PpmQpsk(_)) {
                0.2
            } else {
                0.15
            };
            let lo = table.cell(fmt, 1e-3).unwrap().result.as_ref().unwrap();
            let hi = table.cell(fmt, 0.14).unwrap().result.as_ref().unwrap();
            assert!(
                (lo.ppb_raw_db - at_1e3).abs() <= tol,
                "{fmt}: {}",
                lo.ppb_raw_db
            );
            assert!(
                (hi.ppb_raw_db - at_014).abs() <= tol,
                "{fmt}: {}",
                hi.ppb_raw_db
            );
            assert!((hi.ppb_post_fec_db - hi.ppb_raw_db - 10.0 * 2f64.log10()).abs() < 1e-12);
            assert_eq!(hi.code_rate, 0.5);
        }
    }

    #[test]
    fn table_keeps_going_past_failed_cells() {
        // PPM+QPSK has no analytic model under the coherent metric.
        let profiles = [
            FecProfile::new(1.0, 1e-2).unwrap(),
            FecProfile::LOW_OVERHEAD,
        ];
        let formats = [Format::ppm_qpsk(64).unwrap(), Format::Qpsk];
        let table = sensitivity_table(&formats, &profiles, NF0, Metric::CoherentReal);
        assert_eq!(table.cells.len(), 4);
        for c in &table.cells {
            assert_eq!(c.result.is_some(), c.error.is_none());
            assert_eq!(c.result.is_some(), c.format == Format::Qpsk);
            assert_eq!(c.best, c.format == Format::Qpsk);
        }
        let r = table
            .cell(Format::Qpsk, 1e-2)
            .unwrap()
            .result
            .as_ref()
            .unwrap();
        assert_eq!(r.ppb_post_fec_db, r.ppb_raw_db);
    }

    #[test]
    fn capacity_crossovers() {
        let l = link(-80.0);
        let psa_256 = capacity_crossover(
            &CapacityModel::psa(),
            &CapacityModel::Ppm {
                order: crate::formats::PpmOrder::new(256).unwrap(),
            },
            &l,
            DEFAULT_POWER_BRACKET_DBM,
        )
        .unwrap();
        assert!(
            (psa_256.crossover_power_dbm - -84.52).abs() < 0.05,
            "{}",
            psa_256.crossover_power_dbm
        );
        assert!((psa_256.capacity_a - psa_256.capacity_b).abs() < 1e-3 * psa_256.capacity_a);
        let edfa = capacity_crossover(
            &CapacityModel::edfa(),
            &CapacityModel::BestPpm,
            &l,
            DEFAULT_POWER_BRACKET_DBM,
        )
        .unwrap();
        assert!(
            (edfa.crossover_power_dbm - -64.89).abs() < 0.05,
            "{}",
            edfa.crossover_power_dbm
        );
        // The ordering flips across the crossover.
        let below = link(edfa.crossover_power_dbm - 1.0);
        let above = link(edfa.crossover_power_dbm + 1.0);
        assert!(CapacityModel::BestPpm.capacity(&below) > CapacityModel::edfa().capacity(&below));
        assert!(CapacityModel::BestPpm.capacity(&above) < CapacityModel::edfa().capacity(&above));
    }

    #[test]
    fn capacity_crossover_is_symmetric() {
        let l = link(-80.0);
        let a = CapacityModel::edfa();
        let b = CapacityModel::BestPpm;
        let ab = capacity_crossover(&a, &b, &l, DEFAULT_POWER_BRACKET_DBM).unwrap();
        let ba = capacity_crossover(&b, &a, &l, DEFAULT_POWER_BRACKET_DBM).unwrap();
        assert!((ab.crossover_power_dbm - ba.crossover_power_dbm).abs() < 1e-8);
        assert_eq!(ab.model_a, ba.model_b);
    }

    #[test]
    fn identical_models_do_not_cross() {
        let l = link(-80.0);
        let err = capacity_crossover(
            &CapacityModel::psa(),
            &CapacityModel::psa(),
            &l,
            DEFAULT_POWER_BRACKET_DBM,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoCrossover { .. }));
        assert!(capacity_crossover(
            &CapacityModel::psa(),
            &CapacityModel::edfa(),
            &l,
            (-20.0, -30.0)
        )
        .is_err());
        let err = ber_crossover(
            Format::Qpsk,
            Format::Qpsk,
            NF0,
            Metric::Envelope,
            DEFAULT_PPB_BRACKET_DB,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoCrossover { .. }));
    }

    #[test]
    fn ber_crossovers_sit_at_high_ber() {
        let x = ber_crossover(
            Format::Qpsk,
            Format::ppm_qpsk(16).unwrap(),
            NF0,
            Metric::Envelope,
            DEFAULT_PPB_BRACKET_DB,
        )
        .unwrap();
        assert!((0.05..=0.12).contains(&x.ber), "{}", x.ber);
        let y = ber_crossover(
            Format::Qpsk,
            Format::ppm_qpsk(64).unwrap(),
            NF0,
            Metric::Envelope,
            DEFAULT_PPB_BRACKET_DB,
        )
        .unwrap();
        assert!((0.04..=0.12).contains(&y.ber), "{}", y.ber);
        let ppb = db_to_linear(x.ppb_db);
        let a = ber_at_ppb(Format::Qpsk, ppb, NF0, Metric::Envelope).unwrap();
        let b = ber_at_ppb(Format::ppm_qpsk(16).unwrap(), ppb, NF0, Metric::Envelope).unwrap();
        assert!((a / b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn monte_carlo_solver_tracks_analytic() {
        let mc = MonteCarlo::new(StoppingRule::new(20_000, 50_000_000).unwrap(), 17);
        let sim = ppb_at_ber(
            Format::Qpsk,
            0.14,
            NF0,
            SolverModel::MonteCarlo(mc),
            Metric::Envelope,
        )
        .unwrap();
        let exact = analytic(Format::Qpsk, 0.14).unwrap();
        assert_eq!(sim.model, ModelKind::MonteCarlo);
        assert!(
            (sim.ppb_raw_db - exact.ppb_raw_db).abs() < 0.1,
            "{} vs {}",
            sim.ppb_raw_db,
            exact.ppb_raw_db
        );
        let again = ppb_at_ber(
            Format::Qpsk,
            0.14,
            NF0,
            SolverModel::MonteCarlo(mc),
            Metric::Envelope,
        )
        .unwrap();
        assert_eq!(sim, again);
    }

    #[test]
    fn high_power_prefers_qpsk() {
        let candidates = [
            Candidate::coherent(Format::Qpsk, NF0),
            Candidate::coherent(Format::ppm_qpsk(16).unwrap(), NF0),
            Candidate::coherent(Format::ppm(64).unwrap(), NF0),
            Candidate::photon_counting(Format::ppm(256).unwrap()),
        ];
        for fec in [FecProfile::HIGH_OVERHEAD, FecProfile::LOW_OVERHEAD] {
            let ranked = recommend_format(&link(-40.0), fec, &candidates).unwrap();
            assert_eq!(ranked[0].candidate.format, Format::Qpsk);
            assert_eq!(ranked[0].limited_by, RateLimit::SymbolRate);
            assert_eq!(
                ranked.iter().map(|r| r.rank).collect::<Vec<_>>(),
                vec![1, 2, 3, 4]
            );
        }
    }

    #[test]
    fn low_power_prefers_photon_counting_ppm() {
        let candidates = [
            Candidate::coherent(Format::Qpsk, NF0),
            Candidate::photon_counting(Format::ppm(256).unwrap()),
        ];
        for fec in [FecProfile::HIGH_OVERHEAD, FecProfile::LOW_OVERHEAD] {
            let ranked = recommend_format(&link(-90.0), fec, &candidates).unwrap();
            assert_eq!(ranked[0].candidate, candidates[1]);
            assert!(ranked[0].rate > ranked[1].rate);
        }
    }

    #[test]
    fn recommendation_edge_cases() {
        let one = [Candidate::coherent(Format::ThreePsk, NF0)];
        let ranked = recommend_format(&link(-60.0), FecProfile::LOW_OVERHEAD, &one).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].candidate, one[0]);
        assert!(recommend_format(&link(-60.0), FecProfile::LOW_OVERHEAD, &[]).is_err());
        let bad = [Candidate::photon_counting(Format::Qpsk)];
        assert!(recommend_format(&link(-60.0), FecProfile::LOW_OVERHEAD, &bad).is_err());
        // Equal rate and spectral efficiency fall back to the name.
        let tied = [
            Candidate::coherent(Format::Qpsk, NoiseFigure::PSA_IDEAL_BER),
            Candidate::coherent(Format::Qpsk, NoiseFigure::PSA_CAPACITY),
        ];
        let ranked = recommend_format(&link(-30.0), FecProfile::HIGH_OVERHEAD, &tied).unwrap();
        assert_eq!(ranked[0].rate, ranked[1].rate);
        assert!(ranked[0].name < ranked[1].name);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn solution_hits_target(log_target in -6.0f64..-0.9, pick in 0usize..4) {
            let fmt = [Format::Qpsk, Format::ThreePsk, Format::ppm(4).unwrap(), Format::ppm_qpsk(8).unwrap()][pick];
            let target = 10f64.powf(log_target);
            let r = analytic(fmt, target).unwrap();
            let ber = ber_at_ppb(fmt, r.ppb_raw(), NF0, Metric::Envelope).unwrap();
            prop_assert!((ber.log10() - log_target).abs() < LOG_BER_TOLERANCE);
        }

        #[test]
        fn sensitivity_falls_as_target_rises(log_target in -6.0f64..-1.0, pick in 0usize..3) {
            let fmt = [Format::Qpsk, Format::ppm(16).unwrap(), Format::ppm_qpsk(16).unwrap()][pick];
            let strict = analytic(fmt, 10f64.powf(log_target)).unwrap();
            let loose = analytic(fmt, 10f64.powf(log_target + 0.2)).unwrap();
            prop_assert!(loose.ppb_raw_db < strict.ppb_raw_db);
        }
    }
}
