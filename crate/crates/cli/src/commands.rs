//! Subcommand implementations.

use std::fmt;

use photonlink::analytic::{ber_at_ppb, CapacityModel};
use photonlink::link::{db_to_linear, dbm_to_watts, snr_bit_from_ppb};
use photonlink::montecarlo::{BerEstimate, MonteCarlo, StopReason, StoppingRule};
use photonlink::sensitivity::{
    ber_crossover, capacity_crossover, recommend_format, sensitivity_table, Candidate, RateLimit,
    Receiver, DEFAULT_POWER_BRACKET_DBM, DEFAULT_PPB_BRACKET_DB,
};
use photonlink::{Error, FecProfile, Format, LinkBudget, Metric, NoiseFigure};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::{
    BerArgs, BerModel, CapacityArgs, ChannelArg, Command, CrossoverArgs, CrossoverKind, LinkArgs,
    McArgs, MetricArg, RecommendArgs, SensitivityArgs, SimulateArgs,
};
use crate::output::{envelope, Cell, Report, Table};

/// Bad command-line input detected after parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Longest sweep accepted from a range argument.
const MAX_RANGE_POINTS: usize = 1_000_000;

pub struct Outcome {
    pub report: Report,
    pub params: Value,
    pub master_seed: Option<u64>,
    /// Process exit status for a run that still produced output.
    pub status: u8,
}

impl Outcome {
    fn ok(report: Report, params: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            report,
            params: serde_json::to_value(params)?,
            master_seed: None,
            status: 0,
        })
    }
}

/// Parses `start:stop:step` (inclusive of `stop`) or a single value.
pub fn parse_range(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| -> anyhow::Result<f64> {
        let v: f64 = p
            .parse()
            .map_err(|_| usage(format!("`{p}` in range `{s}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(usage(format!("range `{s}` must be finite")))
        }
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(usage(format!(
                    "range `{s}` needs start <= stop and step > 0"
                )));
            }
            let n = ((stop - start) / step + 1e-9).floor() + 1.0;
            if n > MAX_RANGE_POINTS as f64 {
                return Err(usage(format!(
                    "range `{s}` has more than {MAX_RANGE_POINTS} points"
                )));
            }
            Ok((0..n as usize).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(usage(format!("range `{s}` must be `start:stop:step`"))),
    }
}

/// Parses `lo:hi`.
pub fn parse_bracket(s: &str) -> anyhow::Result<(f64, f64)> {
    let bad = || usage(format!("bracket `{s}` must be `lo:hi` with lo < hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok((lo, hi))
    } else {
        Err(bad())
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(
    items: &[String],
    what: &str,
) -> anyhow::Result<Vec<T>> {
    let items: Vec<&String> = items.iter().filter(|s| !s.trim().is_empty()).collect();
    if items.is_empty() {
        return Err(usage(format!("no {what} given")));
    }
    Ok(items
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<T>, Error>>()?)
}

fn metric(m: MetricArg) -> Metric {
    match m {
        MetricArg::Envelope => Metric::Envelope,
        MetricArg::Coherent => Metric::CoherentReal,
    }
}

fn link_at(link: &LinkArgs, dbm: f64) -> anyhow::Result<LinkBudget> {
    Ok(LinkBudget::from_dbm(
        dbm,
        link.wavelength_nm * 1e-9,
        link.bandwidth_hz,
    )?)
}

fn monte_carlo(mc: &McArgs) -> anyhow::Result<MonteCarlo> {
    let rule = StoppingRule::new(mc.target_errors, mc.max_symbols)?;
    Ok(MonteCarlo::new(rule, mc.seed).with_workers(mc.workers))
}

fn stop_label(s: StopReason) -> &'static str {
    match s {
        StopReason::TargetErrors => "target_errors",
        StopReason::MaxSymbols => "max_symbols",
    }
}

pub fn execute(command: &Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Capacity(a) => capacity(a),
        Command::Ber(a) => ber(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Crossover(a) => crossover(a),
        Command::Simulate(a) => simulate(a),
        Command::Recommend(a) => recommend(a),
        Command::Replay(_) => Err(usage("replay cannot be nested")),
    }
}

pub const CAPACITY_COLUMNS: &[&str] = &["power_dbm", "model", "capacity_bps"];

fn capacity(a: &CapacityArgs) -> anyhow::Result<Outcome> {
    let mut models: Vec<CapacityModel> =
        if a.models.iter().all(|s| s.trim().is_empty()) && !a.nf_db.is_empty() {
            Vec::new()
        } else {
            parse_list(&a.models, "capacity models")?
        };
    for &db in &a.nf_db {
        models.push(CapacityModel::Coherent {
            nf: NoiseFigure::from_db(db)?,
        });
    }
    let powers = parse_range(&a.power_dbm)?;
    let base = link_at(&a.link, powers[0])?;
    let mut table = Table::new(CAPACITY_COLUMNS);
    for model in &models {
        let label = model.to_string();
        for &p in &powers {
            let l = base.with_power(dbm_to_watts(p))?;
            table.push(vec![
                p.into(),
                label.as_str().into(),
                model.capacity(&l).into(),
            ]);
        }
    }
    Outcome::ok(Report::Table(table), a)
}

pub const BER_COLUMNS: &[&str] = &[
    "ppb_t_db",
    "format",
    "ber",
    "source",
    "ci_low",
    "ci_high",
    "bit_errors",
    "bits_simulated",
];

fn ber(a: &BerArgs) -> anyhow::Result<Outcome> {
    let formats: Vec<Format> = parse_list(&a.formats, "formats")?;
    let grid = parse_range(&a.ppb_db)?;
    let nf = NoiseFigure::from_db(a.nf_db)?;
    let metric = metric(a.metric);
    let mut table = Table::new(BER_COLUMNS);
    let mut seed = None;
    match a.model {
        BerModel::Analytic => {
            for &fmt in &formats {
                for &x in &grid {
                    let ber = ber_at_ppb(fmt, db_to_linear(x), nf, metric)?;
                    table.push(vec![
                        x.into(),
                        fmt.to_string().into(),
                        ber.into(),
                        "analytic".into(),
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                    ]);
                }
            }
        }
        BerModel::Mc => {
            // Every point reuses the master seed (common random numbers).
            let mc = monte_carlo(&a.mc)?;
            seed = Some(a.mc.seed);
            for &fmt in &formats {
                for &x in &grid {
                    let snr_sym = fmt.bits_per_symbol() * snr_bit_from_ppb(db_to_linear(x), nf);
                    let est = mc.simulate_coherent(fmt, snr_sym, metric)?;
                    table.push(vec![
                        x.into(),
                        fmt.to_string().into(),
                        est.ber.into(),
                        "mc".into(),
                        est.ci95_low.into(),
                        est.ci95_high.into(),
                        est.bit_errors.into(),
                        est.bits_simulated.into(),
                    ]);
                }
            }
        }
    }
    let mut out = Outcome::ok(Report::Table(table), a)?;
    out.master_seed = seed;
    Ok(out)
}

/// Default code rate for a target BER: rate 1/2 at high-BER thresholds,
/// 7% overhead otherwise.
pub fn default_code_rate(target: f64) -> f64 {
    if target >= 1e-2 {
        FecProfile::HIGH_OVERHEAD.code_rate()
    } else {
        FecProfile::LOW_OVERHEAD.code_rate()
    }
}

fn sensitivity(a: &SensitivityArgs) -> anyhow::Result<Outcome> {
    let formats: Vec<Format> = parse_list(&a.formats, "formats")?;
    if a.targets.is_empty() {
        return Err(usage("no targets given"));
    }
    let rates: Vec<f64> = if a.code_rates.is_empty() {
        a.targets.iter().map(|&t| default_code_rate(t)).collect()
    } else if a.code_rates.len() == a.targets.len() {
        a.code_rates.clone()
    } else {
        return Err(usage(format!(
            "{} code rates given for {} targets",
            a.code_rates.len(),
            a.targets.len()
        )));
    };
    if !a.penalty_db.is_finite() {
        return Err(usage("penalty must be finite"));
    }
    let profiles = a
        .targets
        .iter()
        .zip(&rates)
        .map(|(&t, &k)| FecProfile::new(k, t))
        .collect::<Result<Vec<_>, Error>>()?;
    let nf = NoiseFigure::from_db(a.nf_db)?;
    let table = sensitivity_table(&formats, &profiles, nf, metric(a.metric));
    let mut failed = false;
    let cells: Vec<Value> = table
        .cells
        .iter()
        .map(|c| {
            failed |= c.error.is_some();
            let r = c.result.as_ref();
            json!({
                "format": c.format.to_string(),
                "target_pre_fec_ber": c.target_pre_fec_ber,
                "code_rate": c.code_rate,
                "ppb_raw_db": r.map(|r| r.ppb_raw_db + a.penalty_db),
                "ppb_post_fec_db": r.map(|r| r.ppb_post_fec_db + a.penalty_db),
                "ber_at_solution": r.map(|r| r.ber_at_solution),
                "best": c.best,
                "error": c.error,
            })
        })
        .collect();
    let mut m = Map::new();
    m.insert("nf_db".into(), a.nf_db.into());
    m.insert("metric".into(), serde_json::to_value(a.metric)?);
    m.insert("penalty_db".into(), a.penalty_db.into());
    m.insert("model".into(), "analytic".into());
    m.insert("cells".into(), Value::Array(cells));
    let mut out = Outcome::ok(Report::Json(envelope("sensitivity", m)), a)?;
    if failed {
        out.status = 3;
    }
    Ok(out)
}

fn crossover(a: &CrossoverArgs) -> anyhow::Result<Outcome> {
    let bracket = a.bracket.as_deref().map(parse_bracket).transpose()?;
    let (kind, solved) = match a.kind {
        CrossoverKind::Capacity => {
            let ma: CapacityModel = a.a.parse()?;
            let mb: CapacityModel = a.b.parse()?;
            let link = link_at(&a.link, -80.0)?;
            let r = capacity_crossover(
                &ma,
                &mb,
                &link,
                bracket.unwrap_or(DEFAULT_POWER_BRACKET_DBM),
            );
            ("capacity", r.map(serde_json::to_value))
        }
        CrossoverKind::Ber => {
            let fa: Format = a.a.parse()?;
            let fb: Format = a.b.parse()?;
            let nf = NoiseFigure::from_db(a.nf_db)?;
            let r = ber_crossover(
                fa,
                fb,
                nf,
                metric(a.metric),
                bracket.unwrap_or(DEFAULT_PPB_BRACKET_DB),
            );
            ("ber", r.map(serde_json::to_value))
        }
    };
    let mut m = Map::new();
    m.insert("kind".into(), kind.into());
    m.insert("a".into(), a.a.clone().into());
    m.insert("b".into(), a.b.clone().into());
    let status = match solved {
        Ok(v) => {
            m.insert("result".into(), v?);
            m.insert("no_crossover".into(), Value::Null);
            0
        }
        Err(e @ Error::NoCrossover { .. }) => {
            m.insert("result".into(), Value::Null);
            m.insert("no_crossover".into(), e.to_string().into());
            4
        }
        Err(e) => return Err(e.into()),
    };
    let mut out = Outcome::ok(Report::Json(envelope("crossover", m)), a)?;
    out.status = status;
    Ok(out)
}

pub const SIMULATE_COLUMNS: &[&str] = &[
    "format",
    "channel",
    "ppb_t_db",
    "photons_per_symbol",
    "background",
    "ber",
    "ci_low",
    "ci_high",
    "bit_errors",
    "bits_simulated",
    "ser",
    "symbol_errors",
    "symbols_simulated",
    "seed",
    "stopped_by",
];

fn simulate(a: &SimulateArgs) -> anyhow::Result<Outcome> {
    let fmt: Format = a.format.parse()?;
    let mc = monte_carlo(&a.mc)?;
    let (est, channel, ppb_db, photons, background): (
        BerEstimate,
        &str,
        Option<f64>,
        Option<f64>,
        Option<f64>,
    ) = match a.channel {
        ChannelArg::Coherent => {
            let x = a
                .ppb_db
                .ok_or_else(|| usage("--ppb-db is required for the coherent channel"))?;
            let nf = NoiseFigure::from_db(a.nf_db)?;
            let snr_sym = fmt.bits_per_symbol() * snr_bit_from_ppb(db_to_linear(x), nf);
            (
                mc.simulate_coherent(fmt, snr_sym, metric(a.metric))?,
                "coherent",
                Some(x),
                None,
                None,
            )
        }
        ChannelArg::Counting => {
            let Format::Ppm(m) = fmt else {
                return Err(usage(format!(
                    "photon counting needs a ppm:<M> format, got {fmt}"
                )));
            };
            let n = a
                .photons
                .ok_or_else(|| usage("--photons is required for the counting channel"))?;
            (
                mc.simulate_photon_counting_ppm(m, n, a.background)?,
                "counting",
                None,
                Some(n),
                Some(a.background),
            )
        }
    };
    let mut table = Table::new(SIMULATE_COLUMNS);
    table.push(vec![
        fmt.to_string().into(),
        channel.into(),
        ppb_db.into(),
        photons.into(),
        background.into(),
        est.ber.into(),
        est.ci95_low.into(),
        est.ci95_high.into(),
        est.bit_errors.into(),
        est.bits_simulated.into(),
        est.ser().into(),
        est.symbol_errors.into(),
        est.symbols_simulated.into(),
        est.master_seed.into(),
        stop_label(est.stopped_by).into(),
    ]);
    let mut out = Outcome::ok(Report::Table(table), a)?;
    out.master_seed = Some(a.mc.seed);
    Ok(out)
}

pub const RECOMMEND_COLUMNS: &[&str] = &[
    "rank",
    "name",
    "format",
    "receiver",
    "rate_bps",
    "limited_by",
    "spectral_efficiency",
    "required_ppb_db",
];

fn parse_candidate(s: &str, nf: NoiseFigure) -> anyhow::Result<Candidate> {
    let (fmt, receiver) = s.trim().split_once('@').unwrap_or((s.trim(), "coherent"));
    let fmt: Format = fmt.parse()?;
    match receiver {
        "coherent" => Ok(Candidate::coherent(fmt, nf)),
        "counting" => Ok(Candidate::photon_counting(fmt)),
        other => Err(usage(format!(
            "unknown receiver `{other}`, expected coherent or counting"
        ))),
    }
}

fn rate_limit_label(l: RateLimit) -> &'static str {
    match l {
        RateLimit::SymbolRate => "symbol_rate",
        RateLimit::PhotonBudget => "photon_budget",
        RateLimit::Capacity => "capacity",
        RateLimit::Unreachable => "unreachable",
    }
}

fn recommend(a: &RecommendArgs) -> anyhow::Result<Outcome> {
    let nf = NoiseFigure::from_db(a.nf_db)?;
    let candidates = a
        .candidates
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_candidate(s, nf))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if candidates.is_empty() {
        return Err(usage("no candidates given"));
    }
    let fec = FecProfile::new(a.code_rate, a.target)?;
    let link = link_at(&a.link, a.power_dbm)?;
    let ranked = recommend_format(&link, fec, &candidates)?;
    let mut table = Table::new(RECOMMEND_COLUMNS);
    for r in ranked {
        let receiver = match r.candidate.receiver {
            Receiver::Coherent { .. } => "coherent",
            Receiver::PhotonCounting => "counting",
        };
        table.push(vec![
            r.rank.into(),
            r.name.into(),
            r.candidate.format.to_string().into(),
            receiver.into(),
            r.rate.into(),
            rate_limit_label(r.limited_by).into(),
            r.spectral_efficiency.into(),
            r.required_ppb_db.into(),
        ]);
    }
    Outcome::ok(Report::Table(table), a)
}
