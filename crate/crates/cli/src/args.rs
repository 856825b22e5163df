//! Command-line definitions and value parsers.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "photonlink",
    version,
    about = "Optical modulation format capacity, BER and sensitivity tool"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Capacity versus received power for receiver/format models.
    Capacity(CapacityArgs),
    /// BER versus raw photons per bit, analytic or simulated.
    Ber(BerArgs),
    /// Photons-per-bit sensitivity table at target pre-FEC BERs.
    Sensitivity(SensitivityArgs),
    /// Capacity or BER crossover between two models.
    Crossover(CrossoverArgs),
    /// Monte Carlo BER at a single operating point.
    Simulate(SimulateArgs),
    /// Rank candidate formats by achievable information rate.
    Recommend(RecommendArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Capacity(_) => "capacity",
            Command::Ber(_) => "ber",
            Command::Sensitivity(_) => "sensitivity",
            Command::Crossover(_) => "crossover",
            Command::Simulate(_) => "simulate",
            Command::Recommend(_) => "recommend",
            Command::Replay(_) => "replay",
        }
    }

    pub fn output(&self) -> Option<&OutputArgs> {
        match self {
            Command::Capacity(a) => Some(&a.output),
            Command::Ber(a) => Some(&a.output),
            Command::Sensitivity(a) => Some(&a.output),
            Command::Crossover(a) => Some(&a.output),
            Command::Simulate(a) => Some(&a.output),
            Command::Recommend(a) => Some(&a.output),
            Command::Replay(_) => None,
        }
    }

    pub fn output_mut(&mut self) -> Option<&mut OutputArgs> {
        match self {
            Command::Capacity(a) => Some(&mut a.output),
            Command::Ber(a) => Some(&mut a.output),
            Command::Sensitivity(a) => Some(&mut a.output),
            Command::Crossover(a) => Some(&mut a.output),
            Command::Simulate(a) => Some(&mut a.output),
            Command::Recommend(a) => Some(&mut a.output),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Emit JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
    /// Write to this file (plus a `.manifest.json` sidecar) instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricArg {
    Envelope,
    Coherent,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LinkArgs {
    /// Receiver (symbol/slot) bandwidth in Hz.
    #[arg(long, default_value_t = 1e10)]
    pub bandwidth_hz: f64,
    /// Carrier wavelength in nm.
    #[arg(long, default_value_t = 1550.0)]
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CapacityArgs {
    /// Comma-separated models: psa, edfa, psa-optical, preamp:<nf_db>,
    /// ppm:<M>, ppm:best.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "psa,edfa,ppm:16,ppm:64,ppm:256"
    )]
    pub models: Vec<String>,
    #[command(flatten)]
    pub link: LinkArgs,
    /// Extra pre-amplified coherent models at these noise figures (dB).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub nf_db: Vec<f64>,
    /// Received power range `start:stop:step` in dBm.
    #[arg(long, default_value = "-100:-40:0.5", allow_hyphen_values = true)]
    pub power_dbm: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BerModel {
    Analytic,
    Mc,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct McArgs {
    /// Master seed for Monte Carlo streams.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Stop once this many bit errors are counted.
    #[arg(long, default_value_t = 100)]
    pub target_errors: u64,
    /// Stop after this many symbols regardless.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_symbols: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BerArgs {
    /// Comma-separated formats: bpsk, qpsk, 3psk, ppm:<M>, ppmqpsk:<M>.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "qpsk,3psk,ppm:16,ppm:64,ppm:128,ppmqpsk:16,ppmqpsk:64,ppmqpsk:128"
    )]
    pub formats: Vec<String>,
    /// Raw photons-per-bit range `start:stop:step` in dB.
    #[arg(long, default_value = "-8:8:0.25", allow_hyphen_values = true)]
    pub ppb_db: String,
    #[arg(long, value_enum, default_value_t = BerModel::Analytic)]
    pub model: BerModel,
    #[arg(long, value_enum, default_value_t = MetricArg::Envelope)]
    pub metric: MetricArg,
    /// Pre-amplifier noise figure in dB.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub nf_db: f64,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SensitivityArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ppm:16,ppm:64,qpsk,ppmqpsk:16,ppmqpsk:64"
    )]
    pub formats: Vec<String>,
    /// Target pre-FEC BERs.
    #[arg(long, value_delimiter = ',', default_values_t = [0.14, 1e-3])]
    pub targets: Vec<f64>,
    /// Code rate per target; defaults to 0.5 at BER >= 1e-2 and 1/1.07 below.
    #[arg(long, value_delimiter = ',')]
    pub code_rates: Vec<f64>,
    /// Implementation penalty added to every PPB, dB.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub penalty_db: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub nf_db: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Envelope)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    Capacity,
    Ber,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CrossoverArgs {
    /// First model (capacity model or format, depending on `--kind`).
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long, value_enum, default_value_t = CrossoverKind::Capacity)]
    pub kind: CrossoverKind,
    /// Search bracket `lo:hi`, dBm for capacity and dB PPB for BER.
    #[arg(long, allow_hyphen_values = true)]
    pub bracket: Option<String>,
    #[command(flatten)]
    pub link: LinkArgs,
    /// Noise figure for BER crossovers, dB.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub nf_db: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Envelope)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelArg {
    Coherent,
    Counting,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub format: String,
    #[arg(long, value_enum, default_value_t = ChannelArg::Coherent)]
    pub channel: ChannelArg,
    /// Raw photons per bit in dB (coherent channel).
    #[arg(long, allow_hyphen_values = true)]
    pub ppb_db: Option<f64>,
    /// Mean signal photons per PPM symbol (counting channel).
    #[arg(long)]
    pub photons: Option<f64>,
    /// Mean background photons per slot (counting channel).
    #[arg(long, default_value_t = 0.0)]
    pub background: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub nf_db: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Envelope)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RecommendArgs {
    /// Received power in dBm.
    #[arg(long, allow_hyphen_values = true)]
    pub power_dbm: f64,
    #[command(flatten)]
    pub link: LinkArgs,
    /// Candidates `<format>[@coherent|@counting]`; coherent uses `--nf-db`.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "qpsk,3psk,ppmqpsk:16,ppmqpsk:64,ppm:256@counting"
    )]
    pub candidates: Vec<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub nf_db: f64,
    /// Target pre-FEC BER.
    #[arg(long, default_value_t = 0.14)]
    pub target: f64,
    #[arg(long, default_value_t = 0.5)]
    pub code_rate: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written next to an earlier `--out` file.
    pub manifest: PathBuf,
    /// Write the replayed output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
