//! Models, simulators and solvers for comparing power-efficient optical
//! modulation formats.
//!
//! The crate covers pre-amplified coherent detection (Gaussian noise) of
//! BPSK, QPSK, 3-PSK, M-PPM and M-PPM+QPSK, and photon-counting detection
//! (Poisson statistics) of M-PPM:
//!
//! * [`link`]: photon accounting, SNR/noise-figure relations and FEC
//!   code-rate bookkeeping.
//! * [`formats`]: bit mappings, modulation and hard decisions.
//! * [`analytic`]: capacity formulas and closed-form or quadrature error
//!   rates.
//! * [`montecarlo`]: deterministic, parallel symbol-level simulation.
//! * [`sensitivity`]: photons-per-bit sensitivities, sensitivity tables,
//!   capacity and BER crossovers, format ranking.

pub mod analytic;
pub mod error;
pub mod formats;
pub mod link;
pub mod montecarlo;
pub mod sensitivity;
pub mod special;

pub use error::{Error, Result};
pub use formats::{Format, Metric, PpmOrder, SymbolFrame};
pub use link::{FecProfile, LinkBudget, NoiseFigure, PhotonsPerBit};
