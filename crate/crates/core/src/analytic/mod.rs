//! Closed-form capacity and error-rate models.

mod capacity;
mod error_rates;

pub use capacity::*;
pub use error_rates::*;
