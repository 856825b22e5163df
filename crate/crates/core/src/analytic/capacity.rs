//! Capacity of pre-amplified coherent receivers and of photon-counting PPM.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::formats::PpmOrder;
use crate::link::{snr_per_symbol, LinkBudget, NoiseFigure};

/// `B · log2(1 + 2 n_s / NF)` for an optically pre-amplified coherent
/// receiver of bandwidth `B`.
pub fn capacity_coherent(link: &LinkBudget, nf: NoiseFigure) -> f64 {
    let snr = snr_per_symbol(link.photons_per_symbol_coherent(), nf);
    link.receiver_bandwidth() * snr.ln_1p() / LN_2
}

/// Phase-sensitive receiver capacity when the idler's share of the optical
/// channel is charged against it: `(B_opt / 2) · log2(1 + 4 n_s)`.
pub fn capacity_coherent_optical_bw(
    optical_bandwidth: f64,
    photons_per_symbol: f64,
) -> Result<f64> {
    if !(optical_bandwidth.is_finite() && optical_bandwidth > 0.0) {
        return Err(invalid(
            "optical_bandwidth",
            format!("must be positive, got {optical_bandwidth}"),
        ));
    }
    if photons_per_symbol.is_nan() || photons_per_symbol < 0.0 {
        return Err(invalid(
            "photons_per_symbol",
            format!("must be non-negative, got {photons_per_symbol}"),
        ));
    }
    Ok(0.5 * optical_bandwidth * (4.0 * photons_per_symbol).ln_1p() / LN_2)
}

/// Photon-counting `M`-PPM capacity, `B · (1 − e^{−n_s}) · log2(M) / M`,
/// with `n_s` the photons per PPM symbol.
pub fn capacity_ppm(link: &LinkBudget, m: PpmOrder) -> f64 {
    let ns = f64::from(m.get()) * link.photons_per_symbol_coherent();
    link.receiver_bandwidth() * -(-ns).exp_m1() * f64::from(m.log2()) / f64::from(m.get())
}

/// PPM orders scanned by [`CapacityModel::BestPpm`].
pub const BEST_PPM_ORDERS: [u32; 8] = [2, 4, 8, 16, 32, 64, 128, 256];

/// A receiver/format family whose capacity can be evaluated at a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapacityModel {
    /// Pre-amplified coherent detection with the given noise figure.
    Coherent { nf: NoiseFigure },
    /// Phase-sensitive pre-amplifier charged for the idler bandwidth; the
    /// optical bandwidth is taken as twice the receiver bandwidth.
    PsaOpticalBandwidth,
    /// Photon-counting PPM of one order.
    Ppm { order: PpmOrder },
    /// Upper envelope of photon-counting PPM over [`BEST_PPM_ORDERS`].
    BestPpm,
}

impl CapacityModel {
    pub fn psa() -> Self {
        CapacityModel::Coherent {
            nf: NoiseFigure::PSA_CAPACITY,
        }
    }

    pub fn edfa() -> Self {
        CapacityModel::Coherent {
            nf: NoiseFigure::EDFA_IDEAL,
        }
    }

    pub fn capacity(&self, link: &LinkBudget) -> f64 {
        match *self {
            CapacityModel::Coherent { nf } => capacity_coherent(link, nf),
            CapacityModel::PsaOpticalBandwidth => capacity_coherent_optical_bw(
                2.0 * link.receiver_bandwidth(),
                link.photons_per_symbol_coherent(),
            )
            .expect("link bandwidth is positive"),
            CapacityModel::Ppm { order } => capacity_ppm(link, order),
            CapacityModel::BestPpm => BEST_PPM_ORDERS
                .iter()
                .map(|&m| capacity_ppm(link, PpmOrder::new(m).expect("static orders are valid")))
                .fold(0.0, f64::max),
        }
    }

    pub fn point(&self, link: &LinkBudget) -> CapacityPoint {
        CapacityPoint {
            received_power: link.received_power(),
            capacity: self.capacity(link),
            model: self.to_string(),
        }
    }
}

impl fmt::Display for CapacityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapacityModel::Coherent { nf } if *nf == NoiseFigure::PSA_CAPACITY => {
                f.write_str("psa")
            }
            CapacityModel::Coherent { nf } if *nf == NoiseFigure::EDFA_IDEAL => f.write_str("edfa"),
            CapacityModel::Coherent { nf } => write!(f, "preamp:{}", nf.db()),
            CapacityModel::PsaOpticalBandwidth => f.write_str("psa-optical"),
            CapacityModel::Ppm { order } => write!(f, "ppm:{}", order.get()),
            CapacityModel::BestPpm => f.write_str("ppm:best"),
        }
    }
}

/// Parses `psa`, `edfa`, `psa-optical`, `preamp:<nf_db>`, `ppm:<M>` and
/// `ppm:best`.
impl FromStr for CapacityModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || invalid("model", format!("unknown capacity model `{s}`"));
        match s.as_str() {
            "psa" => Ok(Self::psa()),
            "edfa" => Ok(Self::edfa()),
            "psa-optical" => Ok(CapacityModel::PsaOpticalBandwidth),
            "ppm:best" => Ok(CapacityModel::BestPpm),
            _ => {
                if let Some(rest) = s.strip_prefix("ppm:") {
                    let m: u32 = rest.parse().map_err(|_| bad())?;
                    Ok(CapacityModel::Ppm {
                        order: PpmOrder::new(m)?,
                    })
                } else if let Some(rest) = s.strip_prefix("preamp:") {
                    let db: f64 = rest.parse().map_err(|_| bad())?;
                    Ok(CapacityModel::Coherent {
                        nf: NoiseFigure::from_db(db)?,
                    })
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// One sample of a capacity-versus-power curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    /// Watts.
    pub received_power: f64,
    /// Bits per second.
    pub capacity: f64,
    pub model: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::DEFAULT_WAVELENGTH_M;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn link(dbm: f64, bw: f64) -> LinkBudget {
        LinkBudget::from_dbm(dbm, DEFAULT_WAVELENGTH_M, bw).unwrap()
    }

    fn order(m: u32) -> PpmOrder {
        PpmOrder::new(m).unwrap()
    }

    #[test]
    fn zero_power_zero_capacity() {
        let l = LinkBudget::new(0.0, 193.4e12, 1e10).unwrap();
        assert_eq!(capacity_coherent(&l, NoiseFigure::PSA_CAPACITY), 0.0);
        assert_eq!(capacity_ppm(&l, order(256)), 0.0);
        assert_eq!(capacity_coherent_optical_bw(1e10, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn values_at_minus_85_dbm() {
        // n_s = 2.4674875e-3 coherent, 0.63167680 for 256-PPM.
        let l = link(-85.0, 1e10);
        let ns: f64 = 2.467_487_525_834_694e-3;
        assert_relative_eq!(
            capacity_coherent(&l, NoiseFigure::PSA_CAPACITY),
            1e10 * (1.0 + 4.0 * ns).log2(),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            capacity_coherent(&l, NoiseFigure::PSA_CAPACITY),
            1.417e8,
            max_relative = 1e-3
        );
        let ppm = capacity_ppm(&l, order(256));
        assert_relative_eq!(
            ppm,
            (1.0 - (-256.0 * ns).exp()) * 8.0 / 256.0 * 1e10,
            max_relative = 1e-9
        );
        assert_relative_eq!(ppm, 1.463e8, max_relative = 1e-3);
        assert!(ppm > capacity_coherent(&l, NoiseFigure::PSA_CAPACITY));
    }

    #[test]
    fn ppm_saturates() {
        let l = link(0.0, 1e10);
        assert_relative_eq!(
            capacity_ppm(&l, order(16)),
            1e10 * 4.0 / 16.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn optical_bandwidth_variant() {
        assert_relative_eq!(
            capacity_coherent_optical_bw(2.0, 3.75).unwrap(),
            4.0,
            max_relative = 1e-14
        );
        let l = link(-70.0, 1e10);
        let ns = l.photons_per_symbol_coherent();
        assert_relative_eq!(
            capacity_coherent_optical_bw(2e10, ns).unwrap(),
            capacity_coherent(&l, NoiseFigure::PSA_CAPACITY),
            max_relative = 1e-14
        );
        assert!(capacity_coherent_optical_bw(0.0, 1.0).is_err());
        assert_eq!(
            CapacityModel::PsaOpticalBandwidth.capacity(&l),
            capacity_coherent(&l, NoiseFigure::PSA_CAPACITY)
        );
    }

    #[test]
    fn model_parsing() {
        for s in ["psa", "edfa", "psa-optical", "ppm:16", "ppm:best"] {
            assert_eq!(s.parse::<CapacityModel>().unwrap().to_string(), s);
        }
        assert_eq!(
            "preamp:0".parse::<CapacityModel>().unwrap(),
            CapacityModel::Coherent {
                nf: NoiseFigure::PSA_IDEAL_BER
            }
        );
        assert!("ppm:3".parse::<CapacityModel>().is_err());
        assert!("laser".parse::<CapacityModel>().is_err());
    }

    #[test]
    fn best_ppm_is_upper_envelope() {
        for dbm in [-100.0, -80.0, -60.0, -40.0] {
            let l = link(dbm, 1e10);
            let best = CapacityModel::BestPpm.capacity(&l);
            for m in BEST_PPM_ORDERS {
                assert!(best >= capacity_ppm(&l, order(m)));
            }
        }
    }

    proptest! {
        #[test]
        fn psa_above_edfa(dbm in -130.0f64..0.0) {
            let l = link(dbm, 1e10);
            prop_assert!(capacity_coherent(&l, NoiseFigure::PSA_CAPACITY) > capacity_coherent(&l, NoiseFigure::EDFA_IDEAL));
        }

        #[test]
        fn strictly_increasing_in_power(dbm in -130.0f64..-75.0, m_log in 1u32..=8) {
            let (a, b) = (link(dbm, 1e10), link(dbm + 0.1, 1e10));
            for model in [CapacityModel::psa(), CapacityModel::edfa(), CapacityModel::Ppm { order: order(1 << m_log) }] {
                prop_assert!(model.capacity(&b) > model.capacity(&a));
            }
        }

        #[test]
        fn bandwidth_scaling(dbm in -120.0f64..-30.0, m_log in 1u32..=8) {
            let narrow = link(dbm, 1e9);
            let wide = link(dbm + 10.0, 1e10);
            for model in [CapacityModel::psa(), CapacityModel::edfa(), CapacityModel::Ppm { order: order(1 << m_log) }, CapacityModel::BestPpm] {
                let c1 = model.capacity(&narrow);
                let c10 = model.capacity(&wide);
                prop_assert!((c1 - c10 / 10.0).abs() <= 1e-9 * c1);
            }
        }
    }
}
