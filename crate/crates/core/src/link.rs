//! Photon accounting and link bookkeeping.
//!
//! Everything here is a pure unit conversion: received power to photons per
//! symbol, photons to pre-amplified SNR, SNR per bit to photons per bit, and
//! the code-rate relation between raw (pre-FEC) and information (post-FEC)
//! photons per bit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Carrier wavelength assumed when none is given, metres.
pub const DEFAULT_WAVELENGTH_M: f64 = 1550e-9;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts / 1e-3)
}

/// Optical frequency (Hz) of a carrier with the given vacuum wavelength (m).
pub fn frequency_from_wavelength(wavelength_m: f64) -> Result<f64> {
    if !(wavelength_m.is_finite() && wavelength_m > 0.0) {
        return Err(invalid(
            "wavelength",
            format!("must be positive, got {wavelength_m}"),
        ));
    }
    Ok(SPEED_OF_LIGHT / wavelength_m)
}

/// Received optical power together with the carrier frequency and the
/// electrical bandwidth of the receiver.
///
/// For PPM the receiver bandwidth is the slot rate, so a slot lasts
/// `1 / receiver_bandwidth` and a symbol `M` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    received_power: f64,
    optical_frequency: f64,
    receiver_bandwidth: f64,
}

impl LinkBudget {
    pub fn new(
        received_power: f64,
        optical_frequency: f64,
        receiver_bandwidth: f64,
    ) -> Result<Self> {
        if !(received_power.is_finite() && received_power >= 0.0) {
            return Err(invalid(
                "received_power",
                format!("must be finite and non-negative, got {received_power}"),
            ));
        }
        if !(optical_frequency.is_finite() && optical_frequency > 0.0) {
            return Err(invalid(
                "optical_frequency",
                format!("must be positive, got {optical_frequency}"),
            ));
        }
        if !(receiver_bandwidth.is_finite() && receiver_bandwidth > 0.0) {
            return Err(invalid(
                "receiver_bandwidth",
                format!("must be positive, got {receiver_bandwidth}"),
            ));
        }
        Ok(Self {
            received_power,
            optical_frequency,
            receiver_bandwidth,
        })
    }

    /// Convenience constructor taking power in dBm and wavelength in metres.
    pub fn from_dbm(power_dbm: f64, wavelength_m: f64, receiver_bandwidth: f64) -> Result<Self> {
        Self::new(
            dbm_to_watts(power_dbm),
            frequency_from_wavelength(wavelength_m)?,
            receiver_bandwidth,
        )
    }

    pub fn received_power(&self) -> f64 {
        self.received_power
    }

    pub fn received_power_dbm(&self) -> f64 {
        watts_to_dbm(self.received_power)
    }

    pub fn optical_frequency(&self) -> f64 {
        self.optical_frequency
    }

    pub fn receiver_bandwidth(&self) -> f64 {
        self.receiver_bandwidth
    }

    /// Same carrier and bandwidth at a different received power.
    pub fn with_power(&self, received_power: f64) -> Result<Self> {
        Self::new(
            received_power,
            self.optical_frequency,
            self.receiver_bandwidth,
        )
    }

    /// Attenuates the received power by a constant implementation penalty.
    pub fn with_penalty_db(&self, penalty_db: f64) -> Result<Self> {
        self.with_power(self.received_power / db_to_linear(penalty_db))
    }

    /// Energy of one photon at the carrier frequency, J.
    pub fn photon_energy(&self) -> f64 {
        PLANCK * self.optical_frequency
    }

    /// Photon arrival rate at the receiver, photons/s.
    pub fn photon_rate(&self) -> f64 {
        self.received_power / self.photon_energy()
    }

    /// PPM slot duration (equal to the coherent symbol duration), s.
    pub fn slot_duration(&self) -> f64 {
        1.0 / self.receiver_bandwidth
    }

    /// Duration of an `m`-slot PPM symbol, s.
    pub fn ppm_symbol_duration(&self, m: u32) -> f64 {
        f64::from(m) * self.slot_duration()
    }

    /// Mean received photons per coherent symbol, `P / (h·ν·B)`.
    pub fn photons_per_symbol_coherent(&self) -> f64 {
        self.received_power / (PLANCK * self.optical_frequency * self.receiver_bandwidth)
    }

    /// Mean received photons per `m`-PPM symbol: the whole symbol's energy
    /// lands in one slot, so this is `m` times the coherent count.
    pub fn photons_per_symbol_ppm(&self, m: u32) -> Result<f64> {
        if m < 2 {
            return Err(invalid(
                "M",
                format!("PPM order must be at least 2, got {m}"),
            ));
        }
        Ok(f64::from(m) * self.photons_per_symbol_coherent())
    }
}

/// Pre-amplifier noise figure as a linear power ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseFigure(f64);

impl NoiseFigure {
    /// Phase-sensitive amplifier in the capacity analysis, where each of the
    /// signal and idler waves sees NF = 1/2.
    pub const PSA_CAPACITY: NoiseFigure = NoiseFigure(0.5);
    /// Phase-sensitive amplifier in the BER and sensitivity analysis
    /// (NF = 0 dB).
    pub const PSA_IDEAL_BER: NoiseFigure = NoiseFigure(1.0);
    /// Ideal phase-insensitive amplifier (3 dB quantum limit).
    pub const EDFA_IDEAL: NoiseFigure = NoiseFigure(2.0);

    pub fn new(linear: f64) -> Result<Self> {
        if !(linear.is_finite() && linear > 0.0) {
            return Err(invalid(
                "noise_figure",
                format!("must be positive, got {linear}"),
            ));
        }
        Ok(Self(linear))
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(db_to_linear(db))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        linear_to_db(self.0)
    }
}

/// Forward error correction operating point: code rate `k` (information bits
/// per transmitted bit) and the pre-FEC BER the decoder is assumed to clean up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FecProfile {
    code_rate: f64,
    target_pre_fec_ber: f64,
}

impl FecProfile {
    /// 100% overhead code at a 14% pre-FEC threshold.
    pub const HIGH_OVERHEAD: FecProfile = FecProfile {
        code_rate: 0.5,
        target_pre_fec_ber: 0.14,
    };
    /// ~7% overhead hard-decision code at a 1e-3 pre-FEC threshold.
    pub const LOW_OVERHEAD: FecProfile = FecProfile {
        code_rate: 1.0 / 1.07,
        target_pre_fec_ber: 1e-3,
    };

    pub fn new(code_rate: f64, target_pre_fec_ber: f64) -> Result<Self> {
        check_code_rate(code_rate)?;
        if !(target_pre_fec_ber > 0.0 && target_pre_fec_ber < 0.5) {
            return Err(invalid(
                "target_pre_fec_ber",
                format!("must lie in (0, 0.5), got {target_pre_fec_ber}"),
            ));
        }
        Ok(Self {
            code_rate,
            target_pre_fec_ber,
        })
    }

    pub fn code_rate(&self) -> f64 {
        self.code_rate
    }

    pub fn target_pre_fec_ber(&self) -> f64 {
        self.target_pre_fec_ber
    }

    /// Redundancy relative to the information bits (1.0 means 100%).
    pub fn overhead(&self) -> f64 {
        1.0 / self.code_rate - 1.0
    }
}

/// Photons per raw (pre-FEC) transmitted bit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhotonsPerBit(f64);

impl PhotonsPerBit {
    pub fn new(raw: f64) -> Result<Self> {
        if !(raw.is_finite() && raw > 0.0) {
            return Err(invalid("ppb", format!("must be positive, got {raw}")));
        }
        Ok(Self(raw))
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(db_to_linear(db))
    }

    pub fn raw(self) -> f64 {
        self.0
    }

    pub fn raw_db(self) -> f64 {
        linear_to_db(self.0)
    }

    /// Photons per information bit once a rate-`k` code is accounted for.
    pub fn post_fec(self, code_rate: f64) -> Result<f64> {
        ppb_post_fec(self.0, code_rate)
    }
}

fn check_code_rate(k: f64) -> Result<()> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(invalid("code_rate", format!("must lie in (0, 1], got {k}")));
    }
    Ok(())
}

pub fn photons_per_symbol_coherent(link: &LinkBudget) -> f64 {
    link.photons_per_symbol_coherent()
}

pub fn photons_per_symbol_ppm(link: &LinkBudget, m: u32) -> Result<f64> {
    link.photons_per_symbol_ppm(m)
}

/// SNR per symbol of an optically pre-amplified receiver, `2·n_s / NF`.
pub fn snr_per_symbol(photons_per_symbol: f64, nf: NoiseFigure) -> f64 {
    2.0 * photons_per_symbol / nf.linear()
}

pub fn snr_bit_from_symbol(snr_sym: f64, bits_per_symbol: f64) -> Result<f64> {
    if bits_per_symbol.is_nan() || bits_per_symbol <= 0.0 {
        return Err(invalid(
            "bits_per_symbol",
            format!("must be positive, got {bits_per_symbol}"),
        ));
    }
    Ok(snr_sym / bits_per_symbol)
}

/// Photons per bit needed for a given SNR per bit, `NF · SNR_bit / 2`.
pub fn ppb_from_snr_bit(snr_bit: f64, nf: NoiseFigure) -> f64 {
    nf.linear() * snr_bit / 2.0
}

pub fn snr_bit_from_ppb(ppb: f64, nf: NoiseFigure) -> f64 {
    2.0 * ppb / nf.linear()
}

/// Photons per information bit from photons per raw bit: `PPB = PPB_t / k`.
pub fn ppb_post_fec(ppb_raw: f64, code_rate: f64) -> Result<f64> {
    check_code_rate(code_rate)?;
    Ok(ppb_raw / code_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn link_1550(power_dbm: f64) -> LinkBudget {
        LinkBudget::from_dbm(power_dbm, DEFAULT_WAVELENGTH_M, 10e9).unwrap()
    }

    #[test]
    fn zero_power_has_no_photons() {
        let link = LinkBudget::new(0.0, 193.4e12, 1e10).unwrap();
        assert_eq!(link.photons_per_symbol_coherent(), 0.0);
        assert_eq!(link.photons_per_symbol_ppm(256).unwrap(), 0.0);
    }

    #[test]
    fn photon_counts_at_1550nm() {
        // 1e-8 W / (6.62607015e-34 * 299792458/1550e-9 * 1e10) by hand.
        let expected = 1e-8 / (PLANCK * (SPEED_OF_LIGHT / 1550e-9) * 1e10);
        assert_relative_eq!(expected, 7.802_880_7, max_relative = 1e-7);
        assert_relative_eq!(
            link_1550(-50.0).photons_per_symbol_coherent(),
            expected,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            link_1550(-85.0).photons_per_symbol_coherent(),
            2.467_487_5e-3,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            link_1550(-85.0).photons_per_symbol_ppm(256).unwrap(),
            0.631_676,
            max_relative = 1e-5
        );
    }

    #[test]
    fn ppm_count_is_m_times_coherent() {
        let link = link_1550(-70.0);
        let x = link.photons_per_symbol_coherent();
        assert_eq!(link.photons_per_symbol_ppm(2).unwrap(), 2.0 * x);
        assert!(link.photons_per_symbol_ppm(1).is_err());
    }

    #[test]
    fn rejects_bad_link_parameters() {
        assert!(LinkBudget::new(1e-9, 0.0, 1e10).is_err());
        assert!(LinkBudget::new(1e-9, 1e14, -1.0).is_err());
        assert!(LinkBudget::new(-1e-9, 1e14, 1e10).is_err());
        assert!(LinkBudget::new(f64::NAN, 1e14, 1e10).is_err());
    }

    #[test]
    fn snr_relations() {
        assert_eq!(snr_per_symbol(1.0, NoiseFigure::PSA_CAPACITY), 4.0);
        assert_eq!(snr_per_symbol(1.0, NoiseFigure::EDFA_IDEAL), 1.0);
        assert_eq!(snr_per_symbol(0.0, NoiseFigure::EDFA_IDEAL), 0.0);
        assert_eq!(snr_bit_from_symbol(4.0, 2.0).unwrap(), 2.0);
        assert_relative_eq!(
            snr_bit_from_symbol(16.2, 6.0).unwrap(),
            2.7,
            max_relative = 1e-15
        );
        assert_eq!(snr_bit_from_symbol(3.3, 1.0).unwrap(), 3.3);
        assert!(snr_bit_from_symbol(1.0, 0.0).is_err());
    }

    #[test]
    fn ppb_conversions() {
        let ppb = ppb_from_snr_bit(4.766, NoiseFigure::PSA_IDEAL_BER);
        assert_relative_eq!(ppb, 2.383, max_relative = 1e-12);
        assert!((linear_to_db(ppb) - 3.8).abs() < 0.05);
        assert_eq!(ppb_from_snr_bit(0.0, NoiseFigure::PSA_IDEAL_BER), 0.0);
        assert_eq!(
            ppb_from_snr_bit(3.0, NoiseFigure::EDFA_IDEAL),
            2.0 * ppb_from_snr_bit(3.0, NoiseFigure::PSA_IDEAL_BER)
        );
    }

    #[test]
    fn post_fec_bookkeeping() {
        assert_relative_eq!(ppb_post_fec(0.4, 0.5).unwrap(), 0.8);
        assert_eq!(ppb_post_fec(0.37, 1.0).unwrap(), 0.37);
        let raw = PhotonsPerBit::from_db(-3.7).unwrap();
        let post = raw.post_fec(0.5).unwrap();
        assert_relative_eq!(post, 0.853_1, max_relative = 1e-3);
        assert!((linear_to_db(post) - -0.69).abs() < 0.01);
        assert!(ppb_post_fec(0.4, 0.0).is_err());
        assert!(ppb_post_fec(0.4, 1.2).is_err());
    }

    #[test]
    fn fec_profiles() {
        assert_relative_eq!(FecProfile::HIGH_OVERHEAD.overhead(), 1.0);
        assert_relative_eq!(
            FecProfile::LOW_OVERHEAD.overhead(),
            0.07,
            max_relative = 1e-12
        );
        assert!(FecProfile::new(0.5, 0.5).is_err());
        assert!(FecProfile::new(0.0, 0.1).is_err());
    }

    #[test]
    fn noise_figure_presets() {
        assert_relative_eq!(NoiseFigure::EDFA_IDEAL.db(), 3.0103, max_relative = 1e-4);
        assert_eq!(NoiseFigure::PSA_IDEAL_BER.db(), 0.0);
        assert!(NoiseFigure::new(0.0).is_err());
    }

    proptest! {
        #[test]
        fn db_round_trip(db in -200.0f64..200.0) {
            let back = linear_to_db(db_to_linear(db));
            prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
            let lin = db_to_linear(db);
            prop_assert!((db_to_linear(linear_to_db(lin)) - lin).abs() <= 1e-12 * lin);
        }

        #[test]
        fn noise_figure_db_round_trip(db in -10.0f64..20.0) {
            let nf = NoiseFigure::from_db(db).unwrap();
            prop_assert!((nf.db() - db).abs() <= 1e-12 * db.abs().max(1.0));
        }

        #[test]
        fn ppb_snr_round_trip(ppb in 1e-6f64..1e6, nf in 0.1f64..20.0) {
            let nf = NoiseFigure::new(nf).unwrap();
            let back = ppb_from_snr_bit(snr_bit_from_ppb(ppb, nf), nf);
            prop_assert!((back - ppb).abs() <= 1e-12 * ppb);
        }

        #[test]
        fn post_fec_never_below_raw(raw in 1e-3f64..1e3, k in 1e-3f64..=1.0) {
            prop_assert!(ppb_post_fec(raw, k).unwrap() >= raw);
        }

        #[test]
        fn conversions_are_pure(p in 0.0f64..1e-3) {
            let link = LinkBudget::new(p, 193.4e12, 1e10).unwrap();
            prop_assert_eq!(
                link.photons_per_symbol_coherent().to_bits(),
                link.photons_per_symbol_coherent().to_bits()
            );
        }
    }
}
