//! Closed-form and quadrature error rates.
//!
//! SNR arguments follow the simulator's normalization: every slot is observed
//! through circular complex Gaussian noise with `E|n|² = 1`, and a symbol (or
//! the occupied PPM slot) carries energy `snr_sym`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::formats::{Format, Metric, PpmOrder, THREE_PSK_BLOCK_MAP};
use crate::link::{snr_bit_from_ppb, NoiseFigure};
use crate::special::{
    bessel_i0e, erfc, integrate, ln_normal_cdf, normal_pdf, q_function, Tolerance,
};

/// Gray-coded QPSK bit error rate, `Q(√(2·SNR_bit))`.
pub fn ber_qpsk(snr_bit: f64) -> f64 {
    q_function((2.0 * snr_bit).sqrt())
}

/// BPSK has the same per-bit distance as Gray-coded QPSK, so its BER is the
/// same function of `SNR_bit`.
pub fn ber_bpsk(snr_bit: f64) -> f64 {
    ber_qpsk(snr_bit)
}

fn check_snr(snr: f64) -> Result<()> {
    if snr.is_nan() || snr < 0.0 {
        return Err(invalid("snr", format!("must be non-negative, got {snr}")));
    }
    Ok(())
}

/// Density of the received phase offset `φ ∈ (−π, π]` for a point of energy
/// `snr` in unit-variance circular noise.
pub fn phase_density(phi: f64, snr: f64) -> f64 {
    let c = phi.cos();
    let s = phi.sin();
    (-snr).exp() / (2.0 * PI)
        + 0.5 * (snr / PI).sqrt() * c * (-snr * s * s).exp() * erfc(-snr.sqrt() * c)
}

fn phase_mass(lo: f64, hi: f64, snr: f64, tol: Tolerance) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let mut bps = Vec::new();
    for p in [-PI / 2.0, 0.0, PI / 2.0] {
        if p > lo && p < hi {
            bps.push(p);
        }
    }
    Ok(integrate(|phi| phase_density(phi, snr), lo, hi, &bps, tol)?.value)
}

fn fine_tolerance() -> Tolerance {
    Tolerance {
        absolute: 1e-15,
        relative: 1e-10,
        max_intervals: 2000,
    }
}

/// Symbol error rate of equiprobable 3-PSK with symbol energy `snr_sym`:
/// twice the phase mass beyond the ±π/3 decision boundary.
pub fn ser_3psk(snr_sym: f64) -> Result<f64> {
    check_snr(snr_sym)?;
    Ok((2.0 * phase_mass(PI / 3.0, PI, snr_sym, fine_tolerance())?).min(2.0 / 3.0))
}

fn hamming3(a: usize, b: usize) -> u32 {
    ((a ^ b) & 0b111).count_ones()
}

fn block_index(pair: (u8, u8)) -> Option<usize> {
    THREE_PSK_BLOCK_MAP.iter().position(|&p| p == pair)
}

/// Phase of decision-region-2 offset `u` relative to a transmitted point.
fn offset_from_region_two(u: f64, sent: u8) -> f64 {
    let mut phi = 4.0 * PI / 3.0 + u - 2.0 * PI * f64::from(sent) / 3.0;
    while phi > PI {
        phi -= 2.0 * PI;
    }
    while phi <= -PI {
        phi += 2.0 * PI;
    }
    phi
}

/// Probability that both symbols land in region 2 and the fallback rule
/// re-decides the first one toward the side `positive` (`u > 0` moves to
/// point 0, `u < 0` to point 1). The fallback re-decides whichever symbol is
/// further from point 2.
fn fallback_probability(first: u8, second: u8, positive: bool, snr: f64) -> Result<f64> {
    let tol = fine_tolerance();
    let inner = |a: f64| -> f64 {
        // P(|u2| < a), u2 the second symbol's offset within region 2.
        let lo = offset_from_region_two(-a, second);
        let hi = offset_from_region_two(a, second);
        if hi >= lo {
            phase_mass(lo, hi, snr, tol).unwrap_or(f64::NAN)
        } else {
            // Interval wraps through ±π.
            phase_mass(lo, PI, snr, tol).unwrap_or(f64::NAN)
                + phase_mass(-PI, hi, snr, tol).unwrap_or(f64::NAN)
        }
    };
    let outer = |a: f64| {
        let u = if positive { a } else { -a };
        phase_density(offset_from_region_two(u, first), snr) * inner(a)
    };
    Ok(integrate(outer, 0.0, PI / 3.0, &[], tol)?.value)
}

/// Bit error rate of 3-PSK under the block map of
/// [`THREE_PSK_BLOCK_MAP`], including the fallback for the unused pair.
pub fn ber_3psk(snr_sym: f64) -> Result<f64> {
    check_snr(snr_sym)?;
    let ser = ser_3psk(snr_sym)?;
    let p_decide = |sent: u8, got: u8| if sent == got { 1.0 - ser } else { 0.5 * ser };
    let mut fallback = [[[0.0f64; 2]; 3]; 3];
    for (a, row) in fallback.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            for (k, positive) in [(0, true), (1, false)] {
                cell[k] = fallback_probability(a as u8, b as u8, positive, snr_sym)?;
            }
        }
    }
    let mut errors = 0.0;
    for (v, &(t0, t1)) in THREE_PSK_BLOCK_MAP.iter().enumerate() {
        for d0 in 0..3u8 {
            for d1 in 0..3u8 {
                if let Some(w) = block_index((d0, d1)) {
                    errors += p_decide(t0, d0) * p_decide(t1, d1) * f64::from(hamming3(v, w));
                }
            }
        }
        // (2, 2) decided: re-decide the first or the second symbol.
        for (k, moved_to) in [(0usize, 0u8), (1, 1)] {
            let w = block_index((moved_to, 2)).expect("pair is used");
            errors += fallback[t0 as usize][t1 as usize][k] * f64::from(hamming3(v, w));
            let w = block_index((2, moved_to)).expect("pair is used");
            errors += fallback[t1 as usize][t0 as usize][k] * f64::from(hamming3(v, w));
        }
    }
    Ok(errors / (8.0 * 3.0))
}

fn ppm_tolerance() -> Tolerance {
    Tolerance::default()
}

/// `M`-PPM symbol error rate with maximum-envelope slot decisions
/// (noncoherent orthogonal signaling).
///
/// The occupied slot's squared envelope `y` follows a noncentral χ² law with
/// density `e^{−(y+s)} I0(2√(ys))`; each empty slot stays below `y` with
/// probability `1 − e^{−y}`. The error probability
/// `∫ e^{−(y+s)} I0(2√(ys)) [1 − (1 − e^{−y})^{M−1}] dy` is integrated in
/// `t = √y` with the Bessel factor in scaled form, which keeps the integrand
/// smooth and overflow free for any `s`.
pub fn ser_ppm_envelope(snr_sym: f64, m: PpmOrder) -> Result<f64> {
    check_snr(snr_sym)?;
    let others = f64::from(m.get() - 1);
    let root_s = snr_sym.sqrt();
    let integrand = |t: f64| {
        let y = t * t;
        let miss = -(others * (-(-y).exp()).ln_1p()).exp_m1();
        2.0 * t * (-(t - root_s) * (t - root_s)).exp() * bessel_i0e(2.0 * t * root_s) * miss
    };
    let upper = (snr_sym + 40.0 * root_s + 40.0).sqrt();
    let knee = others.ln().max(0.0).sqrt();
    let r = integrate(integrand, 0.0, upper, &[root_s, knee], ppm_tolerance())?;
    Ok(r.value.clamp(0.0, others / f64::from(m.get())))
}

/// `M`-PPM symbol error rate with known-phase, maximum-real-part slot
/// decisions: `∫ φ(x − √(2s)) [1 − Φ(x)^{M−1}] dx`.
pub fn ser_ppm_coherent(snr_sym: f64, m: PpmOrder) -> Result<f64> {
    check_snr(snr_sym)?;
    let others = f64::from(m.get() - 1);
    let mean = (2.0 * snr_sym).sqrt();
    let integrand = |x: f64| normal_pdf(x - mean) * -(others * ln_normal_cdf(x)).exp_m1();
    let r = integrate(
        integrand,
        mean - 14.0,
        mean + 14.0,
        &[0.0, mean],
        ppm_tolerance(),
    )?;
    Ok(r.value.clamp(0.0, others / f64::from(m.get())))
}

pub fn ser_ppm(snr_sym: f64, m: PpmOrder, metric: Metric) -> Result<f64> {
    match metric {
        Metric::Envelope => ser_ppm_envelope(snr_sym, m),
        Metric::CoherentReal => ser_ppm_coherent(snr_sym, m),
    }
}

/// Expected fraction of bits in error when a PPM symbol error picks one of
/// the other `M − 1` slots uniformly: `M / (2(M − 1))`.
pub fn ppm_bit_error_factor(m: PpmOrder) -> f64 {
    let m = f64::from(m.get());
    m / (2.0 * (m - 1.0))
}

pub fn ber_ppm(snr_sym: f64, m: PpmOrder, metric: Metric) -> Result<f64> {
    Ok(ser_ppm(snr_sym, m, metric)? * ppm_bit_error_factor(m))
}

/// Combines a PPM symbol error rate and a QPSK bit error rate into the
/// M-PPM+QPSK bit error rate. A wrong slot costs the expected PPM bit errors
/// plus, on average, one of the two QPSK bits; a correct slot leaves only the
/// QPSK errors.
pub fn combine_ppm_qpsk(ser_ppm: f64, ber_qpsk: f64, m: PpmOrder) -> f64 {
    let log2m = f64::from(m.log2());
    (ser_ppm * (1.0 + ppm_bit_error_factor(m) * log2m) + (1.0 - ser_ppm) * 2.0 * ber_qpsk)
        / (log2m + 2.0)
}

/// M-PPM+QPSK bit error rate at symbol SNR `snr_sym`. The QPSK term is
/// evaluated at the pulse's own per-bit SNR, `snr_sym / 2`, since the whole
/// symbol energy sits in one slot. Only the envelope metric has a matching
/// closed form.
pub fn ber_ppm_qpsk(snr_sym: f64, m: PpmOrder, metric: Metric) -> Result<f64> {
    if metric != Metric::Envelope {
        return Err(invalid(
            "metric",
            "PPM+QPSK closed form is only available for envelope slot decisions",
        ));
    }
    let ser = ser_ppm_envelope(snr_sym, m)?;
    Ok(combine_ppm_qpsk(ser, ber_qpsk(snr_sym / 2.0), m))
}

/// Photon-counting `M`-PPM without background: only empty frames (probability
/// `e^{−n_s}`) err, and the uniform guess misses with probability
/// `(M − 1)/M`.
pub fn ser_ppm_photon_counting(photons_per_symbol: f64, m: PpmOrder) -> f64 {
    let m = f64::from(m.get());
    (m - 1.0) / m * (-photons_per_symbol).exp()
}

/// `e^{−n_s} / 2`: the PPM bit factor cancels the guess-miss probability.
pub fn ber_ppm_photon_counting(photons_per_symbol: f64, m: PpmOrder) -> f64 {
    ser_ppm_photon_counting(photons_per_symbol, m) * ppm_bit_error_factor(m)
}

/// Bit error rate of any format at symbol SNR `snr_sym`.
pub fn format_ber(fmt: Format, snr_sym: f64, metric: Metric) -> Result<f64> {
    check_snr(snr_sym)?;
    match fmt {
        Format::Bpsk => Ok(ber_bpsk(snr_sym)),
        Format::Qpsk => Ok(ber_qpsk(snr_sym / 2.0)),
        Format::ThreePsk => ber_3psk(snr_sym),
        Format::Ppm(m) => ber_ppm(snr_sym, m, metric),
        Format::PpmQpsk(m) => ber_ppm_qpsk(snr_sym, m, metric),
    }
}

/// Bit error rate at a raw photons-per-bit operating point: `PPB_t` maps to
/// `SNR_bit = 2·PPB_t/NF` and `SNR_sym = N·SNR_bit`.
pub fn ber_at_ppb(fmt: Format, ppb: f64, nf: NoiseFigure, metric: Metric) -> Result<f64> {
    if ppb.is_nan() || ppb < 0.0 {
        return Err(invalid("ppb", format!("must be non-negative, got {ppb}")));
    }
    format_ber(
        fmt,
        fmt.bits_per_symbol() * snr_bit_from_ppb(ppb, nf),
        metric,
    )
}

/// Bit error rate for a format with no signal at all.
pub fn guessing_ber(fmt: Format) -> Result<f64> {
    format_ber(fmt, 0.0, Metric::Envelope)
}

/// BER-versus-PPB curve over a grid of raw photons-per-bit values (linear).
pub fn ber_curve(
    fmt: Format,
    nf: NoiseFigure,
    ppb_grid: &[f64],
    metric: Metric,
) -> Result<Vec<(f64, f64)>> {
    ppb_grid
        .iter()
        .map(|&ppb| {
            if ppb.is_nan() || ppb <= 0.0 {
                return Err(invalid(
                    "ppb",
                    format!("grid values must be positive, got {ppb}"),
                ));
            }
            Ok((ppb, ber_at_ppb(fmt, ppb, nf, metric)?))
        })
        .collect()
}
