use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use photonlink::analytic::{
    ber_3psk, ber_ppm_qpsk, ser_ppm_coherent, ser_ppm_envelope, CapacityModel,
};
use photonlink::link::DEFAULT_WAVELENGTH_M;
use photonlink::sensitivity::{capacity_crossover, sensitivity_table, DEFAULT_POWER_BRACKET_DBM};
use photonlink::{FecProfile, Format, LinkBudget, Metric, NoiseFigure, PpmOrder};

fn error_rates(c: &mut Criterion) {
    let mut g = c.benchmark_group("ser_ppm_envelope");
    for m in [2u32, 16, 256] {
        let order = PpmOrder::new(m).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(m), &order, |b, &order| {
            b.iter(|| ser_ppm_envelope(black_box(12.0), order).unwrap())
        });
    }
    g.finish();
    let m64 = PpmOrder::new(64).unwrap();
    c.bench_function("ser_ppm_coherent/64", |b| {
        b.iter(|| ser_ppm_coherent(black_box(12.0), m64).unwrap())
    });
    c.bench_function("ber_ppm_qpsk/64", |b| {
        b.iter(|| ber_ppm_qpsk(black_box(12.0), m64, Metric::Envelope).unwrap())
    });
    c.bench_function("ber_3psk", |b| b.iter(|| ber_3psk(black_box(6.0)).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let formats: Vec<Format> = ["ppm:16", "ppm:64", "qpsk", "ppmqpsk:16", "ppmqpsk:64"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    c.bench_function("sensitivity_table/5x2", |b| {
        b.iter(|| {
            sensitivity_table(
                &formats,
                &[FecProfile::HIGH_OVERHEAD, FecProfile::LOW_OVERHEAD],
                NoiseFigure::PSA_IDEAL_BER,
                Metric::Envelope,
            )
        })
    });
    let link = LinkBudget::from_dbm(-80.0, DEFAULT_WAVELENGTH_M, 1e10).unwrap();
    c.bench_function("capacity_crossover/edfa-best-ppm", |b| {
        b.iter(|| {
            capacity_crossover(
                &CapacityModel::edfa(),
                &CapacityModel::BestPpm,
                &link,
                DEFAULT_POWER_BRACKET_DBM,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, error_rates, solvers);
criterion_main!(benches);
