use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sot_bench::{harmonic_tone, spectrum_measure};
use sot_core::estimator::{estimate, EstimatorConfig};
use sot_core::losses::{MssConfig, MssObjective, SignalLoss, SotConfig, SotObjective};
use sot_core::measure1d::{wasserstein_pp, wasserstein_with_gradients};
use sot_core::spectral::stft;
use sot_core::synth::{synthesize, synthesize_adjoint};
use sot_core::{OtConfig, SpectrumKind, StftConfig, Variant, WindowKind};

fn transport(c: &mut Criterion) {
    let mut group = c.benchmark_group("wasserstein");
    let cfg = OtConfig::with_p(2);
    for n in [257, 1025] {
        let a = spectrum_measure(n, 0.3);
        let b = spectrum_measure(n, 0.55);
        group.bench_with_input(BenchmarkId::new("value", n), &n, |bench, _| {
            bench.iter(|| wasserstein_pp(black_box(&a), black_box(&b), &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("with_gradients", n), &n, |bench, _| {
            bench.iter(|| wasserstein_with_gradients(black_box(&a), black_box(&b), &cfg).unwrap())
        });
    }
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let (signal, _, _) = harmonic_tone(220.0, 6);
    let mut group = c.benchmark_group("stft");
    for size in [512, 2048] {
        let cfg = StftConfig::new(size, 256, WindowKind::Flattop);
        group.bench_with_input(BenchmarkId::new("power", size), &size, |bench, _| {
            bench.iter(|| stft(black_box(&signal), &cfg, SpectrumKind::Power).unwrap())
        });
    }
    group.finish();
}

fn synth(c: &mut Criterion) {
    let (_, params, cfg) = harmonic_tone(220.0, 20);
    let cot = vec![1e-3; cfg.n_samples];
    let mut group = c.benchmark_group("synth");
    group.bench_function("forward", |bench| {
        bench.iter(|| synthesize(black_box(&params), &cfg).unwrap())
    });
    group.bench_function("adjoint", |bench| {
        bench.iter(|| synthesize_adjoint(black_box(&params), &cfg, &cot).unwrap())
    });
    group.finish();
}

fn objectives(c: &mut Criterion) {
    let (target, _, _) = harmonic_tone(220.0, 5);
    let (estimate_signal, _, _) = harmonic_tone(247.0, 8);
    let mut group = c.benchmark_group("value_and_grad");
    let sot = SotObjective::new(&target, &SotConfig::with_window(2048)).unwrap();
    group.bench_function("sot_2048", |bench| {
        bench.iter(|| sot.value_and_grad(black_box(&estimate_signal)).unwrap())
    });
    let mss = MssObjective::new(&target, &MssConfig::default()).unwrap();
    group.bench_function("mss_lin", |bench| {
        bench.iter(|| mss.value_and_grad(black_box(&estimate_signal)).unwrap())
    });
    group.finish();
}

fn estimator_steps(c: &mut Criterion) {
    let (target, _, _) = harmonic_tone(220.0, 5);
    let mut group = c.benchmark_group("estimate_10_steps");
    group.sample_size(10);
    for variant in [Variant::Sot2048, Variant::MssLin] {
        let cfg = EstimatorConfig {
            variant,
            max_steps: 10,
            ..EstimatorConfig::default()
        };
        group.bench_function(variant.name(), |bench| {
            bench.iter(|| estimate(black_box(&target), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, transport, spectral, synth, objectives, estimator_steps);
criterion_main!(benches);
