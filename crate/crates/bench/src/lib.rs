//! Fixed inputs shared by the benchmarks.

use sot_core::synth::synthesize;
use sot_core::{DiscreteMeasure, HarmonicParams, SynthConfig};

/// Harmonic tone with decaying partials at the default synth settings.
pub fn harmonic_tone(f0: f64, n_harmonics: usize) -> (Vec<f64>, HarmonicParams, SynthConfig) {
    let cfg = SynthConfig::default();
    let amps: Vec<f64> = (0..cfg.n_harmonics)
        .map(|h| if h < n_harmonics { 0.8 / (h + 1) as f64 } else { 0.0 })
        .collect();
    let params = HarmonicParams::constant(f0, &amps, cfg.n_frames());
    let signal = synthesize(&params, &cfg).expect("valid synth config");
    (signal, params, cfg)
}

/// Unit-mass measure over `n` evenly spaced bins with a smooth bump of
/// weights, like one normalized spectrum frame.
pub fn spectrum_measure(n: usize, centre: f64) -> DiscreteMeasure {
    let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let raw: Vec<f64> = x
        .iter()
        .map(|&v| (-(v - centre).powi(2) / 0.01).exp() + 1e-6)
        .collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    DiscreteMeasure::new(&x, &w).expect("sorted positions and positive weights")
}
