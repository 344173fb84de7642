use sot_core::estimator::{estimate, EstimatorConfig, PitchHint, Variant};
use sot_core::synth::synthesize;
use sot_core::{HarmonicParams, PitchGrid, SynthConfig};

fn semitones(a: f64, b: f64) -> f64 {
    12.0 * (a / b).log2()
}

#[test]
fn hinted_start_converges_to_grid_aligned_pitch() {
    let grid = PitchGrid::default();
    let synth = SynthConfig::default();
    for (bin, amps) in [(120, vec![0.9, 0.6, 0.4]), (150, vec![0.8]), (90, vec![0.5, 0.9, 0.7, 0.4])] {
        let f0 = grid.freq(bin);
        let mut a = vec![0.0; synth.n_harmonics];
        a[..amps.len()].copy_from_slice(&amps);
        let target = synthesize(&HarmonicParams::constant(f0, &a, synth.n_frames()), &synth).unwrap();
        let cfg = EstimatorConfig {
            variant: Variant::Sot2048,
            max_steps: 500,
            // unit-std noise at temperature 0.1 would swamp any moderate bias
            init_std: 0.01,
            hint: Some(PitchHint::new(f0 * 2f64.powf(0.7 / 12.0), 2.0)),
            ..EstimatorConfig::default()
        };
        let r = estimate(&target, &cfg).unwrap();
        let worst = r
            .f0_frames
            .iter()
            .map(|&f| semitones(f, f0).abs())
            .fold(0.0, f64::max);
        println!("bin {bin}: worst frame {worst:.4} semitones, best step {}", r.best_step);
        assert!(worst <= 0.1, "bin {bin}: {:?}", r.f0_frames);
    }
}

#[test]
fn silent_target_drives_amplitudes_to_the_floor() {
    let cfg = EstimatorConfig {
        variant: Variant::MssLin,
        // the amplitude gradient shrinks with the amplitude and Adam's second
        // moment remembers the early large steps, so the decay is slow
        max_steps: 4000,
        ..EstimatorConfig::default()
    };
    let target = vec![0.0; cfg.synth.n_samples];
    let r = estimate(&target, &cfg).unwrap();
    let recon = r.resynthesize().unwrap();
    let rms = (recon.iter().map(|v| v * v).sum::<f64>() / recon.len() as f64).sqrt();
    println!("silent target: rms {rms:.3e} after {} steps", r.steps);
    assert!(rms <= 1e-3, "{rms}");
}
