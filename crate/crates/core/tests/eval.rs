use sot_core::eval::{lsd, lsd_with_epsilon, rpa_rca_od, spearman, PitchTrack};
use sot_core::spectral::{stft, SpectrumKind, StftConfig, WindowKind};

mod common;
use common::*;

#[test]
fn lsd_matches_a_direct_double_loop() {
    let mut r = rng(3);
    for _ in 0..5 {
        let a = noise(&mut r, 4096);
        let b = noise(&mut r, 4096);
        let cfg = StftConfig::new(1024, 256, WindowKind::Hann);
        let sa = stft(&a, &cfg, SpectrumKind::Magnitude).unwrap();
        let sb = stft(&b, &cfg, SpectrumKind::Magnitude).unwrap();
        let (l, m) = sa.frames.dim();
        let mut acc = 0.0;
        for j in 0..l {
            for k in 0..m {
                let d = (sa.frames[[j, k]] + 1e-7).ln() - (sb.frames[[j, k]] + 1e-7).ln();
                acc += d * d;
            }
        }
        let direct = acc / (l * m) as f64;
        assert!((lsd(&a, &b).unwrap() - direct).abs() <= 1e-12);
    }
}

#[test]
fn scaling_by_e_gives_unit_lsd() {
    // magnitudes scale linearly with the signal, so every log-difference is
    // exactly 1 once the guard is removed
    let mut r = rng(4);
    let a = noise(&mut r, 2048);
    let b: Vec<f64> = a.iter().map(|v| v * std::f64::consts::E).collect();
    let v = lsd_with_epsilon(&a, &b, 0.0).unwrap();
    assert!((v - 1.0).abs() <= 1e-12, "{v}");
}

#[test]
fn rpa_never_exceeds_rca() {
    let mut r = rng(5);
    use rand::Rng;
    for _ in 0..200 {
        let truth: Vec<f64> = (0..16).map(|_| r.gen_range(40.0..2000.0)).collect();
        let est: Vec<f64> = truth.iter().map(|t| t * 2f64.powf(r.gen_range(-3.0..3.0))).collect();
        let (rpa, rca, _) =
            rpa_rca_od(&PitchTrack::new(est).unwrap(), &PitchTrack::new(truth).unwrap()).unwrap();
        assert!((0.0..=100.0).contains(&rpa) && rpa <= rca && rca <= 100.0);
    }
}

#[test]
fn spearman_is_rank_based() {
    let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0).collect();
    assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
}
