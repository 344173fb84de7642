//! Self-checks against independent oracles: transport equivalence, metric
//! axioms, finite-difference gradients, the loss sweep ordering, synthesizer
//! exactness and the metric unit cases.
//!
//! Each check is seeded and runs in well under a minute; `run_all` backs the
//! command-line `validate` subcommand.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::eval::{lsd_with_epsilon, rpa_rca_od, spearman, PitchTrack};
use crate::losses::{combined_loss, loss_sweep, MssConfig, SotConfig, SweepConfig, SweepRow};
use crate::measure1d::{
    monotone_plan, quantized_atom_oracle, transport_cost_relaxed, wasserstein_pp,
    wasserstein_with_gradients, DiscreteMeasure, OtConfig,
};
use crate::spectral::{stft, stft_power_adjoint, SpectrumKind, StftConfig, WindowKind};
use crate::synth::{synthesize, synthesize_adjoint, HarmonicParams, SynthConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn noise(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], alpha: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + alpha * b).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn sorted_positions(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| r.gen_range(lo..hi)).collect();
        x.sort_by(f64::total_cmp);
        if x.windows(2).all(|w| w[0] < w[1]) {
            return x;
        }
    }
}

/// Unit-mass measure with weights that are positive multiples of `1 / q`.
fn quantized_measure(r: &mut ChaCha8Rng, max_atoms: usize, q: usize) -> Result<DiscreteMeasure> {
    let n = r.gen_range(1..=max_atoms.min(q));
    let mut cuts = rand::seq::index::sample(r, q - 1, n - 1).into_vec();
    cuts.iter_mut().for_each(|c| *c += 1);
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(q);
    let w: Vec<f64> = bounds.windows(2).map(|b| (b[1] - b[0]) as f64 / q as f64).collect();
    DiscreteMeasure::new(&sorted_positions(r, n, 0.0, 1.0), &w)
}

fn random_measure(r: &mut ChaCha8Rng, n: usize, mass: f64, lo: f64, hi: f64) -> Result<DiscreteMeasure> {
    let raw: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v * mass / s).collect();
    DiscreteMeasure::new(&sorted_positions(r, n, lo, hi), &w)
}

/// Closed form against the equal-mass atom oracle and the monotone plan on
/// 200 pairs with weights in multiples of 1/64.
pub fn transport_oracle_equivalence() -> Result<CheckOutcome> {
    let t = Instant::now();
    let mut r = rng(1001);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let p = 1 + (case % 2) as u32;
        let a = quantized_measure(&mut r, 12, 64)?;
        let b = quantized_measure(&mut r, 12, 64)?;
        let cfg = OtConfig::with_p(p);
        let w = wasserstein_pp(&a, &b, &cfg)?;
        let q = quantized_atom_oracle(&a, &b, p, 64)?;
        let plan = monotone_plan(&a, &b, &cfg)?.cost;
        worst = worst.max((w - q).abs()).max((w - plan).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(CheckOutcome {
        name: "transport oracle equivalence",
        pass: worst <= 1e-9 && secs < 1.0,
        detail: format!("max deviation {worst:.2e}, {secs:.3} s"),
    })
}

/// Symmetry and triangle inequality of W_p, and exact Dirac translation.
pub fn metric_axioms() -> Result<CheckOutcome> {
    let mut r = rng(1002);
    let mut worst_sym = 0.0f64;
    let mut worst_tri = f64::NEG_INFINITY;
    for case in 0..100 {
        let p = 1 + (case % 2) as u32;
        let cfg = OtConfig::with_p(p);
        let (n, m, k) = (r.gen_range(1..=12), r.gen_range(1..=12), r.gen_range(1..=12));
        let x = random_measure(&mut r, n, 1.0, 0.0, 10.0)?;
        let y = random_measure(&mut r, m, 1.0, 0.0, 10.0)?;
        let z = random_measure(&mut r, k, 1.0, 0.0, 10.0)?;
        let d = |a: &DiscreteMeasure, b: &DiscreteMeasure| -> Result<f64> {
            Ok(wasserstein_pp(a, b, &cfg)?.powf(1.0 / p as f64))
        };
        worst_sym = worst_sym.max((d(&x, &y)? - d(&y, &x)?).abs());
        worst_tri = worst_tri.max(d(&x, &z)? - d(&x, &y)? - d(&y, &z)?);
    }
    let mut worst_dirac = 0.0f64;
    for (x, delta) in [(100.0, 37.5), (4000.0, -1250.0), (0.25, 0.5)] {
        let a = DiscreteMeasure::dirac(x, 1.0)?;
        let b = DiscreteMeasure::dirac(x + delta, 1.0)?;
        for p in [1u32, 2] {
            let w = wasserstein_pp(&a, &b, &OtConfig::with_p(p))?.powf(1.0 / p as f64);
            worst_dirac = worst_dirac.max((w - f64::abs(delta)).abs());
        }
    }
    Ok(CheckOutcome {
        name: "metric axioms",
        pass: worst_sym <= 1e-9 && worst_tri <= 1e-9 && worst_dirac == 0.0,
        detail: format!(
            "symmetry {worst_sym:.2e}, triangle excess {worst_tri:.2e}, dirac shift error {worst_dirac:.2e}"
        ),
    })
}

/// Central differences against every reverse-mode path, 20 instances each.
pub fn gradient_suite() -> Result<CheckOutcome> {
    let t = Instant::now();
    let mut r = rng(1003);
    let mut worst = [0.0f64; 4];

    for case in 0..20 {
        let cfg = OtConfig {
            cutoff: case % 2 == 0,
            ..OtConfig::with_p(2)
        };
        let a = random_measure(&mut r, 6, 1.0, 0.0, 1.0)?;
        let mass = if cfg.cutoff { r.gen_range(1.05..2.0) } else { 1.0 };
        let b = random_measure(&mut r, 7, mass, 0.0, 1.0)?;
        let (_, g) = wasserstein_with_gradients(&a, &b, &cfg)?;
        let scale = g.source.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for i in 0..a.len() {
            let shifted = |d: f64| {
                let mut w = a.weights().to_vec();
                w[i] += d;
                DiscreteMeasure::new(a.positions(), &w)
            };
            let fd = (transport_cost_relaxed(&shifted(1e-6)?, &b, &cfg)?
                - transport_cost_relaxed(&shifted(-1e-6)?, &b, &cfg)?)
                / 2e-6;
            worst[0] = worst[0].max((g.source[i] - fd).abs() / fd.abs().max(scale));
        }
    }

    let scfg = StftConfig::new(256, 64, WindowKind::Flattop);
    let l = scfg.frame_count(1024)?;
    for _ in 0..20 {
        let s = noise(&mut r, 1024);
        let cot = Array2::from_shape_fn((l, 129), |_| r.gen_range(-1.0..1.0));
        let g = stft_power_adjoint(&s, &scfg, &cot)?;
        let v = noise(&mut r, 1024);
        let f = |t: f64| -> Result<f64> {
            Ok((&stft(&axpy(&s, t, &v), &scfg, SpectrumKind::Power)?.frames * &cot).sum())
        };
        let fd = (f(1e-5)? - f(-1e-5)?) / 2e-5;
        worst[1] = worst[1].max(rel_err(dot(&g, &v), fd));
    }

    let syn = SynthConfig {
        n_samples: 1024,
        n_harmonics: 4,
        ..SynthConfig::default()
    };
    let frames = syn.n_frames();
    let params = |r: &mut ChaCha8Rng| HarmonicParams {
        f0_frames: (0..frames).map(|_| r.gen_range(80.0..900.0)).collect(),
        amp_frames: Array2::from_shape_fn((frames, 4), |_| r.gen_range(0.1..1.0)),
    };
    let along = |p: &HarmonicParams, df0: &[f64], damp: &Array2<f64>, t: f64| HarmonicParams {
        f0_frames: axpy(&p.f0_frames, t, df0),
        amp_frames: &p.amp_frames + &(damp * t),
    };
    for _ in 0..20 {
        let p = params(&mut r);
        let cot = noise(&mut r, 1024);
        let g = synthesize_adjoint(&p, &syn, &cot)?;
        let df0 = noise(&mut r, frames);
        let damp = Array2::from_shape_fn(p.amp_frames.dim(), |_| r.gen_range(-1.0..1.0));
        let f = |t: f64| -> Result<f64> { Ok(dot(&synthesize(&along(&p, &df0, &damp, t), &syn)?, &cot)) };
        let fd = (f(1e-5)? - f(-1e-5)?) / 2e-5;
        let analytic = dot(&g.f0_frames, &df0) + (&g.amp_frames * &damp).sum();
        worst[2] = worst[2].max(rel_err(analytic, fd));
    }

    let sot = SotConfig::with_window(512);
    let mss = MssConfig::lin(&[512, 256, 128, 64]);
    for _ in 0..20 {
        let target = synthesize(&params(&mut r), &syn)?;
        let p = params(&mut r);
        let (_, dsig) = combined_loss(&target, &synthesize(&p, &syn)?, &sot, &mss)?;
        let g = synthesize_adjoint(&p, &syn, &dsig)?;
        let df0 = noise(&mut r, frames);
        let damp = Array2::from_shape_fn(p.amp_frames.dim(), |_| r.gen_range(-1.0..1.0));
        let f = |t: f64| -> Result<f64> {
            Ok(combined_loss(&target, &synthesize(&along(&p, &df0, &damp, t), &syn)?, &sot, &mss)?.0)
        };
        let fd = (f(1e-5)? - f(-1e-5)?) / 2e-5;
        let analytic = dot(&g.f0_frames, &df0) + (&g.amp_frames * &damp).sum();
        worst[3] = worst[3].max(rel_err(analytic, fd));
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(CheckOutcome {
        name: "gradient suite",
        pass: worst.iter().all(|&e| e <= 1e-3) && secs < 30.0,
        detail: format!(
            "max rel err: weights {:.1e}, stft {:.1e}, synth {:.1e}, combined {:.1e}; {secs:.1} s",
            worst[0], worst[1], worst[2], worst[3]
        ),
    })
}

/// Rank correlation of each normalized sweep column with |shift|.
pub fn sweep_correlations(rows: &[SweepRow]) -> Result<[f64; 3]> {
    let shift: Vec<f64> = rows.iter().map(|r| r.delta_hz.abs()).collect();
    let col = |f: fn(&SweepRow) -> f64| spearman(&shift, &rows.iter().map(f).collect::<Vec<_>>());
    Ok([col(|r| r.ss)?, col(|r| r.mss)?, col(|r| r.sot_w2)?])
}

/// The transport loss tracks the frequency shift; the spectral losses
/// plateau.
pub fn sweep_ordering() -> Result<CheckOutcome> {
    let rows = loss_sweep(&SweepConfig::default())?;
    let [ss, mss, sot] = sweep_correlations(&rows)?;
    let zero_ok = rows
        .iter()
        .filter(|r| r.delta_hz == 0.0)
        .all(|r| r.ss == 0.0 && r.mss == 0.0 && r.sot_w2 == 0.0);
    Ok(CheckOutcome {
        name: "loss sweep ordering",
        pass: sot >= 0.99 && mss < sot && ss < sot && zero_ok,
        detail: format!("spearman vs |df|: sot {sot:.4}, mss {mss:.4}, ss {ss:.4}; zero row all 0: {zero_ok}"),
    })
}

/// Closed-form sinusoid and the anti-aliasing mask.
pub fn synth_exactness() -> Result<CheckOutcome> {
    let cfg = SynthConfig {
        n_samples: 4096,
        n_harmonics: 1,
        ..SynthConfig::default()
    };
    let sr = cfg.sample_rate;
    let s = synthesize(&HarmonicParams::constant(100.0, &[1.0], cfg.n_frames()), &cfg)?;
    let rms = (s
        .iter()
        .enumerate()
        .map(|(n, v)| (v - (std::f64::consts::TAU * 100.0 * (n + 1) as f64 / sr).sin()).powi(2))
        .sum::<f64>()
        / s.len() as f64)
        .sqrt();

    // all harmonics above Nyquist silent: same output as carrying only the
    // audible ones
    let full = SynthConfig {
        n_samples: 2048,
        n_harmonics: 20,
        ..SynthConfig::default()
    };
    let mut mask_ok = true;
    for f0 in [440.0, 1000.0, 1950.0, 7000.0] {
        let audible = (1..=20).filter(|&h| h as f64 * f0 <= full.sample_rate / 2.0).count();
        let all = synthesize(&HarmonicParams::constant(f0, &[0.5; 20], full.n_frames()), &full)?;
        let mut amps = [0.0; 20];
        amps[..audible].fill(0.5);
        let kept = synthesize(&HarmonicParams::constant(f0, &amps, full.n_frames()), &full)?;
        mask_ok &= all == kept;
    }
    Ok(CheckOutcome {
        name: "synthesizer exactness",
        pass: rms <= 1e-6 && mask_ok,
        detail: format!("single-harmonic rms {rms:.2e}; antialias mask exact: {mask_ok}"),
    })
}

/// Identity, octave-down and log-scaling cases of the metrics.
pub fn metric_unit_oracles() -> Result<CheckOutcome> {
    let truth = PitchTrack::constant(220.0, 16)?;
    let identity = rpa_rca_od(&truth, &truth)?;
    let down = rpa_rca_od(&PitchTrack::constant(110.0, 16)?, &truth)?;
    let s = noise(&mut rng(1007), 4096);
    let scaled: Vec<f64> = s.iter().map(|v| v * std::f64::consts::E).collect();
    // the e-scaling identity holds only without the floor
    let l = lsd_with_epsilon(&s, &scaled, 0.0)?;
    Ok(CheckOutcome {
        name: "metric unit oracles",
        pass: identity == (100.0, 100.0, 0.0) && down == (0.0, 100.0, -1.0) && (l - 1.0).abs() <= 1e-12,
        detail: format!("identity {identity:?}, octave down {down:?}, e-scaling lsd {l}"),
    })
}

pub fn run_all() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        transport_oracle_equivalence()?,
        metric_axioms()?,
        gradient_suite()?,
        sweep_ordering()?,
        synth_exactness()?,
        metric_unit_oracles()?,
    ])
}
