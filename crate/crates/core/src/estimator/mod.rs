//! Per-signal analysis-by-synthesis: frame-wise pitch logits over a
//! logarithmic grid and amplitude logits, optimized with Adam through the
//! synthesizer and a spectral loss.

mod study;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    CombinedObjective, MssConfig, MssObjective, MssVariant, SignalLoss, SotConfig, DEFAULT_SCALES,
};
use crate::measure1d::PositionTransform;
use crate::synth::{
    exp_sigmoid, exp_sigmoid_grad, synthesize, synthesize_adjoint_from_trace,
    synthesize_with_trace, HarmonicParams, SynthConfig,
};

pub use study::{
    run_variant_study, study_csv, StudyExample, StudyOutcome, StudyRecord, VariantSummary,
};

/// Logarithmic pitch grid starting at C1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PitchGrid {
    pub f_min: f64,
    pub bins: usize,
    pub bins_per_semitone: usize,
}

impl Default for PitchGrid {
    fn default() -> Self {
        Self {
            f_min: 32.70,
            bins: 285,
            bins_per_semitone: 3,
        }
    }
}

impl PitchGrid {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 || self.bins_per_semitone == 0 || !(self.f_min > 0.0) {
            return Err(Error::InvalidConfig(format!("degenerate pitch grid {self:?}")));
        }
        Ok(())
    }

    fn bins_per_octave(&self) -> f64 {
        (12 * self.bins_per_semitone) as f64
    }

    /// Octaves spanned by the grid.
    pub fn span_octaves(&self) -> f64 {
        (self.bins - 1) as f64 / self.bins_per_octave()
    }

    pub fn freq(&self, i: usize) -> f64 {
        self.f_min * (i as f64 / self.bins_per_octave()).exp2()
    }

    pub fn f_max(&self) -> f64 {
        self.freq(self.bins - 1)
    }

    /// Position of bin `i` on the unit interval.
    pub fn unit(&self, i: usize) -> f64 {
        i as f64 / (self.bins - 1) as f64
    }

    pub fn unit_freqs(&self) -> Vec<f64> {
        (0..self.bins).map(|i| self.unit(i)).collect()
    }

    pub fn unit_to_hz(&self, u: f64) -> f64 {
        self.f_min * (u * self.span_octaves()).exp2()
    }

    pub fn hz_to_unit(&self, hz: f64) -> f64 {
        (hz / self.f_min).log2() / self.span_octaves()
    }

    /// Closest bin to `hz`, clamped to the grid.
    pub fn nearest_bin(&self, hz: f64) -> usize {
        let i = (self.hz_to_unit(hz) * (self.bins - 1) as f64).round();
        i.clamp(0.0, (self.bins - 1) as f64) as usize
    }
}

/// Softmax of `logits / tau` and the expected frequency it implies.
pub fn soft_argmax(logits: &[f64], grid: &PitchGrid, tau: f64) -> (f64, Vec<f64>) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut probs: Vec<f64> = logits.iter().map(|&z| ((z - max) / tau).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let u: f64 = probs.iter().enumerate().map(|(i, p)| p * grid.unit(i)).sum();
    (grid.unit_to_hz(u), probs)
}

/// Gradient of a loss with respect to the logits given `d loss / d f0`.
pub fn soft_argmax_grad(probs: &[f64], grid: &PitchGrid, tau: f64, f0: f64, df0: f64) -> Vec<f64> {
    let u: f64 = probs.iter().enumerate().map(|(i, p)| p * grid.unit(i)).sum();
    let du = df0 * f0 * std::f64::consts::LN_2 * grid.span_octaves();
    probs
        .iter()
        .enumerate()
        .map(|(i, p)| du * p * (grid.unit(i) - u) / tau)
        .collect()
}

/// Named loss configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    MssLin,
    MssLogLin,
    Sot2048,
    Sot512,
    Sot512LogF,
    SotNoCut,
    Sot2048SingleScale,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::MssLin,
        Variant::MssLogLin,
        Variant::Sot2048,
        Variant::Sot512,
        Variant::Sot512LogF,
        Variant::SotNoCut,
        Variant::Sot2048SingleScale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::MssLin => "MSS-Lin",
            Variant::MssLogLin => "MSS-LogLin",
            Variant::Sot2048 => "SOT-2048",
            Variant::Sot512 => "SOT-512",
            Variant::Sot512LogF => "SOT-512-LogF",
            Variant::SotNoCut => "SOT-NoCut",
            Variant::Sot2048SingleScale => "SOT-2048-SS",
        }
    }

    /// The SOT part, if any.
    pub fn sot_config(self, sample_rate: f64) -> Option<SotConfig> {
        let mut cfg = match self {
            Variant::MssLin | Variant::MssLogLin => return None,
            Variant::Sot2048 | Variant::Sot2048SingleScale => SotConfig::with_window(2048),
            Variant::Sot512 => SotConfig::with_window(512),
            Variant::Sot512LogF => {
                let mut c = SotConfig::with_window(512);
                c.ot.position_transform = PositionTransform::Logarithmic;
                c
            }
            Variant::SotNoCut => {
                let mut c = SotConfig::with_window(2048);
                c.ot.cutoff = false;
                c
            }
        };
        if self == Variant::Sot2048SingleScale {
            cfg.lambda = 0.1;
        }
        cfg.stft.sample_rate = sample_rate;
        Some(cfg)
    }

    /// The multi-scale part (the vertical term for SOT variants).
    pub fn mss_config(self, sample_rate: f64) -> MssConfig {
        let mut cfg = match self {
            Variant::MssLogLin => MssConfig {
                variant: MssVariant::LogLin,
                ..MssConfig::lin(&DEFAULT_SCALES)
            },
            Variant::Sot2048SingleScale => MssConfig::lin(&[512]),
            _ => MssConfig::lin(&DEFAULT_SCALES),
        };
        cfg.sample_rate = sample_rate;
        cfg
    }

    pub fn objective(self, target: &[f64], sample_rate: f64) -> Result<Box<dyn SignalLoss>> {
        let mss = self.mss_config(sample_rate);
        Ok(match self.sot_config(sample_rate) {
            Some(sot) => Box::new(CombinedObjective::new(target, &sot, &mss)?),
            None => Box::new(MssObjective::new(target, &mss)?),
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for ((x, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

/// Logit bias towards a known pitch at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PitchHint {
    pub f0_hz: f64,
    /// Peak of a Gaussian bump added to every frame's logits.
    pub bias: f64,
    /// Standard deviation of the bump in grid bins.
    #[serde(default = "default_hint_width")]
    pub width_bins: f64,
}

fn default_hint_width() -> f64 {
    3.0
}

impl PitchHint {
    pub fn new(f0_hz: f64, bias: f64) -> Self {
        Self {
            f0_hz,
            bias,
            width_bins: default_hint_width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub variant: Variant,
    pub temperature: f64,
    pub adam: AdamConfig,
    pub max_steps: usize,
    /// Stop once the best loss has not improved by a relative `tolerance`
    /// for this many steps.
    #[serde(default)]
    pub patience: Option<usize>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub seed: u64,
    pub grid: PitchGrid,
    pub synth: SynthConfig,
    pub init_std: f64,
    pub amp_logit_offset: f64,
    #[serde(default)]
    pub hint: Option<PitchHint>,
}

fn default_tolerance() -> f64 {
    1e-4
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Sot2048,
            temperature: 0.1,
            adam: AdamConfig::default(),
            max_steps: 2000,
            patience: None,
            tolerance: default_tolerance(),
            seed: 0,
            grid: PitchGrid::default(),
            synth: SynthConfig::default(),
            init_std: 1.0,
            amp_logit_offset: -2.0,
            hint: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!("temperature {} <= 0", self.temperature)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        if !(self.adam.learning_rate > 0.0) || !(self.init_std >= 0.0) {
            return Err(Error::InvalidConfig("learning rate and init std must be positive".into()));
        }
        self.grid.validate()?;
        self.synth.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub f0_frames: Vec<f64>,
    pub amp_frames: Array2<f64>,
    pub loss_trace: Vec<f64>,
    /// Index into `loss_trace` of the returned iterate.
    pub best_step: usize,
    pub steps: usize,
    pub seed: u64,
    pub config: EstimatorConfig,
}

impl EstimationResult {
    pub fn best_loss(&self) -> f64 {
        self.loss_trace[self.best_step]
    }

    pub fn params(&self) -> HarmonicParams {
        HarmonicParams {
            f0_frames: self.f0_frames.clone(),
            amp_frames: self.amp_frames.clone(),
        }
    }

    pub fn resynthesize(&self) -> Result<Vec<f64>> {
        synthesize(&self.params(), &self.config.synth)
    }
}

struct Decoded {
    params: HarmonicParams,
    probs: Vec<Vec<f64>>,
}

/// Free parameters: `L x bins` pitch logits then `L x H` amplitude logits.
struct Parameters<'a> {
    cfg: &'a EstimatorConfig,
    frames: usize,
}

impl Parameters<'_> {
    fn pitch_len(&self) -> usize {
        self.frames * self.cfg.grid.bins
    }

    fn init(&self) -> Vec<f64> {
        let cfg = self.cfg;
        let h = cfg.synth.n_harmonics;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut x: Vec<f64> = (0..self.pitch_len() + self.frames * h)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                cfg.init_std * z
            })
            .collect();
        x[self.pitch_len()..].iter_mut().for_each(|v| *v += cfg.amp_logit_offset);
        if let Some(hint) = cfg.hint {
            // centred on the exact hint position, not the nearest bin
            let centre = cfg.grid.hz_to_unit(hint.f0_hz) * (cfg.grid.bins - 1) as f64;
            let bump: Vec<f64> = (0..cfg.grid.bins)
                .map(|i| {
                    let d = (i as f64 - centre) / hint.width_bins.max(1e-9);
                    hint.bias * (-0.5 * d * d).exp()
                })
                .collect();
            for frame in x[..self.pitch_len()].chunks_mut(cfg.grid.bins) {
                frame.iter_mut().zip(&bump).for_each(|(z, b)| *z += b);
            }
        }
        x
    }

    fn decode(&self, x: &[f64]) -> Decoded {
        let cfg = self.cfg;
        let bins = cfg.grid.bins;
        let h = cfg.synth.n_harmonics;
        let mut f0 = Vec::with_capacity(self.frames);
        let mut probs = Vec::with_capacity(self.frames);
        for row in x[..self.pitch_len()].chunks(bins) {
            let (f, p) = soft_argmax(row, &cfg.grid, cfg.temperature);
            f0.push(f);
            probs.push(p);
        }
        let amp_logits = &x[self.pitch_len()..];
        let amps = Array2::from_shape_fn((self.frames, h), |(k, j)| exp_sigmoid(amp_logits[k * h + j]));
        Decoded {
            params: HarmonicParams {
                f0_frames: f0,
                amp_frames: amps,
            },
            probs,
        }
    }
}

/// Recover per-frame f0 and harmonic amplitudes of `signal` by gradient
/// descent on the configured loss. Returns the lowest-loss iterate.
pub fn estimate(signal: &[f64], cfg: &EstimatorConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    if signal.len() != cfg.synth.n_samples {
        return Err(Error::ShapeMismatch {
            expected: format!("{} samples", cfg.synth.n_samples),
            actual: format!("{} samples", signal.len()),
        });
    }
    let objective = cfg.variant.objective(signal, cfg.synth.sample_rate)?;
    estimate_with(objective.as_ref(), cfg)
}

/// As [`estimate`] with a prebuilt objective; `cfg.variant` is only echoed.
pub fn estimate_with(objective: &dyn SignalLoss, cfg: &EstimatorConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    let space = Parameters {
        cfg,
        frames: cfg.synth.n_frames(),
    };
    let bins = cfg.grid.bins;
    let h = cfg.synth.n_harmonics;
    let mut x = space.init();
    let mut adam = Adam::new(cfg.adam, x.len());
    let mut grad = vec![0.0; x.len()];
    let mut trace = Vec::with_capacity(cfg.max_steps);
    let mut best: Option<(f64, usize, HarmonicParams)> = None;
    let mut last_improvement = 0usize;

    for step in 0..cfg.max_steps {
        let decoded = space.decode(&x);
        let synth = synthesize_with_trace(&decoded.params, &cfg.synth)?;
        let (loss, dsignal) = objective.value_and_grad(&synth.signal)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, value: loss });
        }
        trace.push(loss);
        match &best {
            Some((b, _, _)) if loss >= *b => {}
            _ => {
                let improved = best
                    .as_ref()
                    .is_none_or(|(b, _, _)| loss < b * (1.0 - cfg.tolerance));
                if improved {
                    last_improvement = step;
                }
                best = Some((loss, step, decoded.params.clone()));
            }
        }
        if let Some(patience) = cfg.patience {
            if step - last_improvement >= patience {
                break;
            }
        }
        if step + 1 == cfg.max_steps {
            break;
        }

        let g = synthesize_adjoint_from_trace(&synth, &cfg.synth, &dsignal)?;
        for (k, probs) in decoded.probs.iter().enumerate() {
            let f0 = decoded.params.f0_frames[k];
            let dz = soft_argmax_grad(probs, &cfg.grid, cfg.temperature, f0, g.f0_frames[k]);
            grad[k * bins..(k + 1) * bins].copy_from_slice(&dz);
        }
        let amp_logits = &x[space.pitch_len()..];
        for (i, d) in grad[space.pitch_len()..].iter_mut().enumerate() {
            *d = g.amp_frames[[i / h, i % h]] * exp_sigmoid_grad(amp_logits[i]);
        }
        if let Some(bad) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step,
                value: grad[bad],
            });
        }
        adam.step(&mut x, &grad);
    }

    let (_, best_step, params) = best.expect("at least one step runs");
    Ok(EstimationResult {
        f0_frames: params.f0_frames,
        amp_frames: params.amp_frames,
        steps: trace.len(),
        loss_trace: trace,
        best_step,
        seed: cfg.seed,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn semitones(a: f64, b: f64) -> f64 {
        12.0 * (a / b).log2()
    }

    #[test]
    fn grid_constants() {
        let g = PitchGrid::default();
        assert_eq!(g.freq(0), 32.70);
        let top = g.freq(284);
        assert!(top < 8000.0 && top > 7700.0, "{top}");
        let u = g.unit_freqs();
        assert_eq!((u[0], u[284]), (0.0, 1.0));
        assert!(u.windows(2).all(|w| w[0] < w[1]));
        for i in [0, 7, 100, 284] {
            assert_abs_diff_eq!(g.unit_to_hz(g.unit(i)), g.freq(i), epsilon = 1e-9);
            assert_eq!(g.nearest_bin(g.freq(i)), i);
        }
    }

    fn concentrated(k: usize) -> Vec<f64> {
        let mut z = vec![0.0; 285];
        z[k] = 10.0;
        z
    }

    #[test]
    fn concentrated_logits_round_trip() {
        let g = PitchGrid::default();
        for k in 0..285 {
            let (f0, _) = soft_argmax(&concentrated(k), &g, 0.1);
            assert!(semitones(f0, g.freq(k)).abs() <= 0.01, "bin {k}: {f0}");
        }
    }

    #[test]
    fn shifting_three_bins_is_one_semitone() {
        let g = PitchGrid::default();
        for k in [10, 100, 200] {
            let (a, _) = soft_argmax(&concentrated(k), &g, 0.1);
            let (b, _) = soft_argmax(&concentrated(k + 3), &g, 0.1);
            assert_abs_diff_eq!(semitones(b, a), 1.0, epsilon = 0.01);
        }
    }

    #[test]
    fn uniform_logits_give_grid_midpoint() {
        let g = PitchGrid::default();
        let (f0, p) = soft_argmax(&[0.3; 285], &g, 0.1);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f0, (g.freq(0) * g.freq(284)).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn soft_argmax_gradient_matches_differences() {
        let g = PitchGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let z: Vec<f64> = (0..285).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let (f0, p) = soft_argmax(&z, &g, 0.1);
            let grad = soft_argmax_grad(&p, &g, 0.1, f0, 1.0);
            for i in (0..285).step_by(17) {
                let eps = 1e-4;
                let mut up = z.clone();
                up[i] += eps;
                let mut down = z.clone();
                down[i] -= eps;
                let fd = (soft_argmax(&up, &g, 0.1).0 - soft_argmax(&down, &g, 0.1).0) / (2.0 * eps);
                let err = (grad[i] - fd).abs() / fd.abs().max(1e-3);
                assert!(err <= 1e-5, "bin {i}: {} vs {fd}", grad[i]);
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<Variant>(&json).unwrap(), v);
        }
        assert!(matches!("SOT-1024".parse::<Variant>(), Err(Error::UnknownVariant(_))));
        let ss = Variant::Sot2048SingleScale;
        assert_eq!(ss.sot_config(16e3).unwrap().lambda, 0.1);
        assert_eq!(ss.mss_config(16e3).scales, vec![512]);
        assert!(!Variant::SotNoCut.sot_config(16e3).unwrap().ot.cutoff);
        assert!(Variant::MssLin.sot_config(16e3).is_none());
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut adam = Adam::new(AdamConfig::default(), 3);
        let mut x = vec![1.0, -2.0, 0.5];
        adam.step(&mut x, &[0.0; 3]);
        assert_eq!(x, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut x = vec![0.0, 0.0];
        adam.step(&mut x, &[3.0, -0.01]);
        assert_abs_diff_eq!(x[0], -5e-3, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 5e-3, epsilon = 1e-8);
    }

    #[test]
    fn config_validation() {
        let mut c = EstimatorConfig::default();
        c.validate().unwrap();
        c.temperature = 0.0;
        assert!(c.validate().is_err());
        let c = EstimatorConfig {
            max_steps: 0,
            ..EstimatorConfig::default()
        };
        assert!(c.validate().is_err());
    }

    fn small_cfg(variant: Variant, steps: usize) -> EstimatorConfig {
        EstimatorConfig {
            variant,
            max_steps: steps,
            synth: SynthConfig {
                n_samples: 2048,
                n_harmonics: 4,
                ..SynthConfig::default()
            },
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn best_iterate_is_trace_minimum_and_deterministic() {
        let cfg = small_cfg(Variant::Sot512, 30);
        let target = synthesize(&HarmonicParams::constant(220.0, &[1.0, 0.5, 0.0, 0.0], 8), &cfg.synth)
            .unwrap();
        let a = estimate(&target, &cfg).unwrap();
        let b = estimate(&target, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_trace.len() <= 30);
        let min = a.loss_trace.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_loss(), min);
        let g = cfg.grid;
        assert!(a.f0_frames.iter().all(|&f| f >= g.f_min - 1e-9 && f <= g.f_max() + 1e-9));
    }

    #[test]
    fn wrong_length_is_rejected() {
        let cfg = small_cfg(Variant::MssLin, 2);
        assert!(matches!(estimate(&[0.0; 100], &cfg), Err(Error::ShapeMismatch { .. })));
    }
}
