//! Additive harmonic synthesizer with exact reverse-mode adjoints.
//!
//! Frame-rate controls are linearly interpolated to the sample rate, the
//! fundamental is integrated into a running phase (in cycles, inclusive of
//! the current sample, starting from zero), and harmonic `h` (1-based) reads
//! its phase as `h` times the fundamental's.

use std::f64::consts::TAU;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const AMP_FLOOR: f64 = 1e-7;

/// Bounded positive amplitude activation: `2 sigmoid(x)^ln(10) + 1e-7`.
pub fn exp_sigmoid(x: f64) -> f64 {
    2.0 * (std::f64::consts::LN_10 * log_sigmoid(x)).exp() + AMP_FLOOR
}

/// Derivative of [`exp_sigmoid`].
pub fn exp_sigmoid_grad(x: f64) -> f64 {
    // d/dx 2 s^k = 2 k s^k (1 - s)
    let k = std::f64::consts::LN_10;
    let s_k = (k * log_sigmoid(x)).exp();
    2.0 * k * s_k * sigmoid(-x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    // -softplus(-x)
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub sample_rate: f64,
    pub n_samples: usize,
    pub hop: usize,
    pub n_harmonics: usize,
    #[serde(default = "default_true")]
    pub antialias: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000.0,
            n_samples: 4096,
            hop: 256,
            n_harmonics: 20,
            antialias: true,
        }
    }
}

impl SynthConfig {
    pub fn n_frames(&self) -> usize {
        self.n_samples / self.hop
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.n_samples == 0 || !self.n_samples.is_multiple_of(self.hop) {
            return Err(Error::InvalidConfig(format!(
                "{} samples is not a positive multiple of hop {}",
                self.n_samples, self.hop
            )));
        }
        if self.n_harmonics == 0 {
            return Err(Error::InvalidConfig("need at least one harmonic".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(())
    }
}

/// Frame-rate synthesizer controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicParams {
    /// Fundamental per frame, Hz.
    pub f0_frames: Vec<f64>,
    /// `L x H` harmonic amplitudes.
    pub amp_frames: Array2<f64>,
}

impl HarmonicParams {
    /// Constant fundamental and amplitudes over `n_frames` frames.
    pub fn constant(f0: f64, amps: &[f64], n_frames: usize) -> Self {
        let mut amp_frames = Array2::zeros((n_frames, amps.len()));
        for mut row in amp_frames.outer_iter_mut() {
            row.iter_mut().zip(amps).for_each(|(d, &a)| *d = a);
        }
        Self {
            f0_frames: vec![f0; n_frames],
            amp_frames,
        }
    }

    pub fn validate(&self, cfg: &SynthConfig) -> Result<()> {
        cfg.validate()?;
        let l = cfg.n_frames();
        if self.f0_frames.len() != l || self.amp_frames.dim() != (l, cfg.n_harmonics) {
            return Err(Error::ShapeMismatch {
                expected: format!("{l} frames x {} harmonics", cfg.n_harmonics),
                actual: format!(
                    "{} frames, amplitudes {:?}",
                    self.f0_frames.len(),
                    self.amp_frames.dim()
                ),
            });
        }
        if let Some(&f) = self.f0_frames.iter().find(|&&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-positive f0 {f}")));
        }
        if let Some(&a) = self.amp_frames.iter().find(|&&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid amplitude {a}")));
        }
        Ok(())
    }
}

/// Linear interpolation from frame anchors at `k * hop` to `n` samples,
/// holding the last anchor value.
pub fn upsample(frames: &[f64], hop: usize, n: usize) -> Result<Vec<f64>> {
    check_upsample(frames.len(), hop, n)?;
    let l = frames.len();
    Ok((0..n)
        .map(|i| {
            let k = i / hop;
            if k + 1 < l {
                let t = (i % hop) as f64 / hop as f64;
                (1.0 - t) * frames[k] + t * frames[k + 1]
            } else {
                frames[l - 1]
            }
        })
        .collect())
}

/// Transpose of [`upsample`].
pub fn upsample_adjoint(grad: &[f64], hop: usize, n_frames: usize) -> Result<Vec<f64>> {
    check_upsample(n_frames, hop, grad.len())?;
    let mut out = vec![0.0; n_frames];
    for (i, &g) in grad.iter().enumerate() {
        let k = i / hop;
        if k + 1 < n_frames {
            let t = (i % hop) as f64 / hop as f64;
            out[k] += (1.0 - t) * g;
            out[k + 1] += t * g;
        } else {
            out[n_frames - 1] += g;
        }
    }
    Ok(out)
}

/// Column-wise [`upsample`] of an `L x H` matrix into `N x H`.
pub fn upsample_matrix(frames: &Array2<f64>, hop: usize, n: usize) -> Result<Array2<f64>> {
    let (l, h) = frames.dim();
    check_upsample(l, hop, n)?;
    let mut out = Array2::zeros((n, h));
    for (i, mut row) in out.outer_iter_mut().enumerate() {
        let k = i / hop;
        if k + 1 < l {
            let t = (i % hop) as f64 / hop as f64;
            let (a, b) = (frames.row(k), frames.row(k + 1));
            for ((d, &x), &y) in row.iter_mut().zip(a.iter()).zip(b.iter()) {
                *d = (1.0 - t) * x + t * y;
            }
        } else {
            row.assign(&frames.row(l - 1));
        }
    }
    Ok(out)
}

fn check_upsample(l: usize, hop: usize, n: usize) -> Result<()> {
    if l == 0 || hop == 0 || l * hop != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{l} frames x hop {hop}"),
            actual: format!("{n} samples"),
        });
    }
    Ok(())
}

/// Forward-pass intermediates reused by the adjoint.
#[derive(Debug, Clone)]
pub struct SynthTrace {
    pub signal: Vec<f64>,
    /// Upsampled amplitudes, row-major `N x H`.
    amps: Vec<f64>,
    /// `sin` and `cos` of each harmonic's phase, row-major `N x H`.
    sin: Vec<f64>,
    cos: Vec<f64>,
    /// Number of unmasked harmonics at each sample; the mask is a suffix
    /// since `h * f0` grows with `h`.
    active: Vec<usize>,
}

fn active_harmonics(f0: f64, cfg: &SynthConfig) -> usize {
    if !cfg.antialias {
        return cfg.n_harmonics;
    }
    let nyquist = cfg.sample_rate / 2.0;
    (1..=cfg.n_harmonics)
        .take_while(|&h| h as f64 * f0 <= nyquist)
        .count()
}

pub fn synthesize_with_trace(params: &HarmonicParams, cfg: &SynthConfig) -> Result<SynthTrace> {
    params.validate(cfg)?;
    let n = cfg.n_samples;
    let h_count = cfg.n_harmonics;
    let f0 = upsample(&params.f0_frames, cfg.hop, n)?;
    let amp_matrix = upsample_matrix(&params.amp_frames, cfg.hop, n)?;
    let mut amps = amp_matrix.into_raw_vec_and_offset().0;
    let mut sin = vec![0.0; n * h_count];
    let mut cos = vec![0.0; n * h_count];
    let mut active = vec![0; n];
    let mut signal = vec![0.0; n];
    let mut cycles = 0.0f64;
    for i in 0..n {
        cycles += f0[i] / cfg.sample_rate;
        cycles -= cycles.floor();
        let count = active_harmonics(f0[i], cfg);
        active[i] = count;
        let row = i * h_count..(i + 1) * h_count;
        let (a, s_row, c_row) = (&mut amps[row.clone()], &mut sin[row.clone()], &mut cos[row]);
        a[count..].iter_mut().for_each(|v| *v = 0.0);
        // harmonic h + 1 by angle addition from harmonic h
        let (s1, c1) = (TAU * cycles).sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = 0.0;
        for h in 0..count {
            s_row[h] = s;
            c_row[h] = c;
            acc += a[h] * s;
            (s, c) = (s * c1 + c * s1, c * c1 - s * s1);
        }
        signal[i] = acc;
    }
    Ok(SynthTrace {
        signal,
        amps,
        sin,
        cos,
        active,
    })
}

pub fn synthesize(params: &HarmonicParams, cfg: &SynthConfig) -> Result<Vec<f64>> {
    Ok(synthesize_with_trace(params, cfg)?.signal)
}

/// Gradients with respect to the frame-rate controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthGradients {
    pub f0_frames: Vec<f64>,
    pub amp_frames: Array2<f64>,
}

pub fn synthesize_adjoint_from_trace(
    trace: &SynthTrace,
    cfg: &SynthConfig,
    cotangent: &[f64],
) -> Result<SynthGradients> {
    let n = cfg.n_samples;
    if cotangent.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} samples"),
            actual: format!("{} samples", cotangent.len()),
        });
    }
    let h_count = cfg.n_harmonics;
    let l = cfg.n_frames();
    // per-sample amplitude gradients, row-major N x H
    let mut amp_samples = vec![0.0; n * h_count];
    // d loss / d (phase in cycles of the fundamental) at each sample
    let mut phase_grad = vec![0.0; n];
    for i in 0..n {
        let g = cotangent[i];
        if g == 0.0 {
            continue;
        }
        let base = i * h_count;
        let mut dphi = 0.0;
        for h in 0..trace.active[i] {
            amp_samples[base + h] = g * trace.sin[base + h];
            dphi += (h + 1) as f64 * trace.amps[base + h] * trace.cos[base + h];
        }
        phase_grad[i] = g * TAU * dphi;
    }
    // cycles[i] = sum_{t <= i} f0[t] / sr, so df0[t] = sum_{i >= t} phase_grad[i] / sr
    let mut f0_samples = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += phase_grad[i];
        f0_samples[i] = acc / cfg.sample_rate;
    }
    let f0_frames = upsample_adjoint(&f0_samples, cfg.hop, l)?;
    let mut amp_frames = Array2::zeros((l, h_count));
    let hop = cfg.hop;
    for i in 0..n {
        let k = i / hop;
        let row = &amp_samples[i * h_count..(i + 1) * h_count];
        if k + 1 < l {
            let t = (i % hop) as f64 / hop as f64;
            for (h, &v) in row.iter().enumerate() {
                amp_frames[[k, h]] += (1.0 - t) * v;
                amp_frames[[k + 1, h]] += t * v;
            }
        } else {
            for (h, &v) in row.iter().enumerate() {
                amp_frames[[l - 1, h]] += v;
            }
        }
    }
    Ok(SynthGradients {
        f0_frames,
        amp_frames,
    })
}

pub fn synthesize_adjoint(
    params: &HarmonicParams,
    cfg: &SynthConfig,
    cotangent: &[f64],
) -> Result<SynthGradients> {
    let trace = synthesize_with_trace(params, cfg)?;
    synthesize_adjoint_from_trace(&trace, cfg, cotangent)
}
