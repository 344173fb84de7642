//! Spectral reconstruction losses with gradients on the estimated samples.
//!
//! * multi-scale spectral loss: L1 distance between Hann magnitude STFTs at
//!   several window sizes, optionally plus the L1 distance of their logs;
//! * spectral optimal transport: mean over frames of `W_p^p` between
//!   normalized flattop power spectra;
//! * the combined objective `sot + lambda * mss_lin`.
//!
//! The `*Objective` types precompute everything that depends only on the
//! target signal so that repeated evaluation inside an optimizer loop only
//! transforms the estimate.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure1d::{wasserstein_with_gradients, OtConfig};
use crate::spectral::{
    frame_measures, ComplexFrames, SpectrumKind, Spectrogram, Stft, StftConfig, WindowKind,
};

/// Default multi-scale window sizes.
pub const DEFAULT_SCALES: [usize; 6] = [2048, 1024, 512, 256, 128, 64];

/// A differentiable loss against a fixed target.
pub trait SignalLoss: Send + Sync {
    /// Loss value and its gradient with respect to every estimate sample.
    fn value_and_grad(&self, estimate: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn value(&self, estimate: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(estimate)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MssVariant {
    Lin,
    LogLin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MssConfig {
    pub scales: Vec<usize>,
    /// Fraction of each window shared with the next frame.
    pub overlap: f64,
    pub variant: MssVariant,
    pub log_epsilon: f64,
    pub sample_rate: f64,
}

impl Default for MssConfig {
    fn default() -> Self {
        Self {
            scales: DEFAULT_SCALES.to_vec(),
            overlap: 0.75,
            variant: MssVariant::Lin,
            log_epsilon: 1e-7,
            sample_rate: 16_000.0,
        }
    }
}

impl MssConfig {
    pub fn lin(scales: &[usize]) -> Self {
        Self {
            scales: scales.to_vec(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidConfig("no spectral scales".into()));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidConfig(format!("overlap {} not in [0, 1)", self.overlap)));
        }
        if !(self.log_epsilon > 0.0) {
            return Err(Error::InvalidConfig("log epsilon must be positive".into()));
        }
        for cfg in self.stft_configs() {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn stft_configs(&self) -> Vec<StftConfig> {
        self.scales
            .iter()
            .map(|&size| {
                let hop = ((size as f64 * (1.0 - self.overlap)).round() as usize).max(1);
                StftConfig {
                    sample_rate: self.sample_rate,
                    ..StftConfig::new(size, hop, WindowKind::Hann)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SotConfig {
    pub stft: StftConfig,
    pub ot: OtConfig,
    /// Weight of the linear multi-scale term in the combined objective.
    pub lambda: f64,
    /// Unit of the transport positions under the identity transform.
    #[serde(default)]
    pub frequency_unit: FrequencyUnit,
}

/// Unit of spectral positions for the transport cost. With `Nyquist`,
/// positions run over [0, 1] and the cost is scale-free, which keeps it
/// commensurate with the multi-scale term at the default weight; `Hz` scales
/// the p = 2 cost by roughly (sr / 2)^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyUnit {
    Hz,
    #[default]
    Nyquist,
}

impl Default for SotConfig {
    fn default() -> Self {
        Self::with_window(2048)
    }
}

impl SotConfig {
    pub fn with_window(window_size: usize) -> Self {
        Self {
            stft: StftConfig::new(window_size, 256, WindowKind::Flattop),
            ot: OtConfig {
                p: 2,
                cutoff: true,
                ..OtConfig::default()
            },
            lambda: 0.05,
            frequency_unit: FrequencyUnit::Nyquist,
        }
    }

    /// Factor applied to the Hz-position cost: positions scaled by c scale
    /// W_p^p by c^p. Log positions are shift invariant, so no factor.
    pub fn cost_scale(&self) -> f64 {
        match (self.frequency_unit, self.ot.position_transform) {
            (FrequencyUnit::Hz, _) | (_, crate::measure1d::PositionTransform::Logarithmic) => 1.0,
            (FrequencyUnit::Nyquist, crate::measure1d::PositionTransform::Identity) => {
                (2.0 / self.stft.sample_rate).powi(self.ot.p as i32)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.ot.validate()?;
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda {} < 0", self.lambda)));
        }
        Ok(())
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: format!("{a} samples"),
            actual: format!("{b} samples"),
        });
    }
    Ok(())
}

/// Multi-scale spectral loss against a fixed target.
#[derive(Debug, Clone)]
pub struct MssObjective {
    cfg: MssConfig,
    scales: Vec<(Stft, Spectrogram)>,
    len: usize,
}

impl MssObjective {
    pub fn new(target: &[f64], cfg: &MssConfig) -> Result<Self> {
        cfg.validate()?;
        let scales = cfg
            .stft_configs()
            .into_iter()
            .map(|c| {
                let plan = Stft::new(c)?;
                let spec = plan.spectrogram(target, SpectrumKind::Magnitude)?;
                Ok((plan, spec))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            scales,
            len: target.len(),
        })
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl SignalLoss for MssObjective {
    fn value_and_grad(&self, estimate: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_lengths(self.len, estimate.len())?;
        let eps = self.cfg.log_epsilon;
        let with_log = self.cfg.variant == MssVariant::LogLin;
        let mut loss = 0.0;
        let mut grad = vec![0.0; estimate.len()];
        for (plan, target) in &self.scales {
            let frames = plan.forward(estimate)?;
            let est = plan.spectrogram_from(&frames, SpectrumKind::Magnitude);
            let mut cot = Array2::zeros(est.frames.dim());
            ndarray::Zip::from(&mut cot)
                .and(&est.frames)
                .and(&target.frames)
                .for_each(|c, &e, &t| {
                    let d = e - t;
                    loss += d.abs();
                    *c = sign(d);
                    if with_log {
                        let dl = (e + eps).ln() - (t + eps).ln();
                        loss += dl.abs();
                        *c += sign(dl) / (e + eps);
                    }
                });
            for (g, v) in grad.iter_mut().zip(plan.magnitude_adjoint(&frames, &cot)?) {
                *g += v;
            }
        }
        Ok((loss, grad))
    }
}

/// Spectral optimal transport loss against a fixed target.
#[derive(Debug, Clone)]
pub struct SotObjective {
    cfg: SotConfig,
    plan: Stft,
    target: Spectrogram,
    len: usize,
}

impl SotObjective {
    pub fn new(target: &[f64], cfg: &SotConfig) -> Result<Self> {
        cfg.validate()?;
        let plan = Stft::new(cfg.stft)?;
        let target_spec = plan.spectrogram(target, SpectrumKind::Power)?;
        let first = match cfg.ot.position_transform {
            crate::measure1d::PositionTransform::Identity => 0,
            crate::measure1d::PositionTransform::Logarithmic => 1,
        };
        let any_energy = target_spec
            .frames
            .outer_iter()
            .any(|row| row.iter().skip(first).sum::<f64>() > 0.0);
        if !any_energy {
            return Err(Error::SilentTarget);
        }
        Ok(Self {
            cfg: *cfg,
            plan,
            target: target_spec,
            len: target.len(),
        })
    }

    fn evaluate(&self, frames: &ComplexFrames) -> Result<(f64, Array2<f64>)> {
        let est = self.plan.spectrogram_from(frames, SpectrumKind::Power);
        let mut cot = Array2::zeros(est.frames.dim());
        let mut total = 0.0;
        let mut used = 0usize;
        for j in 0..self.target.n_frames() {
            let (a, b, rec) = match frame_measures(&self.target, &est, j, &self.cfg.ot) {
                Ok(v) => v,
                Err(Error::ZeroEnergyFrame(_)) => continue,
                Err(e) => return Err(e),
            };
            let (cost, grads) = wasserstein_with_gradients(&a, &b, &self.cfg.ot)?;
            total += cost;
            used += 1;

            // chain through b_k = P_k / D
            let d = rec.estimate_divisor;
            let mut row = cot.row_mut(j);
            let mut weighted = 0.0;
            for (&src, &g) in b.source_indices().iter().zip(&grads.target) {
                row[src + rec.first_bin] = g / d;
            }
            if !rec.proportional {
                // D is the estimate's own energy; subtract the normalization term
                for (&g, &w) in grads.target.iter().zip(b.weights()) {
                    weighted += g * w;
                }
                for v in row.iter_mut().skip(rec.first_bin) {
                    *v -= weighted / d;
                }
            }
        }
        if used == 0 {
            return Err(Error::SilentTarget);
        }
        let scale = self.cfg.cost_scale() / used as f64;
        cot.mapv_inplace(|v| v * scale);
        Ok((total * scale, cot))
    }
}

impl SignalLoss for SotObjective {
    fn value_and_grad(&self, estimate: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_lengths(self.len, estimate.len())?;
        let frames = self.plan.forward(estimate)?;
        let (loss, cot) = self.evaluate(&frames)?;
        let grad = self.plan.power_adjoint(&frames, &cot)?;
        Ok((loss, grad))
    }
}

/// `sot + lambda * mss` with the multi-scale term in its linear variant.
#[derive(Debug, Clone)]
pub struct CombinedObjective {
    sot: SotObjective,
    mss: Option<MssObjective>,
    lambda: f64,
}

impl CombinedObjective {
    pub fn new(target: &[f64], sot: &SotConfig, mss: &MssConfig) -> Result<Self> {
        let lin = MssConfig {
            variant: MssVariant::Lin,
            ..mss.clone()
        };
        let mss = if sot.lambda > 0.0 {
            Some(MssObjective::new(target, &lin)?)
        } else {
            None
        };
        Ok(Self {
            sot: SotObjective::new(target, sot)?,
            mss,
            lambda: sot.lambda,
        })
    }
}

impl SignalLoss for CombinedObjective {
    fn value_and_grad(&self, estimate: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (mut loss, mut grad) = self.sot.value_and_grad(estimate)?;
        if let Some(mss) = &self.mss {
            let (l, g) = mss.value_and_grad(estimate)?;
            loss += self.lambda * l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += self.lambda * b;
            }
        }
        Ok((loss, grad))
    }
}

pub fn mss_loss(target: &[f64], estimate: &[f64], cfg: &MssConfig) -> Result<(f64, Vec<f64>)> {
    check_lengths(target.len(), estimate.len())?;
    MssObjective::new(target, cfg)?.value_and_grad(estimate)
}

pub fn sot_loss(target: &[f64], estimate: &[f64], cfg: &SotConfig) -> Result<(f64, Vec<f64>)> {
    check_lengths(target.len(), estimate.len())?;
    SotObjective::new(target, cfg)?.value_and_grad(estimate)
}

pub fn combined_loss(
    target: &[f64],
    estimate: &[f64],
    sot: &SotConfig,
    mss: &MssConfig,
) -> Result<(f64, Vec<f64>)> {
    check_lengths(target.len(), estimate.len())?;
    CombinedObjective::new(target, sot, mss)?.value_and_grad(estimate)
}

/// Parameters of the sinusoid-pair loss sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ref_freq: f64,
    pub deltas: Vec<f64>,
    pub n_samples: usize,
    pub sample_rate: f64,
    pub single_scale: MssConfig,
    pub multi_scale: MssConfig,
    pub sot: SotConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ref_freq: 4000.0,
            deltas: (-40..=40).map(|k| k as f64 * 50.0).collect(),
            n_samples: 4096,
            sample_rate: 16_000.0,
            single_scale: MssConfig::lin(&[1024]),
            multi_scale: MssConfig::lin(&DEFAULT_SCALES),
            sot: SotConfig {
                lambda: 0.0,
                ..SotConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta_hz: f64,
    pub ss: f64,
    pub mss: f64,
    pub sot_w2: f64,
}

fn sinusoid(freq: f64, n: usize, sr: f64) -> Vec<f64> {
    (0..n)
        .map(|i| (std::f64::consts::TAU * freq * i as f64 / sr).sin())
        .collect()
}

/// Losses between a reference sinusoid and shifted copies, each column
/// min-max normalized to `[0, 1]` over the sweep.
pub fn loss_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let nyquist = cfg.sample_rate / 2.0;
    if cfg.deltas.is_empty() {
        return Err(Error::InvalidConfig("empty sweep".into()));
    }
    for &d in &cfg.deltas {
        let f = cfg.ref_freq + d;
        if !(f > 0.0 && f < nyquist) {
            return Err(Error::FrequencyOutOfRange(f));
        }
    }
    let reference = sinusoid(cfg.ref_freq, cfg.n_samples, cfg.sample_rate);
    let ss = MssObjective::new(&reference, &cfg.single_scale)?;
    let mss = MssObjective::new(&reference, &cfg.multi_scale)?;
    let sot = SotObjective::new(&reference, &cfg.sot)?;
    let mut rows = cfg
        .deltas
        .iter()
        .map(|&d| {
            let shifted = sinusoid(cfg.ref_freq + d, cfg.n_samples, cfg.sample_rate);
            Ok(SweepRow {
                delta_hz: d,
                ss: ss.value(&shifted)?,
                mss: mss.value(&shifted)?,
                sot_w2: sot.value(&shifted)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    normalize_column(&mut rows, |r| &mut r.ss);
    normalize_column(&mut rows, |r| &mut r.mss);
    normalize_column(&mut rows, |r| &mut r.sot_w2);
    Ok(rows)
}

fn normalize_column(rows: &mut [SweepRow], field: impl Fn(&mut SweepRow) -> &mut f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows.iter_mut() {
        let v = *field(r);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    for r in rows.iter_mut() {
        let v = field(r);
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        format!("{}e{}", trim(mantissa.to_string()), e)
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("delta_hz,ss,mss,sot_w2\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_sig9(r.delta_hz),
            format_sig9(r.ss),
            format_sig9(r.mss),
            format_sig9(r.sot_w2)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tone(f: f64, n: usize) -> Vec<f64> {
        sinusoid(f, n, 16_000.0)
    }

    #[test]
    fn identical_signals_have_zero_loss_and_gradient() {
        let s = tone(440.0, 2048);
        let (l, g) = mss_loss(&s, &s, &MssConfig::default()).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
        let (l, g) = sot_loss(&s, &s, &SotConfig::default()).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v.abs() < 1e-12));
        let (l, _) = combined_loss(&s, &s, &SotConfig::default(), &MssConfig::default()).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn mss_against_silence_is_l1_norm() {
        let zero = vec![0.0; 2048];
        let s = tone(1000.0, 2048);
        let cfg = MssConfig::lin(&[512, 256]);
        let (l, _) = mss_loss(&zero, &s, &cfg).unwrap();
        let expect: f64 = cfg
            .stft_configs()
            .iter()
            .map(|c| {
                crate::spectral::stft(&s, c, SpectrumKind::Magnitude)
                    .unwrap()
                    .frames
                    .sum()
            })
            .sum();
        assert_abs_diff_eq!(l, expect, epsilon = 1e-9 * expect);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(mss_loss(&[0.0; 512], &[0.0; 256], &MssConfig::lin(&[64])).is_err());
        assert!(sot_loss(&[0.0; 512], &[0.0; 256], &SotConfig::with_window(256)).is_err());
    }

    #[test]
    fn silent_target_is_an_error() {
        let err = sot_loss(&[0.0; 512], &tone(100.0, 512), &SotConfig::with_window(256));
        assert!(matches!(err, Err(Error::SilentTarget)), "{err:?}");
    }

    #[test]
    fn lambda_zero_is_pure_sot() {
        let s = tone(500.0, 2048);
        let e = tone(530.0, 2048);
        let sot = SotConfig {
            lambda: 0.0,
            ..SotConfig::with_window(512)
        };
        let (a, ga) = combined_loss(&s, &e, &sot, &MssConfig::default()).unwrap();
        let (b, gb) = sot_loss(&s, &e, &sot).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
    }

    #[test]
    fn combined_is_linear_in_parts() {
        let s = tone(500.0, 2048);
        let e: Vec<f64> = tone(610.0, 2048).iter().map(|v| 0.7 * v).collect();
        let sot = SotConfig::with_window(512);
        let mss = MssConfig::default();
        let (c, _) = combined_loss(&s, &e, &sot, &mss).unwrap();
        let (a, _) = sot_loss(&s, &e, &sot).unwrap();
        let (b, _) = mss_loss(&s, &e, &mss).unwrap();
        assert_abs_diff_eq!(c, a + 0.05 * b, epsilon = 1e-9 * c);
    }

    #[test]
    fn cutoff_is_inactive_for_quieter_estimate() {
        let s = tone(800.0, 2048);
        let e: Vec<f64> = tone(1100.0, 2048).iter().map(|v| 0.5 * v).collect();
        let on = SotConfig::with_window(512);
        let off = SotConfig {
            ot: OtConfig {
                cutoff: false,
                ..on.ot
            },
            ..on
        };
        let (a, ga) = sot_loss(&s, &e, &on).unwrap();
        let (b, gb) = sot_loss(&s, &e, &off).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
    }

    #[test]
    fn sot_symmetric_for_equal_energy() {
        let s = tone(800.0, 2048);
        let e = tone(1300.0, 2048);
        let cfg = SotConfig {
            ot: OtConfig::with_p(2),
            ..SotConfig::with_window(512)
        };
        let (a, _) = sot_loss(&s, &e, &cfg).unwrap();
        let (b, _) = sot_loss(&e, &s, &cfg).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9 * a);
    }

    #[test]
    fn sot_grows_with_shift() {
        let s = tone(4000.0, 4096);
        let cfg = SotConfig::default();
        let obj = SotObjective::new(&s, &cfg).unwrap();
        let mut last = -1.0;
        for k in 0..=40 {
            let v = obj.value(&tone(4000.0 + 50.0 * k as f64, 4096)).unwrap();
            assert!(v > last, "k={k}: {v} <= {last}");
            last = v;
        }
        let mut last = -1.0;
        for k in 0..=40 {
            let v = obj.value(&tone(4000.0 - 50.0 * k as f64, 4096)).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn sweep_rejects_out_of_range() {
        let cfg = SweepConfig {
            deltas: vec![0.0, 4500.0],
            ..SweepConfig::default()
        };
        assert!(matches!(loss_sweep(&cfg), Err(Error::FrequencyOutOfRange(_))));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(-2000.0), "-2000");
        assert_eq!(format_sig9(0.123456789123), "0.123456789");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
    }
}
