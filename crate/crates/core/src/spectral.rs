//! Windows, one-sided STFT (magnitude or power), its adjoint, and the
//! per-frame measures fed to the transport loss.
//!
//! The forward DFT is un-normalized: `X_k = sum_n w_n x_n exp(-2 pi i k n / N)`.
//! Parseval then reads `sum_k |X_k|^2 = N sum_n (w_n x_n)^2` over all `N`
//! bins; over the one-sided half, interior bins count twice.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure1d::{DiscreteMeasure, OtConfig, PositionTransform};

/// Five-term flattop coefficients `a0..a4`.
pub const FLATTOP_COEFFS: [f64; 5] = [
    0.215_578_95,
    0.416_631_58,
    0.277_263_158,
    0.083_578_947,
    0.006_947_368,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Flattop,
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hann" => Ok(WindowKind::Hann),
            "flattop" => Ok(WindowKind::Flattop),
            other => Err(Error::InvalidConfig(format!("unknown window kind {other:?}"))),
        }
    }
}

/// Periodic window of length `size` (`w[n] == w[size - n]`).
pub fn make_window(kind: WindowKind, size: usize) -> Result<Vec<f64>> {
    if size < 8 {
        return Err(Error::InvalidConfig(format!("window size {size} below 8")));
    }
    let n = size as f64;
    let w = (0..size)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n;
            match kind {
                WindowKind::Hann => 0.5 - 0.5 * t.cos(),
                WindowKind::Flattop => {
                    let [a0, a1, a2, a3, a4] = FLATTOP_COEFFS;
                    a0 - a1 * t.cos() + a2 * (2.0 * t).cos() - a3 * (3.0 * t).cos()
                        + a4 * (4.0 * t).cos()
                }
            }
        })
        .collect();
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Magnitude,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop: usize,
    pub window_kind: WindowKind,
    pub sample_rate: f64,
    #[serde(default)]
    pub center_padding: bool,
}

impl StftConfig {
    pub fn new(window_size: usize, hop: usize, window_kind: WindowKind) -> Self {
        Self {
            window_size,
            hop,
            window_kind,
            sample_rate: 16_000.0,
            center_padding: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.window_size.is_power_of_two() || self.window_size < 8 {
            return Err(Error::InvalidConfig(format!(
                "window size {} must be a power of two >= 8",
                self.window_size
            )));
        }
        if self.hop == 0 || self.hop > self.window_size {
            return Err(Error::InvalidConfig(format!(
                "hop {} must lie in 1..={}",
                self.hop, self.window_size
            )));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        (0..self.n_bins())
            .map(|k| k as f64 * self.sample_rate / self.window_size as f64)
            .collect()
    }

    pub fn frame_count(&self, len: usize) -> Result<usize> {
        if len == 0 {
            return Err(Error::EmptySignal);
        }
        if self.center_padding {
            if len <= self.window_size / 2 {
                return Err(Error::SignalTooShort {
                    len,
                    window: self.window_size / 2 + 1,
                });
            }
            Ok(len.div_ceil(self.hop))
        } else if len < self.window_size {
            Err(Error::SignalTooShort {
                len,
                window: self.window_size,
            })
        } else {
            Ok((len - self.window_size) / self.hop + 1)
        }
    }
}

/// Time-by-frequency nonnegative spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `L x M`, one row per frame.
    pub frames: Array2<f64>,
    pub bin_freqs: Vec<f64>,
    pub kind: SpectrumKind,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }
}

/// A planned STFT: window, FFT plan and framing for one configuration.
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

/// Complex one-sided frames kept from a forward pass for use by the adjoint.
#[derive(Debug, Clone)]
pub struct ComplexFrames {
    pub bins: Array2<Complex64>,
    signal_len: usize,
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let window = make_window(cfg.window_kind, cfg.window_size)?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.window_size);
        Ok(Self { cfg, window, fft })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Index into the input signal of padded-frame sample `pos`.
    #[inline]
    fn source_index(&self, pos: usize, len: usize) -> usize {
        if !self.cfg.center_padding {
            return pos;
        }
        let idx = pos as isize - (self.cfg.window_size / 2) as isize;
        let last = len as isize - 1;
        let reflected = if idx < 0 {
            -idx
        } else if idx > last {
            2 * last - idx
        } else {
            idx
        };
        reflected as usize
    }

    pub fn forward(&self, signal: &[f64]) -> Result<ComplexFrames> {
        let n_frames = self.cfg.frame_count(signal.len())?;
        let size = self.cfg.window_size;
        let m = self.cfg.n_bins();
        let mut bins = Array2::zeros((n_frames, m));
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for j in 0..n_frames {
            let start = j * self.cfg.hop;
            for (n, slot) in buf.iter_mut().enumerate() {
                let x = signal[self.source_index(start + n, signal.len())];
                *slot = Complex64::new(self.window[n] * x, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, &v) in buf[..m].iter().enumerate() {
                bins[[j, k]] = v;
            }
        }
        Ok(ComplexFrames {
            bins,
            signal_len: signal.len(),
        })
    }

    pub fn spectrogram_from(&self, frames: &ComplexFrames, kind: SpectrumKind) -> Spectrogram {
        let values = frames.bins.mapv(|z| match kind {
            SpectrumKind::Magnitude => z.norm_sqr().sqrt(),
            SpectrumKind::Power => z.norm_sqr(),
        });
        Spectrogram {
            frames: values,
            bin_freqs: self.cfg.bin_freqs(),
            kind,
            config: self.cfg,
        }
    }

    pub fn spectrogram(&self, signal: &[f64], kind: SpectrumKind) -> Result<Spectrogram> {
        Ok(self.spectrogram_from(&self.forward(signal)?, kind))
    }

    /// Pulls back a gradient given on the complex bins.
    ///
    /// `grad` holds `dL/dRe(X) + i dL/dIm(X)` per one-sided bin; the result is
    /// `dL/dx` per input sample.
    pub fn adjoint_complex(&self, frames: &ComplexFrames, grad: &Array2<Complex64>) -> Vec<f64> {
        let size = self.cfg.window_size;
        let m = self.cfg.n_bins();
        let len = frames.signal_len;
        let mut out = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for (j, row) in grad.outer_iter().enumerate() {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            let mut any = false;
            for (k, g) in row.iter().enumerate().take(m) {
                if g.re != 0.0 || g.im != 0.0 {
                    any = true;
                }
                buf[k] = g.conj();
            }
            if !any {
                continue;
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let start = j * self.cfg.hop;
            for n in 0..size {
                out[self.source_index(start + n, len)] += self.window[n] * buf[n].re;
            }
        }
        out
    }

    fn check_cotangent(&self, frames: &ComplexFrames, cotangent: &Array2<f64>) -> Result<()> {
        if cotangent.dim() != frames.bins.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", frames.bins.dim()),
                actual: format!("{:?}", cotangent.dim()),
            });
        }
        Ok(())
    }

    /// Gradient of `<cotangent, |X|^2>` with respect to the input samples.
    pub fn power_adjoint(&self, frames: &ComplexFrames, cotangent: &Array2<f64>) -> Result<Vec<f64>> {
        self.check_cotangent(frames, cotangent)?;
        let mut grad = frames.bins.clone();
        grad.zip_mut_with(cotangent, |z, &c| *z *= 2.0 * c);
        Ok(self.adjoint_complex(frames, &grad))
    }

    /// Gradient of `<cotangent, |X|>`; bins with `|X| = 0` contribute nothing.
    pub fn magnitude_adjoint(
        &self,
        frames: &ComplexFrames,
        cotangent: &Array2<f64>,
    ) -> Result<Vec<f64>> {
        self.check_cotangent(frames, cotangent)?;
        let mut grad = frames.bins.clone();
        grad.zip_mut_with(cotangent, |z, &c| {
            let mag = z.norm_sqr().sqrt();
            *z = if mag > 0.0 && c != 0.0 {
                *z * (c / mag)
            } else {
                Complex64::new(0.0, 0.0)
            };
        });
        Ok(self.adjoint_complex(frames, &grad))
    }
}

pub fn stft(signal: &[f64], cfg: &StftConfig, kind: SpectrumKind) -> Result<Spectrogram> {
    Stft::new(*cfg)?.spectrogram(signal, kind)
}

/// Adjoint of `s -> |STFT(s)|^2` applied to `cotangent`.
pub fn stft_power_adjoint(
    signal: &[f64],
    cfg: &StftConfig,
    cotangent: &Array2<f64>,
) -> Result<Vec<f64>> {
    let plan = Stft::new(*cfg)?;
    let frames = plan.forward(signal)?;
    plan.power_adjoint(&frames, cotangent)
}

/// How one frame pair was normalized; enough to chain gradients back to the
/// raw spectrogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    pub target_energy: f64,
    pub estimate_energy: f64,
    /// Divisor applied to the estimate frame.
    pub estimate_divisor: f64,
    /// `true` when the estimate was divided by the target's energy (cutoff
    /// active), `false` when divided by its own energy.
    pub proportional: bool,
    /// First spectrogram bin included in the measures (1 when DC is dropped).
    pub first_bin: usize,
}

/// Unit-mass target measure and matching estimate measure for frame `j`.
///
/// With cutoff enabled and an estimate frame carrying more energy than the
/// target, both frames are divided by the target energy, so the estimate's
/// mass exceeds one and its excess is truncated by the transport. Otherwise
/// each frame is divided by its own energy.
pub fn frame_measures(
    target: &Spectrogram,
    estimate: &Spectrogram,
    j: usize,
    cfg: &OtConfig,
) -> Result<(DiscreteMeasure, DiscreteMeasure, NormRecord)> {
    if target.frames.dim() != estimate.frames.dim() || target.bin_freqs != estimate.bin_freqs {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", target.frames.dim()),
            actual: format!("{:?}", estimate.frames.dim()),
        });
    }
    if j >= target.n_frames() {
        return Err(Error::ShapeMismatch {
            expected: format!("frame < {}", target.n_frames()),
            actual: j.to_string(),
        });
    }
    let first_bin = match cfg.position_transform {
        PositionTransform::Identity => 0,
        PositionTransform::Logarithmic => 1,
    };
    let t_row = target.frames.row(j);
    let e_row = estimate.frames.row(j);
    let t_row = t_row.slice(ndarray::s![first_bin..]);
    let e_row = e_row.slice(ndarray::s![first_bin..]);
    let target_energy = t_row.sum();
    if !(target_energy > 0.0) {
        return Err(Error::ZeroEnergyFrame(j));
    }
    let estimate_energy = e_row.sum();
    let proportional = cfg.cutoff && estimate_energy > target_energy;
    let estimate_divisor = if proportional {
        target_energy
    } else if estimate_energy > 0.0 {
        estimate_energy
    } else {
        return Err(Error::SilentEstimateFrame(j));
    };
    let positions = &target.bin_freqs[first_bin..];
    let scaled = |row: ArrayView1<f64>, d: f64| row.iter().map(|&v| v / d).collect::<Vec<_>>();
    let a = DiscreteMeasure::new(positions, &scaled(t_row, target_energy))?;
    let b = DiscreteMeasure::new(positions, &scaled(e_row, estimate_divisor))?;
    Ok((
        a,
        b,
        NormRecord {
            target_energy,
            estimate_energy,
            estimate_divisor,
            proportional,
            first_bin,
        },
    ))
}
