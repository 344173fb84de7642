//! Pitch accuracy and reconstruction metrics, and their aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::format_sig9;
use crate::spectral::{SpectrumKind, Stft, StftConfig, WindowKind};

/// Guard inside the logarithms of [`lsd`].
pub const LSD_EPSILON: f64 = 1e-7;

/// Semitone tolerance for a frame to count as correct.
pub const PITCH_TOLERANCE_SEMITONES: f64 = 0.5;

/// Frame-aligned pitch values in Hz, all positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack(Vec<f64>);

impl PitchTrack {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(&v) = values.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("pitch value {v} is not positive")));
        }
        Ok(Self(values))
    }

    pub fn constant(f0: f64, n: usize) -> Result<Self> {
        Self::new(vec![f0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean squared log-magnitude difference.
    pub lsd: f64,
    /// Raw pitch accuracy, percent.
    pub rpa: f64,
    /// Raw chroma accuracy, percent.
    pub rca: f64,
    /// Mean signed octave deviation.
    pub od: f64,
}

/// Raw pitch accuracy, raw chroma accuracy (both percent) and mean octave
/// deviation of `est` against `truth`.
pub fn rpa_rca_od(est: &PitchTrack, truth: &PitchTrack) -> Result<(f64, f64, f64)> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} frames", truth.len()),
            actual: format!("{} frames", est.len()),
        });
    }
    let n = est.len() as f64;
    let (mut raw, mut chroma, mut octaves) = (0usize, 0usize, 0.0);
    for (&e, &t) in est.values().iter().zip(truth.values()) {
        let ratio = (e / t).log2();
        let semis = 12.0 * ratio;
        if semis.abs() <= PITCH_TOLERANCE_SEMITONES {
            raw += 1;
        }
        let folded = semis - 12.0 * (semis / 12.0).round();
        if folded.abs() <= PITCH_TOLERANCE_SEMITONES {
            chroma += 1;
        }
        octaves += ratio;
    }
    Ok((100.0 * raw as f64 / n, 100.0 * chroma as f64 / n, octaves / n))
}

fn lsd_config() -> StftConfig {
    StftConfig::new(1024, 256, WindowKind::Hann)
}

/// Log-spectral distance `||log(S + eps) - log(S_hat + eps)||_F^2 / (L M)`
/// over Hann magnitude STFTs with window 1024 and hop 256.
pub fn lsd(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    lsd_with_epsilon(reference, estimate, LSD_EPSILON)
}

pub fn lsd_with_epsilon(reference: &[f64], estimate: &[f64], eps: f64) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} samples", reference.len()),
            actual: format!("{} samples", estimate.len()),
        });
    }
    let plan = Stft::new(lsd_config())?;
    let s = plan.spectrogram(reference, SpectrumKind::Magnitude)?;
    let e = plan.spectrogram(estimate, SpectrumKind::Magnitude)?;
    let mut acc = 0.0;
    for (&a, &b) in s.frames.iter().zip(e.frames.iter()) {
        let d = (a + eps).ln() - (b + eps).ln();
        acc += d * d;
    }
    Ok(acc / s.frames.len() as f64)
}

/// One evaluated estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub example_id: String,
    pub variant: String,
    pub seed: u64,
    #[serde(flatten)]
    pub report: MetricReport,
}

/// CSV with header `example_id,variant,seed,lsd,rpa,rca,od`.
pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("example_id,variant,seed,lsd,rpa,rca,od\n");
    for r in rows {
        let m = &r.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.example_id,
            r.variant,
            r.seed,
            format_sig9(m.lsd),
            format_sig9(m.rpa),
            format_sig9(m.rca),
            format_sig9(m.od)
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub median: f64,
}

pub fn summarize(values: &[f64]) -> Result<Stats> {
    if values.is_empty() {
        return Err(Error::EmptyGroup("no values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(Stats { mean, std, median })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub lsd: Stats,
    pub rpa: Stats,
    pub rca: Stats,
    pub od: Stats,
    pub count: usize,
}

impl MetricSummary {
    pub fn from_reports(reports: &[MetricReport]) -> Result<Self> {
        let col = |f: fn(&MetricReport) -> f64| summarize(&reports.iter().map(f).collect::<Vec<_>>());
        Ok(Self {
            lsd: col(|r| r.lsd)?,
            rpa: col(|r| r.rpa)?,
            rca: col(|r| r.rca)?,
            od: col(|r| r.od)?,
            count: reports.len(),
        })
    }

    /// `(name, stats)` in column order.
    pub fn metrics(&self) -> [(&'static str, Stats); 4] {
        [
            ("lsd", self.lsd),
            ("rpa", self.rpa),
            ("rca", self.rca),
            ("od", self.od),
        ]
    }
}

/// Per-group mean, sample standard deviation and median of each metric.
pub fn aggregate(
    groups: &BTreeMap<String, Vec<MetricReport>>,
) -> Result<BTreeMap<String, MetricSummary>> {
    groups
        .iter()
        .map(|(name, rows)| {
            if rows.is_empty() {
                return Err(Error::EmptyGroup(name.clone()));
            }
            Ok((name.clone(), MetricSummary::from_reports(rows)?))
        })
        .collect()
}

/// Markdown table in the layout of a variant comparison: mean (std) then
/// median for each metric.
pub fn markdown_table(summary: &[(String, MetricSummary)]) -> String {
    let mut out = String::new();
    out.push_str(
        "| variant | LSD | RPA [%] | RCA [%] | OD | LSD (median) | RPA (median) | RCA (median) | OD (median) |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for (name, s) in summary {
        let _ = writeln!(
            out,
            "| {name} | {:.1} ({:.1}) | {:.1} ({:.1}) | {:.1} ({:.1}) | {:.2} ({:.2}) | {:.1} | {:.1} | {:.1} | {:.2} |",
            s.lsd.mean,
            s.lsd.std,
            s.rpa.mean,
            s.rpa.std,
            s.rca.mean,
            s.rca.std,
            s.od.mean,
            s.od.std,
            s.lsd.median,
            s.rpa.median,
            s.rca.median,
            s.od.median,
        );
    }
    out
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::ShapeMismatch {
            expected: format!("{} paired values (at least 2)", x.len()),
            actual: format!("{}", y.len()),
        });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}
