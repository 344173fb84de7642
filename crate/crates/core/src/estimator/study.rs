//! Variant comparison over a set of examples and seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_with, EstimatorConfig, PitchHint, Variant};
use crate::error::{Error, Result};
use crate::eval::{lsd, rpa_rca_od, MetricReport, MetricRow, MetricSummary, PitchTrack};
use crate::losses::{format_sig9, SignalLoss};

/// A test signal with its known constant fundamental.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyExample {
    pub id: String,
    pub signal: Vec<f64>,
    pub f0_hz: f64,
}

/// Outcome of one (variant, seed, example) estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub example_id: String,
    pub variant: Variant,
    pub seed: u64,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub records: Vec<StudyRecord>,
}

/// Seed of the estimator for example `index` in run `seed`.
fn example_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn evaluate(
    example: &StudyExample,
    cfg: &EstimatorConfig,
    objective: &dyn SignalLoss,
) -> Result<(MetricReport, usize)> {
    let result = estimate_with(objective, cfg)?;
    let est = PitchTrack::new(result.f0_frames.clone())?;
    let truth = PitchTrack::constant(example.f0_hz, est.len())?;
    let (rpa, rca, od) = rpa_rca_od(&est, &truth)?;
    let recon = result.resynthesize()?;
    Ok((
        MetricReport {
            lsd: lsd(&example.signal, &recon)?,
            rpa,
            rca,
            od,
        },
        result.steps,
    ))
}

/// Estimate every example with every variant and seed. Per-example failures
/// are recorded, not fatal. `hint_bias` biases the initial pitch logits
/// towards each example's true f0.
///
/// Work is spread over the current rayon pool; records come back in
/// (variant, seed, example) order regardless of thread count.
pub fn run_variant_study(
    examples: &[StudyExample],
    variants: &[Variant],
    seeds: &[u64],
    base: &EstimatorConfig,
    hint_bias: Option<f64>,
) -> Result<StudyOutcome> {
    if examples.is_empty() {
        return Err(Error::EmptyGroup("no study examples".into()));
    }
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("need at least one variant and one seed".into()));
    }
    base.validate()?;
    let tasks: Vec<(Variant, usize)> = variants
        .iter()
        .flat_map(|&v| (0..examples.len()).map(move |i| (v, i)))
        .collect();
    let per_task: Vec<Vec<StudyRecord>> = tasks
        .par_iter()
        .map(|&(variant, index)| {
            let example = &examples[index];
            let objective = variant.objective(&example.signal, base.synth.sample_rate);
            seeds
                .iter()
                .map(|&seed| {
                    let cfg = EstimatorConfig {
                        variant,
                        seed: example_seed(seed, index),
                        hint: hint_bias.map(|bias| PitchHint::new(example.f0_hz, bias)),
                        ..base.clone()
                    };
                    let outcome = match &objective {
                        Ok(obj) => evaluate(example, &cfg, obj.as_ref()).map_err(|e| e.to_string()),
                        Err(e) => Err(e.to_string()),
                    };
                    let (report, error, steps) = match outcome {
                        Ok((r, steps)) => (Some(r), None, steps),
                        Err(e) => (None, Some(e), 0),
                    };
                    StudyRecord {
                        example_id: example.id.clone(),
                        variant,
                        seed,
                        report,
                        error,
                        steps,
                    }
                })
                .collect()
        })
        .collect();

    // reorder to (variant, seed, example)
    let mut records = Vec::with_capacity(tasks.len() * seeds.len());
    for per_variant in per_task.chunks(examples.len()) {
        for si in 0..seeds.len() {
            records.extend(per_variant.iter().map(|seed_records| seed_records[si].clone()));
        }
    }
    Ok(StudyOutcome { records })
}

/// Summary for one variant, pooled over seeds, and per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub pooled: MetricSummary,
    pub per_seed: BTreeMap<u64, MetricSummary>,
    pub failed: usize,
}

impl StudyOutcome {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        self.records
            .iter()
            .filter_map(|r| {
                r.report.map(|report| MetricRow {
                    example_id: r.example_id.clone(),
                    variant: r.variant.name().to_string(),
                    seed: r.seed,
                    report,
                })
            })
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &StudyRecord> {
        self.records.iter().filter(|r| r.report.is_none())
    }

    /// One entry per variant in first-appearance order.
    pub fn summaries(&self) -> Result<Vec<VariantSummary>> {
        let mut order: Vec<Variant> = Vec::new();
        let mut pooled: BTreeMap<Variant, Vec<MetricReport>> = BTreeMap::new();
        let mut per_seed: BTreeMap<(Variant, u64), Vec<MetricReport>> = BTreeMap::new();
        let mut failed: BTreeMap<Variant, usize> = BTreeMap::new();
        for r in &self.records {
            if !order.contains(&r.variant) {
                order.push(r.variant);
            }
            match r.report {
                Some(m) => {
                    pooled.entry(r.variant).or_default().push(m);
                    per_seed.entry((r.variant, r.seed)).or_default().push(m);
                }
                None => *failed.entry(r.variant).or_default() += 1,
            }
        }
        order
            .into_iter()
            .map(|v| {
                let rows = pooled
                    .get(&v)
                    .ok_or_else(|| Error::EmptyGroup(format!("{v}: every estimate failed")))?;
                let seeds = per_seed
                    .iter()
                    .filter(|((pv, _), _)| *pv == v)
                    .map(|((_, s), rows)| Ok((*s, MetricSummary::from_reports(rows)?)))
                    .collect::<Result<_>>()?;
                Ok(VariantSummary {
                    variant: v,
                    pooled: MetricSummary::from_reports(rows)?,
                    per_seed: seeds,
                    failed: failed.get(&v).copied().unwrap_or(0),
                })
            })
            .collect()
    }
}

/// CSV with header `variant,seed,metric,mean,std,median`: one row per
/// variant, seed and metric, then pooled rows with seed `all`.
pub fn study_csv(summaries: &[VariantSummary]) -> String {
    let mut out = String::from("variant,seed,metric,mean,std,median\n");
    let mut row = |variant: &str, seed: &str, s: &MetricSummary| {
        for (metric, st) in s.metrics() {
            let _ = writeln!(
                out,
                "{variant},{seed},{metric},{},{},{}",
                format_sig9(st.mean),
                format_sig9(st.std),
                format_sig9(st.median)
            );
        }
    };
    for v in summaries {
        for (seed, s) in &v.per_seed {
            row(v.variant.name(), &seed.to_string(), s);
        }
        row(v.variant.name(), "all", &v.pooled);
    }
    out
}
