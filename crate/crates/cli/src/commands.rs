use std::path::{Path, PathBuf};

use serde_json::json;
use sot_core::checks;
use sot_core::dataset::{self, generate_examples, read_wav, MANIFEST_NAME};
use sot_core::estimator::{estimate as run_estimate, run_variant_study, study_csv, StudyExample};
use sot_core::eval::{markdown_table, metrics_csv};
use sot_core::losses::{loss_sweep, sweep_csv};
use sot_core::Variant;

use crate::config::{seed_from_env, RunConfig};
use crate::provenance::{InputHash, RunRecord};
use crate::{create_dir, write_file, CliError};

fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(CliError::runtime)
}

/// Directory that receives the run record of a single-file output.
fn parent_dir(file: &Path) -> Result<PathBuf, CliError> {
    let dir = match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    create_dir(&dir)?;
    Ok(dir)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn gen_data(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(Some(config))?;
    create_dir(out)?;
    let manifest = pool(1)?.install(|| dataset::generate(&cfg.dataset, out))?;

    let mut record = RunRecord::new("gen-data", &cfg)?;
    record.seed = Some(cfg.dataset.seed);
    record.args = json!({ "config": config, "out": out });
    record.inputs.push(InputHash::of_file(config)?);
    record.outputs = vec![MANIFEST_NAME.to_string(), "wav/".to_string()];
    let [train, val, test] = cfg.dataset.split_counts();
    record.summary = json!({
        "examples": manifest.examples.len(),
        "splits": { "train": train, "val": val, "test": test },
        "content_hash": manifest.header.content_hash,
    });
    record.write(out)?;
    println!("wrote {} examples to {}", manifest.examples.len(), out.display());
    Ok(())
}

pub fn sweep(out: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let rows = loss_sweep(&cfg.sweep.to_sweep()?)?;
    let dir = parent_dir(out)?;
    write_file(out, sweep_csv(&rows).as_bytes())?;

    let [ss, mss, sot] = checks::sweep_correlations(&rows)?;
    let mut record = RunRecord::new("sweep", &cfg.sweep)?;
    record.args = json!({ "config": config, "out": out });
    if let Some(c) = config {
        record.inputs.push(InputHash::of_file(c)?);
    }
    record.outputs = vec![file_name(out)];
    record.summary = json!({ "spearman_abs_shift": { "ss": ss, "mss": mss, "sot_w2": sot } });
    record.write(&dir)?;
    println!(
        "{} rows; spearman with |shift|: sot_w2 {sot:.4}, mss {mss:.4}, ss {ss:.4}",
        rows.len()
    );
    Ok(())
}

pub struct EstimateArgs {
    pub wav: PathBuf,
    pub variant: Variant,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub steps: Option<usize>,
}

pub fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let mut est = cfg.estimator.clone();
    est.variant = args.variant;
    if let Some(seed) = args.seed {
        est.seed = seed;
    }
    if let Some(steps) = args.steps {
        est.max_steps = steps;
    }
    est.validate()
        .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;

    let (signal, sample_rate) = read_wav(&args.wav)?;
    if sample_rate != est.synth.sample_rate {
        return Err(CliError::runtime(format!(
            "{}: sample rate {sample_rate} Hz, estimator expects {} Hz",
            args.wav.display(),
            est.synth.sample_rate
        )));
    }
    let result = run_estimate(&signal, &est)?;
    let dir = parent_dir(&args.out)?;
    let mut text = serde_json::to_string_pretty(&result).map_err(CliError::runtime)?;
    text.push('\n');
    write_file(&args.out, text.as_bytes())?;

    let mut record = RunRecord::new("estimate", &est)?;
    record.seed = Some(est.seed);
    record.args = json!({
        "wav": args.wav,
        "variant": args.variant,
        "seed": args.seed,
        "steps": args.steps,
        "config": args.config,
        "out": args.out,
    });
    record.inputs.push(InputHash::of_file(&args.wav)?);
    if let Some(c) = &args.config {
        record.inputs.push(InputHash::of_file(c)?);
    }
    record.outputs = vec![file_name(&args.out)];
    let mut f0 = result.f0_frames.clone();
    f0.sort_by(f64::total_cmp);
    let median_f0 = f0[f0.len() / 2];
    record.summary = json!({
        "best_loss": result.best_loss(),
        "best_step": result.best_step,
        "steps": result.steps,
        "median_f0_hz": median_f0,
    });
    record.write(&dir)?;
    println!(
        "{}: median f0 {median_f0:.2} Hz, best loss {:.6e} at step {}",
        args.variant,
        result.best_loss(),
        result.best_step
    );
    Ok(())
}

pub fn study(config: &Path, out: &Path, jobs: Option<usize>) -> Result<(), CliError> {
    let cfg = RunConfig::load(Some(config))?;
    let jobs = match jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let settings = &cfg.study;
    let mut inputs = vec![InputHash::of_file(config)?];

    let (spec, examples) = match &settings.dataset_dir {
        Some(dir) => {
            let manifest_path = dir.join(MANIFEST_NAME);
            let (manifest, loaded) = dataset::load(&manifest_path, &[settings.split])?;
            inputs.push(InputHash::of_file(&manifest_path)?);
            let examples = loaded
                .into_iter()
                .map(|e| StudyExample {
                    id: e.meta.id,
                    signal: e.signal,
                    f0_hz: e.meta.f0_hz,
                })
                .collect::<Vec<_>>();
            (manifest.spec().clone(), examples)
        }
        None => {
            let examples = pool(jobs)?
                .install(|| generate_examples(&cfg.dataset))?
                .into_iter()
                .filter(|(meta, _, _)| meta.split == settings.split)
                .map(|(meta, signal, _)| StudyExample {
                    id: meta.id,
                    signal,
                    f0_hz: meta.f0_hz,
                })
                .collect::<Vec<_>>();
            (cfg.dataset.clone(), examples)
        }
    };
    cfg.check_estimator_matches(&spec)?;
    if examples.is_empty() {
        return Err(CliError::Usage(format!("the {:?} split is empty", settings.split)));
    }

    let outcome = pool(jobs)?.install(|| {
        run_variant_study(
            &examples,
            &settings.variants,
            &settings.seeds,
            &cfg.estimator,
            settings.hint_bias,
        )
    })?;
    let summaries = outcome.summaries()?;
    create_dir(out)?;
    write_file(&out.join("metrics.csv"), metrics_csv(&outcome.metric_rows()).as_bytes())?;
    write_file(&out.join("study.csv"), study_csv(&summaries).as_bytes())?;
    let pooled: Vec<(String, _)> = summaries
        .iter()
        .map(|s| (s.variant.name().to_string(), s.pooled))
        .collect();
    let table = markdown_table(&pooled);
    write_file(&out.join("table.md"), table.as_bytes())?;

    let mut record = RunRecord::new("study", &cfg)?;
    record.seed = Some(cfg.dataset.seed);
    record.args = json!({ "config": config, "out": out });
    record.inputs = inputs;
    record.outputs = ["metrics.csv", "study.csv", "table.md"].map(String::from).to_vec();
    let failures: Vec<_> = outcome
        .failures()
        .map(|r| json!({ "example_id": r.example_id, "variant": r.variant, "seed": r.seed, "error": r.error }))
        .collect();
    record.summary = json!({
        "examples": examples.len(),
        "estimates": outcome.records.len(),
        "failed": failures,
        "rca_median": summaries.iter().map(|s| (s.variant.name(), s.pooled.rca.median)).collect::<std::collections::BTreeMap<_, _>>(),
    });
    record.write(out)?;
    print!("{table}");
    Ok(())
}

pub fn validate(out: Option<&Path>) -> Result<(), CliError> {
    // SOT_SEED is not used here, but a malformed value is still a usage error
    seed_from_env()?;
    let results = checks::run_all()?;
    let mut report = String::new();
    for c in &results {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        report.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
    }
    print!("{report}");
    let failed = results.iter().filter(|c| !c.pass).count();
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("validate.txt"), report.as_bytes())?;
        let mut record = RunRecord::new("validate", &json!({}))?;
        record.outputs = vec!["validate.txt".into()];
        record.summary = json!({ "checks": results.len(), "failed": failed });
        record.write(dir)?;
    }
    if failed > 0 {
        return Err(CliError::runtime(format!("{failed} of {} checks failed", results.len())));
    }
    Ok(())
}
