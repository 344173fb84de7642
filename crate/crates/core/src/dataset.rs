//! Synthetic harmonic dataset: generation, on-disk layout and loading.
//!
//! A dataset directory holds `manifest.jsonl` and one float WAV per example
//! under `wav/`. The first manifest line is a header carrying the spec and a
//! hash of the example lines; each following line describes one example.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::synth::{synthesize, HarmonicParams, SynthConfig};

pub const MANIFEST_NAME: &str = "manifest.jsonl";
const FORMAT_TAG: &str = "sot-dataset/1";
const SPLIT_STREAM: u64 = 0x5EED_5917_u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F0Distribution {
    /// Uniform in Hz.
    Linear,
    /// Uniform in log-frequency.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub n_examples: usize,
    pub sample_rate: f64,
    pub n_samples: usize,
    pub hop: usize,
    pub f0_range: [f64; 2],
    pub f0_distribution: F0Distribution,
    /// Inclusive.
    pub harmonic_count_range: [usize; 2],
    pub amp_range: [f64; 2],
    /// Train, validation and test fractions.
    pub split_fractions: [f64; 3],
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_examples: 4000,
            sample_rate: 16_000.0,
            n_samples: 4096,
            hop: 256,
            f0_range: [40.0, 1950.0],
            f0_distribution: F0Distribution::Linear,
            harmonic_count_range: [1, 8],
            amp_range: [0.4, 1.0],
            split_fractions: [0.7, 0.2, 0.1],
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_examples == 0 {
            return bad("dataset needs at least one example".into());
        }
        let [lo, hi] = self.f0_range;
        if !(lo > 0.0 && lo < hi && hi < self.sample_rate / 2.0) {
            return bad(format!("f0 range {:?} is not an ordered range below Nyquist", self.f0_range));
        }
        let [kl, kh] = self.harmonic_count_range;
        if kl == 0 || kl > kh {
            return bad(format!("harmonic count range {:?}", self.harmonic_count_range));
        }
        let [al, ah] = self.amp_range;
        if !(al >= 0.0 && al <= ah) {
            return bad(format!("amplitude range {:?}", self.amp_range));
        }
        if self.split_fractions.iter().any(|&f| !(f >= 0.0))
            || (self.split_fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!("split fractions {:?} do not sum to 1", self.split_fractions));
        }
        self.synth_config(kh).validate()
    }

    fn synth_config(&self, n_harmonics: usize) -> SynthConfig {
        SynthConfig {
            sample_rate: self.sample_rate,
            n_samples: self.n_samples,
            hop: self.hop,
            n_harmonics,
            antialias: true,
        }
    }

    /// Split sizes: rounded train and validation counts, the rest test.
    pub fn split_counts(&self) -> [usize; 3] {
        let n = self.n_examples;
        let train = ((self.split_fractions[0] * n as f64).round() as usize).min(n);
        let val = ((self.split_fractions[1] * n as f64).round() as usize).min(n - train);
        [train, val, n - train - val]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split {other:?}"))),
        }
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetExample {
    pub id: String,
    /// Path of the waveform relative to the dataset directory.
    pub file: String,
    pub f0_hz: f64,
    pub n_harmonics: usize,
    pub amplitudes: Vec<f64>,
    pub split: Split,
    /// Hex SHA-256 of the WAV file bytes.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub format: String,
    pub spec: DatasetSpec,
    /// Hex SHA-256 over the example lines, each terminated by a newline.
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub examples: Vec<DatasetExample>,
}

/// A manifest row with its samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedExample {
    pub meta: DatasetExample,
    pub signal: Vec<f64>,
}

fn example_id(index: usize) -> String {
    format!("ex{index:05}")
}

struct Draw {
    f0: f64,
    amplitudes: Vec<f64>,
}

fn draw(spec: &DatasetSpec, index: usize) -> Draw {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ index as u64);
    let [lo, hi] = spec.f0_range;
    let f0 = match spec.f0_distribution {
        F0Distribution::Linear => rng.gen_range(lo..hi),
        F0Distribution::Log => rng.gen_range(lo.ln()..hi.ln()).exp(),
    };
    let [kl, kh] = spec.harmonic_count_range;
    let count = rng.gen_range(kl..=kh);
    let [al, ah] = spec.amp_range;
    let amplitudes = (0..count)
        .map(|_| if al < ah { rng.gen_range(al..ah) } else { al })
        .collect();
    Draw { f0, amplitudes }
}

fn split_assignment(spec: &DatasetSpec) -> Vec<Split> {
    let mut order: Vec<usize> = (0..spec.n_examples).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed ^ SPLIT_STREAM));
    let [train, val, _] = spec.split_counts();
    let mut splits = vec![Split::Test; spec.n_examples];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    splits
}

/// Synthesize one example at the stored precision: samples are rounded to
/// `f32`, as written to disk.
pub fn render(spec: &DatasetSpec, f0_hz: f64, amplitudes: &[f64]) -> Result<Vec<f64>> {
    let cfg = spec.synth_config(amplitudes.len());
    let params = HarmonicParams::constant(f0_hz, amplitudes, cfg.n_frames());
    Ok(synthesize(&params, &cfg)?
        .into_iter()
        .map(|v| v as f32 as f64)
        .collect())
}

/// Rebuild an example's samples from its manifest row.
pub fn regenerate(spec: &DatasetSpec, meta: &DatasetExample) -> Result<Vec<f64>> {
    render(spec, meta.f0_hz, &meta.amplitudes)
}

pub fn wav_bytes(signal: &[f64], sample_rate: f64) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut cursor = Cursor::new(Vec::new());
    let wav_err = |e: hound::Error| Error::format("<memory>", e);
    let mut writer = hound::WavWriter::new(&mut cursor, spec).map_err(wav_err)?;
    for &v in signal {
        writer.write_sample(v as f32).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)?;
    Ok(cursor.into_inner())
}

/// Mono float or integer WAV as `f64` samples and the sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, f64)> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format(path, format!("{} channels, expected mono", spec.channels)));
    }
    let samples: std::result::Result<Vec<f64>, _> = match spec.sample_format {
        hound::SampleFormat::Float => reader.into_samples::<f32>().map(|s| s.map(f64::from)).collect(),
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect()
        }
    };
    Ok((samples.map_err(|e| Error::format(path, e))?, spec.sample_rate as f64))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn content_hash(examples: &[DatasetExample]) -> Result<String> {
    let mut hasher = Sha256::new();
    for e in examples {
        hasher.update(row_line(e)?.as_bytes());
        hasher.update(b"\n");
    }
    Ok(hex::encode(hasher.finalize()))
}

fn row_line(e: &DatasetExample) -> Result<String> {
    serde_json::to_string(e).map_err(|err| Error::format(MANIFEST_NAME, err))
}

/// Manifest row, samples and the WAV bytes that would be written.
pub type GeneratedExample = (DatasetExample, Vec<f64>, Vec<u8>);

/// Generate every example in memory.
pub fn generate_examples(spec: &DatasetSpec) -> Result<Vec<GeneratedExample>> {
    spec.validate()?;
    let splits = split_assignment(spec);
    (0..spec.n_examples)
        .into_par_iter()
        .map(|i| {
            let d = draw(spec, i);
            let signal = render(spec, d.f0, &d.amplitudes)?;
            let bytes = wav_bytes(&signal, spec.sample_rate)?;
            let id = example_id(i);
            let meta = DatasetExample {
                file: format!("wav/{id}.wav"),
                id,
                f0_hz: d.f0,
                n_harmonics: d.amplitudes.len(),
                amplitudes: d.amplitudes,
                split: splits[i],
                sha256: sha256_hex(&bytes),
            };
            Ok((meta, signal, bytes))
        })
        .collect()
}

pub fn build_manifest(spec: &DatasetSpec, examples: Vec<DatasetExample>) -> Result<Manifest> {
    Ok(Manifest {
        header: ManifestHeader {
            format: FORMAT_TAG.to_string(),
            spec: spec.clone(),
            content_hash: content_hash(&examples)?,
        },
        examples,
    })
}

impl Manifest {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header).map_err(|e| Error::format(MANIFEST_NAME, e))?;
        out.push('\n');
        for e in &self.examples {
            out.push_str(&row_line(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::format(path, "empty manifest"))?;
        let header: ManifestHeader =
            serde_json::from_str(head).map_err(|e| Error::format(path, format!("header: {e}")))?;
        if header.format != FORMAT_TAG {
            return Err(Error::format(path, format!("unknown format {:?}", header.format)));
        }
        let examples = lines
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<DatasetExample>>>()?;
        if content_hash(&examples)? != header.content_hash {
            return Err(Error::format(path, "content hash does not match the example lines"));
        }
        Ok(Self { header, examples })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn spec(&self) -> &DatasetSpec {
        &self.header.spec
    }
}

/// Write the dataset under `dir` and return its manifest.
pub fn generate(spec: &DatasetSpec, dir: &Path) -> Result<Manifest> {
    let examples = generate_examples(spec)?;
    let wav_dir = dir.join("wav");
    fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    examples.par_iter().try_for_each(|(meta, _, bytes)| {
        let path = dir.join(&meta.file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    })?;
    let manifest = build_manifest(spec, examples.into_iter().map(|(m, _, _)| m).collect())?;
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest.to_jsonl()?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Read the examples of the given splits (all of them when `splits` is
/// empty), verifying each waveform's checksum.
pub fn load(manifest_path: &Path, splits: &[Split]) -> Result<(Manifest, Vec<LoadedExample>)> {
    let manifest = Manifest::read(manifest_path)?;
    let dir = manifest_dir(manifest_path);
    let loaded = manifest
        .examples
        .iter()
        .filter(|e| splits.is_empty() || splits.contains(&e.split))
        .map(|meta| {
            let path = dir.join(&meta.file);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if sha256_hex(&bytes) != meta.sha256 {
                return Err(Error::Checksum { id: meta.id.clone() });
            }
            let (signal, _) = read_wav(&path)?;
            Ok(LoadedExample {
                meta: meta.clone(),
                signal,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, loaded))
}

/// Examples of the given splits synthesized from metadata alone, without
/// touching the disk.
pub fn load_regenerated(manifest: &Manifest, splits: &[Split]) -> Result<Vec<LoadedExample>> {
    manifest
        .examples
        .iter()
        .filter(|e| splits.is_empty() || splits.contains(&e.split))
        .map(|meta| {
            Ok(LoadedExample {
                meta: meta.clone(),
                signal: regenerate(manifest.spec(), meta)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> DatasetSpec {
        DatasetSpec {
            n_examples: n,
            seed: 9,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn split_counts_for_ten() {
        assert_eq!(small(10).split_counts(), [7, 2, 1]);
        assert_eq!(small(4000).split_counts(), [2800, 800, 400]);
        let splits = split_assignment(&small(10));
        let count = |s| splits.iter().filter(|&&x| x == s).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (7, 2, 1));
    }

    #[test]
    fn draws_stay_in_range() {
        for dist in [F0Distribution::Linear, F0Distribution::Log] {
            let spec = DatasetSpec {
                f0_distribution: dist,
                ..small(200)
            };
            for i in 0..200 {
                let d = draw(&spec, i);
                assert!((40.0..1950.0).contains(&d.f0));
                assert!((1..=8).contains(&d.amplitudes.len()));
                assert!(d.amplitudes.iter().all(|a| (0.4..1.0).contains(a)));
            }
        }
    }

    #[test]
    fn spec_validation() {
        small(10).validate().unwrap();
        let bad = [
            DatasetSpec {
                f0_range: [100.0, 50.0],
                ..small(10)
            },
            DatasetSpec {
                split_fractions: [0.5, 0.2, 0.1],
                ..small(10)
            },
            DatasetSpec {
                harmonic_count_range: [0, 3],
                ..small(10)
            },
            DatasetSpec {
                n_samples: 1000,
                ..small(10)
            },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
    }

    #[test]
    fn wav_round_trip_is_exact_at_f32() {
        let signal = render(&small(1), 220.0, &[0.5, 0.25]).unwrap();
        let bytes = wav_bytes(&signal, 16_000.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        fs::write(&path, &bytes).unwrap();
        let (back, sr) = read_wav(&path).unwrap();
        assert_eq!(sr, 16_000.0);
        assert_eq!(back, signal);
    }

    #[test]
    fn manifest_text_round_trip_and_tamper_detection() {
        let spec = small(5);
        let rows = generate_examples(&spec).unwrap();
        let m = build_manifest(&spec, rows.into_iter().map(|r| r.0).collect()).unwrap();
        let text = m.to_jsonl().unwrap();
        assert_eq!(Manifest::parse(Path::new("m"), &text).unwrap(), m);
        let tampered = text.replacen("\"id\":\"ex00000\"", "\"id\":\"ex99999\"", 1);
        assert_ne!(tampered, text);
        assert!(Manifest::parse(Path::new("m"), &tampered).is_err());
    }
}
