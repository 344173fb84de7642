//! Spectral optimal transport losses over a differentiable harmonic
//! synthesizer, for joint estimation of fundamental frequency and harmonic
//! amplitudes by analysis-by-synthesis.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod losses;
pub mod measure1d;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use measure1d::{DiscreteMeasure, OtConfig, PositionTransform, TransportPlan};
pub use spectral::{Spectrogram, SpectrumKind, StftConfig, WindowKind};
pub use synth::{HarmonicParams, SynthConfig};
pub use estimator::{EstimationResult, EstimatorConfig, PitchGrid, Variant};
pub use eval::{MetricReport, PitchTrack};
pub use dataset::{DatasetExample, DatasetSpec, Split};
