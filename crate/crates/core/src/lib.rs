//! Automatic detection of interictal epileptiform discharges in multi-channel
//! EEG: wavelet candidate selection, mimetic half-wave features, fuzzy
//! scoring and rule-based rejection of false positives, plus evaluation
//! against expert marks and a synthetic-recording generator.
//!
//! The library is generic over the sample type ([`Real`], `f32` or `f64`);
//! the aliases at the crate root fix it to `f64`, with `*32` variants.

pub mod config;
pub mod detector;
pub mod error;
pub mod eval;
pub mod fuzzy;
pub mod mimetic;
pub mod pipeline;
pub mod postclass;
pub mod scalar;
pub mod signal_io;
pub mod synth;
pub mod wavelet;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use eval::{match_events, roc_sweep, sensitivity, specificity, MatchCounts, RocCurve, RocPoint};
pub use scalar::Real;
pub use signal_io::{AnnotationSet, EventClass, Mark};

pub type Recording = signal_io::Recording<f64>;
pub type Recording32 = signal_io::Recording<f32>;
pub type Detection = signal_io::Detection<f64>;
pub type DetectionList = signal_io::DetectionList<f64>;
pub type CandidateEvent = detector::CandidateEvent<f64>;
pub type FeatureVector = mimetic::FeatureVector<f64>;
pub type FuzzyRuleBase = fuzzy::FuzzyRuleBase<f64>;
pub type ClassifiedEvent = fuzzy::ClassifiedEvent<f64>;
pub type WaveletTable = wavelet::WaveletTable<f64>;
pub type Pipeline = pipeline::Pipeline<f64>;
pub type Pipeline32 = pipeline::Pipeline<f32>;
