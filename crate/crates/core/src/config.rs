//! Pipeline configuration: a TOML file with one section per stage.
//!
//! ```toml
//! [detector]
//! wavelet = "db2"            # db2 db4 db5 coif4 sym8
//! cascade_iterations = 10
//! scales = [4, 10, 20, 30]   # in samples at 200 Hz, rescaled to the recording
//! k = 3.0
//! window_s = 10.0
//! hop_s = 9.5
//! min_separation_ms = 50.0
//!
//! [mimetic]
//! snap_ms = 25.0
//! max_halfwave_ms = 400.0
//! baseline_ms = 500.0
//!
//! [fuzzy]
//! rulebase = "rules.txt"     # relative to this file; built-in rules if absent
//! threshold = 0.8
//! possible_floor = 0.5
//!
//! [postclass]
//! enable = ["a", "b", "c", "d", "e"]
//!
//! [eval]
//! tolerance_ms = 50.0
//! thresholds = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::detector::{DetectorConfig, WindowSpec};
use crate::error::{Error, Result};
use crate::eval::{self, DEFAULT_THRESHOLDS, DEFAULT_TOLERANCE_MS};
use crate::fuzzy::{self, ClassBands, FuzzyRuleBase};
use crate::mimetic::MimeticConfig;
use crate::postclass::{PostclassConfig, RuleId};
use crate::scalar::Real;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    detector: RawDetector,
    #[serde(default)]
    mimetic: RawMimetic,
    #[serde(default)]
    fuzzy: RawFuzzy,
    #[serde(default)]
    postclass: RawPostclass,
    #[serde(default)]
    eval: RawEval,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    wavelet: Option<String>,
    cascade_iterations: Option<u32>,
    scales: Option<Vec<f64>>,
    k: Option<f64>,
    window_s: Option<f64>,
    hop_s: Option<f64>,
    min_separation_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMimetic {
    snap_ms: Option<f64>,
    max_halfwave_ms: Option<f64>,
    baseline_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFuzzy {
    rulebase: Option<PathBuf>,
    threshold: Option<f64>,
    possible_floor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPostclass {
    enable: Option<Vec<String>>,
    alpha_amp_uv: Option<f64>,
    min_dur1_ms: Option<f64>,
    max_dur1_ms: Option<f64>,
    max_halfwave_ms: Option<f64>,
    min_interval_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    tolerance_ms: Option<f64>,
    thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub mimetic: MimeticConfig,
    /// `None` selects the built-in rule base.
    pub rulebase: Option<PathBuf>,
    pub bands: ClassBands,
    pub postclass: PostclassConfig,
    pub tolerance_ms: f64,
    pub thresholds: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            mimetic: MimeticConfig::default(),
            rulebase: None,
            bands: ClassBands::default(),
            postclass: PostclassConfig::default(),
            tolerance_ms: DEFAULT_TOLERANCE_MS,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(format!("{name} must be a positive number, got {v}")))
    }
}

fn unit(name: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl PipelineConfig {
    /// Parses configuration text; relative rule base paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Config { line, msg: e.message().trim().to_string() }
        })?;
        let mut cfg = PipelineConfig::default();

        let d = raw.detector;
        if let Some(w) = d.wavelet {
            cfg.detector.wavelet = w.parse()?;
        }
        if let Some(i) = d.cascade_iterations {
            cfg.detector.cascade_iterations = i;
        }
        if let Some(s) = d.scales {
            cfg.detector.scales = s;
        }
        if let Some(k) = d.k {
            cfg.detector.k = k;
        }
        if d.window_s.is_some() || d.hop_s.is_some() {
            let window = d.window_s.unwrap_or(cfg.detector.window.window_s());
            let hop = d.hop_s.unwrap_or(cfg.detector.window.hop_s());
            cfg.detector.window = WindowSpec::new(window, hop)?;
        }
        if let Some(m) = d.min_separation_ms {
            cfg.detector.min_separation_ms = m;
        }
        cfg.detector.validate()?;

        let m = raw.mimetic;
        if let Some(v) = m.snap_ms {
            cfg.mimetic.snap_ms = positive("mimetic.snap_ms", v)?;
        }
        if let Some(v) = m.max_halfwave_ms {
            cfg.mimetic.max_halfwave_ms = positive("mimetic.max_halfwave_ms", v)?;
        }
        if let Some(v) = m.baseline_ms {
            cfg.mimetic.baseline_ms = positive("mimetic.baseline_ms", v)?;
        }

        let f = raw.fuzzy;
        cfg.rulebase = f.rulebase.map(|p| match base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        });
        if let Some(t) = f.threshold {
            cfg.bands.epileptiform = unit("fuzzy.threshold", t)?;
        }
        if let Some(p) = f.possible_floor {
            cfg.bands.possible = unit("fuzzy.possible_floor", p)?;
        }

        let p = raw.postclass;
        if let Some(enable) = p.enable {
            let mut ids = enable.iter().map(|s| s.parse::<RuleId>().map_err(Error::config)).collect::<Result<Vec<_>>>()?;
            ids.sort();
            ids.dedup();
            cfg.postclass.enabled = ids;
        }
        for (slot, value, name) in [
            (&mut cfg.postclass.alpha_amp_uv, p.alpha_amp_uv, "postclass.alpha_amp_uv"),
            (&mut cfg.postclass.min_dur1_ms, p.min_dur1_ms, "postclass.min_dur1_ms"),
            (&mut cfg.postclass.max_dur1_ms, p.max_dur1_ms, "postclass.max_dur1_ms"),
            (&mut cfg.postclass.max_halfwave_ms, p.max_halfwave_ms, "postclass.max_halfwave_ms"),
            (&mut cfg.postclass.min_interval_ms, p.min_interval_ms, "postclass.min_interval_ms"),
        ] {
            if let Some(v) = value {
                *slot = positive(name, v)?;
            }
        }

        let e = raw.eval;
        if let Some(t) = e.tolerance_ms {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config(format!("eval.tolerance_ms must be non-negative, got {t}")));
            }
            cfg.tolerance_ms = t;
        }
        if let Some(ts) = e.thresholds {
            eval::validate_thresholds(&ts).map_err(|e| Error::config(format!("eval.thresholds: {e}")))?;
            cfg.thresholds = ts;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn load_rulebase<T: Real>(&self) -> Result<FuzzyRuleBase<T>> {
        match &self.rulebase {
            Some(p) => fuzzy::load_rulebase(p),
            None => Ok(fuzzy::default_rulebase()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::WaveletName;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(PipelineConfig::parse("", None).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
[detector]
wavelet = "sym8"
k = 2.5
scales = [4, 10]

[fuzzy]
rulebase = "my.rules"
threshold = 0.7

[postclass]
enable = ["a", "temporal_context"]
"#;
        let cfg = PipelineConfig::parse(text, Some(Path::new("/etc/ied"))).unwrap();
        assert_eq!(cfg.detector.wavelet, WaveletName::Sym8);
        assert_eq!(cfg.detector.k, 2.5);
        assert_eq!(cfg.detector.scales, vec![4.0, 10.0]);
        assert_eq!(cfg.rulebase, Some(PathBuf::from("/etc/ied/my.rules")));
        assert_eq!(cfg.bands.epileptiform, 0.7);
        assert_eq!(cfg.postclass.enabled, vec![RuleId::AlphaAmplitude, RuleId::TemporalContext]);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let err = PipelineConfig::parse("[detector]\nk = 3\nbogus = 1\n", None).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(3), .. }), "{err}");
        assert!(PipelineConfig::parse("[nope]\n", None).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[detector]\nk = -1",
            "[detector]\nwavelet = \"haar\"",
            "[detector]\nhop_s = 20",
            "[fuzzy]\nthreshold = 1.5",
            "[postclass]\nenable = [\"z\"]",
            "[eval]\nthresholds = [0.5, 0.4]",
        ] {
            assert!(matches!(PipelineConfig::parse(text, None), Err(Error::Config { .. })), "{text}");
        }
    }

    #[test]
    fn missing_rulebase_is_a_config_error() {
        let cfg = PipelineConfig { rulebase: Some("/nonexistent/rules".into()), ..PipelineConfig::default() };
        assert!(matches!(cfg.load_rulebase::<f64>(), Err(Error::Config { .. })));
    }
}
