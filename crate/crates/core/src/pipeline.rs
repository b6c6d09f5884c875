//! The four stages end to end: wavelet candidates, half-wave features, fuzzy
//! scores and post-classification.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::debug;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::detector::{collect_candidates, CandidateEvent};
use crate::error::{Error, Result};
use crate::fuzzy::{classify, ClassifiedEvent, FuzzyRuleBase};
use crate::mimetic::{analyze, HalfWavePair};
use crate::postclass::{apply_rejection_rules, PostclassConfig};
use crate::scalar::Real;
use crate::signal_io::{DetectionList, Recording};
use crate::wavelet::{build_wavelet_table, WaveletTable};

#[derive(Debug, Clone)]
pub struct Pipeline<T> {
    config: PipelineConfig,
    table: WaveletTable<T>,
    rulebase: FuzzyRuleBase<T>,
}

impl<T: Real> Pipeline<T> {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        let rulebase = config.load_rulebase()?;
        Self::with_rulebase(config, rulebase)
    }

    pub fn with_rulebase(config: PipelineConfig, rulebase: FuzzyRuleBase<T>) -> Result<Self> {
        config.detector.validate()?;
        let table = build_wavelet_table(config.detector.wavelet, config.detector.cascade_iterations)
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(Self { config, table, rulebase })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn rulebase(&self) -> &FuzzyRuleBase<T> {
        &self.rulebase
    }

    pub fn candidates(&self, rec: &Recording<T>) -> Result<Vec<CandidateEvent<T>>> {
        collect_candidates(rec, &self.table, &self.config.detector)
    }

    /// Scores candidates. Candidates without a valid half-wave pair are
    /// dropped; candidates that snap onto the same raw peak are kept once,
    /// with the largest wavelet coefficient. Sorted by `(channel, time)`.
    pub fn classify_candidates(&self, rec: &Recording<T>, cands: Vec<CandidateEvent<T>>) -> Vec<ClassifiedEvent<T>> {
        let fs = rec.sampling_rate_hz();
        let cfg = &self.config;
        let mut events: Vec<ClassifiedEvent<T>> = cands
            .into_par_iter()
            .filter_map(|c| {
                let samples = &rec.channel(&c.channel).expect("candidate channel exists").samples;
                match analyze(samples, fs, c.peak_sample, &cfg.mimetic) {
                    Ok((halfwaves, features)) => {
                        let (score, class) = classify(&features, &self.rulebase, &cfg.bands);
                        let time_s = halfwaves.peak as f64 / fs;
                        Some(ClassifiedEvent { candidate: c, halfwaves, time_s, features, score, class })
                    }
                    Err(e) => {
                        debug!("{} at {:.3} s discarded: {e}", c.channel, c.peak_time_s);
                        None
                    }
                }
            })
            .collect();
        events.sort_by(|a, b| {
            a.candidate
                .channel
                .cmp(&b.candidate.channel)
                .then(a.halfwaves.peak.cmp(&b.halfwaves.peak))
                .then(b.candidate.coefficient.abs().as_f64().total_cmp(&a.candidate.coefficient.abs().as_f64()))
                .then(a.candidate.peak_sample.cmp(&b.candidate.peak_sample))
        });
        events.dedup_by(|b, a| a.candidate.channel == b.candidate.channel && a.halfwaves.peak == b.halfwaves.peak);
        one_event_per_waveform(events)
    }

    /// Detection, feature extraction and fuzzy scoring, without post-classification.
    pub fn analyze(&self, rec: &Recording<T>) -> Result<Vec<ClassifiedEvent<T>>> {
        let cands = self.candidates(rec)?;
        Ok(self.classify_candidates(rec, cands))
    }

    pub fn postclass(&self, events: &[ClassifiedEvent<T>], enabled: bool) -> Result<DetectionList<T>> {
        if enabled {
            apply_rejection_rules(events, &self.config.postclass)
        } else {
            apply_rejection_rules(events, &PostclassConfig::disabled())
        }
    }

    /// All four stages.
    pub fn detect(&self, rec: &Recording<T>) -> Result<DetectionList<T>> {
        self.postclass(&self.analyze(rec)?, true)
    }
}

/// Keeps one event per waveform. Events are visited by decreasing
/// `amp_baseline`; an event is dropped when its peak lies inside the
/// half-wave span of a kept event or a kept peak lies inside its own span
/// (for example the foot of a spike, whose second half-wave ends on the spike
/// peak). Input and output are sorted by `(channel, time)`.
pub fn one_event_per_waveform<T: Real>(events: Vec<ClassifiedEvent<T>>) -> Vec<ClassifiedEvent<T>> {
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&events[i], &events[j]);
        a.candidate
            .channel
            .cmp(&b.candidate.channel)
            .then(b.features.amp_baseline_uv.as_f64().total_cmp(&a.features.amp_baseline_uv.as_f64()))
            .then(i.cmp(&j))
    });
    let mut keep = vec![false; events.len()];
    // kept (peak -> span) of the current channel
    let mut kept: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut widest = 0;
    let mut channel: Option<&str> = None;
    for &i in &order {
        let e = &events[i];
        if channel != Some(e.candidate.channel.as_str()) {
            channel = Some(e.candidate.channel.as_str());
            kept.clear();
            widest = 0;
        }
        let HalfWavePair { start, peak, end, .. } = e.halfwaves;
        let covers_kept = kept.range(start..=end).next().is_some();
        let covered = kept.range(peak.saturating_sub(widest)..=peak + widest).any(|(_, &(s, t))| s <= peak && peak <= t);
        if !(covers_kept || covered) {
            kept.insert(peak, (start, end));
            widest = widest.max(end - start);
            keep[i] = true;
        }
    }
    events.into_iter().zip(keep).filter_map(|(e, k)| k.then_some(e)).collect()
}

pub const FEATURES_CSV_HEADER: &str = "channel,time_s,scale,coefficient,amp1_uv,amp2_uv,amp_baseline_uv,dur_a_ms,dur_b_ms,dur1_ms,dur2_ms,slope1,slope2,score,class";

/// Per-event feature table, one row per classified event.
pub fn render_features<T: Real>(events: &[ClassifiedEvent<T>]) -> String {
    let mut s = format!("{FEATURES_CSV_HEADER}\n");
    for e in events {
        let f = &e.features;
        let _ = writeln!(
            s,
            "{},{:.6},{:.3},{:.6},{:.6},{:.6},{:.6},{:.3},{:.3},{:.3},{:.3},{:.6},{:.6},{:.6},{}",
            e.candidate.channel,
            e.time_s,
            e.candidate.scale.as_f64(),
            e.candidate.coefficient.as_f64(),
            f.amp1_uv.as_f64(),
            f.amp2_uv.as_f64(),
            f.amp_baseline_uv.as_f64(),
            f.dur_a_ms.as_f64(),
            f.dur_b_ms.as_f64(),
            f.dur1_ms.as_f64(),
            f.dur2_ms.as_f64(),
            f.slope1.as_f64(),
            f.slope2.as_f64(),
            e.score.as_f64(),
            e.class
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::Channel;

    #[test]
    fn zero_recording_has_no_detections() {
        let rec = Recording::new(200.0, vec![Channel { label: "Fp1".into(), samples: vec![0.0f64; 4000] }]).unwrap();
        let p = Pipeline::<f64>::new(PipelineConfig::default()).unwrap();
        assert!(p.detect(&rec).unwrap().is_empty());
    }

    #[test]
    fn feature_dump_has_one_row_per_event() {
        assert_eq!(render_features::<f64>(&[]), format!("{FEATURES_CSV_HEADER}\n"));
    }
}
