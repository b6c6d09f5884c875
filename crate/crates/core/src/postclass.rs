//! Heuristic rejection of false positives after fuzzy scoring.
//!
//! | id | rule                                   | target            |
//! |----|----------------------------------------|-------------------|
//! | a  | amp1 < 50 µV and amp2 < 50 µV          | alpha rhythm      |
//! | b  | dur1 < 20 ms                           | EMG / alpha       |
//! | c  | dur1 > 350 ms                          | K complex         |
//! | d  | dur_a > 150 ms or dur_b > 150 ms       | EOG               |
//! | e  | < 100 ms after a surviving positive    | temporal context  |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fuzzy::ClassifiedEvent;
use crate::mimetic::FeatureVector;
use crate::scalar::Real;
use crate::signal_io::{Detection, DetectionList, EventClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    AlphaAmplitude,
    ShortDuration,
    KComplex,
    Eog,
    TemporalContext,
}

impl RuleId {
    pub const ALL: [RuleId; 5] =
        [RuleId::AlphaAmplitude, RuleId::ShortDuration, RuleId::KComplex, RuleId::Eog, RuleId::TemporalContext];

    pub fn letter(self) -> char {
        match self {
            RuleId::AlphaAmplitude => 'a',
            RuleId::ShortDuration => 'b',
            RuleId::KComplex => 'c',
            RuleId::Eog => 'd',
            RuleId::TemporalContext => 'e',
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::AlphaAmplitude => "alpha_amplitude",
            RuleId::ShortDuration => "short_duration",
            RuleId::KComplex => "k_complex",
            RuleId::Eog => "eog",
            RuleId::TemporalContext => "temporal_context",
        }
    }

    /// The kind of false positive the rule is aimed at.
    pub fn target(self) -> &'static str {
        match self {
            RuleId::AlphaAmplitude => "alpha rhythm",
            RuleId::ShortDuration => "EMG and alpha rhythm",
            RuleId::KComplex => "K complex",
            RuleId::Eog => "EOG",
            RuleId::TemporalContext => "temporal context",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleId {
    type Err = String;

    /// Accepts the letter (`a`..`e`) or the long name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        RuleId::ALL
            .into_iter()
            .find(|r| s.eq_ignore_ascii_case(r.as_str()) || s.eq_ignore_ascii_case(&r.letter().to_string()))
            .ok_or_else(|| format!("unknown post-classification rule {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostclassConfig {
    pub enabled: Vec<RuleId>,
    pub alpha_amp_uv: f64,
    pub min_dur1_ms: f64,
    pub max_dur1_ms: f64,
    pub max_halfwave_ms: f64,
    pub min_interval_ms: f64,
}

impl Default for PostclassConfig {
    fn default() -> Self {
        Self {
            enabled: RuleId::ALL.to_vec(),
            alpha_amp_uv: 50.0,
            min_dur1_ms: 20.0,
            max_dur1_ms: 350.0,
            max_halfwave_ms: 150.0,
            min_interval_ms: 100.0,
        }
    }
}

impl PostclassConfig {
    pub fn disabled() -> Self {
        Self { enabled: Vec::new(), ..Self::default() }
    }

    pub fn is_enabled(&self, id: RuleId) -> bool {
        self.enabled.contains(&id)
    }

    /// First enabled feature rule (a-d) that fires.
    pub fn feature_rejection<T: Real>(&self, f: &FeatureVector<T>) -> Option<RuleId> {
        let amp1 = f.amp1_uv.as_f64();
        let amp2 = f.amp2_uv.as_f64();
        let dur1 = f.dur1_ms.as_f64();
        let fires = |id: RuleId| match id {
            RuleId::AlphaAmplitude => amp1 < self.alpha_amp_uv && amp2 < self.alpha_amp_uv,
            RuleId::ShortDuration => dur1 < self.min_dur1_ms,
            RuleId::KComplex => dur1 > self.max_dur1_ms,
            RuleId::Eog => f.dur_a_ms.as_f64() > self.max_halfwave_ms || f.dur_b_ms.as_f64() > self.max_halfwave_ms,
            RuleId::TemporalContext => false,
        };
        RuleId::ALL.into_iter().find(|&id| self.is_enabled(id) && fires(id))
    }
}

/// Outcome for one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub class: EventClass,
    pub rejected_by: Option<RuleId>,
}

/// Applies the rejection rules to events sorted by `(channel, time)`.
/// Rejected positives are relabelled non-epileptiform; scores never change.
pub fn reject<T: Real>(events: &[ClassifiedEvent<T>], cfg: &PostclassConfig) -> Result<Vec<Verdict>> {
    if let Some(w) = events.windows(2).find(|w| {
        (w[0].candidate.channel.as_str(), w[0].time_s).partial_cmp(&(w[1].candidate.channel.as_str(), w[1].time_s))
            == Some(std::cmp::Ordering::Greater)
    }) {
        return Err(Error::Precondition(format!(
            "events not sorted by (channel, time): {} {} s before {} {} s",
            w[0].candidate.channel, w[0].time_s, w[1].candidate.channel, w[1].time_s
        )));
    }
    let min_gap_s = cfg.min_interval_ms / 1000.0;
    let mut last_positive: Option<(&str, f64)> = None;
    let verdicts = events
        .iter()
        .map(|ev| {
            if !ev.class.is_positive() {
                return Verdict { class: ev.class, rejected_by: None };
            }
            let mut rejected = cfg.feature_rejection(&ev.features);
            if rejected.is_none() && cfg.is_enabled(RuleId::TemporalContext) {
                if let Some((ch, t)) = last_positive {
                    if ch == ev.candidate.channel && ev.time_s - t < min_gap_s {
                        rejected = Some(RuleId::TemporalContext);
                    }
                }
            }
            match rejected {
                Some(id) => Verdict { class: EventClass::NonEpileptiform, rejected_by: Some(id) },
                None => {
                    last_positive = Some((ev.candidate.channel.as_str(), ev.time_s));
                    Verdict { class: ev.class, rejected_by: None }
                }
            }
        })
        .collect();
    Ok(verdicts)
}

/// Post-classification as a detection list.
pub fn apply_rejection_rules<T: Real>(events: &[ClassifiedEvent<T>], cfg: &PostclassConfig) -> Result<DetectionList<T>> {
    let verdicts = reject(events, cfg)?;
    DetectionList::new(
        events
            .iter()
            .zip(verdicts)
            .map(|(ev, v)| Detection {
                channel: ev.candidate.channel.clone(),
                time_s: ev.time_s,
                score: ev.score,
                class: v.class,
                rejected_by: v.rejected_by,
            })
            .collect(),
    )
}

/// Classified events with their class replaced by the post-classification
/// verdict, so the stage can be applied again.
pub fn relabel_with<T: Real>(events: &[ClassifiedEvent<T>], cfg: &PostclassConfig) -> Result<Vec<ClassifiedEvent<T>>> {
    let verdicts = reject(events, cfg)?;
    Ok(events.iter().zip(verdicts).map(|(ev, v)| ClassifiedEvent { class: v.class, ..ev.clone() }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::CandidateEvent;
    use crate::mimetic::{HalfWavePair, Polarity};

    pub(crate) fn event(channel: &str, time_s: f64, f: FeatureVector<f64>) -> ClassifiedEvent<f64> {
        ClassifiedEvent {
            candidate: CandidateEvent {
                channel: channel.into(),
                peak_sample: (time_s * 200.0) as usize,
                peak_time_s: time_s,
                scale: 4.0,
                coefficient: 100.0,
                segment_std_uv: 10.0,
                salience: 10.0,
            },
            halfwaves: HalfWavePair { start: 0, peak: 1, end: 2, polarity: Polarity::Positive, truncated: false },
            time_s,
            features: f,
            score: 0.9,
            class: EventClass::Epileptiform,
        }
    }

    fn spike(amp1: f64, amp2: f64, dur_a: f64, dur_b: f64) -> FeatureVector<f64> {
        FeatureVector {
            amp1_uv: amp1,
            amp2_uv: amp2,
            amp_baseline_uv: amp1,
            dur_a_ms: dur_a,
            dur_b_ms: dur_b,
            dur1_ms: dur_a + dur_b,
            dur2_ms: dur_a + dur_b,
            slope1: amp1 / dur_a,
            slope2: amp2 / dur_b,
        }
    }

    fn verdict_of(f: FeatureVector<f64>) -> Verdict {
        reject(&[event("Fp1", 1.0, f)], &PostclassConfig::default()).unwrap()[0]
    }

    #[test]
    fn feature_rules() {
        let v = verdict_of(spike(120.0, 130.0, 5.0, 10.0));
        assert_eq!(v.rejected_by, Some(RuleId::ShortDuration));
        assert_eq!(v.class, EventClass::NonEpileptiform);
        assert_eq!(verdict_of(spike(40.0, 45.0, 20.0, 25.0)).rejected_by, Some(RuleId::AlphaAmplitude));
        assert_eq!(verdict_of(spike(150.0, 150.0, 140.0, 260.0)).rejected_by, Some(RuleId::KComplex));
        assert_eq!(verdict_of(spike(150.0, 150.0, 160.0, 100.0)).rejected_by, Some(RuleId::Eog));
        let v = verdict_of(spike(120.0, 140.0, 20.0, 25.0));
        assert_eq!((v.class, v.rejected_by), (EventClass::Epileptiform, None));
        // only one amplitude below 50 µV is not enough for the alpha rule
        assert_eq!(verdict_of(spike(40.0, 120.0, 20.0, 25.0)).rejected_by, None);
    }

    #[test]
    fn temporal_context() {
        let f = spike(120.0, 140.0, 20.0, 25.0);
        let events = vec![event("Fp1", 1.0, f), event("Fp1", 1.08, f), event("Fp1", 1.3, f), event("Fp2", 1.05, f)];
        let v = reject(&events, &PostclassConfig::default()).unwrap();
        assert_eq!(v[0].rejected_by, None);
        assert_eq!(v[1].rejected_by, Some(RuleId::TemporalContext));
        assert_eq!(v[2].rejected_by, None);
        assert_eq!(v[3].rejected_by, None);

        // a rejected artifact does not shield the event after it
        let artifact = spike(120.0, 130.0, 5.0, 10.0);
        let events = vec![event("Fp1", 1.0, artifact), event("Fp1", 1.05, f)];
        let v = reject(&events, &PostclassConfig::default()).unwrap();
        assert_eq!(v[0].rejected_by, Some(RuleId::ShortDuration));
        assert_eq!(v[1].rejected_by, None);
    }

    #[test]
    fn negatives_pass_through_and_disabled_rules_do_nothing() {
        let mut ev = event("Fp1", 1.0, spike(10.0, 10.0, 5.0, 5.0));
        ev.class = EventClass::Possible;
        let v = reject(&[ev], &PostclassConfig::default()).unwrap();
        assert_eq!((v[0].class, v[0].rejected_by), (EventClass::Possible, None));

        let f = spike(40.0, 45.0, 5.0, 10.0);
        let v = reject(&[event("Fp1", 1.0, f)], &PostclassConfig::disabled()).unwrap();
        assert_eq!(v[0].rejected_by, None);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let f = spike(120.0, 140.0, 20.0, 25.0);
        let events = vec![event("Fp1", 2.0, f), event("Fp1", 1.0, f)];
        assert!(matches!(reject(&events, &PostclassConfig::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn rule_ids_parse() {
        assert_eq!("a".parse::<RuleId>().unwrap(), RuleId::AlphaAmplitude);
        assert_eq!("temporal_context".parse::<RuleId>().unwrap(), RuleId::TemporalContext);
        assert!("z".parse::<RuleId>().is_err());
    }
}
