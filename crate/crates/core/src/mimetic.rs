//! Half-wave decomposition and the nine amplitude/duration/slope features.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfWavePair {
    pub start: usize,
    pub peak: usize,
    pub end: usize,
    pub polarity: Polarity,
    /// Set when a half-wave walk was cut short by the edge of the signal.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MimeticConfig {
    /// Search radius around the wavelet peak for the raw extremum.
    pub snap_ms: f64,
    /// Longest admissible half-wave.
    pub max_halfwave_ms: f64,
    /// Half-width of the baseline neighbourhood.
    pub baseline_ms: f64,
}

impl Default for MimeticConfig {
    fn default() -> Self {
        Self { snap_ms: 25.0, max_halfwave_ms: 400.0, baseline_ms: 500.0 }
    }
}

fn ms_to_samples(ms: f64, fs: f64) -> usize {
    (ms * fs / 1000.0).round() as usize
}

fn is_extremum<T: Real>(x: &[T], i: usize) -> Option<Polarity> {
    if i == 0 || i + 1 >= x.len() {
        return None;
    }
    if x[i] > x[i - 1] && x[i] >= x[i + 1] {
        Some(Polarity::Positive)
    } else if x[i] < x[i - 1] && x[i] <= x[i + 1] {
        Some(Polarity::Negative)
    } else {
        None
    }
}

fn local_mean<T: Real>(x: &[T], center: usize, half: usize, exclude: (usize, usize)) -> T {
    let lo = center.saturating_sub(half);
    let hi = (center + half + 1).min(x.len());
    let (sum, n) = (lo..hi)
        .filter(|i| *i < exclude.0 || *i > exclude.1)
        .fold((T::zero(), 0usize), |(s, n), i| (s + x[i], n + 1));
    if n == 0 {
        T::zero()
    } else {
        sum / T::of(n as f64)
    }
}

/// Snaps the wavelet peak to the most prominent raw extremum within the snap
/// radius and walks outwards to the nearest opposite turning point on each side.
pub fn decompose_halfwaves<T: Real>(
    samples: &[T],
    fs: f64,
    approx_peak: usize,
    cfg: &MimeticConfig,
) -> Result<HalfWavePair> {
    if approx_peak >= samples.len() {
        return Err(Error::Input(format!("peak index {approx_peak} outside {} samples", samples.len())));
    }
    let radius = ms_to_samples(cfg.snap_ms, fs);
    let lo = approx_peak.saturating_sub(radius);
    let hi = (approx_peak + radius).min(samples.len() - 1);
    let reference = local_mean(samples, approx_peak, ms_to_samples(cfg.baseline_ms, fs), (usize::MAX, 0));

    let (peak, polarity) = (lo..=hi)
        .filter_map(|i| is_extremum(samples, i).map(|p| (i, p)))
        .max_by(|a, b| {
            let da = (samples[a.0] - reference).abs();
            let db = (samples[b.0] - reference).abs();
            // prominence first, then proximity to the wavelet peak
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(b.0.abs_diff(approx_peak).cmp(&a.0.abs_diff(approx_peak)))
        })
        .ok_or_else(|| Error::Degenerate(format!("no local extremum within {} ms of sample {approx_peak}", cfg.snap_ms)))?;

    let limit = ms_to_samples(cfg.max_halfwave_ms, fs).max(1);
    let descending = |a: T, b: T| match polarity {
        Polarity::Positive => a < b,
        Polarity::Negative => a > b,
    };

    let mut truncated = false;
    let mut start = peak;
    while start > 0 && descending(samples[start - 1], samples[start]) {
        start -= 1;
        if peak - start > limit {
            return Err(Error::Degenerate(format!("no turning point within {} ms before the peak", cfg.max_halfwave_ms)));
        }
    }
    truncated |= start == 0;
    let mut end = peak;
    while end + 1 < samples.len() && descending(samples[end + 1], samples[end]) {
        end += 1;
        if end - peak > limit {
            return Err(Error::Degenerate(format!("no turning point within {} ms after the peak", cfg.max_halfwave_ms)));
        }
    }
    truncated |= end + 1 == samples.len();
    if start == peak || end == peak {
        return Err(Error::Degenerate("zero-duration half-wave".into()));
    }
    Ok(HalfWavePair { start, peak, end, polarity, truncated })
}

/// The nine waveform features. Amplitudes in µV, durations in ms, slopes in
/// µV/ms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector<T> {
    pub amp1_uv: T,
    pub amp2_uv: T,
    pub amp_baseline_uv: T,
    pub dur_a_ms: T,
    pub dur_b_ms: T,
    pub dur1_ms: T,
    pub dur2_ms: T,
    pub slope1: T,
    pub slope2: T,
}

/// Named inputs for rule bases: the nine features plus `amp_ratio = amp2 / amp1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Amp1,
    Amp2,
    AmpBaseline,
    DurA,
    DurB,
    Dur1,
    Dur2,
    Slope1,
    Slope2,
    AmpRatio,
}

impl Feature {
    pub const ALL: [Feature; 10] = [
        Feature::Amp1,
        Feature::Amp2,
        Feature::AmpBaseline,
        Feature::DurA,
        Feature::DurB,
        Feature::Dur1,
        Feature::Dur2,
        Feature::Slope1,
        Feature::Slope2,
        Feature::AmpRatio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Amp1 => "amp1",
            Feature::Amp2 => "amp2",
            Feature::AmpBaseline => "amp_baseline",
            Feature::DurA => "dur_a",
            Feature::DurB => "dur_b",
            Feature::Dur1 => "dur1",
            Feature::Dur2 => "dur2",
            Feature::Slope1 => "slope1",
            Feature::Slope2 => "slope2",
            Feature::AmpRatio => "amp_ratio",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let canon = match lower.as_str() {
            "dura" => "dur_a",
            "durb" => "dur_b",
            "ampbaseline" => "amp_baseline",
            other => other,
        };
        Feature::ALL.into_iter().find(|f| f.as_str() == canon).ok_or_else(|| format!("unknown feature {s:?}"))
    }
}

impl<T: Real> FeatureVector<T> {
    pub fn get(&self, f: Feature) -> T {
        match f {
            Feature::Amp1 => self.amp1_uv,
            Feature::Amp2 => self.amp2_uv,
            Feature::AmpBaseline => self.amp_baseline_uv,
            Feature::DurA => self.dur_a_ms,
            Feature::DurB => self.dur_b_ms,
            Feature::Dur1 => self.dur1_ms,
            Feature::Dur2 => self.dur2_ms,
            Feature::Slope1 => self.slope1,
            Feature::Slope2 => self.slope2,
            Feature::AmpRatio => {
                if self.amp1_uv > T::zero() {
                    self.amp2_uv / self.amp1_uv
                } else {
                    T::infinity()
                }
            }
        }
    }
}

pub fn extract_features<T: Real>(
    pair: &HalfWavePair,
    samples: &[T],
    fs: f64,
    cfg: &MimeticConfig,
) -> Result<FeatureVector<T>> {
    let HalfWavePair { start, peak, end, .. } = *pair;
    if !(start < peak && peak < end && end < samples.len()) {
        return Err(Error::Degenerate(format!("invalid half-wave bounds {start}/{peak}/{end}")));
    }
    let ms_per_sample = T::of(1000.0 / fs);
    let x = samples;
    let amp1 = (x[peak] - x[start]).abs();
    let amp2 = (x[peak] - x[end]).abs();
    let baseline = local_mean(x, peak, ms_to_samples(cfg.baseline_ms, fs), (start, end));
    let amp_baseline = (x[peak] - baseline).abs();
    let dur_a = T::of((peak - start) as f64) * ms_per_sample;
    let dur_b = T::of((end - peak) as f64) * ms_per_sample;

    // Steepest step of each half-wave; ties resolve away from the peak.
    let step = |i: usize| (x[i + 1] - x[i]).abs();
    let rise = (start..peak).fold(start, |best, i| if step(i) > step(best) { i } else { best });
    let fall = (peak..end).fold(peak, |best, i| if step(i) >= step(best) { i } else { best });
    let dur2 = T::of((fall - rise) as f64) * ms_per_sample;

    Ok(FeatureVector {
        amp1_uv: amp1,
        amp2_uv: amp2,
        amp_baseline_uv: amp_baseline,
        dur_a_ms: dur_a,
        dur_b_ms: dur_b,
        dur1_ms: dur_a + dur_b,
        dur2_ms: dur2,
        slope1: amp1 / dur_a,
        slope2: amp2 / dur_b,
    })
}

/// Decomposition and feature extraction in one step.
pub fn analyze<T: Real>(
    samples: &[T],
    fs: f64,
    approx_peak: usize,
    cfg: &MimeticConfig,
) -> Result<(HalfWavePair, FeatureVector<T>)> {
    let pair = decompose_halfwaves(samples, fs, approx_peak, cfg)?;
    let features = extract_features(&pair, samples, fs, cfg)?;
    Ok((pair, features))
}
