//! Seeded synthetic recordings: 1/f background, optional alpha rhythm,
//! injected spike/sharp-wave pulses (annotated) and artifact mimics (not
//! annotated).

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal_io::{AnnotationSet, Channel, Mark, Recording};

/// Minimum gap between the extents of neighbouring events on a channel.
pub const MIN_GAP_MS: f64 = 300.0;
/// Events keep this far from either end of the recording.
pub const EDGE_MARGIN_S: f64 = 1.0;

pub const SPIKE_DURATION_MS: (f64, f64) = (20.0, 70.0);
pub const SHARP_DURATION_MS: (f64, f64) = (70.0, 200.0);

/// Standard 10-20 montage labels, extended with a numeric suffix when more
/// channels are requested.
pub const CHANNEL_LABELS: [&str; 19] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz", "P4", "T6", "O1", "O2",
];

pub fn channel_label(i: usize) -> String {
    match CHANNEL_LABELS.get(i) {
        Some(l) => l.to_string(),
        None => format!("Ch{}", i + 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Spike,
    Sharp,
    KComplex,
    EmgBurst,
    EogRamp,
}

impl Template {
    pub const ALL: [Template; 5] =
        [Template::Spike, Template::Sharp, Template::KComplex, Template::EmgBurst, Template::EogRamp];

    pub fn as_str(self) -> &'static str {
        match self {
            Template::Spike => "spike",
            Template::Sharp => "sharp",
            Template::KComplex => "k_complex",
            Template::EmgBurst => "emg_burst",
            Template::EogRamp => "eog_ramp",
        }
    }

    /// Only epileptiform templates are annotated.
    pub fn is_annotated(self) -> bool {
        matches!(self, Template::Spike | Template::Sharp)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Template {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| format!("unknown template {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    /// Power-law exponent of the 1/f^α spectrum.
    #[serde(default = "Background::default_exponent")]
    pub exponent: f64,
    /// Standard deviation of the noise component.
    pub std_uv: f64,
    #[serde(default = "Background::default_lowcut")]
    pub lowcut_hz: f64,
    #[serde(default = "Background::default_highcut")]
    pub highcut_hz: f64,
    #[serde(default)]
    pub alpha_amplitude_uv: f64,
    #[serde(default = "Background::default_alpha_frequency")]
    pub alpha_frequency_hz: f64,
}

impl Background {
    fn default_exponent() -> f64 {
        1.0
    }
    fn default_lowcut() -> f64 {
        0.5
    }
    fn default_highcut() -> f64 {
        40.0
    }
    fn default_alpha_frequency() -> f64 {
        10.0
    }
}

impl Default for Background {
    fn default() -> Self {
        Self {
            exponent: 1.0,
            std_uv: 15.0,
            lowcut_hz: 0.5,
            highcut_hz: 40.0,
            alpha_amplitude_uv: 0.0,
            alpha_frequency_hz: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub template: Template,
    /// Events per minute, summed over all channels.
    pub rate_per_min: f64,
    pub amplitude_uv: [f64; 2],
    pub duration_ms: [f64; 2],
}

impl EventSpec {
    pub fn count(&self, duration_s: f64) -> usize {
        (self.rate_per_min * duration_s / 60.0).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default)]
    pub name: String,
    pub fs: f64,
    pub duration_s: f64,
    pub channels: usize,
    pub seed: u64,
    #[serde(default)]
    pub background: Background,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

fn ordered_positive(r: [f64; 2]) -> bool {
    r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return bad(format!("fs must be positive, got {}", self.fs));
        }
        if !(self.duration_s > 2.0 * EDGE_MARGIN_S && self.duration_s.is_finite()) {
            return bad(format!("duration_s must exceed {} s, got {}", 2.0 * EDGE_MARGIN_S, self.duration_s));
        }
        if self.channels == 0 {
            return bad("at least one channel is required".into());
        }
        let b = &self.background;
        if !(b.std_uv >= 0.0 && b.exponent.is_finite() && b.alpha_amplitude_uv >= 0.0) {
            return bad("background std and alpha amplitude must be non-negative".into());
        }
        if !(b.lowcut_hz >= 0.0 && b.lowcut_hz < b.highcut_hz) {
            return bad(format!("background band [{}, {}] Hz is empty", b.lowcut_hz, b.highcut_hz));
        }
        if !(b.alpha_frequency_hz > 0.0 && b.alpha_frequency_hz < self.fs / 2.0) {
            return bad(format!("alpha frequency {} Hz is not below Nyquist", b.alpha_frequency_hz));
        }
        for e in &self.events {
            if !(e.rate_per_min >= 0.0 && e.rate_per_min.is_finite()) {
                return bad(format!("{}: rate must be non-negative", e.template));
            }
            if !ordered_positive(e.amplitude_uv) || !ordered_positive(e.duration_ms) {
                return bad(format!("{}: amplitude and duration ranges must be positive and ordered", e.template));
            }
            let allowed = match e.template {
                Template::Spike => Some(SPIKE_DURATION_MS),
                Template::Sharp => Some(SHARP_DURATION_MS),
                _ => None,
            };
            if let Some((lo, hi)) = allowed {
                if e.duration_ms[0] < lo || e.duration_ms[1] > hi {
                    return bad(format!("{} durations must lie in {lo}-{hi} ms", e.template));
                }
            }
        }
        if self.fs / 2.0 <= EMG_BAND_HZ.1 && self.events.iter().any(|e| e.template == Template::EmgBurst) {
            return bad(format!("EMG bursts need fs above {} Hz", 2.0 * EMG_BAND_HZ.1));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }
}

pub fn parse_spec(text: &str) -> Result<SynthSpec> {
    let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::Spec(e.to_string().trim().replace('\n', " ")))?;
    spec.validate()?;
    Ok(spec)
}

pub fn read_spec(path: impl AsRef<Path>) -> Result<SynthSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec(&text)
}

const EMG_BAND_HZ: (f64, f64) = (60.0, 90.0);

/// Shape parameters drawn for one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub channel: usize,
    pub template: Template,
    /// Sample of the extremum the event is anchored on.
    pub peak_sample: usize,
    pub amplitude_uv: f64,
    pub duration_ms: f64,
    /// Fraction of the duration spent rising (spike/sharp).
    pub rise_fraction: f64,
    /// After-trough depth relative to the amplitude (spike/sharp).
    pub trough_fraction: f64,
    /// Oscillation frequency (EMG bursts).
    pub frequency_hz: f64,
    pub phase: f64,
}

fn raised(u: f64) -> f64 {
    // 0 -> 1 over u in [0, 1]
    0.5 * (1.0 - (PI * u.clamp(0.0, 1.0)).cos())
}

impl Injection {
    /// Extent in seconds before and after the anchor sample.
    pub fn extent_s(&self) -> (f64, f64) {
        let d = self.duration_ms / 1000.0;
        match self.template {
            Template::Spike | Template::Sharp => {
                let fall = d * (1.0 - self.rise_fraction);
                (d * self.rise_fraction, fall + 2.0 * fall)
            }
            Template::KComplex => (d / 4.0, 0.75 * d),
            Template::EmgBurst => (d / 2.0, d / 2.0),
            Template::EogRamp => (d, 3.0 * d),
        }
    }

    /// Waveform value at `t` seconds from the anchor.
    pub fn value_at(&self, t: f64) -> f64 {
        let a = self.amplitude_uv;
        let d = self.duration_ms / 1000.0;
        let (pre, post) = self.extent_s();
        if t < -pre || t > post {
            return 0.0;
        }
        match self.template {
            Template::Spike | Template::Sharp => {
                let rise = pre;
                let fall = d - rise;
                let trough = -self.trough_fraction * a;
                if t <= 0.0 {
                    a * raised((t + rise) / rise)
                } else if t <= fall {
                    a + (trough - a) * raised(t / fall)
                } else {
                    trough * (1.0 - raised((t - fall) / (2.0 * fall)))
                }
            }
            Template::KComplex => {
                // negative sharp component anchored at its trough, then a
                // slower positive lobe of half the amplitude
                let u = t + d / 4.0;
                if u <= d / 2.0 {
                    -a * (PI * u / (d / 2.0)).sin()
                } else {
                    0.5 * a * (PI * (u - d / 2.0) / (d / 2.0)).sin()
                }
            }
            Template::EmgBurst => {
                let w = raised((t + d / 2.0) / (d / 2.0)).min(raised((d / 2.0 - t) / (d / 2.0)));
                a * w * (2.0 * PI * self.frequency_hz * t + self.phase).sin()
            }
            Template::EogRamp => {
                if t <= 0.0 {
                    a * raised((t + d) / d)
                } else {
                    a * (1.0 - raised(t / (3.0 * d)))
                }
            }
        }
    }
}

/// Generator output with the drawn parameters of every injected event.
#[derive(Debug, Clone)]
pub struct SynthOutput<T> {
    pub recording: Recording<T>,
    pub annotations: AnnotationSet,
    pub injections: Vec<Injection>,
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

fn draw_injection(rng: &mut ChaCha8Rng, e: &EventSpec, channels: usize) -> Injection {
    Injection {
        channel: rng.random_range(0..channels),
        template: e.template,
        peak_sample: 0,
        amplitude_uv: draw(rng, e.amplitude_uv),
        duration_ms: draw(rng, e.duration_ms),
        rise_fraction: rng.random_range(0.35..=0.45),
        trough_fraction: rng.random_range(0.2..=0.5),
        frequency_hz: rng.random_range(EMG_BAND_HZ.0..=EMG_BAND_HZ.1),
        phase: rng.random_range(0.0..2.0 * PI),
    }
}

/// Places events on one channel with uniform random gaps: every ordering
/// and spacing that keeps `MIN_GAP_MS` between extents is equally likely.
fn place_channel(rng: &mut ChaCha8Rng, events: &mut [Injection], fs: f64, n_samples: usize) -> Result<()> {
    if events.is_empty() {
        return Ok(());
    }
    // random order along the time axis
    for i in (1..events.len()).rev() {
        let j = rng.random_range(0..=i);
        events.swap(i, j);
    }
    let margin = (EDGE_MARGIN_S * fs).ceil();
    let gap = (MIN_GAP_MS / 1000.0 * fs).ceil();
    let extents: Vec<(f64, f64)> =
        events.iter().map(|e| e.extent_s()).map(|(a, b)| ((a * fs).ceil() + 1.0, (b * fs).ceil() + 1.0)).collect();
    let occupied: f64 = extents.iter().map(|(a, b)| a + b).sum::<f64>() + gap * (events.len() - 1) as f64;
    let free = n_samples as f64 - 2.0 * margin - occupied;
    if free < 0.0 {
        return Err(Error::Spec(format!(
            "{} events do not fit on one channel with {MIN_GAP_MS} ms spacing",
            events.len()
        )));
    }
    let mut offsets: Vec<f64> = (0..events.len()).map(|_| rng.random_range(0.0..=free)).collect();
    offsets.sort_by(f64::total_cmp);
    let mut before = margin;
    for (e, (&(pre, post), off)) in events.iter_mut().zip(extents.iter().zip(offsets)) {
        e.peak_sample = (before + off.floor() + pre) as usize;
        before += pre + post + gap;
    }
    Ok(())
}

/// Unit-free 1/f^α noise in the given band, scaled to `std_uv`.
pub fn colored_noise(rng: &mut ChaCha8Rng, n: usize, fs: f64, bg: &Background) -> Vec<f64> {
    if n == 0 || bg.std_uv == 0.0 {
        return vec![0.0; n];
    }
    let mut buf: Vec<Complex<f64>> =
        (0..n).map(|_| Complex::new(StandardNormal.sample(&mut *rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * fs / n as f64;
        let gain = if f >= bg.lowcut_hz.max(fs / n as f64) && f <= bg.highcut_hz { f.powf(-bg.exponent / 2.0) } else { 0.0 };
        *c *= gain;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if std == 0.0 {
        return vec![0.0; n];
    }
    x.iter().map(|v| (v - mean) / std * bg.std_uv).collect()
}

/// Channel-derived random stream; stream 0 is reserved for event layout.
fn channel_rng(seed: u64, channel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(channel as u64 + 1);
    rng
}

pub fn generate_with_truth<T: Real>(spec: &SynthSpec) -> Result<SynthOutput<T>> {
    spec.validate()?;
    let fs = spec.fs;
    let n = spec.n_samples();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut per_channel: Vec<Vec<Injection>> = vec![Vec::new(); spec.channels];
    for e in &spec.events {
        for _ in 0..e.count(spec.duration_s) {
            let inj = draw_injection(&mut rng, e, spec.channels);
            per_channel[inj.channel].push(inj);
        }
    }
    for events in per_channel.iter_mut() {
        place_channel(&mut rng, events, fs, n)?;
    }

    let bg = &spec.background;
    let channels: Vec<Channel<T>> = per_channel
        .par_iter()
        .enumerate()
        .map(|(c, events)| {
            let mut rng = channel_rng(spec.seed, c);
            let mut x = colored_noise(&mut rng, n, fs, bg);
            if bg.alpha_amplitude_uv > 0.0 {
                let phase = rng.random_range(0.0..2.0 * PI);
                let w = 2.0 * PI * bg.alpha_frequency_hz / fs;
                for (i, v) in x.iter_mut().enumerate() {
                    *v += bg.alpha_amplitude_uv * (w * i as f64 + phase).sin();
                }
            }
            for e in events {
                let (pre, post) = e.extent_s();
                let lo = e.peak_sample.saturating_sub((pre * fs).ceil() as usize);
                let hi = (e.peak_sample + (post * fs).ceil() as usize + 1).min(n);
                for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                    *v += e.value_at((i as f64 - e.peak_sample as f64) / fs);
                }
            }
            Channel { label: channel_label(c), samples: x.into_iter().map(T::of).collect() }
        })
        .collect();
    let recording = Recording::new(fs, channels)?;

    let mut injections: Vec<Injection> = per_channel.into_iter().flatten().collect();
    injections.sort_by_key(|e| (e.channel, e.peak_sample));
    let marks = injections
        .iter()
        .filter(|e| e.template.is_annotated())
        .map(|e| Mark { channel: channel_label(e.channel), time_s: e.peak_sample as f64 / fs, kind: e.template.to_string() })
        .collect();
    Ok(SynthOutput { recording, annotations: AnnotationSet::new(marks)?, injections })
}

pub fn generate<T: Real>(spec: &SynthSpec) -> Result<(Recording<T>, AnnotationSet)> {
    let out = generate_with_truth(spec)?;
    Ok((out.recording, out.annotations))
}

fn preset(
    name: &str,
    seed: u64,
    minutes: f64,
    channels: usize,
    background: Background,
    events: Vec<EventSpec>,
) -> SynthSpec {
    SynthSpec { name: name.into(), fs: 200.0, duration_s: minutes * 60.0, channels, seed, background, events }
}

fn ev(template: Template, count: usize, minutes: f64, amplitude_uv: [f64; 2], duration_ms: [f64; 2]) -> EventSpec {
    EventSpec { template, rate_per_min: count as f64 / minutes, amplitude_uv, duration_ms }
}

/// Artifact mimics shared by the presets, scaled by `n` per kind.
fn artifacts(n: usize, minutes: f64) -> Vec<EventSpec> {
    vec![
        ev(Template::KComplex, n, minutes, [100.0, 200.0], [500.0, 900.0]),
        ev(Template::EmgBurst, n, minutes, [30.0, 70.0], [100.0, 300.0]),
        ev(Template::EogRamp, n, minutes, [100.0, 250.0], [200.0, 400.0]),
    ]
}

/// The three reference corpora: medium, easy and hard.
pub fn default_corpus() -> Vec<SynthSpec> {
    let medium = {
        let m = 80.0;
        let mut events = vec![
            ev(Template::Spike, 450, m, [60.0, 160.0], [20.0, 70.0]),
            ev(Template::Sharp, 151, m, [60.0, 160.0], [70.0, 200.0]),
        ];
        events.extend(artifacts(120, m));
        let bg = Background { std_uv: 15.0, alpha_amplitude_uv: 10.0, ..Background::default() };
        preset("corpus-0", 20_130_001, m, 8, bg, events)
    };
    let easy = {
        let m = 85.0;
        let mut events = vec![
            ev(Template::Spike, 290, m, [80.0, 200.0], [20.0, 70.0]),
            ev(Template::Sharp, 97, m, [80.0, 200.0], [70.0, 200.0]),
        ];
        events.extend(artifacts(60, m));
        let bg = Background { std_uv: 10.0, alpha_amplitude_uv: 6.0, ..Background::default() };
        preset("corpus-1", 20_130_002, m, 8, bg, events)
    };
    let hard = {
        let m = 75.0;
        let mut events = vec![
            ev(Template::Spike, 240, m, [50.0, 140.0], [20.0, 70.0]),
            ev(Template::Sharp, 80, m, [50.0, 140.0], [70.0, 200.0]),
        ];
        events.extend(artifacts(200, m));
        let bg = Background { std_uv: 20.0, alpha_amplitude_uv: 14.0, ..Background::default() };
        preset("corpus-2", 20_130_003, m, 16, bg, events)
    };
    vec![medium, easy, hard]
}

/// Preset by name (`corpus-0`, `corpus-1`, `corpus-2`).
pub fn preset_by_name(name: &str) -> Option<SynthSpec> {
    default_corpus().into_iter().find(|s| s.name == name)
}
