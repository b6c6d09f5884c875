//! Candidate selection: sliding windows, `k * std` thresholding of the wavelet
//! coefficients, peak picking and per-channel merging.

use log::debug;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{mean_std, Real};
use crate::signal_io::Recording;
use crate::wavelet::{self, cwt, scale_kernel, ScaledKernel, WaveletName, WaveletTable};

/// Shortest tail kept as a window of its own, in seconds.
pub const MIN_TAIL_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    window_s: f64,
    hop_s: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { window_s: 10.0, hop_s: 9.5 }
    }
}

impl WindowSpec {
    pub fn new(window_s: f64, hop_s: f64) -> Result<Self> {
        if !(window_s.is_finite() && hop_s.is_finite() && hop_s > 0.0 && hop_s <= window_s) {
            return Err(Error::config(format!("window spec requires 0 < hop_s <= window_s, got {window_s}/{hop_s}")));
        }
        Ok(Self { window_s, hop_s })
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }
}

/// Window start offsets and lengths, in samples. Every sample is covered.
///
/// Full windows advance by the hop. A remainder of at least [`MIN_TAIL_S`]
/// becomes a short final window; a shorter remainder is covered by a
/// full-length window aligned with the end of the channel.
pub fn window_bounds(n: usize, fs: f64, spec: WindowSpec) -> Vec<(usize, usize)> {
    let win = ((spec.window_s * fs).round() as usize).max(1);
    let hop = ((spec.hop_s * fs).round() as usize).max(1);
    let min_tail = (MIN_TAIL_S * fs).round() as usize;
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + win <= n {
        out.push((start, win));
        start += hop;
    }
    let covered = out.last().map_or(0, |&(s, l)| s + l);
    if covered < n {
        if out.is_empty() {
            out.push((0, n));
        } else if n - start >= min_tail {
            out.push((start, n - start));
        } else {
            out.push((n - win, win));
        }
    }
    out
}

pub fn segment_windows<T: Real>(samples: &[T], fs: f64, spec: WindowSpec) -> Vec<(usize, &[T])> {
    window_bounds(samples.len(), fs, spec).into_iter().map(|(s, l)| (s, &samples[s..s + l])).collect()
}

/// `k` times the population standard deviation of the segment; `+inf` for a
/// constant segment so that nothing crosses it.
pub fn threshold_for<T: Real>(segment: &[T], k: T) -> T {
    let (_, std) = mean_std(segment);
    if std > T::zero() {
        k * std
    } else {
        debug!("constant segment of {} samples: no candidates", segment.len());
        T::infinity()
    }
}

/// Greedy non-maximum suppression on `(index, magnitude)` pairs: the largest
/// magnitude wins, ties go to the earlier index, and survivors are at least
/// `min_separation` apart. Returns survivors in index order.
fn suppress<I: Copy>(mut items: Vec<(usize, I)>, magnitude: impl Fn(&I) -> f64, min_separation: usize) -> Vec<(usize, I)> {
    items.sort_by(|a, b| magnitude(&b.1).total_cmp(&magnitude(&a.1)).then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, I)> = Vec::with_capacity(items.len());
    let mut taken: Vec<usize> = Vec::new();
    for item in items {
        let pos = taken.partition_point(|&t| t < item.0);
        let near_left = pos > 0 && item.0 - taken[pos - 1] < min_separation;
        let near_right = pos < taken.len() && taken[pos] - item.0 < min_separation;
        if !(near_left || near_right) {
            taken.insert(pos, item.0);
            kept.push(item);
        }
    }
    kept.sort_by_key(|k| k.0);
    kept
}

/// Local maxima of `|c|` at or above `threshold`, thinned so that survivors
/// are at least `min_separation` samples apart.
pub fn detect_peaks<T: Real>(coeffs: &[T], threshold: T, min_separation: usize) -> Vec<usize> {
    let min_separation = min_separation.max(1);
    let mag = |i: usize| coeffs[i].abs();
    let maxima: Vec<(usize, f64)> = (1..coeffs.len().saturating_sub(1))
        .filter(|&i| mag(i) >= threshold && mag(i) > mag(i - 1) && mag(i) >= mag(i + 1))
        .map(|i| (i, mag(i).as_f64()))
        .collect();
    suppress(maxima, |m| *m, min_separation).into_iter().map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEvent<T> {
    pub channel: String,
    pub peak_sample: usize,
    pub peak_time_s: f64,
    pub scale: T,
    pub coefficient: T,
    pub segment_std_uv: T,
    /// `|coefficient|` over the spread of this scale's coefficients in the
    /// window; comparable across scales.
    pub salience: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub wavelet: WaveletName,
    pub cascade_iterations: u32,
    /// Scale menu at the 200 Hz reference rate.
    pub scales: Vec<f64>,
    pub k: f64,
    pub window: WindowSpec,
    pub min_separation_ms: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            wavelet: WaveletName::Db2,
            cascade_iterations: 10,
            scales: wavelet::DEFAULT_SCALES.to_vec(),
            k: 3.0,
            window: WindowSpec::default(),
            min_separation_ms: 50.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config(format!("k must be positive, got {}", self.k)));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config("scales must be a non-empty list of positive numbers"));
        }
        if !(self.min_separation_ms > 0.0 && self.min_separation_ms.is_finite()) {
            return Err(Error::config("min_separation_ms must be positive"));
        }
        WindowSpec::new(self.window.window_s, self.window.hop_s)?;
        Ok(())
    }

    pub fn min_separation_samples(&self, fs: f64) -> usize {
        ((self.min_separation_ms * fs / 1000.0).round() as usize).max(1)
    }
}

/// Wavelet table plus kernels for one sampling rate, reusable across channels.
#[derive(Debug, Clone)]
pub struct KernelBank<T> {
    pub kernels: Vec<ScaledKernel<T>>,
}

impl<T: Real> KernelBank<T> {
    pub fn new(table: &WaveletTable<T>, cfg: &DetectorConfig, fs: f64) -> Result<Self> {
        let kernels = wavelet::scales_for::<T>(&cfg.scales, fs)
            .into_iter()
            .map(|a| scale_kernel(table, a, fs))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kernels })
    }
}

/// Candidates of one channel, before merging.
pub fn channel_candidates<T: Real>(
    label: &str,
    samples: &[T],
    fs: f64,
    bank: &KernelBank<T>,
    cfg: &DetectorConfig,
) -> Result<Vec<CandidateEvent<T>>> {
    let k = T::of(cfg.k);
    let min_sep = cfg.min_separation_samples(fs);
    let windows = window_bounds(samples.len(), fs, cfg.window);
    let thresholds: Vec<(T, T)> = windows
        .iter()
        .map(|&(s, l)| {
            let seg = &samples[s..s + l];
            let (_, std) = mean_std(seg);
            (threshold_for(seg, k), std)
        })
        .collect();

    let mut out = Vec::new();
    for kernel in &bank.kernels {
        if kernel.len() > samples.len() {
            debug!("{label}: channel shorter than the scale-{} kernel, scale skipped", kernel.scale());
            continue;
        }
        // Interior coefficients of a zero-padded window equal those of the
        // whole channel, so transform once and threshold per window.
        let coeffs = cwt(samples, kernel)?;
        let edge = coeffs.boundary;
        for (&(start, len), &(thr, std)) in windows.iter().zip(&thresholds) {
            if !thr.is_finite() || len <= 2 * edge {
                continue;
            }
            let lo = start + edge;
            let hi = start + len - edge;
            // one extra sample each side so the interior edges can be local maxima
            let view = &coeffs.coefficients[lo - 1..(hi + 1).min(coeffs.len())];
            let (_, spread) = mean_std(&coeffs.coefficients[lo..hi]);
            for p in detect_peaks(view, thr, min_sep) {
                let i = lo - 1 + p;
                if i < lo || i >= hi {
                    continue;
                }
                out.push(CandidateEvent {
                    channel: label.to_string(),
                    peak_sample: i,
                    peak_time_s: i as f64 / fs,
                    scale: kernel.scale(),
                    coefficient: coeffs.coefficients[i],
                    segment_std_uv: std,
                    salience: if spread > T::zero() { coeffs.coefficients[i].abs() / spread } else { T::infinity() },
                });
            }
        }
    }
    Ok(out)
}

/// Merges candidates closer than `min_separation` samples on the same
/// channel, keeping the largest salience (earliest on ties). Output is
/// sorted by `(channel, peak_sample)`.
pub fn merge_candidates<T: Real>(mut cands: Vec<CandidateEvent<T>>, min_separation: usize) -> Vec<CandidateEvent<T>> {
    cands.sort_by(|a, b| a.channel.cmp(&b.channel).then(a.peak_sample.cmp(&b.peak_sample)));
    let mut out = Vec::with_capacity(cands.len());
    let mut rest = cands.as_slice();
    while let Some(first) = rest.first() {
        let n = rest.iter().take_while(|c| c.channel == first.channel).count();
        let (group, tail) = rest.split_at(n);
        let items: Vec<(usize, usize)> = group.iter().enumerate().map(|(i, c)| (c.peak_sample, i)).collect();
        let kept = suppress(items, |&i| group[i].salience.as_f64(), min_separation.max(1));
        out.extend(kept.into_iter().map(|(_, i)| group[i].clone()));
        rest = tail;
    }
    out
}

/// All merged candidates of a recording, sorted by `(channel, time)`.
pub fn collect_candidates<T: Real>(
    rec: &Recording<T>,
    table: &WaveletTable<T>,
    cfg: &DetectorConfig,
) -> Result<Vec<CandidateEvent<T>>> {
    cfg.validate()?;
    let fs = rec.sampling_rate_hz();
    let bank = KernelBank::new(table, cfg, fs)?;
    let min_sep = cfg.min_separation_samples(fs);
    let per_channel = rec
        .channels()
        .par_iter()
        .map(|ch| channel_candidates(&ch.label, &ch.samples, fs, &bank, cfg).map(|c| merge_candidates(c, min_sep)))
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<CandidateEvent<T>> = per_channel.into_iter().flatten().collect();
    all.sort_by(|a, b| a.channel.cmp(&b.channel).then(a.peak_sample.cmp(&b.peak_sample)));
    Ok(all)
}
