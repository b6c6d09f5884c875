#![allow(dead_code)]

use iedetect::detector::CandidateEvent;
use iedetect::fuzzy::{ClassifiedEvent, MembershipFunction};
use iedetect::mimetic::{FeatureVector, HalfWavePair, Polarity};
use iedetect::signal_io::{Detection, DetectionList};
use iedetect::wavelet::{cwt, ScaledKernel};
use iedetect::EventClass;

/// Direct summation over the input: `c[tau] = sum_t x[t] k[t - tau + center]`.
pub fn cwt_oracle(x: &[f64], k: &ScaledKernel<f64>) -> Vec<f64> {
    let (m, c) = (k.len() as isize, k.center() as isize);
    (0..x.len() as isize)
        .map(|tau| {
            let mut acc = 0.0;
            for (t, &v) in x.iter().enumerate() {
                let j = t as isize - tau + c;
                if (0..m).contains(&j) {
                    acc += v * k.taps()[j as usize];
                }
            }
            acc
        })
        .collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `max |a - b|` relative to `max |b|`; zero for two zero vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = max_abs(b);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Linearity of the transform on one random case: returns the relative error.
pub fn linearity_error(x: &[f64], y: &[f64], alpha: f64, beta: f64, k: &ScaledKernel<f64>) -> f64 {
    let mix: Vec<f64> = x.iter().zip(y).map(|(a, b)| alpha * a + beta * b).collect();
    let cx = cwt(x, k).unwrap().coefficients;
    let cy = cwt(y, k).unwrap().coefficients;
    let expect: Vec<f64> = cx.iter().zip(&cy).map(|(a, b)| alpha * a + beta * b).collect();
    relative_error(&cwt(&mix, k).unwrap().coefficients, &expect)
}

/// Argmaxes of `|c|` for `x` and for `y`, a copy of `x` delayed by `shift`
/// samples, each over the indices interior to both transforms.
pub fn shifted_argmaxes(x: &[f64], y: &[f64], shift: usize, k: &ScaledKernel<f64>) -> (usize, usize) {
    let (cx, cy) = (cwt(x, k).unwrap(), cwt(y, k).unwrap());
    let argmax = |c: &[f64], r: std::ops::Range<usize>| r.max_by(|&i, &j| c[i].abs().total_cmp(&c[j].abs())).unwrap();
    let r = cx.interior();
    let common = r.start..r.end - shift;
    let ax = argmax(&cx.coefficients, common.clone());
    let ay = argmax(&cy.coefficients, common.start + shift..common.end + shift);
    (ax, ay)
}

/// A bump of `width` samples at `at` over small noise; the shifted copy moves
/// the whole signal by `shift` samples.
pub fn shift_case(noise: &[f64], at: usize, width: usize, shift: usize) -> (Vec<f64>, Vec<f64>) {
    let n = noise.len();
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let u = (i as f64 - at as f64) / width as f64;
            noise[i] + if u.abs() < 1.0 { 100.0 * (1.0 + (std::f64::consts::PI * u).cos()) } else { 0.0 }
        })
        .collect();
    let y: Vec<f64> = (0..n).map(|i| if i >= shift { x[i - shift] } else { 0.0 }).collect();
    (x, y)
}

fn mf_value(y: f64, mf: &MembershipFunction<f64>) -> f64 {
    let [a, b, c, d] = match *mf {
        MembershipFunction::Triangular([a, b, c]) => [a, b, b, c],
        MembershipFunction::Trapezoidal(p) => p,
    };
    if y < a || y > d {
        0.0
    } else if y < b {
        (y - a) / (b - a)
    } else if y <= c {
        1.0
    } else {
        (d - y) / (d - c)
    }
}

/// Centroid of `max_i min(d_i, mu_i(y))` by the midpoint rule on `points` cells.
pub fn centroid_oracle(parts: &[(f64, MembershipFunction<f64>)], points: usize) -> f64 {
    let h = 1.0 / points as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..points {
        let y = (i as f64 + 0.5) * h;
        let mu = parts.iter().map(|(d, mf)| d.min(mf_value(y, mf))).fold(0.0, f64::max);
        num += y * mu;
        den += mu;
    }
    num / den
}

pub fn features(amp1: f64, amp2: f64, dur_a: f64, dur_b: f64) -> FeatureVector<f64> {
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

pub fn event(channel: &str, time_s: f64, f: FeatureVector<f64>, score: f64, class: EventClass) -> ClassifiedEvent<f64> {
    let peak = (time_s * 200.0).round() as usize;
    ClassifiedEvent {
        candidate: CandidateEvent {
            channel: channel.into(),
            peak_sample: peak,
            peak_time_s: time_s,
            scale: 4.0,
            coefficient: 100.0,
            segment_std_uv: 10.0,
            salience: 10.0,
        },
        halfwaves: HalfWavePair { start: peak.saturating_sub(1), peak, end: peak + 1, polarity: Polarity::Positive, truncated: false },
        time_s,
        features: f,
        score,
        class,
    }
}

/// Every candidate as a positive detection at its wavelet peak.
pub fn candidates_as_detections(cands: &[CandidateEvent<f64>]) -> DetectionList<f64> {
    DetectionList::new(
        cands
            .iter()
            .map(|c| Detection {
                channel: c.channel.clone(),
                time_s: c.peak_time_s,
                score: 1.0,
                class: EventClass::Epileptiform,
                rejected_by: None,
            })
            .collect(),
    )
    .unwrap()
}
