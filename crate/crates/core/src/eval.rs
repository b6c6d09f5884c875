//! Matching of detections against expert marks, sensitivity/specificity and
//! ROC sweeps over the fuzzy output threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fuzzy::ClassifiedEvent;
use crate::postclass::{self, PostclassConfig};
use crate::scalar::Real;
use crate::signal_io::{write_text, AnnotationSet, DetectionList, EventClass};

pub const DEFAULT_TOLERANCE_MS: f64 = 50.0;
pub const DEFAULT_THRESHOLDS: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

// Absorbs decimal round-off in times written with six digits.
const TIME_EPS_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl MatchCounts {
    pub fn marks(&self) -> usize {
        self.tp + self.fn_
    }
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

/// TP / (TP + FN).
pub fn sensitivity(c: &MatchCounts) -> Result<f64> {
    match c.tp + c.fn_ {
        0 => Err(Error::UndefinedRate("sensitivity")),
        d => Ok(c.tp as f64 / d as f64),
    }
}

/// TN / (TN + FP).
pub fn specificity(c: &MatchCounts) -> Result<f64> {
    match c.tn + c.fp {
        0 => Err(Error::UndefinedRate("specificity")),
        d => Ok(c.tn as f64 / d as f64),
    }
}

fn within(a: f64, b: f64, tol_s: f64) -> bool {
    (a - b).abs() <= tol_s + TIME_EPS_S
}

/// Counts for one channel. `marks`, `positives` and `negatives` are sorted times.
fn match_channel(marks: &[f64], positives: &[f64], negatives: &[f64], tol_s: f64) -> MatchCounts {
    let mut claimed = vec![false; positives.len()];
    let mut tp = 0;
    for &m in marks {
        // nearest unclaimed positive; ties go to the earlier one
        let lo = positives.partition_point(|&p| p < m - tol_s - TIME_EPS_S);
        let best = (lo..positives.len())
            .take_while(|&i| positives[i] <= m + tol_s + TIME_EPS_S)
            .filter(|&i| !claimed[i] && within(positives[i], m, tol_s))
            .min_by(|&i, &j| (positives[i] - m).abs().total_cmp(&(positives[j] - m).abs()));
        if let Some(i) = best {
            claimed[i] = true;
            tp += 1;
        }
    }
    let near_mark = |t: f64| {
        let i = marks.partition_point(|&m| m < t);
        (i > 0 && within(marks[i - 1], t, tol_s)) || (i < marks.len() && within(marks[i], t, tol_s))
    };
    // A positive near a mark is either its match or grouped with that match.
    let fp = positives.iter().filter(|&&p| !near_mark(p)).count();
    let tn = negatives.iter().filter(|&&n| !near_mark(n)).count();
    MatchCounts { tp, fp, tn, fn_: marks.len() - tp }
}

/// Matches classified detections against marks, per channel.
///
/// Each mark takes the nearest unclaimed positive within `tol_ms`; further
/// positives within the tolerance of a mark are grouped with it and not
/// counted. If `labels` is given, every channel of both inputs must be in it.
pub fn match_events<T: Real>(
    detections: &DetectionList<T>,
    annotations: &AnnotationSet,
    tol_ms: f64,
    labels: Option<&[String]>,
) -> Result<MatchCounts> {
    if !(tol_ms >= 0.0 && tol_ms.is_finite()) {
        return Err(Error::Range(format!("tolerance must be a non-negative number, got {tol_ms}")));
    }
    if let Some(labels) = labels {
        let known: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
        let unknown = detections
            .events()
            .iter()
            .map(|d| d.channel.as_str())
            .chain(annotations.marks().iter().map(|m| m.channel.as_str()))
            .find(|c| !known.contains(c));
        if let Some(c) = unknown {
            return Err(Error::Label(c.to_string()));
        }
    }
    #[derive(Default)]
    struct Lists {
        marks: Vec<f64>,
        pos: Vec<f64>,
        neg: Vec<f64>,
    }
    let mut per: BTreeMap<&str, Lists> = BTreeMap::new();
    for m in annotations.marks() {
        per.entry(&m.channel).or_default().marks.push(m.time_s);
    }
    for d in detections.events() {
        let l = per.entry(&d.channel).or_default();
        if d.class.is_positive() { l.pos.push(d.time_s) } else { l.neg.push(d.time_s) }
    }
    let tol_s = tol_ms / 1000.0;
    let mut total = MatchCounts::default();
    for l in per.values_mut() {
        for v in [&mut l.marks, &mut l.pos, &mut l.neg] {
            v.sort_by(f64::total_cmp);
        }
        total += match_channel(&l.marks, &l.pos, &l.neg, tol_s);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub counts: MatchCounts,
    /// `None` where the rate is undefined.
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl RocPoint {
    pub fn from_counts(threshold: f64, counts: MatchCounts) -> Self {
        Self { threshold, counts, sensitivity: sensitivity(&counts).ok(), specificity: specificity(&counts).ok() }
    }

    /// Youden-style objective, defined when both rates are.
    pub fn objective(&self) -> Option<f64> {
        Some(self.sensitivity? + self.specificity?)
    }

    /// On or above the chance diagonal: sensitivity ≥ 1 − specificity.
    pub fn above_diagonal(&self) -> bool {
        self.objective().is_some_and(|j| j >= 1.0 - 1e-12)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub optimal: Option<RocPoint>,
}

impl RocCurve {
    pub fn from_points(points: Vec<RocPoint>) -> Self {
        // max of sens + spec; ties go to the more selective threshold
        let optimal = points
            .iter()
            .filter(|p| p.objective().is_some())
            .fold(None::<&RocPoint>, |best, p| match best {
                Some(b) if b.objective() > p.objective() => Some(b),
                _ => Some(p),
            })
            .copied();
        Self { points, optimal }
    }
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if let Some(t) = thresholds.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Range(format!("threshold {t} is not a non-negative number")));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Range("thresholds must be strictly increasing".into()));
    }
    Ok(())
}

/// Events relabelled against one threshold, before post-classification.
pub fn relabel<T: Real>(events: &[ClassifiedEvent<T>], threshold: f64) -> Vec<ClassifiedEvent<T>> {
    events
        .iter()
        .map(|e| ClassifiedEvent {
            class: if e.score.as_f64() >= threshold { EventClass::Epileptiform } else { EventClass::NonEpileptiform },
            ..e.clone()
        })
        .collect()
}

/// Detection list at one threshold, with the given post-classification.
pub fn detections_at<T: Real>(
    events: &[ClassifiedEvent<T>],
    threshold: f64,
    post: &PostclassConfig,
) -> Result<DetectionList<T>> {
    postclass::apply_rejection_rules(&relabel(events, threshold), post)
}

/// Sweeps the fuzzy output threshold. `events` must be sorted by
/// `(channel, time)`; pass [`PostclassConfig::disabled`] to skip the
/// rejection rules.
pub fn roc_sweep<T: Real>(
    events: &[ClassifiedEvent<T>],
    annotations: &AnnotationSet,
    thresholds: &[f64],
    post: &PostclassConfig,
    tol_ms: f64,
) -> Result<RocCurve> {
    validate_thresholds(thresholds)?;
    let points = thresholds
        .iter()
        .map(|&t| {
            let det = detections_at(events, t, post)?;
            Ok(RocPoint::from_counts(t, match_events(&det, annotations, tol_ms, None)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve::from_points(points))
}

fn rate(r: Option<f64>) -> String {
    r.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

pub const ROC_CSV_HEADER: &str = "threshold,tp,fp,tn,fn,sensitivity,specificity";

pub fn render_roc_csv(curve: &RocCurve) -> String {
    let mut s = format!("{ROC_CSV_HEADER}\n");
    for p in &curve.points {
        let c = p.counts;
        let _ = writeln!(
            s,
            "{:.6},{},{},{},{},{},{}",
            p.threshold,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            rate(p.sensitivity),
            rate(p.specificity)
        );
    }
    s
}

pub const COUNTS_CSV_HEADER: &str = "tp,fp,tn,fn,sensitivity,specificity";

pub fn render_counts_csv(c: &MatchCounts) -> String {
    format!(
        "{COUNTS_CSV_HEADER}\n{},{},{},{},{},{}\n",
        c.tp,
        c.fp,
        c.tn,
        c.fn_,
        rate(sensitivity(c).ok()),
        rate(specificity(c).ok())
    )
}

const SVG_SIZE: f64 = 400.0;
const SVG_MARGIN: f64 = 50.0;

/// ROC plot: sensitivity (%) against 100 − specificity (%), with the chance
/// diagonal. Points with an undefined rate are not drawn.
pub fn render_roc_svg(curve: &RocCurve) -> String {
    let w = SVG_SIZE + 2.0 * SVG_MARGIN;
    let px = |fpr_pct: f64| SVG_MARGIN + fpr_pct / 100.0 * SVG_SIZE;
    let py = |sens_pct: f64| SVG_MARGIN + SVG_SIZE - sens_pct / 100.0 * SVG_SIZE;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{w}" viewBox="0 0 {w} {w}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{w}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{SVG_MARGIN}" y="{SVG_MARGIN}" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="none" stroke="black"/>"#
    );
    for tick in (0..=100).step_by(20) {
        let t = tick as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{tick}</text>"#,
            px(t),
            SVG_MARGIN + SVG_SIZE + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{tick}</text>"#,
            SVG_MARGIN - 6.0,
            py(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">100 - specificity (%)</text>"#,
        w / 2.0,
        w - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">sensitivity (%)</text>"#,
        w / 2.0,
        w / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line class="diagonal" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#888888" stroke-dasharray="6 4"/>"##,
        px(0.0),
        py(0.0),
        px(100.0),
        py(100.0)
    );
    let drawn: Vec<(f64, f64, &RocPoint)> = curve
        .points
        .iter()
        .filter_map(|p| Some(((1.0 - p.specificity?) * 100.0, p.sensitivity? * 100.0, p)))
        .collect();
    if drawn.len() > 1 {
        let pts: Vec<String> = drawn.iter().map(|(x, y, _)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f5fbf"/>"##, pts.join(" "));
    }
    for (x, y, p) in &drawn {
        let fill = if curve.optimal.is_some_and(|o| o.threshold == p.threshold) { "#d62728" } else { "#1f5fbf" };
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="{fill}"><title>threshold {:.2}</title></circle>"#,
            px(*x),
            py(*y),
            p.threshold
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<prefix>.csv` and `<prefix>.svg`.
pub fn write_report(curve: &RocCurve, prefix: impl AsRef<Path>) -> Result<()> {
    let prefix = prefix.as_ref();
    let with_ext = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(ext);
        std::path::PathBuf::from(p)
    };
    write_text(&with_ext(".csv"), &render_roc_csv(curve))?;
    write_text(&with_ext(".svg"), &render_roc_svg(curve))
}
