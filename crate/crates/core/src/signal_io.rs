//! Recording, annotation and detection file formats.
//!
//! * EEGR recordings: an `EEGR1` magic line, a one-line JSON header, then
//!   little-endian `f32` samples interleaved by channel (frame after frame).
//! * Annotations: CSV `channel,time_s,kind`.
//! * Detections: CSV `channel,time_s,score,class,rejected_by`, reals with six
//!   decimals.
//!
//! Samples are in µV everywhere.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postclass::RuleId;
use crate::scalar::Real;

const MAGIC: &str = "EEGR1";

/// One labelled channel of samples (µV).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T> {
    pub label: String,
    pub samples: Vec<T>,
}

/// Multi-channel sampled EEG. All channels share one sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    sampling_rate_hz: f64,
    channels: Vec<Channel<T>>,
}

impl<T: Real> Recording<T> {
    pub fn new(sampling_rate_hz: f64, channels: Vec<Channel<T>>) -> Result<Self> {
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::Range(format!("sampling rate must be positive, got {sampling_rate_hz}")));
        }
        if let Some(first) = channels.first() {
            let n = first.samples.len();
            if let Some(bad) = channels.iter().find(|c| c.samples.len() != n) {
                return Err(Error::Integrity(format!(
                    "channel {:?} has {} samples, expected {n}",
                    bad.label,
                    bad.samples.len()
                )));
            }
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::Integrity(format!("duplicate channel label {:?}", c.label)));
            }
        }
        Ok(Self { sampling_rate_hz, channels })
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn channels(&self) -> &[Channel<T>] {
        &self.channels
    }

    pub fn channel(&self, label: &str) -> Option<&Channel<T>> {
        self.channels.iter().find(|c| c.label == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.label.clone()).collect()
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate_hz
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|c| Channel { label: c.label.clone(), samples: c.samples.iter().map(|&x| x * factor).collect() })
            .collect();
        Self { sampling_rate_hz: self.sampling_rate_hz, channels }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EegrHeader {
    fs: f64,
    channels: Vec<String>,
    n_samples: usize,
    unit: String,
    #[serde(default = "unit_scale")]
    scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

/// Serializes a recording to EEGR bytes. Samples are narrowed to `f32`.
pub fn encode_recording<T: Real>(rec: &Recording<T>) -> Vec<u8> {
    let header = EegrHeader {
        fs: rec.sampling_rate_hz,
        channels: rec.labels(),
        n_samples: rec.n_samples(),
        unit: "uV".into(),
        scale: 1.0,
    };
    let json = serde_json::to_string(&header).expect("header serializes");
    let n_ch = rec.channels.len();
    let mut out = Vec::with_capacity(MAGIC.len() + json.len() + 2 + 4 * n_ch * rec.n_samples());
    out.extend_from_slice(MAGIC.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(json.as_bytes());
    out.push(b'\n');
    for i in 0..rec.n_samples() {
        for c in &rec.channels {
            let v = c.samples[i].to_f32().unwrap_or(f32::NAN);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses EEGR bytes.
pub fn decode_recording<T: Real>(bytes: &[u8]) -> Result<Recording<T>> {
    let fmt_err = |location: &str, msg: String| Error::Format { location: location.into(), msg };

    let nl1 = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fmt_err("line 1", "missing magic line".into()))?;
    if &bytes[..nl1] != MAGIC.as_bytes() {
        return Err(fmt_err("line 1", format!("expected magic {MAGIC:?}")));
    }
    let rest = &bytes[nl1 + 1..];
    let nl2 = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fmt_err("line 2", "unterminated header".into()))?;
    let header_text =
        std::str::from_utf8(&rest[..nl2]).map_err(|e| fmt_err("line 2", format!("header is not UTF-8: {e}")))?;
    let header: EegrHeader = serde_json::from_str(header_text)
        .map_err(|e| fmt_err(&format!("line 2, column {}", e.column()), e.to_string()))?;
    if header.unit != "uV" {
        return Err(fmt_err("line 2", format!("unsupported unit {:?}, expected \"uV\"", header.unit)));
    }
    if !(header.scale.is_finite() && header.scale != 0.0) {
        return Err(fmt_err("line 2", format!("invalid scale factor {}", header.scale)));
    }

    let data_offset = nl1 + 1 + nl2 + 1;
    let data = &bytes[data_offset..];
    let n_ch = header.channels.len();
    let frame = 4 * n_ch;
    if n_ch == 0 {
        if !data.is_empty() {
            return Err(Error::Integrity("sample data present but no channels declared".into()));
        }
    } else if !data.len().is_multiple_of(frame) {
        return Err(Error::Integrity(format!(
            "sample data ({} bytes from offset {data_offset}) is not a whole number of {n_ch}-channel frames; \
             channels have unequal lengths",
            data.len()
        )));
    } else if data.len() / frame != header.n_samples {
        return Err(Error::Integrity(format!(
            "header declares {} samples per channel, data holds {}",
            header.n_samples,
            data.len() / frame
        )));
    }

    let scale = T::of(header.scale);
    let mut channels: Vec<Channel<T>> = header
        .channels
        .iter()
        .map(|l| Channel { label: l.clone(), samples: Vec::with_capacity(header.n_samples) })
        .collect();
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let raw = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let v = T::from_f32(raw).unwrap_or_else(T::nan);
        channels[i % n_ch].samples.push(if header.scale == 1.0 { v } else { v * scale });
    }
    Recording::new(header.fs, channels)
}

pub fn read_recording<T: Real>(path: impl AsRef<Path>) -> Result<Recording<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_recording(&bytes)
}

pub fn write_recording<T: Real>(rec: &Recording<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_recording(rec)).map_err(|e| Error::io(path, e))
}

/// Reads only the channel labels and sampling rate of an EEGR file.
pub fn read_recording_labels(path: impl AsRef<Path>) -> Result<(f64, Vec<String>)> {
    use std::io::{BufRead, BufReader};
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line).map_err(|e| Error::io(path, e))?;
    if line.strip_suffix(b"\n") != Some(MAGIC.as_bytes()) {
        return Err(Error::Format { location: "line 1".into(), msg: format!("expected magic {MAGIC:?}") });
    }
    line.clear();
    reader.read_until(b'\n', &mut line).map_err(|e| Error::io(path, e))?;
    let header: EegrHeader = serde_json::from_slice(line.strip_suffix(b"\n").unwrap_or(&line)).map_err(|e| {
        Error::Format { location: format!("line 2, column {}", e.column()), msg: e.to_string() }
    })?;
    Ok((header.fs, header.channels))
}

fn by_channel_time(a: (&str, f64), b: (&str, f64)) -> Ordering {
    a.0.cmp(b.0).then(a.1.total_cmp(&b.1))
}

/// One expert mark.
#[derive(Debug, Clone, PartialEq)]
pub struct Mark {
    pub channel: String,
    pub time_s: f64,
    pub kind: String,
}

/// Expert marks sorted by `(channel, time_s)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    marks: Vec<Mark>,
}

impl AnnotationSet {
    pub fn new(mut marks: Vec<Mark>) -> Result<Self> {
        if let Some(m) = marks.iter().find(|m| !(m.time_s.is_finite() && m.time_s >= 0.0)) {
            return Err(Error::Range(format!("mark time {} on {:?} is negative or not finite", m.time_s, m.channel)));
        }
        marks.sort_by(|a, b| by_channel_time((&a.channel, a.time_s), (&b.channel, b.time_s)));
        Ok(Self { marks })
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// Distinct channel labels, sorted.
    pub fn channels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.marks.iter().map(|m| m.channel.as_str()).collect();
        out.dedup();
        out
    }

    /// Marks of one channel, in time order.
    pub fn for_channel<'a>(&'a self, channel: &'a str) -> impl Iterator<Item = &'a Mark> + 'a {
        self.marks.iter().filter(move |m| m.channel == channel)
    }

    /// Checks every mark lies inside a recording of the given duration.
    pub fn validate_against(&self, duration_s: f64) -> Result<()> {
        match self.marks.iter().find(|m| m.time_s > duration_s) {
            Some(m) => Err(Error::Range(format!(
                "mark at {} s on {:?} lies beyond the recording end ({duration_s} s)",
                m.time_s, m.channel
            ))),
            None => Ok(()),
        }
    }
}

fn csv_location(pos: Option<&csv::Position>) -> String {
    pos.map(|p| format!("line {}", p.line())).unwrap_or_else(|| "unknown position".into())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format { location: "line 1".into(), msg: e.to_string() })?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Format {
            location: "line 1".into(),
            msg: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn parse_real(field: &str, what: &str, location: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Format { location: location.into(), msg: format!("{what} {field:?} is not a number") })?;
    if !v.is_finite() {
        return Err(Error::Format { location: location.into(), msg: format!("{what} {field:?} is not finite") });
    }
    Ok(v)
}

pub fn parse_annotations(text: &str) -> Result<AnnotationSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    check_header(&mut rdr, &["channel", "time_s", "kind"])?;
    let mut marks = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Format { location: csv_location(e.position()), msg: e.to_string() })?;
        let location = csv_location(record.position());
        if record.len() != 3 {
            return Err(Error::Format { location, msg: format!("expected 3 fields, found {}", record.len()) });
        }
        let time_s = parse_real(&record[1], "time", &location)?;
        if time_s < 0.0 {
            return Err(Error::Range(format!("{location}: negative mark time {time_s}")));
        }
        marks.push(Mark { channel: record[0].to_string(), time_s, kind: record[2].to_string() });
    }
    AnnotationSet::new(marks)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
}

pub fn render_annotations(set: &AnnotationSet) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["channel", "time_s", "kind"]).expect("in-memory write");
    for m in &set.marks {
        w.write_record([m.channel.as_str(), &format!("{:.6}", m.time_s), m.kind.as_str()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn write_annotations(set: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &render_annotations(set))
}

/// Three-way event label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventClass {
    NonEpileptiform,
    Possible,
    Epileptiform,
}

impl EventClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EventClass::NonEpileptiform => "non_epileptiform",
            EventClass::Possible => "possible",
            EventClass::Epileptiform => "epileptiform",
        }
    }

    pub fn is_positive(self) -> bool {
        self == EventClass::Epileptiform
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "non_epileptiform" => Ok(EventClass::NonEpileptiform),
            "possible" => Ok(EventClass::Possible),
            "epileptiform" => Ok(EventClass::Epileptiform),
            other => Err(format!("unknown class {other:?}")),
        }
    }
}

/// One scored event as emitted by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub channel: String,
    pub time_s: f64,
    pub score: T,
    pub class: EventClass,
    pub rejected_by: Option<RuleId>,
}

/// Scored events sorted by `(channel, time_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionList<T> {
    events: Vec<Detection<T>>,
}

impl<T> Default for DetectionList<T> {
    fn default() -> Self {
        Self { events: Vec::new() }
    }
}

impl<T: Real> DetectionList<T> {
    pub fn new(mut events: Vec<Detection<T>>) -> Result<Self> {
        if let Some(e) = events.iter().find(|e| !(e.score >= T::zero() && e.score <= T::one())) {
            return Err(Error::Range(format!("score {} at {} s on {:?} outside [0,1]", e.score, e.time_s, e.channel)));
        }
        if let Some(e) = events.iter().find(|e| !e.time_s.is_finite() || e.time_s < 0.0) {
            return Err(Error::Range(format!("detection time {} on {:?} is invalid", e.time_s, e.channel)));
        }
        events.sort_by(|a, b| by_channel_time((&a.channel, a.time_s), (&b.channel, b.time_s)));
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Detection<T>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn positives(&self) -> impl Iterator<Item = &Detection<T>> {
        self.events.iter().filter(|e| e.class.is_positive())
    }
}

pub fn render_detections<T: Real>(list: &DetectionList<T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["channel", "time_s", "score", "class", "rejected_by"]).expect("in-memory write");
    for e in &list.events {
        w.write_record([
            e.channel.as_str(),
            &format!("{:.6}", e.time_s),
            &format!("{:.6}", e.score.as_f64()),
            e.class.as_str(),
            e.rejected_by.map_or("", RuleId::as_str),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn parse_detections<T: Real>(text: &str) -> Result<DetectionList<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    check_header(&mut rdr, &["channel", "time_s", "score", "class", "rejected_by"])?;
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Format { location: csv_location(e.position()), msg: e.to_string() })?;
        let location = csv_location(record.position());
        if record.len() != 5 {
            return Err(Error::Format { location, msg: format!("expected 5 fields, found {}", record.len()) });
        }
        let time_s = parse_real(&record[1], "time", &location)?;
        let score = parse_real(&record[2], "score", &location)?;
        let class = record[3].parse().map_err(|msg| Error::Format { location: location.clone(), msg })?;
        let rejected_by = match record[4].trim() {
            "" => None,
            id => Some(id.parse().map_err(|msg| Error::Format { location: location.clone(), msg })?),
        };
        events.push(Detection { channel: record[0].to_string(), time_s, score: T::of(score), class, rejected_by });
    }
    DetectionList::new(events)
}

pub fn read_detections<T: Real>(path: impl AsRef<Path>) -> Result<DetectionList<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text)
}

pub fn write_detections<T: Real>(list: &DetectionList<T>, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &render_detections(list))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_recording() -> Recording<f64> {
        let samples: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.1).sin() * 50.0).collect();
        Recording::new(200.0, vec![Channel { label: "Fp1".into(), samples }]).unwrap()
    }

    #[test]
    fn duration_follows_sample_count() {
        let rec = ramp_recording();
        assert_eq!(rec.duration_s(), 10.0);
        let back: Recording<f64> = decode_recording(&encode_recording(&rec)).unwrap();
        assert_eq!(back.duration_s(), 10.0);
        assert_eq!(back.labels(), vec!["Fp1".to_string()]);
    }

    #[test]
    fn unequal_channels_are_an_integrity_error() {
        let err = Recording::new(
            200.0,
            vec![
                Channel { label: "Fp1".into(), samples: vec![0.0f64; 10] },
                Channel { label: "Fp2".into(), samples: vec![0.0; 9] },
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));

        // A two-channel file whose payload ends mid-frame.
        let mut bytes = b"EEGR1\n{\"fs\":200.0,\"channels\":[\"Fp1\",\"Fp2\"],\"n_samples\":2,\"unit\":\"uV\"}\n".to_vec();
        bytes.extend(std::iter::repeat_n(0u8, 12));
        assert!(matches!(decode_recording::<f64>(&bytes), Err(Error::Integrity(_))));
    }

    #[test]
    fn malformed_header_reports_location() {
        let bytes = b"EEGR1\n{\"fs\":200.0,\"channels\":[\"Fp1\"\n".to_vec();
        match decode_recording::<f32>(&bytes) {
            Err(Error::Format { location, .. }) => assert!(location.starts_with("line 2")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(decode_recording::<f32>(b"EDF+\n{}\n"), Err(Error::Format { .. })));
    }

    #[test]
    fn annotation_rows() {
        let set = parse_annotations("channel,time_s,kind\nFp1,12.345,spike\n").unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.marks()[0].time_s, 12.345);
        assert_eq!(set.marks()[0].kind, "spike");

        let set = parse_annotations("channel,time_s,kind\nFp2,1.0,spike\nFp1,9.0,sharp\nFp1,3.0,spike\n").unwrap();
        let order: Vec<(&str, f64)> = set.marks().iter().map(|m| (m.channel.as_str(), m.time_s)).collect();
        assert_eq!(order, vec![("Fp1", 3.0), ("Fp1", 9.0), ("Fp2", 1.0)]);

        assert!(matches!(parse_annotations("channel,time_s,kind\nFp1,-1.0,spike\n"), Err(Error::Range(_))));
        assert!(matches!(parse_annotations("channel,time_s,kind\nFp1,abc,spike\n"), Err(Error::Format { .. })));
    }

    #[test]
    fn detection_csv_layout() {
        let empty = DetectionList::<f64>::default();
        assert_eq!(render_detections(&empty), "channel,time_s,score,class,rejected_by\n");

        let one = DetectionList::new(vec![Detection {
            channel: "Fp1".into(),
            time_s: 3.2,
            score: 0.91f64,
            class: EventClass::Epileptiform,
            rejected_by: None,
        }])
        .unwrap();
        assert_eq!(
            render_detections(&one),
            "channel,time_s,score,class,rejected_by\nFp1,3.200000,0.910000,epileptiform,\n"
        );
    }

    #[test]
    fn scores_outside_unit_interval_rejected() {
        let bad = DetectionList::new(vec![Detection {
            channel: "Fp1".into(),
            time_s: 1.0,
            score: 1.5f64,
            class: EventClass::Epileptiform,
            rejected_by: None,
        }]);
        assert!(matches!(bad, Err(Error::Range(_))));
    }
}
