mod common;

use common::*;
use iedetect::detector::{collect_candidates, DetectorConfig};
use iedetect::eval::{match_events, roc_sweep};
use iedetect::fuzzy::{defuzzify_centroid, Aggregate, MembershipFunction};
use iedetect::mimetic::{analyze, MimeticConfig};
use iedetect::postclass::{relabel_with, PostclassConfig};
use iedetect::signal_io::{
    decode_recording, encode_recording, parse_annotations, parse_detections, render_annotations, render_detections,
    Channel, Detection, DetectionList, Mark, Recording,
};
use iedetect::synth::{generate_with_truth, Background, EventSpec, SynthSpec, Template};
use iedetect::wavelet::{build_wavelet_table, scale_kernel, WaveletName, DEFAULT_SCALES};
use iedetect::{AnnotationSet, EventClass};
use proptest::prelude::*;

const WAVELETS: [WaveletName; 5] =
    [WaveletName::Db2, WaveletName::Db4, WaveletName::Db5, WaveletName::Coif4, WaveletName::Sym8];

fn kernel(w: usize, s: usize) -> iedetect::wavelet::ScaledKernel<f64> {
    let t = build_wavelet_table::<f64>(WAVELETS[w], 10).unwrap();
    scale_kernel(&t, DEFAULT_SCALES[s], 200.0).unwrap()
}

fn signal(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-200.0..200.0f64, n)
}

fn channel_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["Fp1", "Fp2", "C3", "Cz", "O2"]).prop_map(str::to_string)
}

fn membership() -> impl Strategy<Value = MembershipFunction<f64>> {
    // breakpoints at least 0.05 apart, as in any usable output set
    (0.0..0.3f64, 0.05..0.3f64, 0.0..0.3f64, 0.05..0.3f64, any::<bool>()).prop_map(|(a, ab, bc, cd, tri)| {
        let (b, c) = (a + ab, a + ab + if tri { 0.0 } else { bc });
        let d = (c + cd).min(1.0);
        if tri {
            MembershipFunction::triangular(a, b, d).unwrap()
        } else {
            MembershipFunction::trapezoidal(a, b, c, d).unwrap()
        }
    })
}

fn marks(times: &[(String, f64)]) -> AnnotationSet {
    AnnotationSet::new(times.iter().map(|(c, t)| Mark { channel: c.clone(), time_s: *t, kind: "spike".into() }).collect())
        .unwrap()
}

fn detections(events: &[(String, f64, bool)]) -> DetectionList<f64> {
    DetectionList::new(
        events
            .iter()
            .map(|(c, t, pos)| Detection {
                channel: c.clone(),
                time_s: *t,
                score: if *pos { 0.9 } else { 0.2 },
                class: if *pos { EventClass::Epileptiform } else { EventClass::NonEpileptiform },
                rejected_by: None,
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cwt_is_linear(x in signal(256), y in signal(256), alpha in -10.0..10.0f64, beta in -10.0..10.0f64,
                     w in 0..5usize, s in 0..4usize) {
        prop_assert!(linearity_error(&x, &y, alpha, beta, &kernel(w, s)) <= 1e-9);
    }

    #[test]
    fn cwt_argmax_follows_a_shift(noise in prop::collection::vec(-1.0..1.0f64, 2048), at in 950..1050usize,
                                  width in 3..20usize, shift in 0..60usize, w in 0..5usize, s in 0..4usize) {
        let k = kernel(w, s);
        let (x, y) = shift_case(&noise, at, width, shift);
        let (ax, ay) = shifted_argmaxes(&x, &y, shift, &k);
        prop_assert!((ay as isize - (ax + shift) as isize).abs() <= 1, "{ax} + {shift} vs {ay}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cwt_matches_direct_summation(x in signal(256), w in 0..5usize, s in 0..4usize) {
        let k = kernel(w, s);
        prop_assert!(relative_error(&cwt_oracle(&x, &k), &iedetect::wavelet::cwt(&x, &k).unwrap().coefficients) <= 1e-9);
    }

    #[test]
    fn centroid_matches_fine_integration(parts in prop::collection::vec((0.05..1.0f64, membership()), 1..4)) {
        let refs: Vec<(f64, &MembershipFunction<f64>)> = parts.iter().map(|(d, m)| (*d, m)).collect();
        let got = defuzzify_centroid(&Aggregate::from_clipped(&refs)).score;
        prop_assert!((got - centroid_oracle(&parts, 1_000_000)).abs() <= 1e-3);
    }

    #[test]
    fn triangle_features_scale_with_the_triangle(rise in 2..40usize, fall in 2..40usize, amp in 10.0..400.0f64,
                                                 offset in 0..2usize) {
        let fs = 200.0;
        let mut x = vec![0.0; 200];
        x.extend((0..rise).map(|i| amp * i as f64 / rise as f64));
        x.extend((0..=fall).map(|i| amp * (fall - i) as f64 / fall as f64));
        x.extend(vec![0.0; 200]);
        let (pair, f) = analyze(&x, fs, 200 + rise - offset, &MimeticConfig::default()).unwrap();
        prop_assert_eq!((pair.start, pair.peak, pair.end), (200, 200 + rise, 200 + rise + fall));
        prop_assert!((f.amp2_uv - amp).abs() < 1e-9);
        prop_assert!((f.dur_b_ms - fall as f64 * 5.0).abs() < 1e-9);
    }

    #[test]
    fn eegr_round_trip(chans in prop::collection::vec(prop::collection::vec(-1e4..1e4f32, 50), 1..4),
                       fs in prop::sample::select(vec![100.0, 200.0, 256.0, 512.0])) {
        let rec = Recording::new(
            fs,
            chans.iter().enumerate().map(|(i, s)| Channel { label: format!("E{i}"), samples: s.clone() }).collect(),
        ).unwrap();
        let back = decode_recording::<f32>(&encode_recording(&rec)).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn annotation_and_detection_csv_round_trip(ms in prop::collection::vec((channel_name(), 0.0..3600.0f64), 0..30),
                                               ds in prop::collection::vec((channel_name(), 0.0..3600.0f64, any::<bool>()), 0..30)) {
        let a = render_annotations(&marks(&ms));
        prop_assert_eq!(render_annotations(&parse_annotations(&a).unwrap()), a);
        let d = render_detections(&detections(&ds));
        prop_assert_eq!(render_detections(&parse_detections::<f64>(&d).unwrap()), d);
    }

    #[test]
    fn postclass_is_idempotent_and_only_removes_positives(
        raw in prop::collection::vec((channel_name(), 0.0..20.0f64, 5.0..200.0f64, 5.0..200.0f64, 2.0..200.0f64,
                                      2.0..300.0f64, 0.2..1.0f64), 0..40)) {
        let mut events: Vec<_> = raw
            .iter()
            .map(|(c, t, a1, a2, da, db, score)| {
                let class = if *score >= 0.5 { EventClass::Epileptiform } else { EventClass::NonEpileptiform };
                event(c, *t, features(*a1, *a2, *da, *db), *score, class)
            })
            .collect();
        events.sort_by(|a, b| a.candidate.channel.cmp(&b.candidate.channel).then(a.time_s.total_cmp(&b.time_s)));
        let cfg = PostclassConfig::default();
        let once = relabel_with(&events, &cfg).unwrap();
        prop_assert_eq!(&relabel_with(&once, &cfg).unwrap(), &once);
        for (before, after) in events.iter().zip(&once) {
            prop_assert!(!after.class.is_positive() || before.class.is_positive());
            prop_assert_eq!(before.score, after.score);
        }
    }

    #[test]
    fn matching_ignores_channel_names_and_time_offsets(
        ms in prop::collection::vec((channel_name(), 1.0..100.0f64), 0..20),
        ds in prop::collection::vec((channel_name(), 1.0..100.0f64, any::<bool>()), 0..30),
        offset in 0.0..50.0f64) {
        let base = match_events(&detections(&ds), &marks(&ms), 50.0, None).unwrap();
        prop_assert_eq!(base.tp + base.fn_, ms.len());
        prop_assert!(base.tp <= ds.iter().filter(|d| d.2).count());
        let rename = |c: &String| format!("X-{c}");
        let ms2: Vec<_> = ms.iter().map(|(c, t)| (rename(c), t + offset)).collect();
        let ds2: Vec<_> = ds.iter().map(|(c, t, p)| (rename(c), t + offset, *p)).collect();
        let moved = match_events(&detections(&ds2), &marks(&ms2), 50.0, None).unwrap();
        prop_assert_eq!(moved, base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn candidates_do_not_depend_on_amplitude_scale(seed in any::<u64>(), power in -4i32..6) {
        let (rec, _) = small_recording(seed);
        let table = build_wavelet_table::<f64>(WaveletName::Db2, 10).unwrap();
        let cfg = DetectorConfig::default();
        let key = |r: &Recording<f64>| -> Vec<(String, usize, f64)> {
            collect_candidates(r, &table, &cfg).unwrap().into_iter().map(|c| (c.channel, c.peak_sample, c.scale)).collect()
        };
        prop_assert_eq!(key(&rec.scaled(2f64.powi(power))), key(&rec));
    }

    #[test]
    fn synthetic_marks_match_injected_spikes(seed in any::<u64>()) {
        let spec = small_spec(seed);
        let out = generate_with_truth::<f64>(&spec).unwrap();
        let annotated = out.injections.iter().filter(|i| i.template.is_annotated()).count();
        prop_assert_eq!(out.annotations.len(), annotated);
        let expected: usize = spec.events.iter().filter(|e| e.template.is_annotated()).map(|e| e.count(spec.duration_s)).sum();
        prop_assert_eq!(annotated, expected);
    }

    #[test]
    fn postclass_never_raises_sensitivity_or_lowers_specificity(seed in any::<u64>()) {
        let (rec, ann) = small_recording(seed);
        let p = iedetect::Pipeline::new(iedetect::PipelineConfig::default()).unwrap();
        let events = p.analyze(&rec).unwrap();
        let ts = iedetect::eval::DEFAULT_THRESHOLDS;
        let with = roc_sweep(&events, &ann, &ts, &PostclassConfig::default(), 50.0).unwrap();
        let without = roc_sweep(&events, &ann, &ts, &PostclassConfig::disabled(), 50.0).unwrap();
        for (w, wo) in with.points.iter().zip(&without.points) {
            prop_assert!(w.counts.tp <= wo.counts.tp);
            prop_assert!(w.counts.fp <= wo.counts.fp);
            prop_assert!(w.counts.tn >= wo.counts.tn);
        }
        for pair in without.points.windows(2) {
            prop_assert!(pair[1].counts.tp <= pair[0].counts.tp);
            prop_assert!(pair[1].counts.fp <= pair[0].counts.fp);
        }
    }
}

fn small_spec(seed: u64) -> SynthSpec {
    let ev = |template, rate_per_min, amplitude_uv, duration_ms| EventSpec { template, rate_per_min, amplitude_uv, duration_ms };
    SynthSpec {
        name: "prop".into(),
        fs: 200.0,
        duration_s: 60.0,
        channels: 2,
        seed,
        background: Background { std_uv: 10.0, alpha_amplitude_uv: 5.0, ..Background::default() },
        events: vec![
            ev(Template::Spike, 12.0, [60.0, 160.0], [20.0, 70.0]),
            ev(Template::Sharp, 4.0, [60.0, 160.0], [70.0, 200.0]),
            ev(Template::KComplex, 2.0, [100.0, 200.0], [500.0, 900.0]),
            ev(Template::EmgBurst, 2.0, [30.0, 70.0], [100.0, 300.0]),
        ],
    }
}

fn small_recording(seed: u64) -> (Recording<f64>, AnnotationSet) {
    iedetect::synth::generate::<f64>(&small_spec(seed)).unwrap()
}
