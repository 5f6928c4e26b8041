use std::sync::Arc;

use proptest::prelude::*;

use gesturelet::io::stream::{Person, StreamFrame};
use gesturelet::io::synth::{concatenate, synth_gestures, SynthConfig};
use gesturelet::io::{load_model, parse_stream, save_model, write_stream, ModelArchive};
use gesturelet::pipeline::{run_detector, train_bundle, TrainSettings};
use gesturelet::{DetectorBundle, Error, OnlineDetector, SkeletonFrame, SkeletonLayout};

fn person(layout: &SkeletonLayout) -> impl Strategy<Value = Person> {
    let n = layout.joint_count();
    let dims = layout.dims;
    (
        prop::collection::vec(-1e3f64..1e3, n * dims),
        prop::collection::vec(prop_oneof![Just(0.0), 1e-6f64..=1.0], n),
        prop::option::of(0u64..1000),
    )
        .prop_map(move |(joints, conf, id)| {
            let valid = conf.iter().map(|&c| c > 0.0).collect();
            Person {
                id,
                skeleton: SkeletonFrame::new(0, 0.0, dims, joints, conf, valid).unwrap(),
            }
        })
}

fn stream(layout: SkeletonLayout) -> impl Strategy<Value = Vec<StreamFrame>> {
    prop::collection::vec(prop::collection::vec(person(&layout), 0..3), 0..6).prop_map(|frames| {
        frames
            .into_iter()
            .enumerate()
            .map(|(i, persons)| {
                let t = i as f64 / 30.0;
                StreamFrame {
                    frame_index: i as u64,
                    t,
                    persons: persons
                        .into_iter()
                        .map(|mut p| {
                            p.skeleton.frame_index = i as u64;
                            p.skeleton.timestamp_s = t;
                            p
                        })
                        .collect(),
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn openpose_stream_round_trips(frames in stream(SkeletonLayout::openpose18())) {
        let mut buf = Vec::new();
        write_stream(&mut buf, &frames).unwrap();
        let back = parse_stream(std::str::from_utf8(&buf).unwrap(), &SkeletonLayout::openpose18()).unwrap();
        prop_assert_eq!(back, frames);
    }

    #[test]
    fn ntu_stream_round_trips(frames in stream(SkeletonLayout::ntu25())) {
        let mut buf = Vec::new();
        write_stream(&mut buf, &frames).unwrap();
        let back = parse_stream(std::str::from_utf8(&buf).unwrap(), &SkeletonLayout::ntu25()).unwrap();
        prop_assert_eq!(back, frames);
    }
}

#[test]
fn stream_errors_carry_line_numbers() {
    let layout = SkeletonLayout::openpose18();
    let ok = r#"{"t": 0.0, "persons": []}"#;
    let short = r#"{"t": 0.1, "persons": [{"joints": [[0, 0]], "conf": [1]}]}"#;
    let err = parse_stream(&format!("{ok}\n\n{short}\n"), &layout).unwrap_err();
    assert!(matches!(err, Error::LayoutMismatch { line: 3, .. }), "{err:?}");
    let err = parse_stream(&format!("{ok}\nnot json\n"), &layout).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
}

fn small_bundle() -> DetectorBundle {
    let data = synth_gestures(&SynthConfig {
        sequences_per_class: 10,
        ..SynthConfig::default()
    })
    .unwrap();
    let ts = TrainSettings {
        codebook_size: 16,
        ..TrainSettings::default()
    };
    train_bundle(&data.sequences, &ts).unwrap().0
}

#[test]
fn archive_round_trip_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let archive = ModelArchive::new(small_bundle(), 5);
    save_model(&path, &archive).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, archive);
    assert_eq!(back.to_json(), archive.to_json());

    let mut t = archive.clone();
    t.bundle.codebook.centroids[3][7] += 1e-9;
    std::fs::write(&path, t.to_json()).unwrap();
    assert!(matches!(load_model(&path), Err(Error::DigestMismatch(_))));

    let mut t = archive.clone();
    t.bundle.model.per_class[0].linear.bias += 1.0;
    std::fs::write(&path, t.to_json()).unwrap();
    assert!(matches!(load_model(&path), Err(Error::DigestMismatch(_))));

    let mut t = archive.clone();
    t.format_version = 2;
    std::fs::write(&path, t.to_json()).unwrap();
    assert!(matches!(load_model(&path), Err(Error::VersionUnsupported(2))));

    let text = archive.to_json();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Parse { .. })));
}

#[test]
fn spawn_matches_new_but_skips_digests() {
    let bundle = small_bundle();
    let data = synth_gestures(&SynthConfig {
        sequences_per_class: 4,
        seed: 9,
        ..SynthConfig::default()
    })
    .unwrap();
    let (frames, _) = concatenate(&data.sequences).unwrap();
    let b = Arc::new(bundle.clone());
    let a = run_detector(&mut OnlineDetector::new(b.clone(), 1).unwrap(), &frames).unwrap();
    let s = run_detector(&mut OnlineDetector::spawn(b, 1).unwrap(), &frames).unwrap();
    assert_eq!(a, s);

    let mut stale = bundle;
    stale.model.codebook_digest = "0".repeat(64);
    let stale = Arc::new(stale);
    assert!(matches!(
        OnlineDetector::new(stale.clone(), 0),
        Err(Error::ModelMismatch(_))
    ));
    assert!(OnlineDetector::spawn(stale.clone(), 0).is_ok());
    let mut short = (*stale).clone();
    short.soft_bins = 0;
    assert!(matches!(
        OnlineDetector::spawn(Arc::new(short), 0),
        Err(Error::ModelMismatch(_))
    ));
}
