use proptest::prelude::*;
use skna::error::SknaError;
use skna::recording::{
    load_annotations, load_recording, save_annotations, save_recording, sidecar_path, Recording,
    RecordingFormat, SegmentAnnotation, Task,
};

fn two_channel(samples: Vec<f64>) -> Recording {
    let other: Vec<f64> = samples.iter().map(|v| -2.0 * v + 0.125).collect();
    Recording::new(
        "P07",
        1234.5,
        vec![("ch1".into(), samples), ("ch2".into(), other)],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn both_formats_round_trip_exactly(samples in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let dir = tempfile::tempdir().unwrap();
        let rec = two_channel(samples);
        for format in [RecordingFormat::Csv, RecordingFormat::RawBinary] {
            let path = dir.path().join(format!("P07.{}", format.extension()));
            save_recording(&rec, &path, format).unwrap();
            prop_assert_eq!(RecordingFormat::from_path(&path), format);
            let back = load_recording(&path, format).unwrap();
            prop_assert_eq!(&back, &rec);
        }
    }
}

#[test]
fn binary_recordings_carry_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("P07.bin");
    save_recording(&two_channel(vec![1.0, 2.0]), &path, RecordingFormat::RawBinary).unwrap();
    let side = sidecar_path(&path);
    assert!(side.ends_with("P07.bin.json"));
    assert!(side.exists());
    std::fs::remove_file(&side).unwrap();
    assert!(load_recording(&path, RecordingFormat::RawBinary).is_err());
}

#[test]
fn csv_without_participant_takes_the_file_stem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("S12.csv");
    std::fs::write(&path, "rate=500;channels=a,b\n1,2\n3,4\n").unwrap();
    let rec = load_recording(&path, RecordingFormat::Csv).unwrap();
    assert_eq!(rec.participant_id(), "S12");
    assert_eq!(rec.rate(), 500.0);
    assert_eq!(rec.channel(1).unwrap().series.samples(), &[2.0, 4.0]);
}

#[test]
fn malformed_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("no_header.csv", "1,2\n3,4\n"),
        ("bad_rate.csv", "rate=fast;channels=a\n1\n"),
        ("wide_row.csv", "rate=100;channels=a\n1,2\n"),
        ("short_row.csv", "rate=100;channels=a,b\n1\n"),
        ("text.csv", "rate=100;channels=a\nx\n"),
        ("nan.csv", "rate=100;channels=a\nNaN\n"),
    ];
    for (name, body) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        assert!(
            load_recording(&path, RecordingFormat::Csv).is_err(),
            "{name} was accepted"
        );
    }
    let nan = load_recording(&dir.path().join("nan.csv"), RecordingFormat::Csv).unwrap_err();
    assert!(matches!(nan, SknaError::Data { .. }), "{nan}");
}

#[test]
fn ragged_channels_are_rejected() {
    assert!(Recording::new("x", 100.0, vec![("a".into(), vec![1.0]), ("b".into(), vec![])]).is_err());
}

#[test]
fn annotations_round_trip_and_sort() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ann.csv");
    let anns = vec![
        SegmentAnnotation::standard(Task::Tg, 200.0, Some(6.5)).unwrap(),
        SegmentAnnotation::new(Task::Baseline, 10.0, 30.0, None).unwrap(),
        SegmentAnnotation::standard(Task::Vm, 45.0, None).unwrap(),
    ];
    save_annotations(&anns, &path).unwrap();
    let back = load_annotations(&path).unwrap();
    let mut sorted = anns.clone();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    assert_eq!(back, sorted);
}

#[test]
fn invalid_annotations_are_rejected() {
    assert!(SegmentAnnotation::new(Task::Tg, 0.0, 10.0, None).is_err());
    assert!(SegmentAnnotation::new(Task::Tg, 0.0, 10.0, Some(11.0)).is_err());
    assert!(SegmentAnnotation::new(Task::Vm, 0.0, 30.0, Some(3.0)).is_err());
    assert!(SegmentAnnotation::new(Task::Vm, -1.0, 30.0, None).is_err());
    assert!(SegmentAnnotation::new(Task::St, 0.0, 0.0, None).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "label,start,duration_s,vas\nVM,0,30,\n").unwrap();
    assert!(load_annotations(&path).is_err());
    std::fs::write(&path, "label,start_s,duration_s,vas\nXX,0,30,\n").unwrap();
    assert!(load_annotations(&path).is_err());
}

#[test]
fn annotation_past_the_end_is_flagged() {
    let rec = Recording::new("x", 100.0, vec![("a".into(), vec![0.0; 1000])]).unwrap();
    let inside = SegmentAnnotation::new(Task::Vm, 0.0, 10.0, None).unwrap();
    let outside = SegmentAnnotation::new(Task::Vm, 5.0, 10.0, None).unwrap();
    assert!(rec.check_annotation(&inside).is_ok());
    assert!(rec.check_annotation(&outside).is_err());
}
