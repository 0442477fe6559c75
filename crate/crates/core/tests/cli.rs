use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use skna::recording::{SegmentAnnotation, Task};
use skna::synth::SynthSpec;

fn skna(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skna"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

/// Three participants, two channels, 4 kHz native rate, one VM and one TG block.
fn small_spec(dir: &Path) -> PathBuf {
    let mut plan = Vec::new();
    let mut t = 2.0;
    for (task, len, vas) in [(Task::Vm, 30.0, None), (Task::Tg, 10.0, Some(6.0))] {
        plan.push(SegmentAnnotation::new(Task::Baseline, t, len, None).unwrap());
        plan.push(SegmentAnnotation::new(task, t + len + 5.0, len, vas).unwrap());
        t += 2.0 * len + 10.0;
    }
    let spec = SynthSpec {
        n_participants: 3,
        native_rate_hz: 4000.0,
        plan,
        ..Default::default()
    };
    let path = dir.join("spec.toml");
    std::fs::write(&path, spec.to_toml()).unwrap();
    path
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let spec = small_spec(root);
    let data = root.join("data");

    let out = skna(&["synth", "--spec", s(&spec), "--out", s(&data)]);
    ok(&out);
    assert_eq!(
        files(&data),
        [
            "P01.csv",
            "P01_annotations.csv",
            "P02.csv",
            "P02_annotations.csv",
            "P03.csv",
            "P03_annotations.csv",
            "ground_truth.json",
            "manifest.json",
        ]
    );
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        s(&data.join("manifest.json"))
    );

    // Extract: 2 channels x 3 rates x 2 kinds series, one plot per channel.
    let ext = root.join("extract");
    ok(&skna(&[
        "extract",
        "--recording",
        s(&data.join("P01.csv")),
        "--annotations",
        s(&data.join("P01_annotations.csv")),
        "--out",
        s(&ext),
        "--plot",
    ]));
    let names = files(&ext);
    assert_eq!(names.iter().filter(|n| n.ends_with("Hz_iskna.csv")).count(), 6);
    assert_eq!(names.iter().filter(|n| n.ends_with("Hz_tvskna.csv")).count(), 6);
    assert!(names.contains(&"P01_ch1_4000Hz_tvskna.csv".to_string()));
    assert_eq!(names.iter().filter(|n| n.ends_with(".svg")).count(), 2);
    let svg = std::fs::read_to_string(ext.join("P01_ch1.svg")).unwrap();
    let panels: Vec<&str> = svg.split(r#"<g class="panel">"#).skip(1).collect();
    assert_eq!(panels.len(), 2);
    for p in panels {
        assert_eq!(p.matches("<polyline").count(), 3);
    }
    let series = std::fs::read_to_string(ext.join("P01_ch2_500Hz_iskna.csv")).unwrap();
    assert_eq!(series.lines().next(), Some("time_s,value"));
    // Last segment ends at 97 s, plus 5 s of tail.
    assert_eq!(series.lines().count() - 1, 102 * 500);

    // Indices over the whole cohort.
    let idx = root.join("indices");
    ok(&skna(&["indices", "--data", s(&data), "--out", s(&idx)]));
    let table = idx.join("index_table.csv");
    // 3 participants x 2 channels x 3 rates x 2 kinds x 2 stimuli x (task + baseline).
    let rows = std::fs::read_to_string(&table).unwrap().lines().count() - 1;
    assert_eq!(rows, 3 * 2 * 3 * 2 * 2 * 2);

    // Evaluate twice: identical results, digests in the manifest match the files.
    let ev1 = root.join("eval1");
    let ev2 = root.join("eval2");
    for ev in [&ev1, &ev2] {
        ok(&skna(&["evaluate", "--table", s(&table), "--out", s(ev)]));
    }
    for name in ["results.csv", "results.txt"] {
        assert_eq!(
            std::fs::read(ev1.join(name)).unwrap(),
            std::fs::read(ev2.join(name)).unwrap()
        );
    }
    let m1 = manifest(&ev1.join("manifest.json"));
    let m2 = manifest(&ev2.join("manifest.json"));
    assert_eq!(m1["config_digest"], m2["config_digest"]);
    assert_eq!(m1["outputs"], m2["outputs"]);
    for o in m1["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(ev1.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    let text = std::fs::read_to_string(ev1.join("results.txt")).unwrap();
    assert!(text.contains("4 kHz") && text.contains("0.5 kHz"));

    // The one-way ICC is a different config.
    let ev3 = root.join("eval3");
    ok(&skna(&[
        "evaluate",
        "--table",
        s(&table),
        "--icc-form",
        "one-way",
        "--out",
        s(&ev3),
    ]));
    assert_ne!(
        manifest(&ev3.join("manifest.json"))["config_digest"],
        m1["config_digest"]
    );
    assert!(std::fs::read_to_string(ev3.join("results.csv"))
        .unwrap()
        .contains("ICC(1,1)"));

    // Rate comparison.
    let cmp = root.join("compare");
    ok(&skna(&[
        "compare-rates",
        "--grid",
        s(&ev1.join("results.csv")),
        "--table",
        s(&table),
        "--out",
        s(&cmp),
    ]));
    assert_eq!(
        files(&cmp),
        [
            "manifest.json",
            "rate_correlations.csv",
            "rate_deltas.csv",
            "rate_summary.txt"
        ]
    );
    let summary = std::fs::read_to_string(cmp.join("rate_summary.txt")).unwrap();
    assert!(summary.contains("star-level agreement"));

    // Grids that cover different tasks cannot be compared.
    let grid = std::fs::read_to_string(ev1.join("results.csv")).unwrap();
    let header = grid.lines().next().unwrap();
    let pick = |rate: &str, task: &str| {
        let mut body = String::from(header);
        body.push('\n');
        for l in grid.lines().skip(1) {
            let f: Vec<&str> = l.split(',').collect();
            if f[1] == rate && f[3] == task {
                body.push_str(l);
                body.push('\n');
            }
        }
        body
    };
    let a = root.join("a.csv");
    let b = root.join("b.csv");
    std::fs::write(&a, pick("4000", "VM")).unwrap();
    std::fs::write(&b, pick("1000", "CSP+")).unwrap();
    let bad = root.join("bad");
    let out = skna(&[
        "compare-rates",
        "--grid",
        s(&a),
        "--grid",
        s(&b),
        "--out",
        s(&bad),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
    assert!(!bad.exists());
}

#[test]
fn synth_is_deterministic_in_both_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = small_spec(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&skna(&[
            "synth",
            "--spec",
            s(&spec),
            "--out",
            s(dir),
            "--format",
            "binary",
            "--participants",
            "2",
            "--seed",
            "9",
        ]));
    }
    assert_eq!(
        files(&a),
        [
            "P01.bin",
            "P01.bin.json",
            "P01_annotations.csv",
            "P02.bin",
            "P02.bin.json",
            "P02_annotations.csv",
            "ground_truth.json",
            "manifest.json",
        ]
    );
    for f in ["P01.bin", "P02.bin", "ground_truth.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    assert_eq!(
        manifest(&a.join("manifest.json"))["outputs"],
        manifest(&b.join("manifest.json"))["outputs"]
    );
}

#[test]
fn usage_errors_exit_two_and_leave_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let spec = small_spec(root);
    let data = root.join("data");
    ok(&skna(&[
        "synth",
        "--spec",
        s(&spec),
        "--out",
        s(&data),
        "--participants",
        "1",
    ]));

    let out_dir = root.join("out");
    let cases: Vec<Vec<String>> = vec![
        vec![],
        vec!["frobnicate".into()],
        vec![
            "synth".into(),
            "--spec".into(),
            s(&root.join("missing.toml")).into(),
            "--out".into(),
            s(&out_dir).into(),
        ],
        vec![
            "extract".into(),
            "--recording".into(),
            s(&data.join("P01.csv")).into(),
            "--rates".into(),
            "2000".into(),
            "--out".into(),
            s(&out_dir).into(),
        ],
        vec![
            "extract".into(),
            "--recording".into(),
            s(&data.join("P01.csv")).into(),
            "--kinds".into(),
            "xskna".into(),
            "--out".into(),
            s(&out_dir).into(),
        ],
        vec![
            "evaluate".into(),
            "--table".into(),
            s(&data.join("P01.csv")).into(),
            "--icc-form".into(),
            "three-way".into(),
            "--out".into(),
            s(&out_dir).into(),
        ],
        vec![
            "indices".into(),
            "--data".into(),
            s(&root.join("nowhere")).into(),
            "--out".into(),
            s(&out_dir).into(),
        ],
    ];
    for args in cases {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = skna(&refs);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out_dir.exists(), "{args:?} left {out_dir:?}");
    }
}

#[test]
fn data_errors_exit_one_and_leave_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let empty = root.join("empty.csv");
    std::fs::write(
        &empty,
        "participant,channel,rate,kind,task,condition,segment_id,max,mean,sd\n",
    )
    .unwrap();
    let out_dir = root.join("out");
    let out = skna(&["evaluate", "--table", s(&empty), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());

    let bad = root.join("bad.csv");
    std::fs::write(&bad, "rate=4000;channels=a\n1\nNaN\n").unwrap();
    let out = skna(&["extract", "--recording", s(&bad), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}
