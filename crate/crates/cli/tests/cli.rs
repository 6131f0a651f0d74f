use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mespot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mespot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three subjects, one short video each, one micro-expression per video.
const PLAN: &str = "\
video_id = a
subject_id = s1
duration_s = 4
noise_sigma = 0.5
seed = 1
event = micro 4 1.2 0.3 30
event = blink eyes 2.6 0.25 45
---
video_id = b
subject_id = s2
duration_s = 4
noise_sigma = 0.5
seed = 2
event = micro 8 2.1 0.3 30
---
video_id = c
subject_id = s3
duration_s = 4
noise_sigma = 0.5
seed = 3
event = micro 1 1.6 0.3 30
";

fn synth(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("plan.txt");
    fs::write(&spec, PLAN).unwrap();
    let data = dir.join("data");
    let out = mespot(&["synth", "--spec", arg(&spec), "--out", arg(&data)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    data.join("manifest.txt")
}

#[test]
fn synth_writes_manifest_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("dataset = casme2"));
    assert_eq!(text.lines().filter(|l| l.starts_with("video")).count(), 3);
    let gt = fs::read_to_string(dir.path().join("data/gt.csv")).unwrap();
    assert_eq!(gt.lines().filter(|l| l.contains(",micro,")).count(), 3);
    assert_eq!(gt.lines().filter(|l| l.contains(",blink,")).count(), 1);
    assert_eq!(
        fs::read_dir(dir.path().join("data/a/frames"))
            .unwrap()
            .count(),
        120
    );
}

#[test]
fn spot_lbp_writes_intervals_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let res = dir.path().join("res");
    let out = mespot(&["spot", "--manifest", arg(&manifest), "--out", arg(&res)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let intervals = fs::read_to_string(res.join("intervals.csv")).unwrap();
    assert!(intervals.starts_with("video_id,onset,offset,score,source\n"));
    assert!(intervals.lines().skip(1).all(|l| l.ends_with(",lbp_chi2")));
    let curves = fs::read_to_string(res.join("curves.csv")).unwrap();
    // one row per frame of each 120-frame video plus the header
    assert_eq!(curves.lines().count(), 3 * 120 + 1);
}

#[test]
fn ltp_spotting_needs_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = mespot(&["spot", "--manifest", arg(&manifest), "--method", "ltp-ml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mespot(&[
        "spot",
        "--manifest",
        arg(&manifest),
        "--method",
        "optical-flow",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_manifests_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "dataset = casme2\n").unwrap();
    let out = mespot(&["spot", "--manifest", arg(&empty)]);
    assert_eq!(out.status.code(), Some(1));

    let broken = dir.path().join("broken.txt");
    fs::write(&broken, "dataset = casme2\nvideo = a, s1\n").unwrap();
    let out = mespot(&["spot", "--manifest", arg(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));

    let out = mespot(&["spot", "--manifest", arg(&dir.path().join("missing.txt"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flags_are_usage_errors() {
    assert_eq!(mespot(&["loso", "--bogus"]).status.code(), Some(2));
    assert_eq!(mespot(&[]).status.code(), Some(2));
}

#[test]
fn loso_writes_one_model_per_subject_and_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let res = dir.path().join("loso");
    let out = mespot(&[
        "loso",
        "--manifest",
        arg(&manifest),
        "--out",
        arg(&res),
        "--jobs",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("M=3 "), "{stdout}");
    for s in ["s1", "s2", "s3"] {
        assert!(res.join(format!("model_{s}.txt")).is_file());
    }
    for f in ["report.csv", "report.json", "intervals.csv"] {
        assert!(res.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(res.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 + 1);
    assert!(csv.lines().last().unwrap().starts_with("ALL,3,"));
}

#[test]
fn train_then_spot_with_model() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let model = dir.path().join("model.txt");
    let out = mespot(&[
        "train",
        "--manifest",
        arg(&manifest),
        "--model-out",
        arg(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(model.is_file());
    let res = dir.path().join("ltp");
    let out = mespot(&[
        "spot",
        "--manifest",
        arg(&manifest),
        "--method",
        "ltp-ml",
        "--model",
        arg(&model),
        "--out",
        arg(&res),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let intervals = fs::read_to_string(res.join("intervals.csv")).unwrap();
    assert!(intervals.lines().skip(1).all(|l| l.ends_with(",ltp_ml")));
    assert!(!res.join("curves.csv").exists());
}

#[test]
fn evaluate_counts_matches() {
    let dir = tempfile::tempdir().unwrap();
    let spotted = dir.path().join("spotted.csv");
    let gt = dir.path().join("gt.csv");
    fs::write(
        &spotted,
        "video_id,onset,offset,score,source\nv1,10,20,1,ltp-ml\nv1,100,110,1,ltp-ml\nv2,50,58,1,ltp-ml\n",
    )
    .unwrap();
    fs::write(
        &gt,
        "video_id,kind,onset,apex,offset\nv1,micro,12,15,20\nv1,macro,100,105,110\nv2,micro,50,54,58\nv2,micro,200,204,208\n",
    )
    .unwrap();
    let res = dir.path().join("eval");
    let out = mespot(&[
        "evaluate",
        "--spotted",
        arg(&spotted),
        "--gt",
        arg(&gt),
        "--out",
        arg(&res),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    // macro annotations are not scored: the second v1 interval is a FP
    assert!(stdout.starts_with("M=3 N=3 A=2 FP=1 FN=1 "), "{stdout}");
    assert!(res.join("report.json").is_file());

    let stray = dir.path().join("stray.csv");
    fs::write(
        &stray,
        "video_id,onset,offset,score,source\nv9,1,5,1,lbp-chi2\n",
    )
    .unwrap();
    let out = mespot(&["evaluate", "--spotted", arg(&stray), "--gt", arg(&gt)]);
    assert_eq!(out.status.code(), Some(1));
}
