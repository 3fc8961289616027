use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[dataset]
name = "tiny_a"
frames_per_class = 8
schemes = ["BPSK", "QPSK"]
cfo_low = -0.001
cfo_high = 0.001
t0_min = 4
t0_max = 8
beta_min = 0.3
beta_max = 0.5
snr_min_db = 10.0
snr_max_db = 20.0
snr_center_db = 15.0
frame_length = 256
master_seed = 1

[model]
filters = [4, 6, 8]
kernel = 7

[train]
max_epochs = 2
batch_size = 4

[train.split]
train_frac = 0.5
val_frac = 0.25
test_frac = 0.25

[eval.cross_dataset]
name = "tiny_b"
frames_per_class = 8
schemes = ["BPSK", "QPSK"]
cfo_low = 0.01
cfo_high = 0.02
t0_min = 4
t0_max = 8
beta_min = 0.3
beta_max = 0.5
snr_min_db = 10.0
snr_max_db = 20.0
snr_center_db = 15.0
frame_length = 256
master_seed = 2
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclocap"))
        .args(["--threads", "1"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn inspect_matches_golden_table() {
    assert_eq!(ok(&["inspect"]), include_str!("golden/topology_32768.txt"));
}

#[test]
fn selftest_passes() {
    let out = ok(&["selftest"]);
    assert!(out.lines().any(|l| l.starts_with("[PASS]")));
    assert!(!out.contains("[FAIL]"), "{out}");
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, format!("{TINY}\n[surprise]\nkey = 1\n")).unwrap();
    assert_eq!(run(&["gen", "--config", s(&bad), "--out", s(&dir.path().join("d"))]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["gen", "--config", s(&missing), "--out", s(dir.path())]).status.code(), Some(3));
    let junk = dir.path().join("junk.ckpt");
    fs::write(&junk, b"not a checkpoint").unwrap();
    assert_eq!(run(&["inspect", "--ckpt", s(&junk)]).status.code(), Some(3));
    assert_eq!(run(&["inspect", "--frame-length", "1000"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn commands_chain_from_generation_to_cross_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.toml");
    fs::write(&cfg, TINY).unwrap();
    ok(&["gen", "--config", s(&cfg), "--out", s(&d.join("raw_a"))]);
    ok(&["gen", "--config", s(&cfg), "--cross", "--out", s(&d.join("raw_b"))]);
    for x in ["a", "b"] {
        ok(&[
            "preprocess",
            "--config",
            s(&cfg),
            "--data",
            s(&d.join(format!("raw_{x}"))),
            "--out",
            s(&d.join(format!("pre_{x}"))),
        ]);
    }
    let lines = ok(&["lines", "--data", s(&d.join("pre_a")), "--frame", "0"]);
    assert!(!lines.is_empty());
    ok(&["features", "--data", s(&d.join("pre_a")), "--frame", "1", "--out", s(&d.join("feat"))]);
    assert!(d.join("feat/frame1_FREQ4.csv").exists());

    let run_dir = d.join("run");
    ok(&["train", "--config", s(&cfg), "--data", s(&d.join("pre_a")), "--out", s(&run_dir)]);
    for f in ["model.ckpt", "train_log.csv", "eval.json", "eval_confusion.csv", "config.toml"] {
        assert!(run_dir.join(f).exists(), "{f} missing");
    }
    let ckpt = run_dir.join("model.ckpt");
    ok(&["eval", "--ckpt", s(&ckpt), "--data", s(&d.join("pre_a")), "--out", s(&d.join("ev"))]);
    let within = fs::read(run_dir.join("eval.json")).unwrap();
    assert_eq!(fs::read(d.join("ev/eval.json")).unwrap(), within);
    let x = ok(&["xeval", "--ckpt", s(&ckpt), "--data", s(&d.join("pre_b")), "--out", s(&d.join("xe"))]);
    assert!(x.contains("tiny_b"), "{x}");
    let shown = ok(&["inspect", "--ckpt", s(&ckpt)]);
    assert!(shown.contains("frame length 256"));

    // A raw dataset is refused for training.
    let refused = run(&["train", "--config", s(&cfg), "--data", s(&d.join("raw_a")), "--out", s(&d.join("r2"))]);
    assert_eq!(refused.status.code(), Some(2));
}
