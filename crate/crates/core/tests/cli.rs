use std::path::Path;
use std::process::{Command, Output};

fn rslaq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rslaq")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

#[test]
fn actions_table() {
    let o = rslaq(&["actions", "--slices", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,tenths,scheduler"));
    assert_eq!(lines.count(), 198);

    let o = rslaq(&["actions", "--slices", "2"]);
    assert_eq!(stdout(&o).lines().count(), 34);
    assert_eq!(rslaq(&["actions", "--slices", "0"]).status.code(), Some(1));
}

#[test]
fn validate_policy() {
    let o = rslaq(&["validate-policy", &fixture("a1_policy_example.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("slice,weight,reliability"));
    assert_eq!(text.lines().count(), 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"network_slices": [{"slice_name": "x", "weight": 2}]}"#).unwrap();
    assert_eq!(rslaq(&["validate-policy", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(rslaq(&["train", "--scenario", "rush_hour"]).status.code(), Some(1));
    assert_eq!(rslaq(&["compare", "--bogus"]).status.code(), Some(1));
    assert_eq!(rslaq(&["eval", "--controller", "dqn"]).status.code(), Some(1));
    assert_eq!(rslaq(&["eval", "--controller", "rslaq"]).status.code(), Some(1));
    assert_eq!(rslaq(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rslaq(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_checkpoint_is_runtime_failure() {
    let o = rslaq(&["eval", "--controller", "opt", "--checkpoint", "/nonexistent/opt.ckpt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn static_eval_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = rslaq(&["eval", "--controller", "pf", "--frames", "20", "--scenario", "congestion", "--out", out, "--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("controller,scenario,slice,mean_thr_bps,mean_bfs,outage_frames,soft_frames,reliability"));
    assert_eq!(text.lines().count(), 4);
    for f in ["pf_summary.csv", "pf_trace.csv", "pf_alarms.ndjson", "pf_reliability.svg", "summary.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    let mut spec = rslaq::harness::Scenario::preset("low_traffic").unwrap().into_spec();
    spec.hyperparams.total_steps = 40;
    std::fs::write(&cfg, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = dir.path().join("run");

    let o = rslaq(&["train", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("low_traffic,rslaq,4,40,"));
    let log = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 41);

    let ckpt = out.join("rslaq.ckpt");
    let eval = |frames: &str| {
        rslaq(&[
            "eval",
            "--controller",
            "rslaq",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--frames",
            frames,
        ])
    };
    let a = eval("30");
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&eval("30")));
}
