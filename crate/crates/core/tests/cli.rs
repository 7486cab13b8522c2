use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_forgetting-lab");

const QUICK: &str = r#"
[sweep]
d = [2]
n = [20]
p_multipliers = [2, 4, 8, 16]
gamma = [1.0]
trials_per_point = 40
n_test = 1000
root_seed = 3

[output]
verbosity = "quiet"

[checks]
model_equivalence = false
singular_value_concentration = false

[verify]
lemma_configs = 10
gd_instances = 5
trials_per_point = 4
"#;

fn lab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("FORGETTING_LAB_THREADS").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_outputs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "quick.toml", QUICK);
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    let r1 = lab(&["run", "--config", &cfg, "--out", out1.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(r1.status.code(), Some(0), "{}", stderr(&r1));
    let r2 = Command::new(BIN)
        .args(["run", "--config", &cfg, "--out", out2.to_str().unwrap()])
        .env("FORGETTING_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(r2.status.code(), Some(0), "{}", stderr(&r2));

    for f in ["records.csv", "aggregate.csv", "summary.json", "sweep.svg"] {
        assert!(out1.join(f).is_file(), "missing {f}");
    }
    let a = std::fs::read(out1.join("records.csv")).unwrap();
    assert_eq!(a, std::fs::read(out2.join("records.csv")).unwrap());
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 1 + 4 * 40);

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out1.join("summary.json")).unwrap()).unwrap();
    let names: Vec<&str> = summary["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, forgetting_lab::checks::ALL);
    let status = |name: &str| {
        summary["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()["status"].clone()
    };
    assert_eq!(status("model_equivalence"), "skipped");
    assert_eq!(status("determinism"), "pass");
    assert_eq!(summary["all_passed"], true);

    let svg = std::fs::read_to_string(out1.join("sweep.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn seed_flag_changes_records() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &QUICK.replace("trials_per_point = 40", "trials_per_point = 2"));
    let mut outputs = Vec::new();
    for (dir, seed) in [("a", "5"), ("b", "6")] {
        let out = tmp.path().join(dir);
        let r = lab(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed, "--trials", "2"]);
        assert_ne!(r.status.code(), Some(3), "{}", stderr(&r));
        outputs.push(std::fs::read(out.join("records.csv")).unwrap());
    }
    assert_ne!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_exit_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let empty = write_config(tmp.path(), "empty.toml", &QUICK.replace("p_multipliers = [2, 4, 8, 16]", "p = []"));
    let r = lab(&["run", "--config", &empty, "--out", out]);
    assert_eq!(r.status.code(), Some(3));
    assert!(stderr(&r).contains("grid is empty"));

    let unknown = write_config(tmp.path(), "unknown.toml", &format!("{QUICK}\n[extras]\nx = 1\n"));
    assert_eq!(lab(&["run", "--config", &unknown, "--out", out]).status.code(), Some(3));

    let small_p = write_config(tmp.path(), "small.toml", &QUICK.replace("p_multipliers = [2, 4, 8, 16]", "p = [10]"));
    let r = lab(&["run", "--config", &small_p, "--out", out]);
    assert_eq!(r.status.code(), Some(3));
    assert!(stderr(&r).contains("p ≥ n"), "{}", stderr(&r));

    let missing = tmp.path().join("nope.toml");
    assert_eq!(lab(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_with_code_5() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", QUICK);
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let r = lab(&["run", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(5), "{}", stderr(&r));
}

#[test]
fn premise_failures_are_warnings_with_premise_text() {
    let tmp = tempfile::tempdir().unwrap();
    let text = QUICK
        .replace("p_multipliers = [2, 4, 8, 16]", "p_multipliers = [2]")
        .replace("[checks]", "[checks]\ntrend_amelioration = false\ndeterminism = false");
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let out = tmp.path().join("o");
    let r = lab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    assert!(stderr(&r).contains(forgetting_lab::bounds::MAIN_PREMISE_TEXT));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["premise_warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn verify_passes_and_negative_control_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", QUICK);
    let ok = lab(&["verify", "--config", &cfg]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let text = String::from_utf8_lossy(&ok.stdout);
    for name in ["lemma_identities", "gd_oracle_agreement", "dual_path", "mc_analytic_consistency"] {
        assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains(name)), "{text}");
    }
    let bad = lab(&["verify", "--config", &cfg, "--corrupt-tolerance"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}

#[test]
fn verify_with_zero_theta() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "z.toml", &QUICK.replace("root_seed = 3", "root_seed = 3\ntheta_norm_sq = 0.0"));
    let r = lab(&["verify", "--config", &cfg]);
    assert_eq!(r.status.code(), Some(0), "{}{}", String::from_utf8_lossy(&r.stdout), stderr(&r));
}

#[test]
fn single_prints_a_deterministic_table() {
    let args = ["single", "--d", "5", "--n", "100", "--p", "2000", "--gamma", "1", "--seed", "7"];
    let a = lab(&args);
    let b = lab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let value = |key: &str| -> String {
        text.lines().find(|l| l.split_whitespace().next() == Some(key)).unwrap().split_whitespace().last().unwrap().to_string()
    };
    assert!((value("r_null").parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    for key in ["r_a", "r_ba", "forgetting", "ratio"] {
        value(key).parse::<f64>().unwrap();
    }
    assert!(text.contains("bound ratio") && text.contains("premise"));
}

#[test]
fn single_rejects_p_below_n() {
    let r = lab(&["single", "--d", "5", "--n", "100", "--p", "50", "--gamma", "1", "--seed", "7"]);
    assert_eq!(r.status.code(), Some(3));
    assert!(stderr(&r).contains("p ≥ n"));
}

#[test]
fn bad_flags_are_config_errors() {
    assert_eq!(lab(&["single", "--d", "five"]).status.code(), Some(3));
    assert_eq!(lab(&["--help"]).status.code(), Some(0));
}
