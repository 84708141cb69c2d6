//! End-to-end tests against the compiled binary: exit codes, output file
//! layout, manifest contents, and byte-level determinism of reruns.

use std::path::Path;
use std::process::{Command, Output};

fn spod() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spod"))
}

/// Small enough to finish in well under a second per seed.
const TINY: [&str; 5] = [
    "total_steps=256",
    "steps_per_batch=64",
    "minibatch_size=32",
    "epochs_per_batch=2",
    "hidden=8,8",
];

fn tiny_train(out: &Path, extra: &[&str]) -> Output {
    let mut cmd = spod();
    cmd.arg("train").arg("--out").arg(out);
    for kv in TINY {
        cmd.args(["--set", kv]);
    }
    for arg in extra {
        cmd.arg(arg);
    }
    cmd.output().expect("spawn spod")
}

fn stdout_of(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr_of(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_code(o: &Output, code: i32) {
    assert_eq!(
        o.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout_of(o),
        stderr_of(o)
    );
}

#[test]
fn rerun_with_identical_config_and_seeds_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    // Different worker caps on purpose: scheduling must not leak into bytes.
    let mut first = spod();
    first.env("DTAE_RL_THREADS", "1");
    first.arg("train").arg("--out").arg(&a).args(["--seeds", "0..3"]);
    for kv in TINY {
        first.args(["--set", kv]);
    }
    let out1 = first.output().unwrap();
    assert_code(&out1, 0);

    let mut second = spod();
    second.env("DTAE_RL_THREADS", "3");
    second.arg("train").arg("--out").arg(&b).args(["--seeds", "0..3"]);
    for kv in TINY {
        second.args(["--set", kv]);
    }
    let out2 = second.output().unwrap();
    assert_code(&out2, 0);

    for name in ["seed_0.csv", "seed_1.csv", "seed_2.csv", "aggregate.csv", "manifest.json"] {
        let x = std::fs::read(a.join("train").join(name)).unwrap();
        let y = std::fs::read(b.join("train").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between reruns");
    }
    assert_eq!(out1.stdout, out2.stdout);
}

#[test]
fn unknown_config_key_is_named_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_train(dir.path(), &["--set", "learning_rate=0.01"]);
    assert_code(&out, 1);
    assert!(stderr_of(&out).contains("learning_rate"));
}

#[test]
fn bad_flag_exits_1_and_help_exits_0() {
    let out = spod().arg("train").arg("--bogus-flag").output().unwrap();
    assert_code(&out, 1);
    let help = spod().arg("--help").output().unwrap();
    assert_code(&help, 0);
    assert!(stdout_of(&help).contains("train"));
}

#[test]
fn train_prints_final_mean_return_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_train(dir.path(), &["--seeds", "0..=1"]);
    assert_code(&out, 0);
    assert!(stdout_of(&out).contains("final mean return over 2 seeds"));
    let manifest = std::fs::read_to_string(dir.path().join("train/manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(json["seeds"], serde_json::json!([0, 1]));
    assert_eq!(json["seed_csvs"], serde_json::json!(["seed_0.csv", "seed_1.csv"]));
    assert!(json["final_mean_return"].is_f64() || json["final_mean_return"].is_i64());
    let config = json["config"].as_str().unwrap();
    assert!(config.contains("total_steps=256"));
    assert!(config.contains("env=point_mass"));
}

#[test]
fn zero_total_steps_still_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_train(dir.path(), &["--set", "total_steps=0"]);
    assert_code(&out, 0);
    assert!(stdout_of(&out).contains("no completed iterations"));
    let manifest = std::fs::read_to_string(dir.path().join("train/manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert!(json["final_mean_return"].is_null());
    let agg = std::fs::read_to_string(dir.path().join("train/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2, "header only");
}

#[test]
fn aggregate_rows_keep_min_mean_max_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_train(dir.path(), &["--seeds", "0..4"]);
    assert_code(&out, 0);
    let agg = std::fs::read_to_string(dir.path().join("train/aggregate.csv")).unwrap();
    let rows: Vec<&str> = agg.lines().skip(2).collect();
    assert_eq!(rows.len(), 4, "256 steps / 64 per batch");
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        let (mean, min, max) = (cols[1], cols[2], cols[3]);
        assert!(min <= mean && mean <= max, "{row}");
    }
}

#[test]
fn aggregate_mean_matches_per_seed_arithmetic_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_train(dir.path(), &["--seeds", "0..3"]);
    assert_code(&out, 0);
    let read_col = |name: &str| -> Vec<f64> {
        let text = std::fs::read_to_string(dir.path().join("train").join(name)).unwrap();
        text.lines()
            .skip(2)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let s0 = read_col("seed_0.csv");
    let s1 = read_col("seed_1.csv");
    let s2 = read_col("seed_2.csv");
    let agg = read_col("aggregate.csv");
    for i in 0..agg.len() {
        let expect = (s0[i] + s1[i] + s2[i]) / 3.0;
        assert!((agg[i] - expect).abs() <= 1e-12, "row {i}: {} vs {expect}", agg[i]);
    }
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "# tiny run\nenv=pendulum\ntotal_steps=128\nsteps_per_batch=64\nminibatch_size=32\nepochs_per_batch=2\nhidden=8,8\n",
    )
    .unwrap();
    let out = spod()
        .arg("train")
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path())
        .args(["--set", "gamma=0.9", "--seed", "5"])
        .output()
        .unwrap();
    assert_code(&out, 0);
    let manifest = std::fs::read_to_string(dir.path().join("train/manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let config = json["config"].as_str().unwrap();
    assert!(config.contains("env=pendulum"));
    assert!(config.contains("gamma=0.9"));
    assert!(config.contains("seed=5"));
    assert!(dir.path().join("train/seed_5.csv").is_file());
}

#[test]
fn sweep_writes_one_manifest_per_value_with_shared_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = spod();
    cmd.args(["sweep", "alpha", "0.1", "0.4", "0.9"])
        .arg("--out")
        .arg(dir.path())
        .args(["--seeds", "0..2"]);
    for kv in TINY {
        cmd.args(["--set", kv]);
    }
    let out = cmd.output().unwrap();
    assert_code(&out, 0);
    for value in ["0.1", "0.4", "0.9"] {
        let m = dir.path().join(format!("sweep_alpha/alpha={value}/manifest.json"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
        assert_eq!(json["seeds"], serde_json::json!([0, 1]), "{value}");
        assert!(json["config"].as_str().unwrap().contains(&format!("alpha={value}")));
    }
}

#[test]
fn sweep_unknown_axis_exits_1_listing_sweepable_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = spod()
        .args(["sweep", "momentum", "0.9"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&out, 1);
    let err = stderr_of(&out);
    assert!(err.contains("momentum") && err.contains("alpha") && err.contains("eta_0"), "{err}");
}

#[test]
fn sweep_with_no_values_warns_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = spod()
        .args(["sweep", "alpha"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&out, 0);
    assert!(stderr_of(&out).contains("no values"));
    assert!(!dir.path().join("sweep_alpha").exists());
}

#[test]
fn ablate_runs_four_arms_full_config_first() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = spod();
    cmd.arg("ablate").arg("--out").arg(dir.path()).args(["--seed", "0"]);
    for kv in TINY {
        cmd.args(["--set", kv]);
    }
    let out = cmd.output().unwrap();
    assert_code(&out, 0);
    let text = stdout_of(&out);
    let order: Vec<usize> = ["spod:", "gae_only:", "eta_zero:", "no_clip:"]
        .iter()
        .map(|l| text.find(l).unwrap_or_else(|| panic!("{l} missing from:\n{text}")))
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]), "spod must be reported first");

    let arm_config = |label: &str| -> String {
        let m = dir.path().join(format!("ablate/{label}/manifest.json"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
        json["config"].as_str().unwrap().to_string()
    };
    assert!(arm_config("spod").contains("use_dtae=true"));
    assert!(arm_config("spod").contains("use_clip=true"));
    assert!(arm_config("gae_only").contains("use_dtae=false"));
    assert!(arm_config("eta_zero").contains("eta_0=0\n"));
    assert!(arm_config("no_clip").contains("use_clip=false"));
}

#[test]
fn eval_rolls_out_a_training_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_train(dir.path(), &["--seed", "0"]);
    assert_code(&out, 0);
    let ckpt = dir.path().join("train/seed_0.ckpt");
    let eval = spod()
        .arg("eval")
        .arg(&ckpt)
        .args(["--episodes", "3", "--seed", "7"])
        .output()
        .unwrap();
    assert_code(&eval, 0);
    let text = stdout_of(&eval);
    assert!(text.contains("episodes=3") && text.contains("mean_return="), "{text}");

    // Greedy rollouts of the same checkpoint are deterministic.
    let again = spod()
        .arg("eval")
        .arg(&ckpt)
        .args(["--episodes", "3", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(eval.stdout, again.stdout);
}

#[test]
fn eval_of_a_missing_file_exits_1() {
    let out = spod().arg("eval").arg("/nonexistent/net.ckpt").output().unwrap();
    assert_code(&out, 1);
}

#[test]
fn check_reports_every_suite_and_exits_0() {
    let out = spod().arg("check").output().unwrap();
    assert_code(&out, 0);
    let text = stdout_of(&out);
    for name in [
        "performance_identity",
        "entropy_kl_bound",
        "entropy_bound_boundary",
        "tv_squared_le_kl",
        "tv_kl_spot_standard_normals",
    ] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
    assert!(text.contains("all") && text.contains("checks passed"), "{text}");
    assert!(!text.contains("FAIL"), "{text}");
}
