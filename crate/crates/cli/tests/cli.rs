use std::path::Path;
use std::process::{Command, Output};

fn shrinklp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinklp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 14] = [
    "simulate", "--c", "0.5", "--p", "20,30", "--sigma", "1", "--reps", "2", "--gamma-factors", "0.5", "--seed",
    "7", "--no-timing",
];

#[test]
fn simulate_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL.to_vec();
    args.extend(["--out", "res.csv"]);
    let out = shrinklp(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("res.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(dir.path().join("res_agg.csv").exists());

    let out = shrinklp(&["plot", "--in", "res_agg.csv", "--out", "plots"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(dir.path().join("plots")).unwrap().count(), 4);
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    for (workers, name) in [("1", "a.csv"), ("3", "b.csv")] {
        let mut args = SMALL.to_vec();
        args.extend(["--workers", workers, "--out", name]);
        assert!(shrinklp(&args, dir.path()).status.success());
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"c_values": [0.5], "p_values": [20], "sigma_list": [0.5], "reps": 5, "gamma_factors": [], "record_timing": false}"#,
    )
    .unwrap();
    let out = shrinklp(&["simulate", "--config", "cfg.json", "--reps", "1", "--out", "r.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(shrinklp(&["simulate", "--reps", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(shrinklp(&["simulate", "--p", "x:y"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), r#"{"unknown": 1}"#).unwrap();
    assert_eq!(shrinklp(&["simulate", "--config", "bad.json"], dir.path()).status.code(), Some(2));
    assert_eq!(shrinklp(&["simulate", "--noise", "cauchy"], dir.path()).status.code(), Some(2));
}

#[test]
fn plot_rejects_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.csv"), "").unwrap();
    let out = shrinklp(&["plot", "--in", "e.csv", "--out", "p"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn generate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = shrinklp(
        &["generate", "--m", "8", "--p", "10", "--n", "3", "--sigma", "0.5", "--seed", "3", "--out", "inst"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["a_true.csv", "b.csv", "cost.csv", "obs_1.csv", "obs_3.csv", "manifest.json"] {
        assert!(dir.path().join("inst").join(f).exists(), "{f}");
    }
    let out = shrinklp(
        &[
            "estimate",
            "--samples",
            "inst/obs_1.csv",
            "inst/obs_2.csv",
            "inst/obs_3.csv",
            "--clamp",
            "--out",
            "a_star.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let report: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    for key in ["alpha", "beta", "clamped", "noise_level_hat"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert!(dir.path().join("a_star.csv").exists());
}
