use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracwave::mittag_leffler::ml_real;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracwave"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ml_value(out: &Output) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.starts_with("value")).unwrap();
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

const BASE: &str = r#"
[domain]
dimension = 1
grid = [32]
modes = [8]

[solver]
alpha = 1.5
t_end = 1.0
steps = 20
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn ml_examples() {
    let out = run(&["ml", "1", "1", "-1", "0"]);
    assert_eq!(code(&out), 0);
    assert!((ml_value(&out) - 0.3678794412).abs() < 1e-10);

    let out = run(&["ml", "1.5", "1.5", "0", "0"]);
    assert!((ml_value(&out) - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-10);

    let out = run(&["ml", "2", "1", "-2.4674011", "0"]);
    assert!(ml_value(&out).abs() < 1e-7);

    let out = run(&["ml", "1.5", "1", "-6", "0.5"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("branch       contour"));
    assert!(!text.contains("disagreement n/a"));
}

#[test]
fn ml_rejects_bad_parameters() {
    assert_eq!(code(&run(&["ml", "2.5", "1", "1", "0"])), 2);
    assert_eq!(code(&run(&["ml", "1.5", "-1", "1", "0"])), 2);
    assert_eq!(code(&run(&["ml", "1.5"])), 2);
}

#[test]
fn solve_free_evolution_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve",
        configs().join("solve_free.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let exact = ml_real(1.5, 1.0, -2f64.powf(1.5)).unwrap().abs();
    assert!((summary["final_l2_norm"].as_f64().unwrap() - exact).abs() <= 1e-8);
    assert_eq!(summary["blown"], false);

    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,l2_norm,lq_norm,frac_norm_theta,picard_iters,picard_residual,blown"
    );
    assert_eq!(csv.lines().count(), 42);
    let snaps = std::fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    assert_eq!(snaps.lines().count(), 1 + 3 * 16);
    // nothing but the results in the directory
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{BASE}\n[nonlinearity]\nkind = \"power_abs\"\nexponent = 1.5\n");
    let cfg = write_config(dir.path(), &body);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(&cols[1..4], &["0", "0", "0"]);
        assert_eq!(cols[6], "0");
    }
}

#[test]
fn large_data_exits_with_blowup_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve",
        configs().join("blowup.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 10);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["blown"], true);
    assert!(summary["t_flag"].as_f64().unwrap() < 4.0);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write_config(dir.path(), &BASE.replace("steps = 20", "stpes = 20"));
    assert_eq!(code(&run(&["solve", typo.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["solve", "/nonexistent/run.toml"])), 2);
    assert_eq!(code(&run(&["solve"])), 2);

    let empty = write_config(dir.path(), &format!("{BASE}\n[experiment]\nalphas = []\n"));
    assert_eq!(
        code(&run(&["experiment", "rates", empty.to_str().unwrap()])),
        2
    );

    let missing = write_config(dir.path(), BASE);
    assert_eq!(
        code(&run(&["experiment", "rates", missing.to_str().unwrap()])),
        2
    );
    assert_eq!(
        code(&run(&["experiment", "sideways", missing.to_str().unwrap()])),
        2
    );
}

#[test]
fn inadmissible_growth_needs_override() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{BASE}\n[nonlinearity]\nkind = \"power_abs\"\nexponent = 5.0\n[initial]\nu0 = [0.01]\n"
    );
    let cfg = write_config(dir.path(), &body);
    let out_dir = dir.path().join("out");
    let args = [
        "solve",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    assert_eq!(code(&run(&args)), 2);
    let mut overridden = args.to_vec();
    overridden.push("--override-admissibility");
    let out = run(&overridden);
    assert_eq!(code(&out), 0);
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("admissib"));
}

#[test]
fn convergence_experiment_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "experiment",
        "convergence",
        "--config",
        configs().join("convergence.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn failing_experiment_exits_with_1() {
    // eight modes cannot show the short-time rates
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{BASE}\n[experiment]\nalphas = [1.5]\nbetas = [0.0]\nthetas = [0.0]\n");
    let cfg = write_config(dir.path(), &body);
    let out = run(&[
        "experiment",
        "rates",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(&[
            "experiment",
            "dependence",
            configs().join("dependence.toml").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    for name in ["dependence.csv", "dependence_summary.json"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
}
