use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slipflow"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

#[test]
fn zero_data_run_passes_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let o = run(&[
        "run",
        "--config",
        config("zero.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    for f in [
        "summary.json",
        "config.toml",
        "velocity.csv",
        "density_coeffs.csv",
        "density_grid.csv",
        "ledger.csv",
        "iterations.csv",
        "verification.json",
        "log.txt",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let velocity = fs::read_to_string(out.join("velocity.csv")).unwrap();
    for line in velocity.lines().skip(1) {
        for v in line.split(',').skip(1) {
            assert!(v.parse::<f64>().unwrap().abs() < 1e-14, "{line}");
        }
    }
    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("t,kinetic,pressure_potential,artificial_potential,dissipation"));
    let iterations = fs::read_to_string(out.join("iterations.csv")).unwrap();
    assert_eq!(
        iterations.lines().count(),
        2,
        "zero data converges in one iteration:\n{iterations}"
    );

    let o = run(&["verify", "--archive", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
}

#[test]
fn identical_configs_give_identical_archives() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&[
            "run",
            "--config",
            config("zero.toml").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    }
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

#[test]
fn corrupted_archive_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let o = run(&[
        "run",
        "--config",
        config("zero.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let path = out.join("density_coeffs.csv");
    let mut lines: Vec<String> = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    let mut fields: Vec<String> = lines[6].split(',').map(str::to_string).collect();
    fields[1] = (fields[1].parse::<f64>().unwrap() + 1e-3).to_string();
    lines[6] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = run(&["verify", "--archive", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(
        text(&o).contains("first failing check: mass_drift"),
        "{}",
        text(&o)
    );
}

#[test]
fn gamma_below_three_halves_is_rejected_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(config("zero.toml")).unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        src.replace("gamma = 1.6666666666666667", "gamma = 1.2"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("gamma > 3/2"), "{}", text(&o));
    assert!(!out.exists());
}

#[test]
fn sweep_rejects_schedule_in_the_wrong_direction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        config("zero.toml").to_str().unwrap(),
        "--param",
        "delta",
        "--schedule",
        "0.025,0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("not strictly decreasing"), "{}", text(&o));
}

#[test]
fn sweep_writes_report_and_level_archives() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        config("small.toml").to_str().unwrap(),
        "--param",
        "n",
        "--schedule",
        "2,3",
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", text(&o));
    let report = fs::read_to_string(out.join("sweep_report.json")).unwrap();
    assert_eq!(report.matches("\"energy_residual\"").count(), 2, "{report}");
    assert_eq!(report.matches("\"from\"").count(), 1, "{report}");
    assert!(out.join("level_00/summary.json").is_file());
    assert!(out.join("level_01/summary.json").is_file());
}

#[test]
fn verify_reports_missing_archive() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "verify",
        "--archive",
        dir.path().join("none").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("archive error"), "{}", text(&o));
}
