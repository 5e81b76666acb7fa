use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jcryd::cli::emit::{Cell, Table};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jcryd"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--config").arg(config).args(extra).output().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn model(n: usize, omega: f64, delta: f64) -> String {
    format!("[model]\nn_atoms = {n}\nomega_r_mhz = {omega:?}\ndelta_r_mhz = {delta:?}\n")
}

#[test]
fn ladder_resonant_splittings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &model(2, 1.0, 0.0));
    let out = run("ladder", &cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,branch,epsilon,splitting,kappa_plus,kappa_minus,kappa_branch");
    let rows = csv_rows(&text);
    let split = |n: &str| rows.iter().find(|r| r[0] == n).unwrap()[3].parse::<f64>().unwrap();
    assert!((split("1") - 1.0).abs() < 1e-12);
    assert!((split("2") - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn ladder_zero_rabi_and_detuned_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write(dir.path(), "z.toml", &model(3, 0.0, 0.0));
    let text = String::from_utf8(run("ladder", &zero, &[]).stdout).unwrap();
    for row in csv_rows(&text) {
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
    }
    // uncoupled but detuned: the bare levels stay |delta_r| apart
    let bare = write(dir.path(), "b.toml", &model(3, 0.0, 0.4));
    let text = String::from_utf8(run("ladder", &bare, &[]).stdout).unwrap();
    for row in csv_rows(&text) {
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.4);
    }
    let detuned = write(dir.path(), "d.toml", &model(2, 1.0, 1.0));
    let text = String::from_utf8(run("ladder", &detuned, &[]).stdout).unwrap();
    let kp: f64 = csv_rows(&text)[0][4].parse().unwrap();
    assert!((kp + 0.04819).abs() < 1e-5, "{kp}");
}

#[test]
fn peaks_resonant_row_and_zero_drift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        &format!(
            "{}[peaks]\ndelta_over_omega = {{ values = [-1.0, 0.0, 1.0] }}\n[drift]\nfraction = 0.0\nsamples = 10\n",
            model(2, 1.0, 0.0)
        ),
    );
    let out = run("peaks", &cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let mut at_zero: Vec<f64> = rows
        .iter()
        .filter(|r| r[0].parse::<f64>().unwrap() == 0.0)
        .map(|r| r[3].parse().unwrap())
        .collect();
    at_zero.sort_by(f64::total_cmp);
    let expected = [-0.5, -0.35355, 0.35355, 0.5];
    for (a, b) in at_zero.iter().zip(expected) {
        assert!((a - b).abs() < 1e-5);
    }
    for r in &rows {
        assert_eq!(r[4], r[5]);
        assert_eq!(r[4], r[3]);
    }
}

#[test]
fn peaks_without_drift_leave_bands_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        &format!("{}[peaks]\ndelta_over_omega = {{ values = [0.5] }}\n", model(2, 1.0, 0.0)),
    );
    let rows = csv_rows(&String::from_utf8(run("peaks", &cfg, &[]).stdout).unwrap());
    assert!(rows.iter().all(|r| r[4].is_empty() && r[5].is_empty()));
}

#[test]
fn zeeman_config_has_three_branches_per_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "z.toml",
        &format!(
            "{}[[model.extra_channels]]\nrabi_scale = 0.57735\ndetuning_offset_mhz = 2.13\n[peaks]\ndelta_over_omega = {{ values = [-2.0, 0.0] }}\n",
            model(2, 1.0, 0.0)
        ),
    );
    let rows = csv_rows(&String::from_utf8(run("peaks", &cfg, &[]).stdout).unwrap());
    for n in ["1", "2"] {
        let count = rows.iter().filter(|r| r[0].starts_with("-2.") && r[1] == n).count();
        assert_eq!(count, 3);
    }
}

#[test]
fn fit_noiseless_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "f.toml",
        &format!("{}[fit]\nomega_r_mhz = {{ start = 0.4, stop = 4.0, points = 10 }}\n", model(2, 1.0, 0.0)),
    );
    let out = run("fit", &cfg, &["--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let table: Table = serde_json::from_slice(&out.stdout).unwrap();
    let ratio = table.summary["ratio"].as_f64().unwrap();
    assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
    assert!(table.summary["ratio_std_err"].as_f64().unwrap() < 1e-12);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "g.toml", &format!("{}[verify]\nblockade = \"infinite\"\ndraws = 5\n", model(2, 1.0, 0.2)));
    let out = run("verify", &good, &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let dev: f64 = csv_rows(&text)[0][2].parse().unwrap();
    assert!(dev <= 1e-12);

    let broken = write(
        dir.path(),
        "b.toml",
        &format!("{}[verify]\nblockade = \"infinite\"\nfault = \"linear_coupling\"\n", model(2, 1.0, 0.2)),
    );
    let out_path = dir.path().join("verify.csv");
    let out = run("verify", &broken, &["--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    // the failing report is still written
    assert!(std::fs::read_to_string(&out_path).unwrap().contains("false"));

    let finite = write(dir.path(), "f.toml", &format!("{}[verify]\nblockade_mhz = 1000.0\n", model(2, 1.0, 0.0)));
    assert_eq!(run("verify", &finite, &[]).status.code(), Some(0));
}

#[test]
fn config_errors_exit_2_and_name_key() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "t.toml", &format!("{}omega_rr_mhz = 1.0\n", model(2, 1.0, 0.0)));
    let out = run("ladder", &typo, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("omega_rr_mhz"), "{err}");
    assert!(err.contains("line"), "{err}");

    let missing = write(dir.path(), "m.toml", &model(2, 1.0, 0.0));
    assert_eq!(run("scan", &missing, &[]).status.code(), Some(2));

    let bad_value = write(dir.path(), "v.toml", &model(0, 1.0, 0.0));
    assert_eq!(run("ladder", &bad_value, &[]).status.code(), Some(2));

    let nan = write(dir.path(), "n.toml", "[model]\nn_atoms = 2\nomega_r_mhz = nan\ndelta_r_mhz = 0.0\n");
    assert_eq!(run("ladder", &nan, &[]).status.code(), Some(2));

    assert_eq!(run("ladder", &dir.path().join("absent.toml"), &[]).status.code(), Some(2));
    let out = bin().arg("ladder").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["bogus", "--config", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_exit_3() {
    // a step so coarse that halving cannot reach the convergence contract
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.toml",
        &format!(
            "{}[ramp]\ninitial = {{ state = \"ground\", n = 1 }}\nstep_us = 1000.0\n[[ramp.segments]]\nduration_us = 5000.0\ndelta_r_mhz = [40.0, -40.0]\nomega_r_mhz = [1.0, 1.0]\n",
            model(1, 1.0, 0.0)
        ),
    );
    let out = run("ramp", &cfg, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn json_round_trips_and_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        &format!(
            "seed = 3\n{}[peaks]\ndelta_over_omega = {{ start = -2.0, stop = 2.0, points = 9 }}\n[drift]\nfraction = 0.05\nsamples = 50\n",
            model(2, 1.0, 0.0)
        ),
    );
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(run("peaks", &cfg, &["--format", "json", "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run("peaks", &cfg, &["--format", "json", "--out", b.to_str().unwrap()]).status.code(), Some(0));
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let table: Table = serde_json::from_slice(&bytes).unwrap();
    let again = serde_json::to_string_pretty(&table).unwrap() + "\n";
    assert_eq!(again.as_bytes(), &bytes[..]);
    assert!(table.rows.iter().all(|r| matches!(r[3], Cell::Float(_))));

    let other = dir.path().join("c.json");
    run("peaks", &cfg, &["--format", "json", "--seed", "4", "--out", other.to_str().unwrap()]);
    assert_ne!(bytes, std::fs::read(&other).unwrap());
}

#[test]
fn csv_values_reparse_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &model(3, 1.3, -0.7));
    let csv = String::from_utf8(run("ladder", &cfg, &[]).stdout).unwrap();
    let json = String::from_utf8(run("ladder", &cfg, &["--format", "json"]).stdout).unwrap();
    let table: Table = serde_json::from_str(&json).unwrap();
    for (row, jrow) in csv_rows(&csv).iter().zip(&table.rows) {
        let from_csv: f64 = row[2].parse().unwrap();
        assert_eq!(jrow[2], Cell::Float(from_csv));
    }
}

#[test]
fn scan_and_ramp_run() {
    let dir = tempfile::tempdir().unwrap();
    let scan = write(
        dir.path(),
        "s.toml",
        &format!(
            "{}[scan]\ndelta_uw_mhz = {{ start = -1.0, stop = 1.0, points = 201 }}\npulse_time_us = 14.142135623730951\nomega_uw_mhz = 0.05\n",
            model(1, 1.0, 0.0)
        ),
    );
    let out = run("scan", &scan, &["--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table: Table = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table.columns, vec!["delta_uw_mhz", "transfer"]);
    assert_eq!(table.summary["peaks"].as_array().unwrap().len(), 2);

    let ramp = write(
        dir.path(),
        "r.toml",
        &format!(
            "{}[ramp]\ninitial = {{ state = \"dressed\", n = 1, branch = \"plus\" }}\n[[ramp.segments]]\nduration_us = 31.830988618379067\ndelta_r_mhz = [1.0, 1.0]\nomega_r_mhz = [1.0, 0.0]\n",
            model(1, 1.0, 1.0)
        ),
    );
    let out = run("ramp", &ramp, &["--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table: Table = serde_json::from_slice(&out.stdout).unwrap();
    assert!(table.summary["final_fidelity"].as_f64().unwrap() >= 0.999);
    assert_eq!(table.summary["final_dominant"], "|g,1>");
}
