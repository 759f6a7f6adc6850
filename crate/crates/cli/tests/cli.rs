//! End-to-end tests for the qat-lab binary: exit codes, CSV contracts,
//! config diagnostics, and the shipped scenario corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qat_lab(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qat-lab"))
        .args(args)
        .output()
        .expect("binary should spawn");
    Run {
        code: out.status.code().expect("no exit code (signal?)"),
        stdout: String::from_utf8(out.stdout).expect("stdout is UTF-8"),
        stderr: String::from_utf8(out.stderr).expect("stderr is UTF-8"),
    }
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).expect("config written");
    path
}

/// Numeric rows of a CSV payload, header skipped. Quoted header fields keep
/// the data rows plain numbers, so a comma split is enough here.
fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|f| f.parse::<f64>().expect("numeric field"))
                .collect()
        })
        .collect()
}

fn column(rows: &[Vec<f64>], idx: usize) -> Vec<f64> {
    rows.iter().map(|r| r[idx]).collect()
}

const DAMPED_PARTICLE_CFG: &str = "\
[system]
preset = damped_particle
gamma = 1.0

[grid]
x_min = -16
x_max = 16
n = 256

[time]
t_max = 2.0
samples = 7

[initial_state]
kind = gaussian
x0 = 0.3
p0 = 1.0
sigma = 0.9

[outputs]
expectations = true
";

#[test]
fn run_emits_constant_invariant_expectations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "damped_particle.cfg", DAMPED_PARTICLE_CFG);
    let out = dir.path().join("out");

    let r = qat_lab(&["run", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("checks pass"), "stdout: {}", r.stdout);

    let report = fs::read_to_string(out.join("damped_particle/report.csv")).unwrap();
    assert!(report.starts_with("t,norm,X_expect,P_expect\n"), "{report}");
    let rows = data_rows(&report);
    assert_eq!(rows.len(), 7);
    for col in [2, 3] {
        let vals = column(&rows, col);
        let drift = vals
            .iter()
            .map(|v| (v - vals[0]).abs())
            .fold(0.0f64, f64::max);
        assert!(
            drift < 1e-5,
            "invariant expectation column {col} drifts by {drift:.3e}"
        );
    }
}

#[test]
fn run_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "damped_particle.cfg", DAMPED_PARTICLE_CFG);
    let mut reports = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let r = qat_lab(&["run", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
        assert_eq!(r.code, 0, "stderr: {}", r.stderr);
        reports.push(fs::read(out.join("damped_particle/report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1], "report.csv differs between runs");
}

#[test]
fn run_rejects_non_power_of_two_grid_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "bad_n.cfg",
        "\
[system]
preset = free

[grid]
x_min = -8
x_max = 8
n = 100

[time]
t_max = 1.0
samples = 3

[initial_state]
kind = gaussian
x0 = 0.0
p0 = 0.0
sigma = 1.0
",
    );
    let r = qat_lab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(
        r.stderr.contains("n must be a power of two"),
        "stderr: {}",
        r.stderr
    );
    // The diagnostic points at the offending value: line 7, column 5.
    assert!(r.stderr.contains("bad_n.cfg:7:5:"), "stderr: {}", r.stderr);
}

#[test]
fn run_clips_to_the_validity_window_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "overshoot.cfg",
        "\
[system]
preset = damped_harmonic
gamma = 0.2
omega = 1.0

[grid]
x_min = -16
x_max = 16
n = 512

[time]
t_max = 2.0
samples = 9

[initial_state]
kind = gaussian
x0 = 0.2
p0 = 0.0
sigma = 0.8
",
    );
    let out = dir.path().join("out");
    let r = qat_lab(&["run", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(
        r.stderr.contains("validity window clipped"),
        "stderr: {}",
        r.stderr
    );
    let report = fs::read_to_string(out.join("overshoot/report.csv")).unwrap();
    let rows = data_rows(&report);
    let t_last = rows.last().unwrap()[0];
    // u2 first vanishes near t = 1.679; the run must stop short of it, not
    // at the requested horizon.
    assert!(
        t_last < 1.679 && t_last > 1.4,
        "clipped horizon ended at t = {t_last}"
    );
}

#[test]
fn verify_algebra_closes_on_both_damped_presets() {
    for (preset, gamma) in [("damped_particle", "1.0"), ("damped_harmonic", "0.2")] {
        let r = qat_lab(&[
            "verify-algebra",
            "--preset",
            preset,
            "--gamma",
            gamma,
            "--omega",
            "1.0",
            "--t",
            "0.5",
            "--n",
            "256",
        ]);
        assert_eq!(r.code, 0, "stderr: {}", r.stderr);
        assert!(
            r.stdout
                .contains(&format!("10/10 commutators close (rel < 1e-6) on preset {preset}")),
            "stdout: {}",
            r.stdout
        );
        assert!(
            r.stdout.starts_with("t,commutator,abs_error,rel_error\n"),
            "stdout: {}",
            r.stdout
        );
    }
}

#[test]
fn verify_algebra_writes_csv_under_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let r = qat_lab(&[
        "verify-algebra",
        "--preset",
        "harmonic",
        "--omega",
        "1.0",
        "--t",
        "0.3",
        "--n",
        "128",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("wrote "), "stdout: {}", r.stdout);
    let csv = fs::read_to_string(dir.path().join("algebra.csv")).unwrap();
    assert!(csv.starts_with("t,commutator,abs_error,rel_error\n"));
    // Ten commutator rows, labels quoted because they contain commas.
    assert_eq!(csv.lines().count(), 11, "{csv}");
    assert!(csv.contains("\"[X,P] = ihb\""), "{csv}");
}

#[test]
fn compare_propagators_damped_harmonic_rows_meet_tolerances() {
    let r = qat_lab(&[
        "compare-propagators",
        "--preset",
        "damped_harmonic",
        "--gamma",
        "0.2",
        "--omega",
        "1.0",
        "--t-list",
        "0,0.3",
        "--n",
        "256",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(
        r.stdout
            .starts_with("t,\"d(QAT,CN)\",\"d(QAT,M6)\",\"d(CN,M6)\"\n"),
        "stdout: {}",
        r.stdout
    );
    let rows = data_rows(r.stdout.lines().take(3).collect::<Vec<_>>().join("\n").as_str());
    assert_eq!(rows.len(), 2);
    for d in &rows[0][1..] {
        assert!(*d < 1e-12, "t = 0 distance {d:.3e} should vanish");
    }
    for d in &rows[1][1..] {
        assert!(*d < 1e-4, "t = 0.3 distance {d:.3e} exceeds 1e-4");
    }
}

#[test]
fn compare_propagators_damped_particle_tracks_crank_nicolson() {
    // Default grid, step, and state: the commuting-Hamiltonian case is
    // solved exactly by the first Magnus term, so Crank-Nicolson is the only
    // approximation in the row.
    let r = qat_lab(&[
        "compare-propagators",
        "--preset",
        "damped_particle",
        "--gamma",
        "0.2",
        "--t-list",
        "0.5,1.0,2.0",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    for row in data_rows(&r.stdout) {
        assert!(
            row[1] < 1e-6,
            "d(QAT,CN) = {:.3e} at t = {} exceeds 1e-6",
            row[1],
            row[0]
        );
        assert!(
            row[2] < 1e-10,
            "d(QAT,M6) = {:.3e} at t = {}: the first Magnus term should be exact here",
            row[2],
            row[0]
        );
    }
}

#[test]
fn spectrum_reports_clean_ladder() {
    let r = qat_lab(&[
        "spectrum",
        "--preset",
        "damped_harmonic",
        "--gamma",
        "0.2",
        "--omega",
        "1.0",
        "--n",
        "256",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(
        r.stdout
            .starts_with("n,energy,rayleigh,abs_error,eigen_residual\n"),
        "stdout: {}",
        r.stdout
    );
    assert!(r.stdout.contains("ladder checks pass"), "stdout: {}", r.stdout);
    let csv: String = r
        .stdout
        .lines()
        .take_while(|l| !l.starts_with("n = "))
        .map(|l| format!("{l}\n"))
        .collect();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert!(row[3] < 1e-5, "Rayleigh offset {:.3e} at n = {}", row[3], row[0]);
        assert!(row[4] < 1e-4, "eigen-residual {:.3e} at n = {}", row[4], row[0]);
    }
}

#[test]
fn spectrum_requires_generator_parameters_off_the_oscillator_presets() {
    let r = qat_lab(&["spectrum", "--preset", "free", "--n", "128"]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(
        r.stderr.contains("--omega-tilde and --gamma-tilde"),
        "stderr: {}",
        r.stderr
    );
}

#[test]
fn dump_basis_free_particle_matches_the_closed_form() {
    let r = qat_lab(&["dump-basis", "--preset", "free", "--t-max", "1.0", "--samples", "11"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(
        r.stdout.starts_with("t,u1,du1,u2,du2,up,dup,w\n"),
        "stdout: {}",
        r.stdout
    );
    for row in data_rows(&r.stdout) {
        let (t, u1, u2, w) = (row[0], row[1], row[3], row[7]);
        assert!((u1 - t).abs() < 1e-9, "u1({t}) = {u1}");
        assert!((u2 - 1.0).abs() < 1e-9, "u2({t}) = {u2}");
        assert!((w - 1.0).abs() < 1e-9, "w({t}) = {w}");
    }
}

#[test]
fn shipped_scenarios_all_pass() {
    let scenarios = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut cfgs: Vec<PathBuf> = fs::read_dir(&scenarios)
        .expect("scenarios directory ships with the workspace")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    cfgs.sort();
    assert!(cfgs.len() >= 10, "expected the full scenario corpus, found {}", cfgs.len());

    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["run".into()];
    args.extend(cfgs.iter().map(|p| p.to_str().unwrap().to_string()));
    args.push("--out-dir".into());
    args.push(dir.path().to_str().unwrap().to_string());
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();

    let r = qat_lab(&arg_refs);
    assert_eq!(r.code, 0, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
    assert!(!r.stdout.contains("CHECKS FAILED"), "stdout: {}", r.stdout);
    assert_eq!(
        r.stdout.matches("checks pass").count(),
        cfgs.len(),
        "stdout: {}",
        r.stdout
    );
    // The full-window scenario overshoots the focal point on purpose.
    assert!(
        r.stderr.contains("validity window clipped"),
        "stderr: {}",
        r.stderr
    );
}

#[test]
fn malformed_configs_report_positions_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, &[&str]); 4] = [
        (
            "unknown_key.cfg",
            "\
[system]
preset = free

[grid]
x_min = -8
x_max = 8
n = 64
frequency = 2
",
            &["unknown key `frequency`", "unknown_key.cfg:8:1:"],
        ),
        (
            "missing_eq.cfg",
            "\
[system]
preset = free

[grid]
n 64
",
            &["expected `key = value`", "missing_eq.cfg:5:"],
        ),
        (
            "unknown_section.cfg",
            "\
[system]
preset = free

[bogus]
x = 1
",
            &["unknown section `[bogus]`", "unknown_section.cfg:4:2:"],
        ),
        (
            "missing_time.cfg",
            "\
[system]
preset = free

[grid]
x_min = -8
x_max = 8
n = 64

[initial_state]
kind = plane_wave
k = 1.0
",
            &["missing required section [time]"],
        ),
    ];
    for (name, text, fragments) in cases {
        let cfg = write_cfg(dir.path(), name, text);
        let r = qat_lab(&["run", cfg.to_str().unwrap()]);
        assert_eq!(r.code, 2, "{name} stderr: {}", r.stderr);
        for f in fragments {
            assert!(r.stderr.contains(f), "{name}: `{f}` not in: {}", r.stderr);
        }
    }
}

#[test]
fn duplicate_scenario_names_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "dup.cfg", DAMPED_PARTICLE_CFG);
    let r = qat_lab(&["run", cfg.to_str().unwrap(), cfg.to_str().unwrap()]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("duplicate scenario name"), "stderr: {}", r.stderr);
}

#[test]
fn verb_grid_flags_are_validated() {
    let r = qat_lab(&["verify-algebra", "--preset", "free", "--n", "100"]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(
        r.stderr.contains("--n must be a power of two"),
        "stderr: {}",
        r.stderr
    );
}

#[test]
fn quiet_suppresses_stdout_but_not_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "quiet.cfg", DAMPED_PARTICLE_CFG);
    let out = dir.path().join("out");
    let r = qat_lab(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.is_empty(), "stdout not empty: {}", r.stdout);
    assert!(out.join("quiet/report.csv").exists());

    let r = qat_lab(&["dump-basis", "--preset", "free", "--quiet"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.is_empty(), "stdout not empty: {}", r.stdout);
}
