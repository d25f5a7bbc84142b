use std::path::Path;
use std::process::{Command, Output};

use hydrofriction::dispersion::{AtomParams, Kinematics, MaterialParams};
use hydrofriction::friction2::force2_raw;
use hydrofriction::numerics::QuadratureSpec;
use hydrofriction_cli::checks::{force2_main_ln, force2_oracle};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hydrofriction"));
    c.env_remove("HYDROFRICTION_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON record")
}

const POINT: [&str; 10] = ["--omega-p", "1e16", "--beta", "1e6", "--omega-b", "1e16", "--z", "10e-9", "--v", "5e6"];

#[test]
fn force2_record_matches_the_library() {
    let mut args = vec!["force2"];
    args.extend(POINT);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["u"], 5.0);
    let m = MaterialParams::new(1e16, 1e6).unwrap();
    let a = AtomParams::new(1e16, 6.67e-31).unwrap();
    let kin = Kinematics::new(5e6, 10e-9).unwrap();
    let lib = force2_raw(&m, &a, &kin, &QuadratureSpec::default()).unwrap();
    assert!(lib.normalized_value > 0.0);
    assert_eq!(r["f2_normalized"].as_f64().unwrap(), lib.normalized_value);
    assert_eq!(r["f2_raw_N"].as_f64().unwrap(), lib.raw_value.unwrap());
}

#[test]
fn subsonic_force_is_zero_with_a_note() {
    let o = run(&["force2", "--omega-b", "1e16", "--z", "10e-9", "--v", "5e5"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["f2_normalized"], 0.0);
    assert_eq!(r["threshold_w0"], Value::Null);
    assert!(r["note"].as_str().unwrap().contains("threshold"));
}

#[test]
fn missing_or_malformed_inputs_exit_with_config_error() {
    let o = run(&["force2", "--omega-b", "1e16", "--v", "5e6"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("z:"));
    assert_eq!(code(&run(&["force2", "--omega-b", "1e16", "--z", "1e-8", "--v", "fast"])), 1);
    assert_eq!(code(&run(&["gamma", "--omega-b", "-1", "--z", "1e-8", "--v", "5e6"])), 1);
    assert_eq!(code(&run(&["force2", "--v", "5e6", "--u", "5"])), 1);
}

#[test]
fn config_file_is_fail_closed_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "omega_p = 1e16 rad/s\nomega_b = 1e16 rad/s\nz = 10 nm\nv = 2e6 m/s # u = 2\n").unwrap();
    let cfg = path.to_str().unwrap();
    let o = run(&["force2", "--config", cfg]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["u"], 2.0);
    let o = run(&["force2", "--config", cfg, "--u", "5"]);
    assert_eq!(json(&o)["u"], 5.0);

    std::fs::write(&path, "omega_p = 1e16 rad/s\ncolour = blue\n").unwrap();
    let o = run(&["force2", "--config", cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `colour`"));
    std::fs::write(&path, "omega_p = 1e16\n").unwrap();
    assert_eq!(code(&run(&["force2", "--config", cfg])), 1);
}

#[test]
fn other_single_point_commands_emit_records() {
    for cmd in ["gamma", "shift", "nondispersive", "resonance"] {
        let mut args = vec![cmd];
        args.extend(POINT);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json(&o)["command"], cmd);
    }
    let o = run(&["gamma", "--omega-b", "1e16", "--z", "10e-9", "--v", "5e6", "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains("gamma_g_per_s") && header.contains("z_m"));
    assert_eq!(text.lines().count(), 2);
}

fn sweep(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "sweep", "--u", "0.5,2,5", "--omega-tilde", "1,2,5", "--z-tilde", "10,20,50", "--format", "csv", "--out",
    ];
    args.push(out.to_str().unwrap());
    args.extend(extra);
    run(&args)
}

#[test]
fn sweep_has_one_row_per_point_and_zero_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    assert_eq!(code(&sweep(&out, &[])), 0);
    let mut r = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<hydrofriction_cli::sweep::SweepRow> = r.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 27);
    for row in &rows {
        assert!(row.converged);
        if row.u <= 1.0 {
            assert_eq!((row.f2_normalized, row.gamma_g, row.threshold_w0), (0.0, 0.0, None));
        } else {
            assert!(row.f2_normalized > 0.0 && row.threshold_w0.is_some());
        }
        assert_eq!(row.f4_two_photon, None);
    }
}

#[test]
fn sweep_output_does_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(code(&sweep(&a, &[])), 0);
    let mut args = vec![
        "sweep", "--u", "0.5,2,5", "--omega-tilde", "1,2,5", "--z-tilde", "10,20,50", "--format", "csv", "--out",
    ];
    args.push(b.to_str().unwrap());
    let o = bin().args(&args).env("HYDROFRICTION_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = bin().args(&args).env("HYDROFRICTION_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn sweep_refuses_foreign_files_and_unwritable_paths() {
    let dir = tempfile::tempdir().unwrap();
    let foreign = dir.path().join("notes.csv");
    std::fs::write(&foreign, "a,b\n1,2\n").unwrap();
    assert_eq!(code(&sweep(&foreign, &[])), 1);
    assert_eq!(std::fs::read_to_string(&foreign).unwrap(), "a,b\n1,2\n");
    assert_eq!(code(&sweep(&dir.path().join("missing/dir/s.csv"), &[])), 1);
}

#[test]
fn json_sweep_rows_carry_the_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    let o = run(&["sweep", "--u", "0.5,3", "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["schema_version"] == 1));
    assert_eq!(rows[0]["f4_two_photon_N"], Value::Null);
    // a second run finds every row present
    let o = run(&["sweep", "--u", "0.5,3", "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
}

#[test]
fn fig2_writes_four_curves_of_two_hundred_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig");
    let o = run(&["fig2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 4);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "u,f2_normalized,threshold_w0");
        assert_eq!(lines.len(), 201);
        assert!(lines[1].starts_with("1,0e0,"), "{}", lines[1]);
        assert!(lines[200].starts_with("20,"));
    }
}

#[test]
fn validate_without_force4_passes_quickly() {
    let start = std::time::Instant::now();
    let o = run(&["validate", "--skip-force4"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 7);
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn doubled_force_fails_the_oracle_comparison() {
    let doubled = |m: &MaterialParams, a: &AtomParams, k: &Kinematics| force2_main_ln(m, a, k).map(|l| l + 2f64.ln());
    let outcome = force2_oracle(7, 3, &doubled);
    assert!(!outcome.passed, "{}", outcome.line());
    assert!(force2_oracle(7, 3, &force2_main_ln).passed);
}
