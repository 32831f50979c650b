use std::fs;
use std::path::Path;
use std::process::Command;

use togglemem::MachineError;
use togglemem_cli::examples::BUNDLED;
use togglemem_cli::units::parse_quantity;
use togglemem_cli::{compare_to_baseline, parse_scenario, run_scenario, RunError};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_togglemem"))
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn list_examples_names_every_bundled_scenario() {
    let out = bin().arg("list-examples").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig5", "fig8", "fig10", "fig11", "fig12", "fig13", "machine-demo"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn bundled_scenarios_rerun_byte_identical_and_conserve_energy() {
    for (name, text) in BUNDLED {
        let s = parse_scenario(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_scenario(&s, a.path()).unwrap();
        run_scenario(&s, b.path()).unwrap();
        assert_eq!(read_all(a.path()), read_all(b.path()), "{name} is not deterministic");
        if let Some(err) = ra.balance_error {
            assert!(err <= 5e-3, "{name}: balance error {err}");
        }
        assert!(ra.files.iter().any(|f| f.ends_with("summary.txt")));
    }
}

#[test]
fn every_csv_number_roundtrips_through_the_unit_parser() {
    for (name, text) in BUNDLED {
        let dir = tempfile::tempdir().unwrap();
        let report = run_scenario(&parse_scenario(text).unwrap(), dir.path()).unwrap();
        for path in report.files.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")) {
            let body = fs::read_to_string(path).unwrap();
            let mut lines = body.lines();
            let header: Vec<&str> = lines.next().unwrap().split(',').collect();
            for line in lines {
                for (col, field) in header.iter().zip(line.split(',')) {
                    if *col == "class" || *col == "quantity" {
                        continue;
                    }
                    let v = parse_quantity(field).unwrap_or_else(|e| panic!("{name} {}: {e}", path.display()));
                    let back = if field.contains('e') { format!("{v:e}") } else { format!("{v}") };
                    assert_eq!(back, field, "{name} {}", path.display());
                }
            }
        }
    }
}

#[test]
fn machine_demo_reports_restored() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "machine-demo", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("RESTORED: yes"), "{stdout}");
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("RESTORED: yes"));
    assert!(summary.contains("seed: 0"));
    for f in ["machine_initial.txt", "program.txt", "machine_final.txt", "ledger.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn sweep_and_trace_summaries_carry_headline_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let r =
        run_scenario(&parse_scenario(togglemem_cli::examples::bundled("fig12").unwrap()).unwrap(), dir.path()).unwrap();
    assert!(r.summary.contains("loglog_slope 1e7->2e7 Hz:"), "{}", r.summary);
    assert!(r.summary.contains("fitted_R_ser_ohm"));
    assert!(r.summary.contains("improvement_ratio at f=2e6:"));

    let r =
        run_scenario(&parse_scenario(togglemem_cli::examples::bundled("fig8").unwrap()).unwrap(), dir.path()).unwrap();
    assert!(r.summary.contains("net_energy_J at t=1e-7:"));
    assert!(r.summary.contains("net_energy_J at t=2e-7:"));
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn exit_code(args: &[&std::ffi::OsStr]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let ok = write_scenario(dir.path(), "ok.ini", "[scenario]\nkind = analytic\n");
    assert_eq!(exit_code(&["run".as_ref(), ok.as_os_str(), "--out".as_ref(), out.as_os_str()]), 0);

    assert_eq!(exit_code(&["run".as_ref(), dir.path().join("missing.ini").as_os_str()]), 5);
    assert_eq!(exit_code(&["frobnicate".as_ref()]), 2);

    let bad = write_scenario(dir.path(), "bad.ini", "[scenario]\nkind = transient\n[network]\nR_on = 5k\n");
    let o = bin().args(["run".as_ref(), bad.as_os_str()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`C`"));

    let model = write_scenario(dir.path(), "model.ini", "[scenario]\nkind = analytic\n[analytic]\nslope_a = 0, 1f\n");
    assert_eq!(exit_code(&["run".as_ref(), model.as_os_str(), "--out".as_ref(), out.as_os_str()]), 3);

    let blocked = dir.path().join("file");
    fs::write(&blocked, "").unwrap();
    assert_eq!(exit_code(&["run".as_ref(), ok.as_os_str(), "--out".as_ref(), blocked.join("x").as_os_str()]), 5);

    assert_eq!(RunError::from(MachineError::EmptyToggleSet).exit_code(), 4);
}

#[test]
fn scenario_out_key_is_used_when_no_flag() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-key");
    let body = format!("[scenario]\nkind = analytic\nout = {}\n", target.display());
    let p = write_scenario(dir.path(), "s.ini", &body);
    assert!(bin().arg("run").arg(&p).status().unwrap().success());
    assert!(target.join("analytic.csv").exists());
}

#[test]
fn baseline_comparison_at_two_megahertz() {
    let s = parse_scenario("[scenario]\nkind = transient\n[network]\nC = 1p\nR_on = 5k\nf = 2M\n").unwrap();
    let imp = compare_to_baseline(&s).unwrap();
    assert!(imp.ratio >= 20.0, "{imp:?}");

    let s = parse_scenario("[scenario]\nkind = analytic\n").unwrap();
    assert_eq!(compare_to_baseline(&s).unwrap_err().exit_code(), 2);
}
