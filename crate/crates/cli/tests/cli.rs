use std::path::Path;
use std::process::Command;

use fluxcirc_cli::{execute, ExperimentConfig, ResultTable, Status};

const TINY_NUMERICS: &str = "[numerics]\ntransient_periods = 4.0\ntransient_decay = 0.0\nwindow_periods = 4\nsteady_tol = 1.0\nworkers = 1\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fluxcirc"))
}

fn run_config(text: &str, dir: &Path) -> (fluxcirc_cli::Report, Vec<ResultTable>) {
    let cfg = ExperimentConfig::parse(text).unwrap();
    let report = execute(&cfg, Some(1), dir).unwrap();
    let tables = report.written.iter().map(|p| ResultTable::read(p).unwrap()).collect();
    (report, tables)
}

const SCATTER: [&str; 14] = [
    "s11_mag",
    "s21_mag",
    "s31_mag",
    "s11_phase",
    "s21_phase",
    "s31_phase",
    "v_dc_volts",
    "velocity",
    "p_in_watts",
    "p_diss_watts",
    "total_power",
    "sideband_power",
    "window_mismatch",
    "converged",
];

fn with_scatter(lead: &[&str], tail: &[&str]) -> Vec<String> {
    lead.iter().chain(&SCATTER).chain(tail).map(|s| s.to_string()).collect()
}

#[test]
fn iv_schema_and_asymptote() {
    let dir = tempfile::tempdir().unwrap();
    let (report, tables) = run_config(
        "[device]\nlength = 15.0\ng = 0.02\n[experiment]\nname = \"iv\"\nfluxon_counts = [2, 4]\nbias_grid = [0.0, 0.01, 0.3]\n",
        dir.path(),
    );
    assert_eq!(report.status, Status::Ok);
    let t = &tables[0];
    assert_eq!(t.name, "iv");
    assert_eq!(t.columns, ["n", "i_b", "velocity", "v_dc", "v_dc_volts", "asymptote", "branch"]);
    assert_eq!(t.rows.len(), 6);
    for key in ["experiment", "branch_codes", "version", "wall_time_s", "failed_points", "config"] {
        assert!(t.get_meta(key).is_some(), "missing {key}");
    }
    assert_eq!(ExperimentConfig::parse(t.get_meta("config").unwrap()).unwrap().device.length, 15.0);
    let v = t.column("v_dc").unwrap();
    let asym = t.column("asymptote").unwrap();
    assert_eq!(v[0], 0.0);
    assert!(v[1] > 0.0 && v[2] > v[1] && v[2] < asym[2]);
}

#[test]
fn spectrum_and_splitting_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let (_, t) = run_config(
        "[device]\nlength = 15.0\n[experiment]\nname = \"spectrum\"\nfluxon_counts = [2, 3, 8]\n",
        dir.path(),
    );
    assert_eq!(
        t[0].columns,
        ["n", "k", "omega_1", "omega_n_minus_1", "omega_2", "omega_n_minus_2", "asymptote_1", "asymptote_2"]
    );
    let r = &t[0].rows;
    // static trains: ω_ℓ = ω_{n−ℓ}
    assert!((r[2][2] - r[2][3]).abs() < 1e-12);
    assert!(r[0][5].is_nan());

    let (report, t) = run_config(
        "[device]\nlength = 15.0\ng = 0.02\n[experiment]\nname = \"splitting\"\nbias_grid = [0.0, 0.005]\n",
        dir.path(),
    );
    assert_eq!(report.status, Status::Ok);
    assert_eq!(
        t[0].columns,
        ["i_b", "velocity", "omega_minus", "omega_plus", "delta_omega", "f_minus_ghz", "f_plus_ghz"]
    );
    assert!(t[0].rows[0][4].abs() < 1e-12);
    assert!(t[0].rows[1][4] > 0.0);
}

#[test]
fn bias_sweep_schema_on_a_small_ring() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "[device]\nlength = 6.0\nfluxons = 2\n{TINY_NUMERICS}[experiment]\nname = \"bias-sweep\"\nbias_grid = [0.0, 0.001]\nfrequency_ghz = 12.0\n"
    );
    let (report, t) = run_config(&text, dir.path());
    assert_eq!(report.status, Status::Ok, "{:?}", report.messages);
    assert_eq!(t[0].columns, with_scatter(&["i_b"], &["tcm_s11", "tcm_s21", "tcm_s31"]));
    assert_eq!(t[0].rows.len(), 2);
    for row in &t[0].rows {
        assert!(row.iter().take(15).all(|x| x.is_finite()));
    }
    assert!(t[0].get_meta("frequency_ghz").is_some());
}

#[test]
fn failed_points_still_write_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[device]\nlength = 6.0\nfluxons = 2\n[numerics]\ndt_factor = 0.9\n[experiment]\nname = \"bias-sweep\"\nbias_grid = [0.0]\n";
    let (report, t) = run_config(text, dir.path());
    assert_eq!(report.status, Status::Numerical);
    assert_eq!(report.status.code(), 3);
    assert_eq!(t.len(), 1);
    assert!(t[0].rows.is_empty());
    assert_eq!(t[0].get_meta("failed_points"), Some("1"));
}

#[test]
fn binary_exit_codes_and_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[experiment]\nname = \"iv\"\nbogus = 1\n").unwrap();
    let out = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.lines().any(|l| l.starts_with("fluxcirc-error kind=config code=2 message=")), "{err}");

    let missing = bin().arg("run").arg(dir.path().join("nope.toml")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("iv.toml");
    std::fs::write(
        &cfg,
        "[device]\nlength = 15.0\ng = 0.02\n[experiment]\nname = \"iv\"\nfluxon_counts = [2]\nbias_grid = [0.0, 0.01]\n",
    )
    .unwrap();
    let env_out = dir.path().join("from_env");
    let out = bin().arg("run").arg(&cfg).env("FLUXCIRC_OUT", &env_out).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_out.join("iv.csv").exists());

    let flag_out = dir.path().join("from_flag");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_out)
        .arg("--workers")
        .arg("1")
        .env("FLUXCIRC_OUT", &env_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag_out.join("iv.csv").exists());
}

#[test]
fn validate_subcommand_passes() {
    let out = bin().arg("validate").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 10);
}
