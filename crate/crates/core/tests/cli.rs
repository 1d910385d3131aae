use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_SIM: &str = "[simulation]\nhorizon = 1.0\nstep = 0.05\npoints = 32\n";

fn fracblow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracblow"))
        .args(args)
        .env_remove("FRACBLOW_CONFIG")
        .env_remove("FRACBLOW_OUT")
        .env_remove("FRACBLOW_TOL")
        .env_remove("FRACBLOW_JOBS")
        .env_remove("FRACBLOW_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, body: &str) -> String {
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn default_exponent_query() {
    let o = fracblow(&["exponent"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("p_star = 10\n"), "{text}");
    assert!(text.contains("local_nonexistence_exponent = -3.25\n"));
}

#[test]
fn system_exponent_query() {
    let o = fracblow(&["exponent", "--system"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("n_bound = 2.33333333333\n"));
}

#[test]
fn strict_violation_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[params]\nsigma = 0.8\ndelta = 0.7\n");
    let o = fracblow(&["--config", &cfg, "exponent"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("0<σ<δ<1"), "{}", stderr(&o));
}

#[test]
fn permissive_mode_accepts_the_same_orders() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[params]\nsigma = 0.8\ndelta = 0.7\nmode = \"permissive\"\n",
    );
    assert_eq!(
        fracblow(&["--config", &cfg, "exponent"]).status.code(),
        Some(0)
    );
}

#[test]
fn duplicate_sweep_value_is_rejected() {
    let o = fracblow(&["sweep", "--p", "2,2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("duplicate"));
}

#[test]
fn empty_sweep_prints_only_the_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[sweep]\np_values = []\n");
    let o = fracblow(&["--config", &cfg, "sweep"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "p,p_star,status,blowup_time,final_supnorm\n");
}

#[test]
fn sweep_output_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL_SIM);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for (out, jobs) in [(&out_a, "1"), (&out_b, "2")] {
        let o = fracblow(&[
            "--config",
            &cfg,
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
            "sweep",
            "--p",
            "1.5,2,3",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(&out_a).unwrap();
    assert_eq!(a, std::fs::read(&out_b).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
}

#[test]
fn system_sweep_writes_one_row_per_pair() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &format!("{SMALL_SIM}[sweep]\npairs = [[2.0, 2.0], [2.0, 3.0]]\n"),
    );
    let o = fracblow(&["--config", &cfg, "system-sweep"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "p,q,n_bound,status,blowup_time,final_supnorm_u,final_supnorm_v"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,2,2.33333333333,"));
}

#[test]
fn simulate_writes_trace_and_snapshots() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{SMALL_SIM}snapshot_every = 5\n"));
    let snaps = dir.path().join("snaps.csv");
    let o = fracblow(&[
        "--config",
        &cfg,
        "simulate",
        "--snapshots",
        snaps.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 22);
    assert!(Path::new(&snaps).exists());
}

#[test]
fn verify_passes_by_default() {
    let o = fracblow(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn zero_tolerance_fails_verification() {
    let o = fracblow(&["verify", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn tolerance_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_fracblow"))
        .arg("verify")
        .env("FRACBLOW_TOL", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = fracblow(&["--config", "/nonexistent/exp.toml", "exponent"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[params\nalpha1 = ");
    assert_eq!(
        fracblow(&["--config", &cfg, "exponent"]).status.code(),
        Some(2)
    );
    let cfg = write_config(&dir, "[params]\nunknown_key = 1\n");
    assert_eq!(
        fracblow(&["--config", &cfg, "exponent"]).status.code(),
        Some(2)
    );
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(fracblow(&["bogus"]).status.code(), Some(2));
}
