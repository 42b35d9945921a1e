mod common;

use std::fs;
use std::process::{Command, Output};

use common::scenario_path;

fn ehwsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehwsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn devices_lists_builtin_profiles() {
    let o = ehwsim(&["devices"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with(' '))
        .collect();
    assert_eq!(rows.len(), 3, "{text}");
    assert!(rows
        .iter()
        .any(|r| r.starts_with("ispPAC10") && r.contains("100 ms")));
    assert!(rows
        .iter()
        .any(|r| r.starts_with("FPTA2") && r.contains("0.008 ms")));
}

#[test]
fn devices_with_user_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.toml");
    fs::write(
        &path,
        "[[device]]\nname = \"Custom\"\nkind = \"FPAA\"\nsize = 2\nt_program_ms = 12.5\n",
    )
    .unwrap();
    let o = ehwsim(&["devices", "--profiles", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("Custom") && l.contains("12.5 ms")));
    let o = ehwsim(&[
        "budget",
        "--device",
        "custom",
        "--profiles",
        path.to_str().unwrap(),
        "--t-eval",
        "87.5",
        "--pop",
        "4",
        "--gens",
        "2",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("T_r: 0.8 s"));
}

#[test]
fn budget_exit_status_follows_feasibility() {
    let base = [
        "budget", "--device", "AN220E04", "--t-eval", "625", "--pop", "100", "--gens", "500",
    ];
    let ok = ehwsim(&[&base[..], &["--deadline", "10h"]].concat());
    assert_eq!(ok.status.code(), Some(0));
    let text = stdout(&ok);
    assert!(text.contains("per-evaluation cost: 628.8 ms"));
    assert!(text.contains("T_r: 31440 s (8.733 h)"));
    assert!(text.contains("margin: +4560 s"));
    assert!(text.contains("verdict: feasible"));

    let late = ehwsim(&[&base[..], &["--deadline", "6h"]].concat());
    assert_eq!(late.status.code(), Some(1));
    assert!(stdout(&late).contains("verdict: infeasible"));
    assert!(stdout(&late).contains("margin: -9840 s"));

    let exact = ehwsim(&[&base[..], &["--deadline", "31440s"]].concat());
    assert_eq!(exact.status.code(), Some(0));
    let strict = ehwsim(&[&base[..], &["--deadline", "31440s", "--strict"]].concat());
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn budget_edge_cases() {
    let zero = ehwsim(&[
        "budget",
        "--device",
        "FPTA2",
        "--t-eval",
        "1",
        "--pop",
        "10",
        "--gens",
        "0",
        "--deadline",
        "1ns",
    ]);
    assert_eq!(zero.status.code(), Some(0));
    assert!(stdout(&zero).contains("T_r: 0 s"));

    let raw = ehwsim(&[
        "budget",
        "--t-program",
        "3.8",
        "--t-eval",
        "625ms",
        "--pop",
        "100",
        "--gens",
        "500",
    ]);
    assert_eq!(raw.status.code(), Some(0));
    assert!(stdout(&raw).contains("31440 s"));

    let unknown = ehwsim(&[
        "budget", "--device", "XC9000", "--t-eval", "1", "--pop", "1", "--gens", "1",
    ]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("unknown device `XC9000`"));

    let bad = ehwsim(&[
        "budget",
        "--device",
        "FPTA2",
        "--t-eval",
        "1 fortnight",
        "--pop",
        "1",
        "--gens",
        "1",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = ehwsim(&["budget", "--t-eval", "1", "--pop", "1", "--gens", "1"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn simulate_bundled_divider() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_path("fpta-divider");
    let o = ehwsim(&[
        "simulate",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("seeds: 50, effective: 50"), "{text}");
    let campaign = fs::read_to_string(dir.path().join("campaign.csv")).unwrap();
    assert_eq!(campaign.lines().count(), 51);
    assert_eq!(
        fs::read_to_string(dir.path().join("report.txt")).unwrap(),
        text.lines()
            .filter(|l| !l.starts_with("artifacts:"))
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );
}

#[test]
fn seed_override_runs_one_seed() {
    let path = scenario_path("fpta-divider");
    let o = ehwsim(&["campaign", path.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("seeds: 1, effective: 1"));
}

#[test]
fn zero_deadline_scenario_fails_every_seed() {
    let text = fs::read_to_string(scenario_path("fpta-divider"))
        .unwrap()
        .replace("deadline = \"1s\"", "deadline = \"0s\"");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.scenario");
    fs::write(&path, text).unwrap();
    let out = dir.path().join("out");
    let o = ehwsim(&[
        "simulate",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("success_rate: 0.000"));
    let campaign = fs::read_to_string(out.join("campaign.csv")).unwrap();
    assert!(
        campaign
            .lines()
            .skip(1)
            .all(|l| l.contains(",deadline-exhausted,0,0,false,true,false")),
        "{campaign}"
    );
}

#[test]
fn aging_free_sanity_run() {
    let text = fs::read_to_string(scenario_path("fpta-divider"))
        .unwrap()
        .replace("[[faults]]\nswitch = 0\nmode = \"stuck_open\"\n", "")
        .replace("{ start = 1, count = 50 }", "[1, 2]");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clean.scenario");
    fs::write(&path, text).unwrap();
    let o = ehwsim(&["simulate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("faults: none"));
}

#[test]
fn parse_errors_name_the_line() {
    let text = fs::read_to_string(scenario_path("fpta-divider"))
        .unwrap()
        .replace("mode = \"stuck_open\"", "mode = \"melted\"");
    let line = text.lines().position(|l| l == "[[faults]]").unwrap() + 1;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scenario");
    fs::write(&path, text).unwrap();
    let o = ehwsim(&["simulate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(&format!("bad.scenario:{line}:")), "{err}");
    assert!(err.contains("melted"));

    let o = ehwsim(&[
        "simulate",
        dir.path().join("missing.scenario").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
