use std::process::Command;

use satlae::cli::{parse_scenario, to_text};
use satlae::engine::{ExperimentKind, ScenarioConfig};
use satlae::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_satlae"))
}

fn scenario(text: &str) -> tempfile::NamedTempFile {
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), text).unwrap();
    f
}

fn stdout_of(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn empty_file_gives_defaults_with_notices() {
    let f = scenario("");
    let p = parse_scenario(f.path()).unwrap();
    assert_eq!(p.config, ScenarioConfig::default());
    assert!(!p.notices.is_empty());
}

#[test]
fn seed_override_changes_only_the_seed() {
    let f = scenario("sim.seed = 12345\n");
    let got = parse_scenario(f.path()).unwrap().config;
    let base = ScenarioConfig::default();
    assert_ne!(got, base);
    assert_eq!(got, base.with_seed(12345));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(
        parse_scenario("/nonexistent/scenario.txt"),
        Err(Error::Io(_))
    ));
}

#[test]
fn emitted_form_reparses_identically() {
    let f =
        scenario("shell.planes = 12\nfleet.1.k = 2\npolicy.beam = slot-level\nsim.power_w = 3.5\n");
    let first = parse_scenario(f.path()).unwrap().config;
    let g = scenario(&to_text(&first));
    let second = parse_scenario(g.path()).unwrap();
    assert_eq!(second.config, first);
    assert!(second.notices.is_empty());
}

#[test]
fn column_headers_are_stable() {
    let golden = [
        (ExperimentKind::Run, "slot,serving,sinr_1,sinr_2,rate_1_bps_hz,rate_2_bps_hz,sum_rate_bps_hz,beam_lat_deg,beam_lon_deg,position_reports,handover"),
        (ExperimentKind::PowerSweep, "policy,power_w,avg_sum_rate_bps_hz"),
        (ExperimentKind::MinPower, "transmitter,target_bps_hz,min_power_w,reachable"),
        (ExperimentKind::Service, "receiver,target_bps_hz,service_duration_slots,handovers,outage_slots,na_flag"),
        (ExperimentKind::TimescaleCompare, "scheme,frame_slots,avg_sum_rate_bps_hz,position_reports"),
        (ExperimentKind::TimescaleTrace, "scheme,slot,sum_rate_bps_hz"),
    ];
    for (kind, header) in golden {
        assert_eq!(kind.columns().join(","), header);
    }
}

#[test]
fn run_one_slot_writes_one_row() {
    let f = scenario("sim.slots = 1\n");
    let out = stdout_of(&["--scenario", f.path().to_str().unwrap(), "run"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].ends_with(",fingerprint"));
    assert!(!out.contains('\r'));
}

#[test]
fn sweep_with_one_power_gives_one_row_per_policy() {
    let f = scenario("sim.slots = 5\n");
    let out = stdout_of(&[
        "--scenario",
        f.path().to_str().unwrap(),
        "sweep-power",
        "--powers",
        "20",
    ]);
    assert_eq!(out.lines().count(), 1 + 4);
}

#[test]
fn service_rows_carry_na_flag() {
    let f = scenario("service.frame_slots = 20\n");
    let out = stdout_of(&[
        "--scenario",
        f.path().to_str().unwrap(),
        "service",
        "--targets",
        "18",
    ]);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "receiver,target_bps_hz,service_duration_slots,handovers,outage_slots,na_flag,fingerprint"
    );
    let receivers: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(receivers, ["dist-sat-3", "colocated-sat-3", "single-sat"]);
}

#[test]
fn output_file_and_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let f = scenario("sim.slots = 3\n");
    let s = f.path().to_str().unwrap();
    let p = path.to_str().unwrap();
    assert!(bin()
        .args(["--scenario", s, "--out", p, "run"])
        .status()
        .unwrap()
        .success());
    let a = std::fs::read_to_string(&path).unwrap();
    assert!(bin()
        .args(["--scenario", s, "--out", p, "--seed", "9", "run"])
        .status()
        .unwrap()
        .success());
    let b = std::fs::read_to_string(&path).unwrap();
    assert_eq!(a.lines().count(), 4);
    assert_ne!(a, b, "a different seed changes fading and the fingerprint");
}

#[test]
fn thread_count_does_not_change_output() {
    let f = scenario("sim.slots = 40\n");
    let s = f.path().to_str().unwrap();
    let one = stdout_of(&[
        "--scenario",
        s,
        "--threads",
        "1",
        "compare-timescales",
        "--frames",
        "10",
    ]);
    let four = stdout_of(&[
        "--scenario",
        s,
        "--threads",
        "4",
        "compare-timescales",
        "--frames",
        "10",
    ]);
    assert_eq!(one, four);
}

#[test]
fn errors_exit_nonzero_with_diagnostic() {
    let cases: [(&str, &[&str], &str); 4] = [
        ("shell.altitude_km = -1\n", &["run"], "shell.altitude_km"),
        ("shell.altitud_km = 500\n", &["run"], "shell.altitud_km"),
        ("policy.m = 200\nsim.slots = 2\n", &["run"], "slot 0"),
        ("", &["sweep-power", "--powers=-3"], "power_w"),
    ];
    for (text, args, needle) in cases {
        let f = scenario(text);
        let out = bin()
            .args(["--scenario", f.path().to_str().unwrap()])
            .args(args)
            .output()
            .unwrap();
        assert!(!out.status.success(), "{text:?} {args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("error:") && err.contains(needle), "{err}");
    }
    let out = bin()
        .args(["--scenario", "/nonexistent", "run"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn channel_dump_shape() {
    let out = stdout_of(&["dump-channel", "--slot", "3"]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "slot,fleet,sat,lav,element,re,im");
    // 2 fleets x 3 satellites x 16 elements x 4 vehicles
    assert_eq!(lines.count(), 2 * 3 * 16 * 4);
}
