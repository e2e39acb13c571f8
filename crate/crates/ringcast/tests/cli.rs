//! End-to-end tests of the `ringcast` binary: subcommands, exit codes,
//! output files, determinism of re-runs, and the config-echo round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringcast"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

#[test]
fn usage_errors_exit_1() {
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["simulate", "--set", "not-an-assignment"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not-an-assignment"));
}

#[test]
fn input_errors_exit_2_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["analyze", "--set", "trace=/no/such/trace.csv", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/trace.csv"));

    let out = bin()
        .args(["simulate", "--set", "rsu_exit=99", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rsu_exit"));

    let out = bin()
        .args(["simulate", "--set", "no_such_key=1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

fn geometry_args(args: &mut Vec<String>) {
    let f = fixtures();
    args.push(format!("--set=geometry={}", f.join("ring29/geometry.csv").display()));
    args.push(format!("--set=exits={}", f.join("ring29/exits.csv").display()));
}

#[test]
fn analyze_bundled_trace_writes_four_period_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "analyze".to_string(),
        format!("--out={}", dir.path().display()),
        format!("--set=trace={}", fixtures().join("probe_trace.csv").display()),
    ];
    geometry_args(&mut args);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = read(dir.path(), "summary.csv");
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 4, "one row per period:\n{summary}");
    assert!(rows[2].starts_with("p3,"), "the bundled trace lives in p3");
    for period in ["p1", "p2", "p3", "p4"] {
        for metric in ["gaps", "speed"] {
            assert!(dir.path().join(format!("hist_{period}_{metric}.csv")).exists());
        }
    }

    // Re-running reproduces identical bytes.
    let dir2 = tempfile::tempdir().unwrap();
    let mut args2 = args.clone();
    args2[1] = format!("--out={}", dir2.path().display());
    assert_eq!(bin().args(&args2).output().unwrap().status.code(), Some(0));
    assert_eq!(summary, read(dir2.path(), "summary.csv"));
    assert_eq!(
        read(dir.path(), "hist_p3_gaps.csv"),
        read(dir2.path(), "hist_p3_gaps.csv")
    );
}

#[test]
fn densify_defaults_to_p3_and_2_percent() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "densify".to_string(),
        format!("--out={}", dir.path().display()),
        format!("--set=trace={}", fixtures().join("probe_trace.csv").display()),
    ];
    geometry_args(&mut args);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("period p3"), "default period: {stderr}");
    assert!(stderr.contains("penetration 0.02"), "default penetration: {stderr}");

    let flows = read(dir.path(), "flows.csv");
    assert!(flows.starts_with("direction,segment,n_j,m_j,q_j,L_j"));
    // One row per (direction, segment) on the 29-segment ring.
    assert_eq!(flows.lines().count(), 1 + 2 * 29);

    // An empty period yields an all-zero table and still exits 0.
    let dir2 = tempfile::tempdir().unwrap();
    let mut args2 = args.clone();
    args2[1] = format!("--out={}", dir2.path().display());
    args2.push("--set=period=p1".to_string());
    assert_eq!(bin().args(&args2).output().unwrap().status.code(), Some(0));
    let flows2 = read(dir2.path(), "flows.csv");
    for line in flows2.lines().skip(1) {
        let q: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(q, 0.0);
    }
}

#[test]
fn synth_emits_trace_probe_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "synth".to_string(),
        format!("--out={}", dir.path().display()),
        "--seed=5".to_string(),
        "--set=synth_duration_s=300".to_string(),
        "--set=synth_count_min=5".to_string(),
        "--set=synth_count_max=10".to_string(),
    ];
    geometry_args(&mut args);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let truth = read(dir.path(), "synth_truth.csv");
    assert_eq!(truth.lines().count(), 1 + 2 * 29, "two truth rows per segment");
    let full = read(dir.path(), "synth_full.csv");
    let probe = read(dir.path(), "synth_probe.csv");
    assert!(full.lines().count() > probe.lines().count());
    // The probe is a per-vehicle subset of the full trace.
    let full_rows: std::collections::BTreeSet<&str> = full.lines().skip(1).collect();
    for row in probe.lines().skip(1) {
        assert!(full_rows.contains(row), "probe row not in full trace: {row}");
    }
}

#[test]
fn simulate_writes_reports_echo_and_mean_summary() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--seed=3",
        "--set=repetitions=2",
        "--set=duration_s=20",
        "--set=population=60",
        "--set=protocol=dbf_hc",
        "--set=event_log=true",
    ];
    let out = bin().args(args).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "effective_config.txt",
        "report_seed3.csv",
        "report_seed4.csv",
        "event_log_seed3.csv",
        "event_log_seed4.csv",
        "summary_mean.csv",
    ] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let report = read(dir.path(), "report_seed3.csv");
    assert!(report.starts_with(
        "protocol,seed,duration_s,nodes,messages,pdr,collisions,avg_e2e_s,undelivered_farthest"
    ));
    assert!(report.contains("node_id,deliverable,received"), "per-node appendix present");

    // `report` rebuilds the same mean summary from the per-seed files.
    let mean_before = read(dir.path(), "summary_mean.csv");
    std::fs::remove_file(dir.path().join("summary_mean.csv")).unwrap();
    let out = bin().args(["report", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(dir.path(), "summary_mean.csv"), mean_before);

    // Determinism: a fresh run with the same seed produces identical bytes.
    let dir2 = tempfile::tempdir().unwrap();
    let out = bin().args(args).arg("--out").arg(dir2.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report, read(dir2.path(), "report_seed3.csv"));
    assert_eq!(
        read(dir.path(), "event_log_seed3.csv"),
        read(dir2.path(), "event_log_seed3.csv")
    );

    // Config round trip: re-running from the echoed effective config
    // reproduces the same outputs.
    let dir3 = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(dir.path().join("effective_config.txt"))
        .arg("--out")
        .arg(dir3.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report, read(dir3.path(), "report_seed3.csv"));
    assert_eq!(mean_before, read(dir3.path(), "summary_mean.csv"));
    assert_eq!(
        read(dir.path(), "effective_config.txt"),
        read(dir3.path(), "effective_config.txt"),
        "the echo is a fixed point"
    );
}

#[test]
fn mobility_dump_rows_when_enabled() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "simulate",
            "--seed=1",
            "--set=duration_s=5",
            "--set=population=60",
            "--set=mobility_dump=true",
            "--set=mobility_dump_interval_s=1",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dump = read(dir.path(), "mobility_seed1.csv");
    assert!(dump.starts_with("t,vehicle_id,arc,dir,speed"));
    // 6 sample instants (t = 0..=5) for ~50 vehicles.
    assert!(dump.lines().count() > 200, "{}", dump.lines().count());
}

#[test]
fn analyze_and_densify_outputs_feed_simulate() {
    // The flows file written by densify and the speed histogram written by
    // analyze drive the mobility model end to end.
    let flows_dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "densify".to_string(),
        format!("--out={}", flows_dir.path().display()),
        format!("--set=trace={}", fixtures().join("probe_trace.csv").display()),
    ];
    geometry_args(&mut args);
    assert_eq!(bin().args(&args).output().unwrap().status.code(), Some(0));

    let analyze_dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "analyze".to_string(),
        format!("--out={}", analyze_dir.path().display()),
        format!("--set=trace={}", fixtures().join("probe_trace.csv").display()),
    ];
    geometry_args(&mut args);
    assert_eq!(bin().args(&args).output().unwrap().status.code(), Some(0));

    let sim_dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "simulate".to_string(),
        format!("--out={}", sim_dir.path().display()),
        format!("--set=flows={}", flows_dir.path().join("flows.csv").display()),
        format!(
            "--set=speed_hist_file={}",
            analyze_dir.path().join("hist_p3_speed.csv").display()
        ),
        "--set=duration_s=10".to_string(),
        "--set=rsu_exit=19".to_string(),
        "--seed=2".to_string(),
    ];
    geometry_args(&mut args);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(sim_dir.path(), "report_seed2.csv");
    let nodes: u64 = report.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(nodes > 0, "flows-derived population is non-empty:\n{report}");
}
