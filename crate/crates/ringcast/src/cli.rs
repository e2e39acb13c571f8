//! Batch front-end: the five subcommands behind the `ringcast` binary.
//!
//! Every command reads one flat config (see [`crate::scenario`]), applies
//! `--set key=value` overrides and an optional `--seed`, and writes its
//! outputs into the `--out` directory. All commands are deterministic given
//! (inputs, config, seed): re-running reproduces identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::densify::{estimate_all, flow_table_to_text, DensifyParams};
use crate::geometry::{Direction, RingGeometry};
use crate::metrics::REPORT_HEADER;
use crate::protocols::ProtocolKind;
use crate::scenario::{build_geometry, run_scenario, ScenarioConfig};
use crate::synth::{generate, thin_vehicles, trace_to_text, truth_to_text, SynthConfig};
use crate::trace::{
    bin_time_period, build_tracks, epoch_snapshots, filter_quality, histogram_to_text,
    match_records, parse_records, summarize_periods, EpochSnapshot, PeriodSummary, TimePeriod,
};

pub const SUMMARY_HEADER: &str =
    "period,vehicle_count,record_count,mean_speed_kmh,share_gap_le_50m";
pub const MEAN_SUMMARY_HEADER: &str =
    "protocol,runs,pdr_mean,collisions_mean,avg_e2e_s_mean,undelivered_farthest_mean";

/// Errors split by exit status: usage problems exit 1, input problems exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

/// Options shared by every subcommand.
#[derive(Debug, Default, Clone)]
pub struct CliOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub sets: Vec<String>,
}

/// Loads the config file (if any) and applies `--set` overrides and the
/// `--seed` flag.
pub fn load_config(opts: &CliOptions) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => ScenarioConfig::from_file(path).map_err(input_err)?,
        None => ScenarioConfig::default(),
    };
    for assignment in &opts.sets {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(CliError::Usage(format!(
                "--set expects key=value, got '{assignment}'"
            )));
        };
        cfg.apply(key, value).map_err(input_err)?;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", out.display())))
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn read_trace(cfg: &ScenarioConfig, g: &RingGeometry) -> Result<TraceData, CliError> {
    let path = cfg
        .trace
        .as_ref()
        .ok_or_else(|| CliError::Input("no trace file configured (key 'trace')".into()))?;
    let file = fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot open trace {}: {e}", path.display())))?;
    let (records, rejected) = parse_records(file).map_err(input_err)?;
    let parsed = records.len() as u64;
    let records = filter_quality(records, cfg.min_quality);
    let quality_dropped = parsed - records.len() as u64;
    let outcome = match_records(g, &records, cfg.max_offset_m);
    let tracks = build_tracks(g, &outcome.matched);
    let snapshots = epoch_snapshots(&tracks, cfg.epoch_s);
    Ok(TraceData {
        parsed,
        rejected,
        quality_dropped,
        off_ring: outcome.dropped_off_ring,
        matched: outcome.matched,
        snapshots,
    })
}

struct TraceData {
    parsed: u64,
    rejected: u64,
    quality_dropped: u64,
    off_ring: u64,
    matched: Vec<crate::trace::MatchedRecord>,
    snapshots: Vec<EpochSnapshot>,
}

pub fn summaries_to_text(summaries: &[PeriodSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        let _ = write!(out, "{},{},{},", s.period, s.vehicle_count, s.record_count);
        if let Some(v) = s.mean_speed_kmh {
            let _ = write!(out, "{v:.3}");
        }
        out.push(',');
        if let Some(v) = s.share_gap_le_50m {
            let _ = write!(out, "{v:.6}");
        }
        out.push('\n');
    }
    out
}

/// `analyze`: trace -> per-period summaries plus one histogram file per
/// (period, metric).
pub fn cmd_analyze(opts: &CliOptions) -> Result<(), CliError> {
    let cfg = load_config(opts)?;
    let g = build_geometry(&cfg).map_err(input_err)?;
    let data = read_trace(&cfg, &g)?;
    let summaries = summarize_periods(&data.matched, &data.snapshots, &g, cfg.gap_bin_m, cfg.speed_bin_kmh);
    ensure_out_dir(&opts.out)?;
    write_out(&opts.out.join("summary.csv"), &summaries_to_text(&summaries))?;
    for s in &summaries {
        write_out(
            &opts.out.join(format!("hist_{}_gaps.csv", s.period)),
            &histogram_to_text(&s.gap_histogram),
        )?;
        write_out(
            &opts.out.join(format!("hist_{}_speed.csv", s.period)),
            &histogram_to_text(&s.speed_histogram),
        )?;
    }
    eprintln!(
        "analyze: {} rows parsed ({} rejected, {} below quality, {} off ring)",
        data.parsed, data.rejected, data.quality_dropped, data.off_ring
    );
    Ok(())
}

fn snapshots_in_period(snapshots: &[EpochSnapshot], period: TimePeriod) -> Vec<EpochSnapshot> {
    snapshots
        .iter()
        .filter(|s| bin_time_period(s.epoch_start) == Some(period))
        .cloned()
        .collect()
}

/// `densify`: trace -> per-(direction, segment) flow estimates for the
/// configured period.
pub fn cmd_densify(opts: &CliOptions) -> Result<(), CliError> {
    let cfg = load_config(opts)?;
    let g = build_geometry(&cfg).map_err(input_err)?;
    let data = read_trace(&cfg, &g)?;
    let in_period = snapshots_in_period(&data.snapshots, cfg.period);
    let params = DensifyParams {
        h_s: cfg.h_s,
        penetration: cfg.penetration,
    };
    let table = estimate_all(&in_period, &g, &params).map_err(input_err)?;
    ensure_out_dir(&opts.out)?;
    write_out(&opts.out.join("flows.csv"), &flow_table_to_text(&table))?;
    eprintln!(
        "densify: {} epochs in period {}, penetration {}",
        table.epochs, cfg.period, cfg.penetration
    );
    Ok(())
}

fn sample_targets(cfg: &ScenarioConfig, g: &RingGeometry) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    if let Some(path) = &cfg.synth_counts_file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        return parse_counts_file(&text, g.segments().len()).map_err(CliError::Input);
    }
    if !(cfg.synth_count_min >= 0.0 && cfg.synth_count_max >= cfg.synth_count_min) {
        return Err(CliError::Input(format!(
            "synth count range [{}, {}] is invalid",
            cfg.synth_count_min, cfg.synth_count_max
        )));
    }
    let s = g.segments().len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |_: usize| {
        if cfg.synth_count_max > cfg.synth_count_min {
            rng.random_range(cfg.synth_count_min..cfg.synth_count_max)
        } else {
            cfg.synth_count_min
        }
    };
    let cw: Vec<f64> = (0..s).map(&mut draw).collect();
    let ccw: Vec<f64> = (0..s).map(&mut draw).collect();
    Ok((cw, ccw))
}

/// Counts file: `direction,segment,count` with one row per (direction,
/// segment).
pub fn parse_counts_file(text: &str, segment_count: usize) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut cw = vec![None; segment_count];
    let mut ccw = vec![None; segment_count];
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "direction,segment,count" => {}
        _ => return Err("counts file must start with 'direction,segment,count'".into()),
    }
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(format!("line {}: expected 3 fields", lineno + 1));
        }
        let dir = Direction::parse(fields[0]).ok_or(format!("line {}: bad direction", lineno + 1))?;
        let seg: usize = fields[1].parse().map_err(|_| format!("line {}: bad segment", lineno + 1))?;
        let count: f64 = fields[2].parse().map_err(|_| format!("line {}: bad count", lineno + 1))?;
        if seg == 0 || seg > segment_count {
            return Err(format!("line {}: segment out of range", lineno + 1));
        }
        match dir {
            Direction::Clockwise => cw[seg - 1] = Some(count),
            Direction::Counterclockwise => ccw[seg - 1] = Some(count),
        }
    }
    let fill = |v: Vec<Option<f64>>| v.into_iter().map(|x| x.unwrap_or(0.0)).collect::<Vec<f64>>();
    Ok((fill(cw), fill(ccw)))
}

/// `synth`: generate a full synthetic population trace, an independently
/// thinned probe subset and the ground-truth table.
pub fn cmd_synth(opts: &CliOptions) -> Result<(), CliError> {
    let cfg = load_config(opts)?;
    let g = build_geometry(&cfg).map_err(input_err)?;
    let (targets_cw, targets_ccw) = sample_targets(&cfg, &g)?;
    let synth_cfg = SynthConfig {
        start: cfg.synth_start,
        duration_s: cfg.synth_duration_s,
        report_interval_s: cfg.synth_report_interval_s,
        speed_mps: cfg.synth_speed_mps,
        trip_segments: cfg.synth_trip_segments,
        noise_m: cfg.synth_noise_m,
        quality: 3,
    };
    let full = generate(&g, &targets_cw, &targets_ccw, &synth_cfg, cfg.seed).map_err(input_err)?;
    let probe = thin_vehicles(&full.records, cfg.penetration, cfg.seed.wrapping_add(1));
    ensure_out_dir(&opts.out)?;
    write_out(&opts.out.join("synth_full.csv"), &trace_to_text(&full.records))?;
    write_out(&opts.out.join("synth_probe.csv"), &trace_to_text(&probe))?;
    write_out(&opts.out.join("synth_truth.csv"), &truth_to_text(&full.truth))?;
    eprintln!(
        "synth: {} full records, {} probe records, {} vehicles, {} epochs",
        full.records.len(),
        probe.len(),
        full.vehicle_count,
        full.epochs
    );
    Ok(())
}

/// `simulate`: run the configured protocol scenario for each repetition and
/// merge the per-seed reports into a mean summary.
pub fn cmd_simulate(opts: &CliOptions) -> Result<(), CliError> {
    let cfg = load_config(opts)?;
    cfg.validate_run().map_err(input_err)?;
    let g = build_geometry(&cfg).map_err(input_err)?;
    ensure_out_dir(&opts.out)?;
    write_out(&opts.out.join("effective_config.txt"), &cfg.to_text())?;
    let mut report_texts = Vec::new();
    for rep in 0..cfg.repetitions {
        let seed = cfg.seed + rep as u64;
        let out = run_scenario(&cfg, &g, seed).map_err(input_err)?;
        let text = out.report.to_text(cfg.per_node_appendix);
        write_out(&opts.out.join(format!("report_seed{seed}.csv")), &text)?;
        if cfg.event_log {
            write_out(&opts.out.join(format!("event_log_seed{seed}.csv")), &out.event_log)?;
        }
        if let Some(dump) = out.mobility_dump {
            write_out(&opts.out.join(format!("mobility_seed{seed}.csv")), &dump)?;
        }
        report_texts.push(text);
    }
    let rows: Vec<ReportRow> = report_texts
        .iter()
        .map(|t| parse_report_text(t))
        .collect::<Result<_, _>>()
        .map_err(CliError::Input)?;
    write_out(&opts.out.join("summary_mean.csv"), &mean_summary(&rows).map_err(CliError::Input)?)?;
    Ok(())
}

/// One parsed run row of a report file.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub pdr: f64,
    pub collisions: u64,
    pub avg_e2e_s: Option<f64>,
    pub undelivered_farthest: u64,
}

/// Parses a report file (appendix rows, when present, are skipped).
pub fn parse_report_text(text: &str) -> Result<ReportRow, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == REPORT_HEADER => {}
        _ => return Err(format!("report must start with '{REPORT_HEADER}'")),
    }
    let row = lines.next().ok_or("report has no data row")?;
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != 9 {
        return Err(format!("report row has {} fields, expected 9", fields.len()));
    }
    Ok(ReportRow {
        protocol: ProtocolKind::parse(fields[0]).ok_or(format!("bad protocol '{}'", fields[0]))?,
        seed: fields[1].parse().map_err(|_| "bad seed")?,
        pdr: fields[5].parse().map_err(|_| "bad pdr")?,
        collisions: fields[6].parse().map_err(|_| "bad collisions")?,
        avg_e2e_s: if fields[7].is_empty() {
            None
        } else {
            Some(fields[7].parse().map_err(|_| "bad avg_e2e_s")?)
        },
        undelivered_farthest: fields[8].parse().map_err(|_| "bad undelivered")?,
    })
}

/// Means over repetitions, in seed order. The delay mean runs over the
/// repetitions where it exists.
pub fn mean_summary(rows: &[ReportRow]) -> Result<String, String> {
    if rows.is_empty() {
        return Err("no report rows to merge".into());
    }
    let protocol = rows[0].protocol;
    if rows.iter().any(|r| r.protocol != protocol) {
        return Err("cannot merge reports from different protocols".into());
    }
    let mut rows = rows.to_vec();
    rows.sort_by_key(|r| r.seed);
    let n = rows.len() as f64;
    let pdr = rows.iter().map(|r| r.pdr).sum::<f64>() / n;
    let collisions = rows.iter().map(|r| r.collisions as f64).sum::<f64>() / n;
    let undelivered = rows.iter().map(|r| r.undelivered_farthest as f64).sum::<f64>() / n;
    let delays: Vec<f64> = rows.iter().filter_map(|r| r.avg_e2e_s).collect();
    let mut out = String::from(MEAN_SUMMARY_HEADER);
    out.push('\n');
    let _ = write!(out, "{protocol},{},{pdr:.6},{collisions:.3},", rows.len());
    if !delays.is_empty() {
        let mean = delays.iter().sum::<f64>() / delays.len() as f64;
        let _ = write!(out, "{mean:.6}");
    }
    let _ = writeln!(out, ",{undelivered:.3}");
    Ok(out)
}

/// `report`: merge every `report_seed*.csv` under the output directory into
/// the mean summary.
pub fn cmd_report(opts: &CliOptions) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let entries = fs::read_dir(&opts.out)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", opts.out.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("report_seed") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Input(format!(
            "no report_seed*.csv files under {}",
            opts.out.display()
        )));
    }
    for p in paths {
        let text = fs::read_to_string(&p)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
        rows.push(parse_report_text(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?);
    }
    write_out(&opts.out.join("summary_mean.csv"), &mean_summary(&rows).map_err(CliError::Input)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_override_requires_key_value() {
        let opts = CliOptions {
            sets: vec!["no-equals".into()],
            ..Default::default()
        };
        match load_config(&opts) {
            Err(CliError::Usage(msg)) => assert!(msg.contains("no-equals")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seed_flag_overrides_config() {
        let opts = CliOptions {
            seed: Some(99),
            sets: vec!["seed=5".into()],
            ..Default::default()
        };
        let cfg = load_config(&opts).unwrap();
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn report_row_round_trip() {
        let text = format!("{REPORT_HEADER}\ndbf,3,100,150,100,0.912345,42,0.123456,1\n");
        let row = parse_report_text(&text).unwrap();
        assert_eq!(row.protocol, ProtocolKind::Dbf);
        assert_eq!(row.seed, 3);
        assert!((row.pdr - 0.912345).abs() < 1e-12);
        assert_eq!(row.collisions, 42);
        assert_eq!(row.avg_e2e_s, Some(0.123456));
        assert_eq!(row.undelivered_farthest, 1);
    }

    #[test]
    fn mean_summary_over_rows() {
        let rows = vec![
            ReportRow {
                protocol: ProtocolKind::Rnd,
                seed: 2,
                pdr: 0.5,
                collisions: 10,
                avg_e2e_s: Some(0.2),
                undelivered_farthest: 1,
            },
            ReportRow {
                protocol: ProtocolKind::Rnd,
                seed: 1,
                pdr: 1.0,
                collisions: 20,
                avg_e2e_s: None,
                undelivered_farthest: 3,
            },
        ];
        let text = mean_summary(&rows).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line, "rnd,2,0.750000,15.000,0.200000,2.000");
        let mixed = vec![
            rows[0].clone(),
            ReportRow {
                protocol: ProtocolKind::Dbf,
                ..rows[1].clone()
            },
        ];
        assert!(mean_summary(&mixed).is_err());
    }

    #[test]
    fn counts_file_parsing() {
        let text = "direction,segment,count\ncw,1,5\ncw,2,7\nccw,1,3\n";
        let (cw, ccw) = parse_counts_file(text, 2).unwrap();
        assert_eq!(cw, vec![5.0, 7.0]);
        assert_eq!(ccw, vec![3.0, 0.0]);
        assert!(parse_counts_file("bad", 2).is_err());
    }
}
