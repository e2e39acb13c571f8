//! Scenario configuration: a flat `key = value` text format with `#`
//! comments, full defaults for every key, and builders that turn a config
//! into geometry, a mobility model and a ready-to-run simulation.
//!
//! The effective config (all defaults resolved) can be echoed back out with
//! [`ScenarioConfig::to_text`]; re-running from that echo reproduces the same
//! outputs byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::densify::parse_flow_targets;
use crate::geometry::{
    build_ring, load_exits, load_vertices, synthetic_circle, GeoPoint, RingGeometry,
};
use crate::metrics::MetricsReport;
use crate::mobility::{MobilityConfig, SpeedSampler, TripSampler};
use crate::protocols::{ProtocolKind, ProtocolParams};
use crate::sim::{ChannelConfig, Simulation};
use crate::trace::{
    parse_histogram, TimePeriod, DEFAULT_EPOCH_S, DEFAULT_GAP_BIN_M, DEFAULT_SPEED_BIN_KMH,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("bad value for '{key}': '{value}' ({reason})")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{path}:{line}: expected 'key = value'")]
    MalformedLine { path: String, line: usize },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config field '{field}': {reason}")]
    Validation { field: String, reason: String },
}

/// Everything a run needs, with a documented default for every key.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    // Geometry: either explicit files or a synthetic circle.
    pub geometry: Option<PathBuf>,
    pub exits: Option<PathBuf>,
    pub ring_circumference_m: f64,
    pub ring_exits: u32,
    pub ring_vertices: u32,
    pub max_offset_m: f64,
    // Trace analysis.
    pub trace: Option<PathBuf>,
    pub min_quality: i32,
    pub epoch_s: i64,
    pub gap_bin_m: f64,
    pub speed_bin_kmh: f64,
    // Densification.
    pub period: TimePeriod,
    pub h_s: f64,
    pub penetration: f64,
    // Synthetic trace generation.
    pub synth_start: NaiveDateTime,
    pub synth_duration_s: i64,
    pub synth_report_interval_s: i64,
    /// `None` derives mean segment length / report interval.
    pub synth_speed_mps: Option<f64>,
    pub synth_trip_segments: u32,
    pub synth_count_min: f64,
    pub synth_count_max: f64,
    pub synth_counts_file: Option<PathBuf>,
    pub synth_noise_m: f64,
    // Mobility.
    pub population: f64,
    pub flows: Option<PathBuf>,
    pub vehicle_speed_mps: f64,
    pub speed_hist_file: Option<PathBuf>,
    pub trip_exits_min: u32,
    pub trip_exits_max: u32,
    // Channel.
    pub bitrate_bps: f64,
    pub r_radio_m: f64,
    pub cs_jitter_s: f64,
    pub collisions: bool,
    // Protocol.
    pub protocol: ProtocolKind,
    pub t_max_s: f64,
    pub r_max_m: f64,
    pub rnd_max_s: f64,
    pub flood_jitter_s: f64,
    // Road-side unit.
    pub rsu_period_s: f64,
    pub rsu_exit: u32,
    pub msg_size_bits: u64,
    // Run control.
    pub duration_s: f64,
    pub seed: u64,
    pub repetitions: u32,
    pub event_log: bool,
    pub mobility_dump: bool,
    pub mobility_dump_interval_s: f64,
    pub per_node_appendix: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: None,
            exits: None,
            ring_circumference_m: 10_000.0,
            ring_exits: 25,
            ring_vertices: 500,
            max_offset_m: crate::geometry::DEFAULT_MAX_OFFSET_M,
            trace: None,
            min_quality: 1,
            epoch_s: DEFAULT_EPOCH_S,
            gap_bin_m: DEFAULT_GAP_BIN_M,
            speed_bin_kmh: DEFAULT_SPEED_BIN_KMH,
            period: TimePeriod::P3,
            h_s: 30.0,
            penetration: 0.02,
            synth_start: NaiveDateTime::parse_from_str("2010-05-15T15:00:00", "%Y-%m-%dT%H:%M:%S")
                .unwrap(),
            synth_duration_s: 1800,
            synth_report_interval_s: 30,
            synth_speed_mps: None,
            synth_trip_segments: 2,
            synth_count_min: 40.0,
            synth_count_max: 60.0,
            synth_counts_file: None,
            synth_noise_m: 5.0,
            population: 150.0,
            flows: None,
            vehicle_speed_mps: 30.0,
            speed_hist_file: None,
            trip_exits_min: 1,
            trip_exits_max: 5,
            bitrate_bps: 160_000.0,
            r_radio_m: 300.0,
            cs_jitter_s: 0.001,
            collisions: true,
            protocol: ProtocolKind::DbfHopCount,
            t_max_s: 0.5,
            r_max_m: 300.0,
            rnd_max_s: 0.100,
            flood_jitter_s: 0.001,
            rsu_period_s: 1.0,
            rsu_exit: 19,
            msg_size_bits: 2000,
            duration_s: 100.0,
            seed: 1,
            repetitions: 1,
            event_log: false,
            mobility_dump: false,
            mobility_dump_interval_s: 1.0,
            per_node_appendix: true,
        }
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

macro_rules! parse_num {
    ($key:ident, $value:ident) => {
        $value
            .parse()
            .map_err(|_| bad($key, $value, "not a number"))?
    };
}

impl ScenarioConfig {
    /// Applies one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "geometry" => self.geometry = Some(PathBuf::from(value)),
            "exits" => self.exits = Some(PathBuf::from(value)),
            "ring_circumference_m" => self.ring_circumference_m = parse_num!(key, value),
            "ring_exits" => self.ring_exits = parse_num!(key, value),
            "ring_vertices" => self.ring_vertices = parse_num!(key, value),
            "max_offset_m" => self.max_offset_m = parse_num!(key, value),
            "trace" => self.trace = Some(PathBuf::from(value)),
            "min_quality" => self.min_quality = parse_num!(key, value),
            "epoch_s" => self.epoch_s = parse_num!(key, value),
            "gap_bin_m" => self.gap_bin_m = parse_num!(key, value),
            "speed_bin_kmh" => self.speed_bin_kmh = parse_num!(key, value),
            "period" => {
                self.period = TimePeriod::parse(value)
                    .ok_or_else(|| bad(key, value, "expected p1|p2|p3|p4"))?
            }
            "h_s" => self.h_s = parse_num!(key, value),
            "penetration" => self.penetration = parse_num!(key, value),
            "synth_start" => {
                self.synth_start = NaiveDateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S")
                    .map_err(|_| bad(key, value, "expected YYYY-MM-DDTHH:MM:SS"))?
            }
            "synth_duration_s" => self.synth_duration_s = parse_num!(key, value),
            "synth_report_interval_s" => self.synth_report_interval_s = parse_num!(key, value),
            "synth_speed_mps" => {
                self.synth_speed_mps = if value == "auto" {
                    None
                } else {
                    Some(parse_num!(key, value))
                }
            }
            "synth_trip_segments" => self.synth_trip_segments = parse_num!(key, value),
            "synth_count_min" => self.synth_count_min = parse_num!(key, value),
            "synth_count_max" => self.synth_count_max = parse_num!(key, value),
            "synth_counts_file" => self.synth_counts_file = Some(PathBuf::from(value)),
            "synth_noise_m" => self.synth_noise_m = parse_num!(key, value),
            "population" => self.population = parse_num!(key, value),
            "flows" => self.flows = Some(PathBuf::from(value)),
            "vehicle_speed_mps" => self.vehicle_speed_mps = parse_num!(key, value),
            "speed_hist_file" => self.speed_hist_file = Some(PathBuf::from(value)),
            "trip_exits_min" => self.trip_exits_min = parse_num!(key, value),
            "trip_exits_max" => self.trip_exits_max = parse_num!(key, value),
            "bitrate_bps" => self.bitrate_bps = parse_num!(key, value),
            "r_radio_m" => self.r_radio_m = parse_num!(key, value),
            "cs_jitter_s" => self.cs_jitter_s = parse_num!(key, value),
            "collisions" => self.collisions = parse_bool(key, value)?,
            "protocol" => {
                self.protocol = ProtocolKind::parse(value)
                    .ok_or_else(|| bad(key, value, "expected flooding|dbf|dbf_hc|rnd"))?
            }
            "t_max_s" => self.t_max_s = parse_num!(key, value),
            "r_max_m" => self.r_max_m = parse_num!(key, value),
            "rnd_max_s" => self.rnd_max_s = parse_num!(key, value),
            "flood_jitter_s" => self.flood_jitter_s = parse_num!(key, value),
            "rsu_period_s" => self.rsu_period_s = parse_num!(key, value),
            "rsu_exit" => self.rsu_exit = parse_num!(key, value),
            "msg_size_bits" => self.msg_size_bits = parse_num!(key, value),
            "duration_s" => self.duration_s = parse_num!(key, value),
            "seed" => self.seed = parse_num!(key, value),
            "repetitions" => self.repetitions = parse_num!(key, value),
            "event_log" => self.event_log = parse_bool(key, value)?,
            "mobility_dump" => self.mobility_dump = parse_bool(key, value)?,
            "mobility_dump_interval_s" => self.mobility_dump_interval_s = parse_num!(key, value),
            "per_node_appendix" => self.per_node_appendix = parse_bool(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text, origin)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::MalformedLine {
                    path: origin.to_string(),
                    line: lineno + 1,
                });
            };
            self.apply(key, value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The fully resolved config in the same `key = value` format. Unset
    /// optional paths are omitted, everything else round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(p) = &self.geometry {
            kv("geometry", p.display().to_string());
        }
        if let Some(p) = &self.exits {
            kv("exits", p.display().to_string());
        }
        kv("ring_circumference_m", format!("{}", self.ring_circumference_m));
        kv("ring_exits", format!("{}", self.ring_exits));
        kv("ring_vertices", format!("{}", self.ring_vertices));
        kv("max_offset_m", format!("{}", self.max_offset_m));
        if let Some(p) = &self.trace {
            kv("trace", p.display().to_string());
        }
        kv("min_quality", format!("{}", self.min_quality));
        kv("epoch_s", format!("{}", self.epoch_s));
        kv("gap_bin_m", format!("{}", self.gap_bin_m));
        kv("speed_bin_kmh", format!("{}", self.speed_bin_kmh));
        kv("period", self.period.to_string());
        kv("h_s", format!("{}", self.h_s));
        kv("penetration", format!("{}", self.penetration));
        kv("synth_start", self.synth_start.format("%Y-%m-%dT%H:%M:%S").to_string());
        kv("synth_duration_s", format!("{}", self.synth_duration_s));
        kv("synth_report_interval_s", format!("{}", self.synth_report_interval_s));
        kv(
            "synth_speed_mps",
            self.synth_speed_mps.map_or("auto".to_string(), |v| format!("{v}")),
        );
        kv("synth_trip_segments", format!("{}", self.synth_trip_segments));
        kv("synth_count_min", format!("{}", self.synth_count_min));
        kv("synth_count_max", format!("{}", self.synth_count_max));
        if let Some(p) = &self.synth_counts_file {
            kv("synth_counts_file", p.display().to_string());
        }
        kv("synth_noise_m", format!("{}", self.synth_noise_m));
        kv("population", format!("{}", self.population));
        if let Some(p) = &self.flows {
            kv("flows", p.display().to_string());
        }
        kv("vehicle_speed_mps", format!("{}", self.vehicle_speed_mps));
        if let Some(p) = &self.speed_hist_file {
            kv("speed_hist_file", p.display().to_string());
        }
        kv("trip_exits_min", format!("{}", self.trip_exits_min));
        kv("trip_exits_max", format!("{}", self.trip_exits_max));
        kv("bitrate_bps", format!("{}", self.bitrate_bps));
        kv("r_radio_m", format!("{}", self.r_radio_m));
        kv("cs_jitter_s", format!("{}", self.cs_jitter_s));
        kv("collisions", format!("{}", self.collisions));
        kv("protocol", self.protocol.to_string());
        kv("t_max_s", format!("{}", self.t_max_s));
        kv("r_max_m", format!("{}", self.r_max_m));
        kv("rnd_max_s", format!("{}", self.rnd_max_s));
        kv("flood_jitter_s", format!("{}", self.flood_jitter_s));
        kv("rsu_period_s", format!("{}", self.rsu_period_s));
        kv("rsu_exit", format!("{}", self.rsu_exit));
        kv("msg_size_bits", format!("{}", self.msg_size_bits));
        kv("duration_s", format!("{}", self.duration_s));
        kv("seed", format!("{}", self.seed));
        kv("repetitions", format!("{}", self.repetitions));
        kv("event_log", format!("{}", self.event_log));
        kv("mobility_dump", format!("{}", self.mobility_dump));
        kv("mobility_dump_interval_s", format!("{}", self.mobility_dump_interval_s));
        kv("per_node_appendix", format!("{}", self.per_node_appendix));
        out
    }

    pub fn channel(&self) -> ChannelConfig {
        ChannelConfig {
            bitrate_bps: self.bitrate_bps,
            r_radio_m: self.r_radio_m,
            cs_jitter_max_s: self.cs_jitter_s,
            collisions: self.collisions,
        }
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            kind: self.protocol,
            t_max_s: self.t_max_s,
            r_max_m: self.r_max_m,
            rnd_max_s: self.rnd_max_s,
            flood_jitter_s: self.flood_jitter_s,
        }
    }

    pub fn validate_run(&self) -> Result<(), ConfigError> {
        if !(self.duration_s > 0.0) {
            return Err(ConfigError::Validation {
                field: "duration_s".into(),
                reason: format!("must be positive, got {}", self.duration_s),
            });
        }
        if self.repetitions < 1 {
            return Err(ConfigError::Validation {
                field: "repetitions".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value, "expected true|false")),
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("geometry: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("geometry file: {0}")]
    GeometryFile(#[from] crate::geometry::GeoFileError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("flows file {path}: {reason}")]
    Flows { path: String, reason: String },
    #[error("speed histogram {path}: {reason}")]
    SpeedHist { path: String, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

/// Builds the ring from geometry files when configured, otherwise generates
/// the synthetic circle.
pub fn build_geometry(cfg: &ScenarioConfig) -> Result<RingGeometry, ScenarioError> {
    if let Some(gpath) = &cfg.geometry {
        let epath = cfg.exits.as_ref().ok_or_else(|| {
            ScenarioError::Invalid("'geometry' is set but 'exits' is not".into())
        })?;
        let vertices = load_vertices(gpath)?;
        let exits = load_exits(epath)?;
        return Ok(build_ring(&vertices, &exits, cfg.max_offset_m)?);
    }
    if cfg.ring_exits < 2 || cfg.ring_vertices < 3 {
        return Err(ScenarioError::Invalid(format!(
            "synthetic ring needs >= 3 vertices and >= 2 exits, got {} and {}",
            cfg.ring_vertices, cfg.ring_exits
        )));
    }
    if !cfg.ring_vertices.is_multiple_of(cfg.ring_exits) {
        return Err(ScenarioError::Invalid(format!(
            "ring_vertices ({}) must be a multiple of ring_exits ({}) for equal segments",
            cfg.ring_vertices, cfg.ring_exits
        )));
    }
    let center = GeoPoint { lat: 41.9, lon: 12.5 };
    let (vertices, exits) = synthetic_circle(
        center,
        cfg.ring_circumference_m,
        cfg.ring_vertices as usize,
        cfg.ring_exits as usize,
    );
    Ok(build_ring(&vertices, &exits, cfg.max_offset_m)?)
}

/// Derives the mobility model: targets from the flows file when set (the
/// densify output), otherwise a uniform split of `population`; speeds from
/// the histogram file when set, otherwise the fixed value.
pub fn build_mobility(cfg: &ScenarioConfig, g: &RingGeometry) -> Result<MobilityConfig, ScenarioError> {
    let s = g.segments().len();
    let (targets_cw, targets_ccw) = match &cfg.flows {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
                path: path.display().to_string(),
                source,
            })?;
            parse_flow_targets(&text, s).map_err(|reason| ScenarioError::Flows {
                path: path.display().to_string(),
                reason,
            })?
        }
        None => {
            let per = cfg.population / (2.0 * s as f64);
            (vec![per; s], vec![per; s])
        }
    };
    let speed = match &cfg.speed_hist_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let kmh = parse_histogram(&text).map_err(|reason| ScenarioError::SpeedHist {
                path: path.display().to_string(),
                reason,
            })?;
            // Analyze writes speed histograms in km/h; the sampler works in
            // m/s.
            let mut mps = crate::trace::Histogram::new(kmh.bin_width / 3.6, kmh.lower_bound / 3.6);
            for (idx, &count) in kmh.counts.iter().enumerate() {
                let (lo, hi) = kmh.bin_range(idx);
                let mid = (lo + hi) / 2.0 / 3.6;
                for _ in 0..count {
                    mps.add(mid);
                }
            }
            SpeedSampler::Empirical(mps)
        }
        None => SpeedSampler::Fixed(cfg.vehicle_speed_mps),
    };
    Ok(MobilityConfig {
        targets_cw,
        targets_ccw,
        speed,
        trip: TripSampler {
            min_exits: cfg.trip_exits_min,
            max_exits: cfg.trip_exits_max,
        },
    })
}

/// Output of one scenario repetition.
#[derive(Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub event_log: String,
    pub mobility_dump: Option<String>,
}

/// Builds and runs one repetition with the given seed.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    g: &RingGeometry,
    seed: u64,
) -> Result<RunOutput, ScenarioError> {
    cfg.validate_run()?;
    let mobility = build_mobility(cfg, g)?;
    let mut sim = Simulation::new(g.circumference(), cfg.channel(), cfg.protocol_params(), seed)?;
    let rsu_exit = g
        .exit_by_id(cfg.rsu_exit)
        .ok_or_else(|| {
            ScenarioError::Invalid(format!(
                "rsu_exit {} does not exist (ring has {} exits)",
                cfg.rsu_exit,
                g.exits().len()
            ))
        })?;
    sim.install_rsu(rsu_exit.arc, cfg.rsu_period_s, cfg.msg_size_bits, cfg.duration_s);
    sim.install_mobility(mobility, g)?;
    if cfg.mobility_dump {
        sim.enable_mobility_dump(cfg.mobility_dump_interval_s);
    }
    sim.run_until(cfg.duration_s)?;
    let report = sim.report(cfg.duration_s)?;
    Ok(RunOutput {
        report,
        event_log: sim.serialized_log(),
        mobility_dump: if cfg.mobility_dump {
            Some(sim.mobility_dump_text())
        } else {
            None
        },
    })
}
