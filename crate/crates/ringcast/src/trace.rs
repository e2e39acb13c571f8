//! Probe-vehicle trace pipeline: parse GPS records, filter by fix quality,
//! map-match onto the ring, classify travel direction, cut the time axis into
//! epochs and daily periods, and derive inter-vehicle gap and speed
//! distributions.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};

use chrono::{NaiveDateTime, Timelike};
use thiserror::Error;

use crate::geometry::{ArcPosition, Direction, RingGeometry};

/// Expected header of a trace file.
pub const TRACE_HEADER: &str = "record_id,vehicle_id,timestamp,lat,lon,speed_kmh,quality";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Default epoch length: probes report once per 30 s window.
pub const DEFAULT_EPOCH_S: i64 = 30;

/// Default histogram bin widths.
pub const DEFAULT_GAP_BIN_M: f64 = 10.0;
pub const DEFAULT_SPEED_BIN_KMH: f64 = 5.0;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("unreadable trace stream: {0}")]
    UnreadableStream(#[from] std::io::Error),
    #[error("missing or malformed trace header; expected '{TRACE_HEADER}'")]
    BadHeader,
}

/// One raw probe report, as read from a trace file.
#[derive(Debug, Clone)]
pub struct GpsRecord {
    pub record_id: u64,
    pub vehicle_id: u64,
    pub t: NaiveDateTime,
    pub lat: f64,
    pub lon: f64,
    pub speed_kmh: f64,
    pub quality: i32,
}

/// A record projected onto the ring.
#[derive(Debug, Clone)]
pub struct MatchedRecord {
    pub vehicle_id: u64,
    pub t: NaiveDateTime,
    pub arc: ArcPosition,
    pub offset_m: f64,
    pub speed_mps: f64,
}

/// All matched records of one vehicle, sorted by time, plus the direction
/// assigned by majority vote.
#[derive(Debug, Clone)]
pub struct VehicleTrack {
    pub vehicle_id: u64,
    pub records: Vec<MatchedRecord>,
    pub direction: Option<Direction>,
}

/// Four-hour analysis windows of the civil day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimePeriod {
    /// 07:00-11:00
    P1,
    /// 11:00-15:00
    P2,
    /// 15:00-19:00
    P3,
    /// 19:00-23:00
    P4,
}

impl TimePeriod {
    pub const ALL: [TimePeriod; 4] = [TimePeriod::P1, TimePeriod::P2, TimePeriod::P3, TimePeriod::P4];

    pub fn as_str(self) -> &'static str {
        match self {
            TimePeriod::P1 => "p1",
            TimePeriod::P2 => "p2",
            TimePeriod::P3 => "p3",
            TimePeriod::P4 => "p4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Some(TimePeriod::P1),
            "p2" => Some(TimePeriod::P2),
            "p3" => Some(TimePeriod::P3),
            "p4" => Some(TimePeriod::P4),
            _ => None,
        }
    }
}

impl fmt::Display for TimePeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open local-hour bins: 03:00 is outside every window, 19:00 opens P4.
pub fn bin_time_period(t: NaiveDateTime) -> Option<TimePeriod> {
    match t.hour() {
        7..=10 => Some(TimePeriod::P1),
        11..=14 => Some(TimePeriod::P2),
        15..=18 => Some(TimePeriod::P3),
        19..=22 => Some(TimePeriod::P4),
        _ => None,
    }
}

/// One vehicle's state inside an epoch snapshot.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotEntry {
    pub vehicle_id: u64,
    pub arc: ArcPosition,
    pub speed_mps: f64,
}

/// Positions of all direction-classified vehicles within one epoch window.
/// Each vehicle appears at most once; the latest record in the epoch wins.
#[derive(Debug, Clone)]
pub struct EpochSnapshot {
    pub epoch_start: NaiveDateTime,
    pub clockwise: Vec<SnapshotEntry>,
    pub counterclockwise: Vec<SnapshotEntry>,
}

impl EpochSnapshot {
    pub fn entries(&self, dir: Direction) -> &[SnapshotEntry] {
        match dir {
            Direction::Clockwise => &self.clockwise,
            Direction::Counterclockwise => &self.counterclockwise,
        }
    }
}

/// Fixed-width histogram starting at a lower bound; bins grow on demand.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub bin_width: f64,
    pub lower_bound: f64,
    pub counts: Vec<u64>,
    pub total: u64,
    pub sum: f64,
}

impl Histogram {
    pub fn new(bin_width: f64, lower_bound: f64) -> Self {
        assert!(bin_width > 0.0);
        Self {
            bin_width,
            lower_bound,
            counts: Vec::new(),
            total: 0,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, value: f64) {
        let idx = (((value - self.lower_bound) / self.bin_width).floor()).max(0.0) as usize;
        if idx >= self.counts.len() {
            self.counts.resize(idx + 1, 0);
        }
        self.counts[idx] += 1;
        self.total += 1;
        self.sum += value;
    }

    pub fn mean(&self) -> Option<f64> {
        if self.total == 0 {
            None
        } else {
            Some(self.sum / self.total as f64)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// `[lo, hi)` value range of bin `idx`.
    pub fn bin_range(&self, idx: usize) -> (f64, f64) {
        let lo = self.lower_bound + idx as f64 * self.bin_width;
        (lo, lo + self.bin_width)
    }
}

/// Histogram file header.
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";

/// Serializes a histogram as `bin_lo,bin_hi,count` rows (zero bins included).
pub fn histogram_to_text(h: &Histogram) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for (idx, &count) in h.counts.iter().enumerate() {
        let (lo, hi) = h.bin_range(idx);
        let _ = writeln!(out, "{lo:.3},{hi:.3},{count}");
    }
    out
}

/// Reads a histogram back; bins must be contiguous and equally wide.
pub fn parse_histogram(text: &str) -> Result<Histogram, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HISTOGRAM_HEADER => {}
        _ => return Err(format!("histogram file must start with '{HISTOGRAM_HEADER}'")),
    }
    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(format!("line {}: expected 3 fields", lineno + 1));
        }
        let lo: f64 = fields[0].parse().map_err(|_| format!("line {}: bad bin_lo", lineno + 1))?;
        let hi: f64 = fields[1].parse().map_err(|_| format!("line {}: bad bin_hi", lineno + 1))?;
        let count: u64 = fields[2].parse().map_err(|_| format!("line {}: bad count", lineno + 1))?;
        rows.push((lo, hi, count));
    }
    let Some(&(first_lo, first_hi, _)) = rows.first() else {
        return Err("histogram file has no bins".into());
    };
    let width = first_hi - first_lo;
    if !(width > 0.0) {
        return Err("histogram bins must have positive width".into());
    }
    let mut h = Histogram::new(width, first_lo);
    for (i, &(lo, _, count)) in rows.iter().enumerate() {
        let expected = first_lo + i as f64 * width;
        if (lo - expected).abs() > 1e-6 * width.max(1.0) {
            return Err(format!("bins are not contiguous at row {}", i + 1));
        }
        for _ in 0..count {
            h.add(lo + width / 2.0);
        }
    }
    Ok(h)
}

/// Per-period rollup of the trace analysis.
#[derive(Debug, Clone)]
pub struct PeriodSummary {
    pub period: TimePeriod,
    pub vehicle_count: u64,
    pub record_count: u64,
    pub mean_speed_kmh: Option<f64>,
    pub share_gap_le_50m: Option<f64>,
    pub gap_histogram: Histogram,
    pub speed_histogram: Histogram,
}

/// Parses a trace stream. Well-formed rows become records; malformed rows
/// (bad field counts, unparseable numbers or timestamps, negative speeds,
/// duplicate record ids) are counted and skipped without aborting.
pub fn parse_records<R: Read>(reader: R) -> Result<(Vec<GpsRecord>, u64), TraceError> {
    let mut lines = BufReader::new(reader).lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                break t.to_string();
            }
            None => return Err(TraceError::BadHeader),
        }
    };
    if header != TRACE_HEADER {
        return Err(TraceError::BadHeader);
    }

    let mut records = Vec::new();
    let mut rejects = 0u64;
    let mut seen_ids = std::collections::HashSet::new();
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_row(trimmed) {
            Some(rec) if seen_ids.insert(rec.record_id) => records.push(rec),
            _ => rejects += 1,
        }
    }
    Ok((records, rejects))
}

fn parse_row(line: &str) -> Option<GpsRecord> {
    let mut fields = line.split(',').map(str::trim);
    let record_id = fields.next()?.parse().ok()?;
    let vehicle_id = fields.next()?.parse().ok()?;
    let t = NaiveDateTime::parse_from_str(fields.next()?, TIMESTAMP_FORMAT).ok()?;
    let lat: f64 = fields.next()?.parse().ok()?;
    let lon: f64 = fields.next()?.parse().ok()?;
    let speed_kmh: f64 = fields.next()?.parse().ok()?;
    let quality: i32 = fields.next()?.parse().ok()?;
    if fields.next().is_some() || !speed_kmh.is_finite() || speed_kmh < 0.0 || !lat.is_finite() || !lon.is_finite() {
        return None;
    }
    Some(GpsRecord {
        record_id,
        vehicle_id,
        t,
        lat,
        lon,
        speed_kmh,
        quality,
    })
}

/// Keeps records with `quality >= min_quality`.
pub fn filter_quality(records: Vec<GpsRecord>, min_quality: i32) -> Vec<GpsRecord> {
    records.into_iter().filter(|r| r.quality >= min_quality).collect()
}

/// Outcome of map matching: the surviving records plus a tally of records
/// that fell farther than `max_offset_m` from the ring.
#[derive(Debug)]
pub struct MatchOutcome {
    pub matched: Vec<MatchedRecord>,
    pub dropped_off_ring: u64,
}

/// Projects records onto the ring, dropping those beyond `max_offset_m` and
/// converting speeds from km/h to m/s.
pub fn match_records(g: &RingGeometry, records: &[GpsRecord], max_offset_m: f64) -> MatchOutcome {
    let mut matched = Vec::with_capacity(records.len());
    let mut dropped = 0u64;
    for r in records {
        let (arc, offset) = g.arc_position(crate::geometry::GeoPoint { lat: r.lat, lon: r.lon });
        if offset > max_offset_m {
            dropped += 1;
            continue;
        }
        matched.push(MatchedRecord {
            vehicle_id: r.vehicle_id,
            t: r.t,
            arc,
            offset_m: offset,
            speed_mps: r.speed_kmh / 3.6,
        });
    }
    MatchOutcome {
        matched,
        dropped_off_ring: dropped,
    }
}

/// Groups matched records into per-vehicle tracks sorted by time and assigns
/// a direction to each. Records with identical timestamps for one vehicle
/// collapse to the last occurrence.
pub fn build_tracks(g: &RingGeometry, matched: &[MatchedRecord]) -> Vec<VehicleTrack> {
    let mut by_vehicle: BTreeMap<u64, Vec<MatchedRecord>> = BTreeMap::new();
    for r in matched {
        by_vehicle.entry(r.vehicle_id).or_default().push(r.clone());
    }
    by_vehicle
        .into_iter()
        .map(|(vehicle_id, mut records)| {
            records.sort_by_key(|r| r.t);
            records.dedup_by(|later, earlier| {
                if later.t == earlier.t {
                    // Keep the later file occurrence, which `dedup_by` hands
                    // us as the first argument.
                    std::mem::swap(later, earlier);
                    true
                } else {
                    false
                }
            });
            let mut track = VehicleTrack {
                vehicle_id,
                records,
                direction: None,
            };
            track.direction = classify_direction(&track, g);
            track
        })
        .collect()
}

/// Majority vote over the signs of consecutive shorter-way arc deltas.
/// Returns `None` (unknown) for single-record tracks and exact ties.
pub fn classify_direction(track: &VehicleTrack, g: &RingGeometry) -> Option<Direction> {
    if track.records.len() < 2 {
        return None;
    }
    let mut positive = 0u32;
    let mut negative = 0u32;
    for pair in track.records.windows(2) {
        let delta = g.signed_arc_delta(pair[0].arc, pair[1].arc);
        if delta > 0.0 {
            positive += 1;
        } else if delta < 0.0 {
            negative += 1;
        }
    }
    match positive.cmp(&negative) {
        std::cmp::Ordering::Greater => Some(Direction::Clockwise),
        std::cmp::Ordering::Less => Some(Direction::Counterclockwise),
        std::cmp::Ordering::Equal => None,
    }
}

/// Cuts the time axis into `[k*epoch, (k+1)*epoch)` bins anchored at the Unix
/// epoch and emits one snapshot per non-empty bin. Within a bin each vehicle
/// keeps only its latest record; vehicles without a known direction are
/// excluded.
pub fn epoch_snapshots(tracks: &[VehicleTrack], epoch_s: i64) -> Vec<EpochSnapshot> {
    assert!(epoch_s > 0);
    // (epoch index, direction, vehicle) -> latest record in the bin.
    let mut cells: BTreeMap<(i64, u64), (Direction, MatchedRecord)> = BTreeMap::new();
    for track in tracks {
        let Some(dir) = track.direction else { continue };
        for r in &track.records {
            let k = r.t.and_utc().timestamp().div_euclid(epoch_s);
            match cells.entry((k, track.vehicle_id)) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert((dir, r.clone()));
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    if r.t >= e.get().1.t {
                        e.insert((dir, r.clone()));
                    }
                }
            }
        }
    }

    let mut snapshots: BTreeMap<i64, EpochSnapshot> = BTreeMap::new();
    for ((k, vehicle_id), (dir, rec)) in cells {
        let snap = snapshots.entry(k).or_insert_with(|| EpochSnapshot {
            epoch_start: chrono::DateTime::from_timestamp(k * epoch_s, 0)
                .expect("valid epoch timestamp")
                .naive_utc(),
            clockwise: Vec::new(),
            counterclockwise: Vec::new(),
        });
        let entry = SnapshotEntry {
            vehicle_id,
            arc: rec.arc,
            speed_mps: rec.speed_mps,
        };
        match dir {
            Direction::Clockwise => snap.clockwise.push(entry),
            Direction::Counterclockwise => snap.counterclockwise.push(entry),
        }
    }
    snapshots.into_values().collect()
}

/// Gap from each vehicle to the nearest other vehicle ahead of it in the
/// travel direction. Returned in the same order as the snapshot's entries for
/// `dir`. A lone vehicle yields no gaps; with n >= 2 the gaps partition the
/// ring, so they sum to the circumference.
pub fn inter_vehicle_gaps(snapshot: &EpochSnapshot, dir: Direction, g: &RingGeometry) -> Vec<f64> {
    let entries = snapshot.entries(dir);
    if entries.len() < 2 {
        return Vec::new();
    }
    // Sort entry indices by arc so the nearest-ahead neighbor is the cyclic
    // successor (clockwise) or predecessor (counterclockwise).
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        entries[a]
            .arc
            .0
            .total_cmp(&entries[b].arc.0)
            .then(entries[a].vehicle_id.cmp(&entries[b].vehicle_id))
    });
    let n = order.len();
    let mut gaps = vec![0.0; entries.len()];
    for (rank, &idx) in order.iter().enumerate() {
        let ahead = match dir {
            Direction::Clockwise => order[(rank + 1) % n],
            Direction::Counterclockwise => order[(rank + n - 1) % n],
        };
        gaps[idx] = g.directed_arc_distance(entries[idx].arc, entries[ahead].arc, dir);
    }
    gaps
}

/// Aggregates snapshots into one summary per time period. Vehicle counts are
/// distinct matched vehicle ids regardless of direction; speed statistics run
/// over all matched records in the period.
pub fn summarize_periods(
    matched: &[MatchedRecord],
    snapshots: &[EpochSnapshot],
    g: &RingGeometry,
    gap_bin_m: f64,
    speed_bin_kmh: f64,
) -> Vec<PeriodSummary> {
    let mut summaries: BTreeMap<TimePeriod, PeriodSummary> = TimePeriod::ALL
        .iter()
        .map(|&p| {
            (
                p,
                PeriodSummary {
                    period: p,
                    vehicle_count: 0,
                    record_count: 0,
                    mean_speed_kmh: None,
                    share_gap_le_50m: None,
                    gap_histogram: Histogram::new(gap_bin_m, 0.0),
                    speed_histogram: Histogram::new(speed_bin_kmh, 0.0),
                },
            )
        })
        .collect();

    let mut vehicles: BTreeMap<TimePeriod, std::collections::BTreeSet<u64>> = BTreeMap::new();
    for r in matched {
        let Some(period) = bin_time_period(r.t) else { continue };
        let s = summaries.get_mut(&period).unwrap();
        s.record_count += 1;
        s.speed_histogram.add(r.speed_mps * 3.6);
        vehicles.entry(period).or_default().insert(r.vehicle_id);
    }
    for (period, set) in vehicles {
        summaries.get_mut(&period).unwrap().vehicle_count = set.len() as u64;
    }

    let mut gaps_le_50: BTreeMap<TimePeriod, u64> = BTreeMap::new();
    for snap in snapshots {
        let Some(period) = bin_time_period(snap.epoch_start) else { continue };
        let s = summaries.get_mut(&period).unwrap();
        for dir in [Direction::Clockwise, Direction::Counterclockwise] {
            for gap in inter_vehicle_gaps(snap, dir, g) {
                s.gap_histogram.add(gap);
                if gap <= 50.0 {
                    *gaps_le_50.entry(period).or_default() += 1;
                }
            }
        }
    }

    summaries
        .into_values()
        .map(|mut s| {
            s.mean_speed_kmh = s.speed_histogram.mean();
            if !s.gap_histogram.is_empty() {
                let le = gaps_le_50.get(&s.period).copied().unwrap_or(0);
                s.share_gap_le_50m = Some(le as f64 / s.gap_histogram.total as f64);
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_ring, synthetic_circle, GeoPoint};

    fn test_ring() -> RingGeometry {
        let center = GeoPoint { lat: 41.9, lon: 12.5 };
        let (v, e) = synthetic_circle(center, 10_000.0, 200, 10);
        build_ring(&v, &e, 100.0).unwrap()
    }

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    #[test]
    fn parse_well_formed_row() {
        let data = "record_id,vehicle_id,timestamp,lat,lon,speed_kmh,quality\n\
                    1,42,2010-05-15T08:30:00,41.9,12.5,64.4,3\n";
        let (records, rejects) = parse_records(data.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(rejects, 0);
        let r = &records[0];
        assert_eq!(r.record_id, 1);
        assert_eq!(r.vehicle_id, 42);
        assert_eq!(r.speed_kmh, 64.4);
        assert_eq!(r.quality, 3);
    }

    #[test]
    fn parse_rejects_bad_rows_without_aborting() {
        let data = "record_id,vehicle_id,timestamp,lat,lon,speed_kmh,quality\n\
                    1,42,2010-05-15T08:30:00,41.9,12.5,not-a-speed,3\n\
                    2,42,2010-05-15T08:30:30,41.9,12.5,50.0,3\n\
                    2,42,2010-05-15T08:31:00,41.9,12.5,50.0,3\n\
                    3,42,bad-timestamp,41.9,12.5,50.0,3\n";
        let (records, rejects) = parse_records(data.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(rejects, 3); // bad speed, duplicate id, bad timestamp
    }

    #[test]
    fn parse_header_only_is_empty() {
        let data = "record_id,vehicle_id,timestamp,lat,lon,speed_kmh,quality\n";
        let (records, rejects) = parse_records(data.as_bytes()).unwrap();
        assert!(records.is_empty());
        assert_eq!(rejects, 0);
    }

    #[test]
    fn parse_requires_header() {
        let data = "1,42,2010-05-15T08:30:00,41.9,12.5,64.4,3\n";
        assert!(matches!(parse_records(data.as_bytes()), Err(TraceError::BadHeader)));
    }

    fn record(id: u64, quality: i32) -> GpsRecord {
        GpsRecord {
            record_id: id,
            vehicle_id: 1,
            t: ts("2010-05-15T08:30:00"),
            lat: 41.9,
            lon: 12.5,
            speed_kmh: 50.0,
            quality,
        }
    }

    #[test]
    fn quality_filter() {
        let records = vec![record(1, 1), record(2, 3), record(3, 5)];
        assert_eq!(filter_quality(records.clone(), 0).len(), 3);
        let surviving = filter_quality(records.clone(), 3);
        assert_eq!(surviving.len(), 2);
        assert!(surviving.iter().all(|r| r.quality >= 3));
        assert!(filter_quality(records, 9).is_empty());
    }

    #[test]
    fn matching_converts_speed_and_drops_outliers() {
        let g = test_ring();
        let on_ring = g.point_at_arc(ArcPosition(1_234.0));
        let records = vec![
            GpsRecord {
                record_id: 1,
                vehicle_id: 7,
                t: ts("2010-05-15T08:30:00"),
                lat: on_ring.lat,
                lon: on_ring.lon,
                speed_kmh: 72.0,
                quality: 3,
            },
            GpsRecord {
                record_id: 2,
                vehicle_id: 7,
                t: ts("2010-05-15T08:30:30"),
                lat: 45.0, // hundreds of km away
                lon: 12.5,
                speed_kmh: 72.0,
                quality: 3,
            },
        ];
        let outcome = match_records(&g, &records, 100.0);
        assert_eq!(outcome.matched.len(), 1);
        assert_eq!(outcome.dropped_off_ring, 1);
        assert!((outcome.matched[0].speed_mps - 20.0).abs() < 1e-12);
        assert!(outcome.matched[0].offset_m < 1.0);
    }

    fn track_from_arcs(_g: &RingGeometry, arcs: &[f64]) -> VehicleTrack {
        let records = arcs
            .iter()
            .enumerate()
            .map(|(i, &a)| MatchedRecord {
                vehicle_id: 1,
                t: ts("2010-05-15T08:30:00") + chrono::Duration::seconds(30 * i as i64),
                arc: ArcPosition(a),
                offset_m: 0.0,
                speed_mps: 20.0,
            })
            .collect();
        VehicleTrack {
            vehicle_id: 1,
            records,
            direction: None,
        }
    }

    #[test]
    fn direction_majority_vote() {
        let g = test_ring();
        let c = g.circumference();
        let f = c / 400.0;
        let fw = track_from_arcs(&g, &[100.0 * f, 200.0 * f, 300.0 * f]);
        assert_eq!(classify_direction(&fw, &g), Some(Direction::Clockwise));
        let bw = track_from_arcs(&g, &[300.0 * f, 200.0 * f, 100.0 * f]);
        assert_eq!(classify_direction(&bw, &g), Some(Direction::Counterclockwise));
        let single = track_from_arcs(&g, &[100.0]);
        assert_eq!(classify_direction(&single, &g), None);
    }

    #[test]
    fn direction_survives_one_glitch() {
        let g = test_ring();
        let fw = track_from_arcs(&g, &[100.0, 300.0, 250.0, 500.0, 700.0]);
        assert_eq!(classify_direction(&fw, &g), Some(Direction::Clockwise));
    }

    #[test]
    fn direction_flips_when_track_reversed() {
        let g = test_ring();
        let arcs = [120.0, 310.0, 560.0, 790.0];
        let fw = track_from_arcs(&g, &arcs);
        let mut rev = arcs;
        rev.reverse();
        let bw = track_from_arcs(&g, &rev);
        let a = classify_direction(&fw, &g);
        let b = classify_direction(&bw, &g);
        assert_eq!(a, Some(Direction::Clockwise));
        assert_eq!(b, Some(Direction::Counterclockwise));
    }

    #[test]
    fn period_bins() {
        assert_eq!(bin_time_period(ts("2010-05-15T08:30:00")), Some(TimePeriod::P1));
        assert_eq!(bin_time_period(ts("2010-05-15T07:00:00")), Some(TimePeriod::P1));
        assert_eq!(bin_time_period(ts("2010-05-15T11:00:00")), Some(TimePeriod::P2));
        assert_eq!(bin_time_period(ts("2010-05-15T15:00:00")), Some(TimePeriod::P3));
        assert_eq!(bin_time_period(ts("2010-05-15T19:00:00")), Some(TimePeriod::P4));
        assert_eq!(bin_time_period(ts("2010-05-15T23:00:00")), None);
        assert_eq!(bin_time_period(ts("2010-05-15T03:00:00")), None);
    }

    #[test]
    fn epoch_dedupe_keeps_latest() {
        let g = test_ring();
        let mut track = track_from_arcs(&g, &[100.0, 160.0, 220.0]);
        // Two records inside the same epoch window; the later one must win.
        track.records[1].t = track.records[0].t + chrono::Duration::seconds(10);
        track.records[2].t = track.records[0].t + chrono::Duration::seconds(40);
        track.direction = Some(Direction::Clockwise);
        let snaps = epoch_snapshots(&[track], 30);
        assert_eq!(snaps.len(), 2);
        assert_eq!(snaps[0].clockwise.len(), 1);
        assert!((snaps[0].clockwise[0].arc.0 - 160.0).abs() < 1e-9);
        assert!((snaps[1].clockwise[0].arc.0 - 220.0).abs() < 1e-9);
    }

    #[test]
    fn epoch_boundary_splits_records() {
        let g = test_ring();
        let mut track = track_from_arcs(&g, &[100.0, 160.0]);
        track.records[0].t = ts("2010-05-15T08:00:00");
        track.records[1].t = ts("2010-05-15T08:00:30");
        track.direction = Some(Direction::Clockwise);
        let snaps = epoch_snapshots(&[track], 30);
        assert_eq!(snaps.len(), 2);
    }

    #[test]
    fn unknown_direction_vehicles_excluded_from_snapshots() {
        let g = test_ring();
        let track = track_from_arcs(&g, &[100.0]);
        let snaps = epoch_snapshots(&[track], 30);
        assert!(snaps.is_empty());
    }

    fn snapshot(_g: &RingGeometry, dir: Direction, arcs: &[f64]) -> EpochSnapshot {
        let entries: Vec<SnapshotEntry> = arcs
            .iter()
            .enumerate()
            .map(|(i, &a)| SnapshotEntry {
                vehicle_id: i as u64 + 1,
                arc: ArcPosition(a),
                speed_mps: 20.0,
            })
            .collect();
        let (cw, ccw) = match dir {
            Direction::Clockwise => (entries, Vec::new()),
            Direction::Counterclockwise => (Vec::new(), entries),
        };
        EpochSnapshot {
            epoch_start: ts("2010-05-15T08:00:00"),
            clockwise: cw,
            counterclockwise: ccw,
        }
    }

    /// Brute-force nearest-ahead oracle: min directed distance to any other.
    fn oracle_gaps(entries: &[SnapshotEntry], dir: Direction, g: &RingGeometry) -> Vec<f64> {
        entries
            .iter()
            .map(|v| {
                entries
                    .iter()
                    .filter(|w| w.vehicle_id != v.vehicle_id)
                    .map(|w| g.directed_arc_distance(v.arc, w.arc, dir))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn gaps_single_vehicle_empty() {
        let g = test_ring();
        let snap = snapshot(&g, Direction::Clockwise, &[100.0]);
        assert!(inter_vehicle_gaps(&snap, Direction::Clockwise, &g).is_empty());
    }

    #[test]
    fn gaps_two_vehicles_match_hand_values() {
        let g = test_ring();
        let c = g.circumference();
        let f = c / 400.0;
        let snap = snapshot(&g, Direction::Clockwise, &[100.0 * f, 350.0 * f]);
        let gaps = inter_vehicle_gaps(&snap, Direction::Clockwise, &g);
        assert!((gaps[0] - 250.0 * f).abs() < 1e-9);
        assert!((gaps[1] - 150.0 * f).abs() < 1e-9);
    }

    #[test]
    fn gaps_match_brute_force_and_sum_to_c() {
        use rand::{Rng, SeedableRng};
        let g = test_ring();
        let c = g.circumference();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(2..40);
            let arcs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..c)).collect();
            for dir in [Direction::Clockwise, Direction::Counterclockwise] {
                let snap = snapshot(&g, dir, &arcs);
                let gaps = inter_vehicle_gaps(&snap, dir, &g);
                let oracle = oracle_gaps(snap.entries(dir), dir, &g);
                assert_eq!(gaps.len(), oracle.len());
                for (a, b) in gaps.iter().zip(&oracle) {
                    assert_eq!(a.to_bits(), b.to_bits(), "gap mismatch {a} vs {b}");
                }
                let total: f64 = gaps.iter().sum();
                assert!((total - c).abs() / c < 1e-6, "sum {total} vs C {c}");
            }
        }
    }

    #[test]
    fn summary_constant_speed_and_gap_share() {
        let g = test_ring();
        let mut matched = Vec::new();
        for i in 0..4 {
            matched.push(MatchedRecord {
                vehicle_id: i + 1,
                t: ts("2010-05-15T08:00:10"),
                arc: ArcPosition(100.0 * (i as f64 + 1.0)),
                offset_m: 0.0,
                speed_mps: 64.4 / 3.6,
            });
        }
        // Gaps {40, 60} on one snapshot pair.
        let snap = {
            let mut s = snapshot(&g, Direction::Clockwise, &[0.0, 40.0]);
            s.epoch_start = ts("2010-05-15T08:00:00");
            // Second direction entry set so the ring closes at 40 + (C-40).
            s
        };
        let summaries = summarize_periods(&matched, &[snap], &g, 10.0, 5.0);
        let p1 = summaries.iter().find(|s| s.period == TimePeriod::P1).unwrap();
        assert_eq!(p1.vehicle_count, 4);
        assert!((p1.mean_speed_kmh.unwrap() - 64.4).abs() < 1e-9);
        // Two gaps: 40 and C-40 (~9960): one of two is <= 50 m.
        assert!((p1.share_gap_le_50m.unwrap() - 0.5).abs() < 1e-12);
        let p2 = summaries.iter().find(|s| s.period == TimePeriod::P2).unwrap();
        assert_eq!(p2.vehicle_count, 0);
        assert!(p2.mean_speed_kmh.is_none());
        assert!(p2.share_gap_le_50m.is_none());
    }

    #[test]
    fn histogram_round_trip_preserves_counts() {
        let mut h = Histogram::new(5.0, 0.0);
        for v in [2.0, 7.0, 7.5, 23.0] {
            h.add(v);
        }
        let text = histogram_to_text(&h);
        let back = parse_histogram(&text).unwrap();
        assert_eq!(back.counts, h.counts);
        assert_eq!(back.bin_width, h.bin_width);
        assert_eq!(back.total, h.total);
        assert!(parse_histogram("nope").is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quality_filter_is_monotone(qualities in proptest::collection::vec(0i32..10, 0..50), threshold in 0i32..10) {
                let records: Vec<GpsRecord> = qualities.iter().enumerate().map(|(i, &q)| record_with(i as u64, q)).collect();
                let low = filter_quality(records.clone(), threshold);
                let high = filter_quality(records, threshold + 1);
                prop_assert!(high.len() <= low.len());
            }

            #[test]
            fn gap_sum_is_circumference(arcs in proptest::collection::vec(0.0f64..1.0, 2..30)) {
                let g = test_ring();
                let c = g.circumference();
                let scaled: Vec<f64> = arcs.iter().map(|a| a * c).collect();
                let snap = snapshot(&g, Direction::Clockwise, &scaled);
                let gaps = inter_vehicle_gaps(&snap, Direction::Clockwise, &g);
                let total: f64 = gaps.iter().sum();
                prop_assert!((total - c).abs() / c < 1e-6);
            }
        }

        fn record_with(id: u64, quality: i32) -> GpsRecord {
            GpsRecord {
                record_id: id,
                vehicle_id: id,
                t: ts("2010-05-15T08:30:00"),
                lat: 41.9,
                lon: 12.5,
                speed_kmh: 50.0,
                quality,
            }
        }
    }
}
