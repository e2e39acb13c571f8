//! Run the trace pipeline on the bundled probe trace: parse, match, classify,
//! bin into periods, and print the per-period summaries.
//!
//! Run with: cargo run --example analyze_trace

use ringcast::geometry::{build_ring, load_exits, load_vertices};
use ringcast::trace::{
    build_tracks, epoch_snapshots, filter_quality, match_records, parse_records, summarize_periods,
};

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let vertices = load_vertices(&root.join("ring29/geometry.csv")).expect("geometry file");
    let exits = load_exits(&root.join("ring29/exits.csv")).expect("exits file");
    let ring = build_ring(&vertices, &exits, 100.0).expect("valid ring");

    let file = std::fs::File::open(root.join("probe_trace.csv")).expect("bundled trace");
    let (records, rejects) = parse_records(file).expect("readable trace");
    println!("parsed {} records ({} rejected)", records.len(), rejects);

    let records = filter_quality(records, 1);
    let outcome = match_records(&ring, &records, 100.0);
    println!(
        "matched {} records ({} off ring)",
        outcome.matched.len(),
        outcome.dropped_off_ring
    );

    let tracks = build_tracks(&ring, &outcome.matched);
    let classified = tracks.iter().filter(|t| t.direction.is_some()).count();
    println!("{} vehicles, {} with a known direction", tracks.len(), classified);

    let snapshots = epoch_snapshots(&tracks, 30);
    let summaries = summarize_periods(&outcome.matched, &snapshots, &ring, 10.0, 5.0);
    println!("\nperiod  vehicles  records  mean km/h  gaps<=50m");
    for s in &summaries {
        let speed = s.mean_speed_kmh.map_or("-".to_string(), |v| format!("{v:.1}"));
        let share = s.share_gap_le_50m.map_or("-".to_string(), |v| format!("{:.1}%", v * 100.0));
        println!(
            "{:>6}  {:>8}  {:>7}  {:>9}  {:>9}",
            s.period.to_string(),
            s.vehicle_count,
            s.record_count,
            speed,
            share
        );
    }
}
