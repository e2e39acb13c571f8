//! Scale the bundled 2% probe trace up to full-population per-segment counts
//! and compare against the bundled ground truth.
//!
//! Run with: cargo run --example densify_flows

use ringcast::densify::{estimate_all, DensifyParams};
use ringcast::geometry::{build_ring, load_exits, load_vertices, Direction};
use ringcast::trace::{
    bin_time_period, build_tracks, epoch_snapshots, match_records, parse_records, TimePeriod,
};

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let vertices = load_vertices(&root.join("ring29/geometry.csv")).expect("geometry file");
    let exits = load_exits(&root.join("ring29/exits.csv")).expect("exits file");
    let ring = build_ring(&vertices, &exits, 100.0).expect("valid ring");

    let file = std::fs::File::open(root.join("probe_trace.csv")).expect("bundled trace");
    let (records, _) = parse_records(file).expect("readable trace");
    let outcome = match_records(&ring, &records, 100.0);
    let tracks = build_tracks(&ring, &outcome.matched);
    let snapshots: Vec<_> = epoch_snapshots(&tracks, 30)
        .into_iter()
        .filter(|s| bin_time_period(s.epoch_start) == Some(TimePeriod::P3))
        .collect();

    let params = DensifyParams {
        h_s: 30.0,
        penetration: 0.02,
    };
    let table = estimate_all(&snapshots, &ring, &params).expect("valid params");

    // The bundled truth file carries the realized counts the trace was
    // generated with.
    let truth = std::fs::read_to_string(root.join("truth.csv")).expect("truth file");
    let mut truth_by_key = std::collections::BTreeMap::new();
    for line in truth.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let key = (f[0].to_string(), f[1].parse::<u32>().unwrap());
        truth_by_key.insert(key, f[3].parse::<f64>().unwrap());
    }

    println!("dir  seg  probe-signals/epoch  estimated q  true count");
    for dir in [Direction::Clockwise, Direction::Counterclockwise] {
        for est in table.estimates(dir).iter().take(6) {
            let truth = truth_by_key[&(dir.as_str().to_string(), est.segment)];
            println!(
                "{:>3}  {:>3}  {:>19.2}  {:>11.1}  {:>10.1}",
                dir, est.segment, est.n, est.q, truth
            );
        }
    }
    println!("... ({} epochs averaged)", table.epochs);
}
