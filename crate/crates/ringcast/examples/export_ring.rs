//! Write the bundled synthetic ring to geometry/exits files.
//!
//! This is how `fixtures/ring29/` was produced:
//!
//!   cargo run --example export_ring -- fixtures/ring29
//!
//! Run with: cargo run --example export_ring -- <output-dir>

use std::fmt::Write as _;
use std::path::PathBuf;

use ringcast::geometry::{build_ring, synthetic_circle, GeoPoint};

fn main() {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "ring_out".into()).into();
    std::fs::create_dir_all(&out).expect("create output dir");

    let center = GeoPoint { lat: 41.9, lon: 12.5 };
    let (vertices, exits) = synthetic_circle(center, 29_000.0, 580, 29);
    let ring = build_ring(&vertices, &exits, 100.0).expect("valid ring");

    let mut gtext = String::from("# synthetic 29-segment ring, one lat,lon vertex per line\n");
    for v in &vertices {
        let _ = writeln!(gtext, "{:.8},{:.8}", v.lat, v.lon);
    }
    let mut etext = String::from("# label,lat,lon\n");
    for (label, p) in &exits {
        let _ = writeln!(etext, "{label},{:.8},{:.8}", p.lat, p.lon);
    }
    std::fs::write(out.join("geometry.csv"), gtext).expect("write geometry");
    std::fs::write(out.join("exits.csv"), etext).expect("write exits");
    println!(
        "wrote {} vertices and {} exits (C = {:.1} m) to {}",
        vertices.len(),
        exits.len(),
        ring.circumference(),
        out.display()
    );
}
