//! Build a ring, project points onto it, and play with arc arithmetic.
//!
//! Run with: cargo run --example ring_geometry

use ringcast::geometry::{build_ring, synthetic_circle, ArcPosition, Direction, GeoPoint};

fn main() {
    let center = GeoPoint { lat: 41.9, lon: 12.5 };
    let (vertices, exits) = synthetic_circle(center, 29_000.0, 580, 29);
    let ring = build_ring(&vertices, &exits, 100.0).expect("valid ring");

    println!("circumference: {:.1} m", ring.circumference());
    println!("exits: {}", ring.exits().len());
    println!("segments: {}", ring.segments().len());
    let seg1 = ring.segment_by_index(1).unwrap();
    println!(
        "segment 1: exit {} -> exit {}, {:.1} m",
        seg1.start_exit, seg1.end_exit, seg1.length_m
    );

    // Project a point slightly off the ring.
    let probe = GeoPoint {
        lat: vertices[10].lat + 0.0002,
        lon: vertices[10].lon,
    };
    let (arc, offset) = ring.arc_position(probe);
    println!(
        "probe projects to arc {:.1} m (segment {}) with offset {:.1} m",
        arc.0,
        ring.segment_of(arc),
        offset
    );

    // Directed distances wrap around the ring.
    let a = ArcPosition(1_000.0);
    let b = ArcPosition(27_500.0);
    println!(
        "from 1000 m to 27500 m: clockwise {:.0} m, counterclockwise {:.0} m",
        ring.directed_arc_distance(a, b, Direction::Clockwise),
        ring.directed_arc_distance(a, b, Direction::Counterclockwise),
    );
}
