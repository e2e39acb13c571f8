//! The classic hidden-terminal picture: two senders out of each other's
//! range, one victim in range of both. Carrier sensing cannot help, the
//! frames overlap at the victim, and the reception is destroyed.
//!
//! Run with: cargo run --example hidden_terminal

use ringcast::geometry::ArcPosition;
use ringcast::protocols::{ProtocolKind, ProtocolParams};
use ringcast::sim::{ChannelConfig, LogKind, Simulation};

fn main() {
    // A very large ring makes chord distance effectively linear distance.
    let mut sim = Simulation::new(
        1_000_000.0,
        ChannelConfig::default(),
        ProtocolParams {
            kind: ProtocolKind::Flooding,
            ..ProtocolParams::default()
        },
        1,
    )
    .expect("valid sim");

    // The RSU doubles as the message source; senders A and B pick the
    // message up far apart and re-broadcast it into the victim.
    sim.install_rsu(ArcPosition(250.0), 1.0, 2000, 1.0);
    let a = sim.add_static_node(ArcPosition(0.0));
    let b = sim.add_static_node(ArcPosition(500.0));
    let victim = sim.add_static_node(ArcPosition(250.0));
    println!("A at 0 m, B at 500 m (out of each other's 300 m range), victim at 250 m");

    sim.run_until(5.0).expect("clean run");

    println!("collisions counted: {}", sim.metrics().collisions());
    for e in sim.log_entries() {
        match e.kind {
            LogKind::TxStart => println!(
                "t={:.6}s node {} transmits (hop {})",
                e.t,
                e.node.unwrap().0,
                e.hop.unwrap()
            ),
            LogKind::Collision => println!(
                "t={:.6}s node {} lost a reception to an overlap episode",
                e.t,
                e.node.unwrap().0
            ),
            _ => {}
        }
    }
    let victim_rx: Vec<u32> = sim
        .log_entries()
        .iter()
        .filter(|e| e.kind == LogKind::Rx && e.node == Some(victim))
        .map(|e| e.hop.unwrap())
        .collect();
    println!(
        "victim's clean receptions (by hop): {victim_rx:?} — the hop-1 copies from A ({:?} m) and B ({:?} m) destroyed each other",
        sim.node_arc(a).map(|x| x as i64),
        sim.node_arc(b).map(|x| x as i64)
    );
}
