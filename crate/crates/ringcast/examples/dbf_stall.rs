//! The propagation stall that the hop-count rule repairs.
//!
//! Two forwarders sit at the same distance from the source, so their defer
//! timers expire together and both re-broadcast. Under plain DBF the next
//! hop hears the second copy while its own timer is pending and cancels —
//! propagation stops. The hop-count variant ignores same-hop duplicates, so
//! the chain keeps going.
//!
//! Run with: cargo run --example dbf_stall

use ringcast::geometry::ArcPosition;
use ringcast::protocols::{ProtocolKind, ProtocolParams};
use ringcast::sim::{ChannelConfig, LogKind, NodeId, Simulation};

fn run(kind: ProtocolKind) -> (Vec<u32>, Vec<u32>) {
    // Ideal channel: the dichotomy is about inhibition, not collisions.
    let channel = ChannelConfig {
        collisions: false,
        ..ChannelConfig::default()
    };
    let mut sim = Simulation::new(
        1_000_000.0,
        channel,
        ProtocolParams {
            kind,
            ..ProtocolParams::default()
        },
        1,
    )
    .expect("valid sim");
    sim.install_rsu(ArcPosition(0.0), 1.0, 2000, 1.0);
    let nodes = [
        sim.add_static_node(ArcPosition(250.0)), // twin forwarder 1
        sim.add_static_node(ArcPosition(250.0)), // twin forwarder 2
        sim.add_static_node(ArcPosition(500.0)), // next hop
        sim.add_static_node(ArcPosition(750.0)), // last node
    ];
    sim.run_until(10.0).expect("clean run");
    let received: Vec<u32> = nodes
        .iter()
        .filter(|n| {
            sim.log_entries()
                .iter()
                .any(|e| e.kind == LogKind::Rx && e.node == Some(**n))
        })
        .map(|n: &NodeId| n.0)
        .collect();
    let forwarded: Vec<u32> = sim
        .log_entries()
        .iter()
        .filter(|e| e.kind == LogKind::Timer)
        .map(|e| e.node.unwrap().0)
        .collect();
    (received, forwarded)
}

fn main() {
    println!("source at 0 m; twins at 250 m; next hop at 500 m; last node at 750 m\n");
    for kind in [ProtocolKind::Dbf, ProtocolKind::DbfHopCount] {
        let (received, forwarded) = run(kind);
        println!("{kind}:");
        println!("  nodes that received the message: {received:?}");
        println!("  nodes that forwarded:            {forwarded:?}");
        println!(
            "  last node reached: {}\n",
            if received.contains(&4) { "yes" } else { "no — propagation stalled" }
        );
    }
}
