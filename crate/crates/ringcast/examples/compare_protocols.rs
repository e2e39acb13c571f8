//! A compact version of the headline experiment: all four dissemination
//! protocols on the same ring scenario, a few seeds each.
//!
//! Run with: cargo run --release --example compare_protocols

use ringcast::protocols::ProtocolKind;
use ringcast::scenario::{build_geometry, run_scenario, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.apply("duration_s", "60").unwrap();
    cfg.apply("repetitions", "3").unwrap();
    let geometry = build_geometry(&cfg).expect("synthetic ring");
    println!(
        "ring C = {:.0} m, population {}, RSU at exit {}, {} s per run, {} seeds\n",
        geometry.circumference(),
        cfg.population,
        cfg.rsu_exit,
        cfg.duration_s,
        cfg.repetitions
    );

    println!("protocol   mean PDR   mean collisions   mean e2e delay");
    for kind in ProtocolKind::ALL {
        cfg.apply("protocol", kind.as_str()).unwrap();
        let mut pdr = 0.0;
        let mut collisions = 0.0;
        let mut delays = Vec::new();
        for rep in 0..cfg.repetitions {
            let out = run_scenario(&cfg, &geometry, cfg.seed + rep as u64).expect("clean run");
            pdr += out.report.pdr / cfg.repetitions as f64;
            collisions += out.report.collisions as f64 / cfg.repetitions as f64;
            if let Some(d) = out.report.avg_e2e_s {
                delays.push(d);
            }
        }
        let e2e = if delays.is_empty() {
            "-".to_string()
        } else {
            format!("{:.3} s", delays.iter().sum::<f64>() / delays.len() as f64)
        };
        println!("{:<9}  {:>8.3}  {:>15.1}  {:>14}", kind.to_string(), pdr, collisions, e2e);
    }
}
