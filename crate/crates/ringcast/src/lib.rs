//! Ring-highway traffic analytics and broadcast dissemination simulation.
//!
//! `ringcast` covers a complete probe-vehicle-to-protocol-comparison
//! pipeline on a circular highway:
//!
//! 1. [`geometry`] — the ring as an arc-length-parameterized closed polyline
//!    with exits and exit-delimited segments.
//! 2. [`trace`] — parse probe GPS records, map-match them onto the ring,
//!    classify travel direction, and derive inter-vehicle gap and speed
//!    distributions per four-hour period.
//! 3. [`densify`] — scale the probe observations up to full-population
//!    per-segment vehicle counts via the `m_j = sum_i v_i h / L_j`,
//!    `q_j = m_j / a` flow model.
//! 4. [`mobility`] — a closed-population mobility model driven by those
//!    counts: constant-speed vehicles injected and extracted at exits.
//! 5. [`sim`] + [`protocols`] + [`metrics`] — a deterministic discrete-event
//!    engine with a carrier-sense broadcast channel, four dissemination
//!    protocols (flooding, distance-based forwarding, its hop-count variant,
//!    and random-timer forwarding) seeded from a road-side unit, and the
//!    packet-delivery-ratio / collision / end-to-end-delay metrics that
//!    compare them.
//! 6. [`synth`] — a synthetic trace generator with measured ground truth,
//!    used to validate the estimator end to end.
//!
//! The `examples/` directory is the best starting point; each example is a
//! small runnable tour of one capability:
//!
//! ```bash
//! cargo run --example ring_geometry      # arcs, segments, projections
//! cargo run --example analyze_trace      # trace pipeline on the bundled probe data
//! cargo run --example densify_flows      # probe counts -> full-population counts
//! cargo run --example synth_oracle       # estimator vs known ground truth
//! cargo run --example mobility_churn     # injection/extraction conservation
//! cargo run --example hidden_terminal    # collision accounting fixture
//! cargo run --example dbf_stall          # why the hop-count rule exists
//! cargo run --example compare_protocols  # the headline four-protocol table
//! ```
//!
//! Batch workflows (file in, file out) live behind the thin `ringcast`
//! binary with `analyze`, `densify`, `synth`, `simulate` and `report`
//! subcommands; see [`cli`] and the repository README.
//!
//! Every run is a pure function of its inputs and seed: event ordering,
//! random streams and float formatting are all pinned, so identical configs
//! reproduce byte-identical logs and reports.

pub mod cli;
pub mod densify;
pub mod geometry;
pub mod metrics;
pub mod mobility;
pub mod protocols;
pub mod scenario;
pub mod sim;
pub mod synth;
pub mod trace;
