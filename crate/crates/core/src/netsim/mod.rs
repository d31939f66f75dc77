//! Random unit-disk networks with routed flows, node mobility, and the
//! channel occupancy / received power traces an observer node records.

mod config;
mod mobility;
mod network;
pub mod propagation;
mod trace;

pub use config::SimConfig;
pub use mobility::{init_mobility, step_mobility, Mobility};
pub use network::{
    channel_at, generate_network, shortest_path, unit_disk_graph, ChannelHoppingSequence,
    NetworkState, NodeState, Point, MAX_ROUTE_ATTEMPTS, MAX_SPEED,
};
pub use propagation::{received_power, NOISE_FLOOR_DBM};
pub use trace::{
    link_power_series, meta_path, observe, read_trace, simulate, trace_to_csv, write_trace,
    History, ObservationTrace, TraceMeta,
};
