#![allow(dead_code)]

use chanpred::netsim::{ChannelHoppingSequence, NetworkState, NodeState, Point};
use chanpred::nn::{AttentionParams, Matrix};
use chanpred::occupancy::OccupancyModel;

pub const CHANNELS: usize = 16;

pub fn node(id: usize, x: f64, chs: &[usize]) -> NodeState {
    NodeState {
        id,
        pos: Point::new(x, 0.0),
        vel: 0.0,
        dir: 0.0,
        waypoint: None,
        chs: ChannelHoppingSequence::new(chs.to_vec(), CHANNELS).unwrap(),
        active: true,
    }
}

pub fn line_network(nodes: Vec<NodeState>) -> NetworkState {
    NetworkState {
        nodes,
        routes: vec![],
        side: 100_000.0,
        bounded: false,
    }
}

/// Occupancy model whose attention matches identical rows and whose output
/// copies the attended bits: `W_Q = W_K = 4·I`, `W_V = I`, `W_O = 10·I`.
pub fn matching_model(input_len: usize, horizon: usize) -> OccupancyModel {
    let eye = Matrix::identity(CHANNELS);
    let mut qk = eye.clone();
    qk.scale(4.0);
    let mut wo = eye.clone();
    wo.scale(10.0);
    OccupancyModel {
        params: AttentionParams {
            w_q: vec![qk.clone()],
            w_k: vec![qk],
            w_v: vec![eye],
            w_o: wo,
        },
        high_weight_threshold: chanpred::occupancy::DEFAULT_HIGH_WEIGHT_THRESHOLD,
        input_len,
        horizon,
    }
}

pub fn on_channels(row: &[bool]) -> Vec<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, b)| **b)
        .map(|(c, _)| c)
        .collect()
}
