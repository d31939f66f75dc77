use std::collections::VecDeque;

use rand::Rng;

use super::SimConfig;
use crate::{Error, Result};

/// Source/destination redraws allowed per flow before giving up.
pub const MAX_ROUTE_ATTEMPTS: usize = 1000;

pub const MAX_SPEED: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A node's periodic channel assignment. The channel used at slot `t` is
/// `seq[t mod L]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelHoppingSequence {
    seq: Vec<usize>,
}

impl ChannelHoppingSequence {
    pub fn new(seq: Vec<usize>, channels: usize) -> Result<Self> {
        if seq.is_empty() {
            return Err(Error::InvalidConfig(
                "hopping sequence must not be empty".into(),
            ));
        }
        if let Some(&ch) = seq.iter().find(|&&ch| ch >= channels) {
            return Err(Error::InvalidConfig(format!(
                "channel {ch} out of range for {channels} channels"
            )));
        }
        Ok(ChannelHoppingSequence { seq })
    }

    pub fn random<R: Rng + ?Sized>(period: usize, channels: usize, rng: &mut R) -> Self {
        ChannelHoppingSequence {
            seq: (0..period).map(|_| rng.gen_range(0..channels)).collect(),
        }
    }

    pub fn period(&self) -> usize {
        self.seq.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.seq
    }

    pub fn channel_at(&self, slot: u64) -> usize {
        self.seq[(slot % self.seq.len() as u64) as usize]
    }
}

/// Free-function form of [`ChannelHoppingSequence::channel_at`].
pub fn channel_at(chs: &ChannelHoppingSequence, slot: u64) -> usize {
    chs.channel_at(slot)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: usize,
    pub pos: Point,
    /// Speed in m/s, within `[0, MAX_SPEED]`.
    pub vel: f64,
    /// Heading in radians, within `[0, 2π)`.
    pub dir: f64,
    pub waypoint: Option<Point>,
    pub chs: ChannelHoppingSequence,
    /// Set for nodes on at least one flow route; only these transmit.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub nodes: Vec<NodeState>,
    /// Node ids along each flow, source first.
    pub routes: Vec<Vec<usize>>,
    pub side: f64,
    pub bounded: bool,
}

impl NetworkState {
    pub fn positions(&self) -> Vec<Point> {
        self.nodes.iter().map(|n| n.pos).collect()
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.active)
            .map(|n| n.id)
            .collect()
    }

    pub fn in_region(&self, p: &Point) -> bool {
        (0.0..=self.side).contains(&p.x) && (0.0..=self.side).contains(&p.y)
    }

    /// Mean number of other nodes within `radius`.
    pub fn mean_degree(&self, radius: f64) -> f64 {
        let n = self.nodes.len();
        let mut links = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.nodes[i].pos.dist(&self.nodes[j].pos) <= radius {
                    links += 1;
                }
            }
        }
        2.0 * links as f64 / n as f64
    }
}

/// Adjacency lists of the unit-disk graph, each sorted by node id.
pub fn unit_disk_graph(positions: &[Point], radius: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if positions[i].dist(&positions[j]) <= radius {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Minimum hop-count path from `src` to `dst`. Breadth-first search expands
/// neighbors in ascending id order and keeps the first parent found, so ties
/// resolve toward lower ids.
pub fn shortest_path(adj: &[Vec<usize>], src: usize, dst: usize) -> Option<Vec<usize>> {
    let mut parent = vec![usize::MAX; adj.len()];
    parent[src] = src;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        if u == dst {
            let mut path = vec![dst];
            let mut cur = dst;
            while cur != src {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &v in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}

/// Places nodes uniformly in the square region, draws an independent random
/// hopping sequence per node and routes `cfg.flows` random point-to-point
/// flows along shortest hop-count paths. Nodes start at rest; see
/// [`super::init_mobility`].
pub fn generate_network<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<NetworkState> {
    cfg.validate()?;
    let side = cfg.region_side();
    let mut nodes: Vec<NodeState> = (0..cfg.nodes)
        .map(|id| NodeState {
            id,
            pos: Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side)),
            vel: 0.0,
            dir: 0.0,
            waypoint: None,
            chs: ChannelHoppingSequence::random(cfg.period, cfg.channels, rng),
            active: false,
        })
        .collect();

    let positions: Vec<Point> = nodes.iter().map(|n| n.pos).collect();
    let adj = unit_disk_graph(&positions, cfg.tx_radius);
    let mut routes = Vec::with_capacity(cfg.flows);
    for _ in 0..cfg.flows {
        let mut found = None;
        for _ in 0..MAX_ROUTE_ATTEMPTS {
            let src = rng.gen_range(0..cfg.nodes);
            let mut dst = rng.gen_range(0..cfg.nodes - 1);
            if dst >= src {
                dst += 1;
            }
            if let Some(path) = shortest_path(&adj, src, dst) {
                found = Some(path);
                break;
            }
        }
        let path = found.ok_or(Error::Unroutable {
            attempts: MAX_ROUTE_ATTEMPTS,
        })?;
        for &id in &path {
            nodes[id].active = true;
        }
        routes.push(path);
    }

    Ok(NetworkState {
        nodes,
        routes,
        side,
        bounded: cfg.bounded,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn channel_at_wraps() {
        // ch1;ch3;ch2 and ch2;ch1;ch4 from the superposition example
        let a = ChannelHoppingSequence::new(vec![1, 3, 2], 16).unwrap();
        assert_eq!(channel_at(&a, 4), 3);
        let b = ChannelHoppingSequence::new(vec![2, 1, 4], 16).unwrap();
        assert_eq!(channel_at(&b, 5), 4);
        let single = ChannelHoppingSequence::new(vec![0], 16).unwrap();
        for t in [0, 1, 7, 1_000_003] {
            assert_eq!(single.channel_at(t), 0);
        }
    }

    #[test]
    fn chs_rejects_out_of_range() {
        assert!(ChannelHoppingSequence::new(vec![0, 16], 16).is_err());
        assert!(ChannelHoppingSequence::new(vec![], 16).is_err());
    }

    #[test]
    fn bfs_prefers_lower_ids_on_ties() {
        // 0 - 1 - 3 and 0 - 2 - 3 are both two hops.
        let adj = vec![vec![1, 2], vec![0, 3], vec![0, 3], vec![1, 2]];
        assert_eq!(shortest_path(&adj, 0, 3), Some(vec![0, 1, 3]));
        assert_eq!(shortest_path(&adj, 3, 0), Some(vec![3, 1, 0]));
        let split = vec![vec![1], vec![0], vec![]];
        assert_eq!(shortest_path(&split, 0, 2), None);
    }

    #[test]
    fn default_network_has_all_flows() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = generate_network(&cfg, &mut rng).unwrap();
        assert_eq!(net.nodes.len(), 100);
        assert_eq!(net.routes.len(), 10);
        for route in &net.routes {
            assert!(route.len() >= 2);
            assert!(route.iter().all(|&id| net.nodes[id].active));
            for hop in route.windows(2) {
                let d = net.nodes[hop[0]].pos.dist(&net.nodes[hop[1]].pos);
                assert!(d <= cfg.tx_radius);
            }
        }
        for n in &net.nodes {
            assert_eq!(n.chs.period(), cfg.period);
            assert!(n.chs.as_slice().iter().all(|&c| c < cfg.channels));
            assert!(net.in_region(&n.pos));
        }
    }

    #[test]
    fn two_node_network_single_hop() {
        // At ρ=16 the region diagonal is under r_T, so the pair is always linked.
        let cfg = SimConfig {
            nodes: 2,
            flows: 1,
            density: 16.0,
            ..SimConfig::default()
        };
        assert!(cfg.region_side() * std::f64::consts::SQRT_2 <= cfg.tx_radius);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = generate_network(&cfg, &mut rng).unwrap();
        assert_eq!(net.routes.len(), 1);
        assert_eq!(net.routes[0].len(), 2);
        assert!(net.nodes.iter().all(|n| n.active));
    }

    #[test]
    fn disconnected_graph_fails_explicitly() {
        let cfg = SimConfig {
            nodes: 2,
            flows: 1,
            density: 0.001,
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        match generate_network(&cfg, &mut rng) {
            Err(Error::Unroutable { attempts }) => assert_eq!(attempts, MAX_ROUTE_ATTEMPTS),
            other => panic!("expected routing failure, got {other:?}"),
        }
    }

    #[test]
    fn mean_degree_tracks_density() {
        // Monte-Carlo estimate over 50 placements; border effects pull it
        // slightly below the nominal 4.
        let cfg = SimConfig::default();
        let mut total = 0.0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = generate_network(&cfg, &mut rng).unwrap();
            total += net.mean_degree(cfg.tx_radius);
        }
        let mean = total / 50.0;
        assert!((3.5..=4.5).contains(&mean), "mean degree {mean}");
    }
}
