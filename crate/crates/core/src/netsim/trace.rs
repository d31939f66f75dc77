use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::mobility::{step_mobility, Mobility};
use super::network::{ChannelHoppingSequence, NetworkState, Point};
use super::propagation::{received_power, NOISE_FLOOR_DBM};
use super::SimConfig;
use crate::{Error, Result};

/// Positions of every node over a run of consecutive slots, together with
/// the parts of the network that do not change.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    /// Absolute slot number of `positions[0]`.
    pub start_slot: u64,
    pub positions: Vec<Vec<Point>>,
    pub chs: Vec<ChannelHoppingSequence>,
    pub active: Vec<bool>,
}

impl History {
    pub fn slots(&self) -> usize {
        self.positions.len()
    }

    /// Active transmitters other than `observer` within `radius` at slot
    /// offset `k`, in id order.
    pub fn transmitters_within(&self, observer: usize, radius: f64, k: usize) -> Vec<usize> {
        let pos = &self.positions[k];
        (0..pos.len())
            .filter(|&j| j != observer && self.active[j] && pos[observer].dist(&pos[j]) <= radius)
            .collect()
    }
}

/// Records `slots` consecutive slots starting from the current state,
/// stepping the mobility model between records.
pub fn simulate<R: Rng + ?Sized>(
    state: &mut NetworkState,
    model: Mobility,
    cfg: &SimConfig,
    start_slot: u64,
    slots: usize,
    rng: &mut R,
) -> History {
    let mut positions = Vec::with_capacity(slots);
    for k in 0..slots {
        if k > 0 {
            step_mobility(state, model, cfg, rng);
        }
        positions.push(state.positions());
    }
    History {
        start_slot,
        positions,
        chs: state.nodes.iter().map(|n| n.chs.clone()).collect(),
        active: state.nodes.iter().map(|n| n.active).collect(),
    }
}

/// What one observer saw on every channel over a run of slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTrace {
    pub observer: usize,
    pub start_slot: u64,
    pub channels: usize,
    /// `co[k][ch]`: some transmitter inside the interference radius used `ch`.
    pub co: Vec<Vec<bool>>,
    /// `rp[k][ch]`: power of the nearest transmitter on `ch` inside the
    /// sensing radius, dBm; the noise floor otherwise.
    pub rp: Vec<Vec<f64>>,
    /// Weakest power a transmitter inside the interference radius can have.
    pub theta: f64,
}

impl ObservationTrace {
    pub fn len(&self) -> usize {
        self.co.len()
    }

    pub fn is_empty(&self) -> bool {
        self.co.is_empty()
    }

    /// Rows `start..start + len` as a new trace.
    pub fn window(&self, start: usize, len: usize) -> ObservationTrace {
        ObservationTrace {
            observer: self.observer,
            start_slot: self.start_slot + start as u64,
            channels: self.channels,
            co: self.co[start..start + len].to_vec(),
            rp: self.rp[start..start + len].to_vec(),
            theta: self.theta,
        }
    }
}

/// Synthesizes the occupancy and power trace seen by `observer`. Every
/// active node transmits in every slot; the observer's own transmissions are
/// excluded.
pub fn observe(history: &History, observer: usize, cfg: &SimConfig) -> ObservationTrace {
    let u = cfg.channels;
    let mut co = Vec::with_capacity(history.slots());
    let mut rp = Vec::with_capacity(history.slots());
    for (k, pos) in history.positions.iter().enumerate() {
        let slot = history.start_slot + k as u64;
        let mut co_row = vec![false; u];
        let mut rp_row = vec![NOISE_FLOOR_DBM; u];
        let here = pos[observer];
        for (j, p) in pos.iter().enumerate() {
            if j == observer || !history.active[j] {
                continue;
            }
            let d = here.dist(p);
            if d > cfg.sensing_radius {
                continue;
            }
            let ch = history.chs[j].channel_at(slot);
            rp_row[ch] = rp_row[ch].max(received_power(d));
            if d <= cfg.interference_radius {
                co_row[ch] = true;
            }
        }
        co.push(co_row);
        rp.push(rp_row);
    }
    ObservationTrace {
        observer,
        start_slot: history.start_slot,
        channels: u,
        co,
        rp,
        theta: received_power(cfg.interference_radius),
    }
}

/// Per-slot power received by `observer` from transmitter `tx` alone, or the
/// noise floor when `tx` is outside the sensing radius.
pub fn link_power_series(
    history: &History,
    observer: usize,
    tx: usize,
    cfg: &SimConfig,
) -> Vec<f64> {
    history
        .positions
        .iter()
        .map(|pos| {
            let d = pos[observer].dist(&pos[tx]);
            if d <= cfg.sensing_radius {
                received_power(d)
            } else {
                NOISE_FLOOR_DBM
            }
        })
        .collect()
}

/// Ordered key=value metadata stored next to a trace file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMeta {
    entries: Vec<(String, String)>,
}

impl TraceMeta {
    pub fn describe(cfg: &SimConfig, mobility: Mobility, trace: &ObservationTrace) -> Self {
        let mut meta = TraceMeta::default();
        meta.set("nodes", cfg.nodes);
        meta.set("density", cfg.density);
        meta.set("tx_radius", cfg.tx_radius);
        meta.set("interference_radius", cfg.interference_radius);
        meta.set("sensing_radius", cfg.sensing_radius);
        meta.set("channels", cfg.channels);
        meta.set("period", cfg.period);
        meta.set("smoothness", cfg.smoothness);
        meta.set("flows", cfg.flows);
        meta.set("bounded", cfg.bounded);
        meta.set("slot_dt", cfg.slot_dt);
        meta.set("seed", cfg.seed);
        meta.set("mobility", mobility);
        meta.set("observer", trace.observer);
        meta.set("theta", trace.theta);
        meta.set("start_slot", trace.start_slot);
        meta.set("slots", trace.len());
        meta
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::InvalidConfig(format!("metadata is missing '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::InvalidConfig(format!("metadata '{key}' has bad value '{raw}'")))
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        Ok(SimConfig {
            nodes: self.parsed("nodes")?,
            density: self.parsed("density")?,
            tx_radius: self.parsed("tx_radius")?,
            interference_radius: self.parsed("interference_radius")?,
            sensing_radius: self.parsed("sensing_radius")?,
            channels: self.parsed("channels")?,
            period: self.parsed("period")?,
            smoothness: self.parsed("smoothness")?,
            flows: self.parsed("flows")?,
            bounded: self.parsed("bounded")?,
            slot_dt: self.parsed("slot_dt")?,
            seed: self.parsed("seed")?,
        })
    }

    pub fn mobility(&self) -> Result<Mobility> {
        self.parsed("mobility")
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut meta = TraceMeta::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
            meta.set(k.trim(), v.trim());
        }
        Ok(meta)
    }
}

/// Path of the metadata file that accompanies `trace_path`.
pub fn meta_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("meta")
}

pub fn trace_to_csv(trace: &ObservationTrace) -> String {
    let u = trace.channels;
    let mut out = String::from("slot");
    for ch in 0..u {
        write!(out, ",ch{ch}_co").unwrap();
    }
    for ch in 0..u {
        write!(out, ",ch{ch}_rp").unwrap();
    }
    out.push('\n');
    for (k, (co, rp)) in trace.co.iter().zip(&trace.rp).enumerate() {
        write!(out, "{}", trace.start_slot + k as u64).unwrap();
        for &bit in co {
            out.push_str(if bit { ",1" } else { ",0" });
        }
        for &p in rp {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes the trace CSV and its metadata sidecar.
pub fn write_trace(path: &Path, trace: &ObservationTrace, meta: &TraceMeta) -> Result<()> {
    fs::write(path, trace_to_csv(trace)).map_err(|e| Error::io(path, e))?;
    let mp = meta_path(path);
    fs::write(&mp, meta.to_text()).map_err(|e| Error::io(&mp, e))
}

pub fn read_trace(path: &Path) -> Result<(ObservationTrace, TraceMeta)> {
    let mp = meta_path(path);
    let meta_text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let meta = TraceMeta::from_text(&meta_text, &mp)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty trace file"))?;
    let cols = header.split(',').count();
    if cols < 3 || (cols - 1) % 2 != 0 || !header.starts_with("slot,") {
        return Err(Error::parse(path, 1, "malformed header"));
    }
    let u = (cols - 1) / 2;
    let mut co = Vec::new();
    let mut rp = Vec::new();
    let mut start_slot = None;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {cols} fields, got {}", fields.len()),
            ));
        }
        let slot: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, "bad slot number"))?;
        start_slot.get_or_insert(slot);
        let bits = fields[1..=u]
            .iter()
            .map(|f| match *f {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(Error::parse(
                    path,
                    lineno,
                    format!("bad occupancy bit '{f}'"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        let powers = fields[u + 1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad power '{f}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        co.push(bits);
        rp.push(powers);
    }
    let observer = meta.parsed("observer")?;
    let theta = meta.parsed("theta")?;
    let start_slot = match start_slot {
        Some(s) => s,
        None => meta.parsed("start_slot")?,
    };
    Ok((
        ObservationTrace {
            observer,
            start_slot,
            channels: u,
            co,
            rp,
            theta,
        },
        meta,
    ))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::netsim::network::NodeState;

    fn node(id: usize, x: f64, chs: &[usize], active: bool) -> NodeState {
        NodeState {
            id,
            pos: Point::new(x, 0.0),
            vel: 0.0,
            dir: 0.0,
            waypoint: None,
            chs: ChannelHoppingSequence::new(chs.to_vec(), 16).unwrap(),
            active,
        }
    }

    fn line_network(nodes: Vec<NodeState>) -> NetworkState {
        NetworkState {
            nodes,
            routes: vec![],
            side: 10_000.0,
            bounded: false,
        }
    }

    #[test]
    fn superposition_repeats_every_period() {
        // Observer i plus j1, j2 inside the interference radius, L = 3.
        let cfg = SimConfig::default();
        let mut net = line_network(vec![
            node(0, 0.0, &[0, 0, 0], true),
            node(1, 400.0, &[1, 3, 2], true),
            node(2, 800.0, &[2, 1, 4], true),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hist = simulate(&mut net, Mobility::Static, &cfg, 0, 12, &mut rng);
        let tr = observe(&hist, 0, &cfg);
        for t in 0..9 {
            assert_eq!(tr.co[t], tr.co[t + 3]);
        }
        let on = |row: &Vec<bool>| {
            row.iter()
                .enumerate()
                .filter(|(_, b)| **b)
                .map(|(c, _)| c)
                .collect::<Vec<_>>()
        };
        assert_eq!(on(&tr.co[0]), vec![1, 2]);
        assert_eq!(on(&tr.co[1]), vec![1, 3]);
        assert_eq!(on(&tr.co[2]), vec![2, 4]);
        // Observer's own channel 0 never shows up.
        assert!(tr.co.iter().all(|r| !r[0]));
    }

    #[test]
    fn nothing_in_range_is_all_noise() {
        let cfg = SimConfig::default();
        let mut net = line_network(vec![node(0, 0.0, &[0], true), node(1, 5000.0, &[3], true)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hist = simulate(&mut net, Mobility::Static, &cfg, 0, 5, &mut rng);
        let tr = observe(&hist, 0, &cfg);
        assert!(tr.co.iter().flatten().all(|b| !b));
        assert!(tr.rp.iter().flatten().all(|&p| p == NOISE_FLOOR_DBM));
    }

    #[test]
    fn transmitter_on_interference_edge() {
        let cfg = SimConfig::default();
        let mut net = line_network(vec![node(0, 0.0, &[0], true), node(1, 1000.0, &[5], true)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hist = simulate(&mut net, Mobility::Static, &cfg, 0, 2, &mut rng);
        let tr = observe(&hist, 0, &cfg);
        assert!((tr.theta + 60.0).abs() < 1e-12);
        assert_eq!(tr.rp[0][5], tr.theta);
        assert!(tr.co[0][5]);
    }

    #[test]
    fn nearest_same_channel_transmitter_dominates() {
        let cfg = SimConfig::default();
        let mut net = line_network(vec![
            node(0, 0.0, &[0], true),
            node(1, 900.0, &[7], true),
            node(2, 100.0, &[7], true),
            node(3, 1050.0, &[9], true),
            node(4, 200.0, &[11], false),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hist = simulate(&mut net, Mobility::Static, &cfg, 0, 1, &mut rng);
        let tr = observe(&hist, 0, &cfg);
        assert_eq!(tr.rp[0][7], received_power(100.0));
        assert!(tr.co[0][7]);
        // Sensed but not interfering.
        assert_eq!(tr.rp[0][9], received_power(1050.0));
        assert!(!tr.co[0][9]);
        // Inactive nodes are silent.
        assert_eq!(tr.rp[0][11], NOISE_FLOOR_DBM);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = SimConfig {
            nodes: 30,
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = crate::netsim::generate_network(&cfg, &mut rng).unwrap();
        crate::netsim::init_mobility(&mut net, Mobility::Fixed, &mut rng);
        let observer = net.active_ids()[0];
        let hist = simulate(&mut net, Mobility::Fixed, &cfg, 17, 25, &mut rng);
        let tr = observe(&hist, observer, &cfg);
        let meta = TraceMeta::describe(&cfg, Mobility::Fixed, &tr);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace(&path, &tr, &meta).unwrap();
        let (back, meta_back) = read_trace(&path).unwrap();
        assert_eq!(back, tr);
        assert_eq!(meta_back, meta);
        assert_eq!(meta_back.sim_config().unwrap(), cfg);
        assert_eq!(meta_back.mobility().unwrap(), Mobility::Fixed);
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("slot,ch0_co,ch1_co,"));
    }

    #[test]
    fn malformed_trace_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "slot,ch0_co,ch0_rp\n0,2,-120\n").unwrap();
        std::fs::write(meta_path(&path), "observer=0\ntheta=-60\n").unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
