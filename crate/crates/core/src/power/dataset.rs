use rand::seq::SliceRandom;
use rand::Rng;

use super::model::PowerSample;
use super::sequence::sequences_ending_at;
use crate::netsim::{
    generate_network, init_mobility, link_power_series, observe, simulate, Mobility,
    ObservationTrace, SimConfig, NOISE_FLOOR_DBM,
};
use crate::Result;

/// Power series of one transmitter as seen by one observer, one value per
/// slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSeries {
    pub graph: usize,
    pub observer: usize,
    pub transmitter: usize,
    pub values: Vec<f64>,
}

/// A random active observer of a fresh mobile network watches every other
/// active node separately for `slots` slots.
pub fn link_series<R: Rng + ?Sized>(
    cfg: &SimConfig,
    mobility: Mobility,
    graph: usize,
    slots: usize,
    rng: &mut R,
) -> Result<Vec<LinkSeries>> {
    cfg.validate()?;
    let mut net = generate_network(cfg, rng)?;
    init_mobility(&mut net, mobility, rng);
    let active = net.active_ids();
    let observer = *active.choose(rng).expect("routed flows leave active nodes");
    let hist = simulate(&mut net, mobility, cfg, 0, slots, rng);
    Ok(active
        .iter()
        .filter(|&&j| j != observer)
        .map(|&tx| LinkSeries {
            graph,
            observer,
            transmitter: tx,
            values: link_power_series(&hist, observer, tx, cfg),
        })
        .collect())
}

/// Next-value samples from one series: every window of `window` consecutive
/// values above the noise floor (the transmitter was sensed throughout),
/// with the following value as target.
pub fn series_samples(values: &[f64], window: usize) -> Vec<PowerSample> {
    let mut out = Vec::new();
    if window == 0 {
        return out;
    }
    for end in window - 1..values.len().saturating_sub(1) {
        let w = &values[end + 1 - window..=end];
        if w.iter().all(|&v| v > NOISE_FLOOR_DBM) {
            out.push(PowerSample {
                values: w.to_vec(),
                target: values[end + 1],
            });
        }
    }
    out
}

/// [`series_samples`] over a fresh network from [`link_series`].
pub fn link_samples<R: Rng + ?Sized>(
    cfg: &SimConfig,
    mobility: Mobility,
    slots: usize,
    window: usize,
    rng: &mut R,
) -> Result<Vec<PowerSample>> {
    Ok(link_series(cfg, mobility, 0, slots, rng)?
        .iter()
        .flat_map(|s| series_samples(&s.values, window))
        .collect())
}

/// Stride-`stride` next-value samples from a recorded trace: for every end
/// row with enough history and every channel that is not silent throughout.
pub fn trace_samples(
    trace: &ObservationTrace,
    stride: usize,
    window: usize,
) -> Result<Vec<PowerSample>> {
    let first_end = (window - 1) * stride;
    let mut out = Vec::new();
    for end in first_end..trace.len().saturating_sub(stride) {
        for seq in sequences_ending_at(trace, end, stride, window)? {
            out.push(PowerSample {
                target: trace.rp[end + stride][seq.channel],
                values: seq.values,
            });
        }
    }
    Ok(out)
}

/// A trace seen by a random active observer of a freshly generated mobile
/// network.
pub fn mobile_trace<R: Rng + ?Sized>(
    cfg: &SimConfig,
    mobility: Mobility,
    slots: usize,
    rng: &mut R,
) -> Result<ObservationTrace> {
    cfg.validate()?;
    let mut net = generate_network(cfg, rng)?;
    init_mobility(&mut net, mobility, rng);
    let observer = *net
        .active_ids()
        .choose(rng)
        .expect("routed flows leave active nodes");
    let hist = simulate(&mut net, mobility, cfg, 0, slots, rng);
    Ok(observe(&hist, observer, cfg))
}
