use std::f64::consts::PI;

use crate::{Error, Result};

/// Parameters of one simulated network.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub nodes: usize,
    /// Expected number of neighbors within the transmission radius.
    pub density: f64,
    pub tx_radius: f64,
    pub interference_radius: f64,
    pub sensing_radius: f64,
    pub channels: usize,
    /// Hopping sequence period, in slots.
    pub period: usize,
    /// Smoothness ratio of the smooth random waypoint model.
    pub smoothness: f64,
    pub flows: usize,
    pub bounded: bool,
    /// Seconds per slot.
    pub slot_dt: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            nodes: 100,
            density: 4.0,
            tx_radius: 1000.0,
            interference_radius: 1000.0,
            sensing_radius: 1100.0,
            channels: 16,
            period: 4,
            smoothness: 0.1,
            flows: 10,
            bounded: false,
            slot_dt: 3.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    // Negated comparisons so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.nodes < 2 {
            return bad(format!("nodes must be >= 2, got {}", self.nodes));
        }
        if !(self.tx_radius > 0.0) {
            return bad(format!(
                "tx radius must be positive, got {}",
                self.tx_radius
            ));
        }
        if !(self.interference_radius >= self.tx_radius
            && self.sensing_radius >= self.interference_radius)
        {
            return bad(format!(
                "radii must satisfy sensing >= interference >= tx, got {} / {} / {}",
                self.sensing_radius, self.interference_radius, self.tx_radius
            ));
        }
        if self.channels == 0 {
            return bad("channel count must be >= 1".into());
        }
        if self.period == 0 {
            return bad("hopping period must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.smoothness) {
            return bad(format!(
                "smoothness must lie in [0, 1], got {}",
                self.smoothness
            ));
        }
        if !(self.density > 0.0) {
            return bad(format!("density must be positive, got {}", self.density));
        }
        if !(self.slot_dt > 0.0) {
            return bad(format!(
                "slot duration must be positive, got {}",
                self.slot_dt
            ));
        }
        Ok(())
    }

    /// Side of the square deployment region. The area `N·π·r_T²/ρ` makes the
    /// expected neighbor count close to the configured density.
    pub fn region_side(&self) -> f64 {
        (self.nodes as f64 * PI * self.tx_radius * self.tx_radius / self.density).sqrt()
    }
}
