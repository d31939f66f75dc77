//! Log-distance path loss used to synthesize received power levels.

/// Transmit power, dBm.
pub const TX_POWER_DBM: f64 = 0.0;
pub const PATH_LOSS_EXPONENT: f64 = 2.0;
/// Reference distance, meters.
pub const REFERENCE_DISTANCE: f64 = 1.0;
/// Reported power on a channel with no transmitter inside the sensing radius.
pub const NOISE_FLOOR_DBM: f64 = -120.0;

/// Received power at `dist` meters. Distances below the reference distance
/// are clamped to it, so the result never exceeds the transmit power.
pub fn received_power(dist: f64) -> f64 {
    let d = dist.max(REFERENCE_DISTANCE);
    TX_POWER_DBM - 10.0 * PATH_LOSS_EXPONENT * (d / REFERENCE_DISTANCE).log10()
}
