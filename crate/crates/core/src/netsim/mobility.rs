use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::network::{NetworkState, Point, MAX_SPEED};
use super::SimConfig;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mobility {
    /// Nodes never move.
    Static,
    /// Fixed speed and heading drawn once.
    Fixed,
    RandomWaypoint,
    /// Random waypoint whose next heading and speed stay within a ratio of
    /// the previous leg's.
    SmoothRandomWaypoint,
}

impl Mobility {
    pub const MOBILE: [Mobility; 3] = [
        Mobility::Fixed,
        Mobility::RandomWaypoint,
        Mobility::SmoothRandomWaypoint,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Mobility::Static => "static",
            Mobility::Fixed => "fm",
            Mobility::RandomWaypoint => "rwp",
            Mobility::SmoothRandomWaypoint => "srwp",
        }
    }
}

impl fmt::Display for Mobility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Mobility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Mobility::Static),
            "fm" | "fixed" => Ok(Mobility::Fixed),
            "rwp" => Ok(Mobility::RandomWaypoint),
            "srwp" => Ok(Mobility::SmoothRandomWaypoint),
            other => Err(Error::InvalidConfig(format!(
                "unknown mobility model '{other}'"
            ))),
        }
    }
}

fn heading(from: &Point, to: &Point) -> f64 {
    (to.y - from.y).atan2(to.x - from.x).rem_euclid(TAU)
}

fn uniform_point<R: Rng + ?Sized>(side: f64, rng: &mut R) -> Point {
    Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side))
}

/// Draws initial speeds, headings and waypoints for `model`.
pub fn init_mobility<R: Rng + ?Sized>(state: &mut NetworkState, model: Mobility, rng: &mut R) {
    let side = state.side;
    for node in &mut state.nodes {
        node.waypoint = None;
        match model {
            Mobility::Static => {
                node.vel = 0.0;
                node.dir = 0.0;
            }
            Mobility::Fixed => {
                node.vel = rng.gen_range(0.0..=MAX_SPEED);
                node.dir = rng.gen_range(0.0..TAU);
            }
            Mobility::RandomWaypoint | Mobility::SmoothRandomWaypoint => {
                let wp = uniform_point(side, rng);
                node.vel = rng.gen_range(0.0..=MAX_SPEED);
                node.dir = heading(&node.pos, &wp);
                node.waypoint = Some(wp);
            }
        }
    }
}

/// Next waypoint and speed for a node that just reached its waypoint.
fn next_leg<R: Rng + ?Sized>(
    model: Mobility,
    pos: Point,
    prev_dir: f64,
    prev_vel: f64,
    cfg: &SimConfig,
    side: f64,
    rng: &mut R,
) -> (Point, f64, f64) {
    match model {
        Mobility::SmoothRandomWaypoint => {
            let eps = cfg.smoothness;
            let spread = TAU * eps;
            let dir = if spread > 0.0 {
                (prev_dir + rng.gen_range(-spread..=spread)).rem_euclid(TAU)
            } else {
                prev_dir
            };
            let lo = ((1.0 - eps) * prev_vel).max(0.0);
            let hi = ((1.0 + eps) * prev_vel).min(MAX_SPEED);
            let vel = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let leg = rng.gen_range(0.05 * side..=0.5 * side);
            let wp = Point::new(pos.x + leg * dir.cos(), pos.y + leg * dir.sin());
            (wp, dir, vel)
        }
        _ => {
            let wp = uniform_point(side, rng);
            (wp, heading(&pos, &wp), rng.gen_range(0.0..=MAX_SPEED))
        }
    }
}

/// Fraction of the move `from -> to` that stays inside `[0, side]²`.
fn inside_fraction(from: &Point, to: &Point, side: f64) -> f64 {
    let mut frac: f64 = 1.0;
    for (a, b) in [(from.x, to.x), (from.y, to.y)] {
        if b < 0.0 {
            frac = frac.min(a / (a - b));
        } else if b > side {
            frac = frac.min((side - a) / (b - a));
        }
    }
    frac.clamp(0.0, 1.0)
}

/// Advances every node by one slot.
pub fn step_mobility<R: Rng + ?Sized>(
    state: &mut NetworkState,
    model: Mobility,
    cfg: &SimConfig,
    rng: &mut R,
) {
    if model == Mobility::Static {
        return;
    }
    let side = state.side;
    let bounded = state.bounded;
    for node in &mut state.nodes {
        if node.vel == 0.0 && model == Mobility::Fixed {
            continue;
        }
        let step = node.vel * cfg.slot_dt;
        let start = node.pos;
        let mut target = match (model, node.waypoint) {
            (Mobility::RandomWaypoint | Mobility::SmoothRandomWaypoint, Some(wp)) => {
                if start.dist(&wp) <= step {
                    let (next_wp, dir, vel) =
                        next_leg(model, wp, node.dir, node.vel, cfg, side, rng);
                    node.waypoint = Some(next_wp);
                    node.dir = dir;
                    node.vel = vel;
                    wp
                } else {
                    let dir = heading(&start, &wp);
                    node.dir = dir;
                    Point::new(start.x + step * dir.cos(), start.y + step * dir.sin())
                }
            }
            _ => Point::new(
                start.x + step * node.dir.cos(),
                start.y + step * node.dir.sin(),
            ),
        };
        let outside = !(0.0..=side).contains(&target.x) || !(0.0..=side).contains(&target.y);
        if bounded && outside {
            let f = inside_fraction(&start, &target, side);
            target = Point::new(
                (start.x + f * (target.x - start.x)).clamp(0.0, side),
                (start.y + f * (target.y - start.y)).clamp(0.0, side),
            );
            node.vel = 0.0;
        }
        node.pos = target;
    }
}
