//! Comfort checks on kinematic series.
//!
//! Derivatives use second-order central differences in the interior and one-sided
//! differences at the ends.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};
use crate::vehicle::EgoState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortLimits {
    pub accel_max: f64,
    pub jerk_max: f64,
    pub yaw_rate_max: f64,
}

impl Default for ComfortLimits {
    fn default() -> Self {
        Self {
            accel_max: 4.89,
            jerk_max: 8.37,
            yaw_rate_max: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    pub accel: f64,
    pub jerk: f64,
    pub yaw_rate: f64,
}

impl KinematicSample {
    pub fn within(&self, l: &ComfortLimits) -> bool {
        self.accel <= l.accel_max && self.jerk <= l.jerk_max && self.yaw_rate.abs() <= l.yaw_rate_max
    }
}

fn gradient(xs: &[Vec2], dt: f64) -> Vec<Vec2> {
    let n = xs.len();
    (0..n)
        .map(|i| match i {
            0 => (xs[1] - xs[0]) * (1.0 / dt),
            i if i == n - 1 => (xs[n - 1] - xs[n - 2]) * (1.0 / dt),
            _ => (xs[i + 1] - xs[i - 1]) * (0.5 / dt),
        })
        .collect()
}

fn gradient_scalar(xs: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| match i {
            0 => (xs[1] - xs[0]) / dt,
            i if i == n - 1 => (xs[n - 1] - xs[n - 2]) / dt,
            _ => (xs[i + 1] - xs[i - 1]) * (0.5 / dt),
        })
        .collect()
}

/// Below this speed the heading of a finite-difference velocity is meaningless.
const YAW_SPEED_FLOOR: f64 = 1.0;

/// Acceleration magnitude, jerk magnitude and yaw rate of a position series, or `None` for
/// series too short to difference three times.
pub fn kinematics_from_positions(points: &[Vec2], dt: f64) -> Option<Vec<KinematicSample>> {
    if points.len() < 3 {
        return None;
    }
    let vel = gradient(points, dt);
    let acc = gradient(&vel, dt);
    let jerk = gradient(&acc, dt);
    let mut headings = Vec::with_capacity(vel.len());
    let mut prev = None;
    for v in &vel {
        let h = if v.norm() >= YAW_SPEED_FLOOR {
            v.angle()
        } else {
            prev.unwrap_or(f64::NAN)
        };
        headings.push(h);
        if !h.is_nan() {
            prev = Some(h);
        }
    }
    // Unwrap so differences never jump by 2π.
    let mut unwrapped = headings.clone();
    for i in 1..unwrapped.len() {
        if unwrapped[i].is_nan() || unwrapped[i - 1].is_nan() {
            continue;
        }
        unwrapped[i] = unwrapped[i - 1] + wrap_angle(headings[i] - headings[i - 1]);
    }
    let yaw = gradient_scalar(&unwrapped, dt);
    Some(
        (0..points.len())
            .map(|i| KinematicSample {
                accel: acc[i].norm(),
                jerk: jerk[i].norm(),
                yaw_rate: if vel[i].norm() >= YAW_SPEED_FLOOR && yaw[i].is_finite() {
                    yaw[i]
                } else {
                    0.0
                },
            })
            .collect(),
    )
}

/// Kinematics of a realized state series: the planar acceleration vector comes from the
/// states themselves and jerk from its differences.
pub fn kinematics_from_states(states: &[EgoState], dt: f64) -> Option<Vec<KinematicSample>> {
    if states.len() < 3 {
        return None;
    }
    let acc: Vec<Vec2> = states.iter().map(|s| s.accel_vector()).collect();
    let jerk = gradient(&acc, dt);
    Some(
        states
            .iter()
            .zip(acc.iter().zip(&jerk))
            .map(|(s, (a, j))| KinematicSample {
                accel: a.norm(),
                jerk: j.norm(),
                yaw_rate: s.yaw_rate,
            })
            .collect(),
    )
}

/// Whether each sample of a position series is within the comfort limits; `None` when the
/// series is too short to evaluate.
pub fn comfort_flags(points: &[Vec2], dt: f64, limits: &ComfortLimits) -> Option<Vec<bool>> {
    kinematics_from_positions(points, dt).map(|k| k.iter().map(|s| s.within(limits)).collect())
}

/// `(hc, ec)` for a trajectory `series` that continues from `history` (positions, the last
/// of which is the current position). `ec` tests the series alone; `hc` tests the last
/// `window` seconds of history joined to the first `window` seconds of the series. Series
/// too short to differentiate score 1.
pub fn comfort_scores(
    history: &[Vec2],
    series: &[Vec2],
    dt: f64,
    window: f64,
    limits: &ComfortLimits,
) -> (f64, f64) {
    let n = (window / dt).round() as usize;
    let ec = match comfort_flags(series, dt, limits) {
        Some(flags) => flags.iter().all(|&f| f),
        None => true,
    };
    let hist = &history[history.len().saturating_sub(n + 1)..];
    let joined: Vec<Vec2> = hist
        .iter()
        .chain(series.iter().take(n))
        .copied()
        .collect();
    let hc = match comfort_flags(&joined, dt, limits) {
        Some(flags) => flags.iter().all(|&f| f),
        None => true,
    };
    (f64::from(u8::from(hc)), f64::from(u8::from(ec)))
}
