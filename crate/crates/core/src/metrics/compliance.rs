//! Map-based critical constraints and lane keeping.

use std::f64::consts::FRAC_PI_2;

use crate::geometry::{wrap_angle, OrientedBox, Vec2};
use crate::map::MapContext;

/// All four footprint corners inside the union of drivable rings. A map without drivable
/// area imposes no constraint.
pub fn drivable_area_compliance(footprint: &OrientedBox, map: &MapContext) -> bool {
    !map.has_drivable_area() || footprint.corners().iter().all(|&c| map.in_drivable_area(c))
}

/// False iff the motion segment crosses a stop line whose lane signal is STOP at `step`.
pub fn traffic_light_compliance(from: Vec2, to: Vec2, map: &MapContext, step: usize) -> bool {
    map.red_light_crossing(from, to, step).is_none()
}

/// Heading within ±π/2 of the lane direction, boundary inclusive.
pub fn driving_direction_compliance(ego_heading: f64, lane_heading: f64) -> bool {
    wrap_angle(ego_heading - lane_heading).abs() <= FRAC_PI_2
}

/// Lane keeping over the trailing window: 0 only when the vehicle has lingered off-centre
/// (|offset| above the threshold at every sample of a full window); 1 otherwise, including
/// while fewer than a window of samples exist.
pub fn lane_keeping(offsets: &[f64], dt: f64, threshold: f64, window: f64) -> f64 {
    let n = (window / dt).round().max(1.0) as usize;
    if offsets.len() < n {
        return 1.0;
    }
    let lingering = offsets[offsets.len() - n..]
        .iter()
        .all(|o| o.abs() > threshold);
    if lingering {
        0.0
    } else {
        1.0
    }
}
