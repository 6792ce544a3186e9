//! Collision and time-to-collision measures.

use serde::{Deserialize, Serialize};

use crate::geometry::{OrientedBox, Vec2};

/// A footprint with its current motion estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actor {
    pub footprint: OrientedBox,
    pub velocity: Vec2,
    pub accel: Vec2,
}

impl Actor {
    /// Footprint after `t` seconds of constant-acceleration motion along the direction of
    /// travel, halting instead of reversing.
    fn projected(&self, t: f64) -> OrientedBox {
        let speed = self.velocity.norm();
        let dir = if speed > 1e-3 {
            self.velocity * (1.0 / speed)
        } else {
            Vec2::from_angle(self.footprint.heading)
        };
        let a = self.accel.dot(dir);
        let travel = if a < 0.0 && speed + a * t < 0.0 {
            speed * speed / (-2.0 * a)
        } else {
            (speed * t + 0.5 * a * t * t).max(0.0)
        };
        OrientedBox {
            center: self.footprint.center + dir * travel,
            ..self.footprint
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultRule {
    /// Collisions count against the ego unless it is stationary or hit from behind.
    #[default]
    AtFault,
    /// Every collision counts.
    Strict,
}

/// Below this speed the ego counts as stationary for fault assignment.
pub const STATIONARY_SPEED: f64 = 0.1;

/// Whether an overlap between the ego and `other` is the ego's fault.
pub fn collision_at_fault(ego: &Actor, other: &Actor) -> bool {
    if ego.velocity.norm() < STATIONARY_SPEED {
        return false;
    }
    let eb = &ego.footprint;
    let ob = &other.footprint;
    let mut contact = Vec2::ZERO;
    let mut count = 0.0;
    for c in ob.corners() {
        let l = eb.to_local(c);
        if l.x.abs() <= 0.5 * eb.length && l.y.abs() <= 0.5 * eb.width {
            contact += c;
            count += 1.0;
        }
    }
    for c in eb.corners() {
        let l = ob.to_local(c);
        if l.x.abs() <= 0.5 * ob.length && l.y.abs() <= 0.5 * ob.width {
            contact += c;
            count += 1.0;
        }
    }
    let contact = if count > 0.0 {
        contact * (1.0 / count)
    } else {
        (eb.center + ob.center) * 0.5
    };
    let local = eb.to_local(contact);
    let faces = [
        0.5 * eb.length - local.x,        // front
        local.x + 0.5 * eb.length,        // rear
        0.5 * eb.width - local.y,         // left
        local.y + 0.5 * eb.width,         // right
    ];
    let nearest = (0..4)
        .min_by(|&a, &b| faces[a].abs().total_cmp(&faces[b].abs()))
        .expect("four faces");
    let closing = (other.velocity - ego.velocity).rotate(-eb.heading);
    !(nearest == 1 && closing.x > 0.0)
}

/// True iff the ego overlaps no agent, or every overlap is not the ego's fault.
pub fn no_at_fault_collision(ego: &Actor, agents: &[Actor], rule: FaultRule) -> bool {
    agents.iter().all(|a| {
        !ego.footprint.overlaps(&a.footprint)
            || (rule == FaultRule::AtFault && !collision_at_fault(ego, a))
    })
}

/// Modified time-to-collision: the smallest strictly positive root of
/// `½·a·t² + v·t − dtc = 0`, i.e. `t = (−v ± √(v² + 2·a·dtc)) / a`; `dtc / v` when the
/// relative acceleration vanishes. `None` means the gap never closes.
pub fn mttc(dtc: f64, v_rel: f64, a_rel: f64) -> Option<f64> {
    if dtc <= 0.0 {
        return Some(0.0);
    }
    if a_rel.abs() < 1e-12 {
        return (v_rel > 0.0).then(|| dtc / v_rel);
    }
    let disc = v_rel * v_rel + 2.0 * a_rel * dtc;
    if disc < 0.0 {
        return None;
    }
    // Cancellation-free evaluation of the two roots.
    let sq = disc.sqrt();
    let q = -0.5 * (v_rel + if v_rel >= 0.0 { sq } else { -sq });
    let a_half = 0.5 * a_rel;
    let roots = [q / a_half, if q != 0.0 { -dtc / q } else { f64::NAN }];
    roots
        .into_iter()
        .filter(|t| t.is_finite() && *t > 0.0)
        .min_by(f64::total_cmp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcSettings {
    pub horizon: f64,
    pub resolution: f64,
    pub threshold: f64,
}

impl Default for TtcSettings {
    fn default() -> Self {
        Self {
            horizon: 2.0,
            resolution: 0.1,
            threshold: 1.0,
        }
    }
}

/// Smallest time-to-collision over agents whose projected footprint meets the ego's in
/// front of it within the projection window, or `None` when no such conflict exists.
pub fn min_ttc(ego: &Actor, agents: &[Actor], s: &TtcSettings) -> Option<f64> {
    let steps = (s.horizon / s.resolution).round() as usize;
    let reach_e = ego.footprint.circumradius();
    let ve = ego.velocity.norm();
    let ae = ego.accel.norm();
    let mut best: Option<f64> = None;
    for other in agents {
        let bound = reach_e
            + other.footprint.circumradius()
            + (ve + other.velocity.norm()) * s.horizon
            + 0.5 * (ae + other.accel.norm()) * s.horizon * s.horizon;
        let offset = other.footprint.center - ego.footprint.center;
        if offset.norm_sq() > bound * bound {
            continue;
        }
        // First projected overlap; it only counts when the other actor is ahead then.
        let conflict = (0..=steps).map(|k| k as f64 * s.resolution).find_map(|t| {
            let e = ego.projected(t);
            let o = other.projected(t);
            e.overlaps(&o).then(|| (t, e.to_local(o.center).x > 0.0))
        });
        let Some((t_conflict, true)) = conflict else {
            continue;
        };
        let dtc = ego.footprint.distance(&other.footprint);
        let n = if offset.norm() > 1e-9 {
            offset * (1.0 / offset.norm())
        } else {
            Vec2::from_angle(ego.footprint.heading)
        };
        let v_rel = (ego.velocity - other.velocity).dot(n);
        let a_rel = (ego.accel - other.accel).dot(n);
        let t = mttc(dtc, v_rel, a_rel).unwrap_or(t_conflict);
        best = Some(best.map_or(t, |b: f64| b.min(t)));
    }
    best
}

/// Binary TTC quality feature: 1 unless some forward conflict is closer than the threshold.
pub fn ttc_feature(ego: &Actor, agents: &[Actor], s: &TtcSettings) -> f64 {
    match min_ttc(ego, agents, s) {
        Some(t) if t < s.threshold => 0.0,
        _ => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2;

    fn actor(x: f64, y: f64, vx: f64) -> Actor {
        Actor {
            footprint: OrientedBox::new(Pose2::new(x, y, 0.0), 4.6, 1.9),
            velocity: Vec2::new(vx, 0.0),
            accel: Vec2::ZERO,
        }
    }

    #[test]
    fn collision_examples() {
        let ego = actor(0.0, 0.0, 5.0);
        assert!(no_at_fault_collision(&ego, &[actor(10.0 + 4.6, 0.0, 5.0)], FaultRule::AtFault));
        assert!(!no_at_fault_collision(&ego, &[actor(0.0, 0.0, 5.0)], FaultRule::AtFault));
    }

    #[test]
    fn rear_end_by_faster_agent_is_not_at_fault() {
        let ego = actor(0.0, 0.0, 0.0);
        let striker = actor(-4.3, 0.0, 6.0);
        assert!(ego.footprint.overlaps(&striker.footprint));
        assert!(no_at_fault_collision(&ego, &[striker], FaultRule::AtFault));
        assert!(!no_at_fault_collision(&ego, &[striker], FaultRule::Strict));
        // A moving ego rear-ended by a faster agent is also blameless.
        let moving = actor(0.0, 0.0, 3.0);
        assert!(no_at_fault_collision(&moving, &[striker], FaultRule::AtFault));
        // Driving into the back of a slower agent is the ego's fault.
        let lead = actor(4.3, 0.0, 1.0);
        assert!(!no_at_fault_collision(&moving, &[lead], FaultRule::AtFault));
    }

    #[test]
    fn mttc_examples() {
        assert_eq!(mttc(10.0, 5.0, 0.0), Some(2.0));
        assert!((mttc(10.0, 0.0, 2.0).unwrap() - 10f64.sqrt()).abs() < 1e-12);
        assert!((mttc(10.0, 5.0, -1.0).unwrap() - (5.0 - 5f64.sqrt())).abs() < 1e-12);
        assert_eq!(mttc(10.0, -2.0, 0.0), None);
        assert_eq!(mttc(10.0, 1.0, -1.0), None);
    }

    #[test]
    fn ttc_examples() {
        let s = TtcSettings::default();
        let ego = actor(0.0, 0.0, 10.0);
        assert_eq!(ttc_feature(&ego, &[], &s), 1.0);
        // Stopped lead with a 3 m bumper gap.
        let lead = actor(4.6 + 3.0, 0.0, 0.0);
        let t = min_ttc(&ego, &[lead], &s).unwrap();
        assert!((t - 0.3).abs() < 1e-9);
        assert_eq!(ttc_feature(&ego, &[lead], &s), 0.0);
        let same_speed = actor(4.6 + 30.0, 0.0, 10.0);
        assert_eq!(ttc_feature(&ego, &[same_speed], &s), 1.0);
        // Closing follower behind the ego is ignored.
        let follower = actor(-6.0, 0.0, 15.0);
        assert_eq!(ttc_feature(&ego, &[follower], &s), 1.0);
    }
}
