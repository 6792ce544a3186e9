//! Ego kinematics and the tracking controllers: a kinematic bicycle plant reduced to
//! curvature control, PID speed control and Pure Pursuit steering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Polyline, Pose2, Vec2};
use crate::tta::CandidatePlan;

pub const MAX_ACCEL: f64 = 8.0;
pub const MAX_CURVATURE: f64 = 0.3;
pub const MAX_SPEED: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EgoState {
    pub pose: Pose2,
    pub speed: f64,
    pub accel: f64,
    pub yaw_rate: f64,
}

impl EgoState {
    pub fn velocity(&self) -> Vec2 {
        self.pose.forward() * self.speed
    }

    /// Planar acceleration vector (longitudinal plus centripetal).
    pub fn accel_vector(&self) -> Vec2 {
        Vec2::new(self.accel, self.speed * self.yaw_rate).rotate(self.pose.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub accel: f64,
    pub curvature: f64,
}

impl ControlCommand {
    pub fn saturated(self) -> Self {
        Self {
            accel: self.accel.clamp(-MAX_ACCEL, MAX_ACCEL),
            curvature: self.curvature.clamp(-MAX_CURVATURE, MAX_CURVATURE),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit: f64,
}

impl Default for PidParams {
    fn default() -> Self {
        Self {
            kp: 4.0,
            ki: 0.2,
            kd: 0.0,
            integral_limit: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub pid: PidParams,
    pub lookahead_min: f64,
    pub lookahead_gain: f64,
    /// Maximum change of commanded acceleration, m/s³.
    pub jerk_limit: f64,
    /// Maximum change of commanded curvature, 1/(m·s).
    pub curvature_rate_limit: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            pid: PidParams::default(),
            lookahead_min: 4.0,
            lookahead_gain: 0.8,
            jerk_limit: 6.0,
            curvature_rate_limit: 0.05,
        }
    }
}

impl ControllerParams {
    pub fn lookahead(&self, speed: f64) -> f64 {
        self.lookahead_min.max(self.lookahead_gain * speed)
    }
}

/// Advances the bicycle one step with midpoint integration.
///
/// Heading changes by `v̄·κ·dt` with `v̄` the step's mean speed, so the traced path has
/// curvature exactly `κ`; the position moves `v̄·dt` along the mid-step heading.
pub fn step_bicycle(state: &EgoState, cmd: &ControlCommand, dt: f64) -> Result<EgoState> {
    let finite = state.pose.position.is_finite()
        && state.pose.heading.is_finite()
        && state.speed.is_finite()
        && cmd.accel.is_finite()
        && cmd.curvature.is_finite()
        && dt.is_finite();
    if !finite || dt <= 0.0 {
        return Err(Error::Numeric(format!(
            "step_bicycle(state={state:?}, cmd={cmd:?}, dt={dt})"
        )));
    }
    let speed = (state.speed + cmd.accel * dt).clamp(0.0, MAX_SPEED);
    let mean_speed = 0.5 * (state.speed + speed);
    let dtheta = mean_speed * cmd.curvature * dt;
    let mid = state.pose.heading + 0.5 * dtheta;
    Ok(EgoState {
        pose: Pose2 {
            position: state.pose.position + Vec2::from_angle(mid) * (mean_speed * dt),
            heading: wrap_angle(state.pose.heading + dtheta),
        },
        speed,
        accel: (speed - state.speed) / dt,
        yaw_rate: speed * cmd.curvature,
    })
}

/// PID speed controller with clamped, conditionally-integrated error.
pub fn pid_longitudinal(
    params: &PidParams,
    pid: PidState,
    target_speed: f64,
    current_speed: f64,
    dt: f64,
) -> (f64, PidState) {
    let error = target_speed - current_speed;
    let derivative = pid.prev_error.map_or(0.0, |p| (error - p) / dt);
    let unsaturated = params.kp * error + params.ki * pid.integral + params.kd * derivative;
    // Integrate only while the output is not pinned in the direction the error pushes.
    let pinned = unsaturated.abs() >= MAX_ACCEL && unsaturated.signum() == error.signum();
    let integral = if pinned {
        pid.integral
    } else {
        (pid.integral + error * dt).clamp(-params.integral_limit, params.integral_limit)
    };
    let accel = params.kp * error + params.ki * integral + params.kd * derivative;
    (
        accel.clamp(-MAX_ACCEL, MAX_ACCEL),
        PidState {
            integral,
            prev_error: Some(error),
        },
    )
}

/// Raised when a tracked path or plan has nothing left ahead of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EndOfPath;

/// Pure Pursuit curvature toward the first path vertex at least `lookahead` of arclength
/// ahead of the vehicle's projection onto the path.
pub fn pure_pursuit(state: &EgoState, path: &[Vec2], lookahead: f64) -> Result<f64, EndOfPath> {
    if path.len() < 2 || lookahead <= 0.0 {
        return Err(EndOfPath);
    }
    let line = Polyline::new(path.to_vec());
    let proj = line.project(state.pose.position).ok_or(EndOfPath)?;
    let cum = line.cumulative();
    let target = (proj.segment + 1..path.len())
        .find(|&i| cum[i] - proj.arclength >= lookahead)
        .map(|i| path[i])
        .ok_or(EndOfPath)?;
    let local = state.pose.to_local(target);
    let ld_sq = local.norm_sq();
    if ld_sq < 1e-12 {
        return Ok(0.0);
    }
    Ok((2.0 * local.y / ld_sq).clamp(-MAX_CURVATURE, MAX_CURVATURE))
}

/// Plan cursor advanced past the last waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EndOfPlan;

/// Speed of the plan at waypoint time `c·dt` by central differences over the positions
/// `[origin, w_0, w_1, …]`.
pub fn plan_speed(points: &[Vec2], c: usize, dt: f64) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    if c == 0 {
        (points[1] - points[0]).norm() / dt
    } else if c + 1 < n {
        (points[c + 1] - points[c - 1]).norm() / (2.0 * dt)
    } else {
        (points[n - 1] - points[n - 2]).norm() / dt
    }
}

/// Tracking command for a cached plan: PID on the plan speed at the cursor plus the plan's
/// own speed change as feed-forward, and Pure Pursuit on the world-frame path.
pub fn track_plan(
    state: &EgoState,
    pid: PidState,
    plan: &CandidatePlan,
    plan_origin: &Pose2,
    elapsed: f64,
    params: &ControllerParams,
) -> Result<(ControlCommand, PidState), EndOfPlan> {
    let dt = plan.dt;
    let cursor = (elapsed / dt + 1e-9).floor() as usize;
    if plan.waypoints.is_empty() || cursor >= plan.waypoints.len() {
        return Err(EndOfPlan);
    }
    let mut world: Vec<Vec2> = Vec::with_capacity(plan.waypoints.len() + 2);
    world.push(plan_origin.position);
    world.extend(plan.waypoints.iter().map(|w| plan_origin.to_world(*w)));

    let v_now = plan_speed(&world, cursor, dt);
    let v_next = plan_speed(&world, cursor + 1, dt);
    let feedforward = if cursor + 1 < world.len() {
        (v_next - v_now) / dt
    } else {
        0.0
    };
    let (fb, pid) = pid_longitudinal(&params.pid, pid, v_now, state.speed, dt);
    let accel = (fb + feedforward).clamp(-MAX_ACCEL, MAX_ACCEL);

    // Extend the path straight past its end so the lookahead target always exists.
    let n = world.len();
    let tail = world[n - 1] - world[n - 2];
    let dir = if tail.norm() > 1e-6 {
        tail * (1.0 / tail.norm())
    } else {
        Vec2::from_angle(state.pose.heading)
    };
    let spread = (world[n - 1] - world[0]).norm();
    let curvature = if spread < 0.05 {
        0.0
    } else {
        world.push(world[n - 1] + dir * 50.0);
        pure_pursuit(state, &world, params.lookahead(state.speed)).unwrap_or(0.0)
    };
    Ok((
        ControlCommand { accel, curvature }.saturated(),
        pid,
    ))
}

/// Rate-limits a command against the previous one (actuator jerk and steering-rate bounds).
pub fn limit_rates(
    cmd: ControlCommand,
    prev: ControlCommand,
    params: &ControllerParams,
    dt: f64,
) -> ControlCommand {
    let da = params.jerk_limit * dt;
    let dk = params.curvature_rate_limit * dt;
    ControlCommand {
        accel: cmd.accel.clamp(prev.accel - da, prev.accel + da),
        curvature: cmd.curvature.clamp(prev.curvature - dk, prev.curvature + dk),
    }
    .saturated()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn at(x: f64, y: f64, h: f64, v: f64) -> EgoState {
        EgoState {
            pose: Pose2::new(x, y, h),
            speed: v,
            accel: 0.0,
            yaw_rate: 0.0,
        }
    }

    #[test]
    fn straight_step() {
        let s = step_bicycle(&at(0.0, 0.0, 0.3, 5.0), &ControlCommand::default(), 0.1).unwrap();
        assert!((s.pose.position.norm() - 0.5).abs() < 1e-12);
        assert_eq!(s.pose.heading, 0.3);
    }

    #[test]
    fn no_motion_at_rest() {
        let s0 = at(1.0, 2.0, 0.5, 0.0);
        let s = step_bicycle(
            &s0,
            &ControlCommand {
                accel: 0.0,
                curvature: 0.2,
            },
            0.1,
        )
        .unwrap();
        assert_eq!(s.pose, s0.pose);
        assert_eq!(s.speed, 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        let r = step_bicycle(
            &at(0.0, 0.0, 0.0, f64::NAN),
            &ControlCommand::default(),
            0.1,
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn circle_closure() {
        // Analytic period of a 20 m circle at 5 m/s, integrated with a final partial step.
        let period = 2.0 * PI * 20.0 / 5.0;
        let cmd = ControlCommand {
            accel: 0.0,
            curvature: 0.05,
        };
        let mut s = at(0.0, 0.0, 0.0, 5.0);
        let full = (period / 0.1).floor() as usize;
        for _ in 0..full {
            s = step_bicycle(&s, &cmd, 0.1).unwrap();
        }
        s = step_bicycle(&s, &cmd, period - full as f64 * 0.1).unwrap();
        assert!(s.pose.position.norm() < 0.1, "{:?}", s.pose);
    }

    #[test]
    fn pid_examples() {
        let p = PidParams::default();
        let (a, _) = pid_longitudinal(&p, PidState::default(), 5.0, 5.0, 0.1);
        assert_eq!(a, 0.0);
        let p1 = PidParams {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            integral_limit: 2.0,
        };
        let (a, _) = pid_longitudinal(&p1, PidState::default(), 7.0, 5.0, 0.1);
        assert_eq!(a, 2.0);
    }

    #[test]
    fn pid_integral_is_bounded() {
        let p = PidParams {
            kp: 0.1,
            ki: 0.1,
            kd: 0.0,
            integral_limit: 2.0,
        };
        let mut st = PidState::default();
        for _ in 0..1000 {
            st = pid_longitudinal(&p, st, 10.0, 0.0, 0.1).1;
        }
        assert_eq!(st.integral, 2.0);
    }

    #[test]
    fn pure_pursuit_examples() {
        let ego = at(0.0, 0.0, 0.0, 5.0);
        let straight: Vec<Vec2> = (0..20).map(|i| Vec2::new(i as f64, 0.0)).collect();
        assert_eq!(pure_pursuit(&ego, &straight, 4.0), Ok(0.0));
        // Circle through the origin tangent to +x and the point (3, 4): κ = 2y/L².
        let k = pure_pursuit(&ego, &[Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0)], 5.0).unwrap();
        assert!((k - 0.3).abs() < 1e-12, "saturated value {k}");
        let k = pure_pursuit(&ego, &[Vec2::new(0.0, 0.0), Vec2::new(0.0, 8.0)], 8.0).unwrap();
        assert!((k - 2.0 / 8.0).abs() < 1e-12);
        assert_eq!(pure_pursuit(&ego, &[Vec2::ZERO, Vec2::new(1.0, 0.0)], 4.0), Err(EndOfPath));
    }

    #[test]
    fn pure_pursuit_unsaturated_oracle() {
        let ego = at(0.0, 0.0, 0.0, 5.0);
        let target = Vec2::new(9.0, 2.0);
        let k = pure_pursuit(&ego, &[Vec2::ZERO, target], 5.0).unwrap();
        // Circle tangent to +x through the origin: centre (0, R) with R² = x² + (y − R)².
        let r = (target.x * target.x + target.y * target.y) / (2.0 * target.y);
        assert!((k - 1.0 / r).abs() < 1e-12);
    }

    fn cv_plan(v: f64, h: usize) -> CandidatePlan {
        CandidatePlan {
            waypoints: (1..=h).map(|i| Vec2::new(v * 0.1 * i as f64, 0.0)).collect(),
            dt: 0.1,
            policy_score: None,
            id: 0,
        }
    }

    #[test]
    fn self_consistent_plan_needs_no_correction() {
        let ego = at(3.0, -2.0, 0.7, 8.0);
        let plan = cv_plan(8.0, 40);
        let (cmd, _) = track_plan(
            &ego,
            PidState::default(),
            &plan,
            &ego.pose,
            0.0,
            &ControllerParams::default(),
        )
        .unwrap();
        assert!(cmd.accel.abs() < 0.2 && cmd.curvature.abs() < 0.005, "{cmd:?}");
    }

    #[test]
    fn stationary_plan_brakes() {
        let ego = at(0.0, 0.0, 0.0, 6.0);
        let plan = CandidatePlan {
            waypoints: vec![Vec2::ZERO; 10],
            dt: 0.1,
            policy_score: None,
            id: 0,
        };
        let (cmd, _) = track_plan(
            &ego,
            PidState::default(),
            &plan,
            &ego.pose,
            0.0,
            &ControllerParams::default(),
        )
        .unwrap();
        assert!(cmd.accel < -1.0);
        assert_eq!(cmd.curvature, 0.0);
    }

    #[test]
    fn end_of_plan_signalled() {
        let ego = at(0.0, 0.0, 0.0, 6.0);
        let plan = cv_plan(6.0, 5);
        let r = track_plan(
            &ego,
            PidState::default(),
            &plan,
            &ego.pose,
            0.5,
            &ControllerParams::default(),
        );
        assert_eq!(r, Err(EndOfPlan));
    }

    #[test]
    fn rate_limits() {
        let p = ControllerParams::default();
        let c = limit_rates(
            ControlCommand {
                accel: 8.0,
                curvature: 0.3,
            },
            ControlCommand::default(),
            &p,
            0.1,
        );
        assert!((c.accel - 0.6).abs() < 1e-12);
        assert!((c.curvature - 0.005).abs() < 1e-12);
    }
}
