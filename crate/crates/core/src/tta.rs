//! Test-time plan selection: world propagation, gated rollout rewards, the truncated
//! action-value estimate and the adaptive replan rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Vec2};
use crate::map::MapContext;
use crate::metrics::comfort::comfort_flags;
use crate::metrics::{
    comfort_scores, critical_and_ttc, ego_progress, epdms_frame, footprint, lane_keeping, Actor, Critical,
    EvalMode, Features, FrameGeometry, ScorerWeights,
};
use crate::par::par_map;
use crate::scenario::Dims;
use crate::traffic::AgentState;
use crate::vehicle::EgoState;

/// A proposed trajectory: waypoint `i` is the ego-frame position at time `(i + 1)·dt`
/// relative to the pose at which the plan was issued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePlan {
    pub waypoints: Vec<Vec2>,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_score: Option<f64>,
    pub id: usize,
}

impl CandidatePlan {
    pub fn horizon(&self) -> usize {
        self.waypoints.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::Policy("plan has no waypoints".into()));
        }
        if !(self.dt > 0.0) || self.waypoints.iter().any(|w| !w.is_finite()) {
            return Err(Error::Policy(format!("plan {} has invalid timing or waypoints", self.id)));
        }
        Ok(())
    }

    /// The first `len` waypoints.
    pub fn prefix(&self, len: usize) -> CandidatePlan {
        CandidatePlan {
            waypoints: self.waypoints[..len.min(self.waypoints.len())].to_vec(),
            ..self.clone()
        }
    }

    /// Waypoints in the world frame for a plan issued at `origin`.
    pub fn world_points(&self, origin: &Pose2) -> Vec<Vec2> {
        self.waypoints.iter().map(|w| origin.to_world(*w)).collect()
    }
}

/// Trailing realized ego samples, oldest first; the last entry is the current state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub states: Vec<EgoState>,
    /// Signed lateral offset from the matched lane at each state.
    pub offsets: Vec<f64>,
    capacity: usize,
}

impl History {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            states: Vec::with_capacity(capacity + 1),
            offsets: Vec::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn push(&mut self, state: EgoState, offset: f64) {
        self.states.push(state);
        self.offsets.push(offset);
        if self.capacity > 0 && self.states.len() > self.capacity {
            let excess = self.states.len() - self.capacity;
            self.states.drain(..excess);
            self.offsets.drain(..excess);
        }
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.states.iter().map(|s| s.pose.position).collect()
    }
}

/// Live simulation state at one step.
#[derive(Debug, Clone)]
pub struct WorldState<'a> {
    pub map: &'a MapContext,
    pub step: usize,
    pub dt: f64,
    pub ego: EgoState,
    pub ego_dims: Dims,
    pub agents: Vec<AgentState>,
    pub history: History,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    #[default]
    ConstantVelocity,
    ConstantAcceleration,
}

/// Time over which the acceleration estimate decays to zero in constant-acceleration mode.
pub const ACCEL_DECAY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub k: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub propagation: Propagation,
    pub weights: ScorerWeights,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            k: 5,
            horizon: 40,
            gamma: 0.99,
            propagation: Propagation::ConstantVelocity,
            weights: ScorerWeights::default(),
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.k == 0 || self.k > self.horizon {
            return Err(Error::Config(format!(
                "rollout needs 1 ≤ k ≤ H (k={}, H={})",
                self.k, self.horizon
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        Ok(())
    }
}

/// Distance, speed and acceleration after `t` seconds when the acceleration `a0` decays
/// linearly to zero over `tau`, never reversing.
pub fn decayed_motion(v0: f64, a0: f64, tau: f64, t: f64) -> (f64, f64, f64) {
    let stop_time = if a0 < 0.0 {
        if v0 <= -a0 * tau / 2.0 {
            // v(t) = v0 + a0·(t − t²/2τ) reaches zero before the decay ends.
            let disc = tau * tau + 2.0 * tau * v0 / a0;
            Some(tau - disc.max(0.0).sqrt())
        } else {
            None
        }
    } else {
        None
    };
    let t_eff = stop_time.map_or(t, |ts| t.min(ts));
    let stopped = stop_time.is_some_and(|ts| t >= ts);
    let (disp, speed, accel) = if t_eff <= tau {
        let d = v0 * t_eff + a0 * (t_eff * t_eff / 2.0 - t_eff.powi(3) / (6.0 * tau));
        let v = v0 + a0 * (t_eff - t_eff * t_eff / (2.0 * tau));
        (d, v, a0 * (1.0 - t_eff / tau))
    } else {
        let d_tau = v0 * tau + a0 * tau * tau / 3.0;
        let v_tau = v0 + a0 * tau / 2.0;
        (d_tau + v_tau * (t_eff - tau), v_tau, 0.0)
    };
    if stopped {
        (disp, 0.0, 0.0)
    } else {
        (disp, speed.max(0.0), accel)
    }
}

/// Predicted agent snapshots; entry `i` is the prediction at time `(i + 1)·dt`.
pub fn propagate_world(world: &WorldState, steps: usize, mode: Propagation) -> Vec<Vec<AgentState>> {
    (1..=steps)
        .map(|i| {
            let t = i as f64 * world.dt;
            world
                .agents
                .iter()
                .map(|a| {
                    let speed = a.velocity.norm();
                    let dir = if speed > 1e-9 {
                        a.velocity * (1.0 / speed)
                    } else {
                        a.pose.forward()
                    };
                    match mode {
                        Propagation::ConstantVelocity => AgentState {
                            pose: Pose2 {
                                position: a.pose.position + a.velocity * t,
                                heading: a.pose.heading,
                            },
                            accel: 0.0,
                            ..a.clone()
                        },
                        Propagation::ConstantAcceleration => {
                            let along = if a.velocity.dot(a.pose.forward()) < 0.0 { -a.accel } else { a.accel };
                            let (d, v, acc) = decayed_motion(speed, along, ACCEL_DECAY, t);
                            AgentState {
                                pose: Pose2 {
                                    position: a.pose.position + dir * d,
                                    heading: a.pose.heading,
                                },
                                velocity: dir * v,
                                speed: v * a.speed.signum(),
                                accel: acc,
                                ..a.clone()
                            }
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-step gates and features of a plan scored against predicted snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScore {
    pub critical: Critical,
    pub features: Features,
    pub epdms: f64,
}

fn plan_geometry(world: &WorldState, plan: &CandidatePlan) -> (Vec<Vec2>, Vec<f64>) {
    let origin = world.ego.pose;
    let mut pts = Vec::with_capacity(plan.waypoints.len() + 1);
    pts.push(origin.position);
    pts.extend(plan.waypoints.iter().map(|w| origin.to_world(*w)));
    let mut headings = Vec::with_capacity(plan.waypoints.len());
    let mut prev = origin.heading;
    for i in 0..plan.waypoints.len() {
        let d = pts[i + 1] - pts[i];
        if d.norm() > 0.05 {
            prev = d.angle();
        }
        headings.push(prev);
    }
    (pts, headings)
}

/// Closed-loop frame scores of the first `len` waypoints of `plan` against `snapshots`.
/// With `stop_at_violation` the evaluation ends at the first failed gate.
pub fn plan_step_scores(
    world: &WorldState,
    snapshots: &[Vec<AgentState>],
    plan: &CandidatePlan,
    len: usize,
    w: &ScorerWeights,
    stop_at_violation: bool,
) -> Vec<StepScore> {
    let len = len.min(plan.waypoints.len()).min(snapshots.len());
    let dt = plan.dt;
    let (pts, headings) = plan_geometry(world, plan);
    let hist_pos = world.history.positions();
    let history: &[Vec2] = if hist_pos.is_empty() {
        std::slice::from_ref(&pts[0])
    } else {
        &hist_pos
    };
    let (hc, _) = comfort_scores(history, &pts[1..], dt, w.hc_window, &w.comfort);

    // Comfort flags over realized history joined with the plan.
    let mut joined: Vec<Vec2> = history[..history.len() - 1].to_vec();
    let base = joined.len();
    joined.extend_from_slice(&pts);
    let flags = comfort_flags(&joined, dt, &w.comfort);
    let ec_n = (w.ec_window / dt).round() as usize;

    let mut offsets = world.history.offsets.clone();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let pos = pts[i + 1];
        let heading = headings[i];
        let vel = if i + 2 < pts.len() {
            (pts[i + 2] - pts[i]) * (0.5 / dt)
        } else {
            (pts[i + 1] - pts[i]) * (1.0 / dt)
        };
        let acc = if i + 2 < pts.len() {
            (pts[i + 2] - pts[i + 1] * 2.0 + pts[i]) * (1.0 / (dt * dt))
        } else {
            Vec2::ZERO
        };
        let lane = world.map.aligned_lane(pos, heading).ok();
        offsets.push(lane.map_or(0.0, |m| m.projection.lateral));
        let ego = Actor {
            footprint: footprint(Pose2 { position: pos, heading }, world.ego_dims),
            velocity: vel,
            accel: acc,
        };
        let geo = FrameGeometry {
            map: world.map,
            step: world.step + i + 1,
            ego,
            ego_prev: pts[i],
            ego_heading: heading,
            lane_heading: lane.map(|m| m.projection.heading),
            agents: &snapshots[i],
        };
        let (critical, ttc) = critical_and_ttc(&geo, w);
        let ec = match &flags {
            Some(f) => {
                let end = base + i + 2;
                f[end.saturating_sub(ec_n)..end].iter().all(|&x| x)
            }
            None => true,
        };
        let features = Features {
            ttc,
            lk: lane_keeping(&offsets, dt, w.lk_offset_threshold, w.lk_window),
            hc,
            ec: f64::from(u8::from(ec)),
            ep: None,
        };
        let epdms = epdms_frame(&critical, &features, w, EvalMode::ClosedLoop).unwrap_or(0.0);
        out.push(StepScore {
            critical,
            features,
            epdms,
        });
        if stop_at_violation && !critical.all() {
            break;
        }
    }
    out
}

/// Gated per-step rewards: the frame score at each step, zero from the first critical
/// violation onward. Always returns `len` entries (bounded by the plan and snapshots).
pub fn plan_rewards(
    world: &WorldState,
    snapshots: &[Vec<AgentState>],
    plan: &CandidatePlan,
    len: usize,
    w: &ScorerWeights,
) -> Vec<f64> {
    let len = len.min(plan.waypoints.len()).min(snapshots.len());
    let mut rewards: Vec<f64> = plan_step_scores(world, snapshots, plan, len, w, true)
        .iter()
        .map(|s| if s.critical.all() { s.epdms } else { 0.0 })
        .collect();
    rewards.resize(len, 0.0);
    rewards
}

/// `Σ_{i<n} γ^i r_i`.
pub fn discounted_sum(rewards: &[f64], gamma: f64, n: usize) -> f64 {
    let mut g = 1.0;
    let mut acc = 0.0;
    for r in rewards.iter().take(n) {
        acc += g * r;
        g *= gamma;
    }
    acc
}

/// Value of a reward stream from index `from`: `Σ_{i≥from} γ^{i−from} r_i`.
fn tail_value(rewards: &[f64], gamma: f64, from: usize) -> f64 {
    discounted_sum(rewards.get(from..).unwrap_or(&[]), gamma, usize::MAX)
}

/// Three-term truncated action value `R_k + γ^k·V(s_{t+k}) − γ^H·V(s_{t+H})`, with both
/// value terms estimated by continuing the same reward stream.
pub fn truncated_q_three_term(rewards: &[f64], gamma: f64, k: usize, h: usize) -> f64 {
    if k == h {
        // The value terms cancel exactly.
        return discounted_sum(rewards, gamma, h);
    }
    discounted_sum(rewards, gamma, k) + gamma.powi(k as i32) * tail_value(rewards, gamma, k)
        - gamma.powi(h as i32) * tail_value(rewards, gamma, h)
}

/// Single-sum form of the truncated action value, `Σ_{i<H} γ^i r_i`.
pub fn truncated_q_sum(rewards: &[f64], gamma: f64, h: usize) -> f64 {
    discounted_sum(rewards, gamma, h)
}

/// `R_k` for a plan against predicted snapshots.
pub fn prefix_reward(
    world: &WorldState,
    snapshots: &[Vec<AgentState>],
    plan: &CandidatePlan,
    k: usize,
    cfg: &RolloutConfig,
) -> f64 {
    let rewards = plan_rewards(world, snapshots, plan, k, &cfg.weights);
    discounted_sum(&rewards, cfg.gamma, k)
}

/// Truncated action value of a plan over `len` steps.
pub fn truncated_q_len(
    world: &WorldState,
    snapshots: &[Vec<AgentState>],
    plan: &CandidatePlan,
    len: usize,
    cfg: &RolloutConfig,
) -> f64 {
    let rewards = plan_rewards(world, snapshots, plan, len, &cfg.weights);
    truncated_q_sum(&rewards, cfg.gamma, len)
}

/// Truncated action value over the configured horizon.
pub fn truncated_q(world: &WorldState, snapshots: &[Vec<AgentState>], plan: &CandidatePlan, cfg: &RolloutConfig) -> f64 {
    truncated_q_len(world, snapshots, plan, cfg.horizon, cfg)
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Candidate maximizing the truncated action value, with all values.
pub fn select_candidate(
    world: &WorldState,
    snapshots: &[Vec<AgentState>],
    candidates: &[CandidatePlan],
    cfg: &RolloutConfig,
) -> Result<(usize, Vec<f64>)> {
    let values = par_map(candidates, |c| truncated_q(world, snapshots, c, cfg));
    let best = argmax(&values).ok_or(Error::Empty("no candidate plans"))?;
    Ok((best, values))
}

/// Re-expresses the unexecuted part of a plan in the frame of the current ego pose.
/// Returns `None` when nothing remains.
pub fn transform_remainder(
    prev: &CandidatePlan,
    prev_origin: &Pose2,
    executed: usize,
    new_pose: &Pose2,
) -> Option<CandidatePlan> {
    if executed >= prev.waypoints.len() {
        return None;
    }
    Some(CandidatePlan {
        waypoints: prev.waypoints[executed..]
            .iter()
            .map(|w| new_pose.to_local(prev_origin.to_world(*w)))
            .collect(),
        ..prev.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanDecision {
    pub plan: CandidatePlan,
    pub retained: bool,
    /// Index of the chosen new candidate when the remainder was not retained.
    pub index: Option<usize>,
    pub remainder_value: Option<f64>,
    pub best_prefix_value: Option<f64>,
}

/// Keeps the persistent remainder when its value over its own length is at least the best
/// new candidate's value over the same prefix length; otherwise switches to the best full
/// candidate.
pub fn adaptive_replan(
    world: &WorldState,
    snapshots: &[Vec<AgentState>],
    remainder: Option<&CandidatePlan>,
    candidates: &[CandidatePlan],
    cfg: &RolloutConfig,
) -> Result<ReplanDecision> {
    if candidates.is_empty() {
        return Err(Error::Empty("no candidate plans"));
    }
    if let Some(rem) = remainder.filter(|r| !r.waypoints.is_empty()) {
        let len = rem.waypoints.len();
        let q_rem = truncated_q_len(world, snapshots, rem, len, cfg);
        let prefix_values = par_map(candidates, |c| truncated_q_len(world, snapshots, c, len, cfg));
        let best = prefix_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if q_rem >= best {
            return Ok(ReplanDecision {
                plan: rem.clone(),
                retained: true,
                index: None,
                remainder_value: Some(q_rem),
                best_prefix_value: Some(best),
            });
        }
        let (index, _) = select_candidate(world, snapshots, candidates, cfg)?;
        return Ok(ReplanDecision {
            plan: candidates[index].clone(),
            retained: false,
            index: Some(index),
            remainder_value: Some(q_rem),
            best_prefix_value: Some(best),
        });
    }
    let (index, _) = select_candidate(world, snapshots, candidates, cfg)?;
    Ok(ReplanDecision {
        plan: candidates[index].clone(),
        retained: false,
        index: Some(index),
        remainder_value: None,
        best_prefix_value: None,
    })
}

/// Open-loop score of a plan over its whole horizon: each gate must hold at every step,
/// quality features take their worst value and EP compares travelled arclength with the
/// expert's.
pub fn open_loop_plan_score(
    world: &WorldState,
    snapshots: &[Vec<AgentState>],
    plan: &CandidatePlan,
    expert_arclength: f64,
    w: &ScorerWeights,
) -> (Critical, Features) {
    let steps = plan_step_scores(world, snapshots, plan, plan.waypoints.len(), w, false);
    let mut c = Critical::PASS;
    let mut f = Features {
        ttc: 1.0,
        lk: 1.0,
        hc: 1.0,
        ec: 1.0,
        ep: None,
    };
    for s in &steps {
        c.nc &= s.critical.nc;
        c.dac &= s.critical.dac;
        c.tlc &= s.critical.tlc;
        c.ddc &= s.critical.ddc;
        f.ttc = f.ttc.min(s.features.ttc);
        f.lk = f.lk.min(s.features.lk);
        f.hc = f.hc.min(s.features.hc);
        f.ec = f.ec.min(s.features.ec);
    }
    let mut achieved = 0.0;
    let mut prev = Vec2::ZERO;
    for w in &plan.waypoints {
        achieved += w.distance(prev);
        prev = *w;
    }
    f.ep = Some(ego_progress(achieved, expert_arclength));
    (c, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures::straight_road;
    use crate::scenario::ObjectType;
    use std::f64::consts::FRAC_PI_2;
    use std::sync::Arc;

    fn world(map: &MapContext) -> WorldState<'_> {
        let mut history = History::with_capacity(30);
        for i in 0..21 {
            let x = -10.0 + 0.5 * i as f64;
            history.push(
                EgoState {
                    pose: Pose2::new(x, 0.0, 0.0),
                    speed: 5.0,
                    accel: 0.0,
                    yaw_rate: 0.0,
                },
                0.0,
            );
        }
        WorldState {
            map,
            step: 20,
            dt: 0.1,
            ego: *history.states.last().unwrap(),
            ego_dims: Dims::CAR,
            agents: vec![],
            history,
        }
    }

    fn straight(v: f64, h: usize, id: usize) -> CandidatePlan {
        CandidatePlan {
            waypoints: (1..=h).map(|i| Vec2::new(v * 0.1 * i as f64, 0.0)).collect(),
            dt: 0.1,
            policy_score: None,
            id,
        }
    }

    fn agent(x: f64, vx: f64) -> AgentState {
        AgentState {
            object_id: Arc::from("a"),
            track: 1,
            object_type: ObjectType::Vehicle,
            pose: Pose2::new(x, 0.0, 0.0),
            velocity: Vec2::new(vx, 0.0),
            speed: vx,
            accel: 0.0,
            dims: Dims::CAR,
            lane: None,
        }
    }

    #[test]
    fn perfect_plan_rewards() {
        let s = straight_road(3, 5.0);
        let map = MapContext::new(&s);
        let w = world(&map);
        let snaps = propagate_world(&w, 40, Propagation::ConstantVelocity);
        let plan = straight(5.0, 40, 0);
        let cfg = RolloutConfig {
            gamma: 0.9,
            ..Default::default()
        };
        let r = plan_rewards(&w, &snaps, &plan, 40, &cfg.weights);
        assert!(r.iter().all(|&x| x == 1.0));
        assert!((prefix_reward(&w, &snaps, &plan, 3, &cfg) - 2.71).abs() < 1e-12);
        assert!((discounted_sum(&[1.0; 4], 1.0, 4) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn off_road_plan_scores_zero() {
        let s = straight_road(3, 5.0);
        let map = MapContext::new(&s);
        let w = world(&map);
        let snaps = propagate_world(&w, 10, Propagation::ConstantVelocity);
        let plan = CandidatePlan {
            waypoints: (1..=10).map(|i| Vec2::new(0.5 * i as f64, 10.0)).collect(),
            ..straight(5.0, 10, 0)
        };
        let cfg = RolloutConfig::default();
        assert_eq!(prefix_reward(&w, &snaps, &plan, 10, &cfg), 0.0);
    }

    #[test]
    fn collision_at_last_step() {
        let s = straight_road(3, 5.0);
        let map = MapContext::new(&s);
        let mut w = world(&map);
        let h = 10;
        // Stationary obstacle whose rear face the plan reaches exactly at the final step.
        let reach = 5.0 * 0.1 * h as f64;
        w.agents = vec![agent(w.ego.pose.position.x + reach + 4.6 - 0.01, 0.0)];
        let snaps = propagate_world(&w, h, Propagation::ConstantVelocity);
        let plan = straight(5.0, h, 0);
        let cfg = RolloutConfig {
            gamma: 0.0,
            horizon: h,
            k: h,
            ..Default::default()
        };
        let mut weights = cfg.weights;
        weights.ttc = 0.0;
        let r = plan_rewards(&w, &snaps, &plan, h, &weights);
        assert_eq!(r[h - 1], 0.0);
        assert!(r[..h - 1].iter().all(|&x| x == 1.0));
        assert_eq!(truncated_q_sum(&r, 1.0, h), (h - 1) as f64);
    }

    #[test]
    fn k_equals_h_degenerates() {
        let rewards = [0.3, 0.9, 1.0, 0.2, 0.7];
        for g in [0.0, 0.5, 0.99] {
            assert_eq!(
                truncated_q_three_term(&rewards[..5], g, 5, 5),
                truncated_q_sum(&rewards, g, 5)
            );
        }
    }

    #[test]
    fn selection_examples() {
        let s = straight_road(3, 5.0);
        let map = MapContext::new(&s);
        let mut w = world(&map);
        let cfg = RolloutConfig::default();
        let snaps = propagate_world(&w, 40, Propagation::ConstantVelocity);
        let one = [straight(5.0, 40, 0)];
        assert_eq!(select_candidate(&w, &snaps, &one, &cfg).unwrap().0, 0);
        let same = [straight(5.0, 40, 0), straight(5.0, 40, 1), straight(5.0, 40, 2)];
        assert_eq!(select_candidate(&w, &snaps, &same, &cfg).unwrap().0, 0);
        assert!(select_candidate(&w, &snaps, &[], &cfg).is_err());
        // Obstacle 12 m ahead: the fast plan hits it, the stopping plan does not.
        w.agents = vec![agent(w.ego.pose.position.x + 12.0, 0.0)];
        let snaps = propagate_world(&w, 40, Propagation::ConstantVelocity);
        let stopping = CandidatePlan {
            waypoints: (1..=40)
                .map(|i| {
                    let t = (0.1 * i as f64).min(2.5);
                    Vec2::new(5.0 * t - 0.5 * 2.0 * t * t, 0.0)
                })
                .collect(),
            dt: 0.1,
            policy_score: None,
            id: 1,
        };
        let cands = [straight(5.0, 40, 0), stopping];
        assert_eq!(select_candidate(&w, &snaps, &cands, &cfg).unwrap().0, 1);
    }

    #[test]
    fn remainder_frames() {
        let plan = straight(5.0, 10, 0);
        let origin = Pose2::new(3.0, 4.0, 0.5);
        let same = transform_remainder(&plan, &origin, 0, &origin).unwrap();
        for (a, b) in same.waypoints.iter().zip(&plan.waypoints) {
            assert!(a.distance(*b) < 1e-12);
        }
        // Ego advanced exactly onto waypoint k−1 (time k·dt) with the plan's heading.
        let k = 4;
        let moved = Pose2 {
            position: origin.to_world(plan.waypoints[k - 1]),
            heading: origin.heading,
        };
        let rem = transform_remainder(&plan, &origin, k, &moved).unwrap();
        assert_eq!(rem.waypoints.len(), 10 - k);
        assert!(rem.waypoints[0].distance(Vec2::new(0.5, 0.0)) < 1e-12);
        // Pure rotation by +90°: points appear rotated by −90°.
        let rotated = Pose2 {
            position: origin.position,
            heading: origin.heading + FRAC_PI_2,
        };
        let rem = transform_remainder(&plan, &origin, 0, &rotated).unwrap();
        for (a, b) in rem.waypoints.iter().zip(&plan.waypoints) {
            assert!(a.distance(b.rotate(-FRAC_PI_2)) < 1e-12);
        }
        assert!(transform_remainder(&plan, &origin, 10, &origin).is_none());
    }

    #[test]
    fn cv_propagation() {
        let s = straight_road(3, 5.0);
        let map = MapContext::new(&s);
        let mut w = world(&map);
        w.agents = vec![agent(0.0, 5.0), agent(20.0, 0.0)];
        w.agents[0].pose.position = Vec2::ZERO;
        let snaps = propagate_world(&w, 10, Propagation::ConstantVelocity);
        assert!(snaps[9][0].pose.position.distance(Vec2::new(5.0, 0.0)) < 1e-12);
        assert!(snaps.iter().all(|s| s[1].pose == w.agents[1].pose));
    }

    #[test]
    fn decayed_acceleration_matches_integration() {
        let (d, v, a) = decayed_motion(0.0, 2.0, 1.0, 1.0);
        // Fine-step integration of v(t) = 2t − t².
        let n = 100_000;
        let h = 1.0 / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                (2.0 * t - t * t) * h
            })
            .sum();
        assert!((d - oracle).abs() < 1e-3);
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(a, 0.0);
        // Braking agent stops and stays put.
        let (d1, v1, _) = decayed_motion(1.0, -6.0, 1.0, 2.0);
        let (d2, _, _) = decayed_motion(1.0, -6.0, 1.0, 3.0);
        assert_eq!(v1, 0.0);
        assert_eq!(d1, d2);
    }
}
