//! Background traffic: log replay, Intelligent Driver Model agents and a scripted adversary.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, OrientedBox, Polyline, Pose2, Vec2};
use crate::map::MapContext;
use crate::scenario::{Dims, ObjectType, ScenarioDescription, SignalState};
use crate::tta::WorldState;
use crate::vehicle::EgoState;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub object_id: Arc<str>,
    /// Index of the source track in the scenario.
    pub track: usize,
    pub object_type: ObjectType,
    pub pose: Pose2,
    pub velocity: Vec2,
    /// Signed speed along the heading.
    pub speed: f64,
    /// Longitudinal acceleration estimate.
    pub accel: f64,
    pub dims: Dims,
    pub lane: Option<usize>,
}

impl AgentState {
    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(self.pose, self.dims.length, self.dims.width)
    }

    pub fn accel_vector(&self) -> Vec2 {
        self.pose.forward() * self.accel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub v0: f64,
    pub time_headway: f64,
    pub s0: f64,
    pub a_max: f64,
    pub b: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 10.0,
            time_headway: 1.5,
            s0: 2.0,
            a_max: 1.5,
            b: 2.0,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    /// Strongest deceleration the model may command.
    pub fn emergency_decel(&self) -> f64 {
        2.0 * self.b
    }
}

/// IDM acceleration `a_max·[1 − (v/v0)^δ − (s*/gap)²]` with
/// `s* = s0 + max(0, v·T + v·Δv / (2√(a_max·b)))`, clamped to `[−2b, a_max]`.
/// `dv` is the closing speed (follower minus leader); a free road is `gap = ∞`.
pub fn idm_accel(p: &IdmParams, v: f64, gap: f64, dv: f64) -> Result<f64> {
    if gap.is_nan() || gap <= 0.0 {
        return Err(Error::Overlap(gap));
    }
    let free = 1.0 - (v.max(0.0) / p.v0).powf(p.delta);
    let interaction = if gap.is_infinite() {
        0.0
    } else {
        let dynamic = v * p.time_headway + v * dv / (2.0 * (p.a_max * p.b).sqrt());
        let s_star = p.s0 + dynamic.max(0.0);
        (s_star / gap).powi(2)
    };
    Ok((p.a_max * (free - interaction)).clamp(-p.emergency_decel(), p.a_max))
}

/// Speed and distance after one step of constant acceleration, stopping at zero speed.
pub(crate) fn advance_speed(v: f64, a: f64, dt: f64) -> (f64, f64) {
    let next = v + a * dt;
    if next >= 0.0 {
        (next, 0.5 * (v + next) * dt)
    } else if a < 0.0 {
        (0.0, v * v / (-2.0 * a))
    } else {
        (0.0, 0.0)
    }
}

/// Logged states of every valid non-ego track at `step`.
pub fn replay_step(scenario: &ScenarioDescription, step: usize) -> Result<Vec<AgentState>> {
    let ids: Vec<Arc<str>> = scenario
        .tracks
        .iter()
        .map(|t| Arc::from(t.object_id.as_str()))
        .collect();
    replay_with_ids(scenario, &ids, step)
}

fn replay_with_ids(
    scenario: &ScenarioDescription,
    ids: &[Arc<str>],
    step: usize,
) -> Result<Vec<AgentState>> {
    if step >= scenario.step_count {
        return Err(Error::StepOutOfRange {
            step,
            len: scenario.step_count,
        });
    }
    Ok(scenario
        .tracks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.object_id != scenario.ego_track_id)
        .filter_map(|(i, t)| logged_agent(scenario, ids, i, step).filter(|_| t.states[step].valid))
        .collect())
}

fn logged_agent(
    scenario: &ScenarioDescription,
    ids: &[Arc<str>],
    track: usize,
    step: usize,
) -> Option<AgentState> {
    let t = &scenario.tracks[track];
    let s = t.states.get(step)?;
    if !s.valid {
        return None;
    }
    let speed = s.velocity.dot(s.pose.forward());
    let accel = match step.checked_sub(1).map(|p| t.states[p]) {
        Some(prev) if prev.valid => (speed - prev.velocity.dot(prev.pose.forward())) / scenario.dt,
        _ => 0.0,
    };
    Some(AgentState {
        object_id: ids[track].clone(),
        track,
        object_type: t.object_type,
        pose: s.pose,
        velocity: s.velocity,
        speed,
        accel,
        dims: t.dims,
        lane: None,
    })
}

/// Lateral distance from a lane centre within which another vehicle occupies the lane.
const SAME_LANE: f64 = 2.0;
const LEADER_RANGE: f64 = 100.0;
/// Time constant of the lateral servo toward the lane centre, seconds.
const LATERAL_TAU: f64 = 1.0;

/// One IDM step: follow the nearest vehicle (or red-light stop line) ahead on the agent's
/// lane, servo laterally onto the centreline, advance by `dt`.
pub fn idm_agent_step(
    world: &WorldState,
    agent: &AgentState,
    params: &IdmParams,
    dt: f64,
) -> AgentState {
    let map = world.map;
    let lane_idx = agent.lane.or_else(|| {
        map.aligned_lane(agent.pose.position, agent.pose.heading)
            .ok()
            .filter(|m| m.projection.distance < 3.0)
            .map(|m| m.lane)
    });
    let Some(lane_idx) = lane_idx else {
        return coast(agent, dt);
    };
    let line = &map.lanes[lane_idx].line;
    let Some(own) = line.project(agent.pose.position) else {
        return coast(agent, dt);
    };
    let mut p = *params;
    if let Some(limit) = map.lanes[lane_idx].speed_limit {
        p.v0 = limit;
    }
    let front = own.arclength + 0.5 * agent.dims.length;

    let mut gap = f64::INFINITY;
    let mut dv = 0.0;
    let mut consider = |pos: Vec2, heading: f64, speed: f64, length: f64| {
        if !map.lane_near(lane_idx, pos, LEADER_RANGE) {
            return;
        }
        if let Some(q) = line.project(pos) {
            let ahead = q.arclength - own.arclength;
            if q.lateral.abs() < SAME_LANE && ahead > 0.0 && ahead < LEADER_RANGE {
                let g = q.arclength - 0.5 * length - front;
                if g < gap {
                    gap = g;
                    dv = agent.speed - speed * wrap_angle(heading - q.heading).cos();
                }
            }
        }
    };
    for other in world.agents.iter().filter(|a| a.track != agent.track) {
        consider(other.pose.position, other.pose.heading, other.speed, other.dims.length);
    }
    consider(
        world.ego.pose.position,
        world.ego.pose.heading,
        world.ego.speed,
        world.ego_dims.length,
    );
    for stop in &map.stop_lines {
        if stop.lane != Some(lane_idx) {
            continue;
        }
        let Some(s_stop) = stop.lane_arclength else {
            continue;
        };
        let g = s_stop - front;
        let must_stop = match map.signal(lane_idx, world.step) {
            SignalState::Stop => true,
            SignalState::Wait => g >= agent.speed * agent.speed / (2.0 * p.b),
            SignalState::Go => false,
        };
        if must_stop && g > -0.5 && g < gap {
            gap = g.max(1e-3);
            dv = agent.speed;
        }
    }

    let accel = match idm_accel(&p, agent.speed, gap, dv) {
        Ok(a) => a,
        Err(_) => -p.emergency_decel(),
    };
    let (speed, ds) = advance_speed(agent.speed, accel, dt);
    let lateral = own.lateral * (-dt / LATERAL_TAU).exp();
    let s = own.arclength + ds;
    let (centre, tangent) = line.sample_extrapolated(s);
    let heading = if ds > 1e-6 {
        wrap_angle(tangent + ((lateral - own.lateral) / ds).atan())
    } else {
        agent.pose.heading
    };
    let pose = Pose2 {
        position: centre + Vec2::from_angle(tangent).perp() * lateral,
        heading,
    };
    AgentState {
        pose,
        velocity: Vec2::from_angle(heading) * speed,
        speed,
        accel: (speed - agent.speed) / dt,
        lane: Some(lane_idx),
        ..agent.clone()
    }
}

fn coast(agent: &AgentState, dt: f64) -> AgentState {
    let dir = agent.pose.forward();
    AgentState {
        pose: Pose2 {
            position: agent.pose.position + dir * (agent.speed * dt),
            heading: agent.pose.heading,
        },
        velocity: dir * agent.speed,
        accel: 0.0,
        ..agent.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Fires once simulation time reaches the given seconds.
    TimeAt(f64),
    /// Fires at the first step where the footprint gap to the ego is below the given meters.
    EgoGapBelow(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    /// Constant deceleration (m/s²) to standstill along the logged path.
    HardBrake(f64),
    /// Smooth lateral shift of `lateral` meters toward the ego over `duration` seconds at
    /// constant longitudinal speed.
    CutIn { lateral: f64, duration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryScript {
    pub trigger: Trigger,
    pub maneuver: Maneuver,
}

impl AdversaryScript {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("adversary: {m}")));
        match self.maneuver {
            Maneuver::HardBrake(d) if !(d > 0.0 && d <= 9.0) => bad("decel must be in (0, 9] m/s²"),
            Maneuver::CutIn { lateral, duration } if !(lateral > 0.0 && lateral <= 6.0 && duration > 0.0) => {
                bad("cut-in needs 0 < lateral ≤ 6 m and positive duration")
            }
            _ => match self.trigger {
                Trigger::TimeAt(t) if !(t >= 0.0) => bad("trigger time must be non-negative"),
                Trigger::EgoGapBelow(g) if !(g > 0.0) => bad("trigger gap must be positive"),
                _ => Ok(()),
            },
        }
    }
}

/// Which background agent the adversary script takes over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryTarget {
    /// Nearest agent ahead of the ego in its lane at step 0.
    Lead,
    /// Nearest agent ahead of the ego in a neighbouring lane at step 0.
    Adjacent,
    Object(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub script: AdversaryScript,
    pub target: AdversaryTarget,
}

/// Runtime state of a scripted adversary.
#[derive(Debug, Clone)]
pub struct Adversary {
    pub script: AdversaryScript,
    pub track: usize,
    path: Polyline,
    triggered_at: Option<usize>,
    arclength: f64,
    base_lateral: f64,
    lateral_sign: f64,
    speed: f64,
}

impl Adversary {
    pub fn new(scenario: &ScenarioDescription, track: usize, script: AdversaryScript) -> Self {
        let mut pts: Vec<Vec2> = Vec::new();
        for s in scenario.tracks[track].states.iter().filter(|s| s.valid) {
            if pts.last().is_none_or(|p| p.distance(s.pose.position) > 1e-6) {
                pts.push(s.pose.position);
            }
        }
        if pts.len() == 1 {
            let s = scenario.tracks[track].states.iter().find(|s| s.valid).expect("valid state");
            pts.push(pts[0] + s.pose.forward());
        }
        Self {
            script,
            track,
            path: Polyline::new(pts),
            triggered_at: None,
            arclength: 0.0,
            base_lateral: 0.0,
            lateral_sign: 1.0,
            speed: 0.0,
        }
    }

    pub fn triggered_at(&self) -> Option<usize> {
        self.triggered_at
    }

    fn should_trigger(&self, world: &WorldState, agent: &AgentState) -> bool {
        match self.script.trigger {
            Trigger::TimeAt(t) => world.step as f64 * world.dt >= t - 1e-9,
            Trigger::EgoGapBelow(g) => {
                let ego = OrientedBox::new(world.ego.pose, world.ego_dims.length, world.ego_dims.width);
                ego.distance(&agent.footprint()) < g
            }
        }
    }

    /// Advances the adversary from `agent` (its state at `world.step`). Before the trigger
    /// fires the logged state `logged_next` is returned unchanged.
    pub fn step(
        &mut self,
        world: &WorldState,
        agent: &AgentState,
        logged_next: Option<AgentState>,
    ) -> Option<AgentState> {
        if self.triggered_at.is_none() {
            if !self.should_trigger(world, agent) {
                return logged_next;
            }
            self.triggered_at = Some(world.step);
            let proj = self.path.project(agent.pose.position)?;
            self.arclength = proj.arclength;
            self.base_lateral = proj.lateral;
            self.speed = agent.speed.max(0.0);
            let ego_side = self
                .path
                .project(world.ego.pose.position)
                .map_or(0.0, |q| q.lateral - proj.lateral);
            self.lateral_sign = if ego_side < 0.0 { -1.0 } else { 1.0 };
        }
        let start = self.triggered_at.expect("set above");
        let dt = world.dt;
        let (speed, ds, accel) = match self.script.maneuver {
            Maneuver::HardBrake(decel) => {
                let (v, ds) = advance_speed(self.speed, -decel, dt);
                (v, ds, (v - self.speed) / dt)
            }
            Maneuver::CutIn { .. } => (self.speed, self.speed * dt, 0.0),
        };
        let offset_at = |elapsed: f64| match self.script.maneuver {
            Maneuver::CutIn { lateral, duration } => {
                let u = (elapsed / duration).clamp(0.0, 1.0);
                self.lateral_sign * lateral * 0.5 * (1.0 - (std::f64::consts::PI * u).cos())
            }
            Maneuver::HardBrake(_) => 0.0,
        };
        let elapsed = (world.step + 1 - start) as f64 * dt;
        let lat0 = self.base_lateral + offset_at(elapsed - dt);
        let lat1 = self.base_lateral + offset_at(elapsed);
        self.arclength += ds;
        self.speed = speed;
        let (centre, tangent) = self.path.sample_extrapolated(self.arclength);
        let heading = if ds > 1e-6 {
            wrap_angle(tangent + ((lat1 - lat0) / ds).atan())
        } else {
            agent.pose.heading
        };
        Some(AgentState {
            pose: Pose2 {
                position: centre + Vec2::from_angle(tangent).perp() * lat1,
                heading,
            },
            velocity: Vec2::from_angle(heading) * speed,
            speed,
            accel,
            ..agent.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficMode {
    LogReplay,
    Idm,
    Adversarial,
}

/// Stateful background-traffic simulator; cheap to clone for what-if rollouts.
#[derive(Debug, Clone)]
pub struct TrafficSim<'a> {
    scenario: &'a ScenarioDescription,
    map: &'a MapContext,
    ids: Arc<Vec<Arc<str>>>,
    mode: TrafficMode,
    idm: IdmParams,
    adversary: Option<Adversary>,
    step: usize,
    agents: Vec<AgentState>,
    /// IDM agents that have left their lane or entered at a later step.
    spawned: Vec<bool>,
}

impl<'a> TrafficSim<'a> {
    pub fn new(
        scenario: &'a ScenarioDescription,
        map: &'a MapContext,
        mode: TrafficMode,
        idm: IdmParams,
        adversary: Option<&AdversaryConfig>,
    ) -> Result<Self> {
        let ids: Vec<Arc<str>> = scenario
            .tracks
            .iter()
            .map(|t| Arc::from(t.object_id.as_str()))
            .collect();
        let mut agents = replay_with_ids(scenario, &ids, 0)?;
        let mut spawned = vec![false; scenario.tracks.len()];
        for a in &mut agents {
            spawned[a.track] = true;
            if mode == TrafficMode::Idm {
                a.lane = map
                    .aligned_lane(a.pose.position, a.pose.heading)
                    .ok()
                    .filter(|m| m.projection.distance < 3.0)
                    .map(|m| m.lane);
            }
        }
        let adversary = match (mode, adversary) {
            (TrafficMode::Adversarial, Some(cfg)) => {
                cfg.script.validate()?;
                select_target(scenario, &cfg.target).map(|t| Adversary::new(scenario, t, cfg.script))
            }
            (TrafficMode::Adversarial, None) => {
                return Err(Error::Config("adversarial traffic needs an adversary script".into()))
            }
            _ => None,
        };
        Ok(Self {
            scenario,
            map,
            ids: Arc::new(ids),
            mode,
            idm,
            adversary,
            step: 0,
            agents,
            spawned,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn adversary(&self) -> Option<&Adversary> {
        self.adversary.as_ref()
    }

    /// Advances all agents by one step from the same snapshot; `ego` is the ego state at
    /// the current step.
    pub fn step(&mut self, ego: &EgoState, ego_dims: Dims) -> Result<()> {
        let next = self.step + 1;
        let last = self.scenario.step_count - 1;
        let dt = self.scenario.dt;
        let world = WorldState {
            map: self.map,
            step: self.step,
            dt,
            ego: *ego,
            ego_dims,
            agents: std::mem::take(&mut self.agents),
            history: Default::default(),
        };
        let agents = match self.mode {
            TrafficMode::LogReplay => replay_with_ids(self.scenario, &self.ids, next.min(last))?,
            TrafficMode::Adversarial => {
                let mut logged = replay_with_ids(self.scenario, &self.ids, next.min(last))?;
                if let Some(adv) = self.adversary.as_mut() {
                    let current = world.agents.iter().find(|a| a.track == adv.track);
                    let pos = logged.iter().position(|a| a.track == adv.track);
                    if let Some(current) = current {
                        let logged_next = pos.map(|i| logged[i].clone());
                        let out = adv.step(&world, current, logged_next);
                        match (pos, out) {
                            (Some(i), Some(a)) => logged[i] = a,
                            (Some(i), None) => {
                                logged.remove(i);
                            }
                            (None, Some(a)) => {
                                let at = logged.partition_point(|x| x.track < a.track);
                                logged.insert(at, a);
                            }
                            (None, None) => {}
                        }
                    }
                }
                logged
            }
            TrafficMode::Idm => {
                let mut out: Vec<AgentState> = world
                    .agents
                    .iter()
                    .map(|a| idm_agent_step(&world, a, &self.idm, dt))
                    .filter(|a| {
                        a.lane.is_none_or(|l| {
                            self.map.lanes[l]
                                .line
                                .project(a.pose.position)
                                .is_none_or(|p| p.arclength < self.map.lanes[l].line.length() - 1e-6)
                        })
                    })
                    .collect();
                if next <= last {
                    for a in replay_with_ids(self.scenario, &self.ids, next)? {
                        if !self.spawned[a.track] {
                            self.spawned[a.track] = true;
                            let mut a = a;
                            a.lane = self
                                .map
                                .aligned_lane(a.pose.position, a.pose.heading)
                                .ok()
                                .filter(|m| m.projection.distance < 3.0)
                                .map(|m| m.lane);
                            out.push(a);
                        }
                    }
                }
                out.sort_by_key(|a| a.track);
                out
            }
        };
        self.agents = agents;
        self.step = next;
        Ok(())
    }
}

fn select_target(scenario: &ScenarioDescription, target: &AdversaryTarget) -> Option<usize> {
    if let AdversaryTarget::Object(id) = target {
        return scenario.tracks.iter().position(|t| &t.object_id == id);
    }
    let ego = scenario.ego_track()?.states[0].pose;
    let mut best: Option<(f64, usize)> = None;
    for (i, t) in scenario.tracks.iter().enumerate() {
        if t.object_id == scenario.ego_track_id || !t.states[0].valid {
            continue;
        }
        let local = ego.to_local(t.states[0].pose.position);
        let lateral_ok = match target {
            AdversaryTarget::Lead => local.y.abs() < 1.75,
            AdversaryTarget::Adjacent => local.y.abs() >= 1.75 && local.y.abs() < 5.25,
            AdversaryTarget::Object(_) => unreachable!(),
        };
        if local.x > 0.0 && lateral_ok && best.is_none_or(|(d, _)| local.x < d) {
            best = Some((local.x, i));
        }
    }
    best.map(|(_, i)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(p: &IdmParams, v: f64, gap: f64, dv: f64) -> f64 {
        let s_star = p.s0 + v * p.time_headway + v * dv / (2.0 * (p.a_max * p.b).sqrt());
        p.a_max * (1.0 - (v / p.v0).powf(p.delta) - (s_star / gap) * (s_star / gap))
    }

    #[test]
    fn idm_equilibria() {
        let p = IdmParams::default();
        assert!(idm_accel(&p, p.v0, f64::INFINITY, 0.0).unwrap().abs() < 1e-12);
        assert!(idm_accel(&p, 0.0, p.s0, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn idm_matches_formula() {
        let p = IdmParams {
            v0: 10.0,
            time_headway: 1.5,
            s0: 2.0,
            a_max: 1.5,
            b: 2.0,
            delta: 4.0,
        };
        let a = idm_accel(&p, 5.0, 20.0, 2.0).unwrap();
        assert!((a - oracle(&p, 5.0, 20.0, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn idm_rejects_overlap() {
        let p = IdmParams::default();
        assert!(matches!(idm_accel(&p, 5.0, 0.0, 0.0), Err(Error::Overlap(_))));
        assert!(matches!(idm_accel(&p, 5.0, -1.0, 0.0), Err(Error::Overlap(_))));
    }

    #[test]
    fn braking_stops_exactly() {
        let (v, ds) = advance_speed(1.0, -6.0, 0.5);
        assert_eq!(v, 0.0);
        assert!((ds - 1.0 / 12.0).abs() < 1e-15);
    }
}
