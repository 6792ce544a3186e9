//! Open- and closed-loop episode execution and suite runs.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Polyline, Pose2, Vec2};
use crate::map::MapContext;
use crate::metrics::comfort::kinematics_from_states;
use crate::metrics::{
    closed_loop_score, comfort_scores, critical_and_ttc, footprint, lane_keeping, min_ade, route_completion,
    Actor, EvalMode, Features, FrameGeometry, FrameScore, ScorerWeights, SubscoreMeans,
};
use crate::par::par_map;
use crate::policy::{logged_future, Observation, Policy, PolicySpec};
use crate::rng::derive_seed;
use crate::scenario::{Dims, ScenarioDescription};
use crate::traffic::{replay_step, AdversaryConfig, AgentState, IdmParams, TrafficMode, TrafficSim};
use crate::tta::{
    adaptive_replan, argmax, discounted_sum, open_loop_plan_score, plan_rewards, propagate_world,
    select_candidate, transform_remainder, CandidatePlan, History, RolloutConfig, WorldState,
};
use crate::vehicle::{limit_rates, step_bicycle, track_plan, ControlCommand, ControllerParams, EgoState, PidState, MAX_ACCEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scorer {
    /// The policy's own top candidate.
    #[serde(alias = "native")]
    NativeBest,
    TruncatedQ,
    #[serde(alias = "truncated-q+adaptive-replan")]
    TruncatedQReplan,
    /// Candidate maximizing the gated frame-score rollout against the true simulator. An
    /// analysis instrument, not a deployable planner.
    #[serde(alias = "oracle")]
    OracleEpdms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub mode: EvalMode,
    pub traffic: TrafficMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryConfig>,
    pub idm: IdmParams,
    pub sim_dt: f64,
    pub replan_rate: usize,
    pub horizon_steps: usize,
    pub warmup: f64,
    pub scorer: Scorer,
    pub rollout: RolloutConfig,
    pub weights: ScorerWeights,
    pub seed: u64,
    pub controller: ControllerParams,
    pub terminate_on_collision: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: EvalMode::ClosedLoop,
            traffic: TrafficMode::LogReplay,
            adversary: None,
            idm: IdmParams::default(),
            sim_dt: 0.1,
            replan_rate: 5,
            horizon_steps: 80,
            warmup: 2.0,
            scorer: Scorer::NativeBest,
            rollout: RolloutConfig::default(),
            weights: ScorerWeights::default(),
            seed: 0,
            controller: ControllerParams::default(),
            terminate_on_collision: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replan_rate == 0 {
            return Err(Error::validation("replan_rate", "must be at least 1"));
        }
        if self.horizon_steps == 0 {
            return Err(Error::validation("horizon_steps", "must be at least 1"));
        }
        if !(self.sim_dt > 0.0 && self.sim_dt.is_finite()) {
            return Err(Error::validation("sim_dt", "must be positive"));
        }
        if !(self.warmup >= 0.0 && self.warmup.is_finite()) {
            return Err(Error::validation("warmup", "must be non-negative"));
        }
        if self.rollout.horizon < self.replan_rate {
            return Err(Error::validation("rollout.horizon", "must cover at least one replan interval"));
        }
        if self.traffic == TrafficMode::Adversarial {
            match &self.adversary {
                None => return Err(Error::validation("adversary", "adversarial traffic needs a script")),
                Some(a) => a.script.validate()?,
            }
        }
        self.rollout.validate()
    }

    /// Copy with the execution prefix tied to the replan rate.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.rollout.k = c.replan_rate;
        c
    }

    pub fn warmup_steps(&self) -> usize {
        (self.warmup / self.sim_dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl TracePoint {
    fn of(step: usize, s: &EgoState) -> Self {
        Self {
            step,
            x: s.pose.position.x,
            y: s.pose.position.y,
            heading: s.pose.heading,
            speed: s.speed,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub scenario_id: String,
    pub mode: EvalMode,
    pub scorer: Scorer,
    pub policy: PolicySpec,
    pub seed: u64,
    pub horizon_steps: usize,
    pub ds: f64,
    /// Mean per-frame EPDMS, 0 to 100.
    pub epdms_mean: f64,
    pub rc: f64,
    pub subscores: SubscoreMeans,
    pub frame_count: usize,
    pub collisions: usize,
    pub terminated: bool,
    pub emergency_brakes: usize,
    pub plan_switches: usize,
    pub retained: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_ade: Option<f64>,
    pub config: EngineConfig,
    /// Logged ego path that defines route completion.
    pub route: Vec<Vec2>,
    pub frames: Vec<FrameScore>,
    pub trace: Vec<TracePoint>,
    /// Seconds spent; excluded from serialization so reports are reproducible.
    #[serde(skip)]
    pub wallclock: f64,
}

impl EpisodeReport {
    /// Canonical JSON bytes.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    /// Recomputes every frame score from its recorded gates and features, route
    /// completion from the trace, and the Driving Score; returns the recomputed DS.
    pub fn recompute_ds(&self) -> Result<f64> {
        for f in &self.frames {
            let again = FrameScore::new(f.step, f.critical(), f.features(), &self.config.weights, self.mode)?;
            if (again.epdms - f.epdms).abs() > 1e-12 {
                return Err(Error::Validation {
                    field: format!("frames[step={}].epdms", f.step),
                    reason: format!("recorded {} but recomputed {}", f.epdms, again.epdms),
                });
            }
        }
        let rc = match self.mode {
            EvalMode::OpenLoop => 1.0,
            EvalMode::ClosedLoop => {
                let path: Vec<Vec2> = self.trace.iter().map(TracePoint::position).collect();
                route_completion(&path, &Polyline::new(self.route.clone()))
            }
        };
        Ok(closed_loop_score(rc, &self.frames))
    }
}

fn logged_ego(scenario: &ScenarioDescription, step: usize) -> Result<EgoState> {
    let track = scenario
        .ego_track()
        .ok_or_else(|| Error::Policy("no ego track".into()))?;
    let s = track.states.get(step).ok_or(Error::StepOutOfRange {
        step,
        len: scenario.step_count,
    })?;
    let speed = s.velocity.dot(s.pose.forward());
    let (accel, yaw_rate) = match step.checked_sub(1).map(|p| track.states[p]) {
        Some(p) if p.valid => (
            (speed - p.velocity.dot(p.pose.forward())) / scenario.dt,
            crate::geometry::wrap_angle(s.pose.heading - p.pose.heading) / scenario.dt,
        ),
        _ => (0.0, 0.0),
    };
    Ok(EgoState {
        pose: s.pose,
        speed,
        accel,
        yaw_rate,
    })
}

fn lane_offset(map: &MapContext, pose: &Pose2) -> (f64, Option<f64>) {
    match map.aligned_lane(pose.position, pose.heading) {
        Ok(m) => (m.projection.lateral, Some(m.projection.heading)),
        Err(_) => (0.0, None),
    }
}

fn route_points(scenario: &ScenarioDescription, from: usize, to: usize) -> Result<Vec<Vec2>> {
    let mut pts: Vec<Vec2> = Vec::new();
    for k in from..=to {
        let p = logged_ego(scenario, k)?.pose.position;
        if pts.last().is_none_or(|q| q.distance(p) > 1e-6) {
            pts.push(p);
        }
    }
    if pts.len() == 1 {
        pts.push(pts[0]);
    }
    Ok(pts)
}

/// Seed for the policy in one episode, a pure function of the run seed and scenario id.
pub fn episode_seed(seed: u64, scenario_id: &str) -> u64 {
    let digest = Sha256::digest(scenario_id.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    derive_seed(seed, &[u64::from_le_bytes(b)])
}

fn check_lengths(scenario: &ScenarioDescription, cfg: &EngineConfig) -> Result<usize> {
    if (scenario.dt - cfg.sim_dt).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "scenario dt {} differs from sim_dt {}",
            scenario.dt, cfg.sim_dt
        )));
    }
    let t0 = cfg.warmup_steps();
    if scenario.step_count < t0 + cfg.horizon_steps + 1 {
        return Err(Error::StepOutOfRange {
            step: t0 + cfg.horizon_steps,
            len: scenario.step_count,
        });
    }
    Ok(t0)
}

fn ego_actor(state: &EgoState, dims: Dims) -> Actor {
    Actor {
        footprint: footprint(state.pose, dims),
        velocity: state.velocity(),
        accel: state.accel_vector(),
    }
}

/// Runs one episode in the configured mode.
pub fn run_episode(
    scenario: &ScenarioDescription,
    spec: &PolicySpec,
    cfg: &EngineConfig,
) -> Result<EpisodeReport> {
    let mut policy = spec.build(episode_seed(cfg.seed, &scenario.id))?;
    match cfg.mode {
        EvalMode::OpenLoop => run_open_loop(scenario, policy.as_mut(), spec, cfg),
        EvalMode::ClosedLoop => run_closed_loop(scenario, policy.as_mut(), spec, cfg),
    }
}

struct Meta<'a> {
    scenario: &'a ScenarioDescription,
    spec: &'a PolicySpec,
    cfg: &'a EngineConfig,
}

impl Meta<'_> {
    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        rc: f64,
        frames: Vec<FrameScore>,
        trace: Vec<TracePoint>,
        route: Vec<Vec2>,
        counters: Counters,
        min_ade: Option<f64>,
        started: Instant,
    ) -> EpisodeReport {
        let epdms_mean = if frames.is_empty() {
            0.0
        } else {
            100.0 * frames.iter().map(|f| f.epdms).sum::<f64>() / frames.len() as f64
        };
        EpisodeReport {
            scenario_id: self.scenario.id.clone(),
            mode: self.cfg.mode,
            scorer: self.cfg.scorer,
            policy: self.spec.clone(),
            seed: self.cfg.seed,
            horizon_steps: self.cfg.horizon_steps,
            ds: closed_loop_score(rc, &frames),
            epdms_mean,
            rc,
            subscores: SubscoreMeans::of(&frames),
            frame_count: frames.len(),
            collisions: counters.collisions,
            terminated: counters.terminated,
            emergency_brakes: counters.emergency_brakes,
            plan_switches: counters.plan_switches,
            retained: counters.retained,
            min_ade,
            config: self.cfg.clone(),
            route,
            frames,
            trace,
            wallclock: started.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counters {
    collisions: usize,
    terminated: bool,
    emergency_brakes: usize,
    plan_switches: usize,
    retained: usize,
}

/// Non-reactive evaluation: the ego replays the log while each tick's native plan is scored
/// against the logged future over its whole horizon.
pub fn run_open_loop(
    scenario: &ScenarioDescription,
    policy: &mut dyn Policy,
    spec: &PolicySpec,
    cfg: &EngineConfig,
) -> Result<EpisodeReport> {
    let started = Instant::now();
    cfg.validate()?;
    let cfg = &cfg.resolved();
    let t0 = check_lengths(scenario, cfg)?;
    let map = MapContext::new(scenario);
    let dims = scenario.ego_track().map(|t| t.dims).unwrap_or(Dims::CAR);
    let last = scenario.step_count - 1;
    let h = cfg.rollout.horizon;
    let mut history = History::with_capacity(history_capacity(cfg));
    for k in 0..t0 {
        let s = logged_ego(scenario, k)?;
        history.push(s, lane_offset(&map, &s.pose).0);
    }
    let mut frames = Vec::new();
    let mut trace = Vec::new();
    let mut ades = Vec::new();
    for t in t0..=t0 + cfg.horizon_steps {
        let ego = logged_ego(scenario, t)?;
        history.push(ego, lane_offset(&map, &ego.pose).0);
        trace.push(TracePoint::of(t, &ego));
        if t == t0 + cfg.horizon_steps || (t - t0) % cfg.replan_rate != 0 {
            continue;
        }
        let agents = replay_step(scenario, t)?;
        let obs = Observation {
            step: t,
            dt: cfg.sim_dt,
            horizon: h,
            ego: &ego,
            agents: &agents,
            map: &map,
            scenario,
            history: &history,
        };
        let out = policy.propose(&obs)?;
        out.validate()?;
        let snapshots: Vec<Vec<AgentState>> = (1..=h)
            .map(|i| replay_step(scenario, (t + i).min(last)))
            .collect::<Result<_>>()?;
        let (here, gt) = logged_future(scenario, t, h)?;
        let expert_len = gt
            .iter()
            .scan(here, |prev, p| {
                let d = p.distance(*prev);
                *prev = *p;
                Some(d)
            })
            .sum::<f64>();
        let world = WorldState {
            map: &map,
            step: t,
            dt: cfg.sim_dt,
            ego,
            ego_dims: dims,
            agents: agents.clone(),
            history: history.clone(),
        };
        let plan = out.native();
        let (c, f) = open_loop_plan_score(&world, &snapshots, plan, expert_len, &cfg.weights);
        frames.push(FrameScore::new(t, c, f, &cfg.weights, EvalMode::OpenLoop)?);
        let cands: Vec<Vec<Vec2>> = out.candidates.iter().map(|c| c.world_points(&ego.pose)).collect();
        ades.push(min_ade(&cands, &gt)?);
    }
    let route = route_points(scenario, t0, t0 + cfg.horizon_steps)?;
    let min_ade = (!ades.is_empty()).then(|| ades.iter().sum::<f64>() / ades.len() as f64);
    let meta = Meta { scenario, spec, cfg };
    Ok(meta.report(1.0, frames, trace, route, Counters::default(), min_ade, started))
}

fn history_capacity(cfg: &EngineConfig) -> usize {
    let w = &cfg.weights;
    let secs = w.lk_window.max(w.hc_window).max(w.ec_window) + 0.5;
    (secs / cfg.sim_dt).ceil() as usize + 2
}

/// Ego state implied by a plan at waypoint `i` (time `(i + 1)·dt` after `origin`).
fn plan_state(points: &[Vec2], i: usize, dt: f64, prev_heading: f64) -> EgoState {
    let p = points[i + 1];
    let d = p - points[i];
    let heading = if d.norm() > 0.05 { d.angle() } else { prev_heading };
    EgoState {
        pose: Pose2::new(p.x, p.y, heading),
        speed: d.norm() / dt,
        accel: 0.0,
        yaw_rate: 0.0,
    }
}

/// True-simulator snapshots of the traffic while the ego follows `plan` exactly.
fn oracle_snapshots(
    traffic: &TrafficSim,
    ego: &EgoState,
    dims: Dims,
    plan: &CandidatePlan,
    steps: usize,
) -> Result<Vec<Vec<AgentState>>> {
    let mut sim = traffic.clone();
    let mut points = Vec::with_capacity(plan.waypoints.len() + 1);
    points.push(ego.pose.position);
    points.extend(plan.world_points(&ego.pose));
    let mut state = *ego;
    let mut out = Vec::with_capacity(steps);
    for i in 0..steps.min(plan.waypoints.len()) {
        sim.step(&state, dims)?;
        out.push(sim.agents().to_vec());
        state = plan_state(&points, i, plan.dt, state.pose.heading);
    }
    Ok(out)
}

/// Reactive evaluation: the ego is driven by the controllers tracking the selected plan.
pub fn run_closed_loop(
    scenario: &ScenarioDescription,
    policy: &mut dyn Policy,
    spec: &PolicySpec,
    cfg: &EngineConfig,
) -> Result<EpisodeReport> {
    let started = Instant::now();
    cfg.validate()?;
    let cfg = &cfg.resolved();
    let t0 = check_lengths(scenario, cfg)?;
    let dt = cfg.sim_dt;
    let map = MapContext::new(scenario);
    let dims = scenario.ego_track().map(|t| t.dims).unwrap_or(Dims::CAR);
    let mut traffic = TrafficSim::new(scenario, &map, cfg.traffic, cfg.idm, cfg.adversary.as_ref())?;
    let mut history = History::with_capacity(history_capacity(cfg));
    let mut ego = logged_ego(scenario, 0)?;
    for k in 0..t0 {
        history.push(ego, lane_offset(&map, &ego.pose).0);
        traffic.step(&ego, dims)?;
        ego = logged_ego(scenario, k + 1)?;
    }
    history.push(ego, lane_offset(&map, &ego.pose).0);

    let route = route_points(scenario, t0, t0 + cfg.horizon_steps)?;
    let route_line = Polyline::new(route.clone());
    let mut path = vec![ego.pose.position];
    let mut trace = vec![TracePoint::of(t0, &ego)];
    let mut frames = Vec::with_capacity(cfg.horizon_steps);
    let mut counters = Counters::default();
    let mut pid = PidState::default();
    let mut prev_cmd = ControlCommand {
        accel: ego.accel.clamp(-MAX_ACCEL, MAX_ACCEL),
        curvature: 0.0,
    };
    let mut plan: Option<(CandidatePlan, Pose2, usize)> = None;
    let mut hc = 1.0;
    let ec_n = (cfg.weights.ec_window / dt).round() as usize;
    let h = cfg.rollout.horizon;

    for t in t0..t0 + cfg.horizon_steps {
        if (t - t0) % cfg.replan_rate == 0 {
            let agents = traffic.agents().to_vec();
            let obs = Observation {
                step: t,
                dt,
                horizon: h,
                ego: &ego,
                agents: &agents,
                map: &map,
                scenario,
                history: &history,
            };
            let out = policy.propose(&obs)?;
            out.validate()?;
            let world = WorldState {
                map: &map,
                step: t,
                dt,
                ego,
                ego_dims: dims,
                agents,
                history: history.clone(),
            };
            let chosen = match cfg.scorer {
                Scorer::NativeBest => out.native().clone(),
                Scorer::TruncatedQ => {
                    let snaps = propagate_world(&world, h, cfg.rollout.propagation);
                    let (i, _) = select_candidate(&world, &snaps, &out.candidates, &cfg.rollout)?;
                    out.candidates[i].clone()
                }
                Scorer::TruncatedQReplan => {
                    let snaps = propagate_world(&world, h, cfg.rollout.propagation);
                    let remainder = plan
                        .as_ref()
                        .and_then(|(p, origin, start)| transform_remainder(p, origin, t - start, &ego.pose));
                    let had_remainder = remainder.is_some();
                    let d = adaptive_replan(&world, &snaps, remainder.as_ref(), &out.candidates, &cfg.rollout)?;
                    if d.retained {
                        counters.retained += 1;
                    } else if had_remainder {
                        counters.plan_switches += 1;
                    }
                    d.plan
                }
                Scorer::OracleEpdms => {
                    let values = par_map(&out.candidates, |c| {
                        oracle_snapshots(&traffic, &ego, dims, c, h).map(|snaps| {
                            let r = plan_rewards(&world, &snaps, c, h, &cfg.rollout.weights);
                            discounted_sum(&r, cfg.rollout.gamma, h)
                        })
                    })
                    .into_iter()
                    .collect::<Result<Vec<f64>>>()?;
                    let i = argmax(&values).ok_or(Error::Empty("no candidate plans"))?;
                    out.candidates[i].clone()
                }
            };
            let pts = chosen.world_points(&ego.pose);
            hc = comfort_scores(&history.positions(), &pts, dt, cfg.weights.hc_window, &cfg.weights.comfort).0;
            plan = Some((chosen, ego.pose, t));
        }

        let (current, origin, start) = plan.as_ref().expect("a plan is issued at the first tick");
        let elapsed = (t - start) as f64 * dt;
        let cmd = match track_plan(&ego, pid, current, origin, elapsed, &cfg.controller) {
            Ok((cmd, next_pid)) => {
                pid = next_pid;
                limit_rates(cmd, prev_cmd, &cfg.controller, dt)
            }
            Err(_) => {
                counters.emergency_brakes += 1;
                ControlCommand {
                    accel: -MAX_ACCEL,
                    curvature: prev_cmd.curvature,
                }
            }
        };
        prev_cmd = cmd;
        let next = step_bicycle(&ego, &cmd, dt)?;
        traffic.step(&ego, dims)?;

        let (offset, lane_heading) = lane_offset(&map, &next.pose);
        history.push(next, offset);
        let geo = FrameGeometry {
            map: &map,
            step: t + 1,
            ego: ego_actor(&next, dims),
            ego_prev: ego.pose.position,
            ego_heading: next.pose.heading,
            lane_heading,
            agents: traffic.agents(),
        };
        let (critical, ttc) = critical_and_ttc(&geo, &cfg.weights);
        let ec = kinematics_from_states(&history.states, dt).map_or(1.0, |k| {
            let tail = &k[k.len().saturating_sub(ec_n)..];
            f64::from(u8::from(tail.iter().all(|s| s.within(&cfg.weights.comfort))))
        });
        let features = Features {
            ttc,
            lk: lane_keeping(&history.offsets, dt, cfg.weights.lk_offset_threshold, cfg.weights.lk_window),
            hc,
            ec,
            ep: None,
        };
        frames.push(FrameScore::new(t + 1, critical, features, &cfg.weights, EvalMode::ClosedLoop)?);
        ego = next;
        path.push(ego.pose.position);
        trace.push(TracePoint::of(t + 1, &ego));

        if !critical.nc {
            counters.collisions += 1;
            if cfg.terminate_on_collision {
                counters.terminated = true;
                break;
            }
        }
        if route_completion(&path, &route_line) >= 1.0 {
            break;
        }
    }
    let rc = route_completion(&path, &route_line);
    let meta = Meta { scenario, spec, cfg };
    Ok(meta.report(rc, frames, trace, route, counters, None, started))
}

/// Report of the same closed-loop episode had it been run with a shorter horizon `t`.
/// Valid because nothing before step `t0 + t` depends on the horizon except the stopping
/// rules, which are re-applied here.
pub fn rescore_horizon(scenario: &ScenarioDescription, report: &EpisodeReport, t: usize) -> Result<EpisodeReport> {
    if report.mode != EvalMode::ClosedLoop {
        return Err(Error::Config("only closed-loop reports can be rescored".into()));
    }
    if t == 0 || t > report.horizon_steps {
        return Err(Error::Config(format!(
            "horizon {t} outside 1..={}",
            report.horizon_steps
        )));
    }
    let mut cfg = report.config.clone();
    cfg.horizon_steps = t;
    let t0 = check_lengths(scenario, &cfg)?;
    let route = route_points(scenario, t0, t0 + t)?;
    let line = Polyline::new(route.clone());
    let mut path = vec![report.trace[0].position()];
    let mut frames = Vec::new();
    let mut trace = vec![report.trace[0]];
    let mut counters = Counters::default();
    for (f, p) in report.frames.iter().zip(&report.trace[1..]) {
        if f.step > t0 + t {
            break;
        }
        frames.push(*f);
        trace.push(*p);
        path.push(p.position());
        if !f.nc {
            counters.collisions += 1;
            if cfg.terminate_on_collision {
                counters.terminated = true;
                break;
            }
        }
        if route_completion(&path, &line) >= 1.0 {
            break;
        }
    }
    let rc = route_completion(&path, &line);
    let epdms_mean = if frames.is_empty() {
        0.0
    } else {
        100.0 * frames.iter().map(|f| f.epdms).sum::<f64>() / frames.len() as f64
    };
    Ok(EpisodeReport {
        horizon_steps: t,
        ds: closed_loop_score(rc, &frames),
        epdms_mean,
        rc,
        subscores: SubscoreMeans::of(&frames),
        frame_count: frames.len(),
        collisions: counters.collisions,
        terminated: counters.terminated,
        config: cfg,
        route,
        frames,
        trace,
        ..report.clone()
    })
}

/// Runs every scenario independently, in parallel when enabled; results keep input order
/// and failures do not stop the suite.
pub fn run_suite(
    scenarios: &[ScenarioDescription],
    spec: &PolicySpec,
    cfg: &EngineConfig,
) -> Vec<Result<EpisodeReport>> {
    par_map(scenarios, |s| run_episode(s, spec, cfg))
}

pub const SUITE_COLUMNS: [&str; 14] = [
    "scenario_id",
    "ds",
    "epdms_mean",
    "rc",
    "nc",
    "dac",
    "tlc",
    "ddc",
    "lk",
    "ttc",
    "hc",
    "ec",
    "frames",
    "seed",
];

/// Suite CSV, one row per report.
pub fn suite_csv(reports: &[EpisodeReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUITE_COLUMNS)?;
    for r in reports {
        let s = &r.subscores;
        w.write_record([
            r.scenario_id.clone(),
            r.ds.to_string(),
            r.epdms_mean.to_string(),
            r.rc.to_string(),
            s.nc.to_string(),
            s.dac.to_string(),
            s.tlc.to_string(),
            s.ddc.to_string(),
            s.lk.to_string(),
            s.ttc.to_string(),
            s.hc.to_string(),
            s.ec.to_string(),
            r.frame_count.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
