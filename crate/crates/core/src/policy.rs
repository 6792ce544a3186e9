//! Policy adapter contract and the built-in synthetic planners.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polyline, Pose2, Vec2};
use crate::map::MapContext;
use crate::rng::stream;
use crate::scenario::ScenarioDescription;
use crate::traffic::AgentState;
use crate::tta::{CandidatePlan, History};
use crate::vehicle::EgoState;

/// Everything a policy sees at a replan tick.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub step: usize,
    pub dt: f64,
    /// Number of waypoints to emit.
    pub horizon: usize,
    pub ego: &'a EgoState,
    pub agents: &'a [AgentState],
    pub map: &'a MapContext,
    pub scenario: &'a ScenarioDescription,
    pub history: &'a History,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub candidates: Vec<CandidatePlan>,
    pub native_best: usize,
}

impl PolicyOutput {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .candidates
            .first()
            .ok_or_else(|| Error::Policy("no candidates".into()))?;
        if self.native_best >= self.candidates.len() {
            return Err(Error::Policy(format!("native_best {} out of range", self.native_best)));
        }
        for c in &self.candidates {
            c.validate()?;
            if c.horizon() != first.horizon() || c.dt != first.dt {
                return Err(Error::Policy("candidates disagree on horizon or dt".into()));
            }
        }
        Ok(())
    }

    pub fn native(&self) -> &CandidatePlan {
        &self.candidates[self.native_best]
    }
}

pub trait Policy: Send {
    fn propose(&mut self, obs: &Observation) -> Result<PolicyOutput>;
}

/// Serializable policy selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    Expert,
    ConstantVelocity,
    NoisyExpert {
        sigma: f64,
        n: usize,
        #[serde(default)]
        drift: f64,
        #[serde(default)]
        accel_spread: f64,
    },
    Lattice {
        speeds: Vec<f64>,
        curvatures: Vec<f64>,
    },
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |r: &str| Err(Error::validation("policy", r));
        match self {
            PolicySpec::NoisyExpert { sigma, n, drift, accel_spread } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return bad("sigma must be non-negative");
                }
                if *n == 0 {
                    return bad("n must be at least 1");
                }
                if !drift.is_finite() || !(*accel_spread >= 0.0 && accel_spread.is_finite()) {
                    return bad("drift must be finite and accel_spread non-negative");
                }
            }
            PolicySpec::Lattice { speeds, curvatures } => {
                if speeds.is_empty() || curvatures.is_empty() {
                    return bad("lattice grids must be non-empty");
                }
                if speeds.iter().chain(curvatures).any(|x| !x.is_finite()) || speeds.iter().any(|&v| v < 0.0) {
                    return bad("lattice speeds must be non-negative and finite");
                }
            }
            PolicySpec::Expert | PolicySpec::ConstantVelocity => {}
        }
        Ok(())
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn Policy>> {
        self.validate()?;
        Ok(match self.clone() {
            PolicySpec::Expert => Box::new(ExpertReplay),
            PolicySpec::ConstantVelocity => Box::new(ConstantVelocity),
            PolicySpec::NoisyExpert { sigma, n, drift, accel_spread } => Box::new(NoisyExpert {
                sigma,
                n,
                drift,
                accel_spread,
                seed,
            }),
            PolicySpec::Lattice { speeds, curvatures } => Box::new(Lattice { speeds, curvatures }),
        })
    }

    /// Short label for tables.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Expert => "expert".into(),
            PolicySpec::ConstantVelocity => "constant-velocity".into(),
            PolicySpec::NoisyExpert { sigma, n, drift, accel_spread } => {
                format!("noisy-expert(sigma={sigma},n={n},drift={drift},spread={accel_spread})")
            }
            PolicySpec::Lattice { speeds, curvatures } => {
                format!("lattice({}x{})", speeds.len(), curvatures.len())
            }
        }
    }
}

/// Logged ego position at `step` and the logged positions `1..=horizon` steps later, in
/// world coordinates. The log is extended at constant velocity past its end.
pub fn logged_future(scenario: &ScenarioDescription, step: usize, horizon: usize) -> Result<(Vec2, Vec<Vec2>)> {
    let ego = scenario
        .ego_track()
        .ok_or_else(|| Error::Policy("scenario has no ego track".into()))?;
    let valid: Vec<usize> = (0..ego.states.len()).filter(|&k| ego.states[k].valid).collect();
    let last = *valid.last().ok_or_else(|| Error::Policy("ego never valid".into()))?;
    let state_at = |k: usize| {
        let k = k.min(last);
        // Nearest valid state at or before k.
        let idx = valid[valid.partition_point(|&v| v <= k).saturating_sub(1)];
        ego.states[idx]
    };
    let tail = ego.states[last];
    let pts = (1..=horizon)
        .map(|i| {
            let k = step + i;
            if k <= last {
                state_at(k).pose.position
            } else {
                tail.pose.position + tail.velocity * ((k - last) as f64 * scenario.dt)
            }
        })
        .collect();
    Ok((state_at(step).pose.position, pts))
}

/// Logged future as a plan from the current ego pose `frame`. Any offset between the ego
/// and its logged position is blended out smoothly over the horizon (raised cosine), so the
/// plan starts where the ego is and ends on the log.
pub fn expert_future(
    scenario: &ScenarioDescription,
    step: usize,
    horizon: usize,
    frame: &Pose2,
) -> Result<Vec<Vec2>> {
    let (here, pts) = logged_future(scenario, step, horizon)?;
    let offset = here - frame.position;
    let n = pts.len() as f64;
    Ok(pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let blend = 0.5 * (1.0 + (PI * (i + 1) as f64 / n).cos());
            frame.to_local(*p - offset * blend)
        })
        .collect())
}

fn logged_speed(scenario: &ScenarioDescription, step: usize) -> f64 {
    scenario
        .ego_track()
        .and_then(|t| t.states.get(step))
        .filter(|s| s.valid)
        .map_or(0.0, |s| s.velocity.norm())
}

fn plan(waypoints: Vec<Vec2>, dt: f64, id: usize) -> CandidatePlan {
    CandidatePlan {
        waypoints,
        dt,
        policy_score: None,
        id,
    }
}

/// Replays the logged ego future, expressed relative to the current ego pose.
#[derive(Debug, Clone, Copy)]
pub struct ExpertReplay;

impl Policy for ExpertReplay {
    fn propose(&mut self, obs: &Observation) -> Result<PolicyOutput> {
        let pts = expert_future(obs.scenario, obs.step, obs.horizon, &obs.ego.pose)?;
        Ok(PolicyOutput {
            candidates: vec![plan(pts, obs.dt, 0)],
            native_best: 0,
        })
    }
}

/// Holds the current speed straight ahead.
#[derive(Debug, Clone, Copy)]
pub struct ConstantVelocity;

impl Policy for ConstantVelocity {
    fn propose(&mut self, obs: &Observation) -> Result<PolicyOutput> {
        let v = obs.ego.speed.max(0.0);
        let pts = (1..=obs.horizon)
            .map(|i| Vec2::new(v * obs.dt * i as f64, 0.0))
            .collect();
        Ok(PolicyOutput {
            candidates: vec![plan(pts, obs.dt, 0)],
            native_best: 0,
        })
    }
}

/// Expert future plus smooth perturbations, with a native choice that ignores quality.
///
/// Candidate 0 is the expert. Each other candidate bends laterally by a half-sine of
/// amplitude `sigma·U[0.5, 1.5]` (random side) and is re-timed along the expert path: the
/// logged speed profile, shifted by the ego's current speed offset from the log, plus an
/// acceleration offset `drift + accel_spread·U(−1, 1)`. Speed errors therefore compound.
/// The native choice is drawn from its own stream and slotted at a random index, so it is
/// the same plan whatever `n` is.
#[derive(Debug, Clone)]
pub struct NoisyExpert {
    pub sigma: f64,
    pub n: usize,
    pub drift: f64,
    pub accel_spread: f64,
    pub seed: u64,
}

const NATIVE_STREAM: u64 = u64::MAX;
const SLOT_STREAM: u64 = u64::MAX - 1;

impl NoisyExpert {
    /// `logged_s` is the logged arclength travelled by each waypoint time; the path itself is
    /// the expert plan.
    fn perturbed(&self, expert: &[Vec2], logged_s: &[f64], speed_offset: f64, dt: f64, keys: &[u64]) -> Vec<Vec2> {
        let mut rng = stream(self.seed, keys);
        let amplitude = self.sigma * rng.random_range(0.5..=1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let accel = self.drift + self.accel_spread * rng.random_range(-1.0..=1.0);
        let mut pts = vec![Vec2::ZERO];
        for p in expert {
            if p.distance(*pts.last().expect("non-empty")) > 1e-6 {
                pts.push(*p);
            }
        }
        let path = if pts.len() < 2 {
            Polyline::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)])
        } else {
            Polyline::new(pts)
        };
        let h = expert.len();
        let mut travelled = 0.0f64;
        (0..h)
            .map(|i| {
                let t = (i + 1) as f64 * dt;
                let s = (logged_s[i] + speed_offset * t + 0.5 * accel * t * t).max(travelled);
                travelled = s;
                let (p, heading) = path.sample_extrapolated(s);
                let lateral = amplitude * (PI * (i + 1) as f64 / h as f64).sin();
                p + Vec2::from_angle(heading).perp() * lateral
            })
            .collect()
    }
}

impl Policy for NoisyExpert {
    fn propose(&mut self, obs: &Observation) -> Result<PolicyOutput> {
        let expert = expert_future(obs.scenario, obs.step, obs.horizon, &obs.ego.pose)?;
        let (here, logged) = logged_future(obs.scenario, obs.step, obs.horizon)?;
        let logged_s: Vec<f64> = logged
            .iter()
            .scan((here, 0.0), |(prev, s), p| {
                *s += p.distance(*prev);
                *prev = *p;
                Some(*s)
            })
            .collect();
        let speed_offset = obs.ego.speed - logged_speed(obs.scenario, obs.step);
        let step = obs.step as u64;
        let mut candidates = vec![plan(expert.clone(), obs.dt, 0)];
        if self.n == 1 {
            return Ok(PolicyOutput {
                candidates,
                native_best: 0,
            });
        }
        let slot = stream(self.seed, &[step, SLOT_STREAM]).random_range(1..self.n);
        for j in 1..self.n {
            let keys = if j == slot { [step, NATIVE_STREAM] } else { [step, j as u64] };
            candidates.push(plan(self.perturbed(&expert, &logged_s, speed_offset, obs.dt, &keys), obs.dt, j));
        }
        Ok(PolicyOutput {
            candidates,
            native_best: slot,
        })
    }
}

/// Constant-speed, constant-curvature arcs over a speed × curvature grid.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub speeds: Vec<f64>,
    pub curvatures: Vec<f64>,
}

/// Point reached after arclength `s` on a circle of curvature `kappa` leaving the origin
/// along +x.
pub fn arc_point(kappa: f64, s: f64) -> Vec2 {
    if kappa.abs() < 1e-9 {
        Vec2::new(s, 0.0)
    } else {
        Vec2::new((kappa * s).sin() / kappa, (1.0 - (kappa * s).cos()) / kappa)
    }
}

impl Policy for Lattice {
    fn propose(&mut self, obs: &Observation) -> Result<PolicyOutput> {
        let mut candidates = Vec::with_capacity(self.speeds.len() * self.curvatures.len());
        let mut native = 0;
        let mut native_cost = f64::INFINITY;
        for &v in &self.speeds {
            for &k in &self.curvatures {
                let id = candidates.len();
                let pts = (1..=obs.horizon)
                    .map(|i| arc_point(k, v * obs.dt * i as f64))
                    .collect();
                candidates.push(plan(pts, obs.dt, id));
                let cost = (v - obs.ego.speed).abs() + 100.0 * k.abs();
                if cost < native_cost {
                    native_cost = cost;
                    native = id;
                }
            }
        }
        Ok(PolicyOutput {
            candidates,
            native_best: native,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures::straight_road;

    fn observe<'a>(
        s: &'a ScenarioDescription,
        map: &'a MapContext,
        ego: &'a EgoState,
        history: &'a History,
    ) -> Observation<'a> {
        Observation {
            step: 20,
            dt: 0.1,
            horizon: 40,
            ego,
            agents: &[],
            map,
            scenario: s,
            history,
        }
    }

    fn logged_ego(s: &ScenarioDescription, step: usize) -> EgoState {
        let st = s.ego_track().unwrap().states[step];
        EgoState {
            pose: st.pose,
            speed: st.velocity.norm(),
            accel: 0.0,
            yaw_rate: 0.0,
        }
    }

    #[test]
    fn expert_and_constant_velocity() {
        let s = straight_road(100, 5.0);
        let map = MapContext::new(&s);
        let ego = logged_ego(&s, 20);
        let h = History::default();
        let obs = observe(&s, &map, &ego, &h);
        let out = ExpertReplay.propose(&obs).unwrap();
        assert_eq!(out.candidates.len(), 1);
        for (i, w) in out.candidates[0].waypoints.iter().enumerate() {
            assert!(w.distance(Vec2::new(0.5 * (i + 1) as f64, 0.0)) < 1e-9);
        }
        let cv = ConstantVelocity.propose(&obs).unwrap();
        assert_eq!(cv.candidates[0].waypoints[3], Vec2::new(5.0 * 0.1 * 4.0, 0.0));
        // Past the log end the expert keeps its final velocity.
        let late_ego = logged_ego(&s, 95);
        let late = Observation { step: 95, ego: &late_ego, ..obs };
        let out = ExpertReplay.propose(&late).unwrap();
        assert!(out.candidates[0].waypoints[39].distance(Vec2::new(20.0, 0.0)) < 1e-9);
    }

    #[test]
    fn expert_blends_out_ego_offset() {
        let s = straight_road(100, 5.0);
        let map = MapContext::new(&s);
        let mut ego = logged_ego(&s, 20);
        ego.pose.position.y += 0.4;
        let h = History::default();
        let obs = observe(&s, &map, &ego, &h);
        let w = &ExpertReplay.propose(&obs).unwrap().candidates[0].waypoints;
        // Starts near the ego's lateral offset, ends on the log.
        assert!((w[0].y + 0.4 * (1.0 - 0.5 * (1.0 + (PI / 40.0).cos()))).abs() < 1e-9);
        assert!((w[39].y + 0.4).abs() < 1e-9);
        assert!((w[39].x - 20.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_expert_properties() {
        let s = straight_road(100, 5.0);
        let map = MapContext::new(&s);
        let ego = logged_ego(&s, 20);
        let h = History::default();
        let obs = observe(&s, &map, &ego, &h);
        let expert = ExpertReplay.propose(&obs).unwrap().candidates.remove(0);

        let spec = PolicySpec::NoisyExpert { sigma: 0.0, n: 6, drift: 0.0, accel_spread: 0.0 };
        let out = spec.build(3).unwrap().propose(&obs).unwrap();
        for c in &out.candidates {
            for (a, b) in c.waypoints.iter().zip(&expert.waypoints) {
                assert!(a.distance(*b) < 1e-9);
            }
        }

        let spec = PolicySpec::NoisyExpert { sigma: 2.0, n: 8, drift: 0.0, accel_spread: 0.0 };
        let a = spec.build(11).unwrap().propose(&obs).unwrap();
        let b = spec.build(11).unwrap().propose(&obs).unwrap();
        assert_eq!(a, b);
        let max_dev = a
            .candidates
            .iter()
            .flat_map(|c| c.waypoints.iter().map(|w| w.y.abs()))
            .fold(0.0, f64::max);
        assert!((1.0..=3.0).contains(&max_dev), "{max_dev}");

        let spec = PolicySpec::NoisyExpert { sigma: 0.0, n: 4, drift: 0.5, accel_spread: 0.0 };
        let out = spec.build(1).unwrap().propose(&obs).unwrap();
        let end = |c: &CandidatePlan| c.waypoints.last().unwrap().x;
        assert!(out.candidates[1..].iter().all(|c| end(c) > end(&expert) + 1.0));
    }

    #[test]
    fn native_choice_is_coupled_across_n() {
        let s = straight_road(100, 5.0);
        let map = MapContext::new(&s);
        let ego = logged_ego(&s, 20);
        let h = History::default();
        let obs = observe(&s, &map, &ego, &h);
        let native = |n| {
            let spec = PolicySpec::NoisyExpert { sigma: 1.0, n, drift: 0.2, accel_spread: 0.5 };
            spec.build(9).unwrap().propose(&obs).unwrap().native().waypoints.clone()
        };
        let reference = native(2);
        for n in [4, 8, 32] {
            assert_eq!(native(n), reference);
        }
    }

    #[test]
    fn lattice_examples() {
        let s = straight_road(100, 5.0);
        let map = MapContext::new(&s);
        let ego = logged_ego(&s, 20);
        let h = History::default();
        let obs = observe(&s, &map, &ego, &h);
        let mut one = Lattice { speeds: vec![5.0], curvatures: vec![0.0] };
        let out = one.propose(&obs).unwrap();
        assert_eq!(out.candidates.len(), 1);
        assert!(out.candidates[0].waypoints.iter().all(|w| w.y == 0.0));
        let mut grid = Lattice {
            speeds: vec![2.0, 4.0, 6.0, 8.0],
            curvatures: vec![-0.1, -0.05, -0.02, 0.0, 0.01, 0.02, 0.05, 0.1],
        };
        let out = grid.propose(&obs).unwrap();
        assert_eq!(out.candidates.len(), 32);
        // Endpoint lies on the circle of radius 1/κ centred at (0, 1/κ).
        let k = 0.05;
        let idx = 3 * 8 + 6;
        let end = *out.candidates[idx].waypoints.last().unwrap();
        assert!((end.distance(Vec2::new(0.0, 1.0 / k)) - 1.0 / k).abs() < 1e-9);
        assert_eq!(out.native_best, 8 + 3);
    }
}
