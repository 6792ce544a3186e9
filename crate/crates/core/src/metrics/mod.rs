//! Frame scoring (critical gates times weighted quality features), the closed-loop
//! Driving Score, route completion and displacement error.

pub mod comfort;
pub mod compliance;
pub mod safety;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OrientedBox, Polyline, Vec2};
use crate::map::MapContext;
use crate::traffic::AgentState;

pub use comfort::{comfort_scores, ComfortLimits};
pub use compliance::{drivable_area_compliance, driving_direction_compliance, lane_keeping, traffic_light_compliance};
pub use safety::{mttc, no_at_fault_collision, ttc_feature, Actor, FaultRule, TtcSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    OpenLoop,
    ClosedLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerWeights {
    pub ttc: f64,
    pub ep: f64,
    pub lk: f64,
    pub hc: f64,
    pub ec: f64,
    pub comfort: ComfortLimits,
    pub ttc_settings: TtcSettings,
    pub lk_offset_threshold: f64,
    pub lk_window: f64,
    /// History and plan window lengths for the history-comfort check, seconds.
    pub hc_window: f64,
    /// Trailing window for the extended-comfort check on realized motion, seconds.
    pub ec_window: f64,
    pub fault_rule: FaultRule,
}

impl Default for ScorerWeights {
    fn default() -> Self {
        Self {
            ttc: 5.0,
            ep: 5.0,
            lk: 2.0,
            hc: 2.0,
            ec: 2.0,
            comfort: ComfortLimits::default(),
            ttc_settings: TtcSettings::default(),
            lk_offset_threshold: 0.5,
            lk_window: 2.0,
            hc_window: 1.0,
            ec_window: 1.0,
            fault_rule: FaultRule::AtFault,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critical {
    pub nc: bool,
    pub dac: bool,
    pub tlc: bool,
    pub ddc: bool,
}

impl Critical {
    pub const PASS: Critical = Critical {
        nc: true,
        dac: true,
        tlc: true,
        ddc: true,
    };

    pub fn all(&self) -> bool {
        self.nc && self.dac && self.tlc && self.ddc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub ttc: f64,
    pub lk: f64,
    pub hc: f64,
    pub ec: f64,
    pub ep: Option<f64>,
}

/// `(∏ gates) · Σ w_f·v_f / Σ w_f` over the mode's features (EP only in open loop).
pub fn epdms_frame(c: &Critical, f: &Features, w: &ScorerWeights, mode: EvalMode) -> Result<f64> {
    let mut num = w.ttc * f.ttc + w.lk * f.lk + w.hc * f.hc + w.ec * f.ec;
    let mut den = w.ttc + w.lk + w.hc + w.ec;
    if mode == EvalMode::OpenLoop {
        let ep = f
            .ep
            .ok_or_else(|| Error::Config("open-loop scoring needs an EP feature".into()))?;
        num += w.ep * ep;
        den += w.ep;
    }
    if !(den > 0.0) {
        return Err(Error::Config("quality feature weights sum to zero".into()));
    }
    Ok(if c.all() { num / den } else { 0.0 })
}

/// Per-step score decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub step: usize,
    pub nc: bool,
    pub dac: bool,
    pub tlc: bool,
    pub ddc: bool,
    pub lk: f64,
    pub ttc: f64,
    pub hc: f64,
    pub ec: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ep: Option<f64>,
    pub epdms: f64,
}

impl FrameScore {
    pub fn new(step: usize, c: Critical, f: Features, w: &ScorerWeights, mode: EvalMode) -> Result<Self> {
        Ok(Self {
            step,
            nc: c.nc,
            dac: c.dac,
            tlc: c.tlc,
            ddc: c.ddc,
            lk: f.lk,
            ttc: f.ttc,
            hc: f.hc,
            ec: f.ec,
            ep: f.ep,
            epdms: epdms_frame(&c, &f, w, mode)?,
        })
    }

    pub fn critical(&self) -> Critical {
        Critical {
            nc: self.nc,
            dac: self.dac,
            tlc: self.tlc,
            ddc: self.ddc,
        }
    }

    pub fn features(&self) -> Features {
        Features {
            ttc: self.ttc,
            lk: self.lk,
            hc: self.hc,
            ec: self.ec,
            ep: self.ep,
        }
    }
}

/// Geometric inputs for scoring one ego pose against one world snapshot.
pub struct FrameGeometry<'a> {
    pub map: &'a MapContext,
    /// Step whose signal states apply.
    pub step: usize,
    pub ego: Actor,
    /// Ego position one step earlier (for stop-line crossing).
    pub ego_prev: Vec2,
    pub ego_heading: f64,
    pub lane_heading: Option<f64>,
    pub agents: &'a [AgentState],
}

/// Critical gates and TTC for one frame.
pub fn critical_and_ttc(g: &FrameGeometry, w: &ScorerWeights) -> (Critical, f64) {
    let actors: Vec<Actor> = g.agents.iter().map(agent_actor).collect();
    let critical = Critical {
        nc: no_at_fault_collision(&g.ego, &actors, w.fault_rule),
        dac: drivable_area_compliance(&g.ego.footprint, g.map),
        tlc: traffic_light_compliance(g.ego_prev, g.ego.footprint.center, g.map, g.step),
        ddc: g
            .lane_heading
            .is_none_or(|h| driving_direction_compliance(g.ego_heading, h)),
    };
    let ttc = ttc_feature(&g.ego, &actors, &w.ttc_settings);
    (critical, ttc)
}

pub fn agent_actor(a: &AgentState) -> Actor {
    Actor {
        footprint: a.footprint(),
        velocity: a.velocity,
        accel: a.accel_vector(),
    }
}

/// Ego-progress ratio `clamp(achieved / max(expert, ε), 0, 1)`.
pub fn ego_progress(achieved: f64, expert: f64) -> f64 {
    (achieved / expert.max(1e-6)).clamp(0.0, 1.0)
}

/// Fraction of the expert path's arclength reached by the ego's furthest progress point.
/// A degenerate (zero-length) expert path counts as complete.
pub fn route_completion(ego_path: &[Vec2], expert: &Polyline) -> f64 {
    let length = expert.length();
    if length < 1e-6 {
        return 1.0;
    }
    progress_along(ego_path, expert) / length
}

/// Furthest arclength reached along `path`, monotone in time.
pub fn progress_along(ego_path: &[Vec2], path: &Polyline) -> f64 {
    ego_path
        .iter()
        .filter_map(|p| path.project(*p))
        .map(|q| q.arclength)
        .fold(0.0, f64::max)
}

/// `100 · rc · mean(epdms)`.
pub fn closed_loop_score(rc: f64, frames: &[FrameScore]) -> f64 {
    if frames.is_empty() {
        return 0.0;
    }
    100.0 * rc * frames.iter().map(|f| f.epdms).sum::<f64>() / frames.len() as f64
}

/// Minimum over candidates of the mean Euclidean displacement from the ground truth.
pub fn min_ade(candidates: &[Vec<Vec2>], ground_truth: &[Vec2]) -> Result<f64> {
    if candidates.is_empty() || ground_truth.is_empty() {
        return Err(Error::Empty("min_ade needs candidates and ground truth"));
    }
    let mut best = f64::INFINITY;
    for c in candidates {
        if c.len() != ground_truth.len() {
            return Err(Error::LengthMismatch(format!(
                "candidate has {} points, ground truth {}",
                c.len(),
                ground_truth.len()
            )));
        }
        let ade = c
            .iter()
            .zip(ground_truth)
            .map(|(a, b)| a.distance(*b))
            .sum::<f64>()
            / c.len() as f64;
        best = best.min(ade);
    }
    Ok(best)
}

/// Means of every sub-score over a set of frames, in the report column order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubscoreMeans {
    pub nc: f64,
    pub dac: f64,
    pub tlc: f64,
    pub ddc: f64,
    pub lk: f64,
    pub ttc: f64,
    pub hc: f64,
    pub ec: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ep: Option<f64>,
}

impl SubscoreMeans {
    pub fn of(frames: &[FrameScore]) -> Self {
        if frames.is_empty() {
            return Self::default();
        }
        let n = frames.len() as f64;
        let mean = |f: &dyn Fn(&FrameScore) -> f64| frames.iter().map(f).sum::<f64>() / n;
        let b = |x: bool| f64::from(u8::from(x));
        let ep = frames
            .iter()
            .map(|f| f.ep)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n);
        Self {
            nc: mean(&|f| b(f.nc)),
            dac: mean(&|f| b(f.dac)),
            tlc: mean(&|f| b(f.tlc)),
            ddc: mean(&|f| b(f.ddc)),
            lk: mean(&|f| f.lk),
            ttc: mean(&|f| f.ttc),
            hc: mean(&|f| f.hc),
            ec: mean(&|f| f.ec),
            ep,
        }
    }
}

/// Ego footprint helper.
pub fn footprint(pose: crate::geometry::Pose2, dims: crate::scenario::Dims) -> OrientedBox {
    OrientedBox::new(pose, dims.length, dims.width)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(ttc: f64, lk: f64, hc: f64, ec: f64) -> Features {
        Features {
            ttc,
            lk,
            hc,
            ec,
            ep: None,
        }
    }

    #[test]
    fn epdms_examples() {
        let w = ScorerWeights::default();
        let all = feats(1.0, 1.0, 1.0, 1.0);
        assert_eq!(epdms_frame(&Critical::PASS, &all, &w, EvalMode::ClosedLoop).unwrap(), 1.0);
        let failed = Critical {
            dac: false,
            ..Critical::PASS
        };
        assert_eq!(epdms_frame(&failed, &all, &w, EvalMode::ClosedLoop).unwrap(), 0.0);
        let v = epdms_frame(&Critical::PASS, &feats(1.0, 1.0, 0.0, 0.0), &w, EvalMode::ClosedLoop).unwrap();
        assert!((v - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn epdms_zero_weight_is_config_error() {
        let w = ScorerWeights {
            ttc: 0.0,
            lk: 0.0,
            hc: 0.0,
            ec: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            epdms_frame(&Critical::PASS, &feats(1.0, 1.0, 1.0, 1.0), &w, EvalMode::ClosedLoop),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn open_loop_requires_ep() {
        let w = ScorerWeights::default();
        assert!(epdms_frame(&Critical::PASS, &feats(1.0, 1.0, 1.0, 1.0), &w, EvalMode::OpenLoop).is_err());
        let f = Features {
            ep: Some(0.5),
            ..feats(1.0, 1.0, 1.0, 1.0)
        };
        let v = epdms_frame(&Critical::PASS, &f, &w, EvalMode::OpenLoop).unwrap();
        assert!((v - 13.5 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn ego_progress_examples() {
        assert_eq!(ego_progress(10.0, 10.0), 1.0);
        assert_eq!(ego_progress(0.0, 10.0), 0.0);
        assert_eq!(ego_progress(7.5, 10.0), 0.75);
    }

    #[test]
    fn route_completion_examples() {
        let expert: Vec<Vec2> = (0..=20).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let line = Polyline::new(expert.clone());
        assert_eq!(route_completion(&expert, &line), 1.0);
        assert_eq!(route_completion(&[Vec2::ZERO], &line), 0.0);
        let half: Vec<Vec2> = (0..=10).map(|i| Vec2::new(i as f64, 0.3)).chain(std::iter::repeat_n(Vec2::new(10.0, 0.3), 5)).collect();
        assert!((route_completion(&half, &line) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_loop_score_examples() {
        let frame = |e: f64| FrameScore {
            step: 0,
            nc: true,
            dac: true,
            tlc: true,
            ddc: true,
            lk: 1.0,
            ttc: 1.0,
            hc: 1.0,
            ec: 1.0,
            ep: None,
            epdms: e,
        };
        assert_eq!(closed_loop_score(1.0, &[frame(1.0), frame(1.0)]), 100.0);
        assert_eq!(closed_loop_score(0.0, &[frame(1.0)]), 0.0);
        assert!((closed_loop_score(0.8, &[frame(0.5), frame(1.0)]) - 60.0).abs() < 1e-12);
    }

    #[test]
    fn min_ade_examples() {
        let gt: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64, 0.0)).collect();
        assert_eq!(min_ade(std::slice::from_ref(&gt), &gt).unwrap(), 0.0);
        let shifted: Vec<Vec2> = gt.iter().map(|p| Vec2::new(p.x, 1.0)).collect();
        assert!((min_ade(&[shifted], &gt).unwrap() - 1.0).abs() < 1e-12);
        let two: Vec<Vec2> = gt.iter().map(|p| Vec2::new(p.x, 2.0)).collect();
        let half: Vec<Vec2> = gt.iter().map(|p| Vec2::new(p.x, -0.5)).collect();
        assert!((min_ade(&[two, half], &gt).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(min_ade(&[vec![Vec2::ZERO]], &gt), Err(Error::LengthMismatch(_))));
    }
}
