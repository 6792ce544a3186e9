//! Preprocessed, query-friendly view of a scenario's map and signal data.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::geometry::{point_in_ring, segments_intersect, wrap_angle, Aabb, Polyline, Projection, Vec2};
use crate::scenario::{FeatureKind, ScenarioDescription, SignalState};

#[derive(Debug, Clone)]
pub struct Lane {
    pub id: String,
    pub line: Polyline,
    pub speed_limit: Option<f64>,
    bounds: Aabb,
}

#[derive(Debug, Clone)]
struct Ring {
    points: Vec<Vec2>,
    bounds: Aabb,
}

#[derive(Debug, Clone)]
pub struct StopLine {
    pub a: Vec2,
    pub b: Vec2,
    /// Index into [`MapContext::lanes`] of the controlled lane.
    pub lane: Option<usize>,
    /// Arclength of the crossing point along the controlled lane.
    pub lane_arclength: Option<f64>,
}

/// Result of a lane lookup against the cached lanes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneMatch {
    pub lane: usize,
    pub projection: Projection,
}

#[derive(Debug, Clone)]
pub struct MapContext {
    pub lanes: Vec<Lane>,
    rings: Vec<Ring>,
    pub stop_lines: Vec<StopLine>,
    signals: HashMap<usize, Vec<SignalState>>,
    lane_index: HashMap<String, usize>,
}

/// Heading deviation under which a lane counts as aligned with the query heading.
const ALIGNED: f64 = FRAC_PI_4;
/// Lanes farther than the nearest one by more than this are not considered for alignment.
const ALIGN_SLACK: f64 = 2.0;

impl MapContext {
    pub fn new(scenario: &ScenarioDescription) -> Self {
        let mut lanes = Vec::new();
        let mut rings = Vec::new();
        let mut lane_index = HashMap::new();
        for f in &scenario.map_features {
            match f.kind {
                FeatureKind::LaneCenter => {
                    lane_index.insert(f.id.clone(), lanes.len());
                    lanes.push(Lane {
                        id: f.id.clone(),
                        line: Polyline::new(f.polyline.clone()),
                        speed_limit: f.speed_limit(),
                        bounds: Aabb::from_points(&f.polyline),
                    });
                }
                FeatureKind::DrivableArea => rings.push(Ring {
                    points: f.polyline.clone(),
                    bounds: Aabb::from_points(&f.polyline),
                }),
                _ => {}
            }
        }
        let mut stop_lines = Vec::new();
        for f in scenario
            .map_features
            .iter()
            .filter(|f| f.kind == FeatureKind::StopLine)
        {
            let lane = f
                .attributes
                .as_ref()
                .and_then(|a| a.lane_id.as_ref())
                .and_then(|id| lane_index.get(id).copied());
            for w in f.polyline.windows(2) {
                let lane_arclength = lane.and_then(|l| crossing_arclength(&lanes[l].line, w[0], w[1]));
                stop_lines.push(StopLine {
                    a: w[0],
                    b: w[1],
                    lane,
                    lane_arclength,
                });
            }
        }
        let signals = scenario
            .dynamic_states
            .iter()
            .filter_map(|d| {
                lane_index
                    .get(&d.lane_id)
                    .map(|&i| (i, d.signal_sequence.clone()))
            })
            .collect();
        Self {
            lanes,
            rings,
            stop_lines,
            signals,
            lane_index,
        }
    }

    pub fn lane_by_id(&self, id: &str) -> Option<usize> {
        self.lane_index.get(id).copied()
    }

    /// Signal governing `lane` at `step`; uncontrolled lanes and steps past the log are GO.
    pub fn signal(&self, lane: usize, step: usize) -> SignalState {
        match self.signals.get(&lane) {
            Some(seq) if !seq.is_empty() => seq[step.min(seq.len() - 1)],
            _ => SignalState::Go,
        }
    }

    pub fn has_signals(&self) -> bool {
        !self.signals.is_empty()
    }

    fn projections(&self, p: Vec2) -> impl Iterator<Item = LaneMatch> + '_ {
        self.lanes.iter().enumerate().filter_map(move |(i, lane)| {
            lane.line.project(p).map(|projection| LaneMatch {
                lane: i,
                projection,
            })
        })
    }

    /// Nearest lane by unsigned distance, ties to the earlier lane.
    pub fn nearest_lane(&self, p: Vec2) -> Result<LaneMatch> {
        let mut best: Option<LaneMatch> = None;
        for m in self.projections(p) {
            if best.is_none_or(|b| m.projection.distance < b.projection.distance) {
                best = Some(m);
            }
        }
        best.ok_or(Error::NoLanes)
    }

    /// Lane lookup that prefers lanes running in the vehicle's direction of travel.
    ///
    /// Among lanes within [`ALIGN_SLACK`] of the nearest one, the nearest lane whose
    /// tangent is within 45° of `heading` wins; if none is aligned, the nearest lane is
    /// returned. This keeps crossing lanes at intersections from being matched.
    pub fn aligned_lane(&self, p: Vec2, heading: f64) -> Result<LaneMatch> {
        let all: Vec<LaneMatch> = self.projections(p).collect();
        let nearest = all
            .iter()
            .copied()
            .reduce(|a, b| {
                if b.projection.distance < a.projection.distance {
                    b
                } else {
                    a
                }
            })
            .ok_or(Error::NoLanes)?;
        let limit = nearest.projection.distance + ALIGN_SLACK;
        let aligned = all
            .iter()
            .copied()
            .filter(|m| {
                m.projection.distance <= limit
                    && wrap_angle(heading - m.projection.heading).abs() <= ALIGNED
            })
            .reduce(|a, b| {
                if b.projection.distance < a.projection.distance {
                    b
                } else {
                    a
                }
            });
        Ok(aligned.unwrap_or(nearest))
    }

    /// Cheap bounding-box test used to skip lanes far from a point.
    pub fn lane_near(&self, lane: usize, p: Vec2, margin: f64) -> bool {
        let b = &self.lanes[lane].bounds;
        p.x >= b.min.x - margin && p.x <= b.max.x + margin && p.y >= b.min.y - margin && p.y <= b.max.y + margin
    }

    pub fn has_drivable_area(&self) -> bool {
        !self.rings.is_empty()
    }

    /// Whether a point lies inside the union of drivable rings (boundary counts as inside).
    pub fn in_drivable_area(&self, p: Vec2) -> bool {
        self.rings
            .iter()
            .any(|r| r.bounds.contains(p) && point_in_ring(p, &r.points))
    }

    /// Index of a stop line controlled by a STOP signal that the segment `from → to` crosses.
    pub fn red_light_crossing(&self, from: Vec2, to: Vec2, step: usize) -> Option<usize> {
        if from == to {
            return None;
        }
        self.stop_lines.iter().position(|s| {
            s.lane
                .is_some_and(|lane| self.signal(lane, step) == SignalState::Stop)
                && segments_intersect(from, to, s.a, s.b)
        })
    }
}

fn crossing_arclength(line: &Polyline, a: Vec2, b: Vec2) -> Option<f64> {
    let pts = line.points();
    let cum = line.cumulative();
    for i in 0..pts.len().saturating_sub(1) {
        let (p, q) = (pts[i], pts[i + 1]);
        if segments_intersect(p, q, a, b) {
            let d = q - p;
            let e = b - a;
            let denom = d.cross(e);
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = (a - p).cross(e) / denom;
            return Some(cum[i] + t.clamp(0.0, 1.0) * d.norm());
        }
    }
    None
}
