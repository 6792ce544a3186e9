//! Unified scenario description: map polylines, agent tracks with validity masks,
//! traffic-signal sequences, plus the normalizations applied when importing data.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ring_is_simple, wrap_angle, Polyline, Pose2, Vec2};

pub const SCHEMA_VERSION: u64 = 1;

/// Native simulation step, seconds.
pub const NATIVE_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    LaneCenter,
    RoadBoundary,
    Crosswalk,
    StopLine,
    DrivableArea,
}

/// Optional per-feature attributes. `lane_id` ties a stop line to the lane whose signal controls it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureAttributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub successors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFeature {
    pub id: String,
    pub kind: FeatureKind,
    pub polyline: Vec<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<FeatureAttributes>,
}

impl MapFeature {
    pub fn speed_limit(&self) -> Option<f64> {
        self.attributes.as_ref().and_then(|a| a.speed_limit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub pose: Pose2,
    pub velocity: Vec2,
    pub valid: bool,
}

impl TrackState {
    pub const INVALID: TrackState = TrackState {
        pose: Pose2 {
            position: Vec2::ZERO,
            heading: 0.0,
        },
        velocity: Vec2::ZERO,
        valid: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectType {
    Ego,
    Vehicle,
    Pedestrian,
    Cyclist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Dims {
    pub const CAR: Dims = Dims {
        length: 4.6,
        width: 1.9,
        height: 1.6,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub object_id: String,
    pub object_type: ObjectType,
    pub dims: Dims,
    pub states: Vec<TrackState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalState {
    #[serde(rename = "STOP")]
    Stop,
    #[serde(rename = "WAIT")]
    Wait,
    #[serde(rename = "GO")]
    Go,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicMapState {
    pub lane_id: String,
    pub signal_sequence: Vec<SignalState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Handedness {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDescription {
    pub id: String,
    pub dt: f64,
    pub step_count: usize,
    pub anchor: Vec2,
    pub ego_track_id: String,
    pub map_features: Vec<MapFeature>,
    pub tracks: Vec<Track>,
    pub dynamic_states: Vec<DynamicMapState>,
    pub source: String,
    pub handedness: Handedness,
}

impl ScenarioDescription {
    pub fn ego_track(&self) -> Option<&Track> {
        self.tracks.iter().find(|t| t.object_id == self.ego_track_id)
    }

    pub fn track(&self, id: &str) -> Option<&Track> {
        self.tracks.iter().find(|t| t.object_id == id)
    }

    pub fn duration(&self) -> f64 {
        self.step_count.saturating_sub(1) as f64 * self.dt
    }

    fn for_each_point_mut(&mut self, mut f: impl FnMut(&mut Vec2)) {
        for feature in &mut self.map_features {
            feature.polyline.iter_mut().for_each(&mut f);
        }
        for track in &mut self.tracks {
            for state in &mut track.states {
                f(&mut state.pose.position);
            }
        }
    }

    /// Checks every type invariant and reports the first offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("dt", "must be finite and positive"));
        }
        if self.step_count == 0 {
            return Err(Error::validation("step_count", "must be at least 1"));
        }
        if !self.anchor.is_finite() {
            return Err(Error::validation("anchor", "non-finite"));
        }
        if self.handedness != Handedness::Right {
            return Err(Error::validation(
                "handedness",
                "stored scenarios must be right-handed",
            ));
        }

        let mut feature_ids = HashSet::new();
        for (i, f) in self.map_features.iter().enumerate() {
            let field = format!("map_features[{i}]");
            if !feature_ids.insert(f.id.as_str()) {
                return Err(Error::validation(field, format!("duplicate id {}", f.id)));
            }
            if f.polyline.len() < 2 {
                return Err(Error::validation(field, "polyline needs at least 2 points"));
            }
            if f.polyline.iter().any(|p| !p.is_finite()) {
                return Err(Error::validation(field, "non-finite polyline point"));
            }
            if f.kind == FeatureKind::DrivableArea {
                if f.polyline.len() < 4 || f.polyline.first() != f.polyline.last() {
                    return Err(Error::validation(field, "drivable ring must be closed"));
                }
                if !ring_is_simple(&f.polyline) {
                    return Err(Error::validation(field, "drivable ring self-intersects"));
                }
            }
            if let Some(limit) = f.speed_limit() {
                if !(limit.is_finite() && limit > 0.0) {
                    return Err(Error::validation(field, "speed_limit must be positive"));
                }
            }
        }

        if self.tracks.is_empty() {
            return Err(Error::validation("tracks", "no ego track"));
        }
        let mut track_ids = HashSet::new();
        for (i, t) in self.tracks.iter().enumerate() {
            let field = format!("tracks[{i}]");
            if !track_ids.insert(t.object_id.as_str()) {
                return Err(Error::validation(
                    field,
                    format!("duplicate object_id {}", t.object_id),
                ));
            }
            let d = t.dims;
            if !(d.length > 0.0 && d.width > 0.0 && d.height > 0.0)
                || !(d.length.is_finite() && d.width.is_finite() && d.height.is_finite())
            {
                return Err(Error::validation(format!("{field}.dims"), "must be positive"));
            }
            if t.states.len() != self.step_count {
                return Err(Error::validation(
                    format!("{field}.states"),
                    format!("length {} != step_count {}", t.states.len(), self.step_count),
                ));
            }
            for (k, s) in t.states.iter().enumerate() {
                if !(s.pose.position.is_finite() && s.velocity.is_finite() && s.pose.heading.is_finite()) {
                    return Err(Error::validation(
                        format!("{field}.states[{k}]"),
                        "non-finite state",
                    ));
                }
                if !(s.pose.heading > -PI && s.pose.heading <= PI) {
                    return Err(Error::validation(
                        format!("{field}.states[{k}].pose.heading"),
                        "heading outside (-pi, pi]",
                    ));
                }
            }
        }

        let ego_count = self
            .tracks
            .iter()
            .filter(|t| t.object_id == self.ego_track_id)
            .count();
        if ego_count != 1 {
            return Err(Error::validation(
                "ego_track_id",
                format!("expected exactly one ego track, found {ego_count}"),
            ));
        }
        let ego = self.ego_track().expect("counted above");
        let first = ego.states[0];
        if !first.valid {
            return Err(Error::validation(
                "ego_track_id",
                "ego state at step 0 must be valid",
            ));
        }
        if first.pose.position.norm() > 1e-9 {
            return Err(Error::validation(
                "ego_track_id",
                "ego must start at the origin (scenario not anchored)",
            ));
        }

        let lanes: HashSet<&str> = self
            .map_features
            .iter()
            .filter(|f| f.kind == FeatureKind::LaneCenter)
            .map(|f| f.id.as_str())
            .collect();
        for (i, ds) in self.dynamic_states.iter().enumerate() {
            let field = format!("dynamic_states[{i}]");
            if ds.signal_sequence.len() != self.step_count {
                return Err(Error::validation(
                    field,
                    format!(
                        "signal_sequence length {} != step_count {}",
                        ds.signal_sequence.len(),
                        self.step_count
                    ),
                ));
            }
            if !lanes.contains(ds.lane_id.as_str()) {
                return Err(Error::validation(
                    field,
                    format!("lane_id {} is not a lane centerline", ds.lane_id),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct DocumentOut<'a> {
    schema_version: u64,
    #[serde(flatten)]
    scenario: &'a ScenarioDescription,
}

#[derive(Deserialize)]
struct DocumentIn {
    schema_version: u64,
    #[serde(flatten)]
    scenario: ScenarioDescription,
}

/// Validates and writes the canonical JSON document.
pub fn serialize_scenario(scenario: &ScenarioDescription) -> Result<Vec<u8>> {
    scenario.validate()?;
    let mut bytes = serde_json::to_vec_pretty(&DocumentOut {
        schema_version: SCHEMA_VERSION,
        scenario,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses a scenario document, normalizing headings into (-π, π] before validation.
pub fn parse_scenario(bytes: &[u8]) -> Result<ScenarioDescription> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(SCHEMA_VERSION) => {}
        Some(found) => {
            return Err(Error::SchemaVersion {
                found,
                expected: SCHEMA_VERSION,
            })
        }
        None => return Err(Error::Parse("missing schema_version".into())),
    }
    let doc: DocumentIn = serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    debug_assert_eq!(doc.schema_version, SCHEMA_VERSION);
    let mut scenario = doc.scenario;
    for track in &mut scenario.tracks {
        for state in &mut track.states {
            state.pose.heading = wrap_angle(state.pose.heading);
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Reads every `*.json` scenario in `dir`, in file-name order, skipping the run echo
/// `resolved_config.json`.
pub fn read_scenario_dir(dir: &std::path::Path) -> Result<Vec<ScenarioDescription>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json") && !p.ends_with("resolved_config.json"));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Empty("scenario directory"));
    }
    paths.iter().map(|p| parse_scenario(&std::fs::read(p)?)).collect()
}

/// Shortest-arc heading interpolation. Antipodal inputs turn counter-clockwise.
pub fn interpolate_heading(theta0: f64, theta1: f64, alpha: f64) -> f64 {
    let delta = wrap_angle(theta1 - theta0);
    wrap_angle(theta0 + alpha * delta)
}

/// Resamples a track from `source_dt` to `target_dt`. Positions and velocities are
/// interpolated linearly, headings along the shortest arc; a target sample is valid only
/// when both bracketing source states are valid.
pub fn resample_track(track: &Track, source_dt: f64, target_dt: f64) -> Result<Track> {
    let err = |reason: &str| Error::Resample {
        track: track.object_id.clone(),
        reason: reason.to_string(),
    };
    if !(source_dt > 0.0 && target_dt > 0.0) {
        return Err(err("time steps must be positive"));
    }
    if track.states.iter().filter(|s| s.valid).count() < 2 {
        return Err(err("fewer than 2 valid states"));
    }
    let last = track.states.len() - 1;
    let end = last as f64 * source_dt;
    let count = (end / target_dt + 1e-9).floor() as usize + 1;
    let mut states = Vec::with_capacity(count);
    for j in 0..count {
        let t = j as f64 * target_dt;
        let u = t / source_dt;
        let mut i = u.floor() as usize;
        let mut alpha = u - i as f64;
        if alpha > 1.0 - 1e-9 {
            i += 1;
            alpha = 0.0;
        } else if alpha < 1e-9 {
            alpha = 0.0;
        }
        if i >= last {
            i = last;
            alpha = 0.0;
        }
        let a = track.states[i];
        if alpha == 0.0 {
            states.push(a);
            continue;
        }
        let b = track.states[i + 1];
        if !(a.valid && b.valid) {
            states.push(TrackState::INVALID);
            continue;
        }
        states.push(TrackState {
            pose: Pose2 {
                position: a.pose.position.lerp(b.pose.position, alpha),
                heading: interpolate_heading(a.pose.heading, b.pose.heading, alpha),
            },
            velocity: a.velocity.lerp(b.velocity, alpha),
            valid: true,
        });
    }
    Ok(Track {
        object_id: track.object_id.clone(),
        object_type: track.object_type,
        dims: track.dims,
        states,
    })
}

/// Converts a scenario recorded in `source` handedness into the right-handed convention.
/// Left-handed input is reflected across the x-axis: y and yaw change sign.
pub fn normalize_chirality(
    mut scenario: ScenarioDescription,
    source: Handedness,
) -> ScenarioDescription {
    if source == Handedness::Left {
        scenario.for_each_point_mut(|p| p.y = -p.y);
        scenario.anchor.y = -scenario.anchor.y;
        for track in &mut scenario.tracks {
            for state in &mut track.states {
                state.velocity.y = -state.velocity.y;
                state.pose.heading = wrap_angle(-state.pose.heading);
            }
        }
    }
    scenario.handedness = Handedness::Right;
    scenario
}

/// Translates every map point and track position so the ego starts at the origin,
/// accumulating the removed offset into `anchor`.
pub fn anchor_scenario(mut scenario: ScenarioDescription) -> Result<ScenarioDescription> {
    let ego = scenario
        .ego_track()
        .ok_or_else(|| Error::Anchoring(format!("no track {}", scenario.ego_track_id)))?;
    let first = ego
        .states
        .first()
        .filter(|s| s.valid)
        .ok_or_else(|| Error::Anchoring("ego invalid at step 0".into()))?;
    let offset = first.pose.position;
    if offset == Vec2::ZERO {
        return Ok(scenario);
    }
    scenario.for_each_point_mut(|p| *p = *p - offset);
    scenario.anchor += offset;
    Ok(scenario)
}

/// Nearest lane centerline to a point.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneQuery {
    pub lane_id: String,
    pub lane_heading: f64,
    pub lateral_offset: f64,
    pub arclength: f64,
}

/// Returns the lane centerline with minimum unsigned distance to `position`
/// (ties resolve to the earlier feature).
pub fn query_lane(map_features: &[MapFeature], position: Vec2) -> Result<LaneQuery> {
    let mut best: Option<(f64, LaneQuery)> = None;
    for f in map_features.iter().filter(|f| f.kind == FeatureKind::LaneCenter) {
        let line = Polyline::new(f.polyline.clone());
        if let Some(p) = line.project(position) {
            if best.as_ref().is_none_or(|(d, _)| p.distance < *d) {
                best = Some((
                    p.distance,
                    LaneQuery {
                        lane_id: f.id.clone(),
                        lane_heading: p.heading,
                        lateral_offset: p.lateral,
                        arclength: p.arclength,
                    },
                ));
            }
        }
    }
    best.map(|(_, q)| q).ok_or(Error::NoLanes)
}
