//! Traffic scene model: participants, static road factors, frames and the
//! map prior, plus the on-disk formats they are loaded from.
//!
//! `map_prior.json` carries the road description (centerlines, static
//! factors, maneuver node sets). Points are either local `[x, y]` meters or
//! geodetic `[lat, lon]` degrees depending on the top-level `coords` flag;
//! object forms `{"x":..,"y":..}` and `{"lat":..,"lon":..}` are accepted in
//! either mode. `frames.jsonl` carries one frame per line.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    dist_point_point, dist_point_segment, geodetic_to_local, normalize_angle, Centerline,
    DirectedSegment, Point2,
};
use crate::planner::{ManeuverNode, ManeuverNodeSet};

/// Objects farther than this outside the road polygon's bounding box get a
/// diagnostic attached.
pub const BOUNDS_MARGIN_M: f64 = 50.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: parse error: {message}")]
    Parse { location: String, message: String },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
}

impl ScenarioError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipantCategory {
    Pedestrian,
    NonMotorized,
    SmallVehicle,
    LargeVehicle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticKind {
    SolidLaneLine,
    Curb,
    Guardrail,
    Roadblock,
    Pothole,
}

impl StaticKind {
    pub const ALL: [StaticKind; 5] = [
        StaticKind::SolidLaneLine,
        StaticKind::Curb,
        StaticKind::Guardrail,
        StaticKind::Roadblock,
        StaticKind::Pothole,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    Left,
    Straight,
    Right,
}

impl Maneuver {
    pub const ALL: [Maneuver; 3] = [Maneuver::Left, Maneuver::Straight, Maneuver::Right];

    pub fn as_str(&self) -> &'static str {
        match self {
            Maneuver::Left => "left",
            Maneuver::Straight => "straight",
            Maneuver::Right => "right",
        }
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Maneuver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Maneuver::Left),
            "straight" => Ok(Maneuver::Straight),
            "right" => Ok(Maneuver::Right),
            other => Err(format!("unknown maneuver `{other}`")),
        }
    }
}

/// A traffic participant as reported by roadside perception.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicObject {
    pub id: String,
    pub category: ParticipantCategory,
    pub position: Point2,
    /// m/s, never negative
    pub speed: f64,
    /// radians, east-counterclockwise, in [-pi, pi)
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub dynamics: Vec<DynamicObject>,
}

impl Frame {
    pub fn empty(timestamp: f64) -> Self {
        Self {
            timestamp,
            dynamics: Vec::new(),
        }
    }

    /// Checks the per-frame invariants (finite timestamp, unique ids, valid objects).
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.timestamp.is_finite() {
            return Err(ScenarioError::invalid("t", "timestamp must be finite"));
        }
        let mut seen = HashSet::new();
        for (i, d) in self.dynamics.iter().enumerate() {
            let field = format!("dynamics[{i}]");
            if d.id.is_empty() {
                return Err(ScenarioError::invalid(format!("{field}.id"), "empty id"));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(ScenarioError::invalid(
                    format!("{field}.id"),
                    format!("duplicate id `{}`", d.id),
                ));
            }
            if !d.position.is_finite() {
                return Err(ScenarioError::invalid(field, "position must be finite"));
            }
            if !(d.speed.is_finite() && d.speed >= 0.0) {
                return Err(ScenarioError::invalid(
                    format!("{field}.speed"),
                    format!("speed must be finite and >= 0, got {}", d.speed),
                ));
            }
            if !d.heading.is_finite() {
                return Err(ScenarioError::invalid(format!("{field}.heading"), "heading must be finite"));
            }
        }
        Ok(())
    }

    /// Copy of the frame without the object named `id`.
    pub fn without(&self, id: &str) -> Frame {
        Frame {
            timestamp: self.timestamp,
            dynamics: self.dynamics.iter().filter(|d| d.id != id).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StaticGeometry {
    Point(Point2),
    MultiPoint(Vec<Point2>),
    Polyline(Vec<DirectedSegment>),
}

impl StaticGeometry {
    pub fn polyline(points: &[Point2]) -> Self {
        StaticGeometry::Polyline(
            points
                .windows(2)
                .map(|w| DirectedSegment::new(w[0], w[1]))
                .collect(),
        )
    }

    /// Minimum distance from `p` to any element of the geometry.
    pub fn distance_to(&self, p: Point2) -> f64 {
        match self {
            StaticGeometry::Point(q) => dist_point_point(p, *q),
            StaticGeometry::MultiPoint(qs) => qs
                .iter()
                .map(|q| dist_point_point(p, *q))
                .fold(f64::INFINITY, f64::min),
            StaticGeometry::Polyline(segs) => segs
                .iter()
                .map(|s| dist_point_segment(p, s))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn vertices(&self) -> Vec<Point2> {
        match self {
            StaticGeometry::Point(q) => vec![*q],
            StaticGeometry::MultiPoint(qs) => qs.clone(),
            StaticGeometry::Polyline(segs) => {
                let mut v: Vec<Point2> = segs.iter().map(|s| s.start).collect();
                v.extend(segs.last().map(|s| s.end));
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticFactor {
    pub kind: StaticKind,
    pub geometry: StaticGeometry,
    /// constant risk inside the static radius, in [0, 1]
    pub risk_value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CategoryWeights {
    pub pedestrian: f64,
    pub non_motorized: f64,
    pub large_vehicle: f64,
    pub small_vehicle: f64,
}

impl Default for CategoryWeights {
    fn default() -> Self {
        Self {
            pedestrian: 1.0,
            non_motorized: 0.9,
            large_vehicle: 0.8,
            small_vehicle: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticDefault {
    pub risk_value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticTable {
    pub solid_lane_line: StaticDefault,
    pub curb: StaticDefault,
    pub guardrail: StaticDefault,
    pub roadblock: StaticDefault,
    pub pothole: StaticDefault,
}

impl Default for StaticTable {
    fn default() -> Self {
        let sd = |risk_value, weight| StaticDefault { risk_value, weight };
        Self {
            solid_lane_line: sd(0.4, 0.3),
            curb: sd(0.5, 0.5),
            guardrail: sd(0.5, 0.5),
            roadblock: sd(1.0, 0.5),
            pothole: sd(0.8, 0.3),
        }
    }
}

/// Risk weights per participant category and per static factor kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub categories: CategoryWeights,
    pub statics: StaticTable,
}

/// Documented default weights. People first, then larger vehicles, then
/// static infrastructure.
pub fn default_weights() -> Weights {
    Weights::default()
}

impl Weights {
    pub fn category(&self, c: ParticipantCategory) -> f64 {
        let w = &self.categories;
        match c {
            ParticipantCategory::Pedestrian => w.pedestrian,
            ParticipantCategory::NonMotorized => w.non_motorized,
            ParticipantCategory::SmallVehicle => w.small_vehicle,
            ParticipantCategory::LargeVehicle => w.large_vehicle,
        }
    }

    pub fn static_default(&self, k: StaticKind) -> StaticDefault {
        let t = &self.statics;
        match k {
            StaticKind::SolidLaneLine => t.solid_lane_line,
            StaticKind::Curb => t.curb,
            StaticKind::Guardrail => t.guardrail,
            StaticKind::Roadblock => t.roadblock,
            StaticKind::Pothole => t.pothole,
        }
    }

    /// Enforces the safety ordering of the weight table. Any override that
    /// breaks it is a configuration error.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let c = &self.categories;
        let max_static = StaticKind::ALL
            .iter()
            .map(|k| self.static_default(*k).weight)
            .fold(f64::NEG_INFINITY, f64::max);
        let all = [c.pedestrian, c.non_motorized, c.large_vehicle, c.small_vehicle]
            .into_iter()
            .chain(StaticKind::ALL.iter().map(|k| self.static_default(*k).weight));
        for w in all {
            if !(w.is_finite() && w > 0.0) {
                return Err(ScenarioError::Config(format!("weight {w} must be finite and > 0")));
            }
        }
        for k in StaticKind::ALL {
            let rv = self.static_default(k).risk_value;
            if !(0.0..=1.0).contains(&rv) {
                return Err(ScenarioError::Config(format!(
                    "{k:?} risk_value {rv} outside [0, 1]"
                )));
            }
        }
        let chain = [
            ("pedestrian", c.pedestrian),
            ("non_motorized", c.non_motorized),
            ("large_vehicle", c.large_vehicle),
            ("small_vehicle", c.small_vehicle),
            ("every static kind", max_static),
        ];
        for pair in chain.windows(2) {
            if pair[0].1 <= pair[1].1 {
                return Err(ScenarioError::Config(format!(
                    "weight ordering violated: {} ({}) must exceed {} ({})",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        let t = &self.statics;
        let high = t.curb.weight.min(t.guardrail.weight);
        let low = t.pothole.weight.max(t.solid_lane_line.weight);
        if high <= low {
            return Err(ScenarioError::Config(format!(
                "weight ordering violated: curb/guardrail ({high}) must exceed pothole/lane line ({low})"
            )));
        }
        Ok(())
    }
}

/// How the risk grid's sampling points are produced for a map.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Regular station/offset lattice along a named centerline.
    Layout {
        centerline: String,
        half_width: f64,
        resolution: f64,
    },
    /// The union of all maneuver nodes is the sample set.
    Nodes { resolution: f64 },
}

impl Sampling {
    pub fn resolution(&self) -> f64 {
        match self {
            Sampling::Layout { resolution, .. } | Sampling::Nodes { resolution } => *resolution,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPrior {
    pub origin: (f64, f64),
    pub centerlines: BTreeMap<String, Centerline>,
    pub sampling: Sampling,
    pub statics: Vec<StaticFactor>,
    pub maneuver_sets: BTreeMap<Maneuver, ManeuverNodeSet>,
    /// preset endpoint per maneuver
    pub destinations: BTreeMap<Maneuver, Point2>,
    /// roadside unit positions, used to arbitrate duplicate reports
    pub units: BTreeMap<String, Point2>,
    pub road_polygon: Vec<Point2>,
    /// non-fatal findings from loading (out-of-bounds geometry)
    pub diagnostics: Vec<String>,
}

impl MapPrior {
    /// Axis-aligned bounding box `(min, max)` of the road polygon.
    pub fn bounds(&self) -> (Point2, Point2) {
        bounding_box(&self.road_polygon)
    }

    /// Preset endpoint for `maneuver`, falling back to the centroid of the
    /// last non-empty row of its node set.
    pub fn destination(&self, maneuver: Maneuver) -> Option<Point2> {
        if let Some(d) = self.destinations.get(&maneuver) {
            return Some(*d);
        }
        let set = self.maneuver_sets.get(&maneuver)?;
        let row = set.rows.iter().rev().find(|r| !r.is_empty())?;
        let sum = row.iter().fold(Point2::default(), |acc, n| acc + n.position);
        Some(sum.scale(1.0 / row.len() as f64))
    }

    /// Warnings for frame objects lying outside the padded road bounds.
    pub fn frame_diagnostics(&self, frame: &Frame) -> Vec<String> {
        let (lo, hi) = self.bounds();
        frame
            .dynamics
            .iter()
            .filter(|d| !within_margin(d.position, lo, hi))
            .map(|d| {
                format!(
                    "t={}: object `{}` at ({:.2}, {:.2}) lies outside road bounds + {BOUNDS_MARGIN_M} m",
                    frame.timestamp, d.id, d.position.x, d.position.y
                )
            })
            .collect()
    }

    /// Serializes to the file schema in local coordinates.
    pub fn to_json(&self) -> String {
        let raw = RawMapPrior::from_map(self);
        serde_json::to_string_pretty(&raw).expect("map prior serializes")
    }
}

fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    points.iter().fold(
        (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        },
    )
}

fn within_margin(p: Point2, lo: Point2, hi: Point2) -> bool {
    p.x >= lo.x - BOUNDS_MARGIN_M
        && p.x <= hi.x + BOUNDS_MARGIN_M
        && p.y >= lo.y - BOUNDS_MARGIN_M
        && p.y <= hi.y + BOUNDS_MARGIN_M
}

// ---------------------------------------------------------------------------
// file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordMode {
    #[default]
    Local,
    Geodetic,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawPoint {
    Pair([f64; 2]),
    Xy { x: f64, y: f64 },
    LatLon { lat: f64, lon: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawOrigin {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawGeometry {
    Point(RawPoint),
    MultiPoint(Vec<RawPoint>),
    Polyline(Vec<RawPoint>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStatic {
    pub kind: StaticKind,
    pub geometry: RawGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawNode {
    pub col: i32,
    #[serde(flatten)]
    pub at: RawPoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNodeSet {
    pub rows: Vec<Vec<RawNode>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSampling {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centerline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_resolution() -> f64 {
    1.9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMapPrior {
    #[serde(default)]
    pub coords: CoordMode,
    pub origin: RawOrigin,
    #[serde(default)]
    pub centerlines: BTreeMap<String, Vec<RawPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<RawSampling>,
    #[serde(default)]
    pub statics: Vec<RawStatic>,
    #[serde(default)]
    pub maneuver_sets: BTreeMap<Maneuver, RawNodeSet>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub destinations: BTreeMap<Maneuver, RawPoint>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub units: BTreeMap<String, RawPoint>,
    pub road_polygon: Vec<RawPoint>,
}

struct CoordCtx {
    mode: CoordMode,
    origin: (f64, f64),
}

impl CoordCtx {
    fn point(&self, raw: &RawPoint, field: &str) -> Result<Point2, ScenarioError> {
        let geo = |lat, lon| {
            geodetic_to_local(lat, lon, self.origin)
                .map_err(|e| ScenarioError::invalid(field, e.to_string()))
        };
        let p = match (*raw, self.mode) {
            (RawPoint::Pair([x, y]), CoordMode::Local) | (RawPoint::Xy { x, y }, _) => {
                Point2::new(x, y)
            }
            (RawPoint::Pair([lat, lon]), CoordMode::Geodetic) | (RawPoint::LatLon { lat, lon }, _) => {
                geo(lat, lon)?
            }
        };
        if !p.is_finite() {
            return Err(ScenarioError::invalid(field, "coordinate must be finite"));
        }
        Ok(p)
    }

    fn points(&self, raw: &[RawPoint], field: &str) -> Result<Vec<Point2>, ScenarioError> {
        raw.iter()
            .enumerate()
            .map(|(i, r)| self.point(r, &format!("{field}[{i}]")))
            .collect()
    }
}

fn pair(p: Point2) -> RawPoint {
    RawPoint::Pair([p.x, p.y])
}

impl RawMapPrior {
    fn from_map(map: &MapPrior) -> Self {
        let statics = map
            .statics
            .iter()
            .map(|s| RawStatic {
                kind: s.kind,
                geometry: match &s.geometry {
                    StaticGeometry::Point(p) => RawGeometry::Point(pair(*p)),
                    StaticGeometry::MultiPoint(ps) => {
                        RawGeometry::MultiPoint(ps.iter().copied().map(pair).collect())
                    }
                    StaticGeometry::Polyline(_) => {
                        RawGeometry::Polyline(s.geometry.vertices().into_iter().map(pair).collect())
                    }
                },
                risk_value: Some(s.risk_value),
                weight: Some(s.weight),
            })
            .collect();
        let sampling = Some(match &map.sampling {
            Sampling::Layout {
                centerline,
                half_width,
                resolution,
            } => RawSampling {
                centerline: Some(centerline.clone()),
                half_width: Some(*half_width),
                resolution: *resolution,
            },
            Sampling::Nodes { resolution } => RawSampling {
                centerline: None,
                half_width: None,
                resolution: *resolution,
            },
        });
        RawMapPrior {
            coords: CoordMode::Local,
            origin: RawOrigin {
                lat: map.origin.0,
                lon: map.origin.1,
            },
            centerlines: map
                .centerlines
                .iter()
                .map(|(k, cl)| (k.clone(), cl.points().iter().copied().map(pair).collect()))
                .collect(),
            sampling,
            statics,
            maneuver_sets: map
                .maneuver_sets
                .iter()
                .map(|(m, set)| {
                    let rows = set
                        .rows
                        .iter()
                        .map(|row| {
                            row.iter()
                                .map(|n| RawNode {
                                    col: n.col,
                                    at: RawPoint::Xy {
                                        x: n.position.x,
                                        y: n.position.y,
                                    },
                                })
                                .collect()
                        })
                        .collect();
                    (*m, RawNodeSet { rows })
                })
                .collect(),
            destinations: map.destinations.iter().map(|(m, p)| (*m, pair(*p))).collect(),
            units: map.units.iter().map(|(k, p)| (k.clone(), pair(*p))).collect(),
            road_polygon: map.road_polygon.iter().copied().map(pair).collect(),
        }
    }

    /// Validates the raw file and converts it into a [`MapPrior`]. Static
    /// factors without explicit `risk_value`/`weight` take them from `weights`.
    pub fn into_map(self, weights: &Weights) -> Result<MapPrior, ScenarioError> {
        let origin = (self.origin.lat, self.origin.lon);
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(ScenarioError::invalid("origin", "must be finite"));
        }
        let ctx = CoordCtx {
            mode: self.coords,
            origin,
        };

        let mut centerlines = BTreeMap::new();
        for (name, pts) in &self.centerlines {
            let field = format!("centerlines.{name}");
            let pts = ctx.points(pts, &field)?;
            let cl = Centerline::new(pts).map_err(|e| ScenarioError::invalid(&field, e.to_string()))?;
            centerlines.insert(name.clone(), cl);
        }

        let sampling = match self.sampling {
            Some(RawSampling {
                centerline: Some(name),
                half_width,
                resolution,
            }) => {
                if !centerlines.contains_key(&name) {
                    return Err(ScenarioError::invalid(
                        "sampling.centerline",
                        format!("no centerline named `{name}`"),
                    ));
                }
                let half_width = half_width.ok_or_else(|| {
                    ScenarioError::invalid("sampling.half_width", "required with a centerline")
                })?;
                if !(half_width.is_finite() && half_width > 0.0) {
                    return Err(ScenarioError::invalid("sampling.half_width", "must be > 0"));
                }
                Sampling::Layout {
                    centerline: name,
                    half_width,
                    resolution,
                }
            }
            Some(RawSampling { resolution, .. }) => Sampling::Nodes { resolution },
            None => Sampling::Nodes {
                resolution: default_resolution(),
            },
        };
        let res = sampling.resolution();
        if !(res.is_finite() && res > 0.0) {
            return Err(ScenarioError::invalid("sampling.resolution", "must be > 0"));
        }

        let mut statics = Vec::with_capacity(self.statics.len());
        for (i, s) in self.statics.iter().enumerate() {
            let field = format!("statics[{i}]");
            let geometry = match &s.geometry {
                RawGeometry::Point(p) => StaticGeometry::Point(ctx.point(p, &format!("{field}.geometry"))?),
                RawGeometry::MultiPoint(ps) => {
                    if ps.is_empty() {
                        return Err(ScenarioError::invalid(format!("{field}.geometry"), "empty multi_point"));
                    }
                    StaticGeometry::MultiPoint(ctx.points(ps, &format!("{field}.geometry"))?)
                }
                RawGeometry::Polyline(ps) => {
                    if ps.len() < 2 {
                        return Err(ScenarioError::invalid(
                            format!("{field}.geometry"),
                            "polyline needs at least 2 points",
                        ));
                    }
                    StaticGeometry::polyline(&ctx.points(ps, &format!("{field}.geometry"))?)
                }
            };
            let def = weights.static_default(s.kind);
            let risk_value = s.risk_value.unwrap_or(def.risk_value);
            let weight = s.weight.unwrap_or(def.weight);
            if !(0.0..=1.0).contains(&risk_value) {
                return Err(ScenarioError::invalid(
                    format!("{field}.risk_value"),
                    format!("{risk_value} outside [0, 1]"),
                ));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(ScenarioError::invalid(
                    format!("{field}.weight"),
                    format!("{weight} must be > 0"),
                ));
            }
            statics.push(StaticFactor {
                kind: s.kind,
                geometry,
                risk_value,
                weight,
            });
        }

        if self.maneuver_sets.is_empty() {
            return Err(ScenarioError::invalid("maneuver_sets", "at least one maneuver set is required"));
        }
        let mut maneuver_sets = BTreeMap::new();
        for (m, raw) in &self.maneuver_sets {
            let field = format!("maneuver_sets.{m}");
            let mut rows = Vec::with_capacity(raw.rows.len());
            for (r, row) in raw.rows.iter().enumerate() {
                let mut nodes = Vec::with_capacity(row.len());
                for (c, n) in row.iter().enumerate() {
                    let position = ctx.point(&n.at, &format!("{field}.rows[{r}][{c}]"))?;
                    nodes.push(ManeuverNode { col: n.col, position });
                }
                rows.push(nodes);
            }
            let set = ManeuverNodeSet { maneuver: *m, rows };
            set.validate().map_err(|msg| ScenarioError::invalid(&field, msg))?;
            maneuver_sets.insert(*m, set);
        }

        let destinations = self
            .destinations
            .iter()
            .map(|(m, p)| Ok((*m, ctx.point(p, &format!("destinations.{m}"))?)))
            .collect::<Result<_, ScenarioError>>()?;
        let units = self
            .units
            .iter()
            .map(|(k, p)| Ok((k.clone(), ctx.point(p, &format!("units.{k}"))?)))
            .collect::<Result<_, ScenarioError>>()?;

        if self.road_polygon.len() < 3 {
            return Err(ScenarioError::invalid("road_polygon", "needs at least 3 points"));
        }
        let road_polygon = ctx.points(&self.road_polygon, "road_polygon")?;

        let mut map = MapPrior {
            origin,
            centerlines,
            sampling,
            statics,
            maneuver_sets,
            destinations,
            units,
            road_polygon,
            diagnostics: Vec::new(),
        };
        map.diagnostics = geometry_diagnostics(&map);
        Ok(map)
    }
}

fn geometry_diagnostics(map: &MapPrior) -> Vec<String> {
    let (lo, hi) = map.bounds();
    let mut out = Vec::new();
    let mut check = |what: String, p: Point2| {
        if !within_margin(p, lo, hi) {
            out.push(format!(
                "{what} at ({:.2}, {:.2}) lies outside road bounds + {BOUNDS_MARGIN_M} m",
                p.x, p.y
            ));
        }
    };
    for (name, cl) in &map.centerlines {
        for (i, p) in cl.points().iter().enumerate() {
            check(format!("centerlines.{name}[{i}]"), *p);
        }
    }
    for (i, s) in map.statics.iter().enumerate() {
        for p in s.geometry.vertices() {
            check(format!("statics[{i}]"), p);
        }
    }
    for (m, set) in &map.maneuver_sets {
        for (r, row) in set.rows.iter().enumerate() {
            for n in row {
                check(format!("maneuver_sets.{m}.rows[{r}] col {}", n.col), n.position);
            }
        }
    }
    out
}

fn read_file(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_map_prior(text: &str, weights: &Weights, location: &str) -> Result<MapPrior, ScenarioError> {
    let raw: RawMapPrior = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        location: format!("{location}:{}", e.line()),
        message: e.to_string(),
    })?;
    raw.into_map(weights)
}

/// Loads and validates a `map_prior.json` using the default weight table.
pub fn load_map_prior(path: impl AsRef<Path>) -> Result<MapPrior, ScenarioError> {
    load_map_prior_with(path, &default_weights())
}

pub fn load_map_prior_with(path: impl AsRef<Path>, weights: &Weights) -> Result<MapPrior, ScenarioError> {
    let path = path.as_ref();
    parse_map_prior(&read_file(path)?, weights, &path.display().to_string())
}

/// One participant as it appears in frame files and on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDynamic {
    pub id: String,
    pub category: ParticipantCategory,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingUnits {
    #[default]
    Radians,
    Degrees,
}

impl RawDynamic {
    pub fn into_object(self, units: HeadingUnits) -> DynamicObject {
        let heading = match units {
            HeadingUnits::Radians => self.heading,
            HeadingUnits::Degrees => self.heading.to_radians(),
        };
        DynamicObject {
            id: self.id,
            category: self.category,
            position: Point2::new(self.x, self.y),
            speed: self.speed,
            heading: if heading.is_finite() {
                normalize_angle(heading)
            } else {
                heading
            },
        }
    }

    pub fn from_object(d: &DynamicObject) -> Self {
        RawDynamic {
            id: d.id.clone(),
            category: d.category,
            x: d.position.x,
            y: d.position.y,
            speed: d.speed,
            heading: d.heading,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    t: f64,
    #[serde(default)]
    dynamics: Vec<RawDynamic>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    heading_units: HeadingUnits,
}

/// Parses a frame stream. An optional first line `{"heading_units":"degrees"}`
/// switches heading units for the whole file.
pub fn parse_frames(text: &str, location: &str) -> Result<Vec<Frame>, ScenarioError> {
    let mut units = HeadingUnits::Radians;
    let mut frames: Vec<Frame> = Vec::new();
    let mut first = true;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{location}:{lineno}");
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| ScenarioError::Parse {
            location: at(),
            message: e.to_string(),
        })?;
        if first && value.get("t").is_none() && value.get("heading_units").is_some() {
            let header: RawHeader = serde_json::from_value(value).map_err(|e| ScenarioError::Parse {
                location: at(),
                message: e.to_string(),
            })?;
            units = header.heading_units;
            first = false;
            continue;
        }
        first = false;
        let raw: RawFrame = serde_json::from_value(value).map_err(|e| ScenarioError::Parse {
            location: at(),
            message: e.to_string(),
        })?;
        let frame = Frame {
            timestamp: raw.t,
            dynamics: raw.dynamics.into_iter().map(|d| d.into_object(units)).collect(),
        };
        frame.validate().map_err(|e| match e {
            ScenarioError::Validation { field, message } => ScenarioError::Validation {
                field: format!("{}: {field}", at()),
                message,
            },
            other => other,
        })?;
        if let Some(prev) = frames.last() {
            if frame.timestamp <= prev.timestamp {
                return Err(ScenarioError::invalid(
                    format!("{}: t", at()),
                    format!(
                        "timestamps must increase monotonically ({} after {})",
                        frame.timestamp, prev.timestamp
                    ),
                ));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn load_frames(path: impl AsRef<Path>) -> Result<Vec<Frame>, ScenarioError> {
    let path = path.as_ref();
    parse_frames(&read_file(path)?, &path.display().to_string())
}

/// Serializes frames as line-delimited JSON with headings in radians.
pub fn frames_to_jsonl(frames: &[Frame]) -> String {
    let mut out = String::new();
    for f in frames {
        let raw = RawFrame {
            t: f.timestamp,
            dynamics: f.dynamics.iter().map(RawDynamic::from_object).collect(),
        };
        out.push_str(&serde_json::to_string(&raw).expect("frame serializes"));
        out.push('\n');
    }
    out
}
