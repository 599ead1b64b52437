//! Kinematic braking study over three perception/planning schemes.
//!
//! The ICV drives along a corridor at the study speed while one hazard moves
//! at constant velocity. The conflict point is where the hazard's current
//! position first comes within the corridor half-width of the road still
//! ahead of the ICV. Detection happens:
//!
//! - `baseline`: at that same moment (the hazard is seen only once it is in
//!   the corridor);
//! - `occupancy`: as soon as the hazard's 3 s risk footprint (projected
//!   segment widened by the dynamic radius) touches the corridor ahead;
//! - `occupancy_plus_plan`: like `occupancy`, but the corridor is the
//!   smoothed path planned on the scene's risk grid instead of the lane.
//!
//! Detection distance is the arc length from the ICV to the conflict point at
//! the moment of detection. Braking then follows constant deceleration.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::AppConfig;
use crate::geometry::{dist_point_segment, dist_segment_segment, frenet_project, Centerline, DirectedSegment, Point2};
use crate::occupancy::{compute_map, project_future, samples_for_map};
use crate::planner::{collision_free, plan, PlanError, PlannedPath};
use crate::scenario::{
    load_map_prior_with, parse_frames, DynamicObject, Frame, Maneuver, MapPrior, ScenarioError,
};

/// Simulation step for the detection search, seconds.
pub const SIM_DT: f64 = 0.01;

/// Reference values: max safe speed for schemes 1-3 and average deceleration
/// for schemes 2-3 at 8 m/s.
pub const REFERENCE_SPEEDS: [f64; 3] = [5.42, 8.875, 9.00];
pub const REFERENCE_DECELS: [f64; 2] = [0.536, 0.507];
pub const REFERENCE_V0: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrakingConfig {
    pub a_max: f64,
    pub v0: f64,
    pub lookahead_corridor_halfwidth: f64,
}

impl Default for BrakingConfig {
    fn default() -> Self {
        Self {
            a_max: 4.0,
            v0: 8.0,
            lookahead_corridor_halfwidth: 1.9,
        }
    }
}

impl BrakingConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(ScenarioError::Config(format!("braking.a_max must be > 0, got {}", self.a_max)));
        }
        if !(self.v0.is_finite() && self.v0 >= 0.0) {
            return Err(ScenarioError::Config(format!("braking.v0 must be >= 0, got {}", self.v0)));
        }
        let hw = self.lookahead_corridor_halfwidth;
        if !(hw.is_finite() && hw > 0.0) {
            return Err(ScenarioError::Config(format!(
                "braking.lookahead_corridor_halfwidth must be > 0, got {hw}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Baseline,
    Occupancy,
    OccupancyPlusPlan,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Baseline, Scheme::Occupancy, Scheme::OccupancyPlusPlan];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Occupancy => "occupancy",
            Scheme::OccupancyPlusPlan => "occupancy_plus_plan",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    /// `f64::INFINITY` when the hazard never conflicts with the corridor
    pub detection_distance: f64,
    pub max_safe_speed: f64,
    /// at the configured v0; infinite when the collision is unavoidable
    pub avg_decel: f64,
    pub unavoidable: bool,
}

impl SchemeResult {
    pub fn from_distance(scheme: Scheme, d: f64, cfg: &BrakingConfig) -> Self {
        let (avg_decel, unavoidable) = match avg_decel(cfg.v0, d) {
            Some(a) => (a, false),
            None => (f64::INFINITY, true),
        };
        Self {
            scheme,
            detection_distance: d,
            max_safe_speed: max_safe_speed(d, cfg.a_max),
            avg_decel,
            unavoidable,
        }
    }

    pub fn no_conflict(&self) -> bool {
        self.detection_distance.is_infinite()
    }
}

pub fn max_safe_speed(d: f64, a_max: f64) -> f64 {
    (2.0 * a_max * d.max(0.0)).sqrt()
}

/// Constant deceleration needed to stop from `v0` within `d`. `None` means a
/// moving vehicle has no room at all.
pub fn avg_decel(v0: f64, d: f64) -> Option<f64> {
    if d <= 0.0 {
        return if v0 > 0.0 { None } else { Some(0.0) };
    }
    Some(v0 * v0 / (2.0 * d))
}

fn distance_ahead(corridor: &Centerline, from_s: f64, dist: impl Fn(&DirectedSegment) -> f64) -> f64 {
    let pts = corridor.points();
    let st = corridor.stations();
    let mut best = f64::INFINITY;
    for i in 0..pts.len() - 1 {
        if st[i + 1] <= from_s {
            continue;
        }
        let start = if st[i] < from_s {
            corridor.point_at(from_s, 0.0)
        } else {
            pts[i]
        };
        best = best.min(dist(&DirectedSegment::new(start, pts[i + 1])));
    }
    best
}

fn hazard_at(h: &DynamicObject, t: f64) -> DynamicObject {
    let mut moved = h.clone();
    moved.position = Point2::new(
        h.position.x + h.speed * t * h.heading.cos(),
        h.position.y + h.speed * t * h.heading.sin(),
    );
    moved
}

/// Remaining distance to the conflict point when `scheme` first notices the
/// hazard, with the ICV starting at station `icv_s` of `corridor`.
/// `Scheme::OccupancyPlusPlan` behaves like `Scheme::Occupancy` here; the
/// caller supplies the planned corridor.
pub fn detection_distance(
    corridor: &Centerline,
    icv_s: f64,
    hazard: &DynamicObject,
    scheme: Scheme,
    braking: &BrakingConfig,
    cfg: &AppConfig,
) -> f64 {
    let hw = braking.lookahead_corridor_halfwidth;
    let reach = hw + cfg.risk.dynamic_radius;
    let v = braking.v0;
    let mut detected_at: Option<f64> = None;
    let mut step = 0u64;
    loop {
        let t = step as f64 * SIM_DT;
        let s = icv_s + v * t;
        if s >= corridor.length() || t > 600.0 {
            return f64::INFINITY;
        }
        let h = hazard_at(hazard, t);
        if scheme != Scheme::Baseline && detected_at.is_none() {
            let seg = project_future(&h, cfg.risk.horizon);
            if distance_ahead(corridor, s, |c| dist_segment_segment(&seg, c)) <= reach {
                detected_at = Some(s);
            }
        }
        if distance_ahead(corridor, s, |c| dist_point_segment(h.position, c)) <= hw {
            let conflict = frenet_project(corridor, h.position).s;
            if conflict <= s {
                // the hazard enters beside or behind the ICV
                return f64::INFINITY;
            }
            return conflict - detected_at.unwrap_or(s);
        }
        step += 1;
    }
}

/// Bundled study scene: a map prior, the ICV's lane, and one frame holding
/// the ICV and the hazard.
#[derive(Debug, Clone)]
pub struct BrakingScenario {
    pub map: MapPrior,
    pub lane: Centerline,
    pub icv_id: String,
    pub hazard_id: String,
    pub maneuver: Maneuver,
    pub frame: Frame,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudyHeader {
    map_prior: String,
    lane: Vec<[f64; 2]>,
    icv: String,
    hazard: String,
    maneuver: Maneuver,
}

/// Reads a study file: a header line naming the map prior (relative to the
/// file), the lane polyline in local meters, the ICV and hazard ids and the maneuver, then
/// frame lines. Only the first frame is used.
pub fn load_braking_scenario(path: impl AsRef<Path>, cfg: &AppConfig) -> Result<BrakingScenario, ScenarioError> {
    let path = path.as_ref();
    let loc = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: loc.clone(),
        source,
    })?;
    let mut lines = text.splitn(2, '\n');
    let head = lines.next().unwrap_or_default();
    let rest = lines.next().unwrap_or_default();
    let header: RawStudyHeader = serde_json::from_str(head).map_err(|e| ScenarioError::Parse {
        location: format!("{loc}:1"),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let map = load_map_prior_with(base.join(&header.map_prior), &cfg.risk.weights)?;
    let lane_pts: Vec<Point2> = header.lane.iter().map(|&p| p.into()).collect();
    let lane = Centerline::new(lane_pts).map_err(|e| ScenarioError::invalid("lane", e.to_string()))?;
    // frame line numbers continue after the header
    let frames = parse_frames(&format!("\n{rest}"), &loc)?;
    let frame = frames
        .into_iter()
        .next()
        .ok_or_else(|| ScenarioError::invalid("frames", "study file has no frame"))?;
    for id in [&header.icv, &header.hazard] {
        if !frame.dynamics.iter().any(|d| &d.id == id) {
            return Err(ScenarioError::invalid("frames", format!("object `{id}` missing from first frame")));
        }
    }
    Ok(BrakingScenario {
        map,
        lane,
        icv_id: header.icv,
        hazard_id: header.hazard,
        maneuver: header.maneuver,
        frame,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("planning the study corridor failed: {0}")]
    Plan(#[from] PlanError),
    #[error("{0}")]
    Geometry(String),
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub results: [SchemeResult; 3],
    pub planned: PlannedPath,
    pub v0: f64,
    /// (s3 - v0) / v0, percent
    pub speed_gain_vs_v0_pct: f64,
    /// (s3 - s2) / s2, percent
    pub speed_gain_vs_s2_pct: f64,
    /// (a2 - a3) / a2, percent
    pub decel_drop_pct: f64,
}

/// The same three delta formulas evaluated on the reference numbers.
pub fn reference_deltas() -> (f64, f64, f64) {
    let [_, s2, s3] = REFERENCE_SPEEDS;
    let [a2, a3] = REFERENCE_DECELS;
    (
        100.0 * (s3 - REFERENCE_V0) / REFERENCE_V0,
        100.0 * (s3 - s2) / s2,
        100.0 * (a2 - a3) / a2,
    )
}

/// Plans on the scene grid (ICV excluded) and returns the smoothed path.
pub fn plan_corridor(sc: &BrakingScenario, cfg: &AppConfig) -> Result<PlannedPath, StudyError> {
    let icv = sc
        .frame
        .dynamics
        .iter()
        .find(|d| d.id == sc.icv_id)
        .expect("validated on load");
    let samples = samples_for_map(&sc.map).map_err(|e| StudyError::Geometry(e.to_string()))?;
    let scene = sc.frame.without(&sc.icv_id);
    let grid = compute_map(&samples, sc.map.sampling.resolution(), &scene, &sc.map.statics, &cfg.risk);
    let set = sc
        .map
        .maneuver_sets
        .get(&sc.maneuver)
        .ok_or_else(|| ScenarioError::invalid("maneuver", format!("map has no `{}` set", sc.maneuver)))?;
    let dest = sc
        .map
        .destination(sc.maneuver)
        .ok_or_else(|| ScenarioError::invalid("maneuver", "no destination"))?;
    let free = collision_free(set, &grid, cfg.planner.risk_threshold)?;
    Ok(plan(&free, icv.position, dest, sc.maneuver, &cfg.planner)?)
}

fn polyline(points: &[Point2]) -> Result<Centerline, StudyError> {
    let mut pts: Vec<Point2> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    Centerline::new(pts).map_err(|e| StudyError::Geometry(e.to_string()))
}

pub fn run_study(sc: &BrakingScenario, cfg: &AppConfig) -> Result<StudyReport, StudyError> {
    let braking = &cfg.braking;
    let find = |id: &str| sc.frame.dynamics.iter().find(|d| d.id == id).expect("validated on load");
    let icv = find(&sc.icv_id);
    let hazard = find(&sc.hazard_id);

    let planned = plan_corridor(sc, cfg)?;
    let path = polyline(&planned.smoothed)?;

    let lane_s = frenet_project(&sc.lane, icv.position).s;
    let path_s = frenet_project(&path, icv.position).s;
    let d = [
        detection_distance(&sc.lane, lane_s, hazard, Scheme::Baseline, braking, cfg),
        detection_distance(&sc.lane, lane_s, hazard, Scheme::Occupancy, braking, cfg),
        detection_distance(&path, path_s, hazard, Scheme::OccupancyPlusPlan, braking, cfg),
    ];
    let results = [0, 1, 2].map(|i| SchemeResult::from_distance(Scheme::ALL[i], d[i], braking));
    let (s2, s3) = (results[1].max_safe_speed, results[2].max_safe_speed);
    let (a2, a3) = (results[1].avg_decel, results[2].avg_decel);
    let v0 = braking.v0;
    Ok(StudyReport {
        results,
        planned,
        v0,
        speed_gain_vs_v0_pct: if v0 > 0.0 { 100.0 * (s3 - v0) / v0 } else { f64::NAN },
        speed_gain_vs_s2_pct: 100.0 * (s3 - s2) / s2,
        decel_drop_pct: 100.0 * (a2 - a3) / a2,
    })
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,detection_distance,max_safe_speed,avg_decel\n");
        for r in &self.results {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.scheme,
                num(r.detection_distance),
                num(r.max_safe_speed),
                num(r.avg_decel)
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        let (t_v0, t_s2, t_decel) = reference_deltas();
        let mut out = String::new();
        for r in &self.results {
            out.push_str(&format!(
                "{:<20} d={:>9} m  v_max={:>8} m/s  a@{}={:>8} m/s^2{}\n",
                r.scheme.as_str(),
                num(r.detection_distance),
                num(r.max_safe_speed),
                self.v0,
                num(r.avg_decel),
                if r.unavoidable { "  (unavoidable)" } else { "" }
            ));
        }
        out.push_str(&format!(
            "max safe speed, scheme 3 vs v0:       {:+.2}%   (reference: {:+.2}%)\n",
            self.speed_gain_vs_v0_pct, t_v0
        ));
        out.push_str(&format!(
            "max safe speed, scheme 3 vs scheme 2: {:+.2}%   (reference: {:+.2}%)\n",
            self.speed_gain_vs_s2_pct, t_s2
        ));
        out.push_str(&format!(
            "avg decel drop, scheme 2 -> 3:        {:.2}%   (reference: {:.2}%)\n",
            self.decel_drop_pct, t_decel
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ParticipantCategory;

    fn straight(len: f64) -> Centerline {
        Centerline::new(vec![Point2::new(0.0, 0.0), Point2::new(len, 0.0)]).unwrap()
    }

    fn ped(x: f64, y: f64, speed: f64, heading: f64) -> DynamicObject {
        DynamicObject {
            id: "p".into(),
            category: ParticipantCategory::Pedestrian,
            position: Point2::new(x, y),
            speed,
            heading,
        }
    }

    #[test]
    fn kinematics_examples() {
        assert_eq!(max_safe_speed(8.0, 4.0), 8.0);
        assert!((max_safe_speed(10.125, 4.0) - 9.0).abs() < 1e-12);
        assert_eq!(max_safe_speed(0.0, 4.0), 0.0);
        assert_eq!(avg_decel(8.0, 8.0), Some(4.0));
        assert!((avg_decel(8.0, 63.1).unwrap() - 0.5071).abs() < 1e-4);
        assert!((avg_decel(8.0, 59.7).unwrap() - 0.5360).abs() < 1e-4);
        assert_eq!(avg_decel(8.0, 0.0), None);
    }

    #[test]
    fn reference_delta_arithmetic() {
        let (v0, s2, decel) = reference_deltas();
        assert!((v0 - 12.5).abs() < 1e-9);
        assert!((decel - 5.41).abs() < 5e-3);
        assert!((s2 - 12.5).abs() > 10.0);
    }

    #[test]
    fn stationary_hazard_in_lane_same_for_all() {
        let cfg = AppConfig::default();
        let lane = straight(100.0);
        let h = ped(40.0, 0.5, 0.0, 0.0);
        let b = detection_distance(&lane, 0.0, &h, Scheme::Baseline, &cfg.braking, &cfg);
        let o = detection_distance(&lane, 0.0, &h, Scheme::Occupancy, &cfg.braking, &cfg);
        assert!((b - 40.0).abs() < 1e-9);
        assert_eq!(b, o);
    }

    #[test]
    fn parallel_hazard_never_conflicts() {
        let cfg = AppConfig::default();
        let lane = straight(100.0);
        let h = ped(10.0, 10.0, 1.5, 0.0);
        for s in Scheme::ALL {
            assert!(detection_distance(&lane, 0.0, &h, s, &cfg.braking, &cfg).is_infinite());
        }
    }

    #[test]
    fn crossing_pedestrian_seen_earlier_with_footprint() {
        let cfg = AppConfig::default();
        let lane = straight(200.0);
        // walks toward the lane from the left, enters the corridor at t = 4 s
        let h = ped(60.0, 1.9 + 6.0, 1.5, -std::f64::consts::FRAC_PI_2);
        let b = detection_distance(&lane, 0.0, &h, Scheme::Baseline, &cfg.braking, &cfg);
        let o = detection_distance(&lane, 0.0, &h, Scheme::Occupancy, &cfg.braking, &cfg);
        // baseline: ICV at 32 m when the pedestrian reaches y = 1.9
        assert!((b - 28.0).abs() < 0.1, "{b}");
        // footprint end reaches y = 3.9 once y - 4.5 <= 3.9, already at t = 0
        assert!((o - 60.0).abs() < 1e-9, "{o}");
        assert!(o > b);
    }
}
