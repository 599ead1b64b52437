//! Risk quantification for a single sampling point.
//!
//! A dynamic participant contributes when the sampling point lies within
//! `dynamic_radius` of the participant's projected path (the segment from its
//! current position to where it would be after `horizon` seconds at constant
//! velocity). Its contribution is the ETA-based risk curve evaluated at
//! `distance_to_current_position / (speed + speed_epsilon)`, times the
//! category weight. Static factors contribute `risk_value * weight` when the
//! point is within `static_radius` of their geometry. Contributions add up;
//! the sum is not normalized.

use serde::{Deserialize, Serialize};

use crate::geometry::{dist_point_point, dist_point_segment, DirectedSegment, Point2};
use crate::occupancy::project_future;
use crate::scenario::{Frame, ScenarioError, StaticFactor, Weights};

/// Breakpoint of the piecewise risk curve, in seconds.
pub const ETA_CUTOFF_S: f64 = 3.0;
/// Risk assigned beyond the cutoff, including stationary participants.
pub const FAR_ETA_RISK: f64 = 0.5;

/// Which distance decides whether a participant reaches a sampling point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicGating {
    /// distance to the projected current-to-future segment
    #[default]
    Segment,
    /// distance to the current position only
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    pub dynamic_radius: f64,
    pub static_radius: f64,
    pub horizon: f64,
    pub speed_epsilon: f64,
    /// clamp the cubic into [0, 1]; the raw curve overshoots slightly near 0
    pub clamp_dynamic: bool,
    pub gating: DynamicGating,
    pub weights: Weights,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            dynamic_radius: 2.0,
            static_radius: 1.0,
            horizon: 3.0,
            speed_epsilon: 0.01,
            clamp_dynamic: true,
            gating: DynamicGating::Segment,
            weights: Weights::default(),
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("dynamic_radius", self.dynamic_radius),
            ("static_radius", self.static_radius),
            ("horizon", self.horizon),
            ("speed_epsilon", self.speed_epsilon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::Config(format!("risk.{name} must be > 0, got {v}")));
            }
        }
        self.weights.validate()
    }
}

pub fn eta(distance: f64, speed: f64, cfg: &RiskConfig) -> f64 {
    distance / (speed + cfg.speed_epsilon)
}

/// Cubic risk curve for `eta <= 3 s`, constant 0.5 beyond.
pub fn dynamic_risk(eta_val: f64, cfg: &RiskConfig) -> f64 {
    let raw = if eta_val <= ETA_CUTOFF_S {
        let e = eta_val;
        0.0667 * e * e * e - 0.3 * e * e + 0.0333 * e + 1.0
    } else {
        FAR_ETA_RISK
    };
    if cfg.clamp_dynamic {
        raw.clamp(0.0, 1.0)
    } else {
        raw
    }
}

pub fn static_risk(distance: f64, factor: &StaticFactor, cfg: &RiskConfig) -> f64 {
    if distance <= cfg.static_radius {
        factor.risk_value
    } else {
        0.0
    }
}

/// A participant with its future segment precomputed for one frame.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedDynamic {
    pub position: Point2,
    pub segment: DirectedSegment,
    pub speed: f64,
    pub weight: f64,
}

pub fn project_frame(frame: &Frame, cfg: &RiskConfig) -> Vec<ProjectedDynamic> {
    frame
        .dynamics
        .iter()
        .map(|d| ProjectedDynamic {
            position: d.position,
            segment: project_future(d, cfg.horizon),
            speed: d.speed,
            weight: cfg.weights.category(d.category),
        })
        .collect()
}

/// Weighted risk a single projected participant adds at `p`.
pub fn dynamic_contribution(p: Point2, dyn_obj: &ProjectedDynamic, cfg: &RiskConfig) -> f64 {
    let gate = match cfg.gating {
        DynamicGating::Segment => dist_point_segment(p, &dyn_obj.segment),
        DynamicGating::Position => dist_point_point(p, dyn_obj.position),
    };
    if gate > cfg.dynamic_radius {
        return 0.0;
    }
    let e = eta(dist_point_point(p, dyn_obj.position), dyn_obj.speed, cfg);
    dynamic_risk(e, cfg) * dyn_obj.weight
}

/// Accumulated risk at `p` from already-projected participants and statics.
pub fn point_risk_projected(
    p: Point2,
    dynamics: &[ProjectedDynamic],
    statics: &[StaticFactor],
    cfg: &RiskConfig,
) -> f64 {
    let mut risk = 0.0;
    for d in dynamics {
        risk += dynamic_contribution(p, d, cfg);
    }
    for s in statics {
        risk += static_risk(s.geometry.distance_to(p), s, cfg) * s.weight;
    }
    risk
}

/// Accumulated risk at `p` for one frame and the map's static factors.
pub fn point_risk(p: Point2, frame: &Frame, statics: &[StaticFactor], cfg: &RiskConfig) -> f64 {
    point_risk_projected(p, &project_frame(frame, cfg), statics, cfg)
}
