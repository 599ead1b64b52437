//! Risk-occupancy mapping and low-risk local path planning for connected
//! vehicles.
//!
//! A road is covered with sampling points. Each frame of roadside perception
//! is turned into a scalar risk per point: moving participants occupy the
//! stretch of road they will cover in the next few seconds, static road
//! factors occupy their immediate surroundings. The planner then walks preset
//! maneuver node sets through the low-risk part of that grid.
//!
//! Module map:
//! - [`geometry`]: points, segments, distances, tangent-plane and Frenet transforms
//! - [`scenario`]: participants, static factors, frames, map priors and their file formats
//! - [`risk_model`]: per-point risk accumulation
//! - [`occupancy`]: sample layout, grid computation, CSV/PGM export
//! - [`render`]: color PPM rendering and path overlays
//! - [`planner`]: collision-free node sets, greedy and exact search, smoothing
//! - [`edge_service`]: frame ingestion, plan requests, line-delimited JSON protocol
//! - [`eval`]: kinematic braking comparison of detection schemes
//! - [`config`]: TOML/JSON runtime configuration

pub mod config;
pub mod edge_service;
pub mod eval;
pub mod geometry;
pub mod occupancy;
pub mod planner;
pub mod render;
pub mod risk_model;
pub mod scenario;

pub use config::AppConfig;
pub use geometry::{Centerline, DirectedSegment, FrenetCoord, Point2};
pub use occupancy::{RiskGrid, SamplePoint};
pub use planner::{ManeuverNodeSet, PlannedPath, PlannerConfig};
pub use risk_model::RiskConfig;
pub use scenario::{DynamicObject, Frame, Maneuver, MapPrior, StaticFactor};
