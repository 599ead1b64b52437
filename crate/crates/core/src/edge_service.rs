//! Edge-cloud emulation: roadside units push frames, vehicles ask for plans.
//!
//! One writer applies frames; readers plan against an immutable snapshot
//! (`Arc<Snapshot>`) taken when their request starts, so a response never
//! mixes two grids. Every response carries the timestamp of the grid it used.
//!
//! Wire protocol, one JSON object per line:
//!
//! ```text
//! -> {"type":"frame","t":1.0,"unit":"rsu-1","dynamics":[{"id":..,"category":..,"x":..,"y":..,"speed":..,"heading":..}]}
//! -> {"type":"plan_request","icv_id":"icv-1","x":10.0,"y":2.0,"maneuver":"left"}
//! <- {"type":"plan_response","icv_id":..,"grid_t":..,"path":{..},"risk_window":[{"row":..,"col":..,"x":..,"y":..,"risk":..}]}
//! <- {"type":"error","code":"NO_GRID","detail":".."}
//! ```
//!
//! A plan is computed on the grid without the object whose id equals the
//! request's `icv_id`, if the frame has one; the risk window comes from the
//! same grid.
//!
//! Accepted frames produce no output. Several units may report the same
//! timestamp: their object lists are merged by id, and when two units report
//! the same id the report closer to its own unit wins (first report on a tie
//! or when a unit position is unknown).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::config::AppConfig;
use crate::geometry::{dist_point_point, geodetic_to_local, Point2};
use crate::occupancy::{compute_map, samples_for_map, OccupancyError, RiskGrid, SampleIndex, SamplePoint};
use crate::planner::{collision_free_indexed, plan, PlanError, PlannedPath};
use crate::scenario::{Frame, HeadingUnits, Maneuver, MapPrior, RawDynamic, ScenarioError};

pub const DEFAULT_UNIT: &str = "rsu-1";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("stale frame t={t} from `{unit}` (latest t={latest})")]
    StaleFrame { t: f64, latest: f64, unit: String },
    #[error("no risk grid yet; send a frame first")]
    NoGrid,
    #[error("unknown maneuver `{0}`")]
    UnknownManeuver(String),
    #[error("request `{request}`: {source}")]
    Plan {
        request: String,
        #[source]
        source: PlanError,
    },
    #[error("{0}")]
    BadMessage(String),
    #[error("map prior unusable: {0}")]
    Setup(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::StaleFrame { .. } => "STALE_FRAME",
            ServiceError::NoGrid => "NO_GRID",
            ServiceError::UnknownManeuver(_) => "UNKNOWN_MANEUVER",
            ServiceError::Plan {
                source: PlanError::StartUnreachable { .. },
                ..
            } => "START_UNREACHABLE",
            ServiceError::Plan { .. } | ServiceError::BadMessage(_) | ServiceError::Setup(_) => "BAD_MESSAGE",
        }
    }
}

impl From<ScenarioError> for ServiceError {
    fn from(e: ScenarioError) -> Self {
        ServiceError::BadMessage(e.to_string())
    }
}

/// Latest merged frame and the grid computed from it.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub frame: Frame,
    pub grid: RiskGrid,
    /// units that contributed to this timestamp
    pub units: BTreeSet<String>,
    /// reporting unit per object id
    pub sources: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub icv_id: String,
    pub position: Point2,
    pub maneuver: Maneuver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSample {
    pub col: i32,
    pub risk: f64,
    pub row: i32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct PlanResponse {
    pub icv_id: String,
    pub path: PlannedPath,
    pub risk_window: Vec<WindowSample>,
    pub grid_timestamp: f64,
}

// keys in alphabetical order, like the error replies built from `Value`
#[derive(Serialize)]
struct ResponseJson<'a> {
    grid_t: f64,
    icv_id: &'a str,
    path: &'a PlannedPath,
    risk_window: &'a [WindowSample],
    #[serde(rename = "type")]
    kind: &'static str,
}

impl PlanResponse {
    fn as_json(&self) -> ResponseJson<'_> {
        ResponseJson {
            grid_t: self.grid_timestamp,
            icv_id: &self.icv_id,
            path: &self.path,
            risk_window: &self.risk_window,
            kind: "plan_response",
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.as_json()).expect("response serializes")
    }

    /// One-line JSON, byte-identical to `to_json_value().to_string()`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.as_json()).expect("response serializes")
    }
}

pub struct EdgeService {
    map: Arc<MapPrior>,
    samples: Arc<Vec<SamplePoint>>,
    index: SampleIndex,
    config: AppConfig,
    latest: RwLock<Option<Arc<Snapshot>>>,
    writer: Mutex<()>,
}

impl EdgeService {
    /// Prepares the sample layout and checks that every maneuver node has a
    /// sample within half a grid cell.
    pub fn new(map: MapPrior, config: AppConfig) -> Result<Self, ServiceError> {
        config.validate().map_err(|e| ServiceError::Setup(e.to_string()))?;
        let samples = samples_for_map(&map).map_err(|e: OccupancyError| ServiceError::Setup(e.to_string()))?;
        let res = map.sampling.resolution();
        let index = SampleIndex::new(&samples, res);
        for (m, set) in &map.maneuver_sets {
            for (r, row) in set.rows.iter().enumerate() {
                for n in row {
                    if index.nearest(n.position, res / 2.0).is_none() {
                        return Err(ServiceError::Setup(format!(
                            "maneuver {m} row {r} col {} at ({:.3}, {:.3}) is not covered by the sampling grid",
                            n.col, n.position.x, n.position.y
                        )));
                    }
                }
            }
        }
        Ok(Self {
            map: Arc::new(map),
            samples: Arc::new(samples),
            index,
            config,
            latest: RwLock::new(None),
            writer: Mutex::new(()),
        })
    }

    pub fn map(&self) -> &MapPrior {
        &self.map
    }

    pub fn samples(&self) -> &[SamplePoint] {
        &self.samples
    }

    pub fn config(&self) -> &AppConfig {
        &self.config
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.latest.read().expect("snapshot lock poisoned").clone()
    }

    /// Applies one unit's frame. Older timestamps, or a repeat from a unit
    /// that already reported the current timestamp, are rejected as stale and
    /// leave the state unchanged.
    pub fn ingest_frame(&self, unit: &str, frame: Frame) -> Result<Arc<Snapshot>, ServiceError> {
        frame.validate()?;
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let current = self.snapshot();

        let (merged, units, sources) = match current.as_deref() {
            Some(cur) if frame.timestamp < cur.frame.timestamp
                || (frame.timestamp == cur.frame.timestamp && cur.units.contains(unit)) =>
            {
                warn!(t = frame.timestamp, latest = cur.frame.timestamp, unit, "stale frame rejected");
                return Err(ServiceError::StaleFrame {
                    t: frame.timestamp,
                    latest: cur.frame.timestamp,
                    unit: unit.to_string(),
                });
            }
            Some(cur) if frame.timestamp == cur.frame.timestamp => self.merge(cur, unit, frame),
            _ => {
                let sources = frame
                    .dynamics
                    .iter()
                    .map(|d| (d.id.clone(), unit.to_string()))
                    .collect();
                (frame, BTreeSet::from([unit.to_string()]), sources)
            }
        };

        let grid = compute_map(
            &self.samples,
            self.map.sampling.resolution(),
            &merged,
            &self.map.statics,
            &self.config.risk,
        );
        let snap = Arc::new(Snapshot {
            frame: merged,
            grid,
            units,
            sources,
        });
        *self.latest.write().expect("snapshot lock poisoned") = Some(snap.clone());
        Ok(snap)
    }

    fn merge(&self, cur: &Snapshot, unit: &str, frame: Frame) -> (Frame, BTreeSet<String>, BTreeMap<String, String>) {
        let mut dynamics = cur.frame.dynamics.clone();
        let mut sources = cur.sources.clone();
        let unit_pos = |u: &str| self.map.units.get(u).copied();
        for obj in frame.dynamics {
            match dynamics.iter().position(|d| d.id == obj.id) {
                None => {
                    sources.insert(obj.id.clone(), unit.to_string());
                    dynamics.push(obj);
                }
                Some(i) => {
                    let prev_unit = sources.get(&obj.id).cloned().unwrap_or_default();
                    let closer = match (unit_pos(&prev_unit), unit_pos(unit)) {
                        (Some(a), Some(b)) => {
                            dist_point_point(obj.position, b) < dist_point_point(dynamics[i].position, a)
                        }
                        _ => false,
                    };
                    if closer {
                        sources.insert(obj.id.clone(), unit.to_string());
                        dynamics[i] = obj;
                    }
                }
            }
        }
        let mut units = cur.units.clone();
        units.insert(unit.to_string());
        (
            Frame {
                timestamp: frame.timestamp,
                dynamics,
            },
            units,
            sources,
        )
    }

    pub fn handle_plan_request(&self, req: &PlanRequest) -> Result<PlanResponse, ServiceError> {
        let snap = self.snapshot().ok_or(ServiceError::NoGrid)?;
        let set = self
            .map
            .maneuver_sets
            .get(&req.maneuver)
            .ok_or_else(|| ServiceError::UnknownManeuver(req.maneuver.to_string()))?;
        let dest = self
            .map
            .destination(req.maneuver)
            .ok_or_else(|| ServiceError::UnknownManeuver(req.maneuver.to_string()))?;
        let wrap = |source| ServiceError::Plan {
            request: req.icv_id.clone(),
            source,
        };
        let own;
        let grid = if snap.frame.dynamics.iter().any(|d| d.id == req.icv_id) {
            own = self.grid_without(&snap.frame, &req.icv_id);
            &own
        } else {
            &snap.grid
        };
        let free = collision_free_indexed(set, grid, &self.index, self.config.planner.risk_threshold).map_err(wrap)?;
        let path = plan(&free, req.position, dest, req.maneuver, &self.config.planner).map_err(wrap)?;
        let risk_window = grid
            .window(req.position, self.config.service.window_radius)
            .into_iter()
            .map(|(s, risk)| WindowSample {
                row: s.row,
                col: s.col,
                x: s.position.x,
                y: s.position.y,
                risk,
            })
            .collect();
        Ok(PlanResponse {
            icv_id: req.icv_id.clone(),
            path,
            risk_window,
            grid_timestamp: snap.grid.timestamp,
        })
    }

    /// The snapshot's grid recomputed without object `id`, so a vehicle's own
    /// report does not block its plan.
    fn grid_without(&self, frame: &Frame, id: &str) -> RiskGrid {
        let others = Frame {
            timestamp: frame.timestamp,
            dynamics: frame.dynamics.iter().filter(|d| d.id != id).cloned().collect(),
        };
        compute_map(
            &self.samples,
            self.map.sampling.resolution(),
            &others,
            &self.map.statics,
            &self.config.risk,
        )
    }

    /// Handles one protocol line; returns the reply line, if any.
    pub fn handle_line(&self, line: &str) -> Option<String> {
        match parse_message(line, self.map.origin) {
            Err(e) => Some(error_json(&e)),
            Ok(Message::Frame { unit, frame }) => match self.ingest_frame(&unit, frame) {
                Ok(_) => None,
                Err(e) => Some(error_json(&e)),
            },
            Ok(Message::Plan(req)) => Some(match self.handle_plan_request(&req) {
                Ok(resp) => resp.to_json_line(),
                Err(e) => error_json(&e),
            }),
        }
    }
}

fn error_json(e: &ServiceError) -> String {
    serde_json::json!({"type": "error", "code": e.code(), "detail": e.to_string()}).to_string()
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum WireIn {
    Frame {
        t: f64,
        #[serde(default)]
        unit: Option<String>,
        #[serde(default)]
        dynamics: Vec<RawDynamic>,
    },
    PlanRequest {
        icv_id: String,
        #[serde(default)]
        x: Option<f64>,
        #[serde(default)]
        y: Option<f64>,
        #[serde(default)]
        lat: Option<f64>,
        #[serde(default)]
        lon: Option<f64>,
        maneuver: String,
    },
}

#[derive(Debug)]
pub enum Message {
    Frame { unit: String, frame: Frame },
    Plan(PlanRequest),
}

/// Decodes one inbound protocol line. Geodetic request positions are
/// converted with the map origin.
pub fn parse_message(line: &str, origin: (f64, f64)) -> Result<Message, ServiceError> {
    let wire: WireIn = serde_json::from_str(line).map_err(|e| ServiceError::BadMessage(e.to_string()))?;
    match wire {
        WireIn::Frame { t, unit, dynamics } => Ok(Message::Frame {
            unit: unit.unwrap_or_else(|| DEFAULT_UNIT.to_string()),
            frame: Frame {
                timestamp: t,
                dynamics: dynamics
                    .into_iter()
                    .map(|d| d.into_object(HeadingUnits::Radians))
                    .collect(),
            },
        }),
        WireIn::PlanRequest {
            icv_id,
            x,
            y,
            lat,
            lon,
            maneuver,
        } => {
            let maneuver: Maneuver = maneuver.parse().map_err(|_| ServiceError::UnknownManeuver(maneuver))?;
            let position = match (x, y, lat, lon) {
                (Some(x), Some(y), None, None) => Point2::new(x, y),
                (None, None, Some(lat), Some(lon)) => {
                    geodetic_to_local(lat, lon, origin).map_err(|e| ServiceError::BadMessage(e.to_string()))?
                }
                _ => {
                    return Err(ServiceError::BadMessage(
                        "plan_request needs either x,y or lat,lon".into(),
                    ))
                }
            };
            if !position.is_finite() {
                return Err(ServiceError::BadMessage("position must be finite".into()));
            }
            Ok(Message::Plan(PlanRequest {
                icv_id,
                position,
                maneuver,
            }))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub lines_in: usize,
    pub lines_out: usize,
    pub errors: usize,
}

/// Serves the protocol over a line stream until EOF. Each inbound line and
/// reply is appended to `log` when given.
pub fn serve_lines<R: BufRead, W: Write>(
    service: &EdgeService,
    input: R,
    mut output: W,
    mut log: Option<&mut dyn Write>,
) -> io::Result<SessionStats> {
    let mut stats = SessionStats::default();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines_in += 1;
        if let Some(log) = log.as_deref_mut() {
            writeln!(log, "-> {line}")?;
        }
        if let Some(reply) = service.handle_line(&line) {
            if reply.contains("\"type\":\"error\"") {
                stats.errors += 1;
            }
            writeln!(output, "{reply}")?;
            output.flush()?;
            stats.lines_out += 1;
            if let Some(log) = log.as_deref_mut() {
                writeln!(log, "<- {reply}")?;
            }
        }
        if let Some(log) = log.as_deref_mut() {
            log.flush()?;
        }
    }
    Ok(stats)
}

/// Accepts TCP connections and serves each on its own thread, all sharing
/// one service state. Returns only on a listener error.
pub fn serve_tcp(service: Arc<EdgeService>, addr: impl ToSocketAddrs) -> io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    info!(addr = %listener.local_addr()?, "listening");
    serve_listener(service, listener)
}

pub fn serve_listener(service: Arc<EdgeService>, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let service = service.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            let reader = match stream.try_clone() {
                Ok(s) => io::BufReader::new(s),
                Err(e) => {
                    warn!(error = %e, "could not clone stream");
                    return;
                }
            };
            match serve_lines(&service, reader, stream, None) {
                Ok(stats) => info!(?peer, lines_in = stats.lines_in, "connection closed"),
                Err(e) => warn!(?peer, error = %e, "connection failed"),
            }
        });
    }
    Ok(())
}
