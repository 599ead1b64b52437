//! Sampling-point layout, per-frame risk grids and their export formats.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{dist_point_point, Centerline, DirectedSegment, FrenetCoord, Point2};
use crate::planner::ManeuverNodeSet;
use crate::risk_model::{point_risk_projected, project_frame, RiskConfig};
use crate::scenario::{DynamicObject, Frame, MapPrior, Sampling, StaticFactor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OccupancyError {
    #[error("resolution must be > 0, got {0}")]
    BadResolution(f64),
    #[error("road half width must be > 0, got {0}")]
    BadHalfWidth(f64),
    #[error("unknown centerline `{0}`")]
    UnknownCenterline(String),
    #[error("grid is not rectangular ({samples} samples for {rows}x{cols} cells)")]
    NotRasterizable { samples: usize, rows: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplePoint {
    /// station index along the road
    pub row: i32,
    /// lateral index, increasing to the left
    pub col: i32,
    pub position: Point2,
    pub frenet: FrenetCoord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskGrid {
    pub timestamp: f64,
    pub resolution: f64,
    pub samples: Vec<SamplePoint>,
    pub risks: Vec<f64>,
}

// Guard against 19.0 / 1.9 landing a hair below 10.
const COUNT_SLACK: f64 = 1e-9;

/// Lays sampling points on a regular station/offset lattice along `cl`.
pub fn layout_samples(
    cl: &Centerline,
    road_half_width: f64,
    resolution: f64,
) -> Result<Vec<SamplePoint>, OccupancyError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(OccupancyError::BadResolution(resolution));
    }
    if !(road_half_width.is_finite() && road_half_width > 0.0) {
        return Err(OccupancyError::BadHalfWidth(road_half_width));
    }
    let rows = (cl.length() / resolution + COUNT_SLACK).floor() as i32 + 1;
    let half_cols = (road_half_width / resolution + COUNT_SLACK).floor() as i32;
    let mut out = Vec::with_capacity((rows * (2 * half_cols + 1)) as usize);
    for row in 0..rows {
        let s = (row as f64 * resolution).min(cl.length());
        for col in -half_cols..=half_cols {
            let d = col as f64 * resolution;
            out.push(SamplePoint {
                row,
                col,
                position: cl.point_at(s, d),
                frenet: FrenetCoord { s, d },
            });
        }
    }
    Ok(out)
}

/// Uses maneuver node sets directly as sampling points. Nodes shared between
/// sets (same position) are kept once. Rows are offset per set so `(row, col)`
/// stays unique: set `k` starts after all rows of sets `0..k`.
pub fn samples_from_nodes<'a>(sets: impl IntoIterator<Item = &'a ManeuverNodeSet>) -> Vec<SamplePoint> {
    let mut out: Vec<SamplePoint> = Vec::new();
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    let mut row_offset = 0i32;
    for set in sets {
        for (r, row) in set.rows.iter().enumerate() {
            for n in row {
                let key = (n.position.x.to_bits(), n.position.y.to_bits());
                if !seen.insert(key) {
                    continue;
                }
                out.push(SamplePoint {
                    row: row_offset + r as i32,
                    col: n.col,
                    position: n.position,
                    frenet: FrenetCoord {
                        s: r as f64,
                        d: n.col as f64,
                    },
                });
            }
        }
        row_offset += set.rows.len() as i32;
    }
    out
}

/// Sampling points for a map according to its sampling mode.
pub fn samples_for_map(map: &MapPrior) -> Result<Vec<SamplePoint>, OccupancyError> {
    match &map.sampling {
        Sampling::Layout {
            centerline,
            half_width,
            resolution,
        } => {
            let cl = map
                .centerlines
                .get(centerline)
                .ok_or_else(|| OccupancyError::UnknownCenterline(centerline.clone()))?;
            layout_samples(cl, *half_width, *resolution)
        }
        Sampling::Nodes { .. } => Ok(samples_from_nodes(map.maneuver_sets.values())),
    }
}

/// Constant-velocity projection of a participant over `horizon` seconds.
pub fn project_future(d: &DynamicObject, horizon: f64) -> DirectedSegment {
    let reach = d.speed * horizon;
    let end = Point2::new(
        d.position.x + reach * d.heading.cos(),
        d.position.y + reach * d.heading.sin(),
    );
    DirectedSegment::new(d.position, end)
}

/// Evaluates every sampling point for one frame. Participants are projected
/// once; points are evaluated in parallel and collected in input order.
pub fn compute_map(
    samples: &[SamplePoint],
    resolution: f64,
    frame: &Frame,
    statics: &[StaticFactor],
    cfg: &RiskConfig,
) -> RiskGrid {
    let projected = project_frame(frame, cfg);
    let risks = samples
        .par_iter()
        .map(|s| point_risk_projected(s.position, &projected, statics, cfg))
        .collect();
    RiskGrid {
        timestamp: frame.timestamp,
        resolution,
        samples: samples.to_vec(),
        risks,
    }
}

/// Dense row-major placement of samples: `cells[(row - min_row) * cols + (col - min_col)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub min_row: i32,
    pub min_col: i32,
    /// sample index per cell
    pub cells: Vec<usize>,
}

impl Raster {
    pub fn cell_of(&self, row: i32, col: i32) -> Option<(usize, usize)> {
        let r = usize::try_from(row - self.min_row).ok()?;
        let c = usize::try_from(col - self.min_col).ok()?;
        (r < self.rows && c < self.cols).then_some((r, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PgmScale {
    /// per-grid min-max
    #[default]
    MinMax,
    /// 0 maps to 0, risk >= 2 maps to 255
    Fixed,
}

/// Upper end of the fixed intensity scale.
pub const FIXED_SCALE_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Pgm,
}

impl RiskGrid {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn raster(&self) -> Result<Raster, OccupancyError> {
        let rows: BTreeSet<i32> = self.samples.iter().map(|s| s.row).collect();
        let cols: BTreeSet<i32> = self.samples.iter().map(|s| s.col).collect();
        let (Some(&min_row), Some(&max_row), Some(&min_col), Some(&max_col)) =
            (rows.first(), rows.last(), cols.first(), cols.last())
        else {
            return Err(OccupancyError::NotRasterizable { samples: 0, rows: 0, cols: 0 });
        };
        let nrows = (max_row - min_row + 1) as usize;
        let ncols = (max_col - min_col + 1) as usize;
        let not_rect = OccupancyError::NotRasterizable {
            samples: self.samples.len(),
            rows: nrows,
            cols: ncols,
        };
        if nrows * ncols != self.samples.len() {
            return Err(not_rect);
        }
        let mut cells = vec![usize::MAX; nrows * ncols];
        for (i, s) in self.samples.iter().enumerate() {
            let idx = (s.row - min_row) as usize * ncols + (s.col - min_col) as usize;
            if cells[idx] != usize::MAX {
                return Err(not_rect);
            }
            cells[idx] = i;
        }
        Ok(Raster {
            rows: nrows,
            cols: ncols,
            min_row,
            min_col,
            cells,
        })
    }

    /// Risk per sample mapped to [0, 1] under `scale`.
    pub fn normalized(&self, scale: PgmScale) -> Vec<f64> {
        match scale {
            PgmScale::MinMax => {
                let lo = self.risks.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = self.risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                self.risks
                    .iter()
                    .map(|r| if span > 0.0 { (r - lo) / span } else { 0.0 })
                    .collect()
            }
            PgmScale::Fixed => self
                .risks
                .iter()
                .map(|r| (r / FIXED_SCALE_MAX).clamp(0.0, 1.0))
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.samples.len() + 1));
        out.push_str("row,col,x,y,risk\n");
        for (s, r) in self.samples.iter().zip(&self.risks) {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6}",
                s.row, s.col, s.position.x, s.position.y, r
            )
            .expect("writing to a String");
        }
        out
    }

    /// Binary P5 image, one pixel per sample; the first raster line is the
    /// lowest row and columns ascend left to right.
    pub fn to_pgm(&self, scale: PgmScale) -> Result<Vec<u8>, OccupancyError> {
        let raster = self.raster()?;
        let norm = self.normalized(scale);
        let mut out = format!("P5\n{} {}\n255\n", raster.cols, raster.rows).into_bytes();
        out.extend(raster.cells.iter().map(|&i| to_byte(norm[i])));
        Ok(out)
    }

    /// Samples within `radius` of `center`, in grid order.
    pub fn window(&self, center: Point2, radius: f64) -> Vec<(SamplePoint, f64)> {
        self.samples
            .iter()
            .zip(&self.risks)
            .filter(|(s, _)| dist_point_point(s.position, center) <= radius)
            .map(|(s, r)| (*s, *r))
            .collect()
    }
}

/// Round-half-up quantization of a [0, 1] value to a byte.
pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn export_grid(grid: &RiskGrid, format: ExportFormat) -> Result<Vec<u8>, OccupancyError> {
    match format {
        ExportFormat::Csv => Ok(grid.to_csv().into_bytes()),
        ExportFormat::Pgm => grid.to_pgm(PgmScale::MinMax),
    }
}

/// Nearest-sample lookup over a fixed set of sample positions.
#[derive(Debug, Clone)]
pub struct SampleIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    positions: Vec<Point2>,
}

impl SampleIndex {
    pub fn new(samples: &[SamplePoint], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            buckets.entry(Self::key(s.position, cell)).or_default().push(i);
        }
        Self {
            cell,
            buckets,
            positions: samples.iter().map(|s| s.position).collect(),
        }
    }

    fn key(p: Point2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Index of the closest sample within `max_dist` (at most one cell size),
    /// ties to the lower index.
    pub fn nearest(&self, p: Point2, max_dist: f64) -> Option<usize> {
        let (kx, ky) = Self::key(p, self.cell);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                for &i in ids {
                    let d = dist_point_point(p, self.positions[i]);
                    if d <= max_dist && best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                        best = Some((d, i));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}
