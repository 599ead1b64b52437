//! Local path planning over preset maneuver node sets.
//!
//! Node sets are row-ordered along the road; within a row, `col` increases to
//! the left. Each frame the nodes whose grid risk is below the threshold form
//! the free set. A path advances exactly one row per step and may shift
//! columns only as the maneuver permits:
//!
//! | maneuver | allowed column change |
//! |----------|-----------------------|
//! | left     | 0, +1, +2             |
//! | straight | -1, 0, +1             |
//! | right    | 0, -1, -2             |
//!
//! Candidates are scored by `w_risk * risk + w_dis * |node - dest| / |icv - dest|`.
//! Equal scores resolve to the smaller column change, then the smaller column.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dist_point_point, Point2};
use crate::occupancy::{RiskGrid, SampleIndex};
use crate::scenario::Maneuver;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("node row {row} col {col} at ({x:.3}, {y:.3}) has no risk sample within reach")]
    NodeNotCovered { row: usize, col: i32, x: f64, y: f64 },
    #[error("ICV position coincides with the destination")]
    DegenerateRequest,
    #[error("no collision-free node within {radius} m of ICV at ({x:.3}, {y:.3})")]
    StartUnreachable { x: f64, y: f64, radius: f64 },
    #[error("invalid planner configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManeuverNode {
    pub col: i32,
    pub position: Point2,
}

/// Preset road points for one maneuver, stored with the map.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverNodeSet {
    pub maneuver: Maneuver,
    pub rows: Vec<Vec<ManeuverNode>>,
}

impl ManeuverNodeSet {
    pub fn validate(&self) -> Result<(), String> {
        if self.rows.is_empty() {
            return Err("needs at least one row".into());
        }
        if self.rows.iter().all(|r| r.is_empty()) {
            return Err("has no nodes".into());
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.windows(2).any(|w| w[0].col >= w[1].col) {
                return Err(format!("rows[{r}]: cols must be strictly increasing"));
            }
            if let Some(n) = row.iter().find(|n| !n.position.is_finite()) {
                return Err(format!("rows[{r}]: col {} has a non-finite position", n.col));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeNode {
    pub col: i32,
    pub position: Point2,
    pub risk: f64,
}

/// Per-frame subset of a maneuver node set whose risk is below the threshold.
/// Rows keep their indices; a fully blocked row stays as an empty row.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeNodeSet {
    pub maneuver: Maneuver,
    pub rows: Vec<Vec<FreeNode>>,
}

impl FreeNodeSet {
    pub fn node_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn last_row(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    fn find(&self, row: usize, col: i32) -> Option<&FreeNode> {
        self.rows.get(row)?.iter().find(|n| n.col == col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// greedy choice per batch of successors
    #[default]
    Local,
    /// minimum total cost over all rule-respecting paths
    Global,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Strategy::Local),
            "global" => Ok(Strategy::Global),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub risk_threshold: f64,
    pub w_risk: f64,
    pub w_dis: f64,
    pub strategy: Strategy,
    /// Gaussian kernel width in nodes, odd
    pub kernel_size: usize,
    /// Gaussian standard deviation in node-index units
    pub sigma: f64,
    /// spacing of the resampled trajectory, meters
    pub resample_step: f64,
    /// the start node must lie within this distance of the ICV, meters
    pub start_radius: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            risk_threshold: 0.4,
            w_risk: 0.7,
            w_dis: 0.3,
            strategy: Strategy::Local,
            kernel_size: 5,
            sigma: 1.0,
            resample_step: 0.5,
            start_radius: 3.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::BadConfig(m));
        if !(self.risk_threshold.is_finite() && self.risk_threshold > 0.0) {
            return bad(format!("risk_threshold must be > 0, got {}", self.risk_threshold));
        }
        if !(self.w_risk >= 0.0 && self.w_dis >= 0.0) || self.w_risk + self.w_dis == 0.0 {
            return bad(format!(
                "weights must be >= 0 and not both 0 (w_risk {}, w_dis {})",
                self.w_risk, self.w_dis
            ));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return bad(format!("kernel_size must be odd, got {}", self.kernel_size));
        }
        if !(self.sigma > 0.0 && self.resample_step > 0.0 && self.start_radius > 0.0) {
            return bad("sigma, resample_step and start_radius must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    Reached,
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathNode {
    pub row: usize,
    pub col: i32,
    pub position: Point2,
    pub risk: f64,
}

impl Serialize for PathNode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("PathNode", 5)?;
        st.serialize_field("col", &self.col)?;
        st.serialize_field("risk", &self.risk)?;
        st.serialize_field("row", &self.row)?;
        st.serialize_field("x", &self.position.x)?;
        st.serialize_field("y", &self.position.y)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub raw: Vec<PathNode>,
    pub smoothed: Vec<Point2>,
    pub status: PathStatus,
    /// sum of scores of every node after the start node
    pub total_cost: f64,
}

#[derive(Serialize)]
struct PathJson<'a> {
    raw: &'a [PathNode],
    smoothed: Vec<[f64; 2]>,
    status: PathStatus,
    total_cost: f64,
}

impl PlannedPath {
    fn as_json(&self) -> PathJson<'_> {
        PathJson {
            status: self.status,
            raw: &self.raw,
            smoothed: self.smoothed.iter().map(|p| [p.x, p.y]).collect(),
            total_cost: self.total_cost,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.as_json()).expect("path serializes")
    }
}

impl Serialize for PlannedPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.as_json().serialize(serializer)
    }
}

/// Keeps the nodes whose grid risk is strictly below `threshold`. Each node
/// takes the risk of the sample at its position, or of the nearest sample
/// within half a grid cell.
pub fn collision_free(
    nodes: &ManeuverNodeSet,
    grid: &RiskGrid,
    threshold: f64,
) -> Result<FreeNodeSet, PlanError> {
    let index = SampleIndex::new(&grid.samples, grid.resolution);
    collision_free_indexed(nodes, grid, &index, threshold)
}

/// [`collision_free`] with a prebuilt index over `grid.samples`, for callers
/// that plan repeatedly over the same sample layout.
pub fn collision_free_indexed(
    nodes: &ManeuverNodeSet,
    grid: &RiskGrid,
    index: &SampleIndex,
    threshold: f64,
) -> Result<FreeNodeSet, PlanError> {
    let reach = grid.resolution / 2.0;
    let mut rows = Vec::with_capacity(nodes.rows.len());
    for (r, row) in nodes.rows.iter().enumerate() {
        let mut kept = Vec::with_capacity(row.len());
        for n in row {
            let i = index.nearest(n.position, reach).ok_or(PlanError::NodeNotCovered {
                row: r,
                col: n.col,
                x: n.position.x,
                y: n.position.y,
            })?;
            let risk = grid.risks[i];
            if risk < threshold {
                kept.push(FreeNode {
                    col: n.col,
                    position: n.position,
                    risk,
                });
            }
        }
        rows.push(kept);
    }
    Ok(FreeNodeSet {
        maneuver: nodes.maneuver,
        rows,
    })
}

/// Column changes permitted for one step of `maneuver`, in tie-break order.
pub fn allowed_deltas(maneuver: Maneuver) -> [i32; 3] {
    match maneuver {
        Maneuver::Left => [0, 1, 2],
        Maneuver::Straight => [0, -1, 1],
        Maneuver::Right => [0, -1, -2],
    }
}

/// Free nodes in the next row reachable from `(row, col)`, ordered by column.
pub fn successors(row: usize, col: i32, maneuver: Maneuver, free: &FreeNodeSet) -> Vec<&FreeNode> {
    let deltas = allowed_deltas(maneuver);
    free.rows
        .get(row + 1)
        .map(|next| {
            next.iter()
                .filter(|n| deltas.contains(&(n.col - col)))
                .collect()
        })
        .unwrap_or_default()
}

pub fn score(sample: Point2, risk: f64, icv: Point2, dest: Point2, cfg: &PlannerConfig) -> Result<f64, PlanError> {
    let base = dist_point_point(icv, dest);
    if base == 0.0 {
        return Err(PlanError::DegenerateRequest);
    }
    Ok(cfg.w_risk * risk + cfg.w_dis * dist_point_point(sample, dest) / base)
}

/// Tie-break between two candidate moves from column `from`.
fn tie_order(from: i32, a: i32, b: i32) -> Ordering {
    (a - from)
        .abs()
        .cmp(&(b - from).abs())
        .then(a.cmp(&b))
}

/// Free node nearest the ICV within `start_radius`; ties go to the lower row,
/// then the lower column. Returns `(row, index within row)`.
pub fn start_node(free: &FreeNodeSet, icv: Point2, cfg: &PlannerConfig) -> Result<(usize, usize), PlanError> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (r, row) in free.rows.iter().enumerate() {
        for (i, n) in row.iter().enumerate() {
            let d = dist_point_point(n.position, icv);
            if d <= cfg.start_radius && best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, r, i));
            }
        }
    }
    best.map(|(_, r, i)| (r, i)).ok_or(PlanError::StartUnreachable {
        x: icv.x,
        y: icv.y,
        radius: cfg.start_radius,
    })
}

fn path_node(row: usize, n: &FreeNode) -> PathNode {
    PathNode {
        row,
        col: n.col,
        position: n.position,
        risk: n.risk,
    }
}

/// Sum of scores of every node after the first.
pub fn path_cost(raw: &[PathNode], icv: Point2, dest: Point2, cfg: &PlannerConfig) -> Result<f64, PlanError> {
    // explicit fold: an empty f64 sum is -0.0
    raw.iter()
        .skip(1)
        .try_fold(0.0, |acc, n| Ok(acc + score(n.position, n.risk, icv, dest, cfg)?))
}

fn finish(
    raw: Vec<PathNode>,
    free: &FreeNodeSet,
    icv: Point2,
    dest: Point2,
    cfg: &PlannerConfig,
) -> Result<PlannedPath, PlanError> {
    let status = if raw.last().map(|n| n.row) == Some(free.last_row()) {
        PathStatus::Reached
    } else {
        PathStatus::Exhausted
    };
    let total_cost = path_cost(&raw, icv, dest, cfg)?;
    let points: Vec<Point2> = raw.iter().map(|n| n.position).collect();
    Ok(PlannedPath {
        smoothed: smooth(&points, cfg),
        raw,
        status,
        total_cost,
    })
}

fn check_request(icv: Point2, dest: Point2, cfg: &PlannerConfig) -> Result<(), PlanError> {
    cfg.validate()?;
    if dist_point_point(icv, dest) == 0.0 {
        return Err(PlanError::DegenerateRequest);
    }
    Ok(())
}

/// Greedy search: from the start node, repeatedly take the lowest-scoring
/// successor until the last row is reached or no successor is free.
pub fn plan_local(
    free: &FreeNodeSet,
    icv: Point2,
    dest: Point2,
    maneuver: Maneuver,
    cfg: &PlannerConfig,
) -> Result<PlannedPath, PlanError> {
    check_request(icv, dest, cfg)?;
    let (mut row, i) = start_node(free, icv, cfg)?;
    let mut current = free.rows[row][i];
    let mut raw = vec![path_node(row, &current)];
    loop {
        let mut best: Option<(f64, &FreeNode)> = None;
        for cand in successors(row, current.col, maneuver, free) {
            let s = score(cand.position, cand.risk, icv, dest, cfg)?;
            let better = match best {
                None => true,
                Some((bs, bn)) => match s.partial_cmp(&bs).unwrap_or(Ordering::Equal) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => tie_order(current.col, cand.col, bn.col) == Ordering::Less,
                },
            };
            if better {
                best = Some((s, cand));
            }
        }
        let Some((_, next)) = best else { break };
        row += 1;
        current = *next;
        raw.push(path_node(row, &current));
    }
    finish(raw, free, icv, dest, cfg)
}

#[derive(Debug, Clone, Copy)]
struct Continuation {
    /// deepest row reachable from this node
    depth: usize,
    /// cost of the nodes after this one on the best continuation
    cost: f64,
    next: Option<usize>,
}

/// Exact search over the row-layered graph. Prefers paths that reach the
/// deepest row, then the lowest total score, with the same tie-break as the
/// greedy search. Runs as a backward dynamic program, one pass per row.
pub fn plan_global(
    free: &FreeNodeSet,
    icv: Point2,
    dest: Point2,
    maneuver: Maneuver,
    cfg: &PlannerConfig,
) -> Result<PlannedPath, PlanError> {
    check_request(icv, dest, cfg)?;
    let (start_row, start_idx) = start_node(free, icv, cfg)?;
    let deltas = allowed_deltas(maneuver);

    let mut table: Vec<Vec<Continuation>> = free
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            vec![
                Continuation {
                    depth: r,
                    cost: 0.0,
                    next: None,
                };
                row.len()
            ]
        })
        .collect();

    for r in (start_row..free.last_row()).rev() {
        let (head, tail) = table.split_at_mut(r + 1);
        let next_best = &tail[0];
        let next_nodes = &free.rows[r + 1];
        for (i, node) in free.rows[r].iter().enumerate() {
            let mut best: Option<(usize, f64, usize)> = None;
            for (j, cand) in next_nodes.iter().enumerate() {
                if !deltas.contains(&(cand.col - node.col)) {
                    continue;
                }
                let c = score(cand.position, cand.risk, icv, dest, cfg)? + next_best[j].cost;
                let d = next_best[j].depth;
                let better = match best {
                    None => true,
                    Some((bd, bc, bj)) => d
                        .cmp(&bd)
                        .reverse()
                        .then(c.partial_cmp(&bc).unwrap_or(Ordering::Equal))
                        .then_with(|| tie_order(node.col, cand.col, next_nodes[bj].col))
                        == Ordering::Less,
                };
                if better {
                    best = Some((d, c, j));
                }
            }
            if let Some((depth, cost, j)) = best {
                head[r][i] = Continuation {
                    depth,
                    cost,
                    next: Some(j),
                };
            }
        }
    }

    let mut raw = Vec::new();
    let (mut r, mut i) = (start_row, start_idx);
    loop {
        raw.push(path_node(r, &free.rows[r][i]));
        match table[r][i].next {
            Some(j) => {
                r += 1;
                i = j;
            }
            None => break,
        }
    }
    finish(raw, free, icv, dest, cfg)
}

/// Runs the configured strategy.
pub fn plan(
    free: &FreeNodeSet,
    icv: Point2,
    dest: Point2,
    maneuver: Maneuver,
    cfg: &PlannerConfig,
) -> Result<PlannedPath, PlanError> {
    match cfg.strategy {
        Strategy::Local => plan_local(free, icv, dest, maneuver, cfg),
        Strategy::Global => plan_global(free, icv, dest, maneuver, cfg),
    }
}

/// Checks a raw path against the row-by-row movement rule.
pub fn follows_rule(raw: &[PathNode], maneuver: Maneuver) -> bool {
    let deltas = allowed_deltas(maneuver);
    raw.windows(2)
        .all(|w| w[1].row == w[0].row + 1 && deltas.contains(&(w[1].col - w[0].col)))
}

/// Looks up a path node in the free set; used to verify that a raw path only
/// visits free nodes.
pub fn is_free(free: &FreeNodeSet, n: &PathNode) -> bool {
    free.find(n.row, n.col).is_some()
}

// ---------------------------------------------------------------------------
// smoothing
// ---------------------------------------------------------------------------

/// Gaussian-weighted average of each interior node over its index
/// neighborhood. The kernel is truncated at the ends of the path and
/// renormalized; the first and last nodes stay fixed.
pub fn gaussian_smooth_nodes(points: &[Point2], kernel_size: usize, sigma: f64) -> Vec<Point2> {
    let n = points.len();
    if n < 3 {
        return points.to_vec();
    }
    let half = (kernel_size / 2) as isize;
    let weights: Vec<f64> = (-half..=half)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let mut out = Vec::with_capacity(n);
    out.push(points[0]);
    for i in 1..n - 1 {
        let mut acc = Point2::default();
        let mut total = 0.0;
        for (w, k) in weights.iter().zip(-half..=half) {
            let j = i as isize + k;
            if j < 0 || j >= n as isize {
                continue;
            }
            acc = acc + points[j as usize].scale(*w);
            total += w;
        }
        out.push(acc.scale(1.0 / total));
    }
    out.push(points[n - 1]);
    out
}

/// Sum of squared discrete second differences.
pub fn second_difference_energy(points: &[Point2]) -> f64 {
    points
        .windows(3)
        .map(|w| {
            let dd = w[2] - w[1].scale(2.0) + w[0];
            dd.dot(dd)
        })
        .sum()
}

/// Second derivatives of a natural cubic spline through `(t, v)`.
fn natural_spline_moments(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = t[i] - t[i - 1];
        let h1 = t[i + 1] - t[i];
        let a = h0;
        let b = 2.0 * (h0 + h1);
        let c = h1;
        let d = 6.0 * ((v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0);
        let denom = b - a * c_prime[i - 1];
        c_prime[i] = c / denom;
        d_prime[i] = (d - a * d_prime[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

fn spline_eval(t: &[f64], v: &[f64], m: &[f64], seg: usize, x: f64) -> f64 {
    let h = t[seg + 1] - t[seg];
    let a = (t[seg + 1] - x) / h;
    let b = (x - t[seg]) / h;
    a * v[seg] + b * v[seg + 1] + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0
}

/// Resamples a polyline at `step` meters of chord length through a natural
/// cubic spline. The last point is always included exactly.
pub fn resample_spline(points: &[Point2], step: f64) -> Vec<Point2> {
    let mut pts: Vec<Point2> = Vec::with_capacity(points.len());
    for p in points {
        if pts.last() != Some(p) {
            pts.push(*p);
        }
    }
    if pts.len() < 2 {
        return pts;
    }
    let mut t = Vec::with_capacity(pts.len());
    t.push(0.0);
    for w in pts.windows(2) {
        t.push(t.last().unwrap() + dist_point_point(w[0], w[1]));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let mx = natural_spline_moments(&t, &xs);
    let my = natural_spline_moments(&t, &ys);
    let total = *t.last().unwrap();
    let mut out = Vec::new();
    let mut seg = 0;
    let mut k = 0usize;
    loop {
        let s = k as f64 * step;
        if s >= total {
            break;
        }
        while seg + 2 < t.len() && s > t[seg + 1] {
            seg += 1;
        }
        out.push(Point2::new(
            spline_eval(&t, &xs, &mx, seg, s),
            spline_eval(&t, &ys, &my, seg, s),
        ));
        k += 1;
    }
    out.push(*pts.last().unwrap());
    out
}

/// Gaussian smoothing of the raw nodes followed by spline resampling.
pub fn smooth(points: &[Point2], cfg: &PlannerConfig) -> Vec<Point2> {
    let nodes = gaussian_smooth_nodes(points, cfg.kernel_size, cfg.sigma);
    resample_spline(&nodes, cfg.resample_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrenetCoord;
    use crate::occupancy::SamplePoint;

    fn free_grid(rows: usize, cols: &[i32], risk: impl Fn(usize, i32) -> f64) -> FreeNodeSet {
        FreeNodeSet {
            maneuver: Maneuver::Straight,
            rows: (0..rows)
                .map(|r| {
                    cols.iter()
                        .map(|&c| FreeNode {
                            col: c,
                            position: Point2::new(r as f64 * 1.9, c as f64 * 1.9),
                            risk: risk(r, c),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    fn cols(path: &PlannedPath) -> Vec<i32> {
        path.raw.iter().map(|n| n.col).collect()
    }

    #[test]
    fn score_examples() {
        let c = PlannerConfig::default();
        let dest = Point2::new(60.0, 0.0);
        let icv = Point2::new(0.0, 0.0);
        assert_eq!(score(dest, 0.0, icv, dest, &c).unwrap(), 0.0);
        assert!((score(icv, 0.0, icv, dest, &c).unwrap() - 0.3).abs() < 1e-15);
        let s = score(Point2::new(30.0, 0.0), 0.5, icv, dest, &c).unwrap();
        assert!((s - 0.5).abs() < 1e-12, "{s}");
        assert_eq!(score(icv, 0.0, icv, icv, &c), Err(PlanError::DegenerateRequest));
    }

    #[test]
    fn successor_rules() {
        let free = free_grid(3, &[-2, -1, 0, 1, 2], |_, _| 0.0);
        let cols_of = |m| successors(0, 0, m, &free).iter().map(|n| n.col).collect::<Vec<_>>();
        assert_eq!(cols_of(Maneuver::Left), vec![0, 1, 2]);
        assert_eq!(cols_of(Maneuver::Straight), vec![-1, 0, 1]);
        assert_eq!(cols_of(Maneuver::Right), vec![-2, -1, 0]);
        let mut blocked = free.clone();
        blocked.rows[1].clear();
        assert!(successors(0, 0, Maneuver::Left, &blocked).is_empty());
        assert!(successors(2, 0, Maneuver::Left, &free).is_empty());
    }

    fn grid_for(set: &ManeuverNodeSet, risk: impl Fn(usize, i32) -> f64) -> RiskGrid {
        let mut samples = Vec::new();
        let mut risks = Vec::new();
        for (r, row) in set.rows.iter().enumerate() {
            for n in row {
                samples.push(SamplePoint {
                    row: r as i32,
                    col: n.col,
                    position: n.position,
                    frenet: FrenetCoord { s: 0.0, d: 0.0 },
                });
                risks.push(risk(r, n.col));
            }
        }
        RiskGrid {
            timestamp: 0.0,
            resolution: 1.9,
            samples,
            risks,
        }
    }

    fn node_set(rows: usize, cols: &[i32]) -> ManeuverNodeSet {
        ManeuverNodeSet {
            maneuver: Maneuver::Left,
            rows: (0..rows)
                .map(|r| {
                    cols.iter()
                        .map(|&c| ManeuverNode {
                            col: c,
                            position: Point2::new(r as f64 * 1.9, c as f64 * 1.9),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn collision_free_filters() {
        let set = node_set(3, &[0, 1, 2]);
        let zero = grid_for(&set, |_, _| 0.0);
        let all = collision_free(&set, &zero, 0.4).unwrap();
        assert_eq!(all.node_count(), 9);
        let one = grid_for(&set, |r, c| if (r, c) == (1, 1) { 0.9 } else { 0.0 });
        let free = collision_free(&set, &one, 0.4).unwrap();
        assert_eq!(free.node_count(), 8);
        assert!(free.find(1, 1).is_none());
        let none = collision_free(&set, &zero, 0.0).unwrap();
        assert_eq!(none.rows.len(), 3);
        assert!(none.rows.iter().all(Vec::is_empty));
    }

    #[test]
    fn collision_free_uses_nearby_sample() {
        let set = node_set(2, &[0]);
        let mut grid = grid_for(&set, |r, _| r as f64);
        grid.samples[1].position.x += 0.5;
        let free = collision_free(&set, &grid, 0.4).unwrap();
        assert_eq!(free.node_count(), 1);
        grid.samples[1].position.x += 1.0;
        let err = collision_free(&set, &grid, 0.4).unwrap_err();
        assert!(matches!(err, PlanError::NodeNotCovered { row: 1, col: 0, .. }), "{err}");
    }

    #[test]
    fn corridor_is_walked_to_the_end() {
        let free = free_grid(6, &[0], |_, _| 0.0);
        let icv = Point2::new(0.0, 0.0);
        let dest = Point2::new(9.5, 0.0);
        let cfg = PlannerConfig::default();
        let local = plan_local(&free, icv, dest, Maneuver::Straight, &cfg).unwrap();
        let global = plan_global(&free, icv, dest, Maneuver::Straight, &cfg).unwrap();
        assert_eq!(local.status, PathStatus::Reached);
        assert_eq!(local.raw.len(), 6);
        assert_eq!(local, global);
    }

    #[test]
    fn equal_scores_keep_the_column() {
        let free = free_grid(3, &[-1, 0, 1], |_, _| 0.0);
        let cfg = PlannerConfig {
            w_dis: 0.0,
            w_risk: 1.0,
            ..Default::default()
        };
        let icv = Point2::new(0.0, 0.0);
        let dest = Point2::new(3.8, 0.0);
        let g = plan_global(&free, icv, dest, Maneuver::Straight, &cfg).unwrap();
        assert_eq!(cols(&g), vec![0, 0, 0]);
        let l = plan_local(&free, icv, dest, Maneuver::Straight, &cfg).unwrap();
        assert_eq!(cols(&l), vec![0, 0, 0]);
    }

    #[test]
    fn blocked_column_is_bypassed_and_rejoined() {
        // high-risk node at row 3 in the ICV's column is removed from the free set
        let set = node_set(8, &[-1, 0, 1]);
        let set = ManeuverNodeSet {
            maneuver: Maneuver::Straight,
            ..set
        };
        let grid = grid_for(&set, |r, c| match (r, c) {
            (3, 0) => 0.9,
            _ => 0.0,
        });
        let free = collision_free(&set, &grid, 0.4).unwrap();
        let icv = Point2::new(0.0, 0.0);
        let dest = Point2::new(7.0 * 1.9, 0.0);
        let cfg = PlannerConfig::default();
        let local = plan_local(&free, icv, dest, Maneuver::Straight, &cfg).unwrap();
        let global = plan_global(&free, icv, dest, Maneuver::Straight, &cfg).unwrap();
        assert_eq!(local.status, PathStatus::Reached);
        assert_ne!(local.raw[3].col, 0);
        assert_eq!(local.raw.last().unwrap().col, 0);
        assert!(global.total_cost <= local.total_cost);
        assert_ne!(global.raw[3].col, 0);
    }

    #[test]
    fn exhausted_returns_partial_path() {
        let mut free = free_grid(5, &[0, 1], |_, _| 0.0);
        free.rows[3].clear();
        let icv = Point2::new(0.0, 0.0);
        let dest = Point2::new(7.6, 0.0);
        let cfg = PlannerConfig::default();
        for p in [
            plan_local(&free, icv, dest, Maneuver::Left, &cfg).unwrap(),
            plan_global(&free, icv, dest, Maneuver::Left, &cfg).unwrap(),
        ] {
            assert_eq!(p.status, PathStatus::Exhausted);
            assert_eq!(p.raw.len(), 3);
        }
    }

    #[test]
    fn start_errors() {
        let free = free_grid(3, &[0], |_, _| 0.0);
        let cfg = PlannerConfig::default();
        let far = Point2::new(0.0, 50.0);
        assert!(matches!(
            plan_local(&free, far, Point2::new(3.8, 0.0), Maneuver::Straight, &cfg),
            Err(PlanError::StartUnreachable { .. })
        ));
        let icv = Point2::new(0.0, 0.0);
        assert_eq!(
            plan_global(&free, icv, icv, Maneuver::Straight, &cfg),
            Err(PlanError::DegenerateRequest)
        );
    }

    #[test]
    fn config_validation() {
        assert!(PlannerConfig::default().validate().is_ok());
        for bad in [
            PlannerConfig { kernel_size: 4, ..Default::default() },
            PlannerConfig { risk_threshold: 0.0, ..Default::default() },
            PlannerConfig { w_risk: 0.0, w_dis: 0.0, ..Default::default() },
            PlannerConfig { w_risk: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn smoothing_keeps_collinear_points_collinear() {
        let pts: Vec<Point2> = (0..8).map(|i| Point2::new(i as f64, 2.0 * i as f64 + 1.0)).collect();
        let out = smooth(&pts, &PlannerConfig::default());
        for p in &out {
            assert!((p.y - (2.0 * p.x + 1.0)).abs() < 1e-9, "{p:?}");
        }
        assert_eq!(out[0], pts[0]);
        assert_eq!(*out.last().unwrap(), *pts.last().unwrap());
    }

    #[test]
    fn two_node_path_resamples_straight() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)];
        let out = smooth(&pts, &PlannerConfig::default());
        assert_eq!(out.len(), 5);
        for (k, p) in out.iter().enumerate() {
            assert!((p.x - 0.5 * k as f64).abs() < 1e-12 && p.y == 0.0);
        }
    }

    #[test]
    fn zigzag_energy_drops() {
        let pts: Vec<Point2> = (0..10)
            .map(|i| Point2::new(i as f64 * 1.9, if i % 2 == 0 { 0.0 } else { 1.9 }))
            .collect();
        let smoothed = gaussian_smooth_nodes(&pts, 5, 1.0);
        assert!(second_difference_energy(&smoothed) < second_difference_energy(&pts));
    }

    #[test]
    fn path_json_shape() {
        let free = free_grid(2, &[0], |_, _| 0.0);
        let p = plan_local(&free, Point2::new(0.0, 0.0), Point2::new(1.9, 0.0), Maneuver::Straight, &PlannerConfig::default()).unwrap();
        let v = p.to_json_value();
        assert_eq!(v["status"], "reached");
        assert_eq!(v["raw"][1]["row"], 1);
        assert_eq!(v["raw"][1]["x"], 1.9);
        assert!(v["smoothed"][0].is_array());
        assert_eq!(v["total_cost"], 0.0);
    }
}
