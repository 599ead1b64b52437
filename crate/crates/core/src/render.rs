//! Color rendering of risk grids (binary PPM).
//!
//! Normalized risk maps through five evenly spaced stops with linear
//! interpolation per channel and round-half-up quantization:
//!
//! | t    | color     | RGB           |
//! |------|-----------|---------------|
//! | 0.00 | dark blue | (0, 0, 139)   |
//! | 0.25 | blue      | (0, 0, 255)   |
//! | 0.50 | yellow    | (255, 255, 0) |
//! | 0.75 | orange    | (255, 165, 0) |
//! | 1.00 | dark red  | (139, 0, 0)   |
//!
//! Each sample becomes a `CELL_PX` x `CELL_PX` block. Path nodes are drawn as
//! 3x3 pure-yellow squares centered in their cell.

use crate::occupancy::{OccupancyError, PgmScale, RiskGrid};
use crate::planner::PathNode;

pub const COLOR_STOPS: [[u8; 3]; 5] = [
    [0, 0, 139],
    [0, 0, 255],
    [255, 255, 0],
    [255, 165, 0],
    [139, 0, 0],
];

pub const PATH_COLOR: [u8; 3] = [255, 255, 0];

/// Pixels per sample edge.
pub const CELL_PX: usize = 5;

pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (COLOR_STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(COLOR_STOPS.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (COLOR_STOPS[i], COLOR_STOPS[i + 1]);
    let mut out = [0u8; 3];
    for c in 0..3 {
        let v = a[c] as f64 + (b[c] as f64 - a[c] as f64) * f;
        out[c] = (v + 0.5).floor() as u8;
    }
    out
}

/// RGB canvas in raster orientation (first line = lowest row).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for px in &self.pixels {
            out.extend_from_slice(px);
        }
        out
    }

    fn put(&mut self, x: isize, y: isize, color: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = color;
        }
    }
}

pub fn render_grid(grid: &RiskGrid, scale: PgmScale) -> Result<Image, OccupancyError> {
    let raster = grid.raster()?;
    let norm = grid.normalized(scale);
    let width = raster.cols * CELL_PX;
    let height = raster.rows * CELL_PX;
    let mut img = Image {
        width,
        height,
        pixels: vec![[0, 0, 0]; width * height],
    };
    for r in 0..raster.rows {
        for c in 0..raster.cols {
            let color = colormap(norm[raster.cells[r * raster.cols + c]]);
            for dy in 0..CELL_PX {
                let y = r * CELL_PX + dy;
                img.pixels[y * width + c * CELL_PX..y * width + (c + 1) * CELL_PX].fill(color);
            }
        }
    }
    Ok(img)
}

/// Draws path nodes onto an image produced by [`render_grid`]. The path's
/// `(row, col)` indices are taken from the grid sample nearest each node.
pub fn overlay_path(img: &mut Image, grid: &RiskGrid, nodes: &[PathNode]) -> Result<(), OccupancyError> {
    let raster = grid.raster()?;
    let index = crate::occupancy::SampleIndex::new(&grid.samples, grid.resolution);
    for n in nodes {
        let Some(i) = index.nearest(n.position, grid.resolution) else {
            continue;
        };
        let s = &grid.samples[i];
        let Some((r, c)) = raster.cell_of(s.row, s.col) else {
            continue;
        };
        let cx = (c * CELL_PX + CELL_PX / 2) as isize;
        let cy = (r * CELL_PX + CELL_PX / 2) as isize;
        for dy in -1..=1 {
            for dx in -1..=1 {
                img.put(cx + dx, cy + dy, PATH_COLOR);
            }
        }
    }
    Ok(())
}
