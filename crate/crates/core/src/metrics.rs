//! Layout evaluation: line direction and depth errors, corner errors and
//! rasterized intersection-over-union.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::point_segment_distance;
use crate::layout::{CornerSet, Layout};
use crate::plucker::PluckerLine;

/// Default IoU raster cell, meters.
pub const IOU_CELL: f64 = 0.01;
/// Cells along the longer side of the raster beyond which the grid coarsens.
pub const MAX_IOU_CELLS: f64 = 20_000.0;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MetricsError {
    #[error("corner set is empty")]
    EmptyCornerSet,
    #[error("degenerate polygon")]
    DegeneratePolygon,
}

/// Angle between two line directions in degrees, ignoring orientation.
pub fn direction_error(l: &PluckerLine, gt: &PluckerLine) -> f64 {
    let c = l.l.normalize().dot(&gt.l.normalize()).abs().clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Difference of the distances of two lines to the origin.
pub fn depth_error(l: &PluckerLine, gt: &PluckerLine) -> f64 {
    (l.depth() - gt.depth()).abs()
}

/// Mean distance from each ground-truth corner to its nearest predicted
/// corner. With `normalized`, divided by the ground-truth bounding-box
/// diagonal and reported in percent.
pub fn corner_error(pred: &CornerSet, gt: &CornerSet, normalized: bool) -> Result<f64, MetricsError> {
    if pred.is_empty() || gt.is_empty() {
        return Err(MetricsError::EmptyCornerSet);
    }
    let total: f64 = gt
        .iter()
        .map(|g| pred.iter().map(|p| (p - g).norm()).fold(f64::INFINITY, f64::min))
        .sum();
    let ce = total / gt.len() as f64;
    if !normalized {
        return Ok(ce);
    }
    let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
    for g in gt.iter() {
        lo = lo.inf(g);
        hi = hi.sup(g);
    }
    let diag = (hi - lo).norm();
    if diag <= 0.0 {
        return Err(MetricsError::DegeneratePolygon);
    }
    Ok(100.0 * ce / diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouMode {
    #[serde(rename = "2d")]
    Plan,
    #[serde(rename = "3d")]
    Volume,
}

/// Cell-index ranges covered by a polygon on one scanline at height `y`.
fn scanline(poly: &[Vector2<f64>], y: f64, x0: f64, cell: f64) -> Vec<(i64, i64)> {
    let n = poly.len();
    let mut xs = Vec::new();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > y) != (b.y > y) {
            xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.chunks_exact(2)
        .filter_map(|w| {
            // cells whose centers x0 + (k + 0.5) cell fall inside [w0, w1]
            let lo = ((w[0] - x0) / cell - 0.5).ceil() as i64;
            let hi = ((w[1] - x0) / cell - 0.5).floor() as i64;
            (hi >= lo).then_some((lo, hi))
        })
        .collect()
}

fn count(r: &[(i64, i64)]) -> i64 {
    r.iter().map(|(a, b)| b - a + 1).sum()
}

fn overlap(a: &[(i64, i64)], b: &[(i64, i64)]) -> i64 {
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi >= lo {
            total += hi - lo + 1;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Floor-plan IoU in percent by rasterization on square cells of side `cell`.
pub fn plan_iou(pred: &[Vector2<f64>], gt: &[Vector2<f64>], cell: f64) -> Result<f64, MetricsError> {
    if pred.len() < 3 || gt.len() < 3 || !(cell > 0.0) {
        return Err(MetricsError::DegeneratePolygon);
    }
    let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
    for p in pred.iter().chain(gt) {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(MetricsError::DegeneratePolygon);
        }
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    // wildly wrong predictions would otherwise rasterize billions of cells
    let cell = cell.max((hi - lo).max() / MAX_IOU_CELLS);
    let rows = ((hi.y - lo.y) / cell).ceil() as i64;
    let (mut inter, mut union) = (0i64, 0i64);
    for r in 0..rows {
        let y = lo.y + (r as f64 + 0.5) * cell;
        let a = scanline(pred, y, lo.x, cell);
        let b = scanline(gt, y, lo.x, cell);
        let i = overlap(&a, &b);
        inter += i;
        union += count(&a) + count(&b) - i;
    }
    if union == 0 {
        return Err(MetricsError::DegeneratePolygon);
    }
    Ok(100.0 * inter as f64 / union as f64)
}

/// IoU of two layouts in percent on the default 1 cm grid.
pub fn iou(pred: &Layout, gt: &Layout, mode: IouMode) -> Result<f64, MetricsError> {
    iou_with_cell(pred, gt, mode, IOU_CELL)
}

pub fn iou_with_cell(pred: &Layout, gt: &Layout, mode: IouMode, cell: f64) -> Result<f64, MetricsError> {
    let plan = plan_iou(&pred.corners, &gt.corners, cell)?;
    match mode {
        IouMode::Plan => Ok(plan),
        IouMode::Volume => {
            let inter = (pred.h_c.min(gt.h_c) - pred.h_f.max(gt.h_f)).max(0.0);
            let union = pred.h_c.max(gt.h_c) - pred.h_f.min(gt.h_f);
            if union <= 0.0 {
                return Err(MetricsError::DegeneratePolygon);
            }
            Ok(plan * inter / union)
        }
    }
}

/// Full comparison of a recovered layout with the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ce_m: f64,
    pub cen_pct: f64,
    pub iou2d_pct: f64,
    pub iou3d_pct: f64,
    /// Ceiling then floor line error for every ground-truth wall.
    pub dir_err_deg: Vec<f64>,
    pub depth_err_m: Vec<f64>,
    pub scale_err_pct: f64,
    pub pred_walls: usize,
    pub gt_walls: usize,
    pub count_mismatch: bool,
    pub warnings: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl EvalReport {
    pub fn mean_dir_err_deg(&self) -> f64 {
        mean(&self.dir_err_deg)
    }

    pub fn mean_depth_err_m(&self) -> f64 {
        mean(&self.depth_err_m)
    }

    pub const CSV_HEADER: &'static str =
        "ce_m,cen_pct,iou2d_pct,iou3d_pct,dir_err_deg,depth_err_m,scale_err_pct,pred_walls,gt_walls,count_mismatch";

    /// One benchmark-table row matching [`EvalReport::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            self.ce_m,
            self.cen_pct,
            self.iou2d_pct,
            self.iou3d_pct,
            self.mean_dir_err_deg(),
            self.mean_depth_err_m(),
            self.scale_err_pct,
            self.pred_walls,
            self.gt_walls,
            self.count_mismatch
        )
    }
}

/// Each ground-truth wall is matched to the predicted wall segment closest
/// to its midpoint.
fn matched_wall(pred: &Layout, a: Vector2<f64>, b: Vector2<f64>) -> usize {
    let mid = (a + b) * 0.5;
    let n = pred.corners.len();
    (0..n)
        .min_by(|&i, &j| {
            let di = point_segment_distance(mid, pred.corners[i], pred.corners[(i + 1) % n]);
            let dj = point_segment_distance(mid, pred.corners[j], pred.corners[(j + 1) % n]);
            di.total_cmp(&dj)
        })
        .unwrap_or(0)
}

pub fn evaluate(pred: &Layout, gt: &Layout) -> Result<EvalReport, MetricsError> {
    let pc = pred.corner_set();
    let gc = gt.corner_set();
    let ce_m = corner_error(&pc, &gc, false)?;
    let cen_pct = corner_error(&pc, &gc, true)?;
    let iou2d_pct = iou(pred, gt, IouMode::Plan)?;
    let iou3d_pct = iou(pred, gt, IouMode::Volume)?;
    let n = gt.corners.len();
    let mut dir_err_deg = Vec::with_capacity(2 * n);
    let mut depth_err_m = Vec::with_capacity(2 * n);
    for (i, g) in gt.walls.iter().enumerate() {
        let p = &pred.walls[matched_wall(pred, gt.corners[i], gt.corners[(i + 1) % n])];
        for (pl, gl) in [(p.ceiling_line(), g.ceiling_line()), (p.floor_line(), g.floor_line())] {
            dir_err_deg.push(direction_error(&pl, &gl));
            depth_err_m.push(depth_error(&pl.normalized(), &gl.normalized()));
        }
    }
    let scale_err_pct = ((pred.h_c - pred.h_f) / (gt.h_c - gt.h_f) - 1.0).abs() * 100.0;
    let count_mismatch = pred.len() != gt.len();
    let mut warnings = Vec::new();
    if count_mismatch {
        warnings.push(format!("{} predicted walls for {} ground-truth walls", pred.len(), gt.len()));
    }
    Ok(EvalReport {
        ce_m,
        cen_pct,
        iou2d_pct,
        iou3d_pct,
        dir_err_deg,
        depth_err_m,
        scale_err_pct,
        pred_walls: pred.len(),
        gt_walls: gt.len(),
        count_mismatch,
        warnings,
    })
}
