//! Full layout pipeline: boundary map in, metrically scaled [`Layout`] out.
//!
//! `segment_walls` → `ransac_fit_walls` → (Manhattan: `cluster_directions`,
//! `handle_occlusions_manhattan`, `solve_manhattan` | Atlanta:
//! `solve_atlanta`, `handle_occlusions_atlanta`) → corners →
//! `final_adjustment`.
//!
//! Nothing here accepts a metric prior: the only length entering the
//! computation is the camera radius `Rc`.

mod adjust;
mod occlusion;
mod ransac;
mod segment;

use std::fmt;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::layout::{Layout, LayoutError};
use crate::plucker::{PluckerError, PluckerRay};
use crate::solvers::{solve_atlanta, solve_manhattan, RaySet, SolverError, Wall};

pub use adjust::{final_adjustment, AdjustConfig, AdjustInput, AdjustOutcome, Anchor, AngleMode};
pub use occlusion::{
    cluster_directions, handle_occlusions_atlanta, handle_occlusions_manhattan, AtlantaCorners, Slot,
};
pub use ransac::{ransac_fit_walls, required_hypotheses, RansacConfig, WallFit};
pub use segment::{segment_walls, Segment, SegmentConfig};

/// Per-column boundary observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMap {
    pub ceiling_row: Vec<f64>,
    pub floor_row: Vec<f64>,
    pub corner_score: Vec<f64>,
}

impl BoundaryMap {
    pub fn len(&self) -> usize {
        self.ceiling_row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ceiling_row.is_empty()
    }

    /// Checks array lengths and finiteness against `cam`, and that the
    /// ceiling boundary lies at a higher elevation than the floor boundary.
    /// Copy with every row clamped into the image, keeping the ceiling at
    /// least one pixel above the floor.
    pub fn clamped(&self, cam: &CameraModel) -> Self {
        let rows = cam.rows() as f64;
        let mut out = self.clone();
        for (c, f) in out.ceiling_row.iter_mut().zip(out.floor_row.iter_mut()) {
            *c = c.clamp(1.0, rows);
            *f = f.clamp(0.0, (*c - 1.0).max(0.0));
        }
        out
    }

    pub fn validate(&self, cam: &CameraModel) -> Result<(), PipelineError> {
        let n = cam.cols();
        let bad = |m: String| Err(PipelineError::InvalidBoundary(m));
        if self.ceiling_row.len() != n || self.floor_row.len() != n || self.corner_score.len() != n {
            return bad(format!(
                "expected {n} columns, got {}/{}/{}",
                self.ceiling_row.len(),
                self.floor_row.len(),
                self.corner_score.len()
            ));
        }
        let rows = cam.rows() as f64;
        for j in 0..n {
            let (c, f, s) = (self.ceiling_row[j], self.floor_row[j], self.corner_score[j]);
            if !(c.is_finite() && f.is_finite() && s.is_finite()) {
                return bad(format!("non-finite value in column {j}"));
            }
            if !(0.0..=rows).contains(&c) || !(0.0..=rows).contains(&f) {
                return bad(format!("row out of image in column {j}"));
            }
            if c <= f {
                return bad(format!("ceiling not above floor in column {j}"));
            }
        }
        Ok(())
    }

    /// Ceiling and floor rays of column `j`.
    pub fn column_rays(&self, cam: &CameraModel, j: usize) -> (PluckerRay, PluckerRay) {
        let a = cam.column_azimuth(j);
        (
            cam.ray_from_angles(cam.elevation_at(self.ceiling_row[j]), a),
            cam.ray_from_angles(cam.elevation_at(self.floor_row[j]), a),
        )
    }

    /// Rays of the given columns, paired per column.
    pub fn ray_set(&self, cam: &CameraModel, columns: &[usize]) -> RaySet {
        let mut set = RaySet::default();
        for &j in columns {
            let (c, f) = self.column_rays(cam, j);
            set.push_column(j, c, f);
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum World {
    Manhattan,
    Atlanta,
}

impl std::str::FromStr for World {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "manhattan" => Ok(World::Manhattan),
            "atlanta" => Ok(World::Atlanta),
            other => Err(format!("unknown world '{other}' (expected manhattan or atlanta)")),
        }
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            World::Manhattan => "manhattan",
            World::Atlanta => "atlanta",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub segmentation: SegmentConfig,
    pub ransac: RansacConfig,
    /// Atlanta occlusion gap between the two wall lines at a corner ray, meters.
    pub gap_threshold: f64,
    pub adjust: AdjustConfig,
    /// Skip the final adjustment (useful to inspect the linear solution).
    pub skip_adjustment: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentConfig::default(),
            ransac: RansacConfig::default(),
            gap_threshold: 0.05,
            adjust: AdjustConfig::default(),
            skip_adjustment: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Input,
    Segmentation,
    Ransac,
    Clustering,
    Occlusion,
    Solve,
    Corners,
    Adjustment,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Input => "input",
            Stage::Segmentation => "segmentation",
            Stage::Ransac => "ransac",
            Stage::Clustering => "clustering",
            Stage::Occlusion => "occlusion",
            Stage::Solve => "solve",
            Stage::Corners => "corners",
            Stage::Adjustment => "adjustment",
        };
        f.write_str(s)
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PipelineError {
    #[error("[input] invalid boundary map: {0}")]
    InvalidBoundary(String),
    #[error("[input] layout recovery needs a full 360 degree panorama")]
    NotFullPanorama,
    #[error("[ransac] degenerate configuration: {0}")]
    DegenerateConfig(String),
    #[error("[segmentation] found {0} corners, need at least 3")]
    TooFewCorners(usize),
    #[error("[ransac] wall {wall}: best inlier ratio {ratio:.3} below 0.5")]
    NoConsensus { wall: usize, ratio: f64 },
    #[error("[{stage}] wall {wall}: {source}")]
    Solver {
        stage: Stage,
        wall: usize,
        #[source]
        source: SolverError,
    },
    #[error("[{stage}] {source}")]
    Geometry {
        stage: Stage,
        #[source]
        source: PluckerError,
    },
    #[error("[{stage}] {source}")]
    Layout {
        stage: Stage,
        #[source]
        source: LayoutError,
    },
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::InvalidBoundary(_) | PipelineError::NotFullPanorama => Stage::Input,
            PipelineError::DegenerateConfig(_) | PipelineError::NoConsensus { .. } => Stage::Ransac,
            PipelineError::TooFewCorners(_) => Stage::Segmentation,
            PipelineError::Solver { stage, .. }
            | PipelineError::Geometry { stage, .. }
            | PipelineError::Layout { stage, .. } => *stage,
        }
    }
}

/// Recovered layout with per-stage diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub layout: Layout,
    /// Layout from the linear solvers, before the final adjustment.
    pub initial: Layout,
    pub world: World,
    pub segments: usize,
    pub inlier_ratios: Vec<f64>,
    pub inserted_walls: usize,
    pub adjustment: Option<AdjustOutcome>,
}

/// Floor-plan line `(cos alpha, sin alpha) · x = d` of a wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanLine {
    pub alpha: f64,
    pub d: f64,
}

impl PlanLine {
    pub fn from_wall(w: &Wall) -> Self {
        let n = w.normal();
        Self {
            alpha: n.y.atan2(n.x),
            d: w.d,
        }
    }

    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(self.alpha.cos(), self.alpha.sin())
    }

    /// Common point of two lines, if they are not parallel.
    pub fn intersect(&self, other: &PlanLine) -> Option<Vector2<f64>> {
        let (a, b) = (self.normal(), other.normal());
        let det = a.x * b.y - a.y * b.x;
        if det.abs() < 1e-12 {
            return None;
        }
        Some(Vector2::new(
            (self.d * b.y - a.y * other.d) / det,
            (a.x * other.d - self.d * b.x) / det,
        ))
    }

    /// Radial distance of the crossing with the horizontal ray of azimuth `varphi`.
    pub fn radial_hit(&self, varphi: f64) -> Option<f64> {
        let denom = Vector2::new(varphi.cos(), varphi.sin()).dot(&self.normal());
        if denom.abs() < 1e-15 {
            return None;
        }
        let rho = self.d / denom;
        (rho > 0.0).then_some(rho)
    }
}

pub(crate) fn corners_of(lines: &[PlanLine]) -> Result<Vec<Vector2<f64>>, PipelineError> {
    let n = lines.len();
    (0..n)
        .map(|i| {
            lines[(i + n - 1) % n]
                .intersect(&lines[i])
                .ok_or(PipelineError::Geometry {
                    stage: Stage::Corners,
                    source: PluckerError::ParallelLines,
                })
        })
        .collect()
}

fn build_layout(
    lines: &[PlanLine],
    h_c: f64,
    h_f: f64,
    occluded: &[bool],
    stage: Stage,
) -> Result<Layout, PipelineError> {
    let corners = corners_of(lines)?;
    let mut layout = Layout::from_polygon(corners, h_c, h_f).map_err(|source| PipelineError::Layout { stage, source })?;
    if layout.area() > 0.0 {
        layout.occluded = occluded.to_vec();
    }
    layout
        .validate()
        .map_err(|source| PipelineError::Layout { stage, source })?;
    Ok(layout)
}

/// Wall directions rotated onto the Manhattan axes at `star`, keeping each
/// wall's orientation sign.
fn snapped_directions(walls: &[Wall], labels: &[u8], star: f64) -> Vec<Vector2<f64>> {
    walls
        .iter()
        .zip(labels)
        .map(|(w, &l)| {
            let a = star + if l == 0 { 0.0 } else { std::f64::consts::FRAC_PI_2 };
            let axis = Vector2::new(a.cos(), a.sin());
            if axis.dot(&w.u) >= 0.0 {
                axis
            } else {
                -axis
            }
        })
        .collect()
}

/// Runs the whole pipeline on a boundary map.
pub fn recover_layout(
    bm: &BoundaryMap,
    cam: &CameraModel,
    world: World,
    cfg: &PipelineConfig,
) -> Result<Recovery, PipelineError> {
    if !cam.is_full_panorama() {
        return Err(PipelineError::NotFullPanorama);
    }
    bm.validate(cam)?;
    let segments = segment_walls(bm, &cfg.segmentation, true)?;
    let fits = ransac_fit_walls(bm, &segments, cam, &cfg.ransac)?;
    let inlier_ratios = fits.iter().map(|f| f.inlier_ratio).collect();
    let sets: Vec<RaySet> = fits.iter().map(|f| bm.ray_set(cam, &f.inlier_columns())).collect();

    let (lines, h_c, h_f, slots, anchors, mode) = match world {
        World::Manhattan => {
            let walls: Vec<Wall> = fits.iter().map(|f| f.solution.wall).collect();
            let (labels, star) = cluster_directions(&walls);
            let (sol_walls, h_c, h_f) = match solve_manhattan(&sets, &labels) {
                Ok(sol) => (sol.walls, sol.h_c, sol.h_f),
                // noise can leave the pencil without a real parallel member;
                // fall back to the clustered axes with known directions
                Err(SolverError::ComplexRoots | SolverError::NoValidRoot) => {
                    let dirs = snapped_directions(&walls, &labels, star);
                    let sol = solve_atlanta(&sets, &dirs).map_err(|source| PipelineError::Solver {
                        stage: Stage::Solve,
                        wall: 0,
                        source,
                    })?;
                    (sol.walls, sol.h_c, sol.h_f)
                }
                Err(source) => {
                    return Err(PipelineError::Solver {
                        stage: Stage::Solve,
                        wall: 0,
                        source,
                    })
                }
            };
            let observed: Vec<PlanLine> = sol_walls.iter().map(PlanLine::from_wall).collect();
            let corner_az: Vec<f64> = segments.iter().map(|s| cam.column_azimuth(s.start_corner)).collect();
            let (slots, lines, anchors) = handle_occlusions_manhattan(&observed, &labels, &corner_az);
            (lines, h_c, h_f, slots, anchors, AngleMode::Shared)
        }
        World::Atlanta => {
            let dirs: Vec<Vector2<f64>> = fits.iter().map(|f| f.solution.wall.u).collect();
            let sol = solve_atlanta(&sets, &dirs).map_err(|source| PipelineError::Solver {
                stage: Stage::Solve,
                wall: 0,
                source,
            })?;
            let observed: Vec<PlanLine> = sol.walls.iter().map(PlanLine::from_wall).collect();
            let corner_cols: Vec<usize> = segments.iter().map(|s| s.start_corner).collect();
            let out = handle_occlusions_atlanta(&observed, sol.h_c, bm, cam, &corner_cols, cfg.gap_threshold);
            (out.lines, sol.h_c, sol.h_f, out.slots, out.anchors, AngleMode::PerWall)
        }
    };

    let occluded: Vec<bool> = slots.iter().map(|s| matches!(s, Slot::Inserted)).collect();
    let inserted_walls = occluded.iter().filter(|&&o| o).count();
    let initial = build_layout(&lines, h_c, h_f, &occluded, Stage::Corners)?;

    let mut observations = Vec::with_capacity(slots.len());
    for slot in &slots {
        observations.push(match slot {
            Slot::Observed(i) => fits[*i].inlier_columns(),
            Slot::Inserted => Vec::new(),
        });
    }

    let (layout, adjustment) = if cfg.skip_adjustment {
        (initial.clone(), None)
    } else {
        let input = AdjustInput {
            lines: lines.iter().map(|l| (l.alpha, l.d)).collect(),
            h_c,
            h_f,
            observations,
            anchors,
            mode,
        };
        let out = final_adjustment(&input, bm, cam, &cfg.adjust);
        let adjusted: Vec<PlanLine> = out.lines.iter().map(|&(alpha, d)| PlanLine { alpha, d }).collect();
        match build_layout(&adjusted, out.h_c, out.h_f, &occluded, Stage::Adjustment) {
            Ok(l) => (l, Some(out)),
            // an adjustment that breaks the polygon is discarded
            Err(_) => (initial.clone(), Some(out)),
        }
    };

    Ok(Recovery {
        layout,
        initial,
        world,
        segments: segments.len(),
        inlier_ratios,
        inserted_walls,
        adjustment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_line_intersection() {
        let a = PlanLine { alpha: 0.0, d: 2.0 };
        let b = PlanLine {
            alpha: std::f64::consts::FRAC_PI_2,
            d: 3.0,
        };
        let p = a.intersect(&b).unwrap();
        assert!((p - Vector2::new(2.0, 3.0)).norm() < 1e-12);
        assert!(a.intersect(&a).is_none());
        assert!((a.radial_hit(0.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_validation() {
        let cam = CameraModel::default();
        let n = cam.cols();
        let mut bm = BoundaryMap {
            ceiling_row: vec![400.0; n],
            floor_row: vec![100.0; n],
            corner_score: vec![0.0; n],
        };
        bm.validate(&cam).unwrap();
        bm.floor_row[3] = 401.0;
        assert!(matches!(bm.validate(&cam), Err(PipelineError::InvalidBoundary(_))));
        bm.floor_row.pop();
        assert!(bm.validate(&cam).is_err());
    }

    #[test]
    fn world_parsing() {
        assert_eq!("Manhattan".parse::<World>().unwrap(), World::Manhattan);
        assert!("paris".parse::<World>().is_err());
    }
}
