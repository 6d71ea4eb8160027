//! Ground-truth generation: random floor plans, the analytic boundary-map
//! oracle and noise injection.
//!
//! Every panorama column sees the room along its own horizontal radial ray,
//! starting at the column's optical center. The nearest wall hit along that
//! ray gives the column's ceiling and floor boundary rows.

use nalgebra::{Rotation2, Vector2, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, CameraModel, Point3H};
use crate::geom::{
    cross2, is_simple_polygon, point_in_polygon, point_segment_distance, ray_segment_hit,
    signed_area,
};
use crate::layout::Layout;
use crate::pipeline::BoundaryMap;

/// Base of the corner-score label `c^{d_x}`.
pub const CORNER_LABEL_BASE: f64 = 0.96;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("no valid camera position after {0} samples")]
    RejectionOverflow(usize),
    #[error("camera is outside the room or closer than Rc to a wall")]
    CameraOutsideRoom,
    #[error("column {0} sees no wall")]
    NoWallHit(usize),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub seed: u64,
    /// Inclusive wall-count range of the rectilinear base polygon.
    pub walls: (usize, usize),
    pub atlanta_clip_probability: f64,
    /// Side-length range of the base rectangle, meters.
    pub extent: (f64, f64),
    pub h_c: (f64, f64),
    pub h_f: (f64, f64),
    /// Radius of the optical-center circle the camera will use.
    pub rc: f64,
    /// Apply a uniformly random rotation about the vertical axis.
    pub rotate: bool,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            walls: (4, 14),
            atlanta_clip_probability: 0.0,
            extent: (3.0, 9.0),
            h_c: (0.8, 2.2),
            h_f: (-2.2, -0.8),
            rc: 1.0,
            rotate: true,
        }
    }
}

impl LayoutSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Minimum distance between the camera and any wall.
    pub fn clearance(&self) -> f64 {
        (self.rc + 0.1).max(0.3)
    }

    fn check(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        let (lo, hi) = self.walls;
        if lo < 4 || hi > 14 || lo > hi {
            return bad("wall range must lie within [4, 14]");
        }
        if lo == hi && lo % 2 == 1 {
            return bad("rectilinear polygons have an even wall count");
        }
        if !(0.0..=1.0).contains(&self.atlanta_clip_probability) {
            return bad("clip probability must be in [0, 1]");
        }
        if !(self.extent.0 > 0.0 && self.extent.0 <= self.extent.1) {
            return bad("extent range must be positive and ordered");
        }
        if !(self.h_c.0 > 0.0 && self.h_c.0 <= self.h_c.1 && self.h_f.1 < 0.0 && self.h_f.0 <= self.h_f.1) {
            return bad("height ranges must put the ceiling above and the floor below the camera");
        }
        if self.rc < 0.0 {
            return bad("rc must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    pub spike_rate: f64,
    pub spike_magnitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            gaussian_sigma: sigma,
            spike_rate: 0.0,
            spike_magnitude: 0.0,
            seed,
        }
    }
}

const MIN_EDGE: f64 = 0.5;
const MAX_WALLS: usize = 14;

fn polygon_ok(poly: &[Vector2<f64>]) -> bool {
    let n = poly.len();
    if !is_simple_polygon(poly) || signed_area(poly) <= 0.0 {
        return false;
    }
    for i in 0..n {
        if (poly[(i + 1) % n] - poly[i]).norm() < MIN_EDGE {
            return false;
        }
    }
    // keep non-adjacent walls apart so no corridor is too thin to stand in
    for i in 0..n {
        for j in 0..n {
            let adjacent = j == i || j == (i + 1) % n || (j + 1) % n == i;
            if adjacent {
                continue;
            }
            let (a, b) = (poly[j], poly[(j + 1) % n]);
            if point_segment_distance(poly[i], a, b) < MIN_EDGE {
                return false;
            }
        }
    }
    true
}

fn is_convex_vertex(poly: &[Vector2<f64>], i: usize) -> bool {
    let n = poly.len();
    let p = poly[(i + n - 1) % n];
    let b = poly[(i + 1) % n];
    cross2(poly[i] - p, b - poly[i]) > 0.0
}

/// Cuts a rectangular notch (or adds a bump) into edge `i`: +4 walls.
fn edge_notch(poly: &[Vector2<f64>], i: usize, rng: &mut ChaCha8Rng, scale: f64) -> Vec<Vector2<f64>> {
    let n = poly.len();
    let (a, b) = (poly[i], poly[(i + 1) % n]);
    let len = (b - a).norm();
    let t = (b - a) / len;
    let inward = Vector2::new(-t.y, t.x);
    let s0 = rng.random_range(0.15..0.5) * len;
    let s1 = s0 + rng.random_range(0.25..0.7) * (len - s0);
    let sign = if rng.random_bool(0.6) { 1.0 } else { -1.0 };
    let depth = sign * rng.random_range(0.15..0.4) * scale;
    let mut out = poly[..=i].to_vec();
    out.push(a + t * s0);
    out.push(a + t * s0 + inward * depth);
    out.push(a + t * s1 + inward * depth);
    out.push(a + t * s1);
    out.extend_from_slice(&poly[i + 1..]);
    out
}

/// Removes a rectangle at vertex `i`: +2 walls.
fn corner_notch(poly: &[Vector2<f64>], i: usize, rng: &mut ChaCha8Rng) -> Vec<Vector2<f64>> {
    let n = poly.len();
    let (p, a, b) = (poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]);
    let alpha = rng.random_range(0.2..0.7);
    let beta = rng.random_range(0.2..0.7);
    let q0 = a + (p - a) * alpha;
    let q2 = a + (b - a) * beta;
    let q1 = q0 + (b - a) * beta;
    let mut out = Vec::with_capacity(n + 2);
    out.extend_from_slice(&poly[..i]);
    out.extend([q0, q1, q2]);
    out.extend_from_slice(&poly[i + 1..]);
    out
}

/// Replaces convex vertex `i` by an oblique wall: +1 wall.
fn clip_corner(poly: &[Vector2<f64>], i: usize, rng: &mut ChaCha8Rng) -> Vec<Vector2<f64>> {
    let n = poly.len();
    let (p, a, b) = (poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]);
    let alpha = rng.random_range(0.2..0.45);
    let beta = rng.random_range(0.2..0.45);
    let mut out = Vec::with_capacity(n + 1);
    out.extend_from_slice(&poly[..i]);
    out.extend([a + (p - a) * alpha, a + (b - a) * beta]);
    out.extend_from_slice(&poly[i + 1..]);
    out
}

fn rectilinear_polygon(spec: &LayoutSpec, rng: &mut ChaCha8Rng) -> Vec<Vector2<f64>> {
    let (lo, hi) = spec.walls;
    let evens: Vec<usize> = (lo..=hi).filter(|k| k % 2 == 0).collect();
    let target = evens[rng.random_range(0..evens.len())];
    loop {
        let w = rng.random_range(spec.extent.0..=spec.extent.1);
        let h = rng.random_range(spec.extent.0..=spec.extent.1);
        let mut poly = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(w, 0.0),
            Vector2::new(w, h),
            Vector2::new(0.0, h),
        ];
        let mut attempts = 0;
        while poly.len() < target && attempts < 200 {
            attempts += 1;
            let i = rng.random_range(0..poly.len());
            let cand = if target - poly.len() >= 4 && rng.random_bool(0.5) {
                edge_notch(&poly, i, rng, w.min(h))
            } else {
                corner_notch(&poly, i, rng)
            };
            if polygon_ok(&cand) {
                poly = cand;
            }
        }
        if poly.len() == target {
            return poly;
        }
    }
}

fn place_camera(
    poly: &[Vector2<f64>],
    clearance: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vector2<f64>, SynthError> {
    const TRIES: usize = 1000;
    let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
    for c in poly {
        lo = lo.inf(c);
        hi = hi.sup(c);
    }
    let n = poly.len();
    for _ in 0..TRIES {
        let p = Vector2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if !point_in_polygon(p, poly) {
            continue;
        }
        let clear = (0..n).all(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n]) > clearance);
        if clear {
            return Ok(p);
        }
    }
    Err(SynthError::RejectionOverflow(TRIES))
}

fn finish_layout(
    poly: Vec<Vector2<f64>>,
    camera: Vector2<f64>,
    rotation: f64,
    h_c: f64,
    h_f: f64,
) -> Layout {
    let rot = Rotation2::new(rotation);
    let corners = poly.iter().map(|c| rot * (c - camera)).collect();
    Layout::from_polygon(corners, h_c, h_f).expect("generated polygon has >= 4 corners")
}

/// Random Manhattan floor plan, optionally with oblique clipped corners,
/// expressed in the camera frame.
pub fn generate_layout(spec: &LayoutSpec) -> Result<Layout, SynthError> {
    const POLYGONS: usize = 100;
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..POLYGONS {
        let mut poly = rectilinear_polygon(spec, &mut rng);
        if spec.atlanta_clip_probability > 0.0 {
            let mut i = 0;
            while i < poly.len() && poly.len() < MAX_WALLS {
                let take = rng.random_bool(spec.atlanta_clip_probability);
                if take && is_convex_vertex(&poly, i) {
                    let cand = clip_corner(&poly, i, &mut rng);
                    if polygon_ok(&cand) {
                        poly = cand;
                        i += 1;
                    }
                }
                i += 1;
            }
        }
        let h_c = rng.random_range(spec.h_c.0..=spec.h_c.1);
        let h_f = rng.random_range(spec.h_f.0..=spec.h_f.1);
        // narrow plans may leave no spot with enough clearance
        let Ok(camera) = place_camera(&poly, spec.clearance(), &mut rng) else {
            continue;
        };
        let rotation = if spec.rotate {
            rng.random_range(0.0..std::f64::consts::TAU)
        } else {
            0.0
        };
        return Ok(finish_layout(poly, camera, rotation, h_c, h_f));
    }
    Err(SynthError::RejectionOverflow(POLYGONS))
}

/// Rooms with a single fully hidden wall: a rectangle whose far side has a
/// step facing away from the camera. With `atlanta`, one or two convex
/// corners are additionally clipped.
pub fn occluded_room(seed: u64, atlanta: bool, rc: f64) -> Result<Layout, SynthError> {
    let cam = CameraModel::with_radius(rc)?;
    let clearance = (rc + 0.1).max(0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0CC1);
    for _ in 0..200 {
        let w = rng.random_range(5.0..8.0);
        let t1 = rng.random_range(4.0..6.0);
        let t2 = t1 + rng.random_range(0.8..1.5);
        let s = rng.random_range(0.45..0.6) * w;
        let mut poly = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(w, 0.0),
            Vector2::new(w, t2),
            Vector2::new(s, t2),
            Vector2::new(s, t1),
            Vector2::new(0.0, t1),
        ];
        if atlanta {
            poly = clip_corner(&poly, 0, &mut rng);
            if rng.random_bool(0.5) {
                poly = clip_corner(&poly, 2, &mut rng);
            }
        }
        if !polygon_ok(&poly) {
            continue;
        }
        // left of the step face, below the lower wall, so the face is hidden
        let (x_hi, y_hi) = (s - 0.5, t1 - clearance - 0.3);
        if clearance + 0.2 >= x_hi || clearance + 0.5 >= y_hi {
            continue;
        }
        let camera = Vector2::new(
            rng.random_range(clearance + 0.2..x_hi),
            rng.random_range(clearance + 0.5..y_hi),
        );
        let n = poly.len();
        let clear = (0..n).all(|k| point_segment_distance(camera, poly[k], poly[(k + 1) % n]) >= clearance);
        if !point_in_polygon(camera, &poly) || !clear {
            continue;
        }
        let h_c = rng.random_range(1.0..1.8);
        let h_f = -rng.random_range(1.0..1.8);
        let rotation = rng.random_range(0.0..std::f64::consts::TAU);
        let layout = finish_layout(poly, camera, rotation, h_c, h_f);
        let Ok(vis) = visibility(&layout, &cam) else {
            continue;
        };
        let hidden: Vec<usize> = (0..layout.len()).filter(|&k| vis.counts[k] == 0).collect();
        let thin = vis.counts.iter().any(|&c| c > 0 && c < 12);
        if hidden.len() == 1 && !thin && vis.runs.len() == layout.len() - 1 {
            return Ok(layout);
        }
    }
    Err(SynthError::RejectionOverflow(200))
}

/// Which wall each column sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Visibility {
    pub column_wall: Vec<usize>,
    /// Radial distance from the origin of each column's hit point.
    pub column_rho: Vec<f64>,
    pub counts: Vec<usize>,
    /// Cyclic sequence of visible wall runs, in column order.
    pub runs: Vec<usize>,
    /// Continuous column coordinate of every wall transition.
    pub transitions: Vec<f64>,
}

impl Visibility {
    /// Every wall visible exactly once, in polygon order, with at least
    /// `min_columns` columns.
    pub fn is_unoccluded(&self, min_columns: usize) -> bool {
        let n = self.counts.len();
        if self.runs.len() != n || self.counts.iter().any(|&c| c < min_columns) {
            return false;
        }
        (0..n).all(|k| (self.runs[k] + 1) % n == self.runs[(k + 1) % n])
    }
}

fn nearest_hit(layout: &Layout, rc: f64, varphi: f64) -> Option<(usize, f64)> {
    let dir = Vector2::new(varphi.cos(), varphi.sin());
    let origin = dir * rc;
    let n = layout.corners.len();
    let mut best: Option<(usize, f64)> = None;
    for k in 0..n {
        let (a, b) = (layout.corners[k], layout.corners[(k + 1) % n]);
        if let Some(t) = ray_segment_hit(origin, dir, a, b) {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((k, t));
            }
        }
    }
    best.map(|(k, t)| (k, rc + t))
}

fn check_camera_inside(layout: &Layout, rc: f64) -> Result<(), SynthError> {
    let n = layout.corners.len();
    let origin = Vector2::zeros();
    if !point_in_polygon(origin, &layout.corners) {
        return Err(SynthError::CameraOutsideRoom);
    }
    let clear = (0..n).all(|i| {
        point_segment_distance(origin, layout.corners[i], layout.corners[(i + 1) % n]) > rc
    });
    if clear {
        Ok(())
    } else {
        Err(SynthError::CameraOutsideRoom)
    }
}

/// Per-column visibility with sub-column wall transitions.
pub fn visibility(layout: &Layout, cam: &CameraModel) -> Result<Visibility, SynthError> {
    check_camera_inside(layout, cam.rc())?;
    let cols = cam.cols();
    let mut column_wall = Vec::with_capacity(cols);
    let mut column_rho = Vec::with_capacity(cols);
    for j in 0..cols {
        let (k, rho) = nearest_hit(layout, cam.rc(), cam.column_azimuth(j)).ok_or(SynthError::NoWallHit(j))?;
        column_wall.push(k);
        column_rho.push(rho);
    }
    let mut counts = vec![0; layout.len()];
    for &k in &column_wall {
        counts[k] += 1;
    }
    let full = cam.is_full_panorama();
    let pairs = if full { cols } else { cols - 1 };
    let mut transitions = Vec::new();
    let mut runs = Vec::new();
    for j in 0..pairs {
        let next = (j + 1) % cols;
        if column_wall[j] == column_wall[next] {
            continue;
        }
        // bisect the switch between the two sampled azimuths
        let (mut lo, mut hi) = (j as f64 + 0.5, j as f64 + 1.5);
        let left = column_wall[j];
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match nearest_hit(layout, cam.rc(), cam.azimuth_at(mid)) {
                Some((k, _)) if k == left => lo = mid,
                _ => hi = mid,
            }
        }
        transitions.push(0.5 * (lo + hi));
        runs.push(column_wall[next]);
    }
    if runs.is_empty() {
        runs.push(column_wall[0]);
    } else if full {
        // runs are recorded at their start; rotate so the order is cyclic-consistent
        }
    Ok(Visibility {
        column_wall,
        column_rho,
        counts,
        runs,
        transitions,
    })
}

/// Analytic oracle output: the boundary map plus its ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub boundary: BoundaryMap,
    pub visibility: Visibility,
    /// Integer corner columns used for the corner-score label.
    pub corner_columns: Vec<usize>,
}

/// Boundary map of `layout` seen by `cam`; see [`project_layout_detailed`].
pub fn project_layout(layout: &Layout, cam: &CameraModel) -> Result<BoundaryMap, SynthError> {
    project_layout_detailed(layout, cam).map(|p| p.boundary)
}

/// Ceiling and floor rows of the nearest wall in every column, and the
/// corner score `0.96^{d_x}` with `d_x` the column distance to the nearest
/// visible corner (including occlusion-induced ones).
pub fn project_layout_detailed(layout: &Layout, cam: &CameraModel) -> Result<Projection, SynthError> {
    let vis = visibility(layout, cam)?;
    let cols = cam.cols();
    let mut ceiling_row = Vec::with_capacity(cols);
    let mut floor_row = Vec::with_capacity(cols);
    for j in 0..cols {
        let a = cam.column_azimuth(j);
        let rho = vis.column_rho[j];
        let at = |h: f64| cam.project_point(Point3H::euclidean(Vector3::new(rho * a.cos(), rho * a.sin(), h)));
        ceiling_row.push(at(layout.h_c)?.i);
        floor_row.push(at(layout.h_f)?.i);
    }
    let mut corner_columns: Vec<usize> = vis
        .transitions
        .iter()
        .map(|&t| ((t - 0.5).round() as isize).rem_euclid(cols as isize) as usize)
        .collect();
    corner_columns.sort_unstable();
    corner_columns.dedup();
    let corner_score = corner_label(cols, &corner_columns, cam.is_full_panorama());
    Ok(Projection {
        boundary: BoundaryMap {
            ceiling_row,
            floor_row,
            corner_score,
        },
        visibility: vis,
        corner_columns,
    })
}

/// `0.96^{d_x}` label over `cols` columns for the given corner columns.
pub fn corner_label(cols: usize, corners: &[usize], cyclic: bool) -> Vec<f64> {
    (0..cols)
        .map(|j| {
            let dx = corners
                .iter()
                .map(|&c| {
                    let d = j.abs_diff(c);
                    if cyclic {
                        d.min(cols - d)
                    } else {
                        d
                    }
                })
                .min();
            dx.map_or(0.0, |d| CORNER_LABEL_BASE.powi(d as i32))
        })
        .collect()
}

/// Gaussian jitter plus a fixed fraction of spike columns on the boundary
/// rows. The ceiling row is kept at least 1 px above the floor row.
pub fn add_noise(bm: &BoundaryMap, noise: &NoiseSpec) -> BoundaryMap {
    let mut out = bm.clone();
    let n = bm.len();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    if noise.gaussian_sigma > 0.0 {
        let g = Normal::new(0.0, noise.gaussian_sigma).expect("sigma is finite and positive");
        for j in 0..n {
            out.ceiling_row[j] += g.sample(&mut rng);
            out.floor_row[j] += g.sample(&mut rng);
        }
    }
    let spikes = (noise.spike_rate * n as f64).round() as usize;
    if spikes > 0 && noise.spike_magnitude != 0.0 {
        for j in sample(&mut rng, n, spikes.min(n)).into_iter() {
            let sc = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let sf = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            out.ceiling_row[j] += sc * noise.spike_magnitude;
            out.floor_row[j] += sf * noise.spike_magnitude;
        }
    }
    for j in 0..n {
        let (c, f) = (out.ceiling_row[j], out.floor_row[j]);
        if c - f < 1.0 {
            let mid = 0.5 * (c + f);
            out.ceiling_row[j] = mid + 0.5;
            out.floor_row[j] = mid - 0.5;
        }
    }
    out
}
