//! Linear layout solvers built on the side constraint between projecting
//! rays and the horizontal ceiling/floor lines of vertical walls.
//!
//! A wall with horizontal direction `u`, plane distance `d` and heights
//! `h_c`, `h_f` has ceiling line `(e1 | x_L x e1)` with `x_L = d e2 + h_c e3`.
//! Writing `v = h_c u` and `w = h_f u` makes every side constraint linear in
//! `(u, v, w, d)`; the parallelism of `u`, `v`, `w` is restored afterwards by
//! a one-parameter search inside the two-dimensional SVD null space.

use nalgebra::{DMatrix, DVector, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{cross2, right_singular_vectors};
use crate::plucker::{side, PluckerLine, PluckerRay};

/// Relative singular-value threshold used by every rank test here.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Leading coefficients below this are treated as a linear equation.
pub const LINEAR_LAMBDA_TOLERANCE: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SolverError {
    #[error("need at least {needed} rays per line, got {got}")]
    InsufficientRays { needed: usize, got: usize },
    #[error("input size mismatch: {0}")]
    Mismatch(String),
    #[error("ray geometry does not determine the walls (rank deficient system)")]
    RankDeficient,
    #[error("no parallelism root gives a ceiling above the floor")]
    NoValidRoot,
    #[error("parallelism quadratics have complex roots only")]
    ComplexRoots,
    #[error("null vector cannot be de-homogenised (first component {0:.3e})")]
    DehomogenizationFailure(f64),
}

/// A vertical wall bounded by one ceiling and one floor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    /// Unit horizontal direction of the ceiling/floor lines.
    pub u: Vector2<f64>,
    /// Distance from the origin to the wall plane along `e2 = (-u_y, u_x)`.
    pub d: f64,
    pub h_c: f64,
    pub h_f: f64,
}

impl Wall {
    /// Builds a wall and flips `u` so that `d >= 0`.
    pub fn new(u: Vector2<f64>, d: f64, h_c: f64, h_f: f64) -> Self {
        let u = u.normalize();
        if d < 0.0 {
            Self { u: -u, d: -d, h_c, h_f }
        } else {
            Self { u, d, h_c, h_f }
        }
    }

    pub fn from_angle(theta: f64, d: f64, h_c: f64, h_f: f64) -> Self {
        Self::new(Vector2::new(theta.cos(), theta.sin()), d, h_c, h_f)
    }

    /// Wall through the floor-plan segment `a -> b`.
    pub fn through_segment(a: Vector2<f64>, b: Vector2<f64>, h_c: f64, h_f: f64) -> Self {
        let u = (b - a).normalize();
        let e2 = Vector2::new(-u.y, u.x);
        Self::new(u, a.dot(&e2), h_c, h_f)
    }

    pub fn theta(&self) -> f64 {
        self.u.y.atan2(self.u.x)
    }

    /// Horizontal unit normal pointing from the origin towards the plane.
    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(-self.u.y, self.u.x)
    }

    pub fn e1(&self) -> Vector3<f64> {
        Vector3::new(self.u.x, self.u.y, 0.0)
    }

    pub fn e2(&self) -> Vector3<f64> {
        Vector3::new(-self.u.y, self.u.x, 0.0)
    }

    fn line_at(&self, h: f64) -> PluckerLine {
        let x = self.e2() * self.d + Vector3::z() * h;
        PluckerLine::from_point_direction(x, self.e1())
    }

    pub fn ceiling_line(&self) -> PluckerLine {
        self.line_at(self.h_c)
    }

    pub fn floor_line(&self) -> PluckerLine {
        self.line_at(self.h_f)
    }

    /// Radial distance at which the horizontal ray from the origin with
    /// azimuth `varphi` meets the wall plane, if it does in front.
    pub fn radial_hit(&self, varphi: f64) -> Option<f64> {
        let dir = Vector2::new(varphi.cos(), varphi.sin());
        let denom = dir.dot(&self.normal());
        if denom <= 1e-15 {
            return None;
        }
        let rho = self.d / denom;
        (rho > 0.0).then_some(rho)
    }

    /// RMS of side products against the rays of `set`.
    pub fn rms_residual(&self, set: &RaySet) -> f64 {
        let l = self.ceiling_line();
        let m = self.floor_line();
        let sq: f64 = set.ceiling.iter().map(|r| side(r, &l).powi(2)).sum::<f64>()
            + set.floor.iter().map(|r| side(r, &m).powi(2)).sum::<f64>();
        (sq / set.len().max(1) as f64).sqrt()
    }
}

/// Ceiling and floor rays attributed to one wall.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RaySet {
    pub ceiling: Vec<PluckerRay>,
    pub floor: Vec<PluckerRay>,
    pub ceiling_columns: Vec<usize>,
    pub floor_columns: Vec<usize>,
}

impl RaySet {
    pub fn new(ceiling: Vec<PluckerRay>, floor: Vec<PluckerRay>) -> Self {
        Self {
            ceiling_columns: vec![usize::MAX; ceiling.len()],
            floor_columns: vec![usize::MAX; floor.len()],
            ceiling,
            floor,
        }
    }

    pub fn push_column(&mut self, column: usize, ceiling: PluckerRay, floor: PluckerRay) {
        self.ceiling.push(ceiling);
        self.floor.push(floor);
        self.ceiling_columns.push(column);
        self.floor_columns.push(column);
    }

    pub fn len(&self) -> usize {
        self.ceiling.len() + self.floor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Result of [`extract_wall`] with the intermediate null-space diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSolution {
    pub wall: Wall,
    /// Mixing parameter of `W0 + lambda W1`; infinite when `W1` alone won.
    pub lambda: f64,
    /// Null-space basis `[W0, W1]` over `(u_x, u_y, v_x, v_y, w_x, w_y, d)`.
    pub basis: [[f64; 7]; 2],
    /// RMS side residual of the returned wall.
    pub residual: f64,
    /// Largest distance between a root of the ceiling quadratic and the
    /// nearest root of the floor quadratic (0 when perfectly paired).
    pub root_gap: f64,
}

/// One side-constraint row per ray, scaled to unit norm.
fn normalized_row(row: &mut [f64]) {
    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        row.iter_mut().for_each(|x| *x /= n);
    }
}

/// Coefficients of a ray's side product with a wall along `e1 = u` over
/// `(u_x, u_y, hu_x, hu_y, d)`.
fn along_u_coeffs(r: &PluckerRay) -> [f64; 5] {
    let (xi, xb) = (r.xi(), r.xibar());
    [xb.x, xb.y, xi.y, -xi.x, -xi.z]
}

/// Same for a wall along `u_perp = (-u_y, u_x)`, still in terms of `u`.
fn along_perp_coeffs(r: &PluckerRay) -> [f64; 5] {
    let (xi, xb) = (r.xi(), r.xibar());
    [xb.y, -xb.x, -xi.x, -xi.y, -xi.z]
}

fn push_row(rows: &mut Vec<f64>, ncols: usize, coeffs: [f64; 5], height_slot: usize, d_slot: usize) {
    let mut row = vec![0.0; ncols];
    row[0] = coeffs[0];
    row[1] = coeffs[1];
    row[height_slot] = coeffs[2];
    row[height_slot + 1] = coeffs[3];
    row[d_slot] = coeffs[4];
    normalized_row(&mut row);
    rows.extend(row);
}

fn matrix_from_rows(rows: Vec<f64>, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows.len() / ncols, ncols, &rows)
}

/// Homogeneous roots `(alpha, beta)` of `cross(u, h)` for `alpha W0 + beta W1`,
/// where `u` and `h` are read at component offsets 0 and `slot`.
fn parallelism_roots(w0: &DVector<f64>, w1: &DVector<f64>, slot: usize) -> Vec<(f64, f64)> {
    let pick = |w: &DVector<f64>, k: usize| Vector2::new(w[k], w[k + 1]);
    let (u0, u1) = (pick(w0, 0), pick(w1, 0));
    let (h0, h1) = (pick(w0, slot), pick(w1, slot));
    let a = cross2(u1, h1);
    let b = cross2(u0, h1) + cross2(u1, h0);
    let c = cross2(u0, h0);
    let mut roots = Vec::new();
    if a.abs() < LINEAR_LAMBDA_TOLERANCE {
        roots.push((0.0, 1.0));
        if b.abs() > LINEAR_LAMBDA_TOLERANCE {
            roots.push((1.0, -c / b));
        }
        return roots;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < -1e-12 * (b * b + (4.0 * a * c).abs()) {
        return roots;
    }
    let s = disc.max(0.0).sqrt();
    let q = -0.5 * (b + if b >= 0.0 { s } else { -s });
    roots.push((1.0, q / a));
    if q != 0.0 {
        roots.push((1.0, c / q));
    } else {
        roots.push((1.0, 0.0));
    }
    roots
}

fn homogeneous_gap(p: (f64, f64), q: (f64, f64)) -> f64 {
    let np = p.0.hypot(p.1);
    let nq = q.0.hypot(q.1);
    let (a, b) = ((p.0 / np, p.1 / np), (q.0 / nq, q.1 / nq));
    // sine of the angle between projective points
    (a.0 * b.1 - a.1 * b.0).abs()
}

fn root_gap(ceiling: &[(f64, f64)], floor: &[(f64, f64)]) -> f64 {
    if ceiling.is_empty() || floor.is_empty() {
        return f64::INFINITY;
    }
    ceiling
        .iter()
        .chain(floor)
        .map(|&r| {
            let other = if ceiling.contains(&r) { floor } else { ceiling };
            other
                .iter()
                .map(|&o| homogeneous_gap(r, o))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Shared outcome of the null-space search.
struct ParallelFit {
    vector: DVector<f64>,
    lambda: f64,
    residual: f64,
    root_gap: f64,
}

/// Searches the `W0 + lambda W1` pencil for the candidate whose `u`, `v`, `w`
/// are parallel, keeping only `h_c > h_f`, and returns the one with smallest
/// residual. `evaluate` receives the candidate rescaled to `|u| = 1`.
fn resolve_parallel(
    w0: &DVector<f64>,
    w1: &DVector<f64>,
    evaluate: impl Fn(&DVector<f64>) -> f64,
) -> Result<ParallelFit, SolverError> {
    let rc = parallelism_roots(w0, w1, 2);
    let rf = parallelism_roots(w0, w1, 4);
    if rc.is_empty() && rf.is_empty() {
        return Err(SolverError::ComplexRoots);
    }
    let gap = root_gap(&rc, &rf);
    let mut best: Option<ParallelFit> = None;
    for &(alpha, beta) in rc.iter().chain(&rf) {
        let mut w = w0 * alpha + w1 * beta;
        let s = w[0].hypot(w[1]);
        if s < 1e-12 {
            continue;
        }
        w /= s;
        let u = Vector2::new(w[0], w[1]);
        let h_c = u.dot(&Vector2::new(w[2], w[3]));
        let h_f = u.dot(&Vector2::new(w[4], w[5]));
        if !(h_c > h_f) {
            continue;
        }
        let residual = evaluate(&w);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(ParallelFit {
                vector: w,
                lambda: if alpha == 0.0 { f64::INFINITY } else { beta / alpha },
                residual,
                root_gap: gap,
            });
        }
    }
    best.ok_or(SolverError::NoValidRoot)
}

fn wall_system(rays: &RaySet) -> DMatrix<f64> {
    let mut rows = Vec::with_capacity(rays.len() * 7);
    for r in &rays.ceiling {
        push_row(&mut rows, 7, along_u_coeffs(r), 2, 6);
    }
    for r in &rays.floor {
        push_row(&mut rows, 7, along_u_coeffs(r), 4, 6);
    }
    matrix_from_rows(rows, 7)
}

fn wall_from_vector(w: &DVector<f64>) -> Wall {
    let u = Vector2::new(w[0], w[1]);
    Wall::new(u, w[6], u.dot(&Vector2::new(w[2], w[3])), u.dot(&Vector2::new(w[4], w[5])))
}

/// Solves a stacked single-wall system `A W = 0`. Exposed for tests of the
/// homogeneous invariance; rows are renormalised internally.
pub fn solve_wall_system(a: &DMatrix<f64>, rays: &RaySet) -> Result<WallSolution, SolverError> {
    if a.ncols() != 7 {
        return Err(SolverError::Mismatch("wall system needs 7 columns".into()));
    }
    let mut a = a.clone();
    for mut row in a.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    let (vecs, sv) = right_singular_vectors(&a);
    // three columns leave a two-dimensional null space, more columns one
    if sv[0] == 0.0 || sv[4] < RANK_TOLERANCE * sv[0] {
        return Err(SolverError::RankDeficient);
    }
    let fit = resolve_parallel(&vecs[0], &vecs[1], |w| wall_from_vector(w).rms_residual(rays))?;
    let mut basis = [[0.0; 7]; 2];
    for k in 0..7 {
        basis[0][k] = vecs[0][k];
        basis[1][k] = vecs[1][k];
    }
    Ok(WallSolution {
        wall: wall_from_vector(&fit.vector),
        lambda: fit.lambda,
        basis,
        residual: fit.residual,
        root_gap: fit.root_gap,
    })
}

/// Independent extraction of one vertical wall from its ceiling and floor rays.
pub fn extract_wall(rays: &RaySet) -> Result<WallSolution, SolverError> {
    let got = rays.ceiling.len().min(rays.floor.len());
    if got < 3 {
        return Err(SolverError::InsufficientRays { needed: 3, got });
    }
    solve_wall_system(&wall_system(rays), rays)
}

/// Output of [`solve_manhattan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManhattanSolution {
    /// Shared direction of label-0 walls; label-1 walls run along its perpendicular.
    pub axis: Vector2<f64>,
    pub h_c: f64,
    pub h_f: f64,
    /// Unsigned wall-plane distances, one per input wall.
    pub d: Vec<f64>,
    /// Per-wall walls with `d >= 0`.
    pub walls: Vec<Wall>,
    pub lambda: f64,
    pub residual: f64,
    pub root_gap: f64,
}

fn manhattan_walls(w: &DVector<f64>, labels: &[u8]) -> (Vector2<f64>, f64, f64, Vec<Wall>) {
    let u = Vector2::new(w[0], w[1]);
    let perp = Vector2::new(-u.y, u.x);
    let h_c = u.dot(&Vector2::new(w[2], w[3]));
    let h_f = u.dot(&Vector2::new(w[4], w[5]));
    let walls = labels
        .iter()
        .enumerate()
        .map(|(i, &lab)| Wall::new(if lab == 0 { u } else { perp }, w[6 + i], h_c, h_f))
        .collect();
    (u, h_c, h_f, walls)
}

fn joint_residual(walls: &[Wall], sets: &[RaySet]) -> f64 {
    let (mut sq, mut n) = (0.0, 0usize);
    for (wall, set) in walls.iter().zip(sets) {
        let r = wall.rms_residual(set);
        sq += r * r * set.len() as f64;
        n += set.len();
    }
    (sq / n.max(1) as f64).sqrt()
}

/// Joint Manhattan solve: one shared direction pair, shared heights and one
/// distance per wall. `labels[i]` is 0 for walls along the axis and 1 for
/// walls along its perpendicular.
pub fn solve_manhattan(walls: &[RaySet], labels: &[u8]) -> Result<ManhattanSolution, SolverError> {
    if walls.len() != labels.len() || walls.is_empty() {
        return Err(SolverError::Mismatch(format!(
            "{} ray sets for {} labels",
            walls.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(SolverError::Mismatch("labels must be 0 or 1".into()));
    }
    let n = 6 + walls.len();
    let mut rows = Vec::new();
    for (i, (set, &lab)) in walls.iter().zip(labels).enumerate() {
        let coeffs = if lab == 0 { along_u_coeffs } else { along_perp_coeffs };
        for r in &set.ceiling {
            push_row(&mut rows, n, coeffs(r), 2, 6 + i);
        }
        for r in &set.floor {
            push_row(&mut rows, n, coeffs(r), 4, 6 + i);
        }
    }
    let a = matrix_from_rows(rows, n);
    if a.nrows() < n - 1 {
        return Err(SolverError::RankDeficient);
    }
    let (vecs, sv) = right_singular_vectors(&a);
    if sv[0] == 0.0 || sv[n - 3] < RANK_TOLERANCE * sv[0] {
        return Err(SolverError::RankDeficient);
    }
    let fit = resolve_parallel(&vecs[0], &vecs[1], |w| {
        let (_, _, _, ws) = manhattan_walls(w, labels);
        joint_residual(&ws, walls)
    })?;
    let (mut axis, h_c, h_f, ws) = manhattan_walls(&fit.vector, labels);
    if axis.x < 0.0 || (axis.x == 0.0 && axis.y < 0.0) {
        axis = -axis;
    }
    Ok(ManhattanSolution {
        axis,
        h_c,
        h_f,
        d: ws.iter().map(|w| w.d).collect(),
        walls: ws,
        lambda: fit.lambda,
        residual: fit.residual,
        root_gap: fit.root_gap,
    })
}

/// Output of [`solve_atlanta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlantaSolution {
    pub h_c: f64,
    pub h_f: f64,
    pub d: Vec<f64>,
    pub walls: Vec<Wall>,
    pub residual: f64,
}

/// Joint heights and distances for walls of known horizontal direction.
pub fn solve_atlanta(walls: &[RaySet], directions: &[Vector2<f64>]) -> Result<AtlantaSolution, SolverError> {
    if walls.len() != directions.len() || walls.is_empty() {
        return Err(SolverError::Mismatch(format!(
            "{} ray sets for {} directions",
            walls.len(),
            directions.len()
        )));
    }
    let n = 3 + walls.len();
    let mut rows = Vec::new();
    for (i, (set, dir)) in walls.iter().zip(directions).enumerate() {
        let dir = dir.normalize();
        let theta = dir.y.atan2(dir.x);
        // rays expressed in the wall frame {e1, e2, e3}
        let to_local = Rotation3::from_axis_angle(&Vector3::z_axis(), -theta);
        let mut push = |r: &PluckerRay, slot: usize| {
            let xi = to_local * r.xi();
            let xb = to_local * r.xibar();
            let mut row = vec![0.0; n];
            row[0] = xb.x;
            row[slot] = xi.y;
            row[3 + i] = -xi.z;
            normalized_row(&mut row);
            rows.extend(row);
        };
        for r in &set.ceiling {
            push(r, 1);
        }
        for r in &set.floor {
            push(r, 2);
        }
    }
    let a = matrix_from_rows(rows, n);
    if a.nrows() < n - 1 {
        return Err(SolverError::RankDeficient);
    }
    let (vecs, sv) = right_singular_vectors(&a);
    if sv[0] == 0.0 || sv[n - 2] < RANK_TOLERANCE * sv[0] {
        return Err(SolverError::RankDeficient);
    }
    let x = &vecs[0];
    if x[0].abs() < 1e-12 * x.norm() {
        return Err(SolverError::DehomogenizationFailure(x[0]));
    }
    let x = x / x[0];
    let (h_c, h_f) = (x[1], x[2]);
    let ws: Vec<Wall> = directions
        .iter()
        .enumerate()
        .map(|(i, dir)| Wall::new(*dir, x[3 + i], h_c, h_f))
        .collect();
    Ok(AtlantaSolution {
        h_c,
        h_f,
        d: ws.iter().map(|w| w.d).collect(),
        residual: joint_residual(&ws, walls),
        walls: ws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraModel;
    use approx::assert_abs_diff_eq;

    fn rays_for(cam: &CameraModel, wall: &Wall, azimuths: &[f64]) -> RaySet {
        let mut set = RaySet::default();
        for (k, &a) in azimuths.iter().enumerate() {
            let rho = wall.radial_hit(a).unwrap();
            let ray = |h: f64| cam.ray_from_angles(h.atan2(rho - cam.rc()), a);
            set.push_column(k, ray(wall.h_c), ray(wall.h_f));
        }
        set
    }

    #[test]
    fn wall_lines_satisfy_quadric() {
        let w = Wall::from_angle(0.7, 2.5, 1.3, -1.1);
        assert_abs_diff_eq!(w.ceiling_line().quadric(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.floor_line().quadric(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.ceiling_line().depth(), 2.5f64.hypot(1.3), epsilon = 1e-12);
    }

    #[test]
    fn wall_sign_convention() {
        let w = Wall::new(Vector2::new(1.0, 0.0), -2.0, 1.0, -1.0);
        assert_eq!(w.d, 2.0);
        assert_eq!(w.u, Vector2::new(-1.0, 0.0));
        let ws = Wall::through_segment(Vector2::new(2.0, -1.0), Vector2::new(2.0, 1.0), 1.0, -1.0);
        assert_abs_diff_eq!(ws.d, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ws.normal().x, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn same_column_rays_are_rank_deficient() {
        let cam = CameraModel::default();
        let wall = Wall::new(Vector2::new(0.0, -1.0), 2.0, 1.5, -1.2);
        let set = rays_for(&cam, &wall, &[0.0, 0.0, 0.0]);
        assert_eq!(extract_wall(&set), Err(SolverError::RankDeficient));
    }

    #[test]
    fn too_few_rays() {
        let cam = CameraModel::default();
        let wall = Wall::new(Vector2::new(0.0, -1.0), 2.0, 1.5, -1.2);
        let set = rays_for(&cam, &wall, &[0.0, 0.1]);
        assert!(matches!(extract_wall(&set), Err(SolverError::InsufficientRays { .. })));
    }

    #[test]
    fn homogeneous_scaling_of_system_is_irrelevant() {
        let cam = CameraModel::default();
        let wall = Wall::from_angle(0.4, 2.2, 1.4, -1.0);
        let base = wall.theta() + std::f64::consts::FRAC_PI_2;
        let set = rays_for(&cam, &wall, &[base - 0.4, base - 0.1, base + 0.2, base + 0.5]);
        let a = wall_system(&set);
        let s1 = solve_wall_system(&a, &set).unwrap();
        for k in [1e-6, -3.0, 250.0] {
            let s2 = solve_wall_system(&(&a * k), &set).unwrap();
            assert_abs_diff_eq!((s1.wall.u - s2.wall.u).norm(), 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(s1.wall.d, s2.wall.d, epsilon = 1e-10);
            assert_abs_diff_eq!(s1.wall.h_c, s2.wall.h_c, epsilon = 1e-10);
            assert_abs_diff_eq!(s1.wall.h_f, s2.wall.h_f, epsilon = 1e-10);
        }
    }

    #[test]
    fn linear_lambda_branch_has_infinite_root() {
        let w0 = DVector::from_vec(vec![1.0, 0.0, 2.0, 1.0, -1.0, 0.0, 1.0]);
        let w1 = DVector::from_vec(vec![1.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
        let roots = parallelism_roots(&w0, &w1, 2);
        assert!(roots.contains(&(0.0, 1.0)));
        assert!(roots.contains(&(1.0, -1.0)));
    }

    #[test]
    fn atlanta_single_wall() {
        let cam = CameraModel::default();
        let wall = Wall::from_angle(-0.3, 3.0, 1.2, -1.4);
        let base = wall.theta() + std::f64::consts::FRAC_PI_2;
        let set = rays_for(&cam, &wall, &[base - 0.3, base, base + 0.3]);
        let sol = solve_atlanta(&[set], &[wall.u]).unwrap();
        assert_abs_diff_eq!(sol.h_c, 1.2, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.h_f, -1.4, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.d[0], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn mismatched_inputs() {
        assert!(matches!(solve_manhattan(&[], &[]), Err(SolverError::Mismatch(_))));
        assert!(matches!(
            solve_atlanta(&[RaySet::default()], &[]),
            Err(SolverError::Mismatch(_))
        ));
    }
}
