use nalgebra::{Matrix2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{final_adjustment, AdjustConfig, AdjustInput, AngleMode, BoundaryMap, PipelineError, PlanLine, Segment, Stage};
use crate::camera::{CameraModel, Point3H};
use crate::solvers::{extract_wall, solve_atlanta, RaySet, SolverError, Wall, WallSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub success_prob: f64,
    pub outlier_rate: f64,
    /// Columns per hypothesis; each column contributes one ceiling and one floor ray.
    pub sample_size: usize,
    /// Maximum row residual of an inlier column, pixels.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            success_prob: 0.9999,
            outlier_rate: 0.2,
            sample_size: 3,
            inlier_threshold: 1.5,
            seed: 0,
        }
    }
}

impl RansacConfig {
    /// Checks the configuration for use by [`ransac_fit_walls`].
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.sample_size < 3 {
            return Err(PipelineError::DegenerateConfig(
                "sample size must be at least 3 columns".into(),
            ));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(PipelineError::DegenerateConfig("inlier threshold must be positive".into()));
        }
        required_hypotheses(self).map(|_| ())
    }
}

/// `log(1 - P) / log(1 - (1 - eps)^k)`, unrounded.
pub fn required_hypotheses(cfg: &RansacConfig) -> Result<f64, PipelineError> {
    let (p, eps, k) = (cfg.success_prob, cfg.outlier_rate, cfg.sample_size);
    let bad = |m: &str| Err(PipelineError::DegenerateConfig(m.to_string()));
    if !(p > 0.0 && p < 1.0) {
        return bad("success probability must be in (0, 1)");
    }
    if !(0.0..1.0).contains(&eps) {
        return bad("outlier rate must be in [0, 1)");
    }
    if k == 0 {
        return bad("sample size must be positive");
    }
    let good = (1.0 - eps).powi(k as i32);
    if good >= 1.0 {
        return Ok(1.0);
    }
    let denom = (-good).ln_1p();
    if good <= 0.0 || denom == 0.0 || !denom.is_finite() {
        return bad("(1 - eps)^k underflows");
    }
    let n = (1.0 - p).ln() / denom;
    if !n.is_finite() {
        return bad("hypothesis count is not finite");
    }
    Ok(n)
}

/// Result of the robust fit of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallFit {
    pub solution: WallSolution,
    pub columns: Vec<usize>,
    /// Inlier flag per entry of `columns`.
    pub inliers: Vec<bool>,
    pub inlier_ratio: f64,
    pub hypotheses: usize,
}

impl WallFit {
    pub fn inlier_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .zip(&self.inliers)
            .filter(|(_, &ok)| ok)
            .map(|(&c, _)| c)
            .collect()
    }
}

/// Smallest gap, as a fraction of `Rc`, between the optical-center circle and
/// a wall point counted as an inlier. Lines grazing the circle pass near every
/// ray origin and would otherwise fit arbitrary rows.
pub const MIN_STANDOFF: f64 = 0.05;

/// Largest of the ceiling and floor row residuals of `wall` at column `j`.
pub(crate) fn column_residual(wall: &Wall, bm: &BoundaryMap, cam: &CameraModel, j: usize) -> f64 {
    let a = cam.column_azimuth(j);
    let Some(rho) = wall.radial_hit(a) else {
        return f64::INFINITY;
    };
    if rho - cam.rc() < MIN_STANDOFF * cam.rc() {
        return f64::INFINITY;
    }
    let row = |h: f64| {
        cam.project_point(Point3H::euclidean(Vector3::new(rho * a.cos(), rho * a.sin(), h)))
            .map(|p| p.i)
    };
    match (row(wall.h_c), row(wall.h_f)) {
        (Ok(c), Ok(f)) => (c - bm.ceiling_row[j]).abs().max((f - bm.floor_row[j]).abs()),
        _ => f64::INFINITY,
    }
}

/// One column from each of `k` equal strata of the segment, so each
/// hypothesis spans the whole wall.
fn stratified_sample(rng: &mut ChaCha8Rng, cols: &[usize], k: usize) -> Vec<usize> {
    let n = cols.len();
    (0..k)
        .map(|s| {
            let (lo, hi) = (s * n / k, (s + 1) * n / k);
            cols[rng.random_range(lo..hi.max(lo + 1))]
        })
        .collect()
}

struct Scored {
    solution: WallSolution,
    inliers: Vec<bool>,
    count: usize,
    rms: f64,
}

fn score(sol: WallSolution, bm: &BoundaryMap, cam: &CameraModel, columns: &[usize], thr: f64) -> Scored {
    let res: Vec<f64> = columns.iter().map(|&j| column_residual(&sol.wall, bm, cam, j)).collect();
    let inliers: Vec<bool> = res.iter().map(|&r| r < thr).collect();
    let count = inliers.iter().filter(|&&b| b).count();
    let sq: f64 = res.iter().zip(&inliers).filter(|(_, &ok)| ok).map(|(r, _)| r * r).sum();
    Scored {
        solution: sol,
        inliers,
        count,
        rms: if count > 0 { (sq / count as f64).sqrt() } else { f64::INFINITY },
    }
}

/// More inliers first, then lower inlier RMS. Ties keep the earlier candidate.
fn better(a: &Scored, b: &Scored) -> bool {
    a.count > b.count || (a.count == b.count && a.rms < b.rms)
}

/// Refits on the consensus set while that improves the score.
fn local_refit(mut best: Scored, bm: &BoundaryMap, cam: &CameraModel, cols: &[usize], thr: f64, k: usize) -> Scored {
    for _ in 0..5 {
        let inl: Vec<usize> = cols.iter().zip(&best.inliers).filter(|(_, &b)| b).map(|(&c, _)| c).collect();
        if inl.len() < k {
            break;
        }
        let Ok(sol) = extract_wall(&bm.ray_set(cam, &inl)) else {
            break;
        };
        let mut s = score(sol, bm, cam, cols, thr);
        if let Some(r) = refine(&s.solution, bm, cam, &inl) {
            let r = score(r, bm, cam, cols, thr);
            if !better(&s, &r) {
                s = r;
            }
        }
        if !better(&s, &best) {
            break;
        }
        best = s;
    }
    best
}

/// Reprojection refinement of a single wall on the given columns.
fn refine(sol: &WallSolution, bm: &BoundaryMap, cam: &CameraModel, cols: &[usize]) -> Option<WallSolution> {
    let line = PlanLine::from_wall(&sol.wall);
    let input = AdjustInput {
        lines: vec![(line.alpha, line.d)],
        h_c: sol.wall.h_c,
        h_f: sol.wall.h_f,
        observations: vec![cols.to_vec()],
        anchors: Vec::new(),
        mode: AngleMode::PerWall,
    };
    let cfg = AdjustConfig {
        max_iterations: 20,
        tolerance: 1e-8,
        ..AdjustConfig::default()
    };
    let out = final_adjustment(&input, bm, cam, &cfg);
    let (alpha, d) = out.lines[0];
    if !(out.h_c > out.h_f) || !d.is_finite() {
        return None;
    }
    let (s, c) = alpha.sin_cos();
    let wall = Wall::new(Vector2::new(s, -c), d, out.h_c, out.h_f);
    let rays = bm.ray_set(cam, cols);
    Some(WallSolution {
        wall,
        residual: wall.rms_residual(&rays),
        ..sol.clone()
    })
}

/// Plan-line fit of columns placed at floor height `-s`: `(normal, d, flatness)`.
fn collinear_fit(pts: &[Vector2<f64>]) -> Option<(Vector2<f64>, f64, f64)> {
    let n = pts.len() as f64;
    let c = pts.iter().sum::<Vector2<f64>>() / n;
    let cov = pts.iter().fold(Matrix2::zeros(), |m, p| m + (p - c) * (p - c).transpose());
    let eig = cov.symmetric_eigen();
    let (lo, hi) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    if !(eig.eigenvalues[hi] > 0.0) {
        return None;
    }
    let normal: Vector2<f64> = eig.eigenvectors.column(lo).into();
    Some((normal, normal.dot(&c), eig.eigenvalues[lo].max(0.0) / eig.eigenvalues[hi]))
}

/// Wall from boundary elevations alone. The ceiling-to-floor height ratio
/// follows from each column's elevations; the scale is the floor depth that
/// makes the footprint points most collinear.
fn geometric_init(bm: &BoundaryMap, cam: &CameraModel, cols: &[usize]) -> Option<WallSolution> {
    let rc = cam.rc();
    let obs: Vec<(Vector2<f64>, f64, f64)> = cols
        .iter()
        .filter_map(|&j| {
            let a = cam.column_azimuth(j);
            let tc = cam.elevation_at(bm.ceiling_row[j]).tan();
            let tf = cam.elevation_at(bm.floor_row[j]).tan();
            (tc > 0.0 && tf < 0.0).then(|| (Vector2::new(a.cos(), a.sin()), tc, tf))
        })
        .collect();
    if obs.len() < 3 {
        return None;
    }
    let mut ratios: Vec<f64> = obs.iter().map(|&(_, tc, tf)| -tc / tf).collect();
    ratios.sort_by(f64::total_cmp);
    let q = ratios[ratios.len() / 2];
    let points = |s: f64| -> Vec<Vector2<f64>> {
        obs.iter()
            .flat_map(|&(dir, tc, tf)| [dir * (rc - s / tf), dir * (rc + q * s / tc)])
            .collect()
    };
    let flatness = |s: f64| collinear_fit(&points(s)).map_or(f64::INFINITY, |f| f.2);
    // coarse log grid, then golden-section search around the best node
    let grid: Vec<f64> = (0..=240).map(|i| 0.02 * 10f64.powf(i as f64 / 80.0)).collect();
    let best = (0..grid.len()).min_by(|&a, &b| flatness(grid[a]).total_cmp(&flatness(grid[b])))?;
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if flatness(x1) < flatness(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let s = 0.5 * (lo + hi);
    let (mut normal, mut d, _) = collinear_fit(&points(s))?;
    if d < 0.0 {
        normal = -normal;
        d = -d;
    }
    let wall = Wall::new(Vector2::new(normal.y, -normal.x), d, q * s, -s);
    Some(WallSolution {
        wall,
        lambda: 0.0,
        basis: [[0.0; 7]; 2],
        residual: wall.rms_residual(&bm.ray_set(cam, cols)),
        root_gap: 0.0,
    })
}

fn fit_segment(
    index: usize,
    seg: &Segment,
    bm: &BoundaryMap,
    cam: &CameraModel,
    cfg: &RansacConfig,
    n_hyp: usize,
) -> Result<WallFit, PipelineError> {
    let cols = &seg.columns;
    let k = cfg.sample_size;
    let fail = |source: SolverError| PipelineError::Solver {
        stage: Stage::Ransac,
        wall: index,
        source,
    };
    if cols.len() < k {
        return Err(fail(SolverError::InsufficientRays {
            needed: k,
            got: cols.len(),
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let thr = cfg.inlier_threshold;
    let mut best: Option<Scored> = None;
    let mut last_err = None;
    if let Some(init) = geometric_init(bm, cam, cols).and_then(|g| refine(&g, bm, cam, cols)) {
        best = Some(local_refit(score(init, bm, cam, cols, thr), bm, cam, cols, thr, k));
    }
    // the whole segment competes as one extra hypothesis
    let candidates = std::iter::once(cols.clone()).chain((0..n_hyp).map(|_| stratified_sample(&mut rng, cols, k)));
    for picked in candidates {
        // the algebraic solve and the elevation-based construction fail on
        // different geometries, so both compete
        let algebraic = extract_wall(&bm.ray_set(cam, &picked)).map_err(|e| last_err = Some(e)).ok();
        for sol in algebraic.into_iter().chain(geometric_init(bm, cam, &picked)) {
            let s = score(sol, bm, cam, cols, thr);
            if best.as_ref().is_none_or(|b| better(&s, b)) {
                best = Some(local_refit(s, bm, cam, cols, thr, k));
            }
        }
    }
    let Some(best) = best else {
        return Err(fail(last_err.unwrap_or(SolverError::NoValidRoot)));
    };
    let ratio = best.count as f64 / cols.len() as f64;
    if ratio < 0.5 {
        return Err(PipelineError::NoConsensus { wall: index, ratio });
    }
    Ok(WallFit {
        solution: best.solution,
        columns: cols.clone(),
        inliers: best.inliers,
        inlier_ratio: ratio,
        hypotheses: n_hyp,
    })
}

/// Fit of a segment's plan line with the ceiling and floor heights fixed.
/// Each column then gives two floor-plan points directly, and a pair of
/// columns is a minimal sample.
fn fit_with_heights(
    index: usize,
    seg: &Segment,
    bm: &BoundaryMap,
    cam: &CameraModel,
    cfg: &RansacConfig,
    h_c: f64,
    h_f: f64,
) -> Option<WallFit> {
    let cols = &seg.columns;
    let rc = cam.rc();
    let points: Vec<(usize, [Vector2<f64>; 2])> = cols
        .iter()
        .filter_map(|&j| {
            let a = cam.column_azimuth(j);
            let dir = Vector2::new(a.cos(), a.sin());
            let tc = cam.elevation_at(bm.ceiling_row[j]).tan();
            let tf = cam.elevation_at(bm.floor_row[j]).tan();
            (tc > 0.0 && tf < 0.0).then(|| (j, [dir * (rc + h_c / tc), dir * (rc + h_f / tf)]))
        })
        .collect();
    if points.len() < 2 {
        return None;
    }
    let wall_through = |pts: &[Vector2<f64>]| -> Option<WallSolution> {
        let (mut normal, mut d, _) = collinear_fit(pts)?;
        if d < 0.0 {
            normal = -normal;
            d = -d;
        }
        let wall = Wall::new(Vector2::new(normal.y, -normal.x), d, h_c, h_f);
        Some(WallSolution {
            wall,
            lambda: 0.0,
            basis: [[0.0; 7]; 2],
            residual: 0.0,
            root_gap: 0.0,
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream((1 << 32) | index as u64);
    let thr = cfg.inlier_threshold;
    let n_hyp = required_hypotheses(&RansacConfig {
        sample_size: 2,
        ..cfg.clone()
    })
    .ok()?
    .ceil() as usize;
    let mut best: Option<Scored> = None;
    for _ in 0..n_hyp {
        let pick = stratified_sample(&mut rng, &(0..points.len()).collect::<Vec<_>>(), 2);
        let pts: Vec<Vector2<f64>> = pick.iter().flat_map(|&k| points[k].1).collect();
        let Some(sol) = wall_through(&pts) else {
            continue;
        };
        let mut s = score(sol, bm, cam, cols, thr);
        // iterate the line fit on the consensus set
        for _ in 0..5 {
            let pts: Vec<Vector2<f64>> = points
                .iter()
                .filter(|(j, _)| cols.iter().position(|c| c == j).is_some_and(|k| s.inliers[k]))
                .flat_map(|(_, p)| *p)
                .collect();
            let Some(next) = (pts.len() >= 4).then(|| wall_through(&pts)).flatten() else {
                break;
            };
            let next = score(next, bm, cam, cols, thr);
            if !better(&next, &s) {
                break;
            }
            s = next;
        }
        if best.as_ref().is_none_or(|b| better(&s, b)) {
            best = Some(s);
        }
    }
    let best = best?;
    let rays = bm.ray_set(cam, &cols.iter().zip(&best.inliers).filter(|(_, &b)| b).map(|(&c, _)| c).collect::<Vec<_>>());
    let mut solution = best.solution;
    solution.residual = solution.wall.rms_residual(&rays);
    Some(WallFit {
        solution,
        columns: cols.clone(),
        inlier_ratio: best.count as f64 / cols.len() as f64,
        inliers: best.inliers,
        hypotheses: n_hyp,
    })
}

/// Heights of a fit disagree with the consensus by more than this fraction
/// of the consensus room height.
const HEIGHT_TOLERANCE: f64 = 0.2;

/// Robust single-wall fit of every segment. Each segment draws from its own
/// seeded stream, so the result does not depend on the thread count.
///
/// Segments that reach no consensus, or whose heights disagree with the
/// median heights of the other walls, are refit with those heights fixed.
pub fn ransac_fit_walls(
    bm: &BoundaryMap,
    segments: &[Segment],
    cam: &CameraModel,
    cfg: &RansacConfig,
) -> Result<Vec<WallFit>, PipelineError> {
    cfg.validate()?;
    let n_hyp = required_hypotheses(cfg)?.ceil() as usize;
    let first: Vec<Result<WallFit, PipelineError>> = segments
        .par_iter()
        .enumerate()
        .map(|(i, seg)| fit_segment(i, seg, bm, cam, cfg, n_hyp))
        .collect();
    let good: Vec<&WallFit> = first.iter().filter_map(|f| f.as_ref().ok()).collect();
    if good.is_empty() {
        return first.into_iter().collect();
    }
    // single walls trade scale for height, so the shared heights come from a
    // joint solve over every wall that reached consensus
    let sets: Vec<RaySet> = good.iter().map(|f| bm.ray_set(cam, &f.inlier_columns())).collect();
    let dirs: Vec<Vector2<f64>> = good.iter().map(|f| f.solution.wall.u).collect();
    let (h_c, h_f) = match solve_atlanta(&sets, &dirs) {
        Ok(sol) if sol.h_c > 0.0 && sol.h_f < 0.0 => (sol.h_c, sol.h_f),
        _ => {
            let median = |mut v: Vec<f64>| {
                v.sort_by(f64::total_cmp);
                v[v.len() / 2]
            };
            (
                median(good.iter().map(|f| f.solution.wall.h_c).collect()),
                median(good.iter().map(|f| f.solution.wall.h_f).collect()),
            )
        }
    };
    let tol = HEIGHT_TOLERANCE * (h_c - h_f);
    first
        .into_par_iter()
        .enumerate()
        .map(|(i, fit)| {
            let retry = match &fit {
                Ok(f) => (f.solution.wall.h_c - h_c).abs() > tol || (f.solution.wall.h_f - h_f).abs() > tol,
                Err(PipelineError::NoConsensus { .. }) => true,
                Err(_) => false,
            };
            if !retry {
                return fit;
            }
            match fit_with_heights(i, &segments[i], bm, cam, cfg, h_c, h_f) {
                Some(f) if f.inlier_ratio >= 0.5 => Ok(f),
                _ => fit,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(p: f64, eps: f64, k: usize) -> RansacConfig {
        RansacConfig {
            success_prob: p,
            outlier_rate: eps,
            sample_size: k,
            ..RansacConfig::default()
        }
    }

    #[test]
    fn hypothesis_counts() {
        assert_abs_diff_eq!(required_hypotheses(&cfg(0.9999, 0.2, 3)).unwrap(), 12.8378, epsilon = 1e-4);
        assert_abs_diff_eq!(required_hypotheses(&cfg(0.9999, 0.6, 6)).unwrap(), 2244.0099, epsilon = 1e-3);
        assert_abs_diff_eq!(required_hypotheses(&cfg(0.9999, 0.5, 2)).unwrap(), 32.0157, epsilon = 1e-4);
        assert_eq!(required_hypotheses(&cfg(0.9999, 0.0, 3)).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_configs() {
        assert!(required_hypotheses(&cfg(1.0, 0.2, 3)).is_err());
        assert!(required_hypotheses(&cfg(0.9, 1.0, 3)).is_err());
        assert!(required_hypotheses(&cfg(0.9, 0.2, 0)).is_err());
        assert!(cfg(0.9, 0.2, 2).validate().is_err());
        assert!(matches!(
            required_hypotheses(&cfg(0.9999, 0.999_999, 400)),
            Err(PipelineError::DegenerateConfig(_))
        ));
    }
}
