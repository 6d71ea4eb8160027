//! Plücker line algebra.
//!
//! A line is stored as `(direction, moment)` with `moment = p x direction`
//! for any point `p` on the line. Two lines are coplanar exactly when their
//! side product vanishes.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::right_singular_vectors;

/// Relative singular-value threshold for the four-ray rank test.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Normalised side product below which two lines count as coplanar.
pub const COPLANAR_TOLERANCE: f64 = 1e-6;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PluckerError {
    #[error("rays do not give four independent constraints")]
    DegenerateRays,
    #[error("no real line meets all four rays")]
    NoRealSolution,
    #[error("lines are parallel")]
    ParallelLines,
    #[error("lines are not coplanar (normalised side {0:.3e})")]
    NotCoplanar(f64),
}

/// Anything with Plücker coordinates.
pub trait LineCoords {
    fn direction(&self) -> Vector3<f64>;
    fn moment(&self) -> Vector3<f64>;

    fn as_line(&self) -> PluckerLine {
        PluckerLine {
            l: self.direction(),
            lbar: self.moment(),
        }
    }
}

/// Side operator `l_a . lbar_b + lbar_a . l_b`.
pub fn side(a: &impl LineCoords, b: &impl LineCoords) -> f64 {
    a.direction().dot(&b.moment()) + a.moment().dot(&b.direction())
}

/// A projecting ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PluckerRay {
    xi: Vector3<f64>,
    xibar: Vector3<f64>,
}

impl PluckerRay {
    /// Builds a ray from raw coordinates, rescaling so the direction is unit.
    pub fn from_parts(xi: Vector3<f64>, xibar: Vector3<f64>) -> Self {
        let n = xi.norm();
        Self {
            xi: xi / n,
            xibar: xibar / n,
        }
    }

    pub fn through(origin: Vector3<f64>, direction: Vector3<f64>) -> Self {
        let d = direction.normalize();
        Self {
            xi: d,
            xibar: origin.cross(&d),
        }
    }

    pub fn xi(&self) -> Vector3<f64> {
        self.xi
    }
    pub fn xibar(&self) -> Vector3<f64> {
        self.xibar
    }

    /// Point of the ray closest to the origin.
    pub fn origin_foot(&self) -> Vector3<f64> {
        self.xi.cross(&self.xibar)
    }

    pub fn distance_to_point(&self, p: &Vector3<f64>) -> f64 {
        (p - self.origin_foot()).cross(&self.xi).norm()
    }
}

impl LineCoords for PluckerRay {
    fn direction(&self) -> Vector3<f64> {
        self.xi
    }
    fn moment(&self) -> Vector3<f64> {
        self.xibar
    }
}

/// A 3D line in Plücker coordinates, projective unless normalised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PluckerLine {
    pub l: Vector3<f64>,
    pub lbar: Vector3<f64>,
}

impl PluckerLine {
    pub fn new(l: Vector3<f64>, lbar: Vector3<f64>) -> Self {
        Self { l, lbar }
    }

    pub fn from_point_direction(p: Vector3<f64>, dir: Vector3<f64>) -> Self {
        Self {
            l: dir,
            lbar: p.cross(&dir),
        }
    }

    pub fn through_points(a: Vector3<f64>, b: Vector3<f64>) -> Self {
        Self::from_point_direction(a, b - a)
    }

    /// Rescaled to unit direction.
    pub fn normalized(&self) -> Self {
        let n = self.l.norm();
        Self {
            l: self.l / n,
            lbar: self.lbar / n,
        }
    }

    /// Plücker quadric `l . lbar`; zero for real lines.
    pub fn quadric(&self) -> f64 {
        self.l.dot(&self.lbar)
    }

    /// Distance from the origin to the line.
    pub fn depth(&self) -> f64 {
        self.lbar.norm() / self.l.norm()
    }

    /// Point of the line closest to the origin.
    pub fn origin_foot(&self) -> Vector3<f64> {
        self.l.cross(&self.lbar) / self.l.norm_squared()
    }

    /// `origin_foot + s * unit_direction`.
    pub fn point_at(&self, s: f64) -> Vector3<f64> {
        self.origin_foot() + self.l.normalize() * s
    }

    pub fn distance_to_point(&self, p: &Vector3<f64>) -> f64 {
        (p - self.origin_foot()).cross(&self.l.normalize()).norm()
    }
}

impl LineCoords for PluckerLine {
    fn direction(&self) -> Vector3<f64> {
        self.l
    }
    fn moment(&self) -> Vector3<f64> {
        self.lbar
    }
}

/// Lines meeting four rays: the real intersections of the 2D null space of
/// the side constraints with the Plücker quadric. Returns one or two lines,
/// normalised to unit direction.
pub fn line_from_four_rays(rays: &[PluckerRay; 4]) -> Result<Vec<PluckerLine>, PluckerError> {
    let mut a = DMatrix::zeros(4, 6);
    for (r, ray) in rays.iter().enumerate() {
        // side(L, ray) = l . xibar + lbar . xi
        for k in 0..3 {
            a[(r, k)] = ray.xibar[k];
            a[(r, 3 + k)] = ray.xi[k];
        }
    }
    let (vecs, sv) = right_singular_vectors(&a);
    if sv[3] < RANK_TOLERANCE * sv[0] {
        return Err(PluckerError::DegenerateRays);
    }
    let split = |v: &nalgebra::DVector<f64>| {
        PluckerLine::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    };
    let p = split(&vecs[0]);
    let q = split(&vecs[1]);
    // quadric(alpha p + beta q) = alpha^2 qpp + 2 alpha beta qpq + beta^2 qqq
    let qpp = p.quadric();
    let qqq = q.quadric();
    let qpq = 0.5 * (p.l.dot(&q.lbar) + q.l.dot(&p.lbar));
    let mut coeffs: Vec<(f64, f64)> = Vec::new();
    if qqq.abs() >= qpp.abs() {
        // beta = t alpha: qqq t^2 + 2 qpq t + qpp = 0
        for t in real_quadratic_roots(qqq, 2.0 * qpq, qpp)? {
            coeffs.push((1.0, t));
        }
    } else {
        for t in real_quadratic_roots(qpp, 2.0 * qpq, qqq)? {
            coeffs.push((t, 1.0));
        }
    }
    let mut out: Vec<PluckerLine> = Vec::new();
    for (alpha, beta) in coeffs {
        let line = PluckerLine::new(alpha * p.l + beta * q.l, alpha * p.lbar + beta * q.lbar);
        if line.l.norm() < 1e-12 {
            continue;
        }
        let line = line.normalized();
        let dup = out.iter().any(|o| {
            (o.l - line.l).norm() + (o.lbar - line.lbar).norm() < 1e-12
                || (o.l + line.l).norm() + (o.lbar + line.lbar).norm() < 1e-12
        });
        if !dup {
            out.push(line);
        }
    }
    if out.is_empty() {
        return Err(PluckerError::NoRealSolution);
    }
    Ok(out)
}

fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Result<Vec<f64>, PluckerError> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Err(PluckerError::DegenerateRays);
    }
    let (a, b, c) = (a / scale, b / scale, c / scale);
    if a.abs() < 1e-14 {
        return if b.abs() < 1e-14 {
            Err(PluckerError::NoRealSolution)
        } else {
            Ok(vec![-c / b])
        };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < -1e-12 {
        return Err(PluckerError::NoRealSolution);
    }
    let s = disc.max(0.0).sqrt();
    // numerically stable pair
    let qq = -0.5 * (b + b.signum() * s);
    if qq == 0.0 {
        return Ok(vec![0.0]);
    }
    Ok(vec![qq / a, c / qq])
}

/// Point of `line` nearest to `ray` in Euclidean distance.
pub fn closest_point_on_line_to_ray(
    line: &PluckerLine,
    ray: &PluckerRay,
) -> Result<Vector3<f64>, PluckerError> {
    let d1 = line.l.normalize();
    let d2 = ray.xi();
    let n = d1.cross(&d2);
    if n.norm() < 1e-12 {
        return Err(PluckerError::ParallelLines);
    }
    let p1 = line.origin_foot();
    let p2 = ray.origin_foot();
    // s minimising |p1 + s d1 - (p2 + t d2)|
    let n2 = d2.cross(&n);
    let s = (p2 - p1).dot(&n2) / d1.dot(&n2);
    Ok(p1 + d1 * s)
}

/// Common point of two coplanar, non-parallel lines.
pub fn intersect_coplanar_lines(
    a: &PluckerLine,
    b: &PluckerLine,
) -> Result<Vector3<f64>, PluckerError> {
    let a = a.normalized();
    let b = b.normalized();
    if a.l.cross(&b.l).norm() < 1e-9 {
        return Err(PluckerError::ParallelLines);
    }
    let normalised = side(&a, &b).abs() / (1.0 + a.depth().max(b.depth()));
    if normalised >= COPLANAR_TOLERANCE {
        return Err(PluckerError::NotCoplanar(normalised));
    }
    let pa = closest_point_between(&a, &b);
    let pb = closest_point_between(&b, &a);
    Ok((pa + pb) * 0.5)
}

fn closest_point_between(a: &PluckerLine, b: &PluckerLine) -> Vector3<f64> {
    let (d1, d2) = (a.l, b.l);
    let n = d1.cross(&d2);
    let n2 = d2.cross(&n);
    let (p1, p2) = (a.origin_foot(), b.origin_foot());
    p1 + d1 * ((p2 - p1).dot(&n2) / d1.dot(&n2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn x_axis() -> PluckerLine {
        PluckerLine::from_point_direction(Vector3::zeros(), Vector3::x())
    }

    #[test]
    fn side_examples() {
        let y_axis = PluckerLine::from_point_direction(Vector3::zeros(), Vector3::y());
        assert_eq!(side(&x_axis(), &y_axis), 0.0);
        let lifted = PluckerLine::new(Vector3::y(), Vector3::new(-1.0, 0.0, 0.0));
        assert_abs_diff_eq!(side(&x_axis(), &lifted), -1.0, epsilon = 1e-15);
        let l = PluckerLine::through_points(Vector3::new(1.0, 2.0, 3.0), Vector3::new(-2.0, 0.5, 1.0));
        assert_abs_diff_eq!(side(&l, &l), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn closest_point_examples() {
        let ray = PluckerRay::through(Vector3::new(0.0, 0.0, 1.0), Vector3::y());
        let p = closest_point_on_line_to_ray(&x_axis(), &ray).unwrap();
        assert_abs_diff_eq!(p.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ray.distance_to_point(&p), 1.0, epsilon = 1e-15);

        let line = PluckerLine::through_points(Vector3::new(1.0, 1.0, 0.0), Vector3::new(2.0, 3.0, 1.0));
        let ray = PluckerRay::through(Vector3::new(0.0, 5.0, 2.0), Vector3::new(1.5, 2.0, 0.5) - Vector3::new(0.0, 5.0, 2.0));
        let p = closest_point_on_line_to_ray(&line, &ray).unwrap();
        assert_abs_diff_eq!((p - Vector3::new(1.5, 2.0, 0.5)).norm(), 0.0, epsilon = 1e-12);

        let par = PluckerRay::through(Vector3::new(0.0, 1.0, 0.0), Vector3::x());
        assert_eq!(closest_point_on_line_to_ray(&x_axis(), &par), Err(PluckerError::ParallelLines));
    }

    #[test]
    fn ceiling_corner_intersection() {
        let wall_x = PluckerLine::from_point_direction(Vector3::new(2.0, 0.0, 1.5), Vector3::y());
        let wall_y = PluckerLine::from_point_direction(Vector3::new(0.0, 2.0, 1.5), Vector3::x());
        let c = intersect_coplanar_lines(&wall_x, &wall_y).unwrap();
        assert_abs_diff_eq!((c - Vector3::new(2.0, 2.0, 1.5)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn intersection_errors() {
        let a = PluckerLine::from_point_direction(Vector3::new(0.0, 2.0, 1.5), Vector3::x());
        let b = PluckerLine::from_point_direction(Vector3::new(0.0, -2.0, 1.5), Vector3::x());
        assert_eq!(intersect_coplanar_lines(&a, &b), Err(PluckerError::ParallelLines));
        let skew = PluckerLine::from_point_direction(Vector3::new(2.0, 0.0, 0.5), Vector3::y());
        assert!(matches!(intersect_coplanar_lines(&a, &skew), Err(PluckerError::NotCoplanar(_))));
    }

    #[test]
    fn common_point_bundle_is_degenerate() {
        let p = Vector3::new(1.0, 2.0, 0.5);
        let dirs = [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.2),
            Vector3::new(0.3, -1.0, 1.0),
            Vector3::new(-1.0, 0.5, 0.1),
        ];
        let rays = dirs.map(|d| PluckerRay::through(p, d));
        assert_eq!(line_from_four_rays(&rays), Err(PluckerError::DegenerateRays));
    }

    #[test]
    fn quadratic_roots() {
        let r = real_quadratic_roots(1.0, -3.0, 2.0).unwrap();
        let mut r = r.clone();
        r.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[1], 2.0, epsilon = 1e-14);
        assert_eq!(real_quadratic_roots(1.0, 0.0, 1.0), Err(PluckerError::NoRealSolution));
    }
}
