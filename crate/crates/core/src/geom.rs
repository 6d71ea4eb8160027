//! Shared numeric helpers: SVD null spaces and small 2D polygon routines.

use nalgebra::{DMatrix, DVector, Vector2};

/// Right singular vectors of `a`, sorted by ascending singular value, and
/// the singular values sorted descending. Zero rows are padded in so that
/// under-determined systems still expose their full null space.
pub(crate) fn right_singular_vectors(a: &DMatrix<f64>) -> (Vec<DVector<f64>>, Vec<f64>) {
    let n = a.ncols();
    let padded;
    let m = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        padded = p;
        &padded
    } else {
        a
    };
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let vecs = order
        .iter()
        .map(|&k| v_t.row(k).transpose().into_owned())
        .collect();
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    (vecs, sv)
}

pub(crate) fn cross2(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed area, positive for counter-clockwise polygons.
pub(crate) fn signed_area(poly: &[Vector2<f64>]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| cross2(poly[i], poly[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

fn segments_intersect(a0: Vector2<f64>, a1: Vector2<f64>, b0: Vector2<f64>, b1: Vector2<f64>) -> bool {
    let d1 = cross2(b1 - b0, a0 - b0);
    let d2 = cross2(b1 - b0, a1 - b0);
    let d3 = cross2(a1 - a0, b0 - a0);
    let d4 = cross2(a1 - a0, b1 - a0);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Vector2<f64>, q0: Vector2<f64>, q1: Vector2<f64>, d: f64| {
        d == 0.0
            && p.x >= q0.x.min(q1.x)
            && p.x <= q0.x.max(q1.x)
            && p.y >= q0.y.min(q1.y)
            && p.y <= q0.y.max(q1.y)
    };
    on(a0, b0, b1, d1) || on(a1, b0, b1, d2) || on(b0, a0, a1, d3) || on(b1, a0, a1, d4)
}

/// True when no two non-adjacent edges touch and no vertex repeats.
pub(crate) fn is_simple_polygon(poly: &[Vector2<f64>]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if (poly[i] - poly[(i + 1) % n]).norm() < 1e-12 {
            return false;
        }
    }
    for i in 0..n {
        let (a0, a1) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b0, b1) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a0, a1, b0, b1) {
                return false;
            }
        }
    }
    true
}

pub(crate) fn point_segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

/// Even-odd point-in-polygon test.
pub(crate) fn point_in_polygon(p: Vector2<f64>, poly: &[Vector2<f64>]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Smallest ray parameter `t > eps` at which `origin + t * dir` crosses the
/// segment `[a, b]`, if any.
pub(crate) fn ray_segment_hit(
    origin: Vector2<f64>,
    dir: Vector2<f64>,
    a: Vector2<f64>,
    b: Vector2<f64>,
) -> Option<f64> {
    let e = b - a;
    let denom = cross2(dir, e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = a - origin;
    let t = cross2(w, e) / denom;
    let s = cross2(w, dir) / denom;
    if t > 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_pi(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut x = a.rem_euclid(TAU);
    if x > PI {
        x -= TAU;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn square_is_simple_and_ccw() {
        let sq = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)];
        assert!(is_simple_polygon(&sq));
        assert!((signed_area(&sq) - 1.0).abs() < 1e-15);
        assert!(point_in_polygon(v(0.5, 0.5), &sq));
        assert!(!point_in_polygon(v(1.5, 0.5), &sq));
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bt = [v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0)];
        assert!(!is_simple_polygon(&bt));
    }

    #[test]
    fn null_space_of_rank_deficient_system() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let (vecs, sv) = right_singular_vectors(&a);
        assert_eq!(vecs.len(), 3);
        assert!(sv[2].abs() < 1e-15);
        assert!((vecs[0][2].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_hits_segment() {
        let t = ray_segment_hit(v(0.0, 0.0), v(1.0, 0.0), v(2.0, -1.0), v(2.0, 1.0));
        assert_eq!(t, Some(2.0));
        assert!(ray_segment_hit(v(0.0, 0.0), v(-1.0, 0.0), v(2.0, -1.0), v(2.0, 1.0)).is_none());
    }
}
