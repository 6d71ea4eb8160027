//! Room layouts: a cyclic list of walls sharing ceiling and floor heights,
//! together with the floor-plan polygon they bound.

use nalgebra::{Rotation2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{is_simple_polygon, signed_area};
use crate::solvers::Wall;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LayoutError {
    #[error("layout needs at least 3 corners, got {0}")]
    TooFewCorners(usize),
    #[error("floor-plan polygon is not simple")]
    NotSimple,
    #[error("ceiling must be above the camera and the floor below (h_c = {h_c}, h_f = {h_f})")]
    BadHeights { h_c: f64, h_f: f64 },
    #[error("corner {0} is not on both adjacent wall planes")]
    CornerOffWall(usize),
    #[error("{walls} walls for {corners} corners")]
    Mismatch { walls: usize, corners: usize },
}

/// Ceiling and floor corners paired per vertical edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerSet {
    pub ceiling: Vec<Vector3<f64>>,
    pub floor: Vec<Vector3<f64>>,
}

impl CornerSet {
    pub fn iter(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.ceiling.iter().chain(&self.floor)
    }

    pub fn len(&self) -> usize {
        self.ceiling.len() + self.floor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Wall `i` runs from `corners[i]` to `corners[(i + 1) % n]`; corners are
/// counter-clockwise around the camera at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub walls: Vec<Wall>,
    pub corners: Vec<Vector2<f64>>,
    pub h_c: f64,
    pub h_f: f64,
    pub occluded: Vec<bool>,
}

impl Layout {
    /// Builds the walls of a counter-clockwise floor plan.
    pub fn from_polygon(corners: Vec<Vector2<f64>>, h_c: f64, h_f: f64) -> Result<Self, LayoutError> {
        let n = corners.len();
        if n < 3 {
            return Err(LayoutError::TooFewCorners(n));
        }
        let corners = if signed_area(&corners) < 0.0 {
            corners.into_iter().rev().collect()
        } else {
            corners
        };
        let walls = (0..n)
            .map(|i| Wall::through_segment(corners[i], corners[(i + 1) % n], h_c, h_f))
            .collect();
        Ok(Self {
            walls,
            corners,
            h_c,
            h_f,
            occluded: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.walls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walls.is_empty()
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), LayoutError> {
        let n = self.corners.len();
        if n < 3 {
            return Err(LayoutError::TooFewCorners(n));
        }
        if self.walls.len() != n || self.occluded.len() != n {
            return Err(LayoutError::Mismatch {
                walls: self.walls.len(),
                corners: n,
            });
        }
        if !(self.h_c > 0.0 && self.h_f < 0.0) {
            return Err(LayoutError::BadHeights {
                h_c: self.h_c,
                h_f: self.h_f,
            });
        }
        if !is_simple_polygon(&self.corners) {
            return Err(LayoutError::NotSimple);
        }
        for i in 0..n {
            let c = self.corners[i];
            let prev = &self.walls[(i + n - 1) % n];
            let this = &self.walls[i];
            let off = |w: &Wall| (c.dot(&w.normal()) - w.d).abs();
            if off(prev) > 1e-6 || off(this) > 1e-6 {
                return Err(LayoutError::CornerOffWall(i));
            }
        }
        Ok(())
    }

    pub fn corner_set(&self) -> CornerSet {
        CornerSet {
            ceiling: self.corners.iter().map(|c| Vector3::new(c.x, c.y, self.h_c)).collect(),
            floor: self.corners.iter().map(|c| Vector3::new(c.x, c.y, self.h_f)).collect(),
        }
    }

    /// Floor-plan area (positive for counter-clockwise corners).
    pub fn area(&self) -> f64 {
        signed_area(&self.corners)
    }

    /// True when every wall is parallel or perpendicular to the first one.
    pub fn is_manhattan(&self, tol_rad: f64) -> bool {
        let Some(first) = self.walls.first() else {
            return true;
        };
        self.walls.iter().all(|w| {
            let c = w.u.dot(&first.u).abs();
            let s = crate::geom::cross2(w.u, first.u).abs();
            c.min(s) < tol_rad.sin()
        })
    }

    pub fn transformed(&self, rotation: f64, offset: Vector2<f64>, scale: f64) -> Self {
        let rot = Rotation2::new(rotation);
        let corners = self.corners.iter().map(|c| (rot * c + offset) * scale).collect();
        let mut out = Self::from_polygon(corners, self.h_c * scale, self.h_f * scale)
            .expect("transform preserves corner count");
        out.occluded = self.occluded.clone();
        out
    }

    /// Diagonal of the 3D bounding box spanned by the corners and heights.
    pub fn bounding_diagonal(&self) -> f64 {
        let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
        for c in &self.corners {
            lo = lo.inf(c);
            hi = hi.sup(c);
        }
        let d = hi - lo;
        (d.x * d.x + d.y * d.y + (self.h_c - self.h_f).powi(2)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square(half: f64) -> Layout {
        let c = vec![
            Vector2::new(-half, -half),
            Vector2::new(half, -half),
            Vector2::new(half, half),
            Vector2::new(-half, half),
        ];
        Layout::from_polygon(c, 1.4, -1.1).unwrap()
    }

    #[test]
    fn square_walls_face_camera() {
        let l = square(2.0);
        l.validate().unwrap();
        for w in &l.walls {
            assert_abs_diff_eq!(w.d, 2.0, epsilon = 1e-12);
        }
        assert!(l.is_manhattan(1e-9));
        assert_abs_diff_eq!(l.area(), 16.0, epsilon = 1e-12);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let mut c = square(1.0).corners;
        c.reverse();
        let l = Layout::from_polygon(c, 1.0, -1.0).unwrap();
        assert!(l.area() > 0.0);
        l.validate().unwrap();
    }

    #[test]
    fn detects_bad_heights() {
        let mut l = square(2.0);
        l.h_f = 0.5;
        assert!(matches!(l.validate(), Err(LayoutError::BadHeights { .. })));
    }

    #[test]
    fn corner_set_pairs_share_xy() {
        let cs = square(2.0).corner_set();
        for (c, f) in cs.ceiling.iter().zip(&cs.floor) {
            assert_eq!(c.xy(), f.xy());
            assert_eq!(c.z, 1.4);
            assert_eq!(f.z, -1.1);
        }
    }
}
