//! Non-central circular panorama: one optical center per column on a
//! horizontal circle of radius `rc` around the z axis.
//!
//! Row coordinates grow with elevation, column coordinates grow with
//! azimuth. Both maps are continuous; integer pixel `(i, j)` is sampled at
//! `(i + 0.5, j + 0.5)`, see [`CameraModel::column_azimuth`].

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plucker::PluckerRay;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CameraError {
    #[error("invalid camera parameters: {0}")]
    InvalidModel(String),
    #[error("point lies on or inside the circle of optical centers")]
    InsideCircle,
    #[error("projected angles ({elevation:.6}, {azimuth:.6}) are outside the field of view")]
    OutOfView { elevation: f64, azimuth: f64 },
    #[error("pixel ({i}, {j}) is outside the image bounds")]
    OutOfBounds { i: f64, j: f64 },
}

/// Continuous pixel coordinate: `i` is the row, `j` the column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub i: f64,
    pub j: f64,
}

impl PixelCoord {
    pub fn new(i: f64, j: f64) -> Self {
        Self { i, j }
    }
}

/// Homogeneous 3D point (meters when `w == 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3H {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Point3H {
    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn euclidean(p: Vector3<f64>) -> Self {
        Self::new(p.x, p.y, p.z, 1.0)
    }
}

impl From<Vector3<f64>> for Point3H {
    fn from(p: Vector3<f64>) -> Self {
        Self::euclidean(p)
    }
}

/// Intrinsics of the panorama. Immutable once built; use [`CameraModel::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera")]
pub struct CameraModel {
    rc: f64,
    rows: usize,
    cols: usize,
    phi: [f64; 2],
    varphi: [f64; 2],
}

#[derive(Deserialize)]
struct RawCamera {
    rc: f64,
    rows: usize,
    cols: usize,
    phi: [f64; 2],
    varphi: [f64; 2],
}

impl TryFrom<RawCamera> for CameraModel {
    type Error = CameraError;

    fn try_from(r: RawCamera) -> Result<Self, CameraError> {
        Self::new(r.rc, r.rows, r.cols, r.phi, r.varphi)
    }
}

impl Default for CameraModel {
    /// `Rc = 1 m`, 512x1024, elevation `[-pi/2, pi/2]`, azimuth `[-pi, pi)`.
    fn default() -> Self {
        Self {
            rc: 1.0,
            rows: 512,
            cols: 1024,
            phi: [-PI / 2.0, PI / 2.0],
            varphi: [-PI, PI],
        }
    }
}

impl CameraModel {
    pub fn new(
        rc: f64,
        rows: usize,
        cols: usize,
        phi: [f64; 2],
        varphi: [f64; 2],
    ) -> Result<Self, CameraError> {
        let bad = |msg: &str| Err(CameraError::InvalidModel(msg.to_string()));
        if !(rc >= 0.0 && rc.is_finite()) {
            return bad("rc must be finite and non-negative");
        }
        if rows < 2 || cols < 2 {
            return bad("rows and cols must be at least 2");
        }
        let half = PI / 2.0;
        if !(phi[0] < phi[1]) || phi[0] < -half || phi[1] > half {
            return bad("elevation range must satisfy -pi/2 <= lo < hi <= pi/2");
        }
        if !(varphi[0] < varphi[1]) || varphi[1] - varphi[0] > TAU + 1e-12 {
            return bad("azimuth range must satisfy lo < hi and hi - lo <= 2 pi");
        }
        Ok(Self {
            rc,
            rows,
            cols,
            phi,
            varphi,
        })
    }

    /// Default model with a different circle radius.
    pub fn with_radius(rc: f64) -> Result<Self, CameraError> {
        let d = Self::default();
        Self::new(rc, d.rows, d.cols, d.phi, d.varphi)
    }

    pub fn rc(&self) -> f64 {
        self.rc
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn phi_range(&self) -> [f64; 2] {
        self.phi
    }
    pub fn varphi_range(&self) -> [f64; 2] {
        self.varphi
    }

    /// True when the azimuth range covers the whole circle, in which case
    /// column `cols - 1` is adjacent to column 0.
    pub fn is_full_panorama(&self) -> bool {
        (self.varphi[1] - self.varphi[0] - TAU).abs() < 1e-12
    }

    fn varphi_span(&self) -> f64 {
        self.varphi[1] - self.varphi[0]
    }

    fn phi_span(&self) -> f64 {
        self.phi[1] - self.phi[0]
    }

    /// Azimuth sampled by integer column `j` (pixel-center convention).
    pub fn column_azimuth(&self, j: usize) -> f64 {
        self.azimuth_at(j as f64 + 0.5)
    }

    /// Azimuth at continuous column coordinate `j`.
    pub fn azimuth_at(&self, j: f64) -> f64 {
        j * self.varphi_span() / self.cols as f64 + self.varphi[0]
    }

    /// Elevation at continuous row coordinate `i`.
    pub fn elevation_at(&self, i: f64) -> f64 {
        i * self.phi_span() / self.rows as f64 + self.phi[0]
    }

    /// Continuous row coordinate of elevation `phi` (no range check).
    pub fn row_of_elevation(&self, phi: f64) -> f64 {
        self.rows as f64 * (phi - self.phi[0]) / self.phi_span()
    }

    /// Continuous column coordinate of azimuth `varphi`, wrapped into the
    /// azimuth range in full-panorama mode (no range check otherwise).
    pub fn column_of_azimuth(&self, varphi: f64) -> f64 {
        let a = if self.is_full_panorama() {
            self.wrap_azimuth(varphi)
        } else {
            varphi
        };
        self.cols as f64 * (a - self.varphi[0]) / self.varphi_span()
    }

    fn wrap_azimuth(&self, varphi: f64) -> f64 {
        let mut a = (varphi - self.varphi[0]).rem_euclid(TAU) + self.varphi[0];
        if a >= self.varphi[1] {
            a -= TAU;
        }
        a
    }

    /// Center of projection used by the column with azimuth `varphi`.
    pub fn optical_center(&self, varphi: f64) -> Vector3<f64> {
        Vector3::new(self.rc * varphi.cos(), self.rc * varphi.sin(), 0.0)
    }

    /// Elevation and azimuth of a point as seen from its own optical center.
    pub fn angles(&self, p: Point3H) -> Result<(f64, f64), CameraError> {
        let (x, y, z, w) = if p.w < 0.0 {
            (-p.x, -p.y, -p.z, -p.w)
        } else {
            (p.x, p.y, p.z, p.w)
        };
        let r = x.hypot(y);
        let radial = r - w * self.rc;
        if !(radial > 0.0) {
            return Err(CameraError::InsideCircle);
        }
        Ok((z.atan2(radial), y.atan2(x)))
    }

    /// Forward projection to continuous pixel coordinates.
    pub fn project_point(&self, p: Point3H) -> Result<PixelCoord, CameraError> {
        let (phi, raw_varphi) = self.angles(p)?;
        let varphi = if self.is_full_panorama() {
            self.wrap_azimuth(raw_varphi)
        } else {
            raw_varphi
        };
        let out = CameraError::OutOfView {
            elevation: phi,
            azimuth: raw_varphi,
        };
        if phi < self.phi[0] || phi > self.phi[1] {
            return Err(out);
        }
        if varphi < self.varphi[0] || varphi > self.varphi[1] {
            return Err(out);
        }
        Ok(PixelCoord {
            i: self.row_of_elevation(phi),
            j: self.cols as f64 * (varphi - self.varphi[0]) / self.varphi_span(),
        })
    }

    /// Projecting ray of a continuous pixel coordinate.
    pub fn backproject_pixel(&self, px: PixelCoord) -> Result<PluckerRay, CameraError> {
        let in_rows = px.i >= 0.0 && px.i <= self.rows as f64;
        let in_cols = px.j >= 0.0 && px.j <= self.cols as f64;
        if !(in_rows && in_cols) {
            return Err(CameraError::OutOfBounds { i: px.i, j: px.j });
        }
        Ok(self.ray_from_angles(self.elevation_at(px.i), self.azimuth_at(px.j)))
    }

    /// Projecting ray with elevation `phi` from the optical center at azimuth `varphi`.
    pub fn ray_from_angles(&self, phi: f64, varphi: f64) -> PluckerRay {
        let (sp, cp) = phi.sin_cos();
        let (sv, cv) = varphi.sin_cos();
        let xi = Vector3::new(cp * cv, cp * sv, sp);
        let xibar = Vector3::new(self.rc * sp * sv, -self.rc * sp * cv, 0.0);
        PluckerRay::from_parts(xi, xibar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projects_reference_point() {
        let cam = CameraModel::default();
        let px = cam.project_point(Point3H::new(2.0, 0.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(px.i, 384.0, epsilon = 1e-9);
        assert_abs_diff_eq!(px.j, 512.0, epsilon = 1e-9);
    }

    #[test]
    fn ceiling_row_reference() {
        // 512 * (atan(1.5) + pi/2) / pi, evaluated independently.
        let cam = CameraModel::default();
        let px = cam.project_point(Point3H::new(2.0, 0.0, 1.5, 1.0)).unwrap();
        assert_abs_diff_eq!(px.i, 416.170_474_592_768_6, epsilon = 1e-9);
    }

    #[test]
    fn zero_radius_is_central() {
        let cam = CameraModel::with_radius(0.0).unwrap();
        let (phi, _) = cam.angles(Point3H::new(1.0, 0.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(phi, PI / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_points_inside_circle() {
        let cam = CameraModel::default();
        let err = cam.project_point(Point3H::new(0.5, 0.2, 1.0, 1.0));
        assert_eq!(err, Err(CameraError::InsideCircle));
        let err = cam.project_point(Point3H::new(1.0, 0.0, 1.0, 1.0));
        assert_eq!(err, Err(CameraError::InsideCircle));
    }

    #[test]
    fn out_of_view_with_partial_fov() {
        let cam = CameraModel::new(1.0, 100, 200, [-0.5, 0.5], [-1.0, 1.0]).unwrap();
        assert!(matches!(
            cam.project_point(Point3H::new(2.0, 0.0, 3.0, 1.0)),
            Err(CameraError::OutOfView { .. })
        ));
        assert!(matches!(
            cam.project_point(Point3H::new(-3.0, 0.1, 0.0, 1.0)),
            Err(CameraError::OutOfView { .. })
        ));
        assert!(!cam.is_full_panorama());
    }

    #[test]
    fn backprojection_examples() {
        let cam = CameraModel::default();
        let r = cam.ray_from_angles(0.0, 0.0);
        assert_abs_diff_eq!((r.xi() - Vector3::x()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.xibar().norm(), 0.0, epsilon = 1e-15);

        let r = cam.ray_from_angles(PI / 2.0, PI / 2.0);
        assert_abs_diff_eq!((r.xi() - Vector3::z()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((r.xibar() - Vector3::x()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn backprojection_bounds() {
        let cam = CameraModel::default();
        assert!(cam.backproject_pixel(PixelCoord::new(-0.1, 3.0)).is_err());
        assert!(cam.backproject_pixel(PixelCoord::new(3.0, 1024.5)).is_err());
        assert!(cam.backproject_pixel(PixelCoord::new(512.0, 1024.0)).is_ok());
    }

    #[test]
    fn validates_parameters() {
        assert!(CameraModel::new(-1.0, 10, 10, [-1.0, 1.0], [-1.0, 1.0]).is_err());
        assert!(CameraModel::new(1.0, 1, 10, [-1.0, 1.0], [-1.0, 1.0]).is_err());
        assert!(CameraModel::new(1.0, 10, 10, [1.0, -1.0], [-1.0, 1.0]).is_err());
        assert!(CameraModel::new(1.0, 10, 10, [-1.0, 1.0], [-4.0, 4.0]).is_err());
        assert!(CameraModel::default().is_full_panorama());
    }

    #[test]
    fn full_panorama_wraps_azimuth() {
        let cam = CameraModel::default();
        let j = cam.column_of_azimuth(PI + 0.1);
        assert_abs_diff_eq!(j, cam.column_of_azimuth(-PI + 0.1), epsilon = 1e-9);
        let px = cam.project_point(Point3H::new(-2.0, -1e-3, 0.0, 1.0)).unwrap();
        assert!(px.j < 1.0);
    }

    #[test]
    fn same_column_shares_center() {
        let cam = CameraModel::default();
        let a = cam.backproject_pixel(PixelCoord::new(100.0, 333.5)).unwrap();
        let b = cam.backproject_pixel(PixelCoord::new(400.0, 333.5)).unwrap();
        let c = cam.optical_center(cam.azimuth_at(333.5));
        assert!(a.distance_to_point(&c) < 1e-12);
        assert!(b.distance_to_point(&c) < 1e-12);
    }
}
