//! Python bindings for metric layout recovery from non-central panoramas.
//!
//! ```python
//! import ncl_layout as ncl
//! cam = ncl.Camera(rc=1.0)
//! gt = ncl.generate_layout(seed=3)
//! bm = ncl.add_noise(ncl.project_layout(gt, cam), sigma=0.5, seed=1)
//! rec = ncl.recover_layout(bm, cam, "manhattan")
//! print(ncl.evaluate(rec.layout, gt)["ce_m"])
//! ```

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ncl_core::io::{format_boundaries, parse_boundaries, LayoutFile};
use ncl_core::pipeline::{required_hypotheses as hypotheses, PipelineError, Recovery as CoreRecovery, Stage};
use ncl_core::synth::{self, LayoutSpec, NoiseSpec};
use ncl_core::{BoundaryMap as CoreBoundaryMap, CameraModel, Layout as CoreLayout, PipelineConfig, PixelCoord, Point3H, RansacConfig, World};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e.stage() {
        Stage::Input => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Non-central circular panorama.
#[pyclass(name = "Camera", module = "ncl_layout", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Camera {
    inner: CameraModel,
}

#[pymethods]
impl Camera {
    #[new]
    #[pyo3(signature = (rc=1.0, rows=512, cols=1024, phi=(-FRAC_PI_2, FRAC_PI_2), varphi=(-PI, PI)))]
    fn new(rc: f64, rows: usize, cols: usize, phi: (f64, f64), varphi: (f64, f64)) -> PyResult<Self> {
        let inner = CameraModel::new(rc, rows, cols, [phi.0, phi.1], [varphi.0, varphi.1]).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("camera serializes")
    }

    #[getter]
    fn rc(&self) -> f64 {
        self.inner.rc()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    /// Pixel `(row, col)` of a 3D point.
    fn project_point(&self, x: f64, y: f64, z: f64) -> PyResult<(f64, f64)> {
        let px = self.inner.project_point(Point3H::euclidean(Vector3::new(x, y, z))).map_err(value_err)?;
        Ok((px.i, px.j))
    }

    /// Plücker coordinates `(direction, moment)` of the ray through a pixel.
    fn backproject_pixel(&self, i: f64, j: f64) -> PyResult<([f64; 3], [f64; 3])> {
        let ray = self.inner.backproject_pixel(PixelCoord::new(i, j)).map_err(value_err)?;
        let (a, b) = (ray.xi(), ray.xibar());
        Ok(([a.x, a.y, a.z], [b.x, b.y, b.z]))
    }

    fn optical_center(&self, varphi: f64) -> [f64; 3] {
        let c = self.inner.optical_center(varphi);
        [c.x, c.y, c.z]
    }

    fn __repr__(&self) -> String {
        format!("Camera(rc={}, rows={}, cols={})", self.inner.rc(), self.inner.rows(), self.inner.cols())
    }
}

/// Room with a polygonal floor plan and flat ceiling and floor.
#[pyclass(name = "Layout", module = "ncl_layout", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Layout {
    inner: CoreLayout,
}

#[pymethods]
impl Layout {
    /// Corners are `(x, y)` pairs in either winding order; heights are
    /// relative to the camera.
    #[new]
    fn new(corners: Vec<(f64, f64)>, h_c: f64, h_f: f64) -> PyResult<Self> {
        let corners = corners.into_iter().map(|(x, y)| Vector2::new(x, y)).collect();
        let inner = CoreLayout::from_polygon(corners, h_c, h_f).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: LayoutFile = serde_json::from_str(text).map_err(value_err)?;
        let inner = file.to_layout().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LayoutFile::from(&self.inner)).expect("layout serializes")
    }

    #[getter]
    fn corners(&self) -> Vec<(f64, f64)> {
        self.inner.corners.iter().map(|c| (c.x, c.y)).collect()
    }

    #[getter]
    fn h_c(&self) -> f64 {
        self.inner.h_c
    }

    #[getter]
    fn h_f(&self) -> f64 {
        self.inner.h_f
    }

    /// `(theta, d)` of every wall.
    #[getter]
    fn walls(&self) -> Vec<(f64, f64)> {
        self.inner.walls.iter().map(|w| (w.theta(), w.d)).collect()
    }

    #[getter]
    fn occluded(&self) -> Vec<bool> {
        self.inner.occluded.clone()
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    #[pyo3(signature = (tol_deg=1e-4))]
    fn is_manhattan(&self, tol_deg: f64) -> bool {
        self.inner.is_manhattan(tol_deg.to_radians())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Layout({} walls, h_c={:.3}, h_f={:.3})", self.inner.len(), self.inner.h_c, self.inner.h_f)
    }
}

/// Per-column ceiling and floor rows plus the corner score.
#[pyclass(name = "BoundaryMap", module = "ncl_layout", frozen, skip_from_py_object)]
#[derive(Clone)]
struct BoundaryMap {
    inner: CoreBoundaryMap,
}

#[pymethods]
impl BoundaryMap {
    #[new]
    fn new(ceiling_row: Vec<f64>, floor_row: Vec<f64>, corner_score: Vec<f64>) -> PyResult<Self> {
        if ceiling_row.len() != floor_row.len() || floor_row.len() != corner_score.len() {
            return Err(PyValueError::new_err("boundary arrays differ in length"));
        }
        Ok(Self {
            inner: CoreBoundaryMap {
                ceiling_row,
                floor_row,
                corner_score,
            },
        })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let inner = parse_boundaries(text, Path::new("<string>")).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_csv(&self) -> String {
        format_boundaries(&self.inner)
    }

    #[getter]
    fn ceiling_row(&self) -> Vec<f64> {
        self.inner.ceiling_row.clone()
    }

    #[getter]
    fn floor_row(&self) -> Vec<f64> {
        self.inner.floor_row.clone()
    }

    #[getter]
    fn corner_score(&self) -> Vec<f64> {
        self.inner.corner_score.clone()
    }

    fn clamped(&self, camera: &Camera) -> Self {
        Self {
            inner: self.inner.clamped(&camera.inner),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Recovery", module = "ncl_layout", frozen)]
struct Recovery {
    inner: CoreRecovery,
}

#[pymethods]
impl Recovery {
    #[getter]
    fn layout(&self) -> Layout {
        Layout {
            inner: self.inner.layout.clone(),
        }
    }

    /// Linear-solver layout before the final adjustment.
    #[getter]
    fn initial(&self) -> Layout {
        Layout {
            inner: self.inner.initial.clone(),
        }
    }

    #[getter]
    fn world(&self) -> String {
        self.inner.world.to_string()
    }

    #[getter]
    fn segments(&self) -> usize {
        self.inner.segments
    }

    #[getter]
    fn inlier_ratios(&self) -> Vec<f64> {
        self.inner.inlier_ratios.clone()
    }

    #[getter]
    fn inserted_walls(&self) -> usize {
        self.inner.inserted_walls
    }
}

#[pyfunction]
#[pyo3(signature = (seed, walls=(4, 14), atlanta_prob=0.0, rc=1.0, rotate=true))]
fn generate_layout(seed: u64, walls: (usize, usize), atlanta_prob: f64, rc: f64, rotate: bool) -> PyResult<Layout> {
    let spec = LayoutSpec {
        seed,
        walls,
        atlanta_clip_probability: atlanta_prob,
        rc,
        rotate,
        ..LayoutSpec::default()
    };
    let inner = synth::generate_layout(&spec).map_err(value_err)?;
    Ok(Layout { inner })
}

/// Exact boundary map of a layout seen from the camera at the origin.
#[pyfunction]
fn project_layout(layout: &Layout, camera: &Camera) -> PyResult<BoundaryMap> {
    let inner = synth::project_layout(&layout.inner, &camera.inner).map_err(value_err)?;
    Ok(BoundaryMap { inner })
}

#[pyfunction]
#[pyo3(signature = (bm, sigma, spike_rate=0.0, spike_magnitude=20.0, seed=0))]
fn add_noise(bm: &BoundaryMap, sigma: f64, spike_rate: f64, spike_magnitude: f64, seed: u64) -> BoundaryMap {
    let noise = NoiseSpec {
        gaussian_sigma: sigma,
        spike_rate,
        spike_magnitude,
        seed,
    };
    BoundaryMap {
        inner: synth::add_noise(&bm.inner, &noise),
    }
}

/// Boundary map to metric layout. Raises ValueError on bad input and
/// RuntimeError when a pipeline stage fails.
#[pyfunction]
#[pyo3(signature = (bm, camera, world="manhattan", config_json=None, skip_adjustment=false))]
fn recover_layout(
    py: Python<'_>,
    bm: &BoundaryMap,
    camera: &Camera,
    world: &str,
    config_json: Option<&str>,
    skip_adjustment: bool,
) -> PyResult<Recovery> {
    let world: World = world.parse().map_err(PyValueError::new_err)?;
    let mut cfg: PipelineConfig = match config_json {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => PipelineConfig::default(),
    };
    cfg.skip_adjustment |= skip_adjustment;
    let inner = py
        .detach(|| ncl_core::recover_layout(&bm.inner, &camera.inner, world, &cfg))
        .map_err(pipeline_err)?;
    Ok(Recovery { inner })
}

/// Metrics of `pred` against `gt` as a dict.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, pred: &Layout, gt: &Layout) -> PyResult<Bound<'py, PyDict>> {
    let r = ncl_core::metrics::evaluate(&pred.inner, &gt.inner).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("ce_m", r.ce_m)?;
    d.set_item("cen_pct", r.cen_pct)?;
    d.set_item("iou2d_pct", r.iou2d_pct)?;
    d.set_item("iou3d_pct", r.iou3d_pct)?;
    d.set_item("dir_err_deg", r.dir_err_deg)?;
    d.set_item("depth_err_m", r.depth_err_m)?;
    d.set_item("scale_err_pct", r.scale_err_pct)?;
    d.set_item("pred_walls", r.pred_walls)?;
    d.set_item("gt_walls", r.gt_walls)?;
    d.set_item("count_mismatch", r.count_mismatch)?;
    d.set_item("warnings", r.warnings)?;
    Ok(d)
}

/// RANSAC iterations for success probability `p` at outlier rate `eps`.
#[pyfunction]
#[pyo3(signature = (p=0.9999, eps=0.2, k=3))]
fn required_hypotheses(p: f64, eps: f64, k: usize) -> PyResult<f64> {
    let cfg = RansacConfig {
        success_prob: p,
        outlier_rate: eps,
        sample_size: k,
        ..RansacConfig::default()
    };
    hypotheses(&cfg).map_err(pipeline_err)
}

#[pymodule]
fn ncl_layout(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Camera>()?;
    m.add_class::<Layout>()?;
    m.add_class::<BoundaryMap>()?;
    m.add_class::<Recovery>()?;
    m.add_function(wrap_pyfunction!(generate_layout, m)?)?;
    m.add_function(wrap_pyfunction!(project_layout, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(recover_layout, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(required_hypotheses, m)?)?;
    Ok(())
}
