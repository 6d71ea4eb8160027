//! Metric room layout recovery from non-central circular panoramas.
//!
//! A non-central circular panorama places one optical center per image
//! column on a horizontal circle of radius `Rc`. Every column is locally
//! central, but rays from different columns do not meet, which makes the
//! full 3D position (and absolute scale) of horizontal structural lines
//! observable from a single image.
//!
//! The crate is organised bottom-up:
//!
//! - [`camera`]: forward/backward projection of the panorama model.
//! - [`plucker`]: Plücker line algebra (side operator, four-ray lines, corners).
//! - [`solvers`]: single-wall, Manhattan and Atlanta linear layout solvers.
//! - [`pipeline`]: boundary-map ingestion, RANSAC, occlusions, final adjustment.
//! - [`synth`]: random layouts and the analytic boundary-map oracle.
//! - [`metrics`]: line, corner and IoU metrics.
//! - [`io`] and [`sweep`]: file formats and the noise-sweep harness.

pub mod camera;
pub mod io;
pub mod layout;
pub mod metrics;
pub mod pipeline;
pub mod plucker;
pub mod solvers;
pub mod sweep;
pub mod synth;

mod geom;

pub use camera::{CameraError, CameraModel, PixelCoord, Point3H};
pub use layout::{CornerSet, Layout};
pub use pipeline::{recover_layout, BoundaryMap, PipelineConfig, RansacConfig, World};
pub use plucker::{PluckerLine, PluckerRay};
pub use solvers::{RaySet, Wall, WallSolution};
