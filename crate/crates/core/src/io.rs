//! File formats: camera and layout JSON, boundary CSV, run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::layout::{Layout, LayoutError};
use crate::pipeline::{BoundaryMap, World};

#[derive(Error, Debug)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Csv { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Layout { path: PathBuf, source: LayoutError },
    #[error("manifest references missing file {0}")]
    MissingFile(PathBuf),
}

pub const BOUNDARY_HEADER: [&str; 4] = ["col", "ceiling_row", "floor_row", "corner_score"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_camera(path: &Path) -> Result<CameraModel, IoError> {
    read_json(path)
}

pub fn write_camera(path: &Path, cam: &CameraModel) -> Result<(), IoError> {
    write_json(path, cam)
}

/// `col,ceiling_row,floor_row,corner_score`, one row per column, 6 decimals.
pub fn format_boundaries(bm: &BoundaryMap) -> String {
    let mut out = BOUNDARY_HEADER.join(",");
    out.push('\n');
    for j in 0..bm.len() {
        out.push_str(&format!(
            "{j},{:.6},{:.6},{:.6}\n",
            bm.ceiling_row[j], bm.floor_row[j], bm.corner_score[j]
        ));
    }
    out
}

pub fn write_boundaries(path: &Path, bm: &BoundaryMap) -> Result<(), IoError> {
    fs::write(path, format_boundaries(bm)).map_err(io_err(path))
}

pub fn parse_boundaries(text: &str, path: &Path) -> Result<BoundaryMap, IoError> {
    let bad = |line: usize, msg: String| IoError::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?;
    if header.iter().ne(BOUNDARY_HEADER) {
        return Err(bad(1, format!("expected header {}", BOUNDARY_HEADER.join(","))));
    }
    let mut bm = BoundaryMap {
        ceiling_row: Vec::new(),
        floor_row: Vec::new(),
        corner_score: Vec::new(),
    };
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(bad(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let col: usize = rec[0].parse().map_err(|_| bad(line, format!("bad column index {:?}", &rec[0])))?;
        if col != k {
            return Err(bad(line, format!("expected column {k}, got {col}")));
        }
        let mut vals = [0.0; 3];
        for (v, field) in vals.iter_mut().zip(rec.iter().skip(1)) {
            *v = field
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| bad(line, format!("bad number {field:?}")))?;
        }
        bm.ceiling_row.push(vals[0]);
        bm.floor_row.push(vals[1]);
        bm.corner_score.push(vals[2]);
    }
    if bm.is_empty() {
        return Err(bad(1, "no data rows".into()));
    }
    Ok(bm)
}

pub fn read_boundaries(path: &Path) -> Result<BoundaryMap, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_boundaries(&text, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallRecord {
    pub theta: f64,
    pub d: f64,
    pub occluded: bool,
}

/// On-disk layout. Corners are counter-clockwise `[x, y]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub h_c: f64,
    pub h_f: f64,
    pub corners: Vec<[f64; 2]>,
    pub walls: Vec<WallRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
}

impl From<&Layout> for LayoutFile {
    fn from(l: &Layout) -> Self {
        Self {
            h_c: l.h_c,
            h_f: l.h_f,
            corners: l.corners.iter().map(|c| [c.x, c.y]).collect(),
            walls: l
                .walls
                .iter()
                .zip(&l.occluded)
                .map(|(w, &occluded)| WallRecord {
                    theta: w.theta(),
                    d: w.d,
                    occluded,
                })
                .collect(),
            diagnostics: None,
        }
    }
}

impl LayoutFile {
    /// Rebuilds the layout from its corners; `walls` only contributes the
    /// occlusion flags.
    pub fn to_layout(&self) -> Result<Layout, LayoutError> {
        let corners = self.corners.iter().map(|c| Vector2::new(c[0], c[1])).collect();
        let mut layout = Layout::from_polygon(corners, self.h_c, self.h_f)?;
        if self.walls.len() == layout.len() {
            layout.occluded = self.walls.iter().map(|w| w.occluded).collect();
        }
        Ok(layout)
    }
}

pub fn read_layout(path: &Path) -> Result<Layout, IoError> {
    let file: LayoutFile = read_json(path)?;
    file.to_layout().map_err(|source| IoError::Layout {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_layout(path: &Path, layout: &Layout, diagnostics: Option<serde_json::Value>) -> Result<(), IoError> {
    let mut file = LayoutFile::from(layout);
    file.diagnostics = diagnostics;
    write_json(path, &file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Default train:val:test proportions of generated datasets.
pub const SPLIT_RATIOS: [u32; 3] = [1677, 399, 499];

/// Seeded split assignment with counts proportional to `ratios`.
pub fn assign_splits(n: usize, ratios: [u32; 3], seed: u64) -> Vec<Split> {
    let total: u32 = ratios.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * ratios[0] as f64 / total.max(1) as f64).round() as usize;
    let n_val = (n as f64 * ratios[1] as f64 / total.max(1) as f64).round() as usize;
    let mut out = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_train {
            out[i] = Split::Train;
        } else if rank < n_train + n_val {
            out[i] = Split::Val;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<World>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Role name to path relative to the manifest's directory.
    pub files: BTreeMap<String, String>,
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub split_ratios: Option<[u32; 3]>,
    pub samples: Vec<SampleRecord>,
    /// Wall-clock milliseconds per stage.
    pub timing_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seeds: Vec::new(),
            split_ratios: None,
            samples: Vec::new(),
            timing_ms: BTreeMap::new(),
        }
    }

    /// Writes `manifest.json` into `dir` after checking that every
    /// referenced file exists.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, IoError> {
        self.write_as(dir, "manifest.json")
    }

    /// Same as [`RunManifest::write`] under another file name.
    pub fn write_as(&self, dir: &Path, name: &str) -> Result<PathBuf, IoError> {
        for s in &self.samples {
            for rel in s.files.values() {
                let p = dir.join(rel);
                if !p.is_file() {
                    return Err(IoError::MissingFile(p));
                }
            }
        }
        let path = dir.join(name);
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        read_json(path)
    }
}
