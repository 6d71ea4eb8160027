//! Damped least-squares refinement of a layout against the boundary map.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::{BoundaryMap, PlanLine};
use crate::camera::CameraModel;
use crate::geom::cross2;

/// Residual used when a wall does not meet a column's viewing ray.
const MISS_RESIDUAL: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustConfig {
    /// Weight of the corner-plane penalty, px^2 / m^2.
    pub mu: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub tolerance: f64,
}

impl Default for AdjustConfig {
    fn default() -> Self {
        Self {
            mu: 10.0,
            max_iterations: 100,
            tolerance: 1e-10,
        }
    }
}

/// How wall angles are parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleMode {
    /// One rotation shared by every wall (Manhattan).
    Shared,
    /// One angle per wall (Atlanta).
    PerWall,
}

/// Corner `corner` (between walls `corner - 1` and `corner`) must stay in the
/// vertical plane through the z-axis at `azimuth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub corner: usize,
    pub azimuth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustInput {
    /// `(alpha, d)` per wall: the wall is `(cos alpha, sin alpha) · x = d`.
    pub lines: Vec<(f64, f64)>,
    pub h_c: f64,
    pub h_f: f64,
    /// Columns observing each wall (empty for inserted walls).
    pub observations: Vec<Vec<usize>>,
    pub anchors: Vec<Anchor>,
    pub mode: AngleMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustOutcome {
    pub lines: Vec<(f64, f64)>,
    pub h_c: f64,
    pub h_f: f64,
    pub iterations: usize,
    /// False when the iteration limit was hit first.
    pub converged: bool,
    pub initial_cost: f64,
    pub final_cost: f64,
}

struct Column {
    cos: f64,
    sin: f64,
    ceiling: f64,
    floor: f64,
}

struct Problem<'a> {
    input: &'a AdjustInput,
    cam: &'a CameraModel,
    columns: Vec<Vec<Column>>,
    sqrt_mu: f64,
}

impl Problem<'_> {
    fn n_walls(&self) -> usize {
        self.input.lines.len()
    }

    fn initial(&self) -> DVector<f64> {
        let n = self.n_walls();
        let mut p = Vec::with_capacity(2 * n + 3);
        match self.input.mode {
            AngleMode::Shared => p.push(0.0),
            AngleMode::PerWall => p.extend(self.input.lines.iter().map(|l| l.0)),
        }
        p.extend(self.input.lines.iter().map(|l| l.1));
        p.push(self.input.h_c);
        p.push(self.input.h_f);
        DVector::from_vec(p)
    }

    fn unpack(&self, p: &DVector<f64>) -> (Vec<(f64, f64)>, f64, f64) {
        let n = self.n_walls();
        let off = match self.input.mode {
            AngleMode::Shared => 1,
            AngleMode::PerWall => n,
        };
        let lines = (0..n)
            .map(|i| {
                let alpha = match self.input.mode {
                    AngleMode::Shared => self.input.lines[i].0 + p[0],
                    AngleMode::PerWall => p[i],
                };
                (alpha, p[off + i])
            })
            .collect();
        (lines, p[off + n], p[off + n + 1])
    }

    fn residuals(&self, p: &DVector<f64>) -> Vec<f64> {
        let (lines, h_c, h_f) = self.unpack(p);
        let rc = self.cam.rc();
        let mut r = Vec::new();
        for (i, &(alpha, d)) in lines.iter().enumerate() {
            let (s, c) = alpha.sin_cos();
            for col in &self.columns[i] {
                let den = col.cos * c + col.sin * s;
                let rho = if den > 1e-9 { d / den } else { -1.0 };
                if rho <= rc {
                    r.push(MISS_RESIDUAL);
                    r.push(MISS_RESIDUAL);
                    continue;
                }
                let row = |h: f64| self.cam.row_of_elevation(h.atan2(rho - rc));
                r.push(row(h_c) - col.ceiling);
                r.push(row(h_f) - col.floor);
            }
        }
        let n = lines.len();
        for a in &self.input.anchors {
            let prev = PlanLine {
                alpha: lines[(a.corner + n - 1) % n].0,
                d: lines[(a.corner + n - 1) % n].1,
            };
            let this = PlanLine {
                alpha: lines[a.corner].0,
                d: lines[a.corner].1,
            };
            let dir = Vector2::new(a.azimuth.cos(), a.azimuth.sin());
            r.push(match prev.intersect(&this) {
                Some(v) => self.sqrt_mu * cross2(dir, v),
                None => MISS_RESIDUAL,
            });
        }
        r
    }
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn jacobian(prob: &Problem, p: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let k = p.len();
    let mut j = DMatrix::zeros(m, k);
    for c in 0..k {
        let h = 1e-6 * p[c].abs().max(1.0);
        let mut hi = p.clone();
        hi[c] += h;
        let mut lo = p.clone();
        lo[c] -= h;
        let (rh, rl) = (prob.residuals(&hi), prob.residuals(&lo));
        for row in 0..m {
            j[(row, c)] = (rh[row] - rl[row]) / (2.0 * h);
        }
    }
    j
}

/// Levenberg-Marquardt over wall angles, distances and the shared heights.
///
/// Residuals are predicted-minus-observed boundary rows of every observing
/// column plus `sqrt(mu)` times the distance of each anchored corner from
/// its corner plane. Steps that do not lower the cost are rejected, so the
/// final cost never exceeds the initial one.
pub fn final_adjustment(input: &AdjustInput, bm: &BoundaryMap, cam: &CameraModel, cfg: &AdjustConfig) -> AdjustOutcome {
    let columns = input
        .observations
        .iter()
        .map(|cols| {
            cols.iter()
                .map(|&j| {
                    let a = cam.column_azimuth(j);
                    Column {
                        cos: a.cos(),
                        sin: a.sin(),
                        ceiling: bm.ceiling_row[j],
                        floor: bm.floor_row[j],
                    }
                })
                .collect()
        })
        .collect();
    let prob = Problem {
        input,
        cam,
        columns,
        sqrt_mu: cfg.mu.max(0.0).sqrt(),
    };
    let mut p = prob.initial();
    let mut r = prob.residuals(&p);
    let initial_cost = cost(&r);
    let mut current = initial_cost;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        if current == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let j = jacobian(&prob, &p, r.len());
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial = &p + &step;
            let rt = prob.residuals(&trial);
            let ct = cost(&rt);
            if ct < current {
                let rel = (current - ct) / current;
                p = trial;
                r = rt;
                current = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < cfg.tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left: a stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    let (lines, h_c, h_f) = prob.unpack(&p);
    AdjustOutcome {
        lines,
        h_c,
        h_f,
        iterations,
        converged,
        initial_cost,
        final_cost: current,
    }
}
