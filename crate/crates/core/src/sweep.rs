//! Seeded corpora and the noise-sensitivity harness.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::layout::Layout;
use crate::metrics::{direction_error, evaluate, EvalReport};
use crate::pipeline::{cluster_directions, recover_layout, BoundaryMap, PipelineConfig, World};
use crate::solvers::{extract_wall, solve_manhattan, RaySet};
use crate::synth::{add_noise, generate_layout, project_layout_detailed, LayoutSpec, NoiseSpec, SynthError};

/// Fewest columns each wall of a corpus room must cover.
pub const MIN_WALL_COLUMNS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRoom {
    pub id: String,
    pub seed: u64,
    pub world: World,
    pub layout: Layout,
}

/// Deterministic 64-bit mix of a base seed and task coordinates.
pub fn task_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for &p in parts {
        x = x.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

/// Rooms in which every wall is visible, in order, over at least
/// [`MIN_WALL_COLUMNS`] columns. Atlanta rooms have at least one wall off
/// the two dominant axes.
pub fn unoccluded_corpus(
    manhattan: usize,
    atlanta: usize,
    seed: u64,
    cam: &CameraModel,
) -> Result<Vec<CorpusRoom>, SynthError> {
    let mut out = Vec::with_capacity(manhattan + atlanta);
    for (world, want) in [(World::Manhattan, manhattan), (World::Atlanta, atlanta)] {
        let mut k = 0u64;
        let mut found = 0;
        while found < want {
            if k > 1000 * (want as u64 + 1) {
                return Err(SynthError::RejectionOverflow(k as usize));
            }
            let room_seed = task_seed(seed, &[world as u64, k]);
            k += 1;
            let spec = LayoutSpec {
                seed: room_seed,
                rc: cam.rc(),
                atlanta_clip_probability: if world == World::Atlanta { 0.5 } else { 0.0 },
                ..LayoutSpec::default()
            };
            let Ok(layout) = generate_layout(&spec) else {
                continue;
            };
            if world == World::Atlanta && layout.is_manhattan(1e-6) {
                continue;
            }
            let Ok(p) = project_layout_detailed(&layout, cam) else {
                continue;
            };
            if !p.visibility.is_unoccluded(MIN_WALL_COLUMNS) {
                continue;
            }
            out.push(CorpusRoom {
                id: format!("{world}-{found:03}"),
                seed: room_seed,
                world,
                layout,
            });
            found += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub spike_rate: f64,
    pub spike_magnitude: f64,
    /// RANSAC inlier threshold is `max(pipeline threshold, k * sigma)`.
    pub threshold_sigmas: f64,
    pub pipeline: PipelineConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            trials: 1,
            seed: 0,
            spike_rate: 0.0,
            spike_magnitude: 20.0,
            threshold_sigmas: 3.0,
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub room: String,
    pub trial: usize,
    pub world: World,
    /// `ok`, or the tag of the failing pipeline stage.
    pub status: String,
    pub dir_err_deg: f64,
    pub depth_err_m: f64,
    pub ce_m: f64,
    pub iou3d_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMedian {
    pub sigma: f64,
    pub trials: usize,
    pub failures: usize,
    pub dir_err_deg: f64,
    pub depth_err_m: f64,
    pub ce_m: f64,
    pub iou3d_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub medians: Vec<SweepMedian>,
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Noisy copy of a room's boundary map for one sweep task, clamped into
/// the image.
pub fn noisy_boundaries(clean: &BoundaryMap, cam: &CameraModel, sigma: f64, cfg: &SweepConfig, seed: u64) -> BoundaryMap {
    add_noise(
        clean,
        &NoiseSpec {
            gaussian_sigma: sigma,
            spike_rate: cfg.spike_rate,
            spike_magnitude: cfg.spike_magnitude,
            seed,
        },
    )
    .clamped(cam)
}

fn pipeline_for(cfg: &SweepConfig, sigma: f64) -> PipelineConfig {
    let mut p = cfg.pipeline.clone();
    p.ransac.inlier_threshold = p.ransac.inlier_threshold.max(cfg.threshold_sigmas * sigma);
    p
}

fn run_task(room: &CorpusRoom, clean: &BoundaryMap, cam: &CameraModel, cfg: &SweepConfig, si: usize, trial: usize) -> SweepRow {
    let sigma = cfg.sigmas[si];
    let seed = task_seed(cfg.seed, &[room.seed, si as u64, trial as u64]);
    let bm = noisy_boundaries(clean, cam, sigma, cfg, seed);
    let mut row = SweepRow {
        sigma,
        room: room.id.clone(),
        trial,
        world: room.world,
        status: "ok".into(),
        dir_err_deg: f64::NAN,
        depth_err_m: f64::NAN,
        ce_m: f64::NAN,
        iou3d_pct: f64::NAN,
    };
    let report: Result<EvalReport, String> = recover_layout(&bm, cam, room.world, &pipeline_for(cfg, sigma))
        .map_err(|e| e.stage().to_string())
        .and_then(|r| evaluate(&r.layout, &room.layout).map_err(|_| "eval".to_string()));
    match report {
        Ok(e) => {
            row.dir_err_deg = e.mean_dir_err_deg();
            row.depth_err_m = e.mean_depth_err_m();
            row.ce_m = e.ce_m;
            row.iou3d_pct = e.iou3d_pct;
        }
        Err(stage) => row.status = stage,
    }
    row
}

/// Runs every `(room, sigma, trial)` task on the current rayon pool. The
/// output order and contents do not depend on the number of threads.
pub fn run_sweep(corpus: &[CorpusRoom], cam: &CameraModel, cfg: &SweepConfig) -> Result<SweepResult, SynthError> {
    let clean: Vec<BoundaryMap> = corpus
        .iter()
        .map(|r| project_layout_detailed(&r.layout, cam).map(|p| p.boundary))
        .collect::<Result<_, _>>()?;
    let tasks: Vec<(usize, usize, usize)> = (0..cfg.sigmas.len())
        .flat_map(|si| (0..corpus.len()).flat_map(move |ri| (0..cfg.trials).map(move |t| (si, ri, t))))
        .collect();
    let rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|&(si, ri, t)| run_task(&corpus[ri], &clean[ri], cam, cfg, si, t))
        .collect();
    let medians = cfg
        .sigmas
        .iter()
        .map(|&sigma| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.sigma == sigma).collect();
            let ok: Vec<&&SweepRow> = group.iter().filter(|r| r.status == "ok").collect();
            let col = |f: fn(&SweepRow) -> f64| median(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            SweepMedian {
                sigma,
                trials: group.len(),
                failures: group.len() - ok.len(),
                dir_err_deg: col(|r| r.dir_err_deg),
                depth_err_m: col(|r| r.depth_err_m),
                ce_m: col(|r| r.ce_m),
                iou3d_pct: col(|r| r.iou3d_pct),
            }
        })
        .collect();
    Ok(SweepResult { rows, medians })
}

pub const SWEEP_CSV_HEADER: &str = "kind,sigma,room,trial,world,status,dir_err_deg,depth_err_m,ce_m,iou3d_pct";

/// Long format: one `trial` row per task, then one `median` row per sigma.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "trial,{},{},{},{},{},{:.9},{:.9},{:.9},{:.6}",
            r.sigma, r.room, r.trial, r.world, r.status, r.dir_err_deg, r.depth_err_m, r.ce_m, r.iou3d_pct
        );
    }
    for m in &result.medians {
        let _ = writeln!(
            out,
            "median,{},,{},,{},{:.9},{:.9},{:.9},{:.6}",
            m.sigma,
            m.trials,
            if m.failures == 0 { "ok".to_string() } else { format!("failures={}", m.failures) },
            m.dir_err_deg,
            m.depth_err_m,
            m.ce_m,
            m.iou3d_pct
        );
    }
    out
}

/// Line chart of the per-sigma medians on log-log axes.
pub fn sweep_svg(medians: &[SweepMedian]) -> String {
    let (w, h, pad) = (640.0, 400.0, 60.0);
    let pts: Vec<&SweepMedian> = medians.iter().filter(|m| m.sigma > 0.0).collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let series: [(&str, &str, fn(&SweepMedian) -> f64); 3] = [
        ("direction error (deg)", "#1f77b4", |m| m.dir_err_deg),
        ("depth error (m)", "#ff7f0e", |m| m.depth_err_m),
        ("corner error (m)", "#2ca02c", |m| m.ce_m),
    ];
    let vals: Vec<f64> = pts
        .iter()
        .flat_map(|m| series.iter().map(move |s| (s.2)(m)))
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    if pts.len() < 2 || vals.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (x0, x1) = (pts[0].sigma.log10(), pts[pts.len() - 1].sigma.log10());
    let y0 = vals.iter().cloned().fold(f64::INFINITY, f64::min).log10().floor();
    let y1 = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max).log10().ceil().max(y0 + 1.0);
    let px = |s: f64| pad + (s.log10() - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
    let py = |v: f64| h - pad - (v.log10() - y0) / (y1 - y0) * (h - 2.0 * pad);
    let _ = writeln!(
        svg,
        "<path d=\"M{pad},{pad} V{} H{}\" stroke=\"black\" fill=\"none\"/>",
        h - pad,
        w - pad
    );
    for m in &pts {
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>", px(m.sigma), h - pad + 18.0, m.sigma);
    }
    let mut e = y0 as i32;
    while e as f64 <= y1 {
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">1e{e}</text>", pad - 6.0, py(10f64.powi(e)) + 4.0);
        e += 1;
    }
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">noise sigma (px)</text>", w / 2.0, h - 15.0);
    for (k, (name, color, f)) in series.iter().enumerate() {
        let path: Vec<String> = pts
            .iter()
            .filter(|m| f(m) > 0.0 && f(m).is_finite())
            .map(|m| format!("{:.1},{:.1}", px(m.sigma), py(f(m))))
            .collect();
        let _ = writeln!(svg, "<polyline points=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"2\"/>", path.join(" "));
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{name}</text>",
            pad + 10.0,
            pad + 16.0 * (k as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Per-wall ceiling and floor direction errors of the independent
/// single-wall extractor and of the joint Manhattan solver on the same
/// noisy columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverComparison {
    pub single_dir_deg: Vec<f64>,
    pub joint_dir_deg: Vec<f64>,
    /// Trials in which some wall could not be solved.
    pub single_failures: usize,
    pub joint_failures: usize,
}

/// Columns are assigned with the ground-truth visibility, dropping one
/// column next to every wall transition.
pub fn compare_solvers(
    corpus: &[CorpusRoom],
    cam: &CameraModel,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<SolverComparison, SynthError> {
    let rooms: Vec<&CorpusRoom> = corpus.iter().filter(|r| r.world == World::Manhattan).collect();
    let per_task: Vec<(Option<Vec<f64>>, Option<Vec<f64>>)> = rooms
        .iter()
        .map(|r| project_layout_detailed(&r.layout, cam))
        .collect::<Result<Vec<_>, _>>()?
        .into_par_iter()
        .zip(rooms.par_iter())
        .flat_map_iter(|(p, room)| {
            let n = room.layout.len();
            let cols = p.visibility.column_wall.len();
            let columns: Vec<Vec<usize>> = (0..n)
                .map(|k| {
                    (0..cols)
                        .filter(|&j| {
                            let w = p.visibility.column_wall[j];
                            w == k
                                && p.visibility.column_wall[(j + 1) % cols] == k
                                && p.visibility.column_wall[(j + cols - 1) % cols] == k
                        })
                        .collect()
                })
                .collect();
            let (labels, _) = cluster_directions(&room.layout.walls);
            (0..trials).map(move |t| {
                let bm = add_noise(&p.boundary, &NoiseSpec::gaussian(sigma, task_seed(seed, &[room.seed, t as u64])));
                let sets: Vec<RaySet> = columns.iter().map(|c| bm.ray_set(cam, c)).collect();
                let gt = &room.layout.walls;
                let pair = |w: &crate::solvers::Wall, g: &crate::solvers::Wall| {
                    [
                        direction_error(&w.ceiling_line(), &g.ceiling_line()),
                        direction_error(&w.floor_line(), &g.floor_line()),
                    ]
                };
                let single: Option<Vec<f64>> = sets
                    .iter()
                    .zip(gt)
                    .map(|(set, g)| extract_wall(set).ok().map(|s| pair(&s.wall, g)))
                    .collect::<Option<Vec<_>>>()
                    .map(|v| v.concat());
                let joint = solve_manhattan(&sets, &labels)
                    .ok()
                    .map(|sol| sol.walls.iter().zip(gt).flat_map(|(w, g)| pair(w, g)).collect());
                (single, joint)
            })
        })
        .collect();
    let mut out = SolverComparison::default();
    for (s, j) in per_task {
        match s {
            Some(s) => out.single_dir_deg.extend(s),
            None => out.single_failures += 1,
        }
        match j {
            Some(j) => out.joint_dir_deg.extend(j),
            None => out.joint_failures += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_seeds_are_distinct() {
        let a = task_seed(1, &[2, 0, 0]);
        assert_ne!(a, task_seed(1, &[2, 0, 1]));
        assert_ne!(a, task_seed(1, &[2, 1, 0]));
        assert_ne!(a, task_seed(2, &[2, 0, 0]));
        assert_eq!(a, task_seed(1, &[2, 0, 0]));
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn noiseless_sweep_is_exact() {
        let cam = CameraModel::default();
        let corpus = unoccluded_corpus(2, 1, 4, &cam).unwrap();
        assert_eq!(corpus.len(), 3);
        let cfg = SweepConfig {
            sigmas: vec![0.0],
            ..SweepConfig::default()
        };
        let res = run_sweep(&corpus, &cam, &cfg).unwrap();
        let m = &res.medians[0];
        assert_eq!(m.failures, 0);
        assert!(m.ce_m < 1e-4 && m.dir_err_deg < 1e-4 && m.depth_err_m < 1e-4);
        let csv = sweep_csv(&res);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + 3 + 1);
    }

    #[test]
    fn svg_has_three_series() {
        let m = |sigma: f64| SweepMedian {
            sigma,
            trials: 1,
            failures: 0,
            dir_err_deg: sigma,
            depth_err_m: sigma / 100.0,
            ce_m: sigma / 10.0,
            iou3d_pct: 99.0,
        };
        let svg = sweep_svg(&[m(0.1), m(1.0)]);
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}
