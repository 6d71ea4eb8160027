use nalgebra::Vector2;
use ncl_core::camera::CameraModel;
use ncl_core::layout::Layout;
use ncl_core::metrics::evaluate;
use ncl_core::pipeline::{
    ransac_fit_walls, recover_layout, segment_walls, BoundaryMap, PipelineConfig, RansacConfig, SegmentConfig, World,
};
use ncl_core::sweep::{unoccluded_corpus, CorpusRoom};
use ncl_core::synth::{add_noise, occluded_room, project_layout, project_layout_detailed, NoiseSpec};

fn corpus(m: usize, a: usize, seed: u64) -> Vec<CorpusRoom> {
    unoccluded_corpus(m, a, seed, &CameraModel::default()).unwrap()
}

fn is_simple(corners: &[Vector2<f64>]) -> bool {
    let n = corners.len();
    let cross = |a: Vector2<f64>, b: Vector2<f64>| a.x * b.y - a.y * b.x;
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (p, r) = (corners[i], corners[(i + 1) % n] - corners[i]);
            let (q, s) = (corners[j], corners[(j + 1) % n] - corners[j]);
            let den = cross(r, s);
            if den.abs() < 1e-15 {
                continue;
            }
            let t = cross(q - p, s) / den;
            let u = cross(q - p, r) / den;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
                return false;
            }
        }
    }
    true
}

fn alternates(layout: &Layout) -> bool {
    let n = layout.len();
    (0..n).all(|i| layout.walls[i].u.dot(&layout.walls[(i + 1) % n].u).abs() < 1e-6)
}

#[test]
fn noiseless_round_trip() {
    let cam = CameraModel::default();
    for room in corpus(4, 4, 11) {
        let bm = project_layout(&room.layout, &cam).unwrap();
        let rec = recover_layout(&bm, &cam, room.world, &PipelineConfig::default()).unwrap();
        let report = evaluate(&rec.layout, &room.layout).unwrap();
        assert!(report.ce_m < 1e-3, "{}: ce {}", room.id, report.ce_m);
        assert_eq!(rec.layout.len(), room.layout.len());
        assert!(is_simple(&rec.layout.corners));
        if room.world == World::Manhattan {
            assert!(alternates(&rec.layout));
        }
    }
}

#[test]
fn scaling_room_and_radius_scales_the_result() {
    let cam = CameraModel::default();
    let s = 2.5;
    let big_cam = CameraModel::with_radius(s * cam.rc()).unwrap();
    for room in corpus(2, 2, 5) {
        let big = room.layout.transformed(0.0, Vector2::zeros(), s);
        let (bm, big_bm) = (project_layout(&room.layout, &cam).unwrap(), project_layout(&big, &big_cam).unwrap());
        let cfg = PipelineConfig::default();
        let a = recover_layout(&bm, &cam, room.world, &cfg).unwrap().layout;
        let b = recover_layout(&big_bm, &big_cam, room.world, &cfg).unwrap().layout;
        let rel = |x: f64, y: f64| (y - s * x).abs() / (s * x.abs()).max(1e-9);
        assert!(rel(a.h_c, b.h_c) < 1e-6 && rel(a.h_f, b.h_f) < 1e-6, "{}", room.id);
        for (p, q) in a.corners.iter().zip(&b.corners) {
            assert!((q - p * s).norm() < 1e-6 * s * p.norm().max(1.0), "{}", room.id);
        }
    }
}

#[test]
fn recovery_is_deterministic() {
    let cam = CameraModel::default();
    for room in corpus(1, 1, 3) {
        let clean = project_layout(&room.layout, &cam).unwrap();
        let bm = add_noise(&clean, &NoiseSpec { spike_rate: 0.1, spike_magnitude: 15.0, ..NoiseSpec::gaussian(0.5, 9) })
            .clamped(&cam);
        let cfg = PipelineConfig::default();
        let first = recover_layout(&bm, &cam, room.world, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let second = pool.install(|| recover_layout(&bm, &cam, room.world, &cfg)).unwrap();
        assert_eq!(first, second);
    }
}

#[test]
fn spiked_columns_are_outliers() {
    let cam = CameraModel::default();
    for room in corpus(2, 2, 21) {
        let mut bm = project_layout(&room.layout, &cam).unwrap();
        let spiked: Vec<usize> = (0..cam.cols()).step_by(7).collect();
        for &j in &spiked {
            bm.ceiling_row[j] = (bm.ceiling_row[j] + 20.0).min(cam.rows() as f64);
            bm.floor_row[j] = (bm.floor_row[j] - 20.0).max(0.0);
        }
        let segments = segment_walls(&bm, &SegmentConfig::default(), true).unwrap();
        let fits = ransac_fit_walls(&bm, &segments, &cam, &RansacConfig::default()).unwrap();
        for fit in &fits {
            let inliers = fit.inlier_columns();
            assert!(spiked.iter().all(|j| !inliers.contains(j)), "{}", room.id);
        }
    }
}

#[test]
fn adjustment_keeps_exact_solutions() {
    let cam = CameraModel::default();
    for room in corpus(2, 2, 8) {
        let bm = project_layout(&room.layout, &cam).unwrap();
        let rec = recover_layout(&bm, &cam, room.world, &PipelineConfig::default()).unwrap();
        let adj = rec.adjustment.as_ref().unwrap();
        assert!(adj.final_cost <= adj.initial_cost);
        for (p, q) in rec.layout.corners.iter().zip(&rec.initial.corners) {
            assert!((p - q).norm() < 1e-4, "{}", room.id);
        }
    }
}

#[test]
fn adjustment_reduces_noisy_corner_error() {
    let cam = CameraModel::default();
    let rooms = corpus(10, 10, 31);
    let mut better = 0;
    let mut total = 0;
    for (k, room) in rooms.iter().enumerate() {
        let clean = project_layout(&room.layout, &cam).unwrap();
        let bm = add_noise(&clean, &NoiseSpec::gaussian(0.5, 100 + k as u64)).clamped(&cam);
        let Ok(rec) = recover_layout(&bm, &cam, room.world, &PipelineConfig::default()) else {
            continue;
        };
        let before = evaluate(&rec.initial, &room.layout).unwrap().ce_m;
        let after = evaluate(&rec.layout, &room.layout).unwrap().ce_m;
        total += 1;
        if after < before {
            better += 1;
        }
    }
    assert!(total >= 18);
    assert!(better as f64 >= 0.9 * total as f64, "{better} of {total}");
}

#[test]
fn wrong_world_still_produces_a_layout() {
    let cam = CameraModel::default();
    for room in corpus(0, 3, 17) {
        let bm = project_layout(&room.layout, &cam).unwrap();
        if let Ok(rec) = recover_layout(&bm, &cam, World::Manhattan, &PipelineConfig::default()) {
            rec.layout.validate().unwrap();
            assert!(alternates(&rec.layout));
        }
    }
}

#[test]
fn occluded_rooms_recover_every_wall() {
    let cam = CameraModel::default();
    for seed in 0..4 {
        for atlanta in [false, true] {
            let gt = occluded_room(seed, atlanta, cam.rc()).unwrap();
            let world = if atlanta { World::Atlanta } else { World::Manhattan };
            let bm = project_layout(&gt, &cam).unwrap();
            let rec = recover_layout(&bm, &cam, world, &PipelineConfig::default()).unwrap();
            assert_eq!(rec.layout.len(), gt.len(), "seed {seed} atlanta {atlanta}");
            assert!(rec.inserted_walls >= 1);
            assert!(is_simple(&rec.layout.corners));
            if !atlanta {
                assert!(alternates(&rec.layout));
            }
        }
    }
}

#[test]
fn invalid_maps_are_input_errors() {
    let cam = CameraModel::default();
    let room = &corpus(1, 0, 2)[0];
    let mut bm: BoundaryMap = project_layout_detailed(&room.layout, &cam).unwrap().boundary;
    bm.floor_row[10] = f64::NAN;
    let err = recover_layout(&bm, &cam, World::Manhattan, &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.stage(), ncl_core::pipeline::Stage::Input);
    let partial = CameraModel::new(1.0, 512, 1024, [-1.5, 1.5], [-3.0, 3.0]).unwrap();
    assert!(recover_layout(&bm, &partial, World::Manhattan, &PipelineConfig::default()).is_err());
}

#[test]
fn convex_rooms_round_trip_tightly() {
    let cam = CameraModel::default();
    let convex = |l: &Layout| {
        let n = l.len();
        (0..n).all(|i| {
            let (a, b, c) = (l.corners[i], l.corners[(i + 1) % n], l.corners[(i + 2) % n]);
            let (e, f) = (b - a, c - b);
            e.x * f.y - e.y * f.x > 0.0
        })
    };
    let rooms: Vec<CorpusRoom> = corpus(40, 40, 13).into_iter().filter(|r| convex(&r.layout)).collect();
    assert!(rooms.len() >= 5);
    for room in &rooms {
        let bm = project_layout(&room.layout, &cam).unwrap();
        let rec = recover_layout(&bm, &cam, room.world, &PipelineConfig::default()).unwrap();
        let ce = evaluate(&rec.layout, &room.layout).unwrap().ce_m;
        assert!(ce < 1e-4, "{}: ce {ce}", room.id);
    }
}
