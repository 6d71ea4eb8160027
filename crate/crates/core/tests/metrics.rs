use nalgebra::{Vector2, Vector3};
use ncl_core::metrics::{depth_error, direction_error, evaluate};
use ncl_core::plucker::PluckerLine;
use ncl_core::synth::{generate_layout, LayoutSpec};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vector3<f64>> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

proptest! {
    #[test]
    fn direction_error_is_symmetric_and_sign_free(p in vec3(), d in vec3(), q in vec3(), e in vec3()) {
        prop_assume!(d.norm() > 1e-2 && e.norm() > 1e-2);
        let a = PluckerLine::from_point_direction(p, d);
        let b = PluckerLine::from_point_direction(q, e);
        let flipped = PluckerLine::new(-b.l, -b.lbar);
        prop_assert!((direction_error(&a, &b) - direction_error(&b, &a)).abs() < 1e-9);
        prop_assert!((direction_error(&a, &b) - direction_error(&a, &flipped)).abs() < 1e-9);
    }

    #[test]
    fn depth_error_ignores_line_scale(p in vec3(), d in vec3(), q in vec3(), e in vec3(), k in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64]) {
        prop_assume!(d.norm() > 1e-2 && e.norm() > 1e-2);
        let a = PluckerLine::from_point_direction(p, d);
        let b = PluckerLine::from_point_direction(q, e);
        let scaled = PluckerLine::new(a.l * k, a.lbar * k);
        prop_assert!((depth_error(&a, &b) - depth_error(&scaled, &b)).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_rotation_invariant(seed in 0u64..1000, rot in 0.0..std::f64::consts::TAU, dx in -0.2..0.2f64) {
        let gt = generate_layout(&LayoutSpec::with_seed(seed)).unwrap();
        let pred = gt.transformed(0.0, Vector2::new(dx, 0.0), 1.01);
        let base = evaluate(&pred, &gt).unwrap();
        let turned = evaluate(&pred.transformed(rot, Vector2::zeros(), 1.0), &gt.transformed(rot, Vector2::zeros(), 1.0)).unwrap();
        prop_assert!((base.ce_m - turned.ce_m).abs() < 1e-9);
        prop_assert!((base.scale_err_pct - turned.scale_err_pct).abs() < 1e-9);
        prop_assert!((base.iou3d_pct - turned.iou3d_pct).abs() < 0.5);
        prop_assert!((base.mean_dir_err_deg() - turned.mean_dir_err_deg()).abs() < 1e-6);
    }
}

#[test]
fn identical_layouts_score_perfectly() {
    for seed in 0..20 {
        let gt = generate_layout(&LayoutSpec { atlanta_clip_probability: 0.5, ..LayoutSpec::with_seed(seed) }).unwrap();
        let r = evaluate(&gt, &gt).unwrap();
        assert!(r.ce_m < 1e-12 && r.scale_err_pct < 1e-9 && r.mean_dir_err_deg() < 1e-6 && r.mean_depth_err_m() < 1e-9);
        assert!((r.iou3d_pct - 100.0).abs() < 1e-9 && (r.iou2d_pct - 100.0).abs() < 1e-9);
        assert!(!r.count_mismatch);
    }
}
