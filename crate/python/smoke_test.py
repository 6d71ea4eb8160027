"""Round trip through the Python module: synthesize, project, noise, recover, score.

Build first:  maturin develop -m crates/python/Cargo.toml --release
"""

import json
import math
import sys

import ncl_layout as ncl


def main() -> int:
    cam = ncl.Camera(rc=1.0)
    assert (cam.rows, cam.cols) == (512, 1024)
    assert json.loads(cam.to_json())["rc"] == 1.0

    i, j = cam.project_point(3.0, 0.0, 1.5)
    d, m = cam.backproject_pixel(i, j)
    assert abs(sum(a * b for a, b in zip(d, m))) < 1e-12

    square = ncl.Layout([(-1.7, -2.1), (2.3, -2.1), (2.3, 1.9), (-1.7, 1.9)], 1.3, -1.6)
    assert len(square) == 4 and square.is_manhattan()
    assert math.isclose(square.area(), 16.0)
    clean = ncl.project_layout(square, cam)
    parsed = ncl.BoundaryMap.from_csv(clean.to_csv())
    assert max(abs(a - b) for a, b in zip(parsed.ceiling_row, clean.ceiling_row)) < 1e-6

    rec = ncl.recover_layout(clean, cam, "manhattan")
    report = ncl.evaluate(rec.layout, square)
    assert report["ce_m"] < 1e-3, report
    assert report["iou3d_pct"] > 99.9, report

    gt = ncl.generate_layout(seed=11, atlanta_prob=0.0)
    noisy = ncl.add_noise(ncl.project_layout(gt, cam), sigma=0.5, seed=1).clamped(cam)
    rec = ncl.recover_layout(noisy, cam, "manhattan")
    report = ncl.evaluate(rec.layout, gt)
    print(f"{len(gt)} walls, CE {report['ce_m']:.4f} m, 3D IoU {report['iou3d_pct']:.2f}%")
    assert report["iou3d_pct"] > 80.0, report

    again = ncl.Layout.from_json(rec.layout.to_json())
    assert again.corners == rec.layout.corners

    expected = math.log(1 - 0.99) / math.log(1 - 0.5**2)
    assert math.isclose(ncl.required_hypotheses(0.99, 0.5, 2), expected, rel_tol=1e-12)

    try:
        ncl.recover_layout(ncl.BoundaryMap([1.0], [0.0], [0.0]), cam)
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("short boundary map accepted")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
