use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{corners_of, Anchor, BoundaryMap, PlanLine};
use crate::camera::CameraModel;
use crate::geom::wrap_pi;
use crate::layout::CornerSet;
use crate::plucker::{closest_point_on_line_to_ray, PluckerLine};
use crate::solvers::Wall;

/// Origin of a wall in an augmented wall list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    /// Index into the observed walls.
    Observed(usize),
    /// Inferred wall with no visible columns.
    Inserted,
}

/// Manhattan axis labels and the dominant angle (radians, in `(-pi/4, pi/4]`).
///
/// The dominant angle is the circular mean of `4 theta_i`. A wall gets
/// label 0 when its direction is within 45 degrees of the dominant angle
/// modulo 180 degrees; exact 45 degree offsets also get label 0.
pub fn cluster_directions(walls: &[Wall]) -> (Vec<u8>, f64) {
    let (s, c) = walls.iter().fold((0.0, 0.0), |(s, c), w| {
        let t = 4.0 * w.theta();
        (s + t.sin(), c + t.cos())
    });
    let star = if s.hypot(c) < 1e-9 * walls.len() as f64 {
        0.0
    } else {
        s.atan2(c) / 4.0
    };
    let labels = walls
        .iter()
        .map(|w| {
            let delta = (w.theta() - star).rem_euclid(PI);
            let off = delta.min(PI - delta);
            // tolerate rounding at the exact 45 degree tie
            u8::from(off > FRAC_PI_4 + 1e-12)
        })
        .collect();
    (labels, star)
}

fn push_inserted(lines: &mut Vec<PlanLine>, slots: &mut Vec<Slot>, line: PlanLine) -> usize {
    lines.push(line);
    slots.push(Slot::Inserted);
    lines.len() - 1
}

fn direction(a: f64) -> Vector2<f64> {
    Vector2::new(a.cos(), a.sin())
}

/// Inserts a perpendicular wall between every pair of consecutive walls that
/// share a label. `corner_azimuth[i]` is the azimuth of the corner column
/// between observed walls `i - 1` and `i`.
///
/// The inserted wall passes through the visible end of the nearer of the two
/// walls at that azimuth; that corner is returned as an anchor.
pub fn handle_occlusions_manhattan(
    walls: &[PlanLine],
    labels: &[u8],
    corner_azimuth: &[f64],
) -> (Vec<Slot>, Vec<PlanLine>, Vec<Anchor>) {
    let n = walls.len();
    let mut lines = Vec::with_capacity(n + 2);
    let mut slots = Vec::with_capacity(n + 2);
    // (inserted index, anchor sits on the preceding corner)
    let mut pending = Vec::new();
    for i in 0..n {
        lines.push(walls[i]);
        slots.push(Slot::Observed(i));
        let next = (i + 1) % n;
        if n < 2 || labels[i] != labels[next] {
            continue;
        }
        let a = corner_azimuth[next];
        let here = walls[i].radial_hit(a).unwrap_or(f64::INFINITY);
        let there = walls[next].radial_hit(a).unwrap_or(f64::INFINITY);
        let near_is_prev = here <= there;
        let rho = here.min(there);
        let p = direction(a) * if rho.is_finite() { rho } else { 1.0 };
        let mut alpha = walls[i].alpha + FRAC_PI_2;
        let mut d = direction(alpha).dot(&p);
        if d < 0.0 {
            alpha -= PI;
            d = -d;
        }
        let idx = push_inserted(&mut lines, &mut slots, PlanLine { alpha, d });
        pending.push((idx, near_is_prev, a));
    }
    let total = lines.len();
    let anchors = pending
        .into_iter()
        .map(|(idx, prev, azimuth)| Anchor {
            corner: if prev { idx } else { (idx + 1) % total },
            azimuth,
        })
        .collect();
    (slots, lines, anchors)
}

/// Output of [`handle_occlusions_atlanta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlantaCorners {
    pub slots: Vec<Slot>,
    pub lines: Vec<PlanLine>,
    pub anchors: Vec<Anchor>,
    /// Distance between the two walls' closest points to each corner ray.
    pub gaps: Vec<f64>,
    pub corners: CornerSet,
}

fn ceiling_line(line: &PlanLine, h_c: f64) -> PluckerLine {
    let n = line.normal();
    let p = Vector3::new(n.x * line.d, n.y * line.d, h_c);
    PluckerLine::from_point_direction(p, Vector3::new(-n.y, n.x, 0.0))
}

/// Corner handling for Atlanta layouts.
///
/// A corner whose two wall lines meet within two columns of the observed
/// corner column is a plain corner. Otherwise the closest points of both
/// ceiling lines to the corner's ceiling ray are compared: a gap above
/// `gap_threshold` inserts a wall lying in the vertical plane of that
/// column's rays, whose two corners are anchored to the plane. Gaps at or
/// below the threshold insert nothing.
pub fn handle_occlusions_atlanta(
    walls: &[PlanLine],
    h_c: f64,
    bm: &BoundaryMap,
    cam: &CameraModel,
    corner_columns: &[usize],
    gap_threshold: f64,
) -> AtlantaCorners {
    let n = walls.len();
    let step = 2.0 * PI / cam.cols() as f64;
    let mut lines = Vec::with_capacity(n + 2);
    let mut slots = Vec::with_capacity(n + 2);
    let mut gaps = Vec::with_capacity(n);
    let mut inserted = Vec::new();
    for i in 0..n {
        lines.push(walls[i]);
        slots.push(Slot::Observed(i));
        let next = (i + 1) % n;
        let col = corner_columns[next];
        let a = cam.column_azimuth(col);
        let meets = walls[i].intersect(&walls[next]);
        let plain = meets.is_some_and(|v| v.norm() > cam.rc() && wrap_pi(v.y.atan2(v.x) - a).abs() <= 2.0 * step);
        let (ray, _) = bm.column_rays(cam, col);
        let gap = match (
            closest_point_on_line_to_ray(&ceiling_line(&walls[i], h_c), &ray),
            closest_point_on_line_to_ray(&ceiling_line(&walls[next], h_c), &ray),
        ) {
            (Ok(p), Ok(q)) => (p - q).norm(),
            _ => f64::INFINITY,
        };
        gaps.push(gap);
        if plain || (gap <= gap_threshold && meets.is_some()) {
            continue;
        }
        let idx = push_inserted(
            &mut lines,
            &mut slots,
            PlanLine {
                alpha: a + FRAC_PI_2,
                d: 0.0,
            },
        );
        inserted.push((idx, a));
    }
    let total = lines.len();
    let mut anchors = Vec::with_capacity(2 * inserted.len());
    for (idx, azimuth) in inserted {
        anchors.push(Anchor { corner: idx, azimuth });
        anchors.push(Anchor {
            corner: (idx + 1) % total,
            azimuth,
        });
    }
    let corners = match corners_of(&lines) {
        Ok(c) => CornerSet {
            ceiling: c.iter().map(|p| Vector3::new(p.x, p.y, h_c)).collect(),
            floor: Vec::new(),
        },
        Err(_) => CornerSet {
            ceiling: Vec::new(),
            floor: Vec::new(),
        },
    };
    AtlantaCorners {
        slots,
        lines,
        anchors,
        gaps,
        corners,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walls_at(deg: &[f64]) -> Vec<Wall> {
        deg.iter().map(|d| Wall::from_angle(d.to_radians(), 2.0, 1.0, -1.0)).collect()
    }

    #[test]
    fn clustering_examples() {
        let (labels, star) = cluster_directions(&walls_at(&[0.0, 90.0, 0.5, 89.2]));
        assert_eq!(labels, vec![0, 1, 0, 1]);
        assert!(star.to_degrees().abs() < 1.0);

        let (labels, _) = cluster_directions(&walls_at(&[10.0, 190.0, 10.0]));
        assert_eq!(labels, vec![0, 0, 0]);

        let (labels, star) = cluster_directions(&walls_at(&[0.0, 45.0]));
        assert_eq!(star, 0.0);
        assert_eq!(labels, vec![0, 0]);
    }

    #[test]
    fn alternating_walls_are_untouched() {
        let walls: Vec<PlanLine> = [0.0, FRAC_PI_2, PI, -FRAC_PI_2]
            .iter()
            .map(|&alpha| PlanLine { alpha, d: 2.0 })
            .collect();
        let (slots, lines, anchors) = handle_occlusions_manhattan(&walls, &[0, 1, 0, 1], &[0.0; 4]);
        assert_eq!(lines, walls);
        assert!(anchors.is_empty());
        assert!(slots.iter().all(|s| matches!(s, Slot::Observed(_))));
    }

    #[test]
    fn same_label_neighbours_get_a_wall() {
        // step room: y = 2 wall up to x = 1, then y = 3 beyond; the step
        // face at x = 1 is hidden
        let walls = vec![
            PlanLine { alpha: 0.0, d: 3.0 },
            PlanLine { alpha: FRAC_PI_2, d: 3.0 },
            PlanLine { alpha: FRAC_PI_2, d: 2.0 },
            PlanLine { alpha: PI, d: 1.5 },
            PlanLine { alpha: -FRAC_PI_2, d: 1.5 },
        ];
        let corner_az = [0.0, 0.0, 2.0f64.atan2(1.0), 0.0, 0.0];
        let (slots, lines, anchors) = handle_occlusions_manhattan(&walls, &[0, 1, 1, 0, 1], &corner_az);
        assert_eq!(lines.len(), 6);
        assert_eq!(slots[2], Slot::Inserted);
        assert!((lines[2].normal() - Vector2::new(1.0, 0.0)).norm() < 1e-12);
        assert!((lines[2].d - 1.0).abs() < 1e-12);
        // occluding corner is the end of the nearer y = 2 wall
        assert_eq!(anchors, vec![Anchor { corner: 3, azimuth: corner_az[2] }]);
    }
}
