use serde::{Deserialize, Serialize};

use super::{BoundaryMap, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Width of the box filter applied to the corner score.
    pub smoothing: usize,
    pub threshold: f64,
    pub nms_radius: usize,
    /// Columns this close to a corner peak are left out of both walls.
    pub trim: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            smoothing: 5,
            threshold: 0.5,
            nms_radius: 4,
            trim: 1,
        }
    }
}

/// Columns of one visible wall, between two corner peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_corner: usize,
    pub end_corner: usize,
    pub columns: Vec<usize>,
}

fn smooth(score: &[f64], width: usize, cyclic: bool) -> Vec<f64> {
    let n = score.len() as isize;
    let half = (width / 2) as isize;
    (0..n)
        .map(|j| {
            let (mut sum, mut count) = (0.0, 0usize);
            for k in j - half..=j + half {
                let idx = if cyclic {
                    k.rem_euclid(n)
                } else if (0..n).contains(&k) {
                    k
                } else {
                    continue;
                };
                sum += score[idx as usize];
                count += 1;
            }
            sum / count as f64
        })
        .collect()
}

fn column_distance(a: usize, b: usize, n: usize, cyclic: bool) -> usize {
    let d = a.abs_diff(b);
    if cyclic {
        d.min(n - d)
    } else {
        d
    }
}

/// Corner columns: local maxima of the smoothed score above the threshold,
/// suppressed greedily (highest first, lower index on ties) within the NMS
/// radius.
pub fn corner_peaks(score: &[f64], cfg: &SegmentConfig, cyclic: bool) -> Vec<usize> {
    let n = score.len();
    let s = smooth(score, cfg.smoothing.max(1), cyclic);
    let r = cfg.nms_radius as isize;
    let is_max = |j: usize| {
        (-r..=r).all(|o| {
            let k = j as isize + o;
            let k = if cyclic {
                k.rem_euclid(n as isize)
            } else if (0..n as isize).contains(&k) {
                k
            } else {
                return true;
            } as usize;
            s[k] <= s[j]
        })
    };
    let mut order: Vec<usize> = (0..n).filter(|&j| s[j] >= cfg.threshold && is_max(j)).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut peaks: Vec<usize> = Vec::new();
    for j in order {
        if peaks.iter().all(|&p| column_distance(p, j, n, cyclic) > cfg.nms_radius) {
            peaks.push(j);
        }
    }
    peaks.sort_unstable();
    peaks
}

/// Splits the columns into one interval per visible wall.
pub fn segment_walls(bm: &BoundaryMap, cfg: &SegmentConfig, cyclic: bool) -> Result<Vec<Segment>, PipelineError> {
    let n = bm.len();
    let peaks = corner_peaks(&bm.corner_score, cfg, cyclic);
    let needed = if cyclic { 3 } else { 1 };
    if peaks.len() < needed {
        return Err(PipelineError::TooFewCorners(peaks.len()));
    }
    let interval = |a: usize, len: usize| -> Vec<usize> {
        (cfg.trim + 1..len.saturating_sub(cfg.trim))
            .map(|k| (a + k) % n)
            .collect()
    };
    let mut out = Vec::with_capacity(peaks.len() + 1);
    if cyclic {
        for (k, &a) in peaks.iter().enumerate() {
            let b = peaks[(k + 1) % peaks.len()];
            let len = (b + n - a) % n;
            out.push(Segment {
                start_corner: a,
                end_corner: b,
                columns: interval(a, len),
            });
        }
    } else {
        let first = peaks[0];
        let lead: Vec<usize> = (0..first.saturating_sub(cfg.trim)).collect();
        if !lead.is_empty() {
            out.push(Segment {
                start_corner: 0,
                end_corner: first,
                columns: lead,
            });
        }
        for w in peaks.windows(2) {
            out.push(Segment {
                start_corner: w[0],
                end_corner: w[1],
                columns: interval(w[0], w[1] - w[0]),
            });
        }
        let last = *peaks.last().unwrap();
        let tail: Vec<usize> = (last + cfg.trim + 1..n).collect();
        if !tail.is_empty() {
            out.push(Segment {
                start_corner: last,
                end_corner: n - 1,
                columns: tail,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::corner_label;

    fn bm(score: Vec<f64>) -> BoundaryMap {
        let n = score.len();
        BoundaryMap {
            ceiling_row: vec![400.0; n],
            floor_row: vec![100.0; n],
            corner_score: score,
        }
    }

    #[test]
    fn no_corners() {
        let r = segment_walls(&bm(vec![0.0; 64]), &SegmentConfig::default(), true);
        assert_eq!(r, Err(PipelineError::TooFewCorners(0)));
    }

    #[test]
    fn exact_labels_give_exact_peaks() {
        let corners = [10, 300, 301 + 200, 1000];
        let lab = corner_label(1024, &corners, true);
        let peaks = corner_peaks(&lab, &SegmentConfig::default(), true);
        assert_eq!(peaks, corners);
        let segs = segment_walls(&bm(lab), &SegmentConfig::default(), true).unwrap();
        assert_eq!(segs.len(), 4);
        // the wrap-around wall spans columns 1002..=1023 and 0..=8
        let last = &segs[3];
        assert_eq!(last.start_corner, 1000);
        assert_eq!(last.end_corner, 10);
        assert_eq!(last.columns.first(), Some(&1002));
        assert_eq!(last.columns.last(), Some(&8));
        assert_eq!(last.columns.len(), 31);
    }

    #[test]
    fn close_peaks_are_suppressed() {
        let lab = corner_label(256, &[50, 53, 150, 200], true);
        let peaks = corner_peaks(&lab, &SegmentConfig::default(), true);
        assert_eq!(peaks.len(), 3);
    }
}
