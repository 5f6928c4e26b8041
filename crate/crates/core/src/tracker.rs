//! Multi-person tracking as a minimum-cost assignment between existing tracks
//! and new skeleton detections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{bounding_box, BoundingBox, SkeletonFrame, SkeletonLayout};

/// Intersection over union of two axis-aligned boxes. Two coincident degenerate
/// boxes have IoU 1.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter: f64 = a
        .min
        .iter()
        .zip(&a.max)
        .zip(b.min.iter().zip(&b.max))
        .map(|((amin, amax), (bmin, bmax))| (amax.min(*bmax) - amin.max(*bmin)).max(0.0))
        .product();
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Object keypoint similarity with an explicit squared scale `s2`.
pub fn oks_with_scale(a: &SkeletonFrame, b: &SkeletonFrame, kappas: &[f64], s2: f64) -> Result<f64> {
    let s2 = s2.max(1e-12);
    let mut total = 0.0;
    let mut n = 0usize;
    for j in 0..a.joint_count() {
        if !(a.valid[j] && b.valid[j]) {
            continue;
        }
        let d2: f64 = a.joint(j).iter().zip(b.joint(j)).map(|(x, y)| (x - y) * (x - y)).sum();
        total += (-d2 / (2.0 * s2 * kappas[j] * kappas[j])).exp();
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoCommonJoints);
    }
    Ok(total / n as f64)
}

/// OKS of `b` against reference skeleton `a`, scaled by `a`'s bounding-box area.
pub fn oks(a: &SkeletonFrame, b: &SkeletonFrame, layout: &SkeletonLayout) -> Result<f64> {
    if !a.matches_layout(layout) || !b.matches_layout(layout) {
        return Err(Error::InvalidFrame("skeletons do not match the layout".into()));
    }
    let s2 = bounding_box(a)
        .map(|bb| bb.volume())
        .map_err(|_| Error::NoCommonJoints)?;
    oks_with_scale(a, b, &layout.oks_kappas, s2)
}

/// Minimum-cost assignment via the O(n^3) potential-based Hungarian method.
/// Rectangular inputs are padded to square with a constant sentinel; only real
/// (row, col) pairs are returned, sorted by row.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let mut max = 0.0f64;
    for (i, r) in cost.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: r.len(),
            });
        }
        for (j, &c) in r.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFiniteCost { row: i, col: j });
            }
            max = max.max(c.abs());
        }
    }
    let n = rows.max(cols);
    let sentinel = max + 1.0;
    let at = |i: usize, j: usize| if i < rows && j < cols { cost[i][j] } else { sentinel };

    // 1-indexed potentials u (rows), v (cols); p[j] = row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .filter(|&(i, j)| i < rows && j < cols)
        .collect();
    pairs.sort_unstable();
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Iou,
    Oks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub similarity: Similarity,
    /// Minimum similarity for a match to be accepted.
    pub gate: f64,
    pub max_misses: u32,
    pub min_hits: u32,
}

impl TrackerConfig {
    pub fn with_similarity(similarity: Similarity) -> Self {
        Self {
            similarity,
            gate: match similarity {
                Similarity::Iou => 0.3,
                Similarity::Oks => 0.5,
            },
            max_misses: 5,
            min_hits: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gate) {
            return Err(Error::Config(format!("gate must be in [0, 1], got {}", self.gate)));
        }
        if self.max_misses == 0 {
            return Err(Error::Config("max_misses must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self::with_similarity(Similarity::Iou)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub last_frame: SkeletonFrame,
    pub hits: u32,
    pub misses: u32,
    pub confirmed: bool,
}

/// Result of one tracker step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    /// Track id per input detection; `None` for detections without valid joints.
    pub assignments: Vec<Option<u64>>,
    pub born: Vec<u64>,
    pub died: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    layout: SkeletonLayout,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, layout: SkeletonLayout) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            layout,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    fn similarity(&self, track: &SkeletonFrame, det: &SkeletonFrame) -> f64 {
        match self.cfg.similarity {
            Similarity::Iou => match (bounding_box(track), bounding_box(det)) {
                (Ok(a), Ok(b)) => iou(&a, &b),
                _ => 0.0,
            },
            Similarity::Oks => oks(track, det, &self.layout).unwrap_or(0.0),
        }
    }

    /// Matches detections to tracks, spawns tracks for unmatched detections and
    /// retires tracks that have missed `max_misses` consecutive steps.
    pub fn step(&mut self, detections: &[SkeletonFrame]) -> StepOutcome {
        let usable: Vec<usize> = (0..detections.len())
            .filter(|&j| detections[j].valid.iter().any(|&v| v))
            .collect();
        let mut outcome = StepOutcome {
            assignments: vec![None; detections.len()],
            ..StepOutcome::default()
        };
        let sims: Vec<Vec<f64>> = self
            .tracks
            .iter()
            .map(|t| {
                usable
                    .iter()
                    .map(|&j| self.similarity(&t.last_frame, &detections[j]))
                    .collect()
            })
            .collect();
        let mut matched_track = vec![false; self.tracks.len()];
        let mut matched_det = vec![false; usable.len()];
        if !self.tracks.is_empty() && !usable.is_empty() {
            let cost: Vec<Vec<f64>> = sims.iter().map(|r| r.iter().map(|s| 1.0 - s).collect()).collect();
            let pairs = hungarian(&cost).expect("similarities are finite");
            for (ti, dj) in pairs {
                if sims[ti][dj] < self.cfg.gate {
                    continue;
                }
                matched_track[ti] = true;
                matched_det[dj] = true;
                let track = &mut self.tracks[ti];
                track.last_frame = detections[usable[dj]].clone();
                track.hits += 1;
                track.misses = 0;
                if track.hits >= self.cfg.min_hits {
                    track.confirmed = true;
                }
                outcome.assignments[usable[dj]] = Some(track.id);
            }
        }
        let max_misses = self.cfg.max_misses;
        let mut kept = Vec::with_capacity(self.tracks.len());
        for (ti, mut track) in std::mem::take(&mut self.tracks).into_iter().enumerate() {
            if !matched_track[ti] {
                track.misses += 1;
                if track.misses >= max_misses {
                    outcome.died.push(track.id);
                    continue;
                }
            }
            kept.push(track);
        }
        self.tracks = kept;
        for (dj, &j) in usable.iter().enumerate() {
            if matched_det[dj] {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track {
                id,
                last_frame: detections[j].clone(),
                hits: 1,
                misses: 0,
                confirmed: self.cfg.min_hits <= 1,
            });
            outcome.assignments[j] = Some(id);
            outcome.born.push(id);
        }
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(min: [f64; 2], max: [f64; 2]) -> BoundingBox {
        BoundingBox {
            min: min.to_vec(),
            max: max.to_vec(),
        }
    }

    #[test]
    fn iou_examples() {
        let a = bb([0.0, 0.0], [2.0, 2.0]);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb([5.0, 5.0], [6.0, 6.0])), 0.0);
        // intersection 1, union 4 + 4 - 1
        assert!((iou(&a, &bb([1.0, 1.0], [3.0, 3.0])) - 1.0 / 7.0).abs() < 1e-12);
        let p = bb([1.0, 1.0], [1.0, 1.0]);
        assert_eq!(iou(&p, &p), 1.0);
        assert_eq!(iou(&p, &bb([2.0, 1.0], [2.0, 1.0])), 0.0);
    }

    fn skel(points: &[(f64, f64)]) -> SkeletonFrame {
        SkeletonFrame::fully_valid(0, 0.0, 2, points.iter().flat_map(|&(x, y)| [x, y]).collect()).unwrap()
    }

    #[test]
    fn oks_identical_is_one() {
        let layout = SkeletonLayout::openpose18();
        let pts: Vec<(f64, f64)> = (0..18).map(|i| (i as f64 * 0.1, (i % 5) as f64)).collect();
        let s = skel(&pts);
        assert_eq!(oks(&s, &s, &layout).unwrap(), 1.0);
    }

    #[test]
    fn oks_closed_form_single_joint() {
        let a = skel(&[(0.0, 0.0)]);
        for d in [0.0, 0.5, 1.0, 2.0] {
            let b = skel(&[(d, 0.0)]);
            let got = oks_with_scale(&a, &b, &[1.0], 1.0).unwrap();
            assert!((got - (-d * d / 2.0).exp()).abs() < 1e-15);
        }
        let far = skel(&[(1e6, 0.0)]);
        assert_eq!(oks_with_scale(&a, &far, &[1.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn oks_needs_common_joints() {
        let mut a = skel(&[(0.0, 0.0), (1.0, 1.0)]);
        let mut b = a.clone();
        a.valid = vec![true, false];
        b.valid = vec![false, true];
        assert!(matches!(
            oks_with_scale(&a, &b, &[1.0, 1.0], 1.0),
            Err(Error::NoCommonJoints)
        ));
    }

    fn total(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(i, j)| cost[i][j]).sum()
    }

    #[test]
    fn hungarian_examples() {
        let diag = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert_eq!(hungarian(&diag).unwrap(), vec![(0, 0), (1, 1), (2, 2)]);
        let m = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&m).unwrap();
        assert_eq!(a, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(total(&m, &a), 5.0);
        assert_eq!(hungarian(&[vec![3.5]]).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn hungarian_rectangular() {
        let wide = vec![vec![5.0, 1.0, 9.0]];
        assert_eq!(hungarian(&wide).unwrap(), vec![(0, 1)]);
        let tall = vec![vec![5.0], vec![1.0], vec![9.0]];
        assert_eq!(hungarian(&tall).unwrap(), vec![(1, 0)]);
    }

    #[test]
    fn hungarian_rejects_nan() {
        assert!(matches!(
            hungarian(&[vec![0.0, f64::NAN]]),
            Err(Error::NonFiniteCost { row: 0, col: 1 })
        ));
    }

    fn person(x: f64, y: f64, scale: f64) -> SkeletonFrame {
        let layout = SkeletonLayout::openpose18();
        let pts: Vec<(f64, f64)> = (0..layout.joint_count())
            .map(|j| {
                (
                    x + scale * ((j % 3) as f64 - 1.0) * 0.2,
                    y + scale * (j as f64 / 17.0 - 0.5),
                )
            })
            .collect();
        skel(&pts)
    }

    #[test]
    fn cold_start_spawns_tracks() {
        let mut t = Tracker::new(TrackerConfig::default(), SkeletonLayout::openpose18()).unwrap();
        let out = t.step(&[person(0.0, 0.0, 1.0), person(5.0, 0.0, 1.0)]);
        assert_eq!(out.born.len(), 2);
        assert_eq!(t.tracks().len(), 2);
        assert!(t.tracks().iter().all(|tr| !tr.confirmed));
    }

    #[test]
    fn stationary_people_keep_ids() {
        let mut t = Tracker::new(TrackerConfig::default(), SkeletonLayout::openpose18()).unwrap();
        let first = t.step(&[person(0.0, 0.0, 1.0), person(5.0, 0.0, 1.0)]).assignments;
        for i in 0..9 {
            let mut dets = vec![person(0.0, 0.0, 1.0), person(5.0, 0.0, 1.0)];
            if i % 2 == 0 {
                dets.reverse();
            }
            let out = t.step(&dets);
            let expect = if i % 2 == 0 {
                vec![first[1], first[0]]
            } else {
                first.clone()
            };
            assert_eq!(out.assignments, expect);
        }
        assert!(t.tracks().iter().all(|tr| tr.confirmed));
    }

    #[test]
    fn unmatched_track_dies_after_max_misses() {
        let cfg = TrackerConfig::default();
        let mut t = Tracker::new(cfg, SkeletonLayout::openpose18()).unwrap();
        t.step(&[person(0.0, 0.0, 1.0)]);
        for _ in 0..cfg.max_misses - 1 {
            assert!(t.step(&[]).died.is_empty());
        }
        assert_eq!(t.step(&[]).died, vec![0]);
        assert!(t.tracks().is_empty());
    }
}
