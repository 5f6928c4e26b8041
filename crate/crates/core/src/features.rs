//! Per-frame gesturelet descriptors: hip-relative pose, joint velocity, joint
//! acceleration and joint-angle speed, weighted and normalized to unit length.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{Imputer, SkeletonFrame, SkeletonLayout, SkeletonSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GestureletConfig {
    /// Velocity weight.
    pub alpha: f64,
    /// Acceleration weight.
    pub beta: f64,
    /// Angle-speed weight.
    pub gamma: f64,
    /// Half-window of the symmetric finite differences, in frames.
    pub lag: usize,
}

impl Default for GestureletConfig {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            beta: 0.4,
            gamma: 1.0,
            lag: 2,
        }
    }
}

impl GestureletConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha, self.beta, self.gamma];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config(format!("feature weights must be finite and >= 0: {w:?}")));
        }
        if self.lag == 0 {
            return Err(Error::Config("lag must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gesturelet {
    pub frame_index: u64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointAngles {
    pub values: Vec<f64>,
    /// Set where a bone had zero length and the angle was defined as 0.
    pub degenerate: Vec<bool>,
}

/// Joint coordinates minus the hip center.
pub fn hip_relative(coords: &[f64], layout: &SkeletonLayout) -> Vec<f64> {
    let hip = layout.hip_center_of(coords);
    let d = layout.dims;
    coords.iter().enumerate().map(|(i, x)| x - hip[i % d]).collect()
}

/// Divides hip-relative positions by their RMS distance to the hip, removing body
/// scale before differencing. A collapsed skeleton maps to zeros.
fn scale_normalized(rel: &[f64], layout: &SkeletonLayout) -> Vec<f64> {
    let joints = layout.joint_count() as f64;
    let rms = (rel.iter().map(|x| x * x).sum::<f64>() / joints).sqrt();
    if rms > 0.0 {
        rel.iter().map(|x| x / rms).collect()
    } else {
        vec![0.0; rel.len()]
    }
}

/// Symmetric first and second differences at `t`, shrinking the span near the
/// edges and switching to one-sided differences at the first and last sample.
fn differences<S: AsRef<[f64]>>(series: &[S], t: usize, lag: usize) -> (Vec<f64>, Vec<f64>) {
    let n = series.len();
    let dim = series[t].as_ref().len();
    let at = |i: usize| series[i].as_ref();
    if n == 1 {
        return (vec![0.0; dim], vec![0.0; dim]);
    }
    let l = lag.min(t).min(n - 1 - t);
    if l >= 1 {
        let (lo, mid, hi) = (at(t - l), at(t), at(t + l));
        let lf = l as f64;
        let v = (0..dim).map(|k| (hi[k] - lo[k]) / (2.0 * lf)).collect();
        let a = (0..dim).map(|k| (hi[k] + lo[k] - 2.0 * mid[k]) / (lf * lf)).collect();
        return (v, a);
    }
    let forward = t == 0;
    let s = lag.min(n - 1);
    let s2 = lag.min((n - 1) / 2);
    let step = |k: usize| if forward { t + k } else { t - k };
    let sign = if forward { 1.0 } else { -1.0 };
    let (p0, p1) = (at(t), at(step(s)));
    let v = (0..dim).map(|k| sign * (p1[k] - p0[k]) / s as f64).collect();
    let a = if s2 >= 1 {
        let (q1, q2) = (at(step(s2)), at(step(2 * s2)));
        let s2f = (s2 * s2) as f64;
        (0..dim).map(|k| (q2[k] - 2.0 * q1[k] + p0[k]) / s2f).collect()
    } else {
        vec![0.0; dim]
    };
    (v, a)
}

fn imputed_prefix(seq: &SkeletonSequence, layout: &SkeletonLayout, end: usize) -> Vec<Vec<f64>> {
    let mut imp = Imputer::new(layout);
    seq.frames[..end].iter().map(|f| imp.impute(f, layout)).collect()
}

/// Hip-relative position, velocity and acceleration of every joint at frame `t`,
/// in coordinate units per frame (and per frame squared).
pub fn joint_kinematics(seq: &SkeletonSequence, layout: &SkeletonLayout, t: usize, lag: usize) -> Result<Kinematics> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if t >= seq.len() {
        return Err(Error::OutOfRange {
            index: t,
            len: seq.len(),
        });
    }
    let positions: Vec<Vec<f64>> = imputed_prefix(seq, layout, seq.len())
        .iter()
        .map(|c| hip_relative(c, layout))
        .collect();
    let (velocity, acceleration) = differences(&positions, t, lag);
    Ok(Kinematics {
        position: positions[t].clone(),
        velocity,
        acceleration,
    })
}

fn angles_of(coords: &[f64], layout: &SkeletonLayout) -> JointAngles {
    let d = layout.dims;
    let mut values = Vec::with_capacity(layout.angle_count());
    let mut degenerate = Vec::with_capacity(layout.angle_count());
    for &[p, v, q] in &layout.angle_triplets {
        let bone = |a: usize| -> Vec<f64> { (0..d).map(|k| coords[a * d + k] - coords[v * d + k]).collect() };
        let (u, w) = (bone(p), bone(q));
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu == 0.0 || nw == 0.0 {
            values.push(0.0);
            degenerate.push(true);
            continue;
        }
        let cos = u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / (nu * nw);
        values.push(cos.clamp(-1.0, 1.0).acos());
        degenerate.push(false);
    }
    JointAngles { values, degenerate }
}

/// Angle at each triplet's vertex joint, in `[0, pi]`.
pub fn joint_angles(frame: &SkeletonFrame, layout: &SkeletonLayout) -> JointAngles {
    angles_of(&frame.joints, layout)
}

/// Pose signals of one frame: scale-normalized hip-relative positions and angles.
#[derive(Debug, Clone)]
struct PoseSignal {
    position: Vec<f64>,
    angles: Vec<f64>,
}

impl PoseSignal {
    fn from_coords(coords: &[f64], layout: &SkeletonLayout) -> Self {
        Self {
            position: scale_normalized(&hip_relative(coords, layout), layout),
            angles: angles_of(coords, layout).values,
        }
    }
}

fn assemble(frame_index: u64, signals: &[PoseSignal], t: usize, cfg: &GestureletConfig) -> Gesturelet {
    let pos: Vec<&[f64]> = signals.iter().map(|s| s.position.as_slice()).collect();
    let ang: Vec<&[f64]> = signals.iter().map(|s| s.angles.as_slice()).collect();
    let (vel, acc) = differences(&pos, t, cfg.lag);
    let (dtheta, _) = differences(&ang, t, cfg.lag);
    let mut vector = Vec::with_capacity(pos[t].len() * 3 + dtheta.len());
    vector.extend_from_slice(pos[t]);
    vector.extend(vel.iter().map(|x| cfg.alpha * x));
    vector.extend(acc.iter().map(|x| cfg.beta * x));
    vector.extend(dtheta.iter().map(|x| cfg.gamma * x));
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        vector.iter_mut().for_each(|x| *x /= norm);
    }
    Gesturelet { frame_index, vector }
}

fn check_frame(seq: &SkeletonSequence, t: usize) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if t >= seq.len() {
        return Err(Error::OutOfRange {
            index: t,
            len: seq.len(),
        });
    }
    Ok(())
}

/// Gesturelet of frame `t`. Only frames in `[t - 2 lag, t + 2 lag]` affect the
/// differences; earlier frames matter only through joint imputation.
pub fn extract_gesturelet(
    seq: &SkeletonSequence,
    t: usize,
    cfg: &GestureletConfig,
    layout: &SkeletonLayout,
) -> Result<Gesturelet> {
    check_frame(seq, t)?;
    let hi = (t + 2 * cfg.lag).min(seq.len() - 1);
    let lo = t.saturating_sub(2 * cfg.lag);
    let signals: Vec<PoseSignal> = imputed_prefix(seq, layout, hi + 1)[lo..]
        .iter()
        .map(|c| PoseSignal::from_coords(c, layout))
        .collect();
    Ok(assemble(seq.frames[t].frame_index, &signals, t - lo, cfg))
}

/// One gesturelet per frame, in order.
pub fn extract_sequence(
    seq: &SkeletonSequence,
    cfg: &GestureletConfig,
    layout: &SkeletonLayout,
) -> Result<Vec<Gesturelet>> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let signals: Vec<PoseSignal> = imputed_prefix(seq, layout, seq.len())
        .iter()
        .map(|c| PoseSignal::from_coords(c, layout))
        .collect();
    Ok((0..seq.len())
        .map(|t| assemble(seq.frames[t].frame_index, &signals, t, cfg))
        .collect())
}

/// Online gesturelet extraction. Each pushed frame completes the symmetric window
/// of the frame `lag` steps earlier, so output trails input by `lag` frames and
/// nothing is produced until `2 * lag + 1` frames have arrived.
#[derive(Debug, Clone)]
pub struct GestureletStream {
    cfg: GestureletConfig,
    layout: SkeletonLayout,
    imputer: Imputer,
    window: VecDeque<(u64, PoseSignal)>,
}

impl GestureletStream {
    pub fn new(cfg: GestureletConfig, layout: SkeletonLayout) -> Self {
        Self {
            imputer: Imputer::new(&layout),
            window: VecDeque::with_capacity(2 * cfg.lag + 1),
            cfg,
            layout,
        }
    }

    pub fn latency_frames(&self) -> usize {
        self.cfg.lag
    }

    pub fn reset(&mut self) {
        self.imputer.reset();
        self.window.clear();
    }

    pub fn push(&mut self, frame: &SkeletonFrame) -> Result<Option<Gesturelet>> {
        if !frame.matches_layout(&self.layout) {
            return Err(Error::ModelMismatch(format!(
                "frame has {} joints in {}D, layout {} expects {} in {}D",
                frame.joint_count(),
                frame.dims,
                self.layout.name,
                self.layout.joint_count(),
                self.layout.dims
            )));
        }
        let coords = self.imputer.impute(frame, &self.layout);
        let span = 2 * self.cfg.lag + 1;
        if self.window.len() == span {
            self.window.pop_front();
        }
        self.window
            .push_back((frame.frame_index, PoseSignal::from_coords(&coords, &self.layout)));
        if self.window.len() < span {
            return Ok(None);
        }
        let signals: Vec<PoseSignal> = self.window.iter().map(|(_, s)| s.clone()).collect();
        let center = self.window[self.cfg.lag].0;
        Ok(Some(assemble(center, &signals, self.cfg.lag, &self.cfg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::HipCenter;

    /// Two-joint 1D-ish layout: joint 0 is the hip, joint 1 moves.
    fn pair_layout() -> SkeletonLayout {
        SkeletonLayout {
            name: "pair".into(),
            joint_names: vec!["hip".into(), "hand".into(), "elbow".into()],
            hip_center: HipCenter::Joint(0),
            angle_triplets: vec![[0, 2, 1]],
            oks_kappas: vec![1.0; 3],
            dims: 2,
        }
    }

    fn seq_from_x(xs: &[f64]) -> SkeletonSequence {
        let layout = pair_layout();
        let frames = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                SkeletonFrame::fully_valid(i as u64, i as f64 / 30.0, 2, vec![0.0, 0.0, x, 0.0, 0.5, 1.0]).unwrap()
            })
            .collect();
        SkeletonSequence::new(&layout, frames, None, "t").unwrap()
    }

    #[test]
    fn stationary_sequence_has_zero_kinematics() {
        let seq = seq_from_x(&[1.0; 5]);
        for t in 0..5 {
            let k = joint_kinematics(&seq, &pair_layout(), t, 2).unwrap();
            assert!(k.velocity.iter().all(|&v| v == 0.0));
            assert!(k.acceleration.iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn central_differences_by_hand() {
        let seq = seq_from_x(&[0.0, 1.0, 4.0]);
        let k = joint_kinematics(&seq, &pair_layout(), 1, 1).unwrap();
        assert_eq!(k.velocity[2], 2.0);
        assert_eq!(k.acceleration[2], 2.0);
        assert_eq!(k.position[2], 1.0);
    }

    #[test]
    fn first_frame_uses_forward_difference() {
        let seq = seq_from_x(&[0.0, 1.0, 4.0]);
        let k = joint_kinematics(&seq, &pair_layout(), 0, 1).unwrap();
        assert_eq!(k.velocity[2], 1.0);
        // forward second difference over (0, 1, 4)
        assert_eq!(k.acceleration[2], 2.0);
        let last = joint_kinematics(&seq, &pair_layout(), 2, 1).unwrap();
        assert_eq!(last.velocity[2], 3.0);
    }

    #[test]
    fn kinematics_out_of_range() {
        let seq = seq_from_x(&[0.0, 1.0]);
        assert!(matches!(
            joint_kinematics(&seq, &pair_layout(), 2, 1),
            Err(Error::OutOfRange { index: 2, len: 2 })
        ));
    }

    fn angle_layout() -> SkeletonLayout {
        SkeletonLayout {
            angle_triplets: vec![[0, 1, 2]],
            ..pair_layout()
        }
    }

    fn angle_of(points: [(f64, f64); 3]) -> JointAngles {
        let joints = points.iter().flat_map(|&(x, y)| [x, y]).collect();
        joint_angles(&SkeletonFrame::fully_valid(0, 0.0, 2, joints).unwrap(), &angle_layout())
    }

    #[test]
    fn straight_limb_is_pi() {
        let a = angle_of([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert!((a.values[0] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn right_angle_by_dot_product() {
        let a = angle_of([(0.0, 1.0), (0.0, 0.0), (1.0, 0.0)]);
        assert!((a.values[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(!a.degenerate[0]);
    }

    #[test]
    fn zero_length_bone_flags_degenerate() {
        let a = angle_of([(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(a.values[0], 0.0);
        assert!(a.degenerate[0]);
    }

    #[test]
    fn weights_scale_blocks_before_normalization() {
        let layout = pair_layout();
        let seq = seq_from_x(&[0.0, 0.3, 1.1, 1.5, 2.6, 3.0, 3.2]);
        let ones = GestureletConfig {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            lag: 2,
        };
        let defaults = GestureletConfig::default();
        let a = extract_gesturelet(&seq, 3, &ones, &layout).unwrap();
        let b = extract_gesturelet(&seq, 3, &defaults, &layout).unwrap();
        let n = layout.dims * layout.joint_count();
        // Ratios between blocks change by exactly the weights, up to the common norm.
        let pos_ratio = b.vector[2] / a.vector[2];
        let factors = [(n, 0.8), (2 * n, 0.4), (3 * n, 1.0)];
        for (offset, w) in factors {
            for k in 0..n.min(layout.descriptor_len() - offset) {
                let (va, vb) = (a.vector[offset + k], b.vector[offset + k]);
                if va.abs() > 1e-12 {
                    assert!((vb / va - w * pos_ratio).abs() < 1e-9, "offset {offset} k {k}");
                }
            }
        }
    }

    #[test]
    fn stationary_descriptor_is_pose_only() {
        let layout = pair_layout();
        let seq = seq_from_x(&[2.0; 6]);
        let g = extract_gesturelet(&seq, 3, &GestureletConfig::default(), &layout).unwrap();
        let n = layout.dims * layout.joint_count();
        assert!(g.vector[n..].iter().all(|&x| x == 0.0));
        let norm: f64 = g.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_frame_sequence() {
        let layout = pair_layout();
        let seq = seq_from_x(&[2.0]);
        let gs = extract_sequence(&seq, &GestureletConfig::default(), &layout).unwrap();
        assert_eq!(gs.len(), 1);
        let n = layout.dims * layout.joint_count();
        assert!(gs[0].vector[n..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_sequence_rejected() {
        let layout = pair_layout();
        let seq = SkeletonSequence::new(&layout, vec![], None, "e").unwrap();
        assert!(matches!(
            extract_sequence(&seq, &GestureletConfig::default(), &layout),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn collapsed_skeleton_gives_zero_vector() {
        let layout = pair_layout();
        let frames = (0..3)
            .map(|i| SkeletonFrame::fully_valid(i, 0.0, 2, vec![1.0; 6]).unwrap())
            .collect();
        let seq = SkeletonSequence::new(&layout, frames, None, "z").unwrap();
        let g = extract_gesturelet(&seq, 1, &GestureletConfig::default(), &layout).unwrap();
        assert!(g.vector.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sequence_matches_per_frame_calls_on_ramp() {
        let layout = pair_layout();
        let xs: Vec<f64> = (0..40).map(|i| 0.1 * i as f64 + 0.01 * (i * i) as f64).collect();
        let seq = seq_from_x(&xs);
        let cfg = GestureletConfig::default();
        let all = extract_sequence(&seq, &cfg, &layout).unwrap();
        assert_eq!(all.len(), 40);
        for (t, g) in all.iter().enumerate() {
            assert_eq!(g.frame_index, t as u64);
            assert_eq!(g, &extract_gesturelet(&seq, t, &cfg, &layout).unwrap());
        }
    }

    #[test]
    fn stream_matches_offline_interior() {
        let layout = pair_layout();
        let xs: Vec<f64> = (0..20).map(|i| (i as f64 * 0.4).sin()).collect();
        let seq = seq_from_x(&xs);
        let cfg = GestureletConfig::default();
        let offline = extract_sequence(&seq, &cfg, &layout).unwrap();
        let mut online = GestureletStream::new(cfg, layout);
        let mut got = Vec::new();
        for f in &seq.frames {
            if let Some(g) = online.push(f).unwrap() {
                got.push(g);
            }
        }
        assert_eq!(got.len(), 20 - 2 * cfg.lag);
        for g in got {
            assert_eq!(g, offline[g.frame_index as usize]);
        }
    }
}
