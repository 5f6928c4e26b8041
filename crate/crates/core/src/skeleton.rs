//! Skeleton layouts, frames, sequences and labeled timelines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the hip center of a layout is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HipCenter {
    Joint(usize),
    /// Mean of two joints, for layouts without a mid-hip joint.
    Midpoint(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonLayout {
    pub name: String,
    pub joint_names: Vec<String>,
    pub hip_center: HipCenter,
    /// (proximal, vertex, distal) joint triples.
    pub angle_triplets: Vec<[usize; 3]>,
    /// Per-joint OKS falloff constants.
    pub oks_kappas: Vec<f64>,
    pub dims: usize,
}

// COCO keypoint sigmas; kappa = 2 * sigma.
const K_NOSE: f64 = 0.052;
const K_EYE: f64 = 0.050;
const K_EAR: f64 = 0.070;
const K_SHOULDER: f64 = 0.158;
const K_ELBOW: f64 = 0.144;
const K_WRIST: f64 = 0.124;
const K_HIP: f64 = 0.214;
const K_KNEE: f64 = 0.174;
const K_ANKLE: f64 = 0.178;

impl SkeletonLayout {
    /// 18-joint 2D layout in the order emitted by common bottom-up pose estimators.
    pub fn openpose18() -> Self {
        let names = [
            "nose",
            "neck",
            "right_shoulder",
            "right_elbow",
            "right_wrist",
            "left_shoulder",
            "left_elbow",
            "left_wrist",
            "right_hip",
            "right_knee",
            "right_ankle",
            "left_hip",
            "left_knee",
            "left_ankle",
            "right_eye",
            "left_eye",
            "right_ear",
            "left_ear",
        ];
        let kappas = vec![
            K_NOSE, K_SHOULDER, K_SHOULDER, K_ELBOW, K_WRIST, K_SHOULDER, K_ELBOW, K_WRIST, K_HIP, K_KNEE, K_ANKLE,
            K_HIP, K_KNEE, K_ANKLE, K_EYE, K_EYE, K_EAR, K_EAR,
        ];
        Self {
            name: "openpose18".into(),
            joint_names: names.iter().map(|s| s.to_string()).collect(),
            hip_center: HipCenter::Midpoint(8, 11),
            angle_triplets: vec![
                [2, 3, 4],
                [5, 6, 7],
                [1, 2, 3],
                [1, 5, 6],
                [8, 9, 10],
                [11, 12, 13],
                [1, 8, 9],
                [1, 11, 12],
            ],
            oks_kappas: kappas,
            dims: 2,
        }
    }

    /// 25-joint 3D Kinect v2 layout used by NTU RGB+D skeleton files.
    pub fn ntu25() -> Self {
        let names = [
            "spine_base",
            "spine_mid",
            "neck",
            "head",
            "left_shoulder",
            "left_elbow",
            "left_wrist",
            "left_hand",
            "right_shoulder",
            "right_elbow",
            "right_wrist",
            "right_hand",
            "left_hip",
            "left_knee",
            "left_ankle",
            "left_foot",
            "right_hip",
            "right_knee",
            "right_ankle",
            "right_foot",
            "spine_shoulder",
            "left_hand_tip",
            "left_thumb",
            "right_hand_tip",
            "right_thumb",
        ];
        let kappas = vec![
            K_HIP, K_HIP, K_SHOULDER, K_NOSE, K_SHOULDER, K_ELBOW, K_WRIST, K_WRIST, K_SHOULDER, K_ELBOW, K_WRIST,
            K_WRIST, K_HIP, K_KNEE, K_ANKLE, K_ANKLE, K_HIP, K_KNEE, K_ANKLE, K_ANKLE, K_SHOULDER, K_WRIST, K_WRIST,
            K_WRIST, K_WRIST,
        ];
        Self {
            name: "ntu25".into(),
            joint_names: names.iter().map(|s| s.to_string()).collect(),
            hip_center: HipCenter::Joint(0),
            angle_triplets: vec![
                [4, 5, 6],
                [8, 9, 10],
                [20, 4, 5],
                [20, 8, 9],
                [12, 13, 14],
                [16, 17, 18],
                [0, 12, 13],
                [0, 16, 17],
            ],
            oks_kappas: kappas,
            dims: 3,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "openpose18" => Ok(Self::openpose18()),
            "ntu25" => Ok(Self::ntu25()),
            other => Err(Error::Config(format!("unknown layout {other:?}"))),
        }
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn angle_count(&self) -> usize {
        self.angle_triplets.len()
    }

    /// Length of a gesturelet built on this layout.
    pub fn descriptor_len(&self) -> usize {
        self.dims * self.joint_count() * 3 + self.angle_count()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.joint_count();
        let bad = |m: String| Err(Error::InvalidLayout(m));
        if j == 0 {
            return bad("no joints".into());
        }
        if self.dims != 2 && self.dims != 3 {
            return bad(format!("dims must be 2 or 3, got {}", self.dims));
        }
        match self.hip_center {
            HipCenter::Joint(a) if a >= j => return bad(format!("hip joint {a} out of range")),
            HipCenter::Midpoint(a, b) if a >= j || b >= j => return bad(format!("hip joints ({a}, {b}) out of range")),
            _ => {}
        }
        if self.angle_triplets.is_empty() {
            return bad("at least one angle triplet required".into());
        }
        for t in &self.angle_triplets {
            if t.iter().any(|&i| i >= j) {
                return bad(format!("triplet {t:?} out of range"));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return bad(format!("triplet {t:?} has repeated joints"));
            }
        }
        if self.oks_kappas.len() != j {
            return bad(format!("expected {j} OKS constants, got {}", self.oks_kappas.len()));
        }
        if self.oks_kappas.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return bad("OKS constants must be positive".into());
        }
        Ok(())
    }

    /// Hip center of a flat `J * dims` coordinate buffer.
    pub fn hip_center_of(&self, coords: &[f64]) -> Vec<f64> {
        let d = self.dims;
        match self.hip_center {
            HipCenter::Joint(a) => coords[a * d..(a + 1) * d].to_vec(),
            HipCenter::Midpoint(a, b) => (0..d).map(|k| 0.5 * (coords[a * d + k] + coords[b * d + k])).collect(),
        }
    }
}

/// One person's skeleton at one instant. Joint coordinates are stored flat, `J * dims`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub dims: usize,
    pub joints: Vec<f64>,
    pub confidence: Vec<f64>,
    pub valid: Vec<bool>,
}

impl SkeletonFrame {
    pub fn new(
        frame_index: u64,
        timestamp_s: f64,
        dims: usize,
        joints: Vec<f64>,
        confidence: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if dims == 0 || !joints.len().is_multiple_of(dims) {
            return Err(Error::InvalidFrame(format!(
                "{} coordinates is not a multiple of {dims}",
                joints.len()
            )));
        }
        let j = joints.len() / dims;
        if confidence.len() != j || valid.len() != j {
            return Err(Error::InvalidFrame(format!(
                "{j} joints but {} confidences and {} validity flags",
                confidence.len(),
                valid.len()
            )));
        }
        if confidence.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidFrame("confidence outside [0, 1]".into()));
        }
        Ok(Self {
            frame_index,
            timestamp_s,
            dims,
            joints,
            confidence,
            valid,
        })
    }

    /// Frame with every joint valid at full confidence.
    pub fn fully_valid(frame_index: u64, timestamp_s: f64, dims: usize, joints: Vec<f64>) -> Result<Self> {
        let j = if dims == 0 { 0 } else { joints.len() / dims };
        Self::new(frame_index, timestamp_s, dims, joints, vec![1.0; j], vec![true; j])
    }

    pub fn joint_count(&self) -> usize {
        self.valid.len()
    }

    pub fn joint(&self, j: usize) -> &[f64] {
        &self.joints[j * self.dims..(j + 1) * self.dims]
    }

    pub fn matches_layout(&self, layout: &SkeletonLayout) -> bool {
        self.dims == layout.dims && self.joint_count() == layout.joint_count()
    }

    pub fn with_index(mut self, frame_index: u64, timestamp_s: f64) -> Self {
        self.frame_index = frame_index;
        self.timestamp_s = timestamp_s;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    /// Product of side lengths (area in 2D, volume in 3D).
    pub fn volume(&self) -> f64 {
        self.min.iter().zip(&self.max).map(|(a, b)| (b - a).max(0.0)).product()
    }
}

/// Tight axis-aligned hull over the valid joints of a frame.
pub fn bounding_box(frame: &SkeletonFrame) -> Result<BoundingBox> {
    let d = frame.dims;
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    let mut any = false;
    for j in (0..frame.joint_count()).filter(|&j| frame.valid[j]) {
        any = true;
        for (k, &x) in frame.joint(j).iter().enumerate() {
            min[k] = min[k].min(x);
            max[k] = max[k].max(x);
        }
    }
    if !any {
        return Err(Error::NoValidJoints);
    }
    Ok(BoundingBox { min, max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSequence {
    pub layout: String,
    pub frames: Vec<SkeletonFrame>,
    pub label: Option<String>,
    pub source_id: String,
}

impl SkeletonSequence {
    pub fn new(
        layout: &SkeletonLayout,
        frames: Vec<SkeletonFrame>,
        label: Option<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        for f in &frames {
            if !f.matches_layout(layout) {
                return Err(Error::InvalidFrame(format!(
                    "frame {} has {} joints in {}D, layout {} wants {} in {}D",
                    f.frame_index,
                    f.joint_count(),
                    f.dims,
                    layout.name,
                    layout.joint_count(),
                    layout.dims
                )));
            }
        }
        for w in frames.windows(2) {
            if w[1].frame_index <= w[0].frame_index {
                return Err(Error::NonIncreasingFrames {
                    previous: w[0].frame_index,
                    current: w[1].frame_index,
                });
            }
        }
        Ok(Self {
            layout: layout.name.clone(),
            frames,
            label,
            source_id: source_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Fills invalid joints with the last valid observation of the same joint, falling
/// back to the hip center when a joint has never been seen.
#[derive(Debug, Clone)]
pub struct Imputer {
    dims: usize,
    last: Vec<Option<Vec<f64>>>,
}

impl Imputer {
    pub fn new(layout: &SkeletonLayout) -> Self {
        Self {
            dims: layout.dims,
            last: vec![None; layout.joint_count()],
        }
    }

    pub fn reset(&mut self) {
        self.last.iter_mut().for_each(|j| *j = None);
    }

    /// Returns flat, fully populated coordinates for `frame`.
    pub fn impute(&mut self, frame: &SkeletonFrame, layout: &SkeletonLayout) -> Vec<f64> {
        let d = self.dims;
        let j_count = self.last.len();
        let mut out = vec![0.0; j_count * d];
        let mut filled = vec![false; j_count];
        for j in 0..j_count {
            if frame.valid[j] {
                let p = frame.joint(j).to_vec();
                out[j * d..(j + 1) * d].copy_from_slice(&p);
                self.last[j] = Some(p);
                filled[j] = true;
            } else if let Some(p) = &self.last[j] {
                out[j * d..(j + 1) * d].copy_from_slice(p);
                filled[j] = true;
            }
        }
        if filled.iter().all(|&f| f) {
            return out;
        }
        let hips: Vec<usize> = match layout.hip_center {
            HipCenter::Joint(a) => vec![a],
            HipCenter::Midpoint(a, b) => vec![a, b],
        };
        let anchor_set: Vec<usize> = if hips.iter().all(|&h| filled[h]) {
            hips
        } else {
            (0..j_count).filter(|&j| filled[j]).collect()
        };
        let mut anchor = vec![0.0; d];
        if !anchor_set.is_empty() {
            for &j in &anchor_set {
                for k in 0..d {
                    anchor[k] += out[j * d + k];
                }
            }
            anchor.iter_mut().for_each(|a| *a /= anchor_set.len() as f64);
        }
        for j in (0..j_count).filter(|&j| !filled[j]) {
            out[j * d..(j + 1) * d].copy_from_slice(&anchor);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(rename = "class")]
    pub class_id: String,
    pub start_frame: u64,
    /// Inclusive.
    pub end_frame: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTimeline {
    pub length_frames: u64,
    pub segments: Vec<Segment>,
}

impl LabeledTimeline {
    pub fn new(length_frames: u64, segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if s.start_frame > s.end_frame || s.end_frame >= length_frames {
                return Err(Error::InvalidTimeline(format!(
                    "segment {}..={} of {:?} outside timeline of length {length_frames}",
                    s.start_frame, s.end_frame, s.class_id
                )));
            }
        }
        let mut sorted: Vec<&Segment> = segments.iter().collect();
        sorted.sort_by(|a, b| (&a.class_id, a.start_frame).cmp(&(&b.class_id, b.start_frame)));
        for w in sorted.windows(2) {
            if w[0].class_id == w[1].class_id && w[1].start_frame <= w[0].end_frame {
                return Err(Error::InvalidTimeline(format!(
                    "overlapping segments of {:?} at frame {}",
                    w[0].class_id, w[1].start_frame
                )));
            }
        }
        Ok(Self {
            length_frames,
            segments,
        })
    }

    /// Builds a timeline from possibly overlapping segments, merging same-class overlaps.
    pub fn merged(length_frames: u64, segments: impl IntoIterator<Item = Segment>) -> Result<Self> {
        let mut all: Vec<Segment> = segments.into_iter().collect();
        all.sort_by(|a, b| (&a.class_id, a.start_frame).cmp(&(&b.class_id, b.start_frame)));
        let mut out: Vec<Segment> = Vec::with_capacity(all.len());
        for s in all {
            match out.last_mut() {
                Some(prev) if prev.class_id == s.class_id && s.start_frame <= prev.end_frame => {
                    prev.end_frame = prev.end_frame.max(s.end_frame);
                }
                _ => out.push(s),
            }
        }
        Self::new(length_frames, out)
    }

    /// Per-frame membership of `class`.
    pub fn binary(&self, class: &str) -> Vec<bool> {
        let mut out = vec![false; self.length_frames as usize];
        for s in self.segments.iter().filter(|s| s.class_id == class) {
            out[s.start_frame as usize..=s.end_frame as usize]
                .iter_mut()
                .for_each(|f| *f = true);
        }
        out
    }
}
