//! Parametric 2D gesture generator on the 18-joint layout.
//!
//! A stick figure (y up, roughly metres) is posed per frame from a handful of
//! parameters: wrist targets solved with two-link arm IK, upper-body pitch seen
//! as vertical foreshortening, knee crouch and a global lift. Each sequence gets
//! its own scale, position, amplitude and phase jitter, and every coordinate
//! gets independent Gaussian noise.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::stream::{Person, StreamFrame};
use crate::skeleton::{LabeledTimeline, Segment, SkeletonFrame, SkeletonLayout, SkeletonSequence};

pub const GESTURES: [&str; 5] = ["bowing", "clapping", "drinking", "jumping", "waving"];
pub const NEUTRAL: &str = "neutral";
pub const FPS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub classes: Vec<String>,
    pub duration_mean: usize,
    pub duration_jitter: usize,
    pub neutral_duration_mean: usize,
    pub neutral_duration_jitter: usize,
    pub noise_sigma: f64,
    pub sequences_per_class: usize,
    /// Waving period in frames.
    pub wave_period: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: GESTURES.iter().chain([&NEUTRAL]).map(|s| s.to_string()).collect(),
            duration_mean: 40,
            duration_jitter: 10,
            neutral_duration_mean: 80,
            neutral_duration_jitter: 20,
            noise_sigma: 0.03,
            sequences_per_class: 60,
            wave_period: 10.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self, min_len: usize) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        for c in &self.classes {
            if !GESTURES.contains(&c.as_str()) && c != NEUTRAL {
                return Err(Error::UnknownClass(c.clone()));
            }
        }
        for (mean, jitter) in [
            (self.duration_mean, self.duration_jitter),
            (self.neutral_duration_mean, self.neutral_duration_jitter),
        ] {
            if mean < jitter || mean - jitter < min_len {
                return Err(Error::Config(format!(
                    "durations {mean} +/- {jitter} can fall below {min_len} frames"
                )));
            }
        }
        if !(self.wave_period >= 2.0) {
            return Err(Error::Config("wave period must be >= 2 frames".into()));
        }
        Ok(())
    }
}

type P2 = [f64; 2];

const UPPER_ARM: f64 = 0.28;
const FOREARM: f64 = 0.26;
const HIP_Y: f64 = 0.95;
const REST_R: P2 = [-0.06, -0.52];
const REST_L: P2 = [0.06, -0.52];

/// Pose parameters. Wrist targets are relative to the matching shoulder.
#[derive(Debug, Clone, Copy)]
struct Pose {
    pitch: f64,
    crouch: f64,
    lift: f64,
    right: P2,
    left: P2,
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            pitch: 0.0,
            crouch: 0.0,
            lift: 0.0,
            right: REST_R,
            left: REST_L,
        }
    }
}

fn lerp(a: P2, b: P2, w: f64) -> P2 {
    [a[0] + (b[0] - a[0]) * w, a[1] + (b[1] - a[1]) * w]
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Two-link IK; the elbow bends away from the body midline (`outward` = -1 for
/// the right arm, +1 for the left).
fn arm(shoulder: P2, target: P2, outward: f64) -> (P2, P2) {
    let dx = target[0] - shoulder[0];
    let dy = target[1] - shoulder[1];
    let reach = (dx * dx + dy * dy).sqrt();
    let d = reach.clamp((UPPER_ARM - FOREARM).abs() + 1e-6, UPPER_ARM + FOREARM - 1e-6);
    let (ux, uy) = if reach > 1e-9 {
        (dx / reach, dy / reach)
    } else {
        (0.0, -1.0)
    };
    let wrist = [shoulder[0] + ux * d, shoulder[1] + uy * d];
    let a = ((UPPER_ARM * UPPER_ARM + d * d - FOREARM * FOREARM) / (2.0 * UPPER_ARM * d))
        .clamp(-1.0, 1.0)
        .acos();
    let rot = |s: f64| {
        let (sin, cos) = (s * a).sin_cos();
        [
            shoulder[0] + UPPER_ARM * (ux * cos - uy * sin),
            shoulder[1] + UPPER_ARM * (ux * sin + uy * cos),
        ]
    };
    let (e1, e2) = (rot(1.0), rot(-1.0));
    let elbow = if (e1[0] - e2[0]) * outward >= 0.0 { e1 } else { e2 };
    (elbow, wrist)
}

/// 18 joints in the pose-estimator order.
fn render(p: &Pose) -> Vec<P2> {
    let hip_y = HIP_Y - 0.15 * p.crouch + p.lift;
    let ankle_y = 0.05 + p.lift;
    let knee_y = 0.5 * (hip_y + ankle_y);
    let knee_dx = 0.08 * p.crouch;
    // upper body: fixed offsets above the hip centre, foreshortened by pitch
    let fore = p.pitch.cos();
    let up = |x: f64, dy: f64| [x, hip_y + dy * fore];
    let neck = up(0.0, 0.50);
    let nose = up(0.0, 0.65);
    let rs = up(-0.18, 0.47);
    let ls = up(0.18, 0.47);
    let (re, rw) = arm(rs, [rs[0] + p.right[0], rs[1] + p.right[1]], -1.0);
    let (le, lw) = arm(ls, [ls[0] + p.left[0], ls[1] + p.left[1]], 1.0);
    vec![
        nose,
        neck,
        rs,
        re,
        rw,
        ls,
        le,
        lw,
        [-0.1, hip_y],
        [-0.1 - knee_dx, knee_y],
        [-0.1, ankle_y],
        [0.1, hip_y],
        [0.1 + knee_dx, knee_y],
        [0.1, ankle_y],
        up(-0.03, 0.68),
        up(0.03, 0.68),
        up(-0.07, 0.66),
        up(0.07, 0.66),
    ]
}

/// Shoulder-relative offset that puts a wrist at an absolute upper-body point
/// of the unpitched figure.
fn to_shoulder(right: bool, x: f64, dy_above_hip: f64) -> P2 {
    let sx = if right { -0.18 } else { 0.18 };
    [x - sx, dy_above_hip - 0.47]
}

/// Ramp-hold-return profile over u in [0, 1].
fn ramp_hold(u: f64) -> f64 {
    smoothstep(u / 0.3).min(smoothstep((1.0 - u) / 0.3))
}

/// Fade-in/fade-out envelope for periodic gestures.
fn envelope(u: f64) -> f64 {
    smoothstep(u / 0.15).min(smoothstep((1.0 - u) / 0.15))
}

struct Jitter {
    amp: f64,
    phase: f64,
    period: f64,
}

fn gesture_pose(class: &str, t: usize, len: usize, j: &Jitter) -> Pose {
    let u = if len > 1 { t as f64 / (len - 1) as f64 } else { 0.0 };
    let tf = t as f64;
    let mut p = Pose::default();
    match class {
        "waving" => {
            let w = envelope(u);
            let sway = (2.0 * PI * tf / j.period + j.phase).sin();
            p.right = lerp(REST_R, [-0.18 + 0.13 * j.amp * sway, 0.38], w);
        }
        "clapping" => {
            let w = envelope(u);
            let open = 0.5 * (1.0 + (2.0 * PI * tf / (0.8 * j.period) + j.phase).cos());
            let half = 0.02 + 0.16 * j.amp * open;
            p.right = lerp(REST_R, to_shoulder(true, -half, 0.30), w);
            p.left = lerp(REST_L, to_shoulder(false, half, 0.30), w);
        }
        "drinking" => {
            let w = ramp_hold(u);
            p.right = lerp(REST_R, to_shoulder(true, -0.03, 0.58), w);
        }
        "bowing" => {
            p.pitch = ramp_hold(u) * 1.0 * j.amp.min(1.15);
        }
        "jumping" => {
            let w = envelope(u);
            let phase = 2.0 * PI * tf / (1.4 * j.period) + j.phase;
            let air = phase.sin().max(0.0);
            let squat = (-phase.sin()).max(0.0);
            p.lift = w * 0.22 * j.amp * air;
            p.crouch = w * 0.7 * squat;
            p.right = lerp(REST_R, [-0.12, -0.20], w * air);
            p.left = lerp(REST_L, [0.12, -0.20], w * air);
        }
        _ => {}
    }
    p
}

/// Static idle poses. Several resemble a held phase of some gesture; the bare
/// arms-down rest pose is left out because every gesture already starts and
/// ends in it.
fn neutral_pose(kind: usize) -> Pose {
    let mut p = Pose::default();
    match kind {
        0 => {
            // hands on hips
            p.right = to_shoulder(true, -0.14, 0.02);
            p.left = to_shoulder(false, 0.14, 0.02);
        }
        1 => {
            // arms crossed
            p.right = to_shoulder(true, 0.10, 0.25);
            p.left = to_shoulder(false, -0.10, 0.22);
        }
        2 => {
            // hand at the chin
            p.right = to_shoulder(true, -0.02, 0.55);
        }
        3 => {
            // hands clasped at the chest
            p.right = to_shoulder(true, -0.02, 0.30);
            p.left = to_shoulder(false, 0.02, 0.30);
        }
        4 => {
            // hand raised
            p.right = [-0.16, 0.36];
        }
        5 => {
            // leaning forward
            p.pitch = 0.8;
        }
        _ => {
            // squatting
            p.crouch = 0.7;
        }
    }
    p
}

const NEUTRAL_KINDS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub sequences: Vec<SkeletonSequence>,
}

impl SynthDataset {
    /// Splits each class's sequences: the first `train_fraction` go to training.
    pub fn split(&self, train_fraction: f64) -> (Vec<SkeletonSequence>, Vec<SkeletonSequence>) {
        let mut classes: Vec<&str> = Vec::new();
        for s in &self.sequences {
            let c = s.label.as_deref().unwrap_or("");
            if !classes.contains(&c) {
                classes.push(c);
            }
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for c in classes {
            let of: Vec<&SkeletonSequence> = self
                .sequences
                .iter()
                .filter(|s| s.label.as_deref().unwrap_or("") == c)
                .collect();
            let n = ((of.len() as f64) * train_fraction).round() as usize;
            train.extend(of[..n].iter().map(|s| (*s).clone()));
            test.extend(of[n..].iter().map(|s| (*s).clone()));
        }
        (train, test)
    }
}

/// Generates `sequences_per_class` sequences of every configured class.
pub fn synth_gestures(cfg: &SynthConfig) -> Result<SynthDataset> {
    let layout = SkeletonLayout::openpose18();
    cfg.validate(1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut sequences = Vec::with_capacity(cfg.classes.len() * cfg.sequences_per_class);
    for class in &cfg.classes {
        let neutral = class == NEUTRAL;
        let (mean, jit) = if neutral {
            (cfg.neutral_duration_mean, cfg.neutral_duration_jitter)
        } else {
            (cfg.duration_mean, cfg.duration_jitter)
        };
        for i in 0..cfg.sequences_per_class {
            let len = rng.gen_range(mean - jit..=mean + jit);
            let scale = rng.gen_range(0.85..1.15);
            let offset = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3)];
            let jitter = Jitter {
                amp: rng.gen_range(0.85..1.15),
                phase: rng.gen_range(0.0..2.0 * PI),
                period: cfg.wave_period * rng.gen_range(0.9..1.1),
            };
            let idle = neutral.then(|| neutral_pose(rng.gen_range(0..NEUTRAL_KINDS)));
            let frames = (0..len)
                .map(|t| {
                    let pose = idle.unwrap_or_else(|| gesture_pose(class, t, len, &jitter));
                    let coords: Vec<f64> = render(&pose)
                        .into_iter()
                        .flat_map(|[x, y]| [x * scale + offset[0], y * scale + offset[1]])
                        .map(|v| v + noise.sample(&mut rng))
                        .collect();
                    SkeletonFrame::fully_valid(t as u64, t as f64 / FPS, 2, coords)
                })
                .collect::<Result<Vec<_>>>()?;
            sequences.push(SkeletonSequence::new(
                &layout,
                frames,
                Some(class.clone()),
                format!("synth-{class}-{i}"),
            )?);
        }
    }
    Ok(SynthDataset { sequences })
}

/// Concatenates sequences into one single-person stream with contiguous frame
/// indices, and the matching ground-truth timeline.
pub fn concatenate(sequences: &[SkeletonSequence]) -> Result<(Vec<SkeletonFrame>, LabeledTimeline)> {
    let mut frames = Vec::new();
    let mut segments = Vec::new();
    for s in sequences {
        if s.is_empty() {
            continue;
        }
        let start = frames.len() as u64;
        for f in &s.frames {
            let i = frames.len() as u64;
            frames.push(f.clone().with_index(i, i as f64 / FPS));
        }
        if let Some(label) = &s.label {
            segments.push(Segment {
                class_id: label.clone(),
                start_frame: start,
                end_frame: frames.len() as u64 - 1,
            });
        }
    }
    let timeline = LabeledTimeline::new(frames.len() as u64, segments)?;
    Ok((frames, timeline))
}

/// Wraps single-person frames as stream records.
pub fn as_stream(frames: Vec<SkeletonFrame>, id: Option<u64>) -> Vec<StreamFrame> {
    frames
        .into_iter()
        .map(|f| StreamFrame {
            frame_index: f.frame_index,
            t: f.timestamp_s,
            persons: vec![Person { id, skeleton: f }],
        })
        .collect()
}

/// Random order of `items` under `seed`.
pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}
