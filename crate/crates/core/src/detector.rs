//! Streaming detection: per-frame class scores, Kadane max-subarray accumulation
//! and threshold triggering, with the `vanilla`, `generated` and `neutral` variants.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{class_probability, classify_histogram, frame_score, GestureModel};
use crate::codebook::{sequence_histogram, Codebook, SoftAssignment};
use crate::digest;
use crate::error::{Error, Result};
use crate::features::{GestureletConfig, GestureletStream};
use crate::skeleton::{SkeletonFrame, SkeletonLayout};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum DetectorVariant {
    /// Fire as soon as a class's max-subarray score crosses its threshold.
    #[default]
    Vanilla,
    /// Additionally require the last `s` frame scores of the class to be non-positive.
    Generated { s: usize, augmentation: bool },
    /// Vanilla trigger with a trained neutral class whose firings only reset state.
    Neutral { neutral_class: String },
}

impl DetectorVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::Generated { .. } => "generated",
            Self::Neutral { .. } => "neutral",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Generated { s: 0, .. } => Err(Error::Config("generated variant needs s >= 1".into())),
            Self::Neutral { neutral_class } if neutral_class.is_empty() => {
                Err(Error::Config("neutral variant needs a class name".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KadaneState {
    pub best_sum: f64,
    /// Inclusive frame span of `best_sum`; `None` while the best is the empty subarray.
    pub best_span: Option<(u64, u64)>,
    pub cur_sum: f64,
    pub cur_start: Option<u64>,
    pub last_t: Option<u64>,
}

impl KadaneState {
    pub fn step(&mut self, x: f64, t: u64) -> Result<()> {
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(Error::NonMonotonicTime {
                    previous: prev,
                    current: t,
                });
            }
        }
        self.last_t = Some(t);
        if self.cur_start.is_none() || self.cur_sum <= 0.0 {
            self.cur_sum = x;
            self.cur_start = Some(t);
        } else {
            self.cur_sum += x;
        }
        if self.cur_sum > self.best_sum {
            self.best_sum = self.cur_sum;
            self.best_span = self.cur_start.map(|s| (s, t));
        }
        Ok(())
    }

    /// Forget accumulated sums but keep the time cursor.
    pub fn clear(&mut self) {
        *self = Self {
            last_t: self.last_t,
            ..Self::default()
        };
    }
}

/// Functional form of [`KadaneState::step`].
pub fn kadane_step(state: &KadaneState, x: f64, t: u64) -> Result<KadaneState> {
    let mut next = *state;
    next.step(x, t)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxSubarray {
    pub sum: f64,
    pub span: Option<(usize, usize)>,
}

/// Maximum-sum contiguous subarray, the empty subarray scoring 0.
pub fn max_subarray(scores: &[f64]) -> MaxSubarray {
    let mut best = MaxSubarray { sum: 0.0, span: None };
    let (mut cur, mut start) = (0.0, 0usize);
    for (i, &x) in scores.iter().enumerate() {
        if i == 0 || cur <= 0.0 {
            cur = x;
            start = i;
        } else {
            cur += x;
        }
        if cur > best.sum {
            best = MaxSubarray {
                sum: cur,
                span: Some((start, i)),
            };
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub class: String,
    pub class_index: usize,
    pub person_id: u64,
    pub start_frame: u64,
    pub end_frame: u64,
    /// Max-subarray score that crossed the threshold.
    pub score: f64,
    pub probability: f64,
    /// Argmax class of the span histogram.
    pub recognized_class: usize,
}

/// Everything needed to run detection: layout, features, codebook and model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorBundle {
    pub layout: SkeletonLayout,
    pub gesturelet: GestureletConfig,
    pub soft_bins: usize,
    pub codebook: Codebook,
    pub model: GestureModel,
    pub variant: DetectorVariant,
}

/// Digest binding a codebook to the feature pipeline it was built on.
pub fn feature_digest(layout: &SkeletonLayout, cfg: &GestureletConfig) -> String {
    digest::of(&(layout, cfg))
}

impl DetectorBundle {
    /// Checks that layout, codebook and model belong together.
    pub fn verify(&self) -> Result<()> {
        if self.codebook.config_digest != feature_digest(&self.layout, &self.gesturelet) {
            return Err(Error::ModelMismatch(
                "codebook was built for a different layout or feature configuration".into(),
            ));
        }
        if self.model.codebook_digest != digest::of(&self.codebook) {
            return Err(Error::ModelMismatch("model was trained on a different codebook".into()));
        }
        self.check_shapes()
    }

    /// The dimension checks of [`verify`](Self::verify), without hashing.
    pub fn check_shapes(&self) -> Result<()> {
        if self.codebook.dim() != self.layout.descriptor_len() {
            return Err(Error::ModelMismatch(format!(
                "codebook dimension {} does not match descriptor length {}",
                self.codebook.dim(),
                self.layout.descriptor_len()
            )));
        }
        if self.model.dim() != self.codebook.size() {
            return Err(Error::ModelMismatch(format!(
                "model has {} weights per class, codebook has {} clusters",
                self.model.dim(),
                self.codebook.size()
            )));
        }
        if self.soft_bins == 0 || self.soft_bins > self.codebook.size() {
            return Err(Error::ModelMismatch(format!(
                "soft-bin count {} out of range",
                self.soft_bins
            )));
        }
        if let DetectorVariant::Neutral { neutral_class } = &self.variant {
            let idx = self
                .model
                .class_index(neutral_class)
                .map_err(|_| Error::ModelMismatch(format!("neutral class {neutral_class:?} missing from model")))?;
            if self.model.neutral_class != Some(idx) {
                return Err(Error::ModelMismatch("model does not mark the neutral class".into()));
            }
        }
        Ok(())
    }
}

/// Anything that turns a frame stream into detection events.
pub trait StreamDetector {
    fn step(&mut self, frame: &SkeletonFrame) -> Result<Vec<DetectionEvent>>;
}

/// Per-person online detector. One caller at a time; bundles are shared.
#[derive(Debug, Clone)]
pub struct OnlineDetector {
    bundle: Arc<DetectorBundle>,
    person_id: u64,
    features: GestureletStream,
    kadane: Vec<KadaneState>,
    recent: Vec<VecDeque<f64>>,
    trailing: usize,
    assignments: VecDeque<(u64, SoftAssignment)>,
    buffer_bound: usize,
    neutral: Option<usize>,
    suppressed: usize,
    last_frame: Option<u64>,
}

impl OnlineDetector {
    pub fn new(bundle: Arc<DetectorBundle>, person_id: u64) -> Result<Self> {
        bundle.verify()?;
        Self::spawn(bundle, person_id)
    }

    /// Like [`new`](Self::new) but skips the digest checks, which hash the whole
    /// codebook. For bundles already verified once, e.g. by `load_model`, when
    /// detectors are created per tracked person.
    pub fn spawn(bundle: Arc<DetectorBundle>, person_id: u64) -> Result<Self> {
        bundle.check_shapes()?;
        let n = bundle.model.n_classes();
        let trailing = match bundle.variant {
            DetectorVariant::Generated { s, .. } => s,
            _ => 0,
        };
        let neutral = match &bundle.variant {
            DetectorVariant::Neutral { .. } => bundle.model.neutral_class,
            _ => None,
        };
        let buffer_bound = 4 * bundle.model.max_train_length.max(1);
        Ok(Self {
            features: GestureletStream::new(bundle.gesturelet, bundle.layout.clone()),
            kadane: vec![KadaneState::default(); n],
            recent: vec![VecDeque::with_capacity(trailing + 1); n],
            trailing,
            assignments: VecDeque::with_capacity(buffer_bound),
            buffer_bound,
            neutral,
            suppressed: 0,
            last_frame: None,
            person_id,
            bundle,
        })
    }

    pub fn bundle(&self) -> &DetectorBundle {
        &self.bundle
    }

    pub fn person_id(&self) -> u64 {
        self.person_id
    }

    pub fn kadane(&self) -> &[KadaneState] {
        &self.kadane
    }

    /// Neutral firings swallowed so far.
    pub fn suppressed_neutral(&self) -> usize {
        self.suppressed
    }

    pub fn buffered_assignments(&self) -> usize {
        self.assignments.len()
    }

    fn clear_detection(&mut self) {
        self.kadane.iter_mut().for_each(KadaneState::clear);
        self.recent.iter_mut().for_each(VecDeque::clear);
        self.assignments.clear();
    }

    /// Drops all state, including the feature window.
    pub fn reset(&mut self) {
        self.clear_detection();
        self.kadane = vec![KadaneState::default(); self.kadane.len()];
        self.features.reset();
        self.last_frame = None;
    }

    /// Class scores of one assignment.
    pub fn frame_scores(&self, assign: &SoftAssignment) -> Result<Vec<f64>> {
        (0..self.bundle.model.n_classes())
            .map(|c| frame_score(assign, &self.bundle.model, c))
            .collect()
    }

    fn trigger(&self) -> Option<usize> {
        let model = &self.bundle.model;
        let mut best: Option<(usize, f64)> = None;
        for (c, st) in self.kadane.iter().enumerate() {
            let theta = model.per_class[c].threshold;
            if st.best_span.is_none() || st.best_sum <= theta {
                continue;
            }
            if self.trailing > 0 {
                let r = &self.recent[c];
                if r.len() < self.trailing || r.iter().any(|&x| x > 0.0) {
                    continue;
                }
            }
            let margin = st.best_sum - theta;
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((c, margin));
            }
        }
        best.map(|(c, _)| c)
    }

    fn step_inner(&mut self, frame: &SkeletonFrame) -> Result<Vec<DetectionEvent>> {
        if let Some(prev) = self.last_frame {
            if frame.frame_index <= prev {
                return Err(Error::NonMonotonicTime {
                    previous: prev,
                    current: frame.frame_index,
                });
            }
        }
        let Some(g) = self.features.push(frame)? else {
            self.last_frame = Some(frame.frame_index);
            return Ok(Vec::new());
        };
        self.last_frame = Some(frame.frame_index);
        let assign = self.bundle.codebook.assign(&g.vector, self.bundle.soft_bins)?;
        let scores = self.frame_scores(&assign)?;
        if self.assignments.len() >= self.buffer_bound {
            self.clear_detection();
        }
        self.assignments.push_back((g.frame_index, assign));
        for (c, &s) in scores.iter().enumerate() {
            self.kadane[c].step(s, g.frame_index)?;
            if self.trailing > 0 {
                let r = &mut self.recent[c];
                if r.len() == self.trailing {
                    r.pop_front();
                }
                r.push_back(s);
            }
        }
        let Some(c) = self.trigger() else {
            return Ok(Vec::new());
        };
        let st = self.kadane[c];
        let (start, end) = st.best_span.expect("trigger requires a span");
        let hist = sequence_histogram(
            self.assignments
                .iter()
                .filter(|(t, _)| (start..=end).contains(t))
                .map(|(_, a)| a),
            self.bundle.codebook.size(),
        )?;
        let model = &self.bundle.model;
        // The event keeps the fired class; the span histogram's own argmax is
        // reported alongside.
        let (recognized, _) = classify_histogram(&hist, model)?;
        let probability = class_probability(&hist, model, c);
        let event = DetectionEvent {
            class: model.classes[c].clone(),
            class_index: c,
            person_id: self.person_id,
            start_frame: start,
            end_frame: end,
            score: st.best_sum,
            probability,
            recognized_class: recognized,
        };
        self.clear_detection();
        if Some(c) == self.neutral {
            self.suppressed += 1;
            return Ok(Vec::new());
        }
        Ok(vec![event])
    }
}

impl StreamDetector for OnlineDetector {
    fn step(&mut self, frame: &SkeletonFrame) -> Result<Vec<DetectionEvent>> {
        self.step_inner(frame)
    }
}

/// Training histograms, optionally augmented for the `generated` variant: each
/// sequence also contributes its assignments followed by the first quarter of a
/// randomly drawn sequence of another class, under its own label.
pub fn generate_augmented_histograms(
    sequences: &[(Vec<SoftAssignment>, usize)],
    k: usize,
    augmentation: bool,
    seed: u64,
) -> Result<Vec<(Vec<f64>, usize)>> {
    let mut out = Vec::with_capacity(if augmentation { 2 } else { 1 } * sequences.len());
    for (assigns, label) in sequences {
        out.push((sequence_histogram(assigns, k)?, *label));
    }
    if !augmentation {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (assigns, label) in sequences {
        let others: Vec<usize> = (0..sequences.len()).filter(|&j| sequences[j].1 != *label).collect();
        if others.is_empty() {
            return Err(Error::Config("augmentation needs at least two classes".into()));
        }
        let other = &sequences[others[rng.gen_range(0..others.len())]].0;
        let prefix = other.len().div_ceil(4);
        let hist = sequence_histogram(assigns.iter().chain(&other[..prefix]), k)?;
        out.push((hist, *label));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(xs: &[f64]) -> KadaneState {
        let mut st = KadaneState::default();
        for (t, &x) in xs.iter().enumerate() {
            st.step(x, t as u64).unwrap();
        }
        st
    }

    #[test]
    fn all_negative_stream_stays_empty() {
        let st = stream(&[-1.0, -0.5, -3.0]);
        assert_eq!(st.best_sum, 0.0);
        assert_eq!(st.best_span, None);
    }

    #[test]
    fn textbook_stream() {
        let st = stream(&[-2.0, 3.0, -1.0, 4.0, -5.0]);
        assert_eq!(st.best_sum, 6.0);
        assert_eq!(st.best_span, Some((1, 3)));
    }

    #[test]
    fn singleton_positive() {
        let st = kadane_step(&KadaneState::default(), 2.5, 7).unwrap();
        assert_eq!((st.best_sum, st.best_span), (2.5, Some((7, 7))));
    }

    #[test]
    fn time_must_increase() {
        let st = stream(&[1.0, 2.0]);
        assert!(matches!(
            kadane_step(&st, 1.0, 1),
            Err(Error::NonMonotonicTime {
                previous: 1,
                current: 1
            })
        ));
    }

    #[test]
    fn batch_examples() {
        assert_eq!(max_subarray(&[]), MaxSubarray { sum: 0.0, span: None });
        assert_eq!(
            max_subarray(&[1.0, 2.0, 3.0]),
            MaxSubarray {
                sum: 6.0,
                span: Some((0, 2))
            }
        );
    }

    fn assign(k: usize) -> SoftAssignment {
        SoftAssignment {
            entries: vec![(k, 1.0)],
        }
    }

    #[test]
    fn augmentation_off_is_identity() {
        let seqs = vec![(vec![assign(0), assign(1)], 0), (vec![assign(2)], 1)];
        let out = generate_augmented_histograms(&seqs, 3, false, 1).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].0, sequence_histogram(&seqs[0].0, 3).unwrap());
        assert_eq!(out[1], (vec![0.0, 0.0, 1.0], 1));
    }

    #[test]
    fn augmentation_doubles_and_mixes_linearly() {
        let seqs = vec![
            (vec![assign(0); 8], 0),
            (vec![assign(1), assign(2), assign(1), assign(2)], 1),
        ];
        let out = generate_augmented_histograms(&seqs, 3, true, 9).unwrap();
        assert_eq!(out.len(), 4);
        // seq 0 + first quarter (1 frame) of seq 1
        let h0 = sequence_histogram(&seqs[0].0, 3).unwrap();
        let hp = sequence_histogram(&seqs[1].0[..1], 3).unwrap();
        let expected: Vec<f64> = (0..3).map(|k| (8.0 * h0[k] + hp[k]) / 9.0).collect();
        for k in 0..3 {
            assert!((out[2].0[k] - expected[k]).abs() < 1e-12);
        }
        assert_eq!(out[2].1, 0);
        assert_eq!(out[3].1, 1);
        assert_eq!(out, generate_augmented_histograms(&seqs, 3, true, 9).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn streaming_equals_batch(xs in prop::collection::vec(-20i32..20, 0..60)) {
                let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
                let st = stream(&xs);
                let batch = max_subarray(&xs);
                prop_assert_eq!(st.best_sum, batch.sum);
                prop_assert_eq!(st.best_span.map(|(a, b)| (a as usize, b as usize)), batch.span);
            }
        }
    }
}
