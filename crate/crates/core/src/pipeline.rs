//! End-to-end training, evaluation and hyper-parameter search.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    calibrate, classify_histogram, frame_score, learn_threshold, train_ovr, Calibration, ClassModel, GestureModel,
    TrainConfig,
};
use crate::codebook::{sequence_histogram, Codebook, KMeansConfig, SoftAssignment};
use crate::detector::{
    feature_digest, generate_augmented_histograms, max_subarray, DetectionEvent, DetectorBundle, DetectorVariant,
    OnlineDetector, StreamDetector,
};
use crate::digest;
use crate::error::{Error, Result};
use crate::features::{extract_sequence, GestureletConfig};
use crate::io::synth::{concatenate, shuffled};
use crate::metrics::{evaluate, ClassRates, MetricsReport, RunInfo};
use crate::skeleton::{LabeledTimeline, Segment, SkeletonFrame, SkeletonLayout, SkeletonSequence};

/// Everything that determines a trained detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub layout: String,
    pub gesturelet: GestureletConfig,
    pub codebook_size: usize,
    pub soft_bins: usize,
    pub kmeans: KMeansConfig,
    pub train: TrainConfig,
    pub variant: DetectorVariant,
    /// Label of idle sequences; left out of training unless the variant is `neutral`.
    pub neutral_label: String,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            layout: "openpose18".into(),
            gesturelet: GestureletConfig::default(),
            codebook_size: 64,
            soft_bins: 2,
            kmeans: KMeansConfig::default(),
            train: TrainConfig::default(),
            variant: DetectorVariant::Vanilla,
            neutral_label: "neutral".into(),
            seed: 0,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        SkeletonLayout::by_name(&self.layout)?;
        self.gesturelet.validate()?;
        self.train.validate()?;
        self.variant.validate()?;
        if self.soft_bins == 0 || self.soft_bins > self.codebook_size {
            return Err(Error::Config(format!(
                "soft bins must be in 1..={}, got {}",
                self.codebook_size, self.soft_bins
            )));
        }
        Ok(())
    }

    /// Label treated as idle for this variant.
    fn idle_label(&self) -> &str {
        match &self.variant {
            DetectorVariant::Neutral { neutral_class } => neutral_class,
            _ => &self.neutral_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub classes: Vec<String>,
    pub thresholds: Vec<f64>,
    pub threshold_costs: Vec<f64>,
    pub training_accuracy: f64,
    pub sequences: usize,
    pub gesturelets: usize,
    pub kmeans_iterations: usize,
}

/// Trains codebook, classifiers, thresholds and calibration from labeled sequences.
pub fn train_bundle(sequences: &[SkeletonSequence], cfg: &TrainSettings) -> Result<(DetectorBundle, TrainReport)> {
    cfg.validate()?;
    let layout = SkeletonLayout::by_name(&cfg.layout)?;
    let with_neutral = matches!(cfg.variant, DetectorVariant::Neutral { .. });
    let idle = cfg.idle_label();
    let used: Vec<&SkeletonSequence> = sequences
        .iter()
        .filter(|s| !s.is_empty())
        .filter(|s| match s.label.as_deref() {
            None => false,
            Some(l) => with_neutral || l != idle,
        })
        .collect();
    let mut classes: Vec<String> = used.iter().filter_map(|s| s.label.clone()).collect();
    classes.sort();
    classes.dedup();
    let neutral_class = if with_neutral {
        Some(
            classes
                .iter()
                .position(|c| c == idle)
                .ok_or_else(|| Error::DegenerateLabels(idle.to_string()))?,
        )
    } else {
        None
    };
    if used.is_empty() {
        return Err(Error::EmptyInput);
    }

    let feats = used
        .iter()
        .map(|s| extract_sequence(s, &cfg.gesturelet, &layout))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<_> = feats.iter().flatten().cloned().collect();
    let (codebook, trace) = Codebook::build(
        &all,
        cfg.codebook_size,
        cfg.seed,
        &cfg.kmeans,
        feature_digest(&layout, &cfg.gesturelet),
    )?;
    let labels: Vec<usize> = used
        .iter()
        .map(|s| {
            classes
                .iter()
                .position(|c| Some(c) == s.label.as_ref())
                .expect("label collected")
        })
        .collect();
    let assigned: Vec<(Vec<SoftAssignment>, usize)> = feats
        .iter()
        .zip(&labels)
        .map(|(f, &l)| {
            let a = f
                .iter()
                .map(|g| codebook.assign(&g.vector, cfg.soft_bins))
                .collect::<Result<Vec<_>>>()?;
            Ok((a, l))
        })
        .collect::<Result<_>>()?;

    let augmentation = matches!(cfg.variant, DetectorVariant::Generated { augmentation: true, .. });
    let hists = generate_augmented_histograms(&assigned, codebook.size(), augmentation, cfg.seed.wrapping_add(1))?;
    let (xs, ys): (Vec<Vec<f64>>, Vec<usize>) = hists.into_iter().unzip();
    let train_cfg = TrainConfig {
        seed: cfg.seed.wrapping_add(2),
        ..cfg.train
    };
    let linears = train_ovr(&xs, &ys, classes.len(), &classes, &train_cfg)?;

    let lengths: Vec<usize> = used.iter().map(|s| s.len()).collect();
    let mut model = GestureModel {
        classes: classes.clone(),
        neutral_class,
        per_class: linears
            .into_iter()
            .map(|linear| ClassModel {
                linear,
                threshold: 0.0,
                calibration: Calibration { a: 1.0, b: 0.0 },
            })
            .collect(),
        mean_train_length: lengths.iter().sum::<usize>() as f64 / lengths.len() as f64,
        max_train_length: *lengths.iter().max().expect("nonempty"),
        codebook_digest: digest::of(&codebook),
        train_config_digest: digest::of(cfg),
    };

    // Thresholds from each training sequence's best subarray score, then
    // calibration on the plain (unaugmented) histogram decision values.
    let plain = &xs[..assigned.len()];
    let mut thresholds = Vec::with_capacity(classes.len());
    let mut costs = Vec::with_capacity(classes.len());
    for c in 0..classes.len() {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (a, l) in &assigned {
            let scores = a
                .iter()
                .map(|x| frame_score(x, &model, c))
                .collect::<Result<Vec<_>>>()?;
            let best = max_subarray(&scores).sum;
            if *l == c {
                pos.push(best)
            } else {
                neg.push(best)
            }
        }
        let (theta, cost) = learn_threshold(&pos, &neg, cfg.train.weight_factor)?;
        thresholds.push(theta);
        costs.push(cost);
        let decisions: Vec<f64> = plain.iter().map(|h| model.per_class[c].linear.decision(h)).collect();
        let truth: Vec<bool> = ys[..assigned.len()].iter().map(|&l| l == c).collect();
        model.per_class[c].calibration = calibrate(&decisions, &truth)?;
    }
    for (cm, &t) in model.per_class.iter_mut().zip(&thresholds) {
        cm.threshold = t;
    }

    let correct = plain
        .iter()
        .zip(&ys)
        .map(|(h, &l)| classify_histogram(h, &model).map(|(c, _)| c == l))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();
    let report = TrainReport {
        classes,
        thresholds,
        threshold_costs: costs,
        training_accuracy: correct as f64 / plain.len() as f64,
        sequences: used.len(),
        gesturelets: all.len(),
        kmeans_iterations: trace.inertia.len(),
    };
    let bundle = DetectorBundle {
        layout,
        gesturelet: cfg.gesturelet,
        soft_bins: cfg.soft_bins,
        codebook,
        model,
        variant: cfg.variant.clone(),
    };
    bundle.verify()?;
    Ok((bundle, report))
}

/// Whole-sequence histogram of one sequence under a bundle's codebook.
pub fn sequence_histogram_of(bundle: &DetectorBundle, seq: &SkeletonSequence) -> Result<Vec<f64>> {
    let feats = extract_sequence(seq, &bundle.gesturelet, &bundle.layout)?;
    let assigns = feats
        .iter()
        .map(|g| bundle.codebook.assign(&g.vector, bundle.soft_bins))
        .collect::<Result<Vec<_>>>()?;
    sequence_histogram(&assigns, bundle.codebook.size())
}

/// Fraction of labeled sequences whose histogram argmax is their label.
/// Sequences with labels the model does not know are skipped. Returns
/// `(accuracy, sequences scored)`.
pub fn recognition_accuracy(bundle: &DetectorBundle, sequences: &[SkeletonSequence]) -> Result<(f64, usize)> {
    let mut n = 0usize;
    let mut correct = 0usize;
    for s in sequences.iter().filter(|s| !s.is_empty()) {
        let Some(Ok(label)) = s.label.as_deref().map(|l| bundle.model.class_index(l)) else {
            continue;
        };
        let (c, _) = classify_histogram(&sequence_histogram_of(bundle, s)?, &bundle.model)?;
        n += 1;
        correct += usize::from(c == label);
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok((correct as f64 / n as f64, n))
}

/// Emits one event per ground-truth segment, at the segment's last frame.
#[derive(Debug, Clone)]
pub struct OracleDetector {
    segments: Vec<Segment>,
}

impl OracleDetector {
    pub fn new(truth: &LabeledTimeline, classes: &[String]) -> Self {
        let mut segments: Vec<Segment> = truth
            .segments
            .iter()
            .filter(|s| classes.contains(&s.class_id))
            .cloned()
            .collect();
        segments.sort_by_key(|s| s.end_frame);
        Self { segments }
    }
}

impl StreamDetector for OracleDetector {
    fn step(&mut self, frame: &SkeletonFrame) -> Result<Vec<DetectionEvent>> {
        Ok(self
            .segments
            .iter()
            .filter(|s| s.end_frame == frame.frame_index)
            .map(|s| DetectionEvent {
                class: s.class_id.clone(),
                class_index: 0,
                person_id: 0,
                start_frame: s.start_frame,
                end_frame: s.end_frame,
                score: f64::INFINITY,
                probability: 1.0,
                recognized_class: 0,
            })
            .collect())
    }
}

/// Never fires.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullDetector;

impl StreamDetector for NullDetector {
    fn step(&mut self, _frame: &SkeletonFrame) -> Result<Vec<DetectionEvent>> {
        Ok(Vec::new())
    }
}

/// Which detector a concatenated evaluation drives.
#[derive(Debug, Clone)]
pub enum EvalDetector {
    Model(Arc<DetectorBundle>),
    Oracle,
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub repetitions: usize,
    /// Label of idle sequences; when present they are interleaved between gestures.
    pub neutral_label: String,
    pub exclude_classes: Vec<String>,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            repetitions: 20,
            neutral_label: "neutral".into(),
            exclude_classes: Vec::new(),
            seed: 0,
        }
    }
}

/// Runs a detector over frames and returns every event.
pub fn run_detector(det: &mut dyn StreamDetector, frames: &[SkeletonFrame]) -> Result<Vec<DetectionEvent>> {
    let mut out = Vec::new();
    for f in frames {
        out.extend(det.step(f)?);
    }
    Ok(out)
}

/// Stream order for one repetition: shuffled gestures, each followed by an
/// idle sequence when any are available.
pub fn concat_order(test: &[SkeletonSequence], settings: &EvalSettings, rep: u64) -> Vec<SkeletonSequence> {
    let seed = settings.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(rep);
    let keep = |s: &&SkeletonSequence| {
        !s.is_empty() && !s.label.as_ref().is_some_and(|l| settings.exclude_classes.contains(l))
    };
    let is_idle = |s: &SkeletonSequence| s.label.as_deref() == Some(settings.neutral_label.as_str());
    let gestures: Vec<SkeletonSequence> = test.iter().filter(keep).filter(|s| !is_idle(s)).cloned().collect();
    let idle: Vec<SkeletonSequence> = test.iter().filter(keep).filter(|s| is_idle(s)).cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = gestures;
    g.shuffle(&mut rng);
    if idle.is_empty() {
        return g;
    }
    let n = shuffled(&idle, seed.wrapping_add(1));
    g.into_iter()
        .enumerate()
        .flat_map(|(i, s)| [s, n[i % n.len()].clone()])
        .collect()
}

/// Converts events to a predicted timeline, merging same-class overlaps.
pub fn predicted_timeline(len: u64, events: &[DetectionEvent]) -> Result<LabeledTimeline> {
    LabeledTimeline::merged(
        len,
        events.iter().map(|e| Segment {
            class_id: e.class.clone(),
            start_frame: e.start_frame,
            end_frame: e.end_frame,
        }),
    )
}

/// One repetition: concatenate, detect, score.
pub fn concat_eval_once(
    test: &[SkeletonSequence],
    detector: &EvalDetector,
    classes: &[String],
    settings: &EvalSettings,
    rep: u64,
) -> Result<Vec<ClassRates>> {
    let order = concat_order(test, settings, rep);
    let (frames, truth) = concatenate(&order)?;
    let events = match detector {
        EvalDetector::Model(b) => run_detector(&mut OnlineDetector::new(b.clone(), 0)?, &frames)?,
        EvalDetector::Oracle => run_detector(&mut OracleDetector::new(&truth, classes), &frames)?,
        EvalDetector::Null => run_detector(&mut NullDetector, &frames)?,
    };
    let pred = predicted_timeline(truth.length_frames, &events)?;
    evaluate(&truth, &pred, classes)
}

/// Classes scored by default: the model's classes minus the idle class and
/// any excluded ones.
pub fn eval_classes(bundle: &DetectorBundle, settings: &EvalSettings) -> Vec<String> {
    let idle = bundle.model.neutral_class.map(|i| bundle.model.classes[i].clone());
    bundle
        .model
        .classes
        .iter()
        .filter(|c| Some(*c) != idle.as_ref() && **c != settings.neutral_label)
        .filter(|c| !settings.exclude_classes.contains(c))
        .cloned()
        .collect()
}

/// Mean rates over `settings.repetitions` shuffled concatenations.
pub fn concat_eval(
    test: &[SkeletonSequence],
    detector: &EvalDetector,
    classes: &[String],
    settings: &EvalSettings,
    variant: &str,
) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let reps = (0..settings.repetitions as u64)
        .into_par_iter()
        .map(|r| concat_eval_once(test, detector, classes, settings, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::aggregate(
        RunInfo {
            variant: variant.to_string(),
            seed: settings.seed,
            repetitions: settings.repetitions,
        },
        &reps,
    ))
}

/// Candidate values for each tuned hyper-parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub codebook_size: Vec<usize>,
    pub soft_bins: Vec<usize>,
    pub weight_factor: Vec<f64>,
    pub folds: usize,
    pub max_points: usize,
}

impl Default for TuneGrid {
    fn default() -> Self {
        Self {
            alpha: vec![0.4, 0.8],
            beta: vec![0.2, 0.4],
            gamma: vec![0.5, 1.0],
            codebook_size: vec![32, 64],
            soft_bins: vec![1, 2],
            weight_factor: vec![3.0],
            folds: 3,
            max_points: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunePoint {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub codebook_size: usize,
    pub soft_bins: usize,
    pub weight_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub point: TunePoint,
    pub accuracy: f64,
}

impl TuneGrid {
    pub fn points(&self) -> Vec<TunePoint> {
        let mut out = Vec::new();
        for &alpha in &self.alpha {
            for &beta in &self.beta {
                for &gamma in &self.gamma {
                    for &codebook_size in &self.codebook_size {
                        for &soft_bins in &self.soft_bins {
                            for &weight_factor in &self.weight_factor {
                                out.push(TunePoint {
                                    alpha,
                                    beta,
                                    gamma,
                                    codebook_size,
                                    soft_bins,
                                    weight_factor,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// k-fold recognition accuracy of one grid point. Folds are a seeded shuffle
/// of the sequence indices dealt round-robin.
pub fn cross_validate(
    sequences: &[SkeletonSequence],
    base: &TrainSettings,
    point: &TunePoint,
    folds: usize,
) -> Result<f64> {
    if folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    let cfg = TrainSettings {
        gesturelet: GestureletConfig {
            alpha: point.alpha,
            beta: point.beta,
            gamma: point.gamma,
            ..base.gesturelet
        },
        codebook_size: point.codebook_size,
        soft_bins: point.soft_bins,
        train: TrainConfig {
            weight_factor: point.weight_factor,
            ..base.train
        },
        ..base.clone()
    };
    let idx: Vec<usize> = shuffled(&(0..sequences.len()).collect::<Vec<_>>(), base.seed);
    let mut total = 0.0;
    for f in 0..folds {
        let (mut train, mut held) = (Vec::new(), Vec::new());
        for (r, &i) in idx.iter().enumerate() {
            if r % folds == f {
                held.push(sequences[i].clone());
            } else {
                train.push(sequences[i].clone());
            }
        }
        let (bundle, _) = train_bundle(&train, &cfg)?;
        total += recognition_accuracy(&bundle, &held)?.0;
    }
    Ok(total / folds as f64)
}

/// Scores every grid point; results are ranked best first, ties in grid order.
pub fn tune(sequences: &[SkeletonSequence], base: &TrainSettings, grid: &TuneGrid) -> Result<Vec<TuneResult>> {
    let points = grid.points();
    if points.len() > grid.max_points {
        return Err(Error::GridTooLarge {
            points: points.len(),
            cap: grid.max_points,
        });
    }
    if points.is_empty() {
        return Err(Error::Config("empty tuning grid".into()));
    }
    let mut results = points
        .par_iter()
        .map(|p| {
            Ok(TuneResult {
                point: *p,
                accuracy: cross_validate(sequences, base, p, grid.folds)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // stable: equal accuracies keep grid order
    results.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth::{synth_gestures, SynthConfig};

    fn data(classes: &[&str], n: usize) -> Vec<SkeletonSequence> {
        synth_gestures(&SynthConfig {
            classes: classes.iter().map(|s| s.to_string()).collect(),
            sequences_per_class: n,
            ..SynthConfig::default()
        })
        .unwrap()
        .sequences
    }

    fn small() -> TrainSettings {
        TrainSettings {
            codebook_size: 16,
            ..TrainSettings::default()
        }
    }

    #[test]
    fn vanilla_drops_idle_sequences() {
        let seqs = data(&["waving", "bowing", "neutral"], 4);
        let (b, rep) = train_bundle(&seqs, &small()).unwrap();
        assert_eq!(b.model.classes, ["bowing", "waving"]);
        assert_eq!(b.model.neutral_class, None);
        assert_eq!(rep.sequences, 8);
    }

    #[test]
    fn neutral_variant_marks_class() {
        let seqs = data(&["waving", "bowing", "neutral"], 4);
        let cfg = TrainSettings {
            variant: DetectorVariant::Neutral {
                neutral_class: "neutral".into(),
            },
            ..small()
        };
        let (b, _) = train_bundle(&seqs, &cfg).unwrap();
        assert_eq!(b.model.neutral_class, Some(1));
    }

    #[test]
    fn missing_neutral_class_is_an_error() {
        let seqs = data(&["waving", "bowing"], 3);
        let cfg = TrainSettings {
            variant: DetectorVariant::Neutral {
                neutral_class: "neutral".into(),
            },
            ..small()
        };
        assert!(matches!(train_bundle(&seqs, &cfg), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn oracle_and_null() {
        let seqs = data(&["waving", "bowing", "neutral"], 3);
        let classes = vec!["bowing".to_string(), "waving".to_string()];
        let s = EvalSettings {
            repetitions: 3,
            ..EvalSettings::default()
        };
        let oracle = concat_eval(&seqs, &EvalDetector::Oracle, &classes, &s, "oracle").unwrap();
        for c in &oracle.classes {
            assert_eq!((c.tpr, c.tnr), (Some(1.0), Some(1.0)));
        }
        let null = concat_eval(&seqs, &EvalDetector::Null, &classes, &s, "null").unwrap();
        for c in &null.classes {
            assert_eq!((c.dr, c.tnr, c.ir), (Some(1.0), Some(1.0), Some(0.0)));
        }
    }

    #[test]
    fn concat_order_interleaves_idle() {
        let seqs = data(&["waving", "neutral"], 3);
        let order = concat_order(&seqs, &EvalSettings::default(), 0);
        let labels: Vec<&str> = order.iter().map(|s| s.label.as_deref().unwrap()).collect();
        assert_eq!(labels, ["waving", "neutral", "waving", "neutral", "waving", "neutral"]);
    }

    #[test]
    fn grid_cap_and_single_point() {
        let seqs = data(&["waving", "bowing"], 6);
        let grid = TuneGrid {
            max_points: 3,
            ..TuneGrid::default()
        };
        assert!(matches!(tune(&seqs, &small(), &grid), Err(Error::GridTooLarge { .. })));
        let one = TuneGrid {
            alpha: vec![0.8],
            beta: vec![0.4],
            gamma: vec![1.0],
            codebook_size: vec![16],
            soft_bins: vec![2],
            weight_factor: vec![3.0],
            folds: 2,
            max_points: 1,
        };
        let r = tune(&seqs, &small(), &one).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].point.codebook_size, 16);
    }
}
