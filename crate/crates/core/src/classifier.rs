//! One-vs-all linear classifier over sequence histograms, per-class detection
//! thresholds and logistic probability calibration.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codebook::SoftAssignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// L2 regularization strength.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Cost of a missed positive relative to a false negative when scanning thresholds.
    pub weight_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 50,
            seed: 0,
            weight_factor: 3.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.weight_factor > 0.0 && self.weight_factor.is_finite()) {
            return Err(Error::Config(format!(
                "weight factor must be > 0, got {}",
                self.weight_factor
            )));
        }
        Ok(())
    }
}

/// A separating hyperplane `<w, x> + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearClassifier {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic map `sigma(a * s + b)` from decision values to probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Calibration {
    pub fn probability(&self, score: f64) -> f64 {
        let z = self.a * score + self.b;
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }
}

mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            Repr::Finite(*x).serialize(s)
        } else if *x > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Text("-inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad threshold {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub linear: LinearClassifier,
    /// Detection fires when the max-subarray score exceeds this.
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub calibration: Calibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureModel {
    pub classes: Vec<String>,
    pub neutral_class: Option<usize>,
    pub per_class: Vec<ClassModel>,
    /// Mean training sequence length; the bias is spread over this many frames.
    pub mean_train_length: f64,
    pub max_train_length: usize,
    pub codebook_digest: String,
    pub train_config_digest: String,
}

impl GestureModel {
    pub fn class_index(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::UnknownClass(class.into()))
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.per_class.first().map_or(0, |c| c.linear.weights.len())
    }
}

/// Regularized hinge objective `lambda/2 |w|^2 + mean(max(0, 1 - y f(x)))` with
/// the bias treated as a weight on a constant feature.
pub fn hinge_objective(clf: &LinearClassifier, xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * (dot(&clf.weights, &clf.weights) + clf.bias * clf.bias);
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * clf.decision(x)).max(0.0))
        .sum::<f64>()
        / xs.len() as f64;
    reg + loss
}

/// Stochastic subgradient descent on the hinge objective with step `1 / (lambda t)`.
pub fn train_binary(xs: &[Vec<f64>], ys: &[f64], cfg: &TrainConfig, seed: u64) -> LinearClassifier {
    let dim = xs.first().map_or(0, |x| x.len());
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut t = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (cfg.lambda * t as f64);
            let margin = ys[i] * (dot(&w, &xs[i]) + b);
            let shrink = 1.0 - eta * cfg.lambda;
            w.iter_mut().for_each(|x| *x *= shrink);
            b *= shrink;
            if margin < 1.0 {
                for (wk, xk) in w.iter_mut().zip(&xs[i]) {
                    *wk += eta * ys[i] * xk;
                }
                b += eta * ys[i];
            }
        }
    }
    LinearClassifier { weights: w, bias: b }
}

/// One binary hinge-loss classifier per class, class `c` against the rest.
pub fn train_ovr(
    histograms: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    class_names: &[String],
    cfg: &TrainConfig,
) -> Result<Vec<LinearClassifier>> {
    cfg.validate()?;
    if histograms.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: histograms.len(),
            got: labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {n_classes}")));
    }
    for c in 0..n_classes {
        if !labels.contains(&c) {
            let name = class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
            return Err(Error::DegenerateLabels(name));
        }
    }
    Ok((0..n_classes)
        .map(|c| {
            let ys: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            train_binary(histograms, &ys, cfg, cfg.seed.wrapping_add(c as u64))
        })
        .collect())
}

/// Per-frame contribution of a soft assignment to class `c`: the weighted
/// cluster weights plus the bias spread over the mean training length.
pub fn frame_score(assign: &SoftAssignment, model: &GestureModel, class: usize) -> Result<f64> {
    let cm = model
        .per_class
        .get(class)
        .ok_or_else(|| Error::UnknownClass(class.to_string()))?;
    let mut s = cm.linear.bias / model.mean_train_length;
    for &(k, w) in &assign.entries {
        let wk = cm.linear.weights.get(k).ok_or(Error::DimensionMismatch {
            expected: cm.linear.weights.len(),
            got: k + 1,
        })?;
        s += w * wk;
    }
    Ok(s)
}

/// `weight_factor * #{pos < theta} + #{neg >= theta}`.
pub fn threshold_cost(pos: &[f64], neg: &[f64], weight_factor: f64, theta: f64) -> f64 {
    let missed = pos.iter().filter(|&&p| p < theta).count() as f64;
    let false_alarms = neg.iter().filter(|&&n| n >= theta).count() as f64;
    weight_factor * missed + false_alarms
}

/// Scans midpoints of consecutive distinct scores plus the two infinite sentinels
/// and returns the cheapest, lowest first. Returns `(theta, cost)`.
pub fn learn_threshold(pos: &[f64], neg: &[f64], weight_factor: f64) -> Result<(f64, f64)> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut all: Vec<f64> = pos.iter().chain(neg).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    candidates.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(f64::INFINITY);
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    for theta in candidates {
        let cost = threshold_cost(pos, neg, weight_factor, theta);
        if cost < best.1 {
            best = (theta, cost);
        }
    }
    Ok(best)
}

/// Platt's logistic fit with smoothed targets, by Newton's method with
/// backtracking, for at most 100 iterations.
pub fn calibrate(scores: &[f64], labels: &[bool]) -> Result<Calibration> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::SingleClassLabels);
    }
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    // Platt's form is 1 / (1 + exp(A f + B)); we return a = -A, b = -B.
    let (mut a, mut b) = (0.0f64, ((n_neg + 1.0) / (n_pos + 1.0)).ln());
    let nll = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let mut value = nll(a, b);
    const SIGMA: f64 = 1e-12;
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &t) in scores.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nv = nll(na, nb);
            if nv < value + 1e-4 * step * gd {
                a = na;
                b = nb;
                value = nv;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    Ok(Calibration { a: -a, b: -b })
}

/// Argmax of `<w_c, h> + b_c` and that class's calibrated probability.
pub fn classify_histogram(hist: &[f64], model: &GestureModel) -> Result<(usize, f64)> {
    if hist.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: hist.len(),
        });
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (c, cm) in model.per_class.iter().enumerate() {
        let s = cm.linear.decision(hist);
        if s > best.1 {
            best = (c, s);
        }
    }
    let p = model.per_class[best.0].calibration.probability(best.1);
    Ok((best.0, p))
}

/// Calibrated probability that `hist` belongs to `class`.
pub fn class_probability(hist: &[f64], model: &GestureModel, class: usize) -> f64 {
    let cm = &model.per_class[class];
    cm.calibration.probability(cm.linear.decision(hist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn model_from(linears: Vec<LinearClassifier>) -> GestureModel {
        GestureModel {
            classes: (0..linears.len()).map(|c| format!("c{c}")).collect(),
            neutral_class: None,
            per_class: linears
                .into_iter()
                .map(|linear| ClassModel {
                    linear,
                    threshold: 0.0,
                    calibration: Calibration { a: 1.0, b: 0.0 },
                })
                .collect(),
            mean_train_length: 10.0,
            max_train_length: 10,
            codebook_digest: String::new(),
            train_config_digest: String::new(),
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|c| c.to_string()).collect()
    }

    #[test]
    fn separable_axis_case() {
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let cfg = TrainConfig::default();
        let m = train_ovr(&xs, &[0, 1], 2, &names(2), &cfg).unwrap();
        assert!(m[0].decision(&xs[0]) > 0.0);
        assert!(m[0].decision(&xs[1]) < 0.0);
        assert!(m[1].decision(&xs[1]) > 0.0);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<Vec<f64>> = (0..60).map(|_| (0..5).map(|_| rng.gen::<f64>()).collect()).collect();
        let ys: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let cfg = TrainConfig::default();
        let a = train_ovr(&xs, &ys, 3, &names(3), &cfg).unwrap();
        let b = train_ovr(&xs, &ys, 3, &names(3), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_class_is_degenerate() {
        let xs = vec![vec![1.0], vec![0.0]];
        let err = train_ovr(&xs, &[0, 0], 2, &names(2), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateLabels(c) if c == "1"));
    }

    #[test]
    fn objective_final_not_above_initial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<Vec<f64>> = (0..80).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| if x[0] + x[1] > 1.0 { 1.0 } else { -1.0 }).collect();
        let cfg = TrainConfig {
            lambda: 1e-2,
            ..TrainConfig::default()
        };
        let zero = LinearClassifier {
            weights: vec![0.0; 4],
            bias: 0.0,
        };
        let initial = hinge_objective(&zero, &xs, &ys, cfg.lambda);
        let trained = train_binary(&xs, &ys, &cfg, 0);
        assert!(hinge_objective(&trained, &xs, &ys, cfg.lambda) <= initial);
    }

    #[test]
    fn null_model_scores_zero() {
        let m = model_from(vec![
            LinearClassifier {
                weights: vec![0.0; 3],
                bias: 0.0,
            };
            2
        ]);
        let a = SoftAssignment {
            entries: vec![(0, 0.5), (2, 0.5)],
        };
        assert_eq!(frame_score(&a, &m, 0).unwrap(), 0.0);
    }

    #[test]
    fn hard_assignment_score_adds_spread_bias() {
        let m = model_from(vec![
            LinearClassifier {
                weights: vec![0.5, -1.0, 2.0],
                bias: -3.0,
            };
            2
        ]);
        let a = SoftAssignment {
            entries: vec![(2, 1.0)],
        };
        assert_eq!(frame_score(&a, &m, 1).unwrap(), 2.0 - 3.0 / 10.0);
        assert!(matches!(frame_score(&a, &m, 5), Err(Error::UnknownClass(_))));
    }

    #[test]
    fn soft_score_by_hand() {
        let m = model_from(vec![
            LinearClassifier {
                weights: vec![2.0, -2.0],
                bias: 0.0,
            };
            2
        ]);
        let a = SoftAssignment {
            entries: vec![(0, 0.75), (1, 0.25)],
        };
        assert!((frame_score(&a, &m, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Evaluate the cost at every real number that matters: each score, each
    /// midpoint, and far outside.
    fn brute_threshold(pos: &[f64], neg: &[f64], wf: f64) -> f64 {
        let mut pts: Vec<f64> = pos.iter().chain(neg).copied().collect();
        pts.sort_by(f64::total_cmp);
        let mut probes = vec![f64::NEG_INFINITY, f64::INFINITY];
        probes.extend(pts.iter().copied());
        probes.extend(pts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        probes
            .iter()
            .map(|&t| threshold_cost(pos, neg, wf, t))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn threshold_by_exhaustive_scan() {
        let (pos, neg) = ([2.0, 3.0], [1.0, 2.5]);
        assert_eq!(brute_threshold(&pos, &neg, 3.0), 1.0);
        assert_eq!(learn_threshold(&pos, &neg, 3.0).unwrap(), (1.5, 1.0));
    }

    #[test]
    fn separable_threshold_is_midpoint() {
        assert_eq!(learn_threshold(&[5.0], &[1.0], 3.0).unwrap(), (3.0, 0.0));
    }

    #[test]
    fn heavier_weight_factor_lowers_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let pos: Vec<f64> = (0..15).map(|_| rng.gen::<f64>() * 4.0 + 1.0).collect();
            let neg: Vec<f64> = (0..15).map(|_| rng.gen::<f64>() * 4.0).collect();
            let t3 = learn_threshold(&pos, &neg, 3.0).unwrap().0;
            let t1 = learn_threshold(&pos, &neg, 1.0).unwrap().0;
            assert!(t3 <= t1, "{t3} > {t1}");
        }
    }

    #[test]
    fn threshold_requires_scores() {
        assert!(matches!(learn_threshold(&[], &[1.0], 1.0), Err(Error::EmptyScores)));
    }

    #[test]
    fn calibration_symmetric_midpoint() {
        // Overlapping classes so the fit stays finite.
        let blocks = [(1.0, true, 30), (1.0, false, 10), (-1.0, true, 10), (-1.0, false, 30)];
        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        for (s, l, n) in blocks {
            scores.extend(std::iter::repeat_n(s, n));
            labels.extend(std::iter::repeat_n(l, n));
        }
        let c = calibrate(&scores, &labels).unwrap();
        assert!((c.probability(0.0) - 0.5).abs() < 0.01);
        assert!(c.a > 0.0);
    }

    #[test]
    fn calibration_limits() {
        let c = Calibration { a: 2.0, b: -1.0 };
        assert_eq!(c.probability(f64::INFINITY), 1.0);
        assert_eq!(c.probability(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn calibration_needs_both_labels() {
        assert!(matches!(
            calibrate(&[1.0, 2.0], &[true, true]),
            Err(Error::SingleClassLabels)
        ));
    }

    #[test]
    fn calibration_recovers_known_sigmoid() {
        let (a, b) = (1.7, -0.4);
        let truth = Calibration { a, b };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>() * 8.0 - 4.0).collect();
        let labels: Vec<bool> = scores
            .iter()
            .map(|&s| rng.gen::<f64>() < truth.probability(s))
            .collect();
        let fit = calibrate(&scores, &labels).unwrap();
        assert!(((fit.a - a) / a).abs() < 0.05, "a = {}", fit.a);
        assert!(((fit.b - b) / b).abs() < 0.05, "b = {}", fit.b);
    }

    #[test]
    fn memorized_exemplar_is_recovered() {
        let xs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let lin = train_ovr(&xs, &[0, 1, 2], 3, &names(3), &TrainConfig::default()).unwrap();
        let m = model_from(lin);
        for (c, x) in xs.iter().enumerate() {
            assert_eq!(classify_histogram(x, &m).unwrap().0, c);
        }
    }

    #[test]
    fn uniform_histogram_on_symmetric_model() {
        let mut m = model_from(vec![
            LinearClassifier {
                weights: vec![1.0, -1.0],
                bias: 0.0,
            },
            LinearClassifier {
                weights: vec![-1.0, 1.0],
                bias: 0.0,
            },
        ]);
        for cm in &mut m.per_class {
            cm.calibration = Calibration { a: 3.0, b: 0.0 };
        }
        let (_, p) = classify_histogram(&[0.5, 0.5], &m).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn argmax_invariant_to_common_weight_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let k = 6;
            let linears: Vec<LinearClassifier> = (0..4)
                .map(|_| LinearClassifier {
                    weights: (0..k).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
                    bias: rng.gen::<f64>() - 0.5,
                })
                .collect();
            let shift: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect();
            let shifted: Vec<LinearClassifier> = linears
                .iter()
                .map(|l| LinearClassifier {
                    weights: l.weights.iter().zip(&shift).map(|(w, s)| w + s).collect(),
                    bias: l.bias,
                })
                .collect();
            let h: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            let (a, b) = (model_from(linears), model_from(shifted));
            assert_eq!(
                classify_histogram(&h, &a).unwrap().0,
                classify_histogram(&h, &b).unwrap().0
            );
        }
    }

    #[test]
    fn zero_bias_argmax_is_scale_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let linears: Vec<LinearClassifier> = (0..3)
                .map(|_| LinearClassifier {
                    weights: (0..5).map(|_| rng.gen::<f64>() - 0.5).collect(),
                    bias: 0.0,
                })
                .collect();
            let m = model_from(linears);
            let h: Vec<f64> = (0..5).map(|_| rng.gen::<f64>()).collect();
            let scaled: Vec<f64> = h.iter().map(|x| x * 7.5).collect();
            assert_eq!(
                classify_histogram(&h, &m).unwrap().0,
                classify_histogram(&scaled, &m).unwrap().0
            );
        }
    }

    #[test]
    fn threshold_serde_handles_infinities() {
        let cm = ClassModel {
            linear: LinearClassifier {
                weights: vec![1.0],
                bias: 0.0,
            },
            threshold: f64::NEG_INFINITY,
            calibration: Calibration { a: 1.0, b: 0.0 },
        };
        let s = serde_json::to_string(&cm).unwrap();
        let back: ClassModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.threshold, f64::NEG_INFINITY);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn returned_threshold_is_optimal(pos in prop::collection::vec(-5i32..5, 1..8),
                                             neg in prop::collection::vec(-5i32..5, 1..8),
                                             wf in 1u8..4) {
                let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
                let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
                let (theta, cost) = learn_threshold(&pos, &neg, wf as f64).unwrap();
                prop_assert_eq!(cost, threshold_cost(&pos, &neg, wf as f64, theta));
                prop_assert_eq!(cost, brute_threshold(&pos, &neg, wf as f64));
            }
        }
    }
}
