//! Frame-level segment metrics for continuous detection output.
//!
//! Every frame of a binary ground-truth/prediction pair lands in exactly one
//! category; positive GT frames split into TP/Us/Ue/F/D and negative GT frames
//! into TN/Os/Oe/M/I, so each group of rates sums to one.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::LabeledTimeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameCategory {
    TruePositive,
    TrueNegative,
    UnderfillStart,
    UnderfillEnd,
    Fragmentation,
    Deletion,
    OverfillStart,
    OverfillEnd,
    Merge,
    Insertion,
}

impl FrameCategory {
    /// Category of the same frame with ground truth and prediction swapped.
    pub fn dual(self) -> Self {
        use FrameCategory::*;
        match self {
            TruePositive => TruePositive,
            TrueNegative => TrueNegative,
            UnderfillStart => OverfillStart,
            UnderfillEnd => OverfillEnd,
            Fragmentation => Merge,
            Deletion => Insertion,
            OverfillStart => UnderfillStart,
            OverfillEnd => UnderfillEnd,
            Merge => Fragmentation,
            Insertion => Deletion,
        }
    }
}

/// Maximal runs of `true`, inclusive bounds.
fn runs(x: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in x.iter().enumerate() {
        match (v, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, x.len() - 1));
    }
    out
}

/// Labels the non-agreeing frames of one side's events. `own` holds the events
/// (GT events for the positive side, prediction events for the negative side),
/// `other` the opposite signal. Frames of an event that `other` never touches
/// get `none`; untouched frames before the first touch get `before`, after the
/// last touch `after`, and in between `between`.
fn label_events(
    own: &[bool],
    other: &[bool],
    out: &mut [Option<FrameCategory>],
    [none, before, after, between]: [FrameCategory; 4],
) {
    for (s, e) in runs(own) {
        let touched: Vec<usize> = (s..=e).filter(|&t| other[t]).collect();
        for t in s..=e {
            if other[t] {
                continue;
            }
            out[t] = Some(match (touched.first(), touched.last()) {
                (None, _) | (_, None) => none,
                (Some(&first), _) if t < first => before,
                (_, Some(&last)) if t > last => after,
                _ => between,
            });
        }
    }
}

/// Per-frame categories of binary ground truth `gt` against prediction `pred`.
pub fn categorize_binary(gt: &[bool], pred: &[bool]) -> Result<Vec<FrameCategory>> {
    use FrameCategory::*;
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gt: gt.len(),
            pred: pred.len(),
        });
    }
    let mut out: Vec<Option<FrameCategory>> = gt
        .iter()
        .zip(pred)
        .map(|(&g, &p)| match (g, p) {
            (true, true) => Some(TruePositive),
            (false, false) => Some(TrueNegative),
            _ => None,
        })
        .collect();
    label_events(
        gt,
        pred,
        &mut out,
        [Deletion, UnderfillStart, UnderfillEnd, Fragmentation],
    );
    // Inside a prediction, negative frames between two bridged GT events are
    // merge frames; frames outside the outermost bridged events are overfill.
    label_events(pred, gt, &mut out, [Insertion, OverfillStart, OverfillEnd, Merge]);
    Ok(out.into_iter().map(|c| c.expect("every frame categorized")).collect())
}

pub fn categorize(gt: &LabeledTimeline, pred: &LabeledTimeline, class: &str) -> Result<Vec<FrameCategory>> {
    if gt.length_frames != pred.length_frames {
        return Err(Error::LengthMismatch {
            gt: gt.length_frames as usize,
            pred: pred.length_frames as usize,
        });
    }
    categorize_binary(&gt.binary(class), &pred.binary(class))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub tp: u64,
    pub us: u64,
    pub ue: u64,
    pub f: u64,
    pub d: u64,
    pub tn: u64,
    pub os: u64,
    pub oe: u64,
    pub m: u64,
    pub i: u64,
}

impl CategoryCounts {
    pub fn from_categories(cats: &[FrameCategory]) -> Self {
        use FrameCategory::*;
        let mut c = Self::default();
        for cat in cats {
            *match cat {
                TruePositive => &mut c.tp,
                UnderfillStart => &mut c.us,
                UnderfillEnd => &mut c.ue,
                Fragmentation => &mut c.f,
                Deletion => &mut c.d,
                TrueNegative => &mut c.tn,
                OverfillStart => &mut c.os,
                OverfillEnd => &mut c.oe,
                Merge => &mut c.m,
                Insertion => &mut c.i,
            } += 1;
        }
        c
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.us + self.ue + self.f + self.d
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.os + self.oe + self.m + self.i
    }

    pub fn add(&mut self, o: &Self) {
        self.tp += o.tp;
        self.us += o.us;
        self.ue += o.ue;
        self.f += o.f;
        self.d += o.d;
        self.tn += o.tn;
        self.os += o.os;
        self.oe += o.oe;
        self.m += o.m;
        self.i += o.i;
    }
}

/// Rates for one class. Positive rates are `None` when the class has no
/// positive GT frames, negative rates when it has no negative frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub class: String,
    pub counts: CategoryCounts,
    pub tpr: Option<f64>,
    pub usr: Option<f64>,
    pub uer: Option<f64>,
    pub fr: Option<f64>,
    pub dr: Option<f64>,
    pub tnr: Option<f64>,
    pub osr: Option<f64>,
    pub oer: Option<f64>,
    pub mr: Option<f64>,
    pub ir: Option<f64>,
}

impl ClassRates {
    fn positive(&self) -> [Option<f64>; 5] {
        [self.tpr, self.usr, self.uer, self.fr, self.dr]
    }

    fn negative(&self) -> [Option<f64>; 5] {
        [self.tnr, self.osr, self.oer, self.mr, self.ir]
    }

    pub fn positive_sum(&self) -> Option<f64> {
        self.positive().iter().copied().sum()
    }

    pub fn negative_sum(&self) -> Option<f64> {
        self.negative().iter().copied().sum()
    }
}

pub fn rates(class: &str, counts: CategoryCounts) -> ClassRates {
    let p = counts.positives();
    let n = counts.negatives();
    let pos = |x: u64| (p > 0).then(|| x as f64 / p as f64);
    let neg = |x: u64| (n > 0).then(|| x as f64 / n as f64);
    ClassRates {
        class: class.to_string(),
        counts,
        tpr: pos(counts.tp),
        usr: pos(counts.us),
        uer: pos(counts.ue),
        fr: pos(counts.f),
        dr: pos(counts.d),
        tnr: neg(counts.tn),
        osr: neg(counts.os),
        oer: neg(counts.oe),
        mr: neg(counts.m),
        ir: neg(counts.i),
    }
}

/// Per-class rates for every class in `classes`.
pub fn evaluate(gt: &LabeledTimeline, pred: &LabeledTimeline, classes: &[String]) -> Result<Vec<ClassRates>> {
    classes
        .iter()
        .map(|c| Ok(rates(c, CategoryCounts::from_categories(&categorize(gt, pred, c)?))))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub variant: String,
    pub seed: u64,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub run: RunInfo,
    pub classes: Vec<ClassRates>,
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl MetricsReport {
    /// Averages per-repetition class rates (repetitions where a rate is absent
    /// are skipped for that rate) and sums the raw counts.
    pub fn aggregate(run: RunInfo, reps: &[Vec<ClassRates>]) -> Self {
        let Some(first) = reps.first() else {
            return Self {
                run,
                classes: Vec::new(),
            };
        };
        let classes = (0..first.len())
            .map(|ci| {
                let rows: Vec<&ClassRates> = reps.iter().map(|r| &r[ci]).collect();
                let mut counts = CategoryCounts::default();
                rows.iter().for_each(|r| counts.add(&r.counts));
                let avg = |f: fn(&ClassRates) -> Option<f64>| mean(rows.iter().map(|r| f(r)));
                ClassRates {
                    class: first[ci].class.clone(),
                    counts,
                    tpr: avg(|r| r.tpr),
                    usr: avg(|r| r.usr),
                    uer: avg(|r| r.uer),
                    fr: avg(|r| r.fr),
                    dr: avg(|r| r.dr),
                    tnr: avg(|r| r.tnr),
                    osr: avg(|r| r.osr),
                    oer: avg(|r| r.oer),
                    mr: avg(|r| r.mr),
                    ir: avg(|r| r.ir),
                }
            })
            .collect();
        Self { run, classes }
    }

    pub fn class(&self, name: &str) -> Option<&ClassRates> {
        self.classes.iter().find(|c| c.class == name)
    }

    /// Mean over classes of a rate, skipping classes where it is absent.
    pub fn mean_of(&self, f: fn(&ClassRates) -> Option<f64>) -> Option<f64> {
        mean(self.classes.iter().map(f))
    }

    pub fn mean_tpr(&self) -> Option<f64> {
        self.mean_of(|r| r.tpr)
    }

    pub fn mean_tnr(&self) -> Option<f64> {
        self.mean_of(|r| r.tnr)
    }

    /// Human-readable rate table, one row per class.
    pub fn table(&self) -> String {
        let mut s = format!(
            "# variant={} seed={} repetitions={}\n{:<12}",
            self.run.variant, self.run.seed, self.run.repetitions, "class"
        );
        for h in RATE_NAMES {
            let _ = write!(s, "{h:>7}");
        }
        s.push('\n');
        for c in &self.classes {
            let _ = write!(s, "{:<12}", c.class);
            for v in c.positive().iter().chain(c.negative().iter()) {
                let _ = match v {
                    Some(x) => write!(s, "{x:>7.3}"),
                    None => write!(s, "{:>7}", "-"),
                };
            }
            s.push('\n');
        }
        s
    }

    /// Table of `self - baseline` rates for classes present in both.
    pub fn delta_table(&self, baseline: &MetricsReport) -> String {
        let mut s = format!(
            "# delta {} - {}\n{:<12}",
            self.run.variant, baseline.run.variant, "class"
        );
        for h in RATE_NAMES {
            let _ = write!(s, "{h:>7}");
        }
        s.push('\n');
        for c in &self.classes {
            let Some(b) = baseline.class(&c.class) else { continue };
            let _ = write!(s, "{:<12}", c.class);
            let ours = c.positive().into_iter().chain(c.negative());
            let theirs = b.positive().into_iter().chain(b.negative());
            for (x, y) in ours.zip(theirs) {
                let _ = match (x, y) {
                    (Some(x), Some(y)) => write!(s, "{:>+7.3}", x - y),
                    _ => write!(s, "{:>7}", "-"),
                };
            }
            s.push('\n');
        }
        s
    }
}

pub const RATE_NAMES: [&str; 10] = ["tpr", "usr", "uer", "fr", "dr", "tnr", "osr", "oer", "mr", "ir"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::Segment;
    use proptest::prelude::*;
    use FrameCategory::*;

    fn mask(len: usize, spans: &[(usize, usize)]) -> Vec<bool> {
        let mut m = vec![false; len];
        for &(s, e) in spans {
            m[s..=e].iter_mut().for_each(|x| *x = true);
        }
        m
    }

    #[test]
    fn perfect_prediction() {
        let g = mask(30, &[(3, 8), (20, 25)]);
        let cats = categorize_binary(&g, &g).unwrap();
        assert!(cats.iter().all(|c| matches!(c, TruePositive | TrueNegative)));
        let r = rates("x", CategoryCounts::from_categories(&cats));
        assert_eq!((r.tpr, r.tnr), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn hand_trace() {
        let seg = |s, e| Segment {
            class_id: "waving".into(),
            start_frame: s,
            end_frame: e,
        };
        let gt = LabeledTimeline::new(30, vec![seg(10, 19)]).unwrap();
        let pred = LabeledTimeline::new(30, vec![seg(12, 24)]).unwrap();
        let cats = categorize(&gt, &pred, "waving").unwrap();
        let c = CategoryCounts::from_categories(&cats);
        assert_eq!((c.us, c.tp, c.oe, c.tn), (2, 8, 5, 15));
        assert_eq!(&cats[10..12], &[UnderfillStart, UnderfillStart]);
        let r = rates("waving", c);
        assert_eq!(r.tpr, Some(0.8));
        assert_eq!(r.usr, Some(0.2));
        assert_eq!(r.tnr, Some(0.75));
        assert_eq!(r.oer, Some(0.25));
    }

    #[test]
    fn pure_insertion() {
        let cats = categorize_binary(&[false; 20], &mask(20, &[(5, 8)])).unwrap();
        let r = rates("x", CategoryCounts::from_categories(&cats));
        assert_eq!(r.ir, Some(4.0 / 20.0));
        assert_eq!(r.tpr, None);
    }

    #[test]
    fn pure_deletion() {
        let cats = categorize_binary(&mask(10, &[(2, 5)]), &[false; 10]).unwrap();
        let r = rates("x", CategoryCounts::from_categories(&cats));
        assert_eq!((r.dr, r.tpr), (Some(1.0), Some(0.0)));
    }

    #[test]
    fn fragmentation_and_merge() {
        // one GT event split by a gap in the prediction
        let cats = categorize_binary(&mask(12, &[(2, 9)]), &mask(12, &[(2, 4), (7, 9)])).unwrap();
        assert_eq!(&cats[5..7], &[Fragmentation, Fragmentation]);
        // one prediction bridging two GT events, overhanging both ends
        let cats = categorize_binary(&mask(14, &[(3, 5), (8, 10)]), &mask(14, &[(1, 12)])).unwrap();
        assert_eq!(&cats[1..3], &[OverfillStart, OverfillStart]);
        assert_eq!(&cats[6..8], &[Merge, Merge]);
        assert_eq!(&cats[11..13], &[OverfillEnd, OverfillEnd]);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            categorize_binary(&[true], &[true, false]),
            Err(Error::LengthMismatch { gt: 1, pred: 2 })
        ));
    }

    #[test]
    fn aggregate_skips_absent() {
        let a = rates(
            "x",
            CategoryCounts {
                tp: 1,
                tn: 1,
                ..Default::default()
            },
        );
        let b = rates(
            "x",
            CategoryCounts {
                tn: 1,
                i: 1,
                ..Default::default()
            },
        );
        let rep = MetricsReport::aggregate(RunInfo::default(), &[vec![a], vec![b]]);
        assert_eq!(rep.classes[0].tpr, Some(1.0));
        assert_eq!(rep.classes[0].tnr, Some(0.75));
        assert!(rep.table().contains("tpr"));
    }

    proptest! {
        #[test]
        fn sums_and_duality(bits in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..120)) {
            let (g, p): (Vec<bool>, Vec<bool>) = bits.into_iter().unzip();
            let cats = categorize_binary(&g, &p).unwrap();
            let r = rates("x", CategoryCounts::from_categories(&cats));
            if let Some(s) = r.positive_sum() { prop_assert!((s - 1.0).abs() < 1e-9); }
            if let Some(s) = r.negative_sum() { prop_assert!((s - 1.0).abs() < 1e-9); }
            let swapped = categorize_binary(&p, &g).unwrap();
            for (a, b) in cats.iter().zip(&swapped) {
                prop_assert_eq!(a.dual(), *b);
            }
        }
    }
}
