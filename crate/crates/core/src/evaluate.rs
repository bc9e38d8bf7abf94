//! Class-matched F1 evaluation at a fixed IoU threshold.
//!
//! A prediction matches a ground-truth box when both carry the same class label
//! and their IoU is over the threshold. Matching is greedy and one-to-one:
//! predictions are visited by descending score, and each takes the unmatched
//! same-class ground-truth box with the highest IoU (ties: lower index).
//!
//! Equal scores are ordered by box `(x_min, y_min, x_max, y_max)`, then label,
//! then input index, so reordering the prediction list cannot change the counts.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxgeom::{ClassLabel, Detection, GroundTruthBox};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("duplicate image id {0:?}")]
    DuplicateImageId(String),
    #[error("image id must be non-empty")]
    EmptyImageId,
    #[error("{name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}

/// How the IoU is compared against the threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouCriterion {
    /// `iou > threshold`
    #[default]
    Strict,
    /// `iou >= threshold`
    Inclusive,
}

impl IouCriterion {
    #[inline]
    pub fn passes(self, iou: f64, threshold: f64) -> bool {
        match self {
            IouCriterion::Strict => iou > threshold,
            IouCriterion::Inclusive => iou >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub criterion: IouCriterion,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { iou_threshold: DEFAULT_IOU_THRESHOLD, criterion: IouCriterion::Strict }
    }
}

impl MatchConfig {
    pub fn strict(iou_threshold: f64) -> Self {
        Self { iou_threshold, criterion: IouCriterion::Strict }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub image_id: String,
    pub ground_truth: Vec<GroundTruthBox>,
    pub predictions: Vec<Detection>,
}

impl ImageSample {
    pub fn new(
        image_id: impl Into<String>,
        ground_truth: Vec<GroundTruthBox>,
        predictions: Vec<Detection>,
    ) -> Result<Self, EvalError> {
        let image_id = image_id.into();
        if image_id.is_empty() {
            return Err(EvalError::EmptyImageId);
        }
        Ok(Self { image_id, ground_truth, predictions })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1_unchecked(self.precision(), self.recall())
    }

    pub fn scores(&self) -> Scores {
        Scores {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchOutcome {
    /// `(prediction index, ground-truth index)` in match order.
    pub pairs: Vec<(usize, usize)>,
    pub counts: Counts,
}

/// Greedy class-aware matching with a strict `iou > iou_threshold` rule.
pub fn match_image(sample: &ImageSample, iou_threshold: f64) -> MatchOutcome {
    match_image_with(sample, &MatchConfig::strict(iou_threshold))
}

pub fn match_image_with(sample: &ImageSample, cfg: &MatchConfig) -> MatchOutcome {
    let preds = &sample.predictions;
    let gts = &sample.ground_truth;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| visit_order(&preds[a], a, &preds[b], b));

    let mut gt_taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for p in order {
        let pred = &preds[p];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_taken[g] || gt.label != *pred.label() {
                continue;
            }
            let iou = pred.bbox().iou(&gt.bbox);
            if !cfg.criterion.passes(iou, cfg.iou_threshold) {
                continue;
            }
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            gt_taken[g] = true;
            pairs.push((p, g));
        }
    }
    let tp = pairs.len();
    MatchOutcome {
        pairs,
        counts: Counts { tp, fp: preds.len() - tp, fn_: gts.len() - tp },
    }
}

/// Ordering in which the matcher visits predictions.
pub fn visit_order(a: &Detection, ia: usize, b: &Detection, ib: usize) -> Ordering {
    let (ba, bb) = (a.bbox().to_array(), b.bbox().to_array());
    b.score()
        .total_cmp(&a.score())
        .then_with(|| ba.iter().zip(&bb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal))
        .then_with(|| a.label().cmp(b.label()))
        .then(ia.cmp(&ib))
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&precision) {
        return Err(EvalError::OutOfRange { name: "precision", value: precision });
    }
    if !(0.0..=1.0).contains(&recall) {
        return Err(EvalError::OutOfRange { name: "recall", value: recall });
    }
    Ok(f1_unchecked(precision, recall))
}

fn f1_unchecked(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores {
    pub label: String,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageScores {
    pub image_id: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
}

/// Dataset-level results. `pooled` is computed from counts summed over all
/// images; `macro_f1` is the mean of per-image F1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub images: usize,
    pub iou_threshold: f64,
    pub criterion: IouCriterion,
    pub pooled: Scores,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScores>,
    pub per_image: Vec<ImageScores>,
}

/// Per-image F1, with an image lacking both ground truth and predictions scoring 1.
pub fn image_f1(sample: &ImageSample, counts: &Counts) -> f64 {
    if sample.ground_truth.is_empty() && sample.predictions.is_empty() {
        1.0
    } else {
        counts.f1()
    }
}

fn class_counts(sample: &ImageSample, outcome: &MatchOutcome) -> BTreeMap<ClassLabel, Counts> {
    let mut pred_matched = vec![false; sample.predictions.len()];
    let mut gt_matched = vec![false; sample.ground_truth.len()];
    for &(p, g) in &outcome.pairs {
        pred_matched[p] = true;
        gt_matched[g] = true;
    }
    let mut out: BTreeMap<ClassLabel, Counts> = BTreeMap::new();
    for (pred, matched) in sample.predictions.iter().zip(pred_matched) {
        let c = out.entry(pred.label().clone()).or_default();
        if matched {
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    for (gt, matched) in sample.ground_truth.iter().zip(gt_matched) {
        if !matched {
            out.entry(gt.label.clone()).or_default().fn_ += 1;
        }
    }
    out
}

/// Matches every image and aggregates. Images may be processed in parallel on
/// the current rayon pool; the report does not depend on scheduling.
pub fn evaluate_dataset(samples: &[ImageSample], cfg: &MatchConfig) -> Result<EvalReport, EvalError> {
    let mut seen = HashSet::with_capacity(samples.len());
    for s in samples {
        if s.image_id.is_empty() {
            return Err(EvalError::EmptyImageId);
        }
        if !seen.insert(s.image_id.as_str()) {
            return Err(EvalError::DuplicateImageId(s.image_id.clone()));
        }
    }

    let per_sample: Vec<(MatchOutcome, BTreeMap<ClassLabel, Counts>)> = samples
        .par_iter()
        .map(|s| {
            let outcome = match_image_with(s, cfg);
            let classes = class_counts(s, &outcome);
            (outcome, classes)
        })
        .collect();

    let mut pooled = Counts::default();
    let mut classes: BTreeMap<ClassLabel, Counts> = BTreeMap::new();
    let mut per_image = Vec::with_capacity(samples.len());
    let mut f1_sum = 0.0;
    for (sample, (outcome, by_class)) in samples.iter().zip(per_sample) {
        pooled += outcome.counts;
        for (label, c) in by_class {
            *classes.entry(label).or_default() += c;
        }
        let f1 = image_f1(sample, &outcome.counts);
        f1_sum += f1;
        per_image.push(ImageScores {
            image_id: sample.image_id.clone(),
            tp: outcome.counts.tp,
            fp: outcome.counts.fp,
            fn_: outcome.counts.fn_,
            f1,
        });
    }

    Ok(EvalReport {
        images: samples.len(),
        iou_threshold: cfg.iou_threshold,
        criterion: cfg.criterion,
        pooled: pooled.scores(),
        macro_f1: if samples.is_empty() { 0.0 } else { f1_sum / samples.len() as f64 },
        per_class: classes
            .into_iter()
            .map(|(label, c)| ClassScores { label: label.as_str().to_owned(), scores: c.scores() })
            .collect(),
        per_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxgeom::BBox;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn gt(b: BBox, l: &str) -> GroundTruthBox {
        GroundTruthBox::new(b, ClassLabel::new(l).unwrap())
    }

    fn pred(b: BBox, l: &str, s: f64) -> Detection {
        Detection::new(b, ClassLabel::new(l).unwrap(), s).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let gts = vec![gt(bx(0., 0., 10., 10.), "A"), gt(bx(20., 20., 40., 30.), "B")];
        let preds = gts.iter().map(|g| pred(g.bbox, g.label.as_str(), 0.3)).collect();
        let s = ImageSample::new("img", gts, preds).unwrap();
        let o = match_image(&s, 0.5);
        assert_eq!(o.counts, Counts { tp: 2, fp: 0, fn_: 0 });
    }

    #[test]
    fn wrong_class_is_fp_and_fn() {
        let s = ImageSample::new(
            "img",
            vec![gt(bx(0., 0., 10., 10.), "A")],
            vec![pred(bx(0., 0., 10., 10.), "B", 0.9)],
        )
        .unwrap();
        assert_eq!(match_image(&s, 0.5).counts, Counts { tp: 0, fp: 1, fn_: 1 });
    }

    #[test]
    fn higher_score_takes_the_gt() {
        let s = ImageSample::new(
            "img",
            vec![gt(bx(0., 0., 10., 10.), "A")],
            vec![pred(bx(1., 1., 11., 11.), "A", 0.8), pred(bx(0., 0., 10., 10.), "A", 0.9)],
        )
        .unwrap();
        let o = match_image(&s, 0.5);
        assert_eq!(o.pairs, vec![(1, 0)]);
        assert_eq!(o.counts, Counts { tp: 1, fp: 1, fn_: 0 });
    }

    #[test]
    fn threshold_strictness() {
        // iou exactly 0.5
        let s = ImageSample::new(
            "img",
            vec![gt(bx(0., 0., 30., 10.), "A")],
            vec![pred(bx(10., 0., 40., 10.), "A", 0.9)],
        )
        .unwrap();
        assert_eq!(match_image(&s, 0.5).counts.tp, 0);
        let inclusive = MatchConfig { iou_threshold: 0.5, criterion: IouCriterion::Inclusive };
        assert_eq!(match_image_with(&s, &inclusive).counts.tp, 1);
    }

    #[test]
    fn f1_values() {
        assert_eq!(f1_score(1.0, 1.0).unwrap(), 1.0);
        assert!((f1_score(1.0, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score(0.0, 0.0).unwrap(), 0.0);
        assert!(f1_score(1.2, 0.5).is_err());
        assert!(f1_score(0.5, -0.1).is_err());
    }

    #[test]
    fn two_image_fixture() {
        let a = bx(0., 0., 10., 10.);
        let far = bx(50., 50., 60., 60.);
        let img1 = ImageSample::new(
            "img1",
            vec![gt(a, "D00")],
            vec![pred(a, "D00", 0.9), pred(far, "D00", 0.4)],
        )
        .unwrap();
        let img2 = ImageSample::new("img2", vec![gt(a, "D10")], vec![]).unwrap();
        let r = evaluate_dataset(&[img1, img2], &MatchConfig::default()).unwrap();
        assert_eq!((r.pooled.tp, r.pooled.fp, r.pooled.fn_), (1, 1, 1));
        assert_eq!(r.pooled.precision, 0.5);
        assert_eq!(r.pooled.recall, 0.5);
        assert_eq!(r.pooled.f1, 0.5);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class.len(), 2);
        assert_eq!(r.per_class[0].label, "D00");
        assert_eq!((r.per_class[0].scores.tp, r.per_class[0].scores.fp), (1, 1));
        assert_eq!(r.per_class[1].scores.fn_, 1);
    }

    #[test]
    fn empty_image_scores_one_in_macro() {
        let s = ImageSample::new("empty", vec![], vec![]).unwrap();
        let r = evaluate_dataset(&[s], &MatchConfig::default()).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.pooled.f1, 0.0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let s = ImageSample::new("x", vec![], vec![]).unwrap();
        assert_eq!(
            evaluate_dataset(&[s.clone(), s], &MatchConfig::default()),
            Err(EvalError::DuplicateImageId("x".into()))
        );
        assert_eq!(ImageSample::new("", vec![], vec![]), Err(EvalError::EmptyImageId));
    }
}
