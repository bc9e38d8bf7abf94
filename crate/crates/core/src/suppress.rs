//! Greedy non-maximum suppression and the same-class, keep-the-larger-box
//! duplicate filter applied to final detections.
//!
//! Both procedures compare against kept boxes only, use strict `iou > threshold`,
//! and break ties by original index so the output is fully deterministic.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::boxgeom::Detection;

pub const RPN_NMS_IOU: f64 = 0.7;
pub const RPN_TOP_N: usize = 2000;
pub const POSTPROCESS_IOU: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuppressionError {
    #[error("IoU threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("top-n must be at least 1")]
    ZeroTopN,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuppressionConfig {
    nms_iou_threshold: f64,
    top_n: Option<usize>,
    postprocess_iou_threshold: f64,
}

impl SuppressionConfig {
    pub fn new(
        nms_iou_threshold: f64,
        top_n: Option<usize>,
        postprocess_iou_threshold: f64,
    ) -> Result<Self, SuppressionError> {
        check_threshold(nms_iou_threshold)?;
        check_threshold(postprocess_iou_threshold)?;
        if top_n == Some(0) {
            return Err(SuppressionError::ZeroTopN);
        }
        Ok(Self { nms_iou_threshold, top_n, postprocess_iou_threshold })
    }

    pub fn nms_iou_threshold(&self) -> f64 {
        self.nms_iou_threshold
    }

    pub fn top_n(&self) -> Option<usize> {
        self.top_n
    }

    pub fn postprocess_iou_threshold(&self) -> f64 {
        self.postprocess_iou_threshold
    }
}

impl Default for SuppressionConfig {
    fn default() -> Self {
        Self {
            nms_iou_threshold: RPN_NMS_IOU,
            top_n: Some(RPN_TOP_N),
            postprocess_iou_threshold: POSTPROCESS_IOU,
        }
    }
}

pub fn check_threshold(t: f64) -> Result<f64, SuppressionError> {
    if t > 0.0 && t <= 1.0 {
        Ok(t)
    } else {
        Err(SuppressionError::BadThreshold(t))
    }
}

fn by_score_desc(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score().total_cmp(&dets[a].score()).then(a.cmp(&b)));
    order
}

/// Class-agnostic greedy NMS. Returns kept indices in keep (score-descending) order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<usize> {
    let order = by_score_desc(dets);
    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        let kept = dets[i].bbox();
        for &j in &order[rank + 1..] {
            if !suppressed[j] && kept.iou(dets[j].bbox()) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// Indices of the `n` highest-scoring detections, score-descending.
pub fn top_n_indices(dets: &[Detection], n: usize) -> Vec<usize> {
    let mut order = by_score_desc(dets);
    order.truncate(n);
    order
}

pub fn top_n(dets: &[Detection], n: usize) -> Vec<Detection> {
    top_n_indices(dets, n).into_iter().map(|i| dets[i].clone()).collect()
}

/// Proposal filtering: NMS at the configured threshold, then keep at most `top_n`.
pub fn select_proposals(dets: &[Detection], cfg: &SuppressionConfig) -> Vec<usize> {
    let mut keep = nms(dets, cfg.nms_iou_threshold);
    if let Some(n) = cfg.top_n {
        keep.truncate(n);
    }
    keep
}

fn area_order(a: &Detection, ia: usize, b: &Detection, ib: usize) -> Ordering {
    b.bbox()
        .area()
        .total_cmp(&a.bbox().area())
        .then(b.score().total_cmp(&a.score()))
        .then(ia.cmp(&ib))
}

/// Indices (ascending) that survive the same-class duplicate filter.
///
/// Detections are visited largest area first (ties: higher score, then lower
/// index). A visited detection that is not yet removed is kept and removes every
/// remaining detection of the same class whose IoU with it is strictly above
/// `iou_threshold`.
pub fn postprocess_indices(dets: &[Detection], iou_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| area_order(&dets[a], a, &dets[b], b));
    let mut removed = vec![false; dets.len()];
    for (rank, &i) in order.iter().enumerate() {
        if removed[i] {
            continue;
        }
        let kept = &dets[i];
        for &j in &order[rank + 1..] {
            if !removed[j]
                && dets[j].label() == kept.label()
                && kept.bbox().iou(dets[j].bbox()) > iou_threshold
            {
                removed[j] = true;
            }
        }
    }
    (0..dets.len()).filter(|&i| !removed[i]).collect()
}

/// Survivors of [`postprocess_indices`] in their original relative order.
pub fn paper_postprocess(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    postprocess_indices(dets, iou_threshold).into_iter().map(|i| dets[i].clone()).collect()
}
