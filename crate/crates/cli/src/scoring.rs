use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use rdd_core::evaluate::{evaluate_dataset, EvalReport, ImageSample, IouCriterion, MatchConfig, Scores};
use rdd_core::ingest::{
    validate_dataset, write_submission, DetectionFile, DetectionRow, ValidationExpectations, ValidationReport,
};
use rdd_core::suppress::{postprocess_indices, select_proposals, SuppressionConfig, POSTPROCESS_IOU};
use rdd_core::Detection;
use serde::Serialize;

use crate::args::{EvaluateArgs, Format, NmsArgs, PostprocessArgs, ValidateArgs};
use crate::error::CliError;
use crate::io::{emit, load_ground_truth, require};

pub const COORDINATE_NOTE: &str = "note: annotation coordinates are read as pixel boundaries \
(a box touching the right edge of a 600-wide image has xmax = 600), not inclusive pixel indices";

fn read_detections(path: &std::path::Path, min_score: Option<f64>) -> Result<DetectionFile, CliError> {
    require(path)?;
    let mut file = DetectionFile::read(path)?;
    if let Some(min) = min_score {
        file.rows.retain(|r| r.detection.score() >= min);
    }
    Ok(file)
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    require(&args.gt.gt)?;
    require(&args.det)?;
    let manifest = load_ground_truth(&args.gt)?;
    let mut preds = read_detections(&args.det, args.min_score)?.group_by_image();

    let unknown: Vec<&String> = preds.keys().filter(|id| manifest.image(id).is_none()).collect();
    if !unknown.is_empty() {
        let shown: Vec<&str> = unknown.iter().take(5).map(|s| s.as_str()).collect();
        return Err(CliError::Input(format!(
            "{}: {} image id(s) not present in the ground truth: {}{}",
            args.det.display(),
            unknown.len(),
            shown.join(", "),
            if unknown.len() > shown.len() { ", ..." } else { "" }
        )));
    }

    let samples = manifest
        .images()
        .iter()
        .map(|img| {
            let p = preds.remove(&img.image_id).unwrap_or_default();
            ImageSample::new(img.image_id.clone(), img.annotations.clone(), p)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let criterion = if args.inclusive { IouCriterion::Inclusive } else { IouCriterion::Strict };
    let cfg = MatchConfig { iou_threshold: args.iou, criterion };
    let report = evaluate_dataset(&samples, &cfg).map_err(|e| CliError::Internal(e.to_string()))?;

    let bytes = match args.format {
        Format::Json => to_json(&report)?,
        Format::Text => eval_text(&report).into_bytes(),
    };
    emit(args.out.as_deref(), &bytes)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn score_line(s: &Scores) -> String {
    format!(
        "tp {} fp {} fn {}  precision {:.6}  recall {:.6}  f1 {:.6}",
        s.tp, s.fp, s.fn_, s.precision, s.recall, s.f1
    )
}

pub fn eval_text(r: &EvalReport) -> String {
    let op = match r.criterion {
        IouCriterion::Strict => ">",
        IouCriterion::Inclusive => ">=",
    };
    let mut out = String::new();
    let _ = writeln!(out, "images: {}", r.images);
    let _ = writeln!(out, "match rule: same label and IoU {op} {}", r.iou_threshold);
    let _ = writeln!(out, "pooled: {}", score_line(&r.pooled));
    let _ = writeln!(out, "pooled f1: {:.6}", r.pooled.f1);
    let _ = writeln!(out, "macro f1 (mean over images): {:.6}", r.macro_f1);
    if !r.per_class.is_empty() {
        let _ = writeln!(out, "per class:");
        let width = r.per_class.iter().map(|c| c.label.len()).max().unwrap_or(0);
        for c in &r.per_class {
            let _ = writeln!(out, "  {:<width$}  {}", c.label, score_line(&c.scores));
        }
    }
    out
}

/// Runs `select` on each image's detections (in file order) and returns the
/// surviving rows in file order.
fn filter_per_image(
    rows: Vec<DetectionRow>,
    select: impl Fn(&[Detection]) -> Vec<usize> + Sync,
) -> Vec<DetectionRow> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.image_id.as_str()).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut keep: Vec<usize> = groups
        .par_iter()
        .flat_map_iter(|idx| {
            let dets: Vec<Detection> = idx.iter().map(|&i| rows[i].detection.clone()).collect();
            select(&dets).into_iter().map(|k| idx[k]).collect::<Vec<_>>()
        })
        .collect();
    keep.sort_unstable();
    let mut flags = vec![false; rows.len()];
    for i in keep {
        flags[i] = true;
    }
    rows.into_iter().zip(flags).filter_map(|(r, k)| k.then_some(r)).collect()
}

pub fn postprocess(args: PostprocessArgs) -> Result<(), CliError> {
    let file = read_detections(&args.det, args.min_score)?;
    let t = args.threshold;
    let kept = DetectionFile { rows: filter_per_image(file.rows, |d| postprocess_indices(d, t)) };
    let text = if args.submission { write_submission(&kept.group_by_image()) } else { kept.to_csv() };
    emit(args.out.as_deref(), text.as_bytes())
}

pub fn nms(args: NmsArgs) -> Result<(), CliError> {
    let file = read_detections(&args.det, None)?;
    let top_n = if args.all { None } else { Some(args.top_n) };
    let cfg = SuppressionConfig::new(args.threshold, top_n, POSTPROCESS_IOU)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let kept = DetectionFile { rows: filter_per_image(file.rows, |d| select_proposals(d, &cfg)) };
    emit(args.out.as_deref(), kept.to_csv().as_bytes())
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    #[serde(flatten)]
    report: &'a ValidationReport,
    expected: &'a ValidationExpectations,
    passed: bool,
    coordinate_convention: &'static str,
}

pub fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let manifest = load_ground_truth(&args.gt)?;
    let expected = ValidationExpectations {
        images: Some(args.images),
        boxes: Some(args.boxes),
        classes: Some(args.classes),
        resolution: Some(args.resolution),
    };
    let report = validate_dataset(&manifest, &expected);
    let bytes = match args.format {
        Format::Json => to_json(&ValidateOutput {
            report: &report,
            expected: &expected,
            passed: report.passed(),
            coordinate_convention: "boundary",
        })?,
        Format::Text => validate_text(&report, &expected).into_bytes(),
    };
    emit(args.out.as_deref(), &bytes)
}

fn validate_text(r: &ValidationReport, e: &ValidationExpectations) -> String {
    let mut out = String::new();
    let exp = |v: Option<usize>| v.map(|v| format!(" (expected {v})")).unwrap_or_default();
    let _ = writeln!(out, "images: {}{}", r.images, exp(e.images));
    let _ = writeln!(out, "boxes: {}{}", r.boxes, exp(e.boxes));
    let _ = writeln!(out, "classes: {}{}", r.classes, exp(e.classes));
    if let Some((w, h)) = e.resolution {
        let _ = writeln!(out, "resolution: expected {w}×{h}");
    }
    for (label, n) in &r.labels {
        let _ = writeln!(out, "  {label}: {n}");
    }
    if r.passed() {
        let _ = writeln!(out, "result: ok");
    } else {
        let _ = writeln!(out, "result: {} mismatch(es)", r.findings.len());
        for f in &r.findings {
            let _ = writeln!(out, "  {f}");
        }
    }
    let _ = writeln!(out, "{COORDINATE_NOTE}");
    out
}
