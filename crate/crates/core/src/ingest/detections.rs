use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{IngestError, MAX_ROW_DIAGNOSTICS};
use crate::boxgeom::{BBox, ClassLabel, Detection, GroundTruthBox};

pub const DETECTION_HEADER: &str = "image_id,label,score,xmin,ymin,xmax,ymax";
pub const GROUND_TRUTH_HEADER: &str = "image_id,label,xmin,ymin,xmax,ymax";

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub image_id: String,
    pub detection: Detection,
}

/// Rows of a detection CSV in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionFile {
    pub rows: Vec<DetectionRow>,
}

fn num(record: &StringRecord, idx: usize, name: &str) -> Result<f64, String> {
    let raw = record.get(idx).unwrap_or("");
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("{name}: cannot parse {raw:?} as a finite number")),
    }
}

fn bbox_at(record: &StringRecord, first: usize) -> Result<BBox, String> {
    let xmin = num(record, first, "xmin")?;
    let ymin = num(record, first + 1, "ymin")?;
    let xmax = num(record, first + 2, "xmax")?;
    let ymax = num(record, first + 3, "ymax")?;
    BBox::new(xmin, ymin, xmax, ymax).map_err(|e| e.to_string())
}

fn image_id(record: &StringRecord) -> Result<String, String> {
    match record.get(0) {
        Some(id) if !id.is_empty() => Ok(id.to_owned()),
        _ => Err("empty image_id".to_owned()),
    }
}

fn label(record: &StringRecord) -> Result<ClassLabel, String> {
    ClassLabel::new(record.get(1).unwrap_or("")).map_err(|e| e.to_string())
}

/// Reads a headed CSV, converting each data record with `convert`. Every row is
/// checked; failures are gathered with their line numbers.
fn parse_rows<T>(
    text: &str,
    header: &'static str,
    convert: impl Fn(&StringRecord) -> Result<T, String>,
) -> Result<Vec<T>, IngestError> {
    let width = header.split(',').count();
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut total = 0;

    match records.next() {
        None => return Ok(rows),
        Some(Ok(first)) => {
            let found = first.iter().collect::<Vec<_>>().join(",");
            if found != header {
                return Err(IngestError::BadHeader { found, expected: header });
            }
        }
        Some(Err(e)) => return Err(IngestError::InvalidRows { total: 1, errors: vec![format!("line 1: {e}")] }),
    }

    for record in records {
        let outcome = match record {
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                Err((line, e.to_string()))
            }
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                if rec.len() != width {
                    Err((line, format!("expected {width} fields, found {}", rec.len())))
                } else {
                    convert(&rec).map_err(|msg| (line, msg))
                }
            }
        };
        match outcome {
            Ok(row) => rows.push(row),
            Err((line, msg)) => {
                total += 1;
                if errors.len() < MAX_ROW_DIAGNOSTICS {
                    errors.push(format!("line {line}: {msg}"));
                }
            }
        }
    }
    if total > 0 {
        return Err(IngestError::InvalidRows { total, errors });
    }
    Ok(rows)
}

fn read_text(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })
}

impl DetectionFile {
    pub fn parse_str(text: &str) -> Result<Self, IngestError> {
        let rows = parse_rows(text, DETECTION_HEADER, |rec| {
            let image_id = image_id(rec)?;
            let label = label(rec)?;
            let score = num(rec, 2, "score")?;
            let bbox = bbox_at(rec, 3)?;
            let detection = Detection::new(bbox, label, score).map_err(|e| e.to_string())?;
            Ok(DetectionRow { image_id, detection })
        })?;
        Ok(Self { rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        Self::parse_str(&read_text(path)?).map_err(|e| e.in_file(path))
    }

    /// Detections per image, each list in file order.
    pub fn group_by_image(&self) -> BTreeMap<String, Vec<Detection>> {
        let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
        for row in &self.rows {
            out.entry(row.image_id.clone()).or_default().push(row.detection.clone());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(DETECTION_HEADER);
        out.push('\n');
        for row in &self.rows {
            let d = &row.detection;
            let b = d.bbox();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.image_id,
                d.label(),
                d.score(),
                b.x_min(),
                b.y_min(),
                b.x_max(),
                b.y_max()
            );
        }
        out
    }
}

/// Reads a detection CSV grouped by image id.
pub fn load_detections(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Detection>>, IngestError> {
    Ok(DetectionFile::read(path)?.group_by_image())
}

pub fn parse_ground_truth_csv(text: &str) -> Result<BTreeMap<String, Vec<GroundTruthBox>>, IngestError> {
    let rows = parse_rows(text, GROUND_TRUTH_HEADER, |rec| {
        Ok((image_id(rec)?, GroundTruthBox::new(bbox_at(rec, 2)?, label(rec)?)))
    })?;
    let mut out: BTreeMap<String, Vec<GroundTruthBox>> = BTreeMap::new();
    for (id, gt) in rows {
        out.entry(id).or_default().push(gt);
    }
    Ok(out)
}

/// Ground truth in CSV form: the detection columns without `score`.
pub fn load_ground_truth_csv(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, Vec<GroundTruthBox>>, IngestError> {
    let path = path.as_ref();
    parse_ground_truth_csv(&read_text(path)?).map_err(|e| e.in_file(path))
}

/// Challenge-style submission lines: `<file>,<label> <x1> <y1> <x2> <y2> ...`
/// with coordinates rounded to whole pixels. Image ids without an extension get `.jpg`.
pub fn write_submission(grouped: &BTreeMap<String, Vec<Detection>>) -> String {
    let mut out = String::new();
    for (id, dets) in grouped {
        let has_ext = Path::new(id).extension().is_some();
        out.push_str(id);
        if !has_ext {
            out.push_str(".jpg");
        }
        out.push(',');
        let groups: Vec<String> = dets
            .iter()
            .map(|d| {
                let b = d.bbox();
                format!(
                    "{} {} {} {} {}",
                    d.label(),
                    b.x_min().round(),
                    b.y_min().round(),
                    b.x_max().round(),
                    b.y_max().round()
                )
            })
            .collect();
        out.push_str(&groups.join(" "));
        out.push('\n');
    }
    out
}
