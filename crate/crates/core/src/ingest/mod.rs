//! Annotation and detection file formats, dataset manifests, and the
//! image ↔ model coordinate mapping.

mod detections;
mod manifest;
mod voc;

use std::path::PathBuf;

use thiserror::Error;

use crate::boxgeom::{BBox, GeometryError};

pub use detections::{
    load_detections, load_ground_truth_csv, parse_ground_truth_csv, write_submission,
    DetectionFile, DetectionRow, DETECTION_HEADER, GROUND_TRUTH_HEADER,
};
pub use manifest::{
    load_voc_dir, validate_dataset, DatasetManifest, Finding, ImageEntry, ValidationExpectations,
    ValidationReport,
};
pub use voc::{parse_voc_annotation, write_voc_annotation, VocAnnotation};

/// Side length of the square model input.
pub const MODEL_INPUT_SIZE: f64 = 512.0;

/// Maximum number of row diagnostics kept in [`IngestError::InvalidRows`].
pub const MAX_ROW_DIAGNOSTICS: usize = 10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("missing element <{element}>{}", object_suffix(*.object))]
    MissingElement { element: String, object: Option<usize> },
    #[error("element <{element}>{}: cannot parse {value:?} as a number", object_suffix(*.object))]
    BadNumber { element: String, value: String, object: Option<usize> },
    #[error("object {object}: {axis}min {min} > {axis}max {max}")]
    InvertedBox { object: usize, axis: char, min: f64, max: f64 },
    #[error("object {object}: {source}")]
    BadObject {
        object: usize,
        #[source]
        source: GeometryError,
    },
    #[error("image size must be positive, got {width}×{height}")]
    BadImageSize { width: u32, height: u32 },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error("unexpected CSV header {found:?}, expected {expected:?}")]
    BadHeader { found: String, expected: &'static str },
    #[error("{total} invalid row(s); first: {}", .errors.first().map(String::as_str).unwrap_or(""))]
    InvalidRows { total: usize, errors: Vec<String> },
    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),
    #[error("image {image_id}: annotation {bbox} lies outside {width}×{height}")]
    OutOfBounds { image_id: String, bbox: BBox, width: u32, height: u32 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn object_suffix(object: Option<usize>) -> String {
    object.map(|i| format!(" in object {i}")).unwrap_or_default()
}

impl IngestError {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        IngestError::InFile { path: path.into(), source: Box::new(self) }
    }
}

fn check_dims(orig_w: f64, orig_h: f64) -> Result<(), GeometryError> {
    if orig_w > 0.0 && orig_h > 0.0 && orig_w.is_finite() && orig_h.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::BadImageSize(orig_w, orig_h))
    }
}

/// Maps a box from an `orig_w × orig_h` image onto the 512×512 model input.
pub fn to_model_space(b: &BBox, orig_w: f64, orig_h: f64) -> Result<BBox, GeometryError> {
    check_dims(orig_w, orig_h)?;
    b.scale(MODEL_INPUT_SIZE / orig_w, MODEL_INPUT_SIZE / orig_h)
}

/// Inverse of [`to_model_space`].
pub fn to_image_space(b: &BBox, orig_w: f64, orig_h: f64) -> Result<BBox, GeometryError> {
    check_dims(orig_w, orig_h)?;
    b.scale(orig_w / MODEL_INPUT_SIZE, orig_h / MODEL_INPUT_SIZE)
}
