use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::voc::parse_voc_annotation;
use super::IngestError;
use crate::boxgeom::GroundTruthBox;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub filename: Option<String>,
    pub width: u32,
    pub height: u32,
    pub annotations: Vec<GroundTruthBox>,
}

/// Images with their annotations plus a registry of class labels and box counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetManifest {
    images: Vec<ImageEntry>,
    labels: BTreeMap<String, usize>,
}

impl DatasetManifest {
    /// Requires unique ids and annotations inside their images.
    pub fn from_entries(images: Vec<ImageEntry>) -> Result<Self, IngestError> {
        let mut seen = HashSet::with_capacity(images.len());
        let mut labels: BTreeMap<String, usize> = BTreeMap::new();
        for img in &images {
            if !seen.insert(img.image_id.as_str()) {
                return Err(IngestError::DuplicateImage(img.image_id.clone()));
            }
            for a in &img.annotations {
                let b = a.bbox;
                if b.x_min() < 0.0
                    || b.y_min() < 0.0
                    || b.x_max() > img.width as f64
                    || b.y_max() > img.height as f64
                {
                    return Err(IngestError::OutOfBounds {
                        image_id: img.image_id.clone(),
                        bbox: b,
                        width: img.width,
                        height: img.height,
                    });
                }
                *labels.entry(a.label.as_str().to_owned()).or_default() += 1;
            }
        }
        Ok(Self { images, labels })
    }

    /// Builds a manifest from CSV ground truth, which carries no image sizes.
    /// Boxes are clipped to `width × height`.
    pub fn from_ground_truth(
        boxes: BTreeMap<String, Vec<GroundTruthBox>>,
        width: u32,
        height: u32,
    ) -> Result<Self, IngestError> {
        if width == 0 || height == 0 {
            return Err(IngestError::BadImageSize { width, height });
        }
        let entries = boxes
            .into_iter()
            .map(|(image_id, anns)| ImageEntry {
                image_id,
                filename: None,
                width,
                height,
                annotations: anns
                    .into_iter()
                    .map(|a| GroundTruthBox::new(a.bbox.clip(width as f64, height as f64), a.label))
                    .collect(),
            })
            .collect();
        Self::from_entries(entries)
    }

    pub fn images(&self) -> &[ImageEntry] {
        &self.images
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageEntry> {
        self.images.iter().find(|i| i.image_id == image_id)
    }

    /// Distinct labels with their box counts.
    pub fn labels(&self) -> &BTreeMap<String, usize> {
        &self.labels
    }

    pub fn box_count(&self) -> usize {
        self.images.iter().map(|i| i.annotations.len()).sum()
    }
}

/// Loads every `*.xml` file in `dir` (not recursive). The image id is the file
/// stem. Returns the manifest and any clipping warnings, prefixed by file name.
pub fn load_voc_dir(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<String>), IngestError> {
    let dir = dir.as_ref();
    let io_err = |source| IngestError::Io { path: dir.to_owned(), source };
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
            paths.push(path);
        }
    }
    paths.sort();

    let parsed: Vec<Result<(ImageEntry, Vec<String>), IngestError>> = paths
        .par_iter()
        .map(|path| {
            let text = std::fs::read_to_string(path)
                .map_err(|source| IngestError::Io { path: path.clone(), source })?;
            let (ann, warnings) = parse_voc_annotation(&text).map_err(|e| e.in_file(path))?;
            let image_id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let warnings = warnings.into_iter().map(|w| format!("{name}: {w}")).collect();
            let entry = ImageEntry {
                image_id,
                filename: ann.filename,
                width: ann.width,
                height: ann.height,
                annotations: ann.objects,
            };
            Ok((entry, warnings))
        })
        .collect();

    let mut entries = Vec::with_capacity(parsed.len());
    let mut warnings = Vec::new();
    for item in parsed {
        let (entry, w) = item?;
        entries.push(entry);
        warnings.extend(w);
    }
    Ok((DatasetManifest::from_entries(entries)?, warnings))
}

/// Reference statistics a dataset is checked against. `None` skips a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationExpectations {
    pub images: Option<usize>,
    pub boxes: Option<usize>,
    pub classes: Option<usize>,
    pub resolution: Option<(u32, u32)>,
}

impl ValidationExpectations {
    /// The 2018 road-damage release: 9,053 images, 15,435 boxes, 8 classes, 600×600.
    pub fn road_damage_2018() -> Self {
        Self { images: Some(9053), boxes: Some(15435), classes: Some(8), resolution: Some((600, 600)) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    ImageCount { expected: usize, observed: usize },
    BoxCount { expected: usize, observed: usize },
    ClassCount { expected: usize, observed: usize },
    Resolution { image_id: String, expected: (u32, u32), observed: (u32, u32) },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::ImageCount { expected, observed } => {
                write!(f, "image count {observed}, expected {expected}")
            }
            Finding::BoxCount { expected, observed } => {
                write!(f, "box count {observed}, expected {expected}")
            }
            Finding::ClassCount { expected, observed } => {
                write!(f, "class count {observed}, expected {expected}")
            }
            Finding::Resolution { image_id, expected, observed } => write!(
                f,
                "image {image_id} is {}×{}, expected {}×{}",
                observed.0, observed.1, expected.0, expected.1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub images: usize,
    pub boxes: usize,
    pub classes: usize,
    pub labels: BTreeMap<String, usize>,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Compares a manifest against expected statistics. Mismatches are listed, never fatal.
pub fn validate_dataset(manifest: &DatasetManifest, expected: &ValidationExpectations) -> ValidationReport {
    let images = manifest.images().len();
    let boxes = manifest.box_count();
    let classes = manifest.labels().len();
    let mut findings = Vec::new();
    if let Some(e) = expected.images.filter(|&e| e != images) {
        findings.push(Finding::ImageCount { expected: e, observed: images });
    }
    if let Some(e) = expected.boxes.filter(|&e| e != boxes) {
        findings.push(Finding::BoxCount { expected: e, observed: boxes });
    }
    if let Some(e) = expected.classes.filter(|&e| e != classes) {
        findings.push(Finding::ClassCount { expected: e, observed: classes });
    }
    if let Some(res) = expected.resolution {
        for img in manifest.images() {
            if (img.width, img.height) != res {
                findings.push(Finding::Resolution {
                    image_id: img.image_id.clone(),
                    expected: res,
                    observed: (img.width, img.height),
                });
            }
        }
    }
    ValidationReport { images, boxes, classes, labels: manifest.labels().clone(), findings }
}
