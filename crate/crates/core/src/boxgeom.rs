//! Axis-aligned boxes in continuous pixel coordinates.
//!
//! Coordinates describe box boundaries: origin at the top-left corner, x to the
//! right, y downward, and `width = x_max - x_min`. A box covering a whole
//! 600×600 image is `[0, 0, 600, 600]`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box coordinates must be finite, got [{0}, {1}, {2}, {3}]")]
    NonFinite(f64, f64, f64, f64),
    #[error("inverted box: min ({min}) > max ({max}) on the {axis} axis")]
    Inverted { axis: char, min: f64, max: f64 },
    #[error("scale factors must be positive and finite, got ({0}, {1})")]
    BadScale(f64, f64),
    #[error("box x-range [{x_min}, {x_max}] lies outside image width {width}")]
    OutsideImage { x_min: f64, x_max: f64, width: f64 },
    #[error("image dimensions must be positive and finite, got {0}×{1}")]
    BadImageSize(f64, f64),
    #[error("score {0} outside [0, 1]")]
    BadScore(f64),
    #[error("class label must be non-empty")]
    EmptyLabel,
}

/// Axis-aligned rectangle `[x_min, y_min, x_max, y_max]`.
///
/// Always finite with `x_min <= x_max` and `y_min <= y_max`. Zero-area boxes are
/// representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        if !(x_min.is_finite() && y_min.is_finite() && x_max.is_finite() && y_max.is_finite()) {
            return Err(GeometryError::NonFinite(x_min, y_min, x_max, y_max));
        }
        if x_min > x_max {
            return Err(GeometryError::Inverted { axis: 'x', min: x_min, max: x_max });
        }
        if y_min > y_max {
            return Err(GeometryError::Inverted { axis: 'y', min: y_min, max: y_max });
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    /// Builds a box from its center and size.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::new(cx - width / 2.0, cy - height / 2.0, cx + width / 2.0, cy + height / 2.0)
    }

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    #[inline]
    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    #[inline]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    #[inline]
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union. Two boxes with zero union area have IoU 0.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        (inter / union).clamp(0.0, 1.0)
    }

    /// Multiplies x coordinates by `sx` and y coordinates by `sy`.
    pub fn scale(&self, sx: f64, sy: f64) -> Result<BBox, GeometryError> {
        if !(sx > 0.0 && sy > 0.0 && sx.is_finite() && sy.is_finite()) {
            return Err(GeometryError::BadScale(sx, sy));
        }
        BBox::new(self.x_min * sx, self.y_min * sy, self.x_max * sx, self.y_max * sy)
    }

    /// Mirrors the box about the vertical center line of an image `image_width` wide.
    pub fn hflip(&self, image_width: f64) -> Result<BBox, GeometryError> {
        if !(image_width > 0.0 && image_width.is_finite()) {
            return Err(GeometryError::BadImageSize(image_width, f64::NAN));
        }
        if self.x_min < 0.0 || self.x_max > image_width {
            return Err(GeometryError::OutsideImage {
                x_min: self.x_min,
                x_max: self.x_max,
                width: image_width,
            });
        }
        Ok(BBox {
            x_min: image_width - self.x_max,
            y_min: self.y_min,
            x_max: image_width - self.x_min,
            y_max: self.y_max,
        })
    }

    /// Clamps the box into `[0, width] × [0, height]`.
    pub fn clip(&self, width: f64, height: f64) -> BBox {
        let cx = |v: f64| v.clamp(0.0, width.max(0.0));
        let cy = |v: f64| v.clamp(0.0, height.max(0.0));
        BBox {
            x_min: cx(self.x_min),
            y_min: cy(self.y_min),
            x_max: cx(self.x_max),
            y_max: cy(self.y_max),
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<BBox, GeometryError> {
        BBox::new(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x_min, self.y_min, self.x_max, self.y_max)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            x_min: f64,
            y_min: f64,
            x_max: f64,
            y_max: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        BBox::new(raw.x_min, raw.y_min, raw.x_max, raw.y_max).map_err(serde::de::Error::custom)
    }
}

pub fn area(b: &BBox) -> f64 {
    b.area()
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

pub fn scale_box(b: &BBox, sx: f64, sy: f64) -> Result<BBox, GeometryError> {
    b.scale(sx, sy)
}

pub fn hflip_box(b: &BBox, image_width: f64) -> Result<BBox, GeometryError> {
    b.hflip(image_width)
}

pub fn clip_box(b: &BBox, width: f64, height: f64) -> BBox {
    b.clip(width, height)
}

/// Opaque, non-empty class identifier such as `"D00"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ClassLabel(String);

impl ClassLabel {
    pub fn new(label: impl Into<String>) -> Result<Self, GeometryError> {
        let label = label.into();
        if label.is_empty() {
            return Err(GeometryError::EmptyLabel);
        }
        Ok(Self(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A model prediction: box, class and confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    bbox: BBox,
    label: ClassLabel,
    score: f64,
}

impl Detection {
    pub fn new(bbox: BBox, label: ClassLabel, score: f64) -> Result<Self, GeometryError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(GeometryError::BadScore(score));
        }
        Ok(Self { bbox, label, score })
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn label(&self) -> &ClassLabel {
        &self.label
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn with_bbox(&self, bbox: BBox) -> Detection {
        Detection { bbox, ..self.clone() }
    }
}

/// An annotated box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthBox {
    pub bbox: BBox,
    pub label: ClassLabel,
}

impl GroundTruthBox {
    pub fn new(bbox: BBox, label: ClassLabel) -> Self {
        Self { bbox, label }
    }
}
