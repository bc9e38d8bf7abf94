//! RPN anchor grids and the box-delta parameterization relating proposals to anchors.
//!
//! Deltas follow the Faster R-CNN convention:
//!
//! ```text
//! dx = (tx - ax) / aw    dy = (ty - ay) / ah
//! dw = ln(tw / aw)       dh = ln(th / ah)
//! ```
//!
//! where `(ax, ay, aw, ah)` and `(tx, ty, tw, th)` are center/size of the anchor and target.

use serde::Serialize;
use thiserror::Error;

use crate::boxgeom::{BBox, GeometryError};

/// Default bound on `|dw|` and `|dh|` applied before exponentiation in [`decode_deltas`].
pub const DEFAULT_DELTA_CLAMP: f64 = 4.135_166_556_742_356; // ln(1000 / 16)

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnchorError {
    #[error("anchor config needs at least one scale and one ratio")]
    EmptyList,
    #[error("anchor scale {0} must be positive and finite")]
    BadScale(f64),
    #[error("anchor ratio {0} must be positive and finite")]
    BadRatio(f64),
    #[error("anchor stride {0} must be positive and finite")]
    BadStride(f64),
    #[error("{which} box must have positive area, got {bbox}")]
    ZeroArea { which: &'static str, bbox: BBox },
    #[error("delta components must be finite")]
    NonFiniteDelta,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Scales are geometric-mean side lengths `sqrt(w * h)` in pixels, ratios are `h / w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorConfig {
    scales: Vec<f64>,
    ratios: Vec<f64>,
    stride: f64,
}

impl AnchorConfig {
    pub fn new(scales: Vec<f64>, ratios: Vec<f64>, stride: f64) -> Result<Self, AnchorError> {
        if scales.is_empty() || ratios.is_empty() {
            return Err(AnchorError::EmptyList);
        }
        if let Some(&s) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(AnchorError::BadScale(s));
        }
        if let Some(&r) = ratios.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(AnchorError::BadRatio(r));
        }
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(AnchorError::BadStride(stride));
        }
        Ok(Self { scales, ratios, stride })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    /// Anchors per feature-map cell.
    pub fn anchors_per_cell(&self) -> usize {
        self.scales.len() * self.ratios.len()
    }

    /// Width and height of the `(scale, ratio)` anchor shape.
    fn shapes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.anchors_per_cell());
        for &s in &self.scales {
            for &r in &self.ratios {
                let root = r.sqrt();
                out.push((s / root, s * root));
            }
        }
        out
    }
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            scales: vec![32.0, 64.0, 128.0, 256.0, 512.0],
            ratios: vec![0.5, 1.0, 2.0],
            stride: 16.0,
        }
    }
}

/// Generates `feat_h * feat_w * K` anchors, row-major over cells, then scale-major,
/// then ratio within each cell. Cell `(i, j)` is centered at `((j + 0.5) * stride, (i + 0.5) * stride)`.
pub fn generate_anchors(cfg: &AnchorConfig, feat_h: usize, feat_w: usize) -> Vec<BBox> {
    let shapes = cfg.shapes();
    let mut anchors = Vec::with_capacity(feat_h * feat_w * shapes.len());
    for i in 0..feat_h {
        let cy = (i as f64 + 0.5) * cfg.stride;
        for j in 0..feat_w {
            let cx = (j as f64 + 0.5) * cfg.stride;
            for &(w, h) in &shapes {
                anchors.push(
                    BBox::from_center(cx, cy, w, h).expect("finite anchor from validated config"),
                );
            }
        }
    }
    anchors
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxDelta {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

impl BoxDelta {
    pub const ZERO: BoxDelta = BoxDelta { dx: 0.0, dy: 0.0, dw: 0.0, dh: 0.0 };

    pub fn new(dx: f64, dy: f64, dw: f64, dh: f64) -> Result<Self, AnchorError> {
        let d = Self { dx, dy, dw, dh };
        if d.is_finite() {
            Ok(d)
        } else {
            Err(AnchorError::NonFiniteDelta)
        }
    }

    fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dw.is_finite() && self.dh.is_finite()
    }
}

/// Regression target that maps `anchor` onto `target`.
pub fn encode_deltas(anchor: &BBox, target: &BBox) -> Result<BoxDelta, AnchorError> {
    if anchor.area() <= 0.0 {
        return Err(AnchorError::ZeroArea { which: "anchor", bbox: *anchor });
    }
    if target.area() <= 0.0 {
        return Err(AnchorError::ZeroArea { which: "target", bbox: *target });
    }
    let (ax, ay) = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    let (tx, ty) = target.center();
    let (tw, th) = (target.width(), target.height());
    BoxDelta::new((tx - ax) / aw, (ty - ay) / ah, (tw / aw).ln(), (th / ah).ln())
}

/// Applies `delta` to `anchor`, clamping `dw`/`dh` to [`DEFAULT_DELTA_CLAMP`].
pub fn decode_deltas(anchor: &BBox, delta: &BoxDelta) -> Result<BBox, AnchorError> {
    decode_deltas_clamped(anchor, delta, DEFAULT_DELTA_CLAMP)
}

pub fn decode_deltas_clamped(
    anchor: &BBox,
    delta: &BoxDelta,
    clamp: f64,
) -> Result<BBox, AnchorError> {
    if anchor.area() <= 0.0 {
        return Err(AnchorError::ZeroArea { which: "anchor", bbox: *anchor });
    }
    if !delta.is_finite() {
        return Err(AnchorError::NonFiniteDelta);
    }
    let (ax, ay) = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    let dw = delta.dw.clamp(-clamp, clamp);
    let dh = delta.dh.clamp(-clamp, clamp);
    let cx = ax + delta.dx * aw;
    let cy = ay + delta.dy * ah;
    let w = aw * dw.exp();
    let h = ah * dh.exp();
    Ok(BBox::from_center(cx, cy, w, h)?)
}
