//! Quantization-free RoI pooling.
//!
//! Feature values live at integer coordinates: `value(c, y, x)` is the surface
//! height at the continuous point `(x, y)`. Between grid points the surface is
//! bilinear; outside the grid it is zero-padded, so a sample whose neighbours
//! fall off the map picks up zeros for those neighbours.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxgeom::BBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoiAlignError {
    #[error("feature map dimensions must be at least 1, got {channels}×{height}×{width}")]
    EmptyShape { channels: usize, height: usize, width: usize },
    #[error("feature map expects {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("feature map value at flat index {0} is not finite")]
    NonFinite(usize),
    #[error("channel {channel} out of range for a {channels}-channel map")]
    BadChannel { channel: usize, channels: usize },
    #[error("output size and samples per axis must be at least 1")]
    BadOutputSize,
    #[error("spatial scale {0} must be positive and finite")]
    BadSpatialScale(f64),
    #[error("region of interest {0} has no area after spatial scaling")]
    DegenerateRoi(BBox),
}

/// Dense `channels × height × width` grid, channel-major then row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f64>,
    ) -> Result<Self, RoiAlignError> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(RoiAlignError::EmptyShape { channels, height, width });
        }
        let expected = channels * height * width;
        if values.len() != expected {
            return Err(RoiAlignError::LengthMismatch { expected, actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RoiAlignError::NonFinite(i));
        }
        Ok(Self { channels, height, width, values })
    }

    /// Builds a map by evaluating `f(channel, y, x)` at every grid point.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, RoiAlignError> {
        let mut values = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    values.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.values[(channel * self.height + y) * self.width + x]
    }

    /// Row `y` of `channel`.
    pub fn row(&self, channel: usize, y: usize) -> &[f64] {
        let start = (channel * self.height + y) * self.width;
        &self.values[start..start + self.width]
    }

    /// Grid value with zero padding outside the map.
    #[inline]
    fn padded(&self, channel: usize, y: i64, x: i64) -> f64 {
        if y < 0 || x < 0 || y >= self.height as i64 || x >= self.width as i64 {
            0.0
        } else {
            self.get(channel, y as usize, x as usize)
        }
    }

    /// Bilinear interpolation at the continuous point `(x, y)`.
    pub fn bilinear_sample(&self, channel: usize, x: f64, y: f64) -> Result<f64, RoiAlignError> {
        if channel >= self.channels {
            return Err(RoiAlignError::BadChannel { channel, channels: self.channels });
        }
        Ok(self.sample_unchecked(channel, x, y))
    }

    fn sample_unchecked(&self, channel: usize, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = x - x0;
        let ty = y - y0;
        let (xi, yi) = (x0 as i64, y0 as i64);
        let v00 = self.padded(channel, yi, xi);
        let v01 = self.padded(channel, yi, xi + 1);
        let v10 = self.padded(channel, yi + 1, xi);
        let v11 = self.padded(channel, yi + 1, xi + 1);
        let top = lerp(v00, v01, tx);
        let bottom = lerp(v10, v11, tx);
        lerp(top, bottom, ty)
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

pub fn bilinear_sample(fm: &FeatureMap, channel: usize, x: f64, y: f64) -> Result<f64, RoiAlignError> {
    fm.bilinear_sample(channel, x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Max,
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoiAlignParams {
    pub out_h: usize,
    pub out_w: usize,
    /// Sample points per bin along each axis; 2 gives four points per bin.
    pub samples_per_axis: usize,
    pub pool_mode: PoolMode,
    /// Multiplier mapping image coordinates onto feature-map coordinates.
    pub spatial_scale: f64,
}

impl RoiAlignParams {
    pub fn new(out_h: usize, out_w: usize, pool_mode: PoolMode) -> Self {
        Self { out_h, out_w, samples_per_axis: 2, pool_mode, spatial_scale: 1.0 }
    }

    pub fn with_samples(mut self, samples_per_axis: usize) -> Self {
        self.samples_per_axis = samples_per_axis;
        self
    }

    pub fn with_spatial_scale(mut self, spatial_scale: f64) -> Self {
        self.spatial_scale = spatial_scale;
        self
    }

    fn validate(&self) -> Result<(), RoiAlignError> {
        if self.out_h == 0 || self.out_w == 0 || self.samples_per_axis == 0 {
            return Err(RoiAlignError::BadOutputSize);
        }
        if !(self.spatial_scale > 0.0 && self.spatial_scale.is_finite()) {
            return Err(RoiAlignError::BadSpatialScale(self.spatial_scale));
        }
        Ok(())
    }
}

/// Pools `roi` into a `channels × out_h × out_w` map.
///
/// The scaled RoI is split into equal bins; bin `(i, j)` is sampled at the
/// `s × s` sub-bin centres, i.e. at fractions `((a + 0.5) / s, (b + 0.5) / s)`
/// of the bin, and the samples are reduced with the pool mode.
pub fn roi_align(
    fm: &FeatureMap,
    roi: &BBox,
    params: &RoiAlignParams,
) -> Result<FeatureMap, RoiAlignError> {
    params.validate()?;
    let scale = params.spatial_scale;
    let (x1, y1) = (roi.x_min() * scale, roi.y_min() * scale);
    let (x2, y2) = (roi.x_max() * scale, roi.y_max() * scale);
    if !(x2 - x1 > 0.0 && y2 - y1 > 0.0) {
        return Err(RoiAlignError::DegenerateRoi(*roi));
    }
    let bin_w = (x2 - x1) / params.out_w as f64;
    let bin_h = (y2 - y1) / params.out_h as f64;
    let s = params.samples_per_axis;
    let offsets: Vec<f64> = (0..s).map(|a| (a as f64 + 0.5) / s as f64).collect();

    let mut out = Vec::with_capacity(fm.channels * params.out_h * params.out_w);
    let mut samples = Vec::with_capacity(s * s);
    for c in 0..fm.channels {
        for i in 0..params.out_h {
            for j in 0..params.out_w {
                samples.clear();
                for &fy in &offsets {
                    let y = y1 + (i as f64 + fy) * bin_h;
                    for &fx in &offsets {
                        let x = x1 + (j as f64 + fx) * bin_w;
                        samples.push(fm.sample_unchecked(c, x, y));
                    }
                }
                out.push(pool(&samples, params.pool_mode));
            }
        }
    }
    FeatureMap::new(fm.channels, params.out_h, params.out_w, out)
}

fn pool(samples: &[f64], mode: PoolMode) -> f64 {
    match mode {
        PoolMode::Max => samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        PoolMode::Average => {
            // offsets from the first sample keep constant inputs exact
            let base = samples[0];
            let spread: f64 = samples.iter().map(|v| v - base).sum();
            base + spread / samples.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_and_midpoint() {
        let fm = FeatureMap::new(1, 2, 2, vec![0., 1., 2., 3.]).unwrap();
        assert_eq!(fm.bilinear_sample(0, 0., 0.).unwrap(), 0.0);
        assert_eq!(fm.bilinear_sample(0, 1., 0.).unwrap(), 1.0);
        assert_eq!(fm.bilinear_sample(0, 0., 1.).unwrap(), 2.0);
        assert_eq!(fm.bilinear_sample(0, 1., 1.).unwrap(), 3.0);
        assert_eq!(fm.bilinear_sample(0, 0.5, 0.5).unwrap(), 1.5);
    }

    #[test]
    fn zero_padding_outside() {
        let fm = FeatureMap::new(1, 1, 1, vec![4.0]).unwrap();
        assert_eq!(fm.bilinear_sample(0, -0.5, 0.).unwrap(), 2.0);
        assert_eq!(fm.bilinear_sample(0, 0.5, 0.5).unwrap(), 1.0);
        assert_eq!(fm.bilinear_sample(0, 5.0, 5.0).unwrap(), 0.0);
        assert_eq!(fm.bilinear_sample(0, -3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bad_channel() {
        let fm = FeatureMap::new(2, 1, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(fm.bilinear_sample(1, 0., 0.).unwrap(), 2.0);
        assert!(matches!(fm.bilinear_sample(2, 0., 0.), Err(RoiAlignError::BadChannel { .. })));
    }

    #[test]
    fn map_validation() {
        assert!(matches!(FeatureMap::new(0, 1, 1, vec![]), Err(RoiAlignError::EmptyShape { .. })));
        assert!(matches!(FeatureMap::new(1, 2, 2, vec![0.; 3]), Err(RoiAlignError::LengthMismatch { .. })));
        assert_eq!(FeatureMap::new(1, 1, 2, vec![0., f64::NAN]), Err(RoiAlignError::NonFinite(1)));
    }

    #[test]
    fn constant_map_is_exact() {
        let c = 0.1;
        let fm = FeatureMap::from_fn(2, 8, 8, |_, _, _| c).unwrap();
        let roi = BBox::new(0.3, 1.7, 6.9, 5.2).unwrap();
        for mode in [PoolMode::Average, PoolMode::Max] {
            for s in 1..=4 {
                let out = roi_align(&fm, &roi, &RoiAlignParams::new(3, 5, mode).with_samples(s)).unwrap();
                assert_eq!((out.channels(), out.height(), out.width()), (2, 3, 5));
                assert!(out.values().iter().all(|&v| v == c));
            }
        }
    }

    #[test]
    fn ramp_average_is_sample_centroid() {
        let fm = FeatureMap::from_fn(1, 10, 10, |_, _, x| x as f64).unwrap();
        let roi = BBox::new(1.0, 2.0, 7.0, 8.0).unwrap();
        let out = roi_align(&fm, &roi, &RoiAlignParams::new(2, 3, PoolMode::Average)).unwrap();
        // bins are 2 wide along x; centroid of the samples is the bin centre
        for i in 0..2 {
            for (j, want) in [2.0, 4.0, 6.0].iter().enumerate() {
                assert!((out.get(0, i, j) - want).abs() < 1e-12);
            }
        }
        let out = roi_align(&fm, &roi, &RoiAlignParams::new(1, 1, PoolMode::Max)).unwrap();
        assert!((out.get(0, 0, 0) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn spatial_scale_maps_roi() {
        let fm = FeatureMap::from_fn(1, 8, 8, |_, y, x| (x + 8 * y) as f64).unwrap();
        let p = RoiAlignParams::new(2, 2, PoolMode::Average);
        let direct = roi_align(&fm, &BBox::new(1.0, 1.0, 5.0, 5.0).unwrap(), &p).unwrap();
        let scaled = roi_align(
            &fm,
            &BBox::new(16.0, 16.0, 80.0, 80.0).unwrap(),
            &p.clone().with_spatial_scale(1.0 / 16.0),
        )
        .unwrap();
        assert_eq!(direct, scaled);
    }

    #[test]
    fn rejects_degenerate_roi_and_params() {
        let fm = FeatureMap::from_fn(1, 4, 4, |_, _, _| 1.0).unwrap();
        let flat = BBox::new(1.0, 1.0, 1.0, 3.0).unwrap();
        let p = RoiAlignParams::new(2, 2, PoolMode::Max);
        assert!(matches!(roi_align(&fm, &flat, &p), Err(RoiAlignError::DegenerateRoi(_))));
        let roi = BBox::new(0., 0., 2., 2.).unwrap();
        assert!(roi_align(&fm, &roi, &RoiAlignParams::new(0, 2, PoolMode::Max)).is_err());
        assert!(roi_align(&fm, &roi, &p.clone().with_samples(0)).is_err());
        assert!(roi_align(&fm, &roi, &p.with_spatial_scale(0.0)).is_err());
    }
}
