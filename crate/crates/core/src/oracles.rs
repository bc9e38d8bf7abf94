//! Brute-force reference implementations used by the test suites.
//!
//! Each function restates a definition as literally as possible and shares no
//! code path with the production implementation it checks. Only compiled with
//! the `oracles` feature.

use crate::boxgeom::{Detection, GroundTruthBox};
use crate::evaluate::ImageSample;
use crate::roialign::{FeatureMap, PoolMode, RoiAlignParams};
use crate::boxgeom::BBox;

/// IoU of two integer boxes `[x0, y0, x1, y1]` by counting covered unit cells.
pub fn pixel_iou(a: [i64; 4], b: [i64; 4]) -> f64 {
    let lo_x = a[0].min(b[0]);
    let lo_y = a[1].min(b[1]);
    let hi_x = a[2].max(b[2]);
    let hi_y = a[3].max(b[3]);
    let covers = |r: [i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for y in lo_y..hi_y {
        for x in lo_x..hi_x {
            let (ia, ib) = (covers(a, x, y), covers(b, x, y));
            if ia && ib {
                inter += 1;
            }
            if ia || ib {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn overlap(a: &BBox, b: &BBox) -> f64 {
    // independent IoU: inclusion-exclusion on clamped extents
    let iw = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let ih = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let inter = iw * ih;
    let union = a.width() * a.height() + b.width() * b.height() - inter;
    if inter == 0.0 || union == 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Greedy NMS by repeated arg-max over the remaining set.
pub fn nms_reference(dets: &[Detection], iou_threshold: f64) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..dets.len()).collect();
    let mut keep = Vec::new();
    while !remaining.is_empty() {
        let mut best = remaining[0];
        for &i in &remaining {
            if dets[i].score() > dets[best].score() || (dets[i].score() == dets[best].score() && i < best) {
                best = i;
            }
        }
        keep.push(best);
        remaining.retain(|&i| i != best && overlap(dets[best].bbox(), dets[i].bbox()) <= iou_threshold);
    }
    keep
}

/// Same-class, larger-area-wins duplicate removal by repeated arg-max. Returns
/// surviving indices in ascending order.
pub fn postprocess_reference(dets: &[Detection], iou_threshold: f64) -> Vec<usize> {
    let area = |i: usize| dets[i].bbox().width() * dets[i].bbox().height();
    let mut remaining: Vec<usize> = (0..dets.len()).collect();
    let mut keep = Vec::new();
    while !remaining.is_empty() {
        let mut best = remaining[0];
        for &i in &remaining {
            let better = area(i) > area(best)
                || (area(i) == area(best) && dets[i].score() > dets[best].score())
                || (area(i) == area(best) && dets[i].score() == dets[best].score() && i < best);
            if better {
                best = i;
            }
        }
        keep.push(best);
        remaining.retain(|&i| {
            i != best
                && !(dets[i].label() == dets[best].label()
                    && overlap(dets[best].bbox(), dets[i].bbox()) > iou_threshold)
        });
    }
    keep.sort_unstable();
    keep
}

/// Literal greedy matcher: repeatedly take the best unvisited prediction, then
/// the best eligible ground-truth box. Returns `(pairs, tp, fp, fn)`.
pub fn greedy_match_reference(
    sample: &ImageSample,
    iou_threshold: f64,
) -> (Vec<(usize, usize)>, usize, usize, usize) {
    let preds = &sample.predictions;
    let gts: &[GroundTruthBox] = &sample.ground_truth;
    let mut visited = vec![false; preds.len()];
    let mut used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for _ in 0..preds.len() {
        let mut p = usize::MAX;
        for i in 0..preds.len() {
            if visited[i] {
                continue;
            }
            if p == usize::MAX || ranks_before(&preds[i], &preds[p]) {
                p = i;
            }
        }
        visited[p] = true;
        let mut g_best = usize::MAX;
        let mut iou_best = -1.0;
        for (g, gt) in gts.iter().enumerate() {
            if used[g] || gt.label != *preds[p].label() {
                continue;
            }
            let iou = overlap(preds[p].bbox(), &gt.bbox);
            if iou > iou_threshold && iou > iou_best {
                g_best = g;
                iou_best = iou;
            }
        }
        if g_best != usize::MAX {
            used[g_best] = true;
            pairs.push((p, g_best));
        }
    }
    let tp = pairs.len();
    (pairs, tp, preds.len() - tp, gts.len() - tp)
}

/// Higher score first; equal scores by box coordinates, then label. Index order
/// is implied by the strict comparison in the caller's scan.
fn ranks_before(a: &Detection, b: &Detection) -> bool {
    if a.score() != b.score() {
        return a.score() > b.score();
    }
    let (ka, kb) = (a.bbox().to_array(), b.bbox().to_array());
    for k in 0..4 {
        if ka[k] != kb[k] {
            return ka[k] < kb[k];
        }
    }
    a.label() < b.label()
}

/// Maximum number of one-to-one same-class matches over the IoU threshold, by
/// exhaustive search. Exponential; keep instances small.
pub fn optimal_match_tp(sample: &ImageSample, iou_threshold: f64) -> usize {
    let preds = &sample.predictions;
    let gts = &sample.ground_truth;
    let eligible: Vec<Vec<usize>> = preds
        .iter()
        .map(|p| {
            (0..gts.len())
                .filter(|&g| gts[g].label == *p.label() && overlap(p.bbox(), &gts[g].bbox) > iou_threshold)
                .collect()
        })
        .collect();

    fn search(p: usize, eligible: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
        if p == eligible.len() {
            return 0;
        }
        let mut best = search(p + 1, eligible, used);
        for &g in &eligible[p] {
            if !used[g] {
                used[g] = true;
                best = best.max(1 + search(p + 1, eligible, used));
                used[g] = false;
            }
        }
        best
    }
    search(0, &eligible, &mut vec![false; gts.len()])
}

/// Zero-padded grid value.
fn grid(fm: &FeatureMap, c: usize, y: i64, x: i64) -> f64 {
    if y < 0 || x < 0 || y >= fm.height() as i64 || x >= fm.width() as i64 {
        0.0
    } else {
        fm.get(c, y as usize, x as usize)
    }
}

/// RoIAlign by dense upsampling: the map is bilinearly upsampled by `factor`
/// over the RoI's extent (rows first, then columns), and each bin pools the
/// upsampled pixels sitting at its sample points.
///
/// Panics unless every sample point lies on the `1/factor` lattice.
pub fn dense_roi_align(fm: &FeatureMap, roi: &BBox, params: &RoiAlignParams, factor: usize) -> FeatureMap {
    let k = factor as f64;
    let sc = params.spatial_scale;
    let (x1, y1, x2, y2) = (roi.x_min() * sc, roi.y_min() * sc, roi.x_max() * sc, roi.y_max() * sc);
    let (bw, bh) = ((x2 - x1) / params.out_w as f64, (y2 - y1) / params.out_h as f64);
    let s = params.samples_per_axis as f64;
    let lattice = |v: f64| -> i64 {
        let t = v * k;
        let r = t.round();
        assert!((t - r).abs() < 1e-6, "sample {v} is off the 1/{factor} lattice");
        r as i64
    };
    let lo_x = (x1 * k).floor() as i64;
    let hi_x = (x2 * k).ceil() as i64;
    let lo_y = (y1 * k).floor() as i64;
    let hi_y = (y2 * k).ceil() as i64;
    let nx = (hi_x - lo_x + 1) as usize;
    let ny = (hi_y - lo_y + 1) as usize;

    let mut out = Vec::new();
    for c in 0..fm.channels() {
        // integer rows covering the extent, each upsampled along x
        let row_lo = lo_y.div_euclid(factor as i64);
        let row_hi = hi_y.div_euclid(factor as i64) + 1;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for r in row_lo..=row_hi {
            let mut line = Vec::with_capacity(nx);
            for xi in lo_x..=hi_x {
                let x0 = xi.div_euclid(factor as i64);
                let t = xi.rem_euclid(factor as i64) as f64 / k;
                line.push((1.0 - t) * grid(fm, c, r, x0) + t * grid(fm, c, r, x0 + 1));
            }
            rows.push(line);
        }
        let mut dense = vec![0.0; nx * ny];
        for (yy, yi) in (lo_y..=hi_y).enumerate() {
            let r0 = (yi.div_euclid(factor as i64) - row_lo) as usize;
            let t = yi.rem_euclid(factor as i64) as f64 / k;
            for xx in 0..nx {
                dense[yy * nx + xx] = (1.0 - t) * rows[r0][xx] + t * rows[r0 + 1][xx];
            }
        }

        for i in 0..params.out_h {
            for j in 0..params.out_w {
                let mut picked = Vec::new();
                for a in 0..params.samples_per_axis {
                    let y = y1 + bh * (i as f64 + (a as f64 + 0.5) / s);
                    for b in 0..params.samples_per_axis {
                        let x = x1 + bw * (j as f64 + (b as f64 + 0.5) / s);
                        let (gx, gy) = (lattice(x), lattice(y));
                        picked.push(dense[(gy - lo_y) as usize * nx + (gx - lo_x) as usize]);
                    }
                }
                out.push(match params.pool_mode {
                    PoolMode::Max => picked.iter().cloned().fold(f64::MIN, f64::max),
                    PoolMode::Average => picked.iter().sum::<f64>() / picked.len() as f64,
                });
            }
        }
    }
    FeatureMap::new(fm.channels(), params.out_h, params.out_w, out).expect("oracle output shape")
}
