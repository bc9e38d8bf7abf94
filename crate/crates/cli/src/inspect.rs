use std::fmt::Write as _;

use rdd_core::anchors::{generate_anchors, AnchorConfig};
use rdd_core::ingest::{to_image_space, to_model_space, DetectionFile, MODEL_INPUT_SIZE};
use rdd_core::roialign::{roi_align, PoolMode, RoiAlignParams};
use rdd_core::BBox;

use crate::args::{AnchorArgs, Mode, RoiAlignArgs, Space, TransformArgs};
use crate::error::CliError;
use crate::fmap;
use crate::io::{emit, require};

pub const ANCHOR_HEADER: &str = "index,cell_y,cell_x,scale,ratio,xmin,ymin,xmax,ymax";

pub fn anchors(args: AnchorArgs) -> Result<(), CliError> {
    let cfg = AnchorConfig::new(args.scales, args.ratios, args.stride).map_err(|e| CliError::Usage(e.to_string()))?;
    let boxes = generate_anchors(&cfg, args.feat_h, args.feat_w);
    let k = cfg.anchors_per_cell();
    let nr = cfg.ratios().len();
    let mut out = String::with_capacity(64 * (boxes.len() + 1));
    out.push_str(ANCHOR_HEADER);
    out.push('\n');
    for (idx, b) in boxes.iter().enumerate() {
        let cell = idx / k;
        let (si, ri) = ((idx % k) / nr, idx % nr);
        let _ = writeln!(
            out,
            "{idx},{},{},{},{},{},{},{},{}",
            cell / args.feat_w,
            cell % args.feat_w,
            cfg.scales()[si],
            cfg.ratios()[ri],
            b.x_min(),
            b.y_min(),
            b.x_max(),
            b.y_max()
        );
    }
    emit(args.out.as_deref(), out.as_bytes())
}

fn to_box(r: [f64; 4]) -> Result<BBox, CliError> {
    BBox::new(r[0], r[1], r[2], r[3]).map_err(|e| CliError::Input(format!("box {r:?}: {e}")))
}

pub fn roialign(args: RoiAlignArgs) -> Result<(), CliError> {
    require(&args.map)?;
    let bytes =
        std::fs::read(&args.map).map_err(|e| CliError::Input(format!("{}: {e}", args.map.display())))?;
    let fm = fmap::parse(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", args.map.display())))?;
    let mode = match args.mode {
        Mode::Avg => PoolMode::Average,
        Mode::Max => PoolMode::Max,
    };
    let params = RoiAlignParams::new(args.out_h, args.out_w, mode)
        .with_samples(args.samples)
        .with_spatial_scale(args.spatial_scale);
    let pooled = roi_align(&fm, &to_box(args.roi)?, &params).map_err(|e| CliError::Input(e.to_string()))?;
    emit(args.out.as_deref(), fmap::to_text(&pooled).as_bytes())
}

pub fn transform(args: TransformArgs) -> Result<(), CliError> {
    let (ow, oh) = (args.orig_width, args.orig_height);
    let input_width = match args.to {
        Space::Model => ow,
        Space::Image => MODEL_INPUT_SIZE,
    };
    let map = |b: &BBox| -> Result<BBox, CliError> {
        let b = if args.hflip { b.hflip(input_width) } else { Ok(*b) };
        b.and_then(|b| match args.to {
            Space::Model => to_model_space(&b, ow, oh),
            Space::Image => to_image_space(&b, ow, oh),
        })
        .map_err(|e| CliError::Input(e.to_string()))
    };

    let text = if let Some(det) = &args.det {
        require(det)?;
        let mut file = DetectionFile::read(det)?;
        for row in &mut file.rows {
            row.detection = row.detection.with_bbox(map(row.detection.bbox())?);
        }
        file.to_csv()
    } else {
        let mut out = String::new();
        for r in &args.boxes {
            let b = map(&to_box(*r)?)?;
            let _ = writeln!(out, "{},{},{},{}", b.x_min(), b.y_min(), b.x_max(), b.y_max());
        }
        out
    };
    emit(args.out.as_deref(), text.as_bytes())
}
