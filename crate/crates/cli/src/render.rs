use std::fmt::Write as _;

use rdd_core::ingest::ImageEntry;
use rdd_core::{BBox, Detection};

use crate::args::RenderArgs;
use crate::error::CliError;
use crate::io::{emit, load_ground_truth, require};

pub const GT_COLOR: &str = "green";
pub const PRED_COLOR: &str = "red";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn rect(out: &mut String, b: &BBox, color: &str, caption: &str) {
    let _ = writeln!(
        out,
        r#"  <rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
        b.x_min(),
        b.y_min(),
        b.width(),
        b.height()
    );
    // caption sits above the box, or just inside it at the top edge
    let ty = if b.y_min() >= 12.0 { b.y_min() - 2.0 } else { b.y_min() + 12.0 };
    let _ = writeln!(
        out,
        r#"  <text x="{}" y="{ty}" fill="{color}" font-family="sans-serif" font-size="12">{}</text>"#,
        b.x_min(),
        escape(caption)
    );
}

/// Overlay for one image: the image by reference, ground truth in green,
/// predictions in red, all in the image's own pixel coordinates.
pub fn svg(image: &ImageEntry, href: &str, predictions: &[Detection]) -> String {
    let (w, h) = (image.width, image.height);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let href = escape(href);
    let _ = writeln!(out, r#"  <image href="{href}" xlink:href="{href}" x="0" y="0" width="{w}" height="{h}"/>"#);
    for gt in &image.annotations {
        rect(&mut out, &gt.bbox, GT_COLOR, gt.label.as_str());
    }
    for d in predictions {
        rect(&mut out, d.bbox(), PRED_COLOR, &format!("{} {:.2}", d.label(), d.score()));
    }
    out.push_str("</svg>\n");
    out
}

pub fn render(args: RenderArgs) -> Result<(), CliError> {
    if let Some(det) = &args.det {
        require(det)?;
    }
    let manifest = load_ground_truth(&args.gt)?;
    let image = manifest
        .image(&args.image_id)
        .ok_or_else(|| CliError::Input(format!("image id {:?} not found in the ground truth", args.image_id)))?;
    let mut predictions = match &args.det {
        Some(det) => rdd_core::ingest::load_detections(det)?.remove(&args.image_id).unwrap_or_default(),
        None => Vec::new(),
    };
    if let Some(min) = args.min_score {
        predictions.retain(|d| d.score() >= min);
    }
    let href = args
        .image_path
        .clone()
        .or_else(|| image.filename.clone())
        .unwrap_or_else(|| format!("{}.jpg", args.image_id));
    emit(args.out.as_deref(), svg(image, &href, &predictions).as_bytes())
}
