use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rdd", version, about = "Evaluate and inspect road-damage detections")]
pub struct Cli {
    /// Worker threads for per-image work. Output does not depend on this.
    #[arg(long, global = true, value_parser = positive)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score detections against ground truth (F1 at an IoU threshold)
    Evaluate(EvaluateArgs),
    /// Drop same-class duplicates, keeping the larger box
    Postprocess(PostprocessArgs),
    /// Class-agnostic greedy NMS per image, then keep the top-N
    Nms(NmsArgs),
    /// Print the anchor grid for a feature map
    Anchors(AnchorArgs),
    /// Pool a region of a feature map with RoIAlign
    Roialign(RoiAlignArgs),
    /// Map boxes between image and 512×512 model coordinates
    Transform(TransformArgs),
    /// Draw ground truth (green) and predictions (red) for one image as SVG
    Render(RenderArgs),
    /// Check dataset statistics against the reference release
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Avg,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Space {
    /// image coordinates to model coordinates
    Model,
    /// model coordinates to image coordinates
    Image,
}

#[derive(Debug, Args)]
pub struct GroundTruthArgs {
    /// Directory of VOC XML files, or a CSV with header image_id,label,xmin,ymin,xmax,ymax
    #[arg(long)]
    pub gt: PathBuf,

    /// Image size assumed for CSV ground truth
    #[arg(long, value_name = "WxH", default_value = "600x600", value_parser = parse_size)]
    pub gt_size: (u32, u32),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub gt: GroundTruthArgs,

    /// Detection CSV (image_id,label,score,xmin,ymin,xmax,ymax)
    #[arg(long)]
    pub det: PathBuf,

    #[arg(long, default_value_t = 0.5, value_parser = threshold)]
    pub iou: f64,

    /// Count IoU equal to the threshold as a match
    #[arg(long)]
    pub inclusive: bool,

    /// Drop detections scoring below this before matching
    #[arg(long, value_parser = score)]
    pub min_score: Option<f64>,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    #[arg(long)]
    pub det: PathBuf,

    #[arg(long, default_value_t = 0.85, value_parser = threshold)]
    pub threshold: f64,

    /// Drop detections scoring below this before removing duplicates
    #[arg(long, value_parser = score)]
    pub min_score: Option<f64>,

    /// Write `file.jpg,LABEL x1 y1 x2 y2 ...` lines instead of detection CSV
    #[arg(long)]
    pub submission: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NmsArgs {
    #[arg(long)]
    pub det: PathBuf,

    #[arg(long, default_value_t = 0.7, value_parser = threshold)]
    pub threshold: f64,

    /// Survivors kept per image, by score
    #[arg(long, default_value_t = 2000, conflicts_with = "all")]
    pub top_n: usize,

    /// Keep every NMS survivor
    #[arg(long)]
    pub all: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnchorArgs {
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    pub scales: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub ratios: Vec<f64>,

    #[arg(long, default_value_t = 16.0)]
    pub stride: f64,

    #[arg(long, value_parser = positive)]
    pub feat_h: usize,

    #[arg(long, value_parser = positive)]
    pub feat_w: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RoiAlignArgs {
    /// Feature map: CSV text or binary .fmap
    #[arg(long)]
    pub map: PathBuf,

    #[arg(long, value_name = "X1,Y1,X2,Y2", value_parser = parse_box)]
    pub roi: [f64; 4],

    #[arg(long, default_value_t = 7, value_parser = positive)]
    pub out_h: usize,

    #[arg(long, default_value_t = 7, value_parser = positive)]
    pub out_w: usize,

    /// Sample points per bin along each axis
    #[arg(long, default_value_t = 2, value_parser = positive)]
    pub samples: usize,

    #[arg(long, value_enum, default_value_t = Mode::Avg)]
    pub mode: Mode,

    #[arg(long, default_value_t = 1.0)]
    pub spatial_scale: f64,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Target coordinate space
    #[arg(long, value_enum)]
    pub to: Space,

    /// Width of the original image
    #[arg(long)]
    pub orig_width: f64,

    /// Height of the original image
    #[arg(long)]
    pub orig_height: f64,

    /// Mirror horizontally in the input space before mapping
    #[arg(long)]
    pub hflip: bool,

    /// Box to transform; repeatable
    #[arg(long = "box", value_name = "X1,Y1,X2,Y2", value_parser = parse_box, required_unless_present = "det", conflicts_with = "det")]
    pub boxes: Vec<[f64; 4]>,

    /// Transform every row of a detection CSV instead
    #[arg(long)]
    pub det: Option<PathBuf>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub gt: GroundTruthArgs,

    #[arg(long)]
    pub det: Option<PathBuf>,

    #[arg(long)]
    pub image_id: String,

    /// Image referenced by the SVG; defaults to the annotation's filename, or `<image-id>.jpg`
    #[arg(long)]
    pub image_path: Option<String>,

    #[arg(long, value_parser = score)]
    pub min_score: Option<f64>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub gt: GroundTruthArgs,

    #[arg(long, default_value_t = 9053)]
    pub images: usize,

    #[arg(long, default_value_t = 15435)]
    pub boxes: usize,

    #[arg(long, default_value_t = 8)]
    pub classes: usize,

    #[arg(long, value_name = "WxH", default_value = "600x600", value_parser = parse_size)]
    pub resolution: (u32, u32),

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn threshold(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if t > 0.0 && t <= 1.0 {
        Ok(t)
    } else {
        Err(format!("{t} must be in (0, 1]"))
    }
}

fn score(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("{t} must be in [0, 1]"))
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err(format!("size must be positive, got {s:?}"));
    }
    Ok((w, h))
}

fn parse_box(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("expected X1,Y1,X2,Y2, got {s:?}"));
    }
    let mut out = [0.0; 4];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.trim().parse().map_err(|_| format!("{p:?} is not a number"))?;
    }
    Ok(out)
}
