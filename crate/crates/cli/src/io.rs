use std::io::Write;
use std::path::Path;

use rdd_core::ingest::{load_ground_truth_csv, load_voc_dir, DatasetManifest, IngestError};
use tempfile::NamedTempFile;

use crate::args::GroundTruthArgs;
use crate::error::CliError;

/// Fails early if an input path is missing, before any work starts.
pub fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{}: no such file or directory", path.display())))
    }
}

/// Writes to `out` through a temporary file in the same directory, so a failed
/// run never leaves a partial file behind. Without `out`, writes to stdout.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let Some(path) = out else {
        let mut stdout = std::io::stdout().lock();
        return stdout
            .write_all(bytes)
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::Input(format!("stdout: {e}")));
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Loads ground truth from a VOC directory or a CSV file. Warnings go to stderr.
pub fn load_ground_truth(args: &GroundTruthArgs) -> Result<DatasetManifest, CliError> {
    require(&args.gt)?;
    let (manifest, warnings) = if args.gt.is_dir() {
        load_voc_dir(&args.gt)?
    } else {
        let boxes = load_ground_truth_csv(&args.gt)?;
        let (w, h) = args.gt_size;
        let mut warnings = Vec::new();
        for (id, anns) in &boxes {
            for a in anns {
                let b = a.bbox;
                if b.x_min() < 0.0 || b.y_min() < 0.0 || b.x_max() > w as f64 || b.y_max() > h as f64 {
                    warnings.push(format!("{id}: clipped {b} to {w}×{h}"));
                }
            }
        }
        let m = DatasetManifest::from_ground_truth(boxes, w, h)
            .map_err(|e| IngestError::InFile { path: args.gt.clone(), source: Box::new(e) })?;
        (m, warnings)
    };
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(manifest)
}
