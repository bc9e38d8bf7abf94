use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::IngestError;
use crate::boxgeom::{BBox, ClassLabel, GroundTruthBox};

/// One VOC-style annotation file.
///
/// Integer coordinates are read as box boundaries, so a box touching the right
/// edge of a 600-wide image has `xmax = 600`.
#[derive(Debug, Clone, PartialEq)]
pub struct VocAnnotation {
    pub filename: Option<String>,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<GroundTruthBox>,
}

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|n| n.is_element() && n.has_tag_name(name))
}

fn text_of(node: Node<'_, '_>, name: &str, object: Option<usize>) -> Result<String, IngestError> {
    child(node, name)
        .map(|n| n.text().unwrap_or("").trim().to_owned())
        .ok_or_else(|| IngestError::MissingElement { element: name.to_owned(), object })
}

fn number<T: std::str::FromStr>(
    node: Node<'_, '_>,
    name: &str,
    object: Option<usize>,
) -> Result<T, IngestError> {
    let raw = text_of(node, name, object)?;
    raw.parse().map_err(|_| IngestError::BadNumber { element: name.to_owned(), value: raw, object })
}

/// Parses one annotation. Boxes reaching past the image are clipped to it and
/// reported in the returned warning list.
pub fn parse_voc_annotation(xml: &str) -> Result<(VocAnnotation, Vec<String>), IngestError> {
    let doc = Document::parse(xml).map_err(|e| IngestError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("annotation") {
        return Err(IngestError::MissingElement { element: "annotation".into(), object: None });
    }
    let filename = child(root, "filename")
        .and_then(|n| n.text())
        .map(|t| t.trim().to_owned())
        .filter(|t| !t.is_empty());
    let size = child(root, "size")
        .ok_or_else(|| IngestError::MissingElement { element: "size".into(), object: None })?;
    let width: u32 = number(size, "width", None)?;
    let height: u32 = number(size, "height", None)?;
    if width == 0 || height == 0 {
        return Err(IngestError::BadImageSize { width, height });
    }

    let mut objects = Vec::new();
    let mut warnings = Vec::new();
    let object_nodes = root.children().filter(|n| n.is_element() && n.has_tag_name("object"));
    for (idx, obj) in object_nodes.enumerate() {
        let at = Some(idx);
        let name = text_of(obj, "name", at)?;
        let label = ClassLabel::new(name).map_err(|e| IngestError::BadObject { object: idx, source: e })?;
        let bndbox = child(obj, "bndbox")
            .ok_or_else(|| IngestError::MissingElement { element: "bndbox".into(), object: at })?;
        let xmin: f64 = number(bndbox, "xmin", at)?;
        let ymin: f64 = number(bndbox, "ymin", at)?;
        let xmax: f64 = number(bndbox, "xmax", at)?;
        let ymax: f64 = number(bndbox, "ymax", at)?;
        if xmin > xmax {
            return Err(IngestError::InvertedBox { object: idx, axis: 'x', min: xmin, max: xmax });
        }
        if ymin > ymax {
            return Err(IngestError::InvertedBox { object: idx, axis: 'y', min: ymin, max: ymax });
        }
        let raw = BBox::new(xmin, ymin, xmax, ymax)
            .map_err(|e| IngestError::BadObject { object: idx, source: e })?;
        let clipped = raw.clip(width as f64, height as f64);
        if clipped != raw {
            warnings.push(format!(
                "object {idx} ({}): box {raw} clipped to {clipped} for {width}×{height} image",
                label
            ));
            if clipped.area() == 0.0 {
                warnings.push(format!("object {idx} ({label}): zero area after clipping"));
            }
        }
        objects.push(GroundTruthBox::new(clipped, label));
    }

    Ok((VocAnnotation { filename, width, height, objects }, warnings))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Serializes an annotation in the layout [`parse_voc_annotation`] reads.
pub fn write_voc_annotation(ann: &VocAnnotation) -> String {
    let mut out = String::from("<annotation>\n");
    if let Some(f) = &ann.filename {
        let _ = writeln!(out, "  <filename>{}</filename>", escape(f));
    }
    let _ = writeln!(
        out,
        "  <size>\n    <width>{}</width>\n    <height>{}</height>\n    <depth>3</depth>\n  </size>",
        ann.width, ann.height
    );
    for obj in &ann.objects {
        let b = &obj.bbox;
        let _ = writeln!(
            out,
            "  <object>\n    <name>{}</name>\n    <bndbox>\n      <xmin>{}</xmin>\n      <ymin>{}</ymin>\n      <xmax>{}</xmax>\n      <ymax>{}</ymax>\n    </bndbox>\n  </object>",
            escape(obj.label.as_str()),
            b.x_min(),
            b.y_min(),
            b.x_max(),
            b.y_max()
        );
    }
    out.push_str("</annotation>\n");
    out
}
