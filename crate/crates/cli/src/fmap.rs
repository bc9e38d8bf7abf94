//! Feature-map files.
//!
//! Text form: a `channels,height,width` line, then `channels × height` rows of
//! `width` comma-separated values (channel-major). Binary form: the bytes
//! `FMAP`, three little-endian `u32` (channels, height, width), then the values
//! as little-endian `f64` in the same order.

use std::fmt::Write as _;

use rdd_core::roialign::FeatureMap;

const MAGIC: &[u8; 4] = b"FMAP";

pub fn parse(bytes: &[u8]) -> Result<FeatureMap, String> {
    if bytes.starts_with(MAGIC) {
        parse_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| "not UTF-8 text and no FMAP header".to_string())?;
        parse_text(text)
    }
}

fn parse_binary(bytes: &[u8]) -> Result<FeatureMap, String> {
    if bytes.len() < 16 {
        return Err("truncated FMAP header".into());
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let n = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| "FMAP dimensions overflow".to_string())?;
    let body = &bytes[16..];
    if body.len() != n * 8 {
        return Err(format!("FMAP {c}×{h}×{w} needs {} value bytes, found {}", n * 8, body.len()));
    }
    let values = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    FeatureMap::new(c, h, w, values).map_err(|e| e.to_string())
}

fn parse_text(text: &str) -> Result<FeatureMap, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty feature map file")?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|v| v.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("line 1: expected channels,height,width, got {header:?}"))?;
    let [c, h, w] = dims[..] else {
        return Err(format!("line 1: expected channels,height,width, got {header:?}"));
    };
    let mut values = Vec::with_capacity(c * h * w);
    let mut rows = 0;
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("line {}: bad number", i + 1))?;
        if row.len() != w {
            return Err(format!("line {}: expected {w} values, found {}", i + 1, row.len()));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != c * h {
        return Err(format!("expected {} rows for {c}×{h}×{w}, found {rows}", c * h));
    }
    FeatureMap::new(c, h, w, values).map_err(|e| e.to_string())
}

pub fn to_text(fm: &FeatureMap) -> String {
    let mut out = format!("{},{},{}\n", fm.channels(), fm.height(), fm.width());
    for c in 0..fm.channels() {
        for y in 0..fm.height() {
            let row: Vec<String> = fm.row(c, y).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
    }
    out
}

#[cfg(test)]
pub fn to_binary(fm: &FeatureMap) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for d in [fm.channels(), fm.height(), fm.width()] {
        out.extend((d as u32).to_le_bytes());
    }
    for v in fm.values() {
        out.extend(v.to_le_bytes());
    }
    out
}
