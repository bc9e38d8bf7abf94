#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rdd_core::ingest::{write_voc_annotation, VocAnnotation};
use rdd_core::{BBox, ClassLabel, GroundTruthBox};

pub fn rdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdd")).args(args).output().expect("spawn rdd")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

pub fn gt_box(label: &str, b: [f64; 4]) -> GroundTruthBox {
    GroundTruthBox::new(BBox::new(b[0], b[1], b[2], b[3]).unwrap(), ClassLabel::new(label).unwrap())
}

pub fn write_voc(dir: &Path, image_id: &str, width: u32, height: u32, objects: Vec<GroundTruthBox>) {
    let ann = VocAnnotation { filename: Some(format!("{image_id}.jpg")), width, height, objects };
    fs::write(dir.join(format!("{image_id}.xml")), write_voc_annotation(&ann)).unwrap();
}

pub fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(o)))
}
