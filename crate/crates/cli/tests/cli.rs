mod common;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use common::*;
use rand::{rngs::StdRng, Rng, SeedableRng};
use rdd_core::ingest::{DetectionFile, DETECTION_HEADER, GROUND_TRUTH_HEADER};
use rdd_core::oracles::postprocess_reference;

const TWO_IMAGES_GT: &str = "image_id,label,xmin,ymin,xmax,ymax\nimg1,A,0,0,10,10\nimg2,A,50,50,80,80\n";
const TWO_IMAGES_DET: &str =
    "image_id,label,score,xmin,ymin,xmax,ymax\nimg1,A,0.9,0,0,10,10\nimg1,A,0.8,1,1,11,11\n";

#[test]
fn evaluate_two_image_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.csv", TWO_IMAGES_GT);
    let det = write(dir.path(), "det.csv", TWO_IMAGES_DET);
    let out = rdd(&["evaluate", "--gt", path_str(&gt), "--det", path_str(&det)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("pooled f1: 0.500000"), "{text}");
    assert!(text.contains("macro f1 (mean over images): 0.333333"), "{text}");

    let out = rdd(&["evaluate", "--gt", path_str(&gt), "--det", path_str(&det), "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["pooled"]["f1"], 0.5);
    assert_eq!(v["pooled"]["tp"], 1);
    assert_eq!(v["pooled"]["fp"], 1);
    assert_eq!(v["pooled"]["fn"], 1);
    assert!((v["macro_f1"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["per_image"][1]["image_id"], "img2");
    assert_eq!(v["criterion"], "strict");
}

#[test]
fn evaluate_perfect_and_empty_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.csv", TWO_IMAGES_GT);
    let copy: String = TWO_IMAGES_GT
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{},{},1.0,{}\n", f[0], f[1], f[2..].join(","))
        })
        .collect();
    let det = write(dir.path(), "det.csv", &format!("{DETECTION_HEADER}\n{copy}"));
    let v = json(&rdd(&["evaluate", "--gt", path_str(&gt), "--det", path_str(&det), "--format", "json"]));
    assert_eq!(v["pooled"]["f1"], 1.0);
    assert_eq!(v["macro_f1"], 1.0);

    let empty = write(dir.path(), "empty.csv", &format!("{DETECTION_HEADER}\n"));
    let out = rdd(&["evaluate", "--gt", path_str(&gt), "--det", path_str(&empty), "--format", "json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["pooled"]["f1"], 0.0);
}

#[test]
fn evaluate_reads_voc_directories() {
    let dir = tempfile::tempdir().unwrap();
    let voc = dir.path().join("ann");
    fs::create_dir(&voc).unwrap();
    write_voc(&voc, "img1", 600, 600, vec![gt_box("A", [0.0, 0.0, 10.0, 10.0])]);
    write_voc(&voc, "img2", 600, 600, vec![gt_box("A", [50.0, 50.0, 80.0, 80.0])]);
    let det = write(dir.path(), "det.csv", TWO_IMAGES_DET);
    let v = json(&rdd(&["evaluate", "--gt", path_str(&voc), "--det", path_str(&det), "--format", "json"]));
    assert_eq!(v["pooled"]["f1"], 0.5);
}

#[test]
fn evaluate_inclusive_threshold_and_score_filter() {
    let dir = tempfile::tempdir().unwrap();
    // IoU of these two boxes is exactly 0.5
    let gt = write(dir.path(), "gt.csv", &format!("{GROUND_TRUTH_HEADER}\na,A,0,0,10,10\n"));
    let det = write(dir.path(), "det.csv", &format!("{DETECTION_HEADER}\na,A,0.3,0,0,20,10\n"));
    let run = |extra: &[&str]| {
        let mut args = vec!["evaluate", "--gt", path_str(&gt), "--det", path_str(&det), "--format", "json"];
        args.extend_from_slice(extra);
        json(&rdd(&args))["pooled"]["tp"].as_u64().unwrap()
    };
    assert_eq!(run(&[]), 0);
    assert_eq!(run(&["--inclusive"]), 1);
    assert_eq!(run(&["--inclusive", "--min-score", "0.5"]), 0);
}

#[test]
fn evaluate_rejects_unknown_images_and_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.csv", TWO_IMAGES_GT);
    let det = write(dir.path(), "det.csv", &format!("{DETECTION_HEADER}\nimg9,A,0.5,0,0,1,1\n"));
    let out = rdd(&["evaluate", "--gt", path_str(&gt), "--det", path_str(&det)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("img9"));

    let bad = write(dir.path(), "bad.csv", &format!("{DETECTION_HEADER}\nimg1,A,0.5,5,0,1,1\nimg1,A,x,0,0,1,1\n"));
    let out = rdd(&["evaluate", "--gt", path_str(&gt), "--det", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("2 invalid row") && err.contains("line 2"), "{err}");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&rdd(&["--help"])), 0);
    assert_eq!(code(&rdd(&["--version"])), 0);
    assert_eq!(code(&rdd(&["evaluate"])), 1);
    assert_eq!(code(&rdd(&["frobnicate"])), 1);
    assert_eq!(code(&rdd(&["nms", "--det", "x.csv", "--threshold", "1.5"])), 1);
    assert_eq!(code(&rdd(&["nms", "--det", "x.csv", "--top-n", "5", "--all"])), 1);
    assert_eq!(code(&rdd(&["nms", "--det", "/nonexistent/x.csv"])), 2);
    assert_eq!(code(&rdd(&["transform", "--to", "model", "--orig-width", "600", "--orig-height", "600"])), 1);
}

#[test]
fn failed_runs_leave_outputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let det = write(dir.path(), "det.csv", &format!("{DETECTION_HEADER}\nimg1,A,2.0,0,0,1,1\n"));
    let out = dir.path().join("out.csv");
    let r = rdd(&["postprocess", "--det", path_str(&det), "--out", path_str(&out)]);
    assert_eq!(code(&r), 2);
    assert!(!out.exists());

    fs::write(&out, "previous").unwrap();
    let r = rdd(&["postprocess", "--det", path_str(&det), "--out", path_str(&out)]);
    assert_eq!(code(&r), 2);
    assert_eq!(fs::read_to_string(&out).unwrap(), "previous");
    let leftovers = fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 2);
}

#[test]
fn postprocess_removes_same_class_duplicate() {
    let dir = tempfile::tempdir().unwrap();
    let det = write(
        dir.path(),
        "det.csv",
        &format!("{DETECTION_HEADER}\na,D00,0.6,0,0,100,100\na,D00,0.9,2,2,100,100\na,D10,0.9,2,2,100,100\n"),
    );
    let out = rdd(&["postprocess", "--det", path_str(&det)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), format!("{DETECTION_HEADER}\na,D00,0.6,0,0,100,100\na,D10,0.9,2,2,100,100\n"));

    let sub = rdd(&["postprocess", "--det", path_str(&det), "--submission"]);
    assert_eq!(stdout(&sub), "a.jpg,D00 0 0 100 100 D10 2 2 100 100\n");
}

#[test]
fn postprocess_without_overlaps_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{DETECTION_HEADER}\na,D00,0.5,0,0,10,10\na,D00,0.7,20,0,30,10\nb,D00,0.25,0,0,10,10\n");
    let det = write(dir.path(), "det.csv", &text);
    let out = dir.path().join("out.csv");
    let r = rdd(&["postprocess", "--det", path_str(&det), "--out", path_str(&out)]);
    assert_eq!(code(&r), 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), text);
}

fn random_detection_csv(rng: &mut StdRng, rows: usize, images: usize) -> String {
    let mut s = format!("{DETECTION_HEADER}\n");
    for _ in 0..rows {
        let (x, y) = (rng.gen_range(0..80) as f64, rng.gen_range(0..80) as f64);
        let (w, h) = (rng.gen_range(5..40) as f64, rng.gen_range(5..40) as f64);
        let _ = writeln!(
            s,
            "img{},D{},{},{x},{y},{},{}",
            rng.gen_range(0..images),
            rng.gen_range(0..2),
            rng.gen_range(0..100) as f64 / 100.0,
            x + w,
            y + h
        );
    }
    s
}

#[test]
fn postprocess_matches_library_oracle_on_random_file() {
    let mut rng = StdRng::seed_from_u64(51);
    let dir = tempfile::tempdir().unwrap();
    let text = random_detection_csv(&mut rng, 1000, 20);
    let det = write(dir.path(), "det.csv", &text);
    let out = rdd(&["postprocess", "--det", path_str(&det)]);
    assert_eq!(code(&out), 0);

    let file = DetectionFile::parse_str(&text).unwrap();
    let mut by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in file.rows.iter().enumerate() {
        by_image.entry(&r.image_id).or_default().push(i);
    }
    let mut keep = Vec::new();
    for idx in by_image.values() {
        let dets: Vec<_> = idx.iter().map(|&i| file.rows[i].detection.clone()).collect();
        keep.extend(postprocess_reference(&dets, 0.85).into_iter().map(|k| idx[k]));
    }
    keep.sort_unstable();
    let expected = DetectionFile { rows: keep.into_iter().map(|i| file.rows[i].clone()).collect() };
    assert_eq!(stdout(&out), expected.to_csv());
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let mut rng = StdRng::seed_from_u64(52);
    let dir = tempfile::tempdir().unwrap();
    let det = write(dir.path(), "det.csv", &random_detection_csv(&mut rng, 2000, 60));
    let mut gt = format!("{GROUND_TRUTH_HEADER}\n");
    for i in 0..60 {
        let _ = writeln!(gt, "img{i},D0,0,0,30,30\nimg{i},D1,40,40,70,80");
    }
    let gt = write(dir.path(), "gt.csv", &gt);
    let cases: [Vec<&str>; 3] = [
        vec!["evaluate", "--gt", path_str(&gt), "--det", path_str(&det), "--format", "json"],
        vec!["postprocess", "--det", path_str(&det)],
        vec!["nms", "--det", path_str(&det), "--top-n", "5"],
    ];
    for args in cases {
        let outputs: Vec<Vec<u8>> = ["1", "2", "7"]
            .iter()
            .map(|j| {
                let mut a = args.clone();
                a.extend(["--jobs", j]);
                let o = rdd(&a);
                assert_eq!(code(&o), 0, "{}", stderr(&o));
                o.stdout
            })
            .collect();
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{args:?}");
    }
}

#[test]
fn nms_keeps_top_survivors_per_image() {
    let dir = tempfile::tempdir().unwrap();
    let det = write(
        dir.path(),
        "det.csv",
        &format!(
            "{DETECTION_HEADER}\na,D00,0.9,0,0,10,10\na,D10,0.8,0,0,10,9\na,D00,0.5,50,50,60,60\na,D00,0.7,20,20,30,30\nb,D00,0.1,0,0,1,1\n"
        ),
    );
    let out = rdd(&["nms", "--det", path_str(&det), "--top-n", "2"]);
    assert_eq!(
        stdout(&out),
        format!("{DETECTION_HEADER}\na,D00,0.9,0,0,10,10\na,D00,0.7,20,20,30,30\nb,D00,0.1,0,0,1,1\n")
    );
    let all = rdd(&["nms", "--det", path_str(&det), "--all"]);
    assert_eq!(stdout(&all).lines().count(), 5);
}

#[test]
fn anchors_single_cell() {
    let out = rdd(&["anchors", "--scales", "32", "--ratios", "1", "--feat-h", "1", "--feat-w", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "index,cell_y,cell_x,scale,ratio,xmin,ymin,xmax,ymax\n0,0,0,32,1,-8,-8,24,24\n");

    let out = rdd(&["anchors", "--feat-h", "2", "--feat-w", "3"]);
    assert_eq!(stdout(&out).lines().count(), 1 + 2 * 3 * 15);
    assert_eq!(code(&rdd(&["anchors", "--scales", "-4", "--feat-h", "1", "--feat-w", "1"])), 1);
}

#[test]
fn roialign_constant_map_and_binary_input() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("2,4,5\n");
    for _ in 0..8 {
        text.push_str("2.5,2.5,2.5,2.5,2.5\n");
    }
    let map = write(dir.path(), "map.csv", &text);
    for mode in ["avg", "max"] {
        let out = rdd(&[
            "roialign", "--map", path_str(&map), "--roi", "0.5,0.5,3.5,2.5", "--out-h", "2", "--out-w", "3", "--mode", mode,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert_eq!(stdout(&out), "2,2,3\n2.5,2.5,2.5\n2.5,2.5,2.5\n2.5,2.5,2.5\n2.5,2.5,2.5\n");
    }

    // 1×1×2 map [0, 4]: a RoI centred on x = 0.5 samples the midpoint
    let mut bin = b"FMAP".to_vec();
    for d in [1u32, 1, 2] {
        bin.extend(d.to_le_bytes());
    }
    for v in [0.0f64, 4.0] {
        bin.extend(v.to_le_bytes());
    }
    let fmap = dir.path().join("map.fmap");
    fs::write(&fmap, bin).unwrap();
    let out = rdd(&["roialign", "--map", path_str(&fmap), "--roi", "0.25,-0.25,0.75,0.25", "--out-h", "1", "--out-w", "1", "--samples", "1"]);
    assert_eq!(stdout(&out), "1,1,1\n2\n");

    let bad = write(dir.path(), "bad.csv", "1,2,2\n1,2\n");
    assert_eq!(code(&rdd(&["roialign", "--map", path_str(&bad), "--roi", "0,0,1,1"])), 2);
}

#[test]
fn transform_roundtrip_and_flip() {
    let out = rdd(&["transform", "--to", "model", "--orig-width", "600", "--orig-height", "300", "--box", "0,0,600,150", "--box", "150,30,300,60"]);
    assert_eq!(stdout(&out), "0,0,512,256\n128,51.2,256,102.4\n");
    let out = rdd(&["transform", "--to", "image", "--orig-width", "600", "--orig-height", "300", "--box", "0,0,512,256"]);
    assert_eq!(stdout(&out), "0,0,600,150\n");
    let out = rdd(&["transform", "--to", "model", "--orig-width", "600", "--orig-height", "600", "--hflip", "--box", "0,0,150,600"]);
    assert_eq!(stdout(&out), "384,0,512,512\n");

    let dir = tempfile::tempdir().unwrap();
    let det = write(dir.path(), "det.csv", &format!("{DETECTION_HEADER}\na,D00,0.5,0,0,600,600\n"));
    let out = rdd(&["transform", "--to", "model", "--orig-width", "600", "--orig-height", "600", "--det", path_str(&det)]);
    assert_eq!(stdout(&out), format!("{DETECTION_HEADER}\na,D00,0.5,0,0,512,512\n"));
}

#[test]
fn render_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.csv", TWO_IMAGES_GT);
    let det = write(dir.path(), "det.csv", &format!("{DETECTION_HEADER}\nimg1,A,0.9,1.5,2,11.5,12\n"));
    let out = rdd(&["render", "--gt", path_str(&gt), "--det", path_str(&det), "--image-id", "img1"]);
    assert_eq!(code(&out), 0);
    let svg = stdout(&out);
    assert_eq!(svg.matches("<rect").count(), 2);
    assert_eq!(svg.matches(r#"stroke="green""#).count(), 1);
    assert_eq!(svg.matches(r#"stroke="red""#).count(), 1);
    assert!(svg.contains(r#"<rect x="0" y="0" width="10" height="10""#));
    assert!(svg.contains(r#"<rect x="1.5" y="2" width="10" height="10""#));
    assert!(svg.contains(r#"href="img1.jpg""#));
    assert!(svg.contains(">A 0.90<"));

    let out = rdd(&["render", "--gt", path_str(&gt), "--image-id", "img2", "--image-path", "photos/img2.png"]);
    let svg = stdout(&out);
    assert_eq!(svg.matches("<rect").count(), 1);
    assert!(!svg.contains("stroke=\"red\"") && svg.contains("photos/img2.png"));

    assert_eq!(code(&rdd(&["render", "--gt", path_str(&gt), "--image-id", "nope"])), 2);
}

#[test]
fn validate_reports_mismatches_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    write_voc(dir.path(), "a", 600, 600, vec![gt_box("D00", [0.0, 0.0, 10.0, 10.0])]);
    write_voc(dir.path(), "b", 640, 480, vec![gt_box("D10", [0.0, 0.0, 10.0, 10.0])]);
    let out = rdd(&["validate", "--gt", path_str(dir.path())]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("image count 2, expected 9053"), "{text}");
    assert!(text.contains("image b is 640×480"), "{text}");
    assert!(text.contains("pixel boundaries"), "{text}");

    let v = json(&rdd(&["validate", "--gt", path_str(dir.path()), "--format", "json"]));
    assert_eq!(v["passed"], false);
    assert_eq!(v["findings"].as_array().unwrap().len(), 4);
    assert_eq!(v["findings"][0]["kind"], "image_count");
    assert_eq!(v["coordinate_convention"], "boundary");

    let ok = rdd(&[
        "validate", "--gt", path_str(dir.path()), "--images", "2", "--boxes", "2", "--classes", "2", "--format", "json",
    ]);
    assert_eq!(json(&ok)["findings"].as_array().unwrap().len(), 1);
}
