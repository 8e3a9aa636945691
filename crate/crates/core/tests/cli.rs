mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use batchlens::calibration::CalibrationParams;
use batchlens::complexity::Weights;
use batchlens::config::RunConfig;
use batchlens::harness::Dataset;
use batchlens::imaging::{load_image, MaskMode};
use batchlens::selection::score_samples;
use common::*;
use image::GrayImage;
use rand::Rng;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_batchlens");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("BATCHLENS_SEED").output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// `n` textured 32x32 PNGs, a manifest and a losses file.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut r = rng(70);
        let mut names = Vec::new();
        let mut losses = String::from("loss\n");
        for i in 0..n {
            let img = random_image(&mut r, 32, 32);
            let px = GrayImage::from_fn(32, 32, |x, y| image::Luma([(img.get(y as usize, x as usize, 0) * 255.0).round() as u8]));
            let name = format!("img{i:02}.png");
            px.save(dir.path().join(&name)).unwrap();
            names.push(name);
            losses.push_str(&format!("{}\n", r.random_range(0.0..1.0)));
        }
        fs::write(dir.path().join("manifest.txt"), names.join("\n")).unwrap();
        fs::write(dir.path().join("losses.csv"), losses).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn csv_records(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    (header, r.records().map(|x| x.unwrap()).collect())
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["complexity", "--no-such-flag"]).status.code(), Some(1));

    let f = Fixture::new(4);
    let out = f.path("o");
    let bad_weights = run(&["complexity", "--manifest", &f.path("manifest.txt"), "--weights", "0.2,0.3,0.4", "--out", &out]);
    assert_eq!(bad_weights.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_weights.stderr).contains("weights"));
    assert_eq!(run(&["complexity", "--out", &out]).status.code(), Some(1));
    assert_eq!(run(&["complexity", "--manifest", &f.path("nope.txt"), "--out", &out]).status.code(), Some(1));
    assert_eq!(run(&["select", "--ratio", "0.5", "--losses", "x", "--out", &out]).status.code(), Some(1));
    assert_eq!(run(&["select", "--delta", "0", "--losses", "x", "--out", &out]).status.code(), Some(1));
    assert_eq!(run(&["train", "--method", "greedy", "--out", &out]).status.code(), Some(1));
}

#[test]
fn complexity_calibrate_select_pipeline() {
    let f = Fixture::new(16);
    let out = f.path("run");
    let manifest = f.path("manifest.txt");
    let common = ["--manifest", manifest.as_str(), "--out", out.as_str(), "--mask", "regular", "--image-size", "32"];

    run_ok(&[&["complexity"][..], &common, &["--weights", "0.2,0.3,0.5"]].concat());
    let (header, rows) = csv_records(&f.out("run/complexity.csv"));
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["path", "si_raw", "eg_raw", "tv_raw", "si_norm", "eg_norm", "tv_norm", "combined"]
    );
    assert_eq!(rows.len(), 16);
    for row in &rows {
        let c: f64 = row[7].parse().unwrap();
        assert!((0.0..=1.0).contains(&c));
    }

    run_ok(&[&["calibrate", "--input", &f.path("run/complexity.csv")][..], &common].concat());
    let cal: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.out("run/calibration.json")).unwrap()).unwrap();
    let pivot = cal["pivot"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pivot));

    run_ok(
        &[
            &["select", "--losses", &f.path("losses.csv"), "--pivot-file", &f.path("run/calibration.json")][..],
            &common,
            &["--b", "8", "--ratio", "2", "--scores", &f.path("run/scores.csv")],
        ]
        .concat(),
    );
    let sel: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.out("run/selection.json")).unwrap()).unwrap();
    assert_eq!(sel["chosen"].as_array().unwrap().len(), 8);
    assert_eq!(sel["subset"].as_array().unwrap().len(), 16);
    assert_eq!(sel["pivot"].as_f64().unwrap(), pivot);
    let (_, scores) = csv_records(&f.out("run/scores.csv"));
    assert_eq!(scores.iter().filter(|r| &r[5] == "true").count(), 8);
}

#[test]
fn cli_scores_equal_library_scores() {
    let f = Fixture::new(16);
    let out = f.path("run");
    run_ok(&[
        "select",
        "--manifest",
        &f.path("manifest.txt"),
        "--losses",
        &f.path("losses.csv"),
        "--pivot",
        "0.3",
        "--b",
        "4",
        "--ratio",
        "3",
        "--weights",
        "0.2,0.3,0.5",
        "--mask",
        "irregular",
        "--seed",
        "5",
        "--iteration",
        "2",
        "--scores",
        &f.path("scores.csv"),
        "--out",
        &out,
    ]);
    let (_, rows) = csv_records(&f.out("scores.csv"));
    assert_eq!(rows.len(), 12);

    let paths: Vec<PathBuf> = (0..16).map(|i| f.out(&format!("img{i:02}.png"))).collect();
    let images: Vec<_> = paths.iter().map(|p| load_image(p, Some(128)).unwrap()).collect();
    let dataset = Dataset::new(images, MaskMode::Irregular, 0.25, 5);
    let masks = dataset.masks_for_epoch(0).unwrap();
    let (_, loss_rows) = csv_records(&f.out("losses.csv"));
    let all_losses: Vec<f64> = loss_rows.iter().map(|r| r[0].parse().unwrap()).collect();

    let ids: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    let samples: Vec<_> = ids.iter().map(|&i| (&dataset.images[i], &masks[i])).collect();
    let losses: Vec<f64> = ids.iter().map(|&i| all_losses[i]).collect();
    let w = Weights::new(0.2, 0.3, 0.5).unwrap();
    let lib = score_samples(&samples, &losses, &w, Some(0.3), 0.01, CalibrationParams::default()).unwrap();
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[2].parse::<f64>().unwrap(), losses[k]);
        assert_eq!(row[3].parse::<f64>().unwrap(), lib.complexities[k], "row {k}");
        assert_eq!(row[4].parse::<f64>().unwrap(), lib.scores[k], "row {k}");
    }
}

#[test]
fn outputs_are_byte_reproducible() {
    let f = Fixture::new(8);
    for name in ["a", "b"] {
        let out = f.path(name);
        run_ok(&["complexity", "--manifest", &f.path("manifest.txt"), "--image-size", "32", "--out", &out]);
        run_ok(&[
            "train",
            "--iterations",
            "40",
            "--synthetic-train",
            "32",
            "--synthetic-test",
            "8",
            "--synthetic-size",
            "16",
            "--b",
            "4",
            "--test-every",
            "10",
            "--seed",
            "3",
            "--out",
            &out,
        ]);
    }
    for file in ["complexity.csv", "train.csv", "resolved_config.txt"] {
        let a = fs::read(f.out("a").join(file)).unwrap();
        let b = fs::read(f.out("b").join(file)).unwrap();
        if file == "resolved_config.txt" {
            // only output_dir differs
            let strip = |t: Vec<u8>| String::from_utf8(t).unwrap().lines().filter(|l| !l.starts_with("output_dir")).collect::<Vec<_>>().join("\n");
            assert_eq!(strip(a), strip(b));
        } else {
            assert_eq!(a, b, "{file}");
        }
    }
    let (header, rows) = csv_records(&f.out("a/train.csv"));
    assert_eq!(header.iter().collect::<Vec<_>>(), ["iteration", "method", "train_loss", "test_loss"]);
    assert_eq!(rows.len(), 40);
}

#[test]
fn resolved_config_round_trips_through_config_flag() {
    let f = Fixture::new(2);
    let first = f.path("first");
    run_ok(&[
        "complexity",
        "--manifest",
        &f.path("manifest.txt"),
        "--image-size",
        "32",
        "--weights",
        "eg",
        "--normalize",
        "dataset",
        "--min-pts",
        "4",
        "--eps",
        "0.07",
        "--out",
        &first,
    ]);
    let saved = RunConfig::load(&f.out("first/resolved_config.txt")).unwrap();
    assert_eq!(saved.selector.weights, Weights::EG_ONLY);
    assert_eq!(saved.selector.calibration.min_pts, Some(4));
    assert_eq!(saved.image_size, 32);

    let second = f.path("second");
    run_ok(&["complexity", "--config", &f.path("first/resolved_config.txt"), "--out", &second]);
    let again = RunConfig::load(&f.out("second/resolved_config.txt")).unwrap();
    assert_eq!(RunConfig { output_dir: saved.output_dir.clone(), ..again }, saved);
    assert_eq!(
        fs::read(f.out("first/complexity.csv")).unwrap(),
        fs::read(f.out("second/complexity.csv")).unwrap()
    );
}

#[test]
fn seed_comes_from_environment_unless_flagged() {
    let f = Fixture::new(1);
    let out = f.path("env");
    let status = Command::new(BIN)
        .args(["complexity", "--manifest", &f.path("manifest.txt"), "--image-size", "32", "--out", &out])
        .env("BATCHLENS_SEED", "77")
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(RunConfig::load(&f.out("env/resolved_config.txt")).unwrap().selector.seed, 77);

    let status = Command::new(BIN)
        .args(["complexity", "--manifest", &f.path("manifest.txt"), "--image-size", "32", "--seed", "4", "--out", &out])
        .env("BATCHLENS_SEED", "77")
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(RunConfig::load(&f.out("env/resolved_config.txt")).unwrap().selector.seed, 4);

    let status = Command::new(BIN)
        .args(["complexity", "--out", &out])
        .env("BATCHLENS_SEED", "minus one")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn eval_and_analyze() {
    let f = Fixture::new(3);
    let pred = f.out("pred");
    fs::create_dir(&pred).unwrap();
    for i in 0..3 {
        fs::copy(f.out(&format!("img{i:02}.png")), pred.join(format!("img{i:02}.png"))).unwrap();
    }
    let truth = f.path("");
    let out = f.path("eval");
    run_ok(&["eval", "--pred", pred.to_str().unwrap(), "--truth", &truth, "--out", &out]);
    let (_, rows) = csv_records(&f.out("eval/quality.csv"));
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(&row[1], "inf");
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0);
    }

    run_ok(&["analyze", "--study", "bias", "--rounds", "10", "--out", &out]);
    let bias: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.out("eval/bias.json")).unwrap()).unwrap();
    assert!(bias["proposed_coverage"].as_f64().unwrap() > 0.0);
}
