use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use batchlens::calibration::{estimate_pivot_with, CalibrationResult};
use batchlens::complexity::{profiles, raw_metrics, Metrics};
use batchlens::config::RunConfig;
use batchlens::harness::{
    correlation_study, overhead, selection_bias_study, sweep_ratio, synthetic_split, timing_study, train as train_model,
    BiasConfig, Dataset, TrainRecord, EARLY_PHASE,
};
use batchlens::imaging::{load_image, read_csv_rows, read_json, write_csv_rows, write_json, ImageTensor, MaskGrid};
use batchlens::selection::{run_selection_round, ImagePool, Method};
use batchlens::{Error, Result};

fn output_path(config: &RunConfig, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| config.output_dir.join(default_name))
}

fn require_manifest(config: &RunConfig) -> Result<&Path> {
    config
        .manifest
        .as_deref()
        .ok_or_else(|| Error::invalid("manifest", "no manifest given; pass --manifest or set it in --config"))
}

/// The manifest images with their masks (epoch 0).
fn manifest_samples(config: &RunConfig) -> Result<(Vec<PathBuf>, Dataset, Vec<MaskGrid>)> {
    let manifest = require_manifest(config)?;
    let paths = batchlens::imaging::load_manifest(manifest)?;
    if paths.is_empty() {
        return Err(Error::invalid("manifest", format!("{} lists no images", manifest.display())));
    }
    let images = paths
        .iter()
        .map(|p| load_image(p, Some(config.image_size)))
        .collect::<Result<Vec<_>>>()?;
    let dataset = Dataset::new(images, config.mask, config.mask_ratio, config.selector.seed);
    let masks = dataset.masks_for_epoch(0)?;
    Ok((paths, dataset, masks))
}

/// Train and test splits: manifests when given, synthetic data otherwise.
fn splits(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    let seed = config.selector.seed;
    match (&config.manifest, &config.test_manifest) {
        (Some(train), Some(test)) => Ok((
            Dataset::from_manifest(train, config.image_size, config.mask, config.mask_ratio, seed)?,
            Dataset::from_manifest(test, config.image_size, config.mask, config.mask_ratio, seed.wrapping_add(1))?,
        )),
        (Some(_), None) => Err(Error::invalid("test_manifest", "training on a manifest needs --test-manifest")),
        (None, Some(_)) => Err(Error::invalid("manifest", "--test-manifest given without --manifest")),
        (None, None) => synthetic_split(
            config.synthetic_train,
            config.synthetic_test,
            config.synthetic_size,
            config.mask,
            config.mask_ratio,
            seed,
        ),
    }
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    /// Output CSV [default: <out>/complexity.csv]
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub path: String,
    pub si_raw: f64,
    pub eg_raw: f64,
    pub tv_raw: f64,
    pub si_norm: f64,
    pub eg_norm: f64,
    pub tv_norm: f64,
    pub combined: f64,
}

pub fn complexity(config: &RunConfig, args: &ComplexityArgs) -> Result<()> {
    let (paths, dataset, masks) = manifest_samples(config)?;
    let samples: Vec<(&ImageTensor, &MaskGrid)> = dataset.images.iter().zip(&masks).collect();
    let weights = config.selector.weights;
    // every metric is reported, whatever the weights
    let raw: Vec<Metrics> = if config.jobs > 1 {
        use rayon::prelude::*;
        samples.par_iter().map(|(img, mask)| raw_metrics(img, mask)).collect::<Result<_>>()?
    } else {
        samples.iter().map(|(img, mask)| raw_metrics(img, mask)).collect::<Result<_>>()?
    };
    let rows: Vec<ComplexityRow> = profiles(&raw, &weights)
        .into_iter()
        .zip(&paths)
        .map(|(p, path)| ComplexityRow {
            path: path.display().to_string(),
            si_raw: p.raw.si,
            eg_raw: p.raw.eg,
            tv_raw: p.raw.tv,
            si_norm: p.normalized.si,
            eg_norm: p.normalized.eg,
            tv_norm: p.normalized.tv,
            combined: p.combined,
        })
        .collect();
    let out = output_path(config, &args.output, "complexity.csv");
    write_csv_rows(&out, &rows)?;
    println!("{} rows -> {}", rows.len(), out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Complexity CSV written by `complexity`
    #[arg(long, short)]
    input: PathBuf,
    /// Column holding the normalized complexity
    #[arg(long, default_value = "combined")]
    column: String,
    /// Output JSON [default: <out>/calibration.json]
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Malformed {
            what: path.display().to_string(),
            reason: format!("{other:?}"),
        },
    })?;
    let headers = reader.headers()?.clone();
    let idx = headers.iter().position(|h| h == column).ok_or_else(|| Error::Malformed {
        what: path.display().to_string(),
        reason: format!("no `{column}` column"),
    })?;
    reader
        .records()
        .enumerate()
        .map(|(n, rec)| {
            let rec = rec?;
            let field = rec.get(idx).unwrap_or("");
            field.trim().parse::<f64>().map_err(|_| Error::Malformed {
                what: path.display().to_string(),
                reason: format!("row {}: `{field}` is not a number", n + 1),
            })
        })
        .collect()
}

pub fn calibrate(config: &RunConfig, args: &CalibrateArgs) -> Result<()> {
    let values = read_column(&args.input, &args.column)?;
    if values.is_empty() {
        return Err(Error::invalid("input", "complexity CSV has no rows"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid("input", format!("non-finite complexity {v}")));
    }
    let params = config.calibration().resolve(values.len());
    let result = estimate_pivot_with(&values, params)?;
    let out = output_path(config, &args.output, "calibration.json");
    write_json(&out, &result)?;
    println!("pivot {} -> {}", result.pivot, out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// CSV with a `loss` column, one row per manifest line
    #[arg(long)]
    losses: PathBuf,
    /// Fixed pivot; otherwise read from --pivot-file or calibrated on the big batch
    #[arg(long, conflicts_with = "pivot_file")]
    pivot: Option<f64>,
    /// JSON written by `calibrate`
    #[arg(long)]
    pivot_file: Option<PathBuf>,
    /// Round index; together with the seed it fixes the subset draw
    #[arg(long, default_value_t = 0)]
    iteration: u64,
    /// Output JSON [default: <out>/selection.json]
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write per-candidate losses, complexities and scores to this CSV
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct LossRow {
    loss: f64,
}

#[derive(Debug, Serialize)]
pub struct SelectionOutput {
    pub method: Method,
    pub iteration: u64,
    pub pivot: Option<f64>,
    pub subset: Vec<usize>,
    pub chosen: Vec<usize>,
    pub chosen_paths: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: usize,
    pub path: String,
    pub loss: Option<f64>,
    pub complexity: Option<f64>,
    pub score: Option<f64>,
    pub chosen: bool,
}

pub fn select(config: &RunConfig, args: &SelectArgs) -> Result<()> {
    let (paths, dataset, masks) = manifest_samples(config)?;
    let losses: Vec<f64> = read_csv_rows::<LossRow>(&args.losses)?.into_iter().map(|r| r.loss).collect();
    if losses.len() != paths.len() {
        return Err(Error::invalid(
            "losses",
            format!("{} losses for {} manifest images", losses.len(), paths.len()),
        ));
    }
    let mut pivot = match (&args.pivot, &args.pivot_file) {
        (Some(p), _) => Some(*p),
        (None, Some(f)) => Some(read_json::<CalibrationResult>(f)?.pivot),
        (None, None) => None,
    };
    let pool = ImagePool {
        samples: dataset.images.iter().zip(&masks).collect(),
    };
    let mut selector = config.selector.clone();
    selector.parallel = config.jobs > 1;
    let decision = run_selection_round(&pool, &selector, config.method, args.iteration, &mut pivot, |ids| {
        ids.iter()
            .map(|&id| {
                let l = losses[id];
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(Error::invalid("losses", format!("row {}: loss {l} must be finite and >= 0", id + 1)));
                }
                Ok(l)
            })
            .collect()
    })
    .map_err(|e| match e {
        // bad loss values are an input problem
        Error::LossCallback(msg) => Error::Malformed {
            what: args.losses.display().to_string(),
            reason: msg,
        },
        other => other,
    })?;

    let out = output_path(config, &args.output, "selection.json");
    write_json(
        &out,
        &SelectionOutput {
            method: config.method,
            iteration: args.iteration,
            pivot: decision.pivot,
            subset: decision.subset_ids.clone(),
            chosen: decision.chosen_ids.clone(),
            chosen_paths: decision.chosen_ids.iter().map(|&i| paths[i].display().to_string()).collect(),
        },
    )?;
    if let Some(scores) = &args.scores {
        let at = |v: &Vec<f64>, i: usize| v.get(i).copied();
        let rows: Vec<ScoreRow> = decision
            .subset_ids
            .iter()
            .enumerate()
            .map(|(pos, &id)| ScoreRow {
                id,
                path: paths[id].display().to_string(),
                loss: at(&decision.losses, pos),
                complexity: at(&decision.complexities, pos),
                score: at(&decision.scores, pos),
                chosen: decision.chosen_ids.contains(&id),
            })
            .collect();
        write_csv_rows(scores, &rows)?;
    }
    println!("{} of {} chosen -> {}", decision.chosen_ids.len(), decision.subset_ids.len(), out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Per-iteration CSV [default: <out>/train.csv]
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Add wall-clock columns (these differ between runs)
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Serialize)]
struct TrainRow {
    iteration: usize,
    method: Method,
    train_loss: f64,
    test_loss: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    method: Method,
    iterations: usize,
    early_test_l1: f64,
    final_test_l1: f64,
    kernel_size: usize,
    params: Vec<f64>,
}

pub fn train(config: &RunConfig, args: &TrainArgs) -> Result<()> {
    let (train_set, test_set) = splits(config)?;
    let outcome = train_model(&train_set, &test_set, &config.train_config(), config.method)?;
    let out = output_path(config, &args.output, "train.csv");
    if args.timings {
        write_csv_rows(&out, &outcome.records)?;
    } else {
        let rows: Vec<TrainRow> = outcome
            .records
            .iter()
            .map(|r: &TrainRecord| TrainRow {
                iteration: r.iteration,
                method: r.method,
                train_loss: r.train_loss,
                test_loss: r.test_loss,
            })
            .collect();
        write_csv_rows(&out, &rows)?;
    }
    let summary = TrainSummary {
        method: config.method,
        iterations: config.iterations,
        early_test_l1: outcome.mean_test_loss_before(EARLY_PHASE.min(config.iterations.max(1))),
        final_test_l1: outcome.final_test_loss,
        kernel_size: outcome.model.kernel(),
        params: outcome.model.params().to_vec(),
    };
    write_json(&config.output_dir.join("train_summary.json"), &summary)?;
    println!(
        "{}: final test L1 {} ({} iterations) -> {}",
        config.method,
        outcome.final_test_loss,
        config.iterations,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of inpainted images
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth images with the same file names
    #[arg(long)]
    truth: PathBuf,
    /// Output CSV [default: <out>/quality.csv]
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QualityRow {
    pub file: String,
    pub psnr: f64,
    pub ssim: f64,
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm" | "pnm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn eval(config: &RunConfig, args: &EvalArgs) -> Result<()> {
    let truths = image_files(&args.truth)?;
    if truths.is_empty() {
        return Err(Error::invalid("truth", format!("no images in {}", args.truth.display())));
    }
    let rows = truths
        .iter()
        .map(|truth_path| {
            let name = truth_path.file_name().expect("listed files have names");
            let pred_path = args.pred.join(name);
            if !pred_path.exists() {
                return Err(Error::invalid(
                    "pred",
                    format!("no prediction for {}", name.to_string_lossy()),
                ));
            }
            let truth = load_image(truth_path, None)?;
            let pred = load_image(&pred_path, None)?;
            let q = batchlens::quality::quality(&pred, &truth)?;
            Ok(QualityRow {
                file: name.to_string_lossy().into_owned(),
                psnr: q.psnr,
                ssim: q.ssim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = output_path(config, &args.output, "quality.csv");
    write_csv_rows(&out, &rows)?;
    let n = rows.len() as f64;
    println!(
        "{} images: mean PSNR {} dB, mean SSIM {} -> {}",
        rows.len(),
        rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Study {
    /// Per-sample loss against TV complexity after training for --epochs
    Correlation,
    /// Median per-phase time per iteration for every method
    Timing,
    /// Complexity deciles covered by loss-only, proposed and random selection
    Bias,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    study: Study,
    /// Training epochs before the correlation is measured
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Measured iterations per method in the timing study
    #[arg(long, default_value_t = 200)]
    timing_iterations: usize,
    /// Pool size of the bias study
    #[arg(long, default_value_t = 1024)]
    pool: usize,
    /// Rounds of the bias study
    #[arg(long, default_value_t = 100)]
    rounds: usize,
}

#[derive(Debug, Serialize)]
struct CorrelationSummary {
    epochs: usize,
    iterations: usize,
    samples: usize,
    pearson: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TimingOutRow {
    method: Method,
    score_seconds: f64,
    select_seconds: f64,
    update_seconds: f64,
    total_seconds: f64,
    overhead_vs_random: Option<f64>,
}

pub fn analyze(config: &RunConfig, args: &AnalyzeArgs) -> Result<()> {
    match args.study {
        Study::Correlation => {
            let (train_set, test_set) = splits(config)?;
            let mut tc = config.train_config();
            let per_epoch = (train_set.len() / tc.selector.b).max(1);
            tc.iterations = args.epochs * per_epoch;
            let outcome = train_model(&train_set, &test_set, &tc, config.method)?;
            let study = correlation_study(&train_set, &outcome.model, args.epochs as u64)?;
            write_csv_rows(&config.output_dir.join("correlation.csv"), &study.rows)?;
            write_json(
                &config.output_dir.join("correlation.json"),
                &CorrelationSummary {
                    epochs: args.epochs,
                    iterations: tc.iterations,
                    samples: study.rows.len(),
                    pearson: study.pearson,
                },
            )?;
            match study.pearson {
                Some(r) => println!("pearson r(loss, tv) = {r}"),
                None => println!("pearson r undefined (constant losses or complexities)"),
            }
        }
        Study::Timing => {
            let (train_set, test_set) = splits(config)?;
            let rows = timing_study(
                &train_set,
                &test_set,
                &config.train_config(),
                &Method::ALL,
                args.timing_iterations,
            )?;
            let out: Vec<TimingOutRow> = rows
                .iter()
                .map(|r| TimingOutRow {
                    method: r.method,
                    score_seconds: r.score_seconds,
                    select_seconds: r.select_seconds,
                    update_seconds: r.update_seconds,
                    total_seconds: r.total_seconds,
                    overhead_vs_random: overhead(&rows, r.method, Method::Random),
                })
                .collect();
            write_csv_rows(&config.output_dir.join("timing.csv"), &out)?;
            for r in &out {
                println!(
                    "{:>9}: {:.3} ms/iter{}",
                    r.method.to_string(),
                    r.total_seconds * 1e3,
                    r.overhead_vs_random
                        .map(|o| format!(" ({:+.1}% vs random)", 100.0 * o))
                        .unwrap_or_default()
                );
            }
        }
        Study::Bias => {
            let s = &config.selector;
            let bias = BiasConfig {
                pool_size: args.pool,
                rounds: args.rounds,
                b: s.b,
                big_batch_ratio: s.big_batch_ratio,
                delta: s.delta,
                seed: s.seed,
                ..BiasConfig::default()
            };
            let report = selection_bias_study(&bias)?;
            write_json(&config.output_dir.join("bias.json"), &report)?;
            println!(
                "deciles covered: loss-only {}, proposed {}, random {} (pivot {})",
                report.loss_only_coverage, report.proposed_coverage, report.random_coverage, report.pivot
            );
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated big-batch ratios in [1, 4]
    #[arg(long, value_delimiter = ',', default_value = "1,1.5,2,3,4")]
    ratios: Vec<f64>,
    /// Output CSV [default: <out>/sweep.csv]
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Add the median seconds-per-iteration column (differs between runs)
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Serialize)]
struct SweepOutRow {
    ratio: f64,
    big_batch: usize,
    early_test_l1: f64,
    final_test_l1: f64,
}

pub fn sweep(config: &RunConfig, args: &SweepArgs) -> Result<()> {
    let (train_set, test_set) = splits(config)?;
    let rows = sweep_ratio(&train_set, &test_set, &config.train_config(), config.method, &args.ratios)?;
    let out = output_path(config, &args.output, "sweep.csv");
    if args.timings {
        write_csv_rows(&out, &rows)?;
    } else {
        let plain: Vec<SweepOutRow> = rows
            .iter()
            .map(|r| SweepOutRow {
                ratio: r.ratio,
                big_batch: r.big_batch,
                early_test_l1: r.early_test_l1,
                final_test_l1: r.final_test_l1,
            })
            .collect();
        write_csv_rows(&out, &plain)?;
    }
    for r in &rows {
        println!("ratio {} (B={}): final test L1 {}", r.ratio, r.big_batch, r.final_test_l1);
    }
    Ok(())
}
