//! Command-line front end. Every subcommand resolves a [`RunConfig`] from
//! defaults, `BATCHLENS_SEED`, an optional `--config` file and flag overrides
//! (in that order), writes it to the output directory, then runs.

mod commands;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use batchlens::config::{RunConfig, RESOLVED_CONFIG_FILE, SEED_ENV};
use batchlens::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "batchlens", version, about = "Complexity-guided mini-batch selection for image inpainting")]
pub struct Cli {
    #[command(flatten)]
    pub settings: Settings,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides for [`RunConfig`] keys. Anything left unset keeps the value from
/// `--config`, or the built-in default.
#[derive(Debug, Default, Args)]
pub struct Settings {
    /// key = value configuration file; flags given on the command line win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for per-sample scoring (1 = sequential)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Directory for outputs and resolved_config.txt
    #[arg(long = "out", global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Selection method: proposed, fan, kawaguchi, jiang or random
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Mini-batch size b
    #[arg(long, global = true)]
    pub b: Option<usize>,
    /// Big-batch ratio; B = ceil(ratio * b), must be >= 1
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    /// Floor on the complexity distance in the proposed score (> 0)
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Exponent on the loss CDF for jiang selection (> 0)
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Metric weights: si, eg, tv, or three comma-separated values summing to 1
    #[arg(long, global = true, value_name = "SI,EG,TV")]
    pub weights: Option<String>,
    /// Seed for subset draws, irregular masks and synthetic data
    /// (falls back to BATCHLENS_SEED, then 0)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Selection function wrapped around the proposed score: topk, fan or jiang
    #[arg(long, global = true)]
    pub form: Option<String>,
    /// DBSCAN neighbourhood radius for pivot calibration (> 0)
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// DBSCAN core-point threshold, or `auto` for max(3, ceil(0.01 N))
    #[arg(long, global = true, value_name = "N|auto")]
    pub min_pts: Option<String>,
    /// Min-max normalization population: batch or dataset
    #[arg(long, global = true)]
    pub normalize: Option<String>,
    /// Newline-separated image paths, relative to the manifest's directory
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Held-out manifest for train, sweep and analyze
    #[arg(long, global = true, value_name = "FILE")]
    pub test_manifest: Option<PathBuf>,
    /// Mask mode: regular (centred half-size block) or irregular
    #[arg(long, global = true)]
    pub mask: Option<String>,
    /// Target missing fraction of irregular masks, in (0, 1)
    #[arg(long, global = true)]
    pub mask_ratio: Option<f64>,
    /// Images are resized to this square size on load
    #[arg(long, global = true)]
    pub image_size: Option<usize>,
    /// Training iterations
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    /// SGD step size of the toy inpainter
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    /// Odd stencil size of the toy inpainter
    #[arg(long, global = true)]
    pub kernel_size: Option<usize>,
    /// Test loss is recorded every this many iterations
    #[arg(long, global = true)]
    pub test_every: Option<usize>,
    /// Synthetic training images when no manifest is given
    #[arg(long, global = true)]
    pub synthetic_train: Option<usize>,
    /// Synthetic test images when no manifest is given
    #[arg(long, global = true)]
    pub synthetic_test: Option<usize>,
    /// Side length of synthetic images
    #[arg(long, global = true)]
    pub synthetic_size: Option<usize>,
}

impl Settings {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        fn put<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut out = Vec::new();
        put(&mut out, "jobs", &self.jobs);
        put(&mut out, "output_dir", &path(&self.output_dir));
        put(&mut out, "method", &self.method);
        put(&mut out, "b", &self.b);
        put(&mut out, "ratio", &self.ratio);
        put(&mut out, "delta", &self.delta);
        put(&mut out, "beta", &self.beta);
        put(&mut out, "weights", &self.weights);
        put(&mut out, "seed", &self.seed);
        put(&mut out, "form", &self.form);
        put(&mut out, "eps", &self.eps);
        put(&mut out, "min_pts", &self.min_pts);
        put(&mut out, "normalize", &self.normalize);
        put(&mut out, "manifest", &path(&self.manifest));
        put(&mut out, "test_manifest", &path(&self.test_manifest));
        put(&mut out, "mask", &self.mask);
        put(&mut out, "mask_ratio", &self.mask_ratio);
        put(&mut out, "image_size", &self.image_size);
        put(&mut out, "iterations", &self.iterations);
        put(&mut out, "learning_rate", &self.learning_rate);
        put(&mut out, "kernel_size", &self.kernel_size);
        put(&mut out, "test_every", &self.test_every);
        put(&mut out, "synthetic_train", &self.synthetic_train);
        put(&mut out, "synthetic_test", &self.synthetic_test);
        put(&mut out, "synthetic_size", &self.synthetic_size);
        out
    }

    /// Defaults, then the seed fallback, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, Error> {
        let mut config = RunConfig::default();
        if let Ok(seed) = std::env::var(SEED_ENV) {
            config
                .set("seed", &seed)
                .map_err(|_| Error::invalid("seed", format!("{SEED_ENV}=`{seed}` is not an unsigned integer")))?;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            config.apply_text(&text)?;
        }
        for (key, value) in self.overrides() {
            config.set(key, &value)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raw, normalized and combined complexity of every manifest image
    Complexity(commands::ComplexityArgs),
    /// Pivot and DBSCAN labels from a complexity CSV
    Calibrate(commands::CalibrateArgs),
    /// One selection round over a manifest with known losses
    Select(commands::SelectArgs),
    /// Train the toy inpainter with the configured selection method
    Train(commands::TrainArgs),
    /// PSNR and SSIM of predictions against ground truth
    Eval(commands::EvalArgs),
    /// Loss/complexity correlation, per-phase timing or selection-bias study
    Analyze(commands::AnalyzeArgs),
    /// Train across big-batch ratios
    Sweep(commands::SweepArgs),
}

/// Errors caused by the input rather than by the program.
fn is_user_error(e: &Error) -> bool {
    !matches!(
        e,
        Error::Diverged { .. } | Error::NonFiniteScore { .. } | Error::LossCallback(_)
    )
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = cli.settings.resolve()?;
    if config.jobs > 1 {
        // the global pool can only be built once; a second build in the same
        // process keeps the first size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build_global();
    }
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    config.save(&config.output_dir.join(RESOLVED_CONFIG_FILE))?;
    match cli.command {
        Command::Complexity(a) => commands::complexity(&config, &a),
        Command::Calibrate(a) => commands::calibrate(&config, &a),
        Command::Select(a) => commands::select(&config, &a),
        Command::Train(a) => commands::train(&config, &a),
        Command::Eval(a) => commands::eval(&config, &a),
        Command::Analyze(a) => commands::analyze(&config, &a),
        Command::Sweep(a) => commands::sweep(&config, &a),
    }
}

/// Parses `argv` and runs it, returning the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USER } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if is_user_error(&e) {
                EXIT_USER
            } else {
                EXIT_INTERNAL
            }
        }
    }
}
