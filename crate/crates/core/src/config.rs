//! Plain-text `key = value` run configuration.
//!
//! Every key has a default; unknown keys are rejected. [`RunConfig::to_text`]
//! writes every key in a fixed order, and parsing that text reproduces the
//! same configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::calibration::CalibrationParams;
use crate::complexity::{NormScope, Weights};
use crate::error::{Error, Result};
use crate::harness::TrainConfig;
use crate::imaging::MaskMode;
use crate::selection::{Method, SelectionFn, SelectorConfig};

pub const SEED_ENV: &str = "BATCHLENS_SEED";

/// Name of the resolved configuration written next to every run's outputs.
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub selector: SelectorConfig,
    pub jobs: usize,
    pub manifest: Option<PathBuf>,
    /// Held-out images for `train`, `sweep` and `analyze`; required when
    /// `manifest` is set for those commands.
    pub test_manifest: Option<PathBuf>,
    pub mask: MaskMode,
    pub mask_ratio: f64,
    pub image_size: usize,
    pub output_dir: PathBuf,
    pub iterations: usize,
    pub learning_rate: f64,
    pub kernel_size: usize,
    pub test_every: usize,
    pub synthetic_train: usize,
    pub synthetic_test: usize,
    pub synthetic_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            method: Method::Proposed,
            selector: SelectorConfig::default(),
            jobs: 1,
            manifest: None,
            test_manifest: None,
            mask: MaskMode::Irregular,
            mask_ratio: 0.25,
            image_size: 128,
            output_dir: PathBuf::from("out"),
            iterations: train.iterations,
            learning_rate: train.learning_rate,
            kernel_size: train.kernel_size,
            test_every: train.test_every,
            synthetic_train: 512,
            synthetic_test: 64,
            synthetic_size: 32,
        }
    }
}

pub const KEYS: &[&str] = &[
    "method",
    "b",
    "ratio",
    "delta",
    "beta",
    "weights",
    "seed",
    "form",
    "eps",
    "min_pts",
    "normalize",
    "jobs",
    "manifest",
    "test_manifest",
    "mask",
    "mask_ratio",
    "image_size",
    "output_dir",
    "iterations",
    "learning_rate",
    "kernel_size",
    "test_every",
    "synthetic_train",
    "synthetic_test",
    "synthetic_size",
];

fn parse_num<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{value}`")))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    match value {
        "" | "none" => None,
        v => Some(PathBuf::from(v)),
    }
}

fn path_text(path: &Option<PathBuf>) -> String {
    path.as_ref().map_or("none".into(), |p| p.display().to_string())
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::invalid("config", format!("unknown key `{key}`")));
        };
        let s = &mut self.selector;
        match key {
            "method" => self.method = value.parse()?,
            "b" => s.b = parse_num(key, value)?,
            "ratio" => s.big_batch_ratio = parse_num(key, value)?,
            "delta" => s.delta = parse_num(key, value)?,
            "beta" => s.beta = parse_num(key, value)?,
            "weights" => s.weights = value.parse::<Weights>()?,
            "seed" => s.seed = parse_num(key, value)?,
            "form" => s.form = value.parse::<SelectionFn>()?,
            "eps" => s.calibration.eps = parse_num(key, value)?,
            "min_pts" => {
                s.calibration.min_pts = match value {
                    "auto" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "normalize" => s.normalize = value.parse::<NormScope>()?,
            "jobs" => self.jobs = parse_num(key, value)?,
            "manifest" => self.manifest = optional_path(value),
            "test_manifest" => self.test_manifest = optional_path(value),
            "mask" => self.mask = value.parse()?,
            "mask_ratio" => self.mask_ratio = parse_num(key, value)?,
            "image_size" => self.image_size = parse_num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "iterations" => self.iterations = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "kernel_size" => self.kernel_size = parse_num(key, value)?,
            "test_every" => self.test_every = parse_num(key, value)?,
            "synthetic_train" => self.synthetic_train = parse_num(key, value)?,
            "synthetic_test" => self.synthetic_test = parse_num(key, value)?,
            "synthetic_size" => self.synthetic_size = parse_num(key, value)?,
            _ => unreachable!("key list and match arms agree"),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a
    /// comment; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Malformed {
                what: "config".into(),
                reason: format!("line {}: expected key = value", n + 1),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = Self::parse(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let s = &self.selector;
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("writing to a String");
        put("method", self.method.to_string());
        put("b", s.b.to_string());
        put("ratio", s.big_batch_ratio.to_string());
        put("delta", s.delta.to_string());
        put("beta", s.beta.to_string());
        put("weights", s.weights.to_string());
        put("seed", s.seed.to_string());
        put("form", s.form.to_string());
        put("eps", s.calibration.eps.to_string());
        put("min_pts", s.calibration.min_pts.map_or("auto".into(), |m| m.to_string()));
        put("normalize", s.normalize.to_string());
        put("jobs", self.jobs.to_string());
        put("manifest", path_text(&self.manifest));
        put("test_manifest", path_text(&self.test_manifest));
        put("mask", self.mask.to_string());
        put("mask_ratio", self.mask_ratio.to_string());
        put("image_size", self.image_size.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("iterations", self.iterations.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("kernel_size", self.kernel_size.to_string());
        put("test_every", self.test_every.to_string());
        put("synthetic_train", self.synthetic_train.to_string());
        put("synthetic_test", self.synthetic_test.to_string());
        put("synthetic_size", self.synthetic_size.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.selector.validate()?;
        if self.jobs == 0 {
            return Err(Error::invalid("jobs", "must be at least 1"));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(Error::invalid("mask_ratio", "must lie in (0, 1)"));
        }
        if self.image_size < 3 {
            return Err(Error::invalid("image_size", "must be at least 3"));
        }
        if self.synthetic_size < 16 {
            return Err(Error::invalid("synthetic_size", "must be at least 16"));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::invalid("kernel_size", "must be odd"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut selector = self.selector.clone();
        selector.parallel = self.jobs > 1;
        TrainConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            kernel_size: self.kernel_size,
            test_every: self.test_every,
            selector,
            keep_decisions: false,
        }
    }

    pub fn calibration(&self) -> CalibrationParams {
        self.selector.calibration
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = RunConfig::default();
        assert_eq!(c.selector.delta, 0.01);
        assert_eq!(c.selector.big_batch_ratio, 2.0);
        assert_eq!(c.test_every, 20);
        assert_eq!(c.image_size, 128);
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text(
            "method = kawaguchi\nb = 8 # mini batch\nratio = 1.5\nweights = 0.2,0.3,0.5\n\
             min_pts = 4\nnormalize = dataset\nmanifest = data/m.txt\nmask = regular\nlearning_rate = 0.125\n",
        )
        .unwrap();
        assert_eq!(c.method, Method::Kawaguchi);
        assert_eq!(c.selector.calibration.min_pts, Some(4));
        let again = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), c.to_text());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("batch = 3").is_err());
        assert!(RunConfig::parse("b = three").is_err());
        assert!(RunConfig::parse("just words").is_err());
        assert!(RunConfig::parse("weights = 0.5,0.5,0.5").is_err());
        let c = RunConfig::parse("delta = 0").unwrap();
        assert!(c.validate().is_err());
    }
}
