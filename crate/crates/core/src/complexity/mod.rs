//! Missingness-complexity metrics on the masked region of a ground-truth
//! image: spatial information (Sobel RMS), GLCM texture entropy and total
//! variation, plus population normalization and weighted combination.

mod glcm;
mod spatial;
mod tv;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use glcm::{glcm, glcm_entropy, Glcm, GRAY_LEVELS};
pub use spatial::spatial_information;
pub use tv::total_variation;

use crate::error::{Error, Result};
use crate::imaging::{GrayPlane, ImageTensor, MaskGrid};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_shape(gray: &GrayPlane, mask: &MaskGrid) -> Result<()> {
    if gray.height() != mask.height() || gray.width() != mask.width() {
        return Err(Error::ShapeMismatch {
            left: (gray.height(), gray.width(), 1),
            right: (mask.height(), mask.width(), 1),
        });
    }
    Ok(())
}

/// One value per complexity metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub si: f64,
    pub eg: f64,
    pub tv: f64,
}

impl Metrics {
    pub fn dot(&self, w: &Weights) -> f64 {
        w.si * self.si + w.eg * self.eg + w.tv * self.tv
    }
}

/// Raw SI, EG and TV of the missing region.
pub fn raw_metrics(img: &ImageTensor, mask: &MaskGrid) -> Result<Metrics> {
    let gray = img.gray();
    Ok(Metrics {
        si: spatial_information(gray, mask)?,
        eg: glcm_entropy(&glcm(gray, mask)?),
        tv: total_variation(gray, mask)?,
    })
}

/// Raw metrics restricted to the ones with nonzero weight; the rest are 0.
///
/// Training loops use this to skip e.g. the GLCM when only TV is weighted.
pub fn raw_metrics_weighted(img: &ImageTensor, mask: &MaskGrid, w: &Weights) -> Result<Metrics> {
    let gray = img.gray();
    mask.require_missing()?;
    Ok(Metrics {
        si: if w.si > 0.0 { spatial_information(gray, mask)? } else { 0.0 },
        eg: if w.eg > 0.0 { glcm_entropy(&glcm(gray, mask)?) } else { 0.0 },
        tv: if w.tv > 0.0 { total_variation(gray, mask)? } else { 0.0 },
    })
}

/// Raw metrics for many samples, optionally in parallel. Results are
/// identical either way.
pub fn raw_metrics_batch(
    samples: &[(&ImageTensor, &MaskGrid)],
    weights: &Weights,
    parallel: bool,
) -> Result<Vec<Metrics>> {
    if parallel {
        samples
            .par_iter()
            .map(|(img, mask)| raw_metrics_weighted(img, mask, weights))
            .collect()
    } else {
        samples
            .iter()
            .map(|(img, mask)| raw_metrics_weighted(img, mask, weights))
            .collect()
    }
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[inline]
fn rescale(v: f64, (lo, hi): (f64, f64)) -> f64 {
    let range = hi - lo;
    if range > 0.0 {
        ((v - lo) / range).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Min-max normalization to `[0, 1]`; a degenerate range maps to 0.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let r = range_of(values.iter().copied());
    values.iter().map(|&v| rescale(v, r)).collect()
}

/// Per-metric min-max normalization over the given population.
pub fn normalize_profiles(raw: &[Metrics]) -> Vec<Metrics> {
    normalize_profiles_within(raw, raw)
}

/// Per-metric min-max normalization of `raw` using the ranges of
/// `population`. Values outside the population range are clamped.
pub fn normalize_profiles_within(raw: &[Metrics], population: &[Metrics]) -> Vec<Metrics> {
    let si = range_of(population.iter().map(|m| m.si));
    let eg = range_of(population.iter().map(|m| m.eg));
    let tv = range_of(population.iter().map(|m| m.tv));
    raw.iter()
        .map(|m| Metrics {
            si: rescale(m.si, si),
            eg: rescale(m.eg, eg),
            tv: rescale(m.tv, tv),
        })
        .collect()
}

/// Which population the min-max normalization ranges come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormScope {
    /// The samples being scored together (the big batch during training).
    #[default]
    Batch,
    /// Every sample in the pool.
    Dataset,
}

impl fmt::Display for NormScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormScope::Batch => "batch",
            NormScope::Dataset => "dataset",
        })
    }
}

impl FromStr for NormScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(NormScope::Batch),
            "dataset" => Ok(NormScope::Dataset),
            other => Err(Error::invalid("normalize", format!("expected batch or dataset, got `{other}`"))),
        }
    }
}

/// Nonnegative metric weights summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub si: f64,
    pub eg: f64,
    pub tv: f64,
}

impl Weights {
    pub const SI_ONLY: Weights = Weights { si: 1.0, eg: 0.0, tv: 0.0 };
    pub const EG_ONLY: Weights = Weights { si: 0.0, eg: 1.0, tv: 0.0 };
    pub const TV_ONLY: Weights = Weights { si: 0.0, eg: 0.0, tv: 1.0 };

    pub fn new(si: f64, eg: f64, tv: f64) -> Result<Self> {
        let ok = [si, eg, tv].iter().all(|w| w.is_finite() && *w >= 0.0)
            && (si + eg + tv - 1.0).abs() <= WEIGHT_SUM_TOLERANCE;
        if !ok {
            return Err(Error::InvalidWeights(si, eg, tv));
        }
        Ok(Weights { si, eg, tv })
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights::TV_ONLY
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.si, self.eg, self.tv)
    }
}

impl FromStr for Weights {
    type Err = Error;

    /// Parses `si,eg,tv`, or one of the names `si`, `eg`, `tv`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "si" => return Ok(Weights::SI_ONLY),
            "eg" => return Ok(Weights::EG_ONLY),
            "tv" => return Ok(Weights::TV_ONLY),
            _ => {}
        }
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid("weights", format!("cannot parse `{s}` as si,eg,tv")))?;
        match parts.as_slice() {
            [si, eg, tv] => Weights::new(*si, *eg, *tv),
            _ => Err(Error::invalid("weights", format!("expected three values, got `{s}`"))),
        }
    }
}

/// Weighted sum of normalized metrics. Weights are re-validated.
pub fn combine(normalized: &Metrics, weights: &Weights) -> Result<f64> {
    let w = Weights::new(weights.si, weights.eg, weights.tv)?;
    Ok(normalized.dot(&w))
}

/// Raw, normalized and combined complexity of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub raw: Metrics,
    pub normalized: Metrics,
    pub weights: Weights,
    pub combined: f64,
}

/// Normalizes a population of raw metrics and combines each with `weights`.
pub fn profiles(raw: &[Metrics], weights: &Weights) -> Vec<ComplexityProfile> {
    profiles_within(raw, raw, weights)
}

/// Like [`profiles`], with normalization ranges taken from `population`.
pub fn profiles_within(raw: &[Metrics], population: &[Metrics], weights: &Weights) -> Vec<ComplexityProfile> {
    normalize_profiles_within(raw, population)
        .into_iter()
        .zip(raw)
        .map(|(normalized, raw)| ComplexityProfile {
            raw: *raw,
            normalized,
            weights: *weights,
            combined: normalized.dot(weights).clamp(0.0, 1.0),
        })
        .collect()
}
