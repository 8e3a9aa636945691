//! Sample selection: the complexity-calibrated loss ratio, the loss-only
//! baselines (dataset top-k, big-batch top-k, CDF^beta) and random batching,
//! plus the big-batch round that ties them together.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{estimate_pivot_with, CalibrationParams};
use crate::complexity::{profiles, profiles_within, raw_metrics_batch, Metrics, NormScope, Weights};
use crate::error::{Error, Result};
use crate::imaging::{ImageTensor, MaskGrid};

pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_RATIO: f64 = 2.0;

const DRAW_STREAM: u64 = 0x5eed_0001;
const JIANG_STREAM: u64 = 0x5eed_0002;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Loss over complexity distance, then `f` (big-batch top-k by default).
    Proposed,
    /// Top-b losses over the whole pool.
    Fan,
    /// Top-b losses over a random big batch.
    Kawaguchi,
    /// Keep with probability `CDF(loss)^beta` inside a random big batch.
    Jiang,
    Random,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proposed,
        Method::Fan,
        Method::Kawaguchi,
        Method::Jiang,
        Method::Random,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Proposed => "proposed",
            Method::Fan => "fan",
            Method::Kawaguchi => "kawaguchi",
            Method::Jiang => "jiang",
            Method::Random => "random",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::invalid("method", format!("unknown method `{s}`")))
    }
}

/// The selection function wrapped around the proposed ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionFn {
    #[default]
    TopK,
    Fan,
    Jiang,
}

impl fmt::Display for SelectionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionFn::TopK => "topk",
            SelectionFn::Fan => "fan",
            SelectionFn::Jiang => "jiang",
        })
    }
}

impl FromStr for SelectionFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topk" => Ok(SelectionFn::TopK),
            "fan" => Ok(SelectionFn::Fan),
            "jiang" => Ok(SelectionFn::Jiang),
            other => Err(Error::invalid("form", format!("unknown selection function `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    /// Mini-batch size.
    pub b: usize,
    /// `B = ceil(ratio * b)`.
    pub big_batch_ratio: f64,
    pub delta: f64,
    pub beta: f64,
    pub weights: Weights,
    pub seed: u64,
    pub form: SelectionFn,
    pub calibration: CalibrationParams,
    /// Population whose min-max ranges normalize the complexities.
    pub normalize: NormScope,
    /// Compute losses and complexities for baselines that do not need them.
    pub score_baselines: bool,
    pub parallel: bool,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            b: 16,
            big_batch_ratio: DEFAULT_RATIO,
            delta: DEFAULT_DELTA,
            beta: 1.0,
            weights: Weights::default(),
            seed: 0,
            form: SelectionFn::TopK,
            calibration: CalibrationParams::default(),
            normalize: NormScope::Batch,
            score_baselines: true,
            parallel: false,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::invalid("b", "must be at least 1"));
        }
        if !(self.big_batch_ratio >= 1.0 && self.big_batch_ratio.is_finite()) {
            return Err(Error::invalid("ratio", "must be a finite value >= 1"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta", "must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", "must be positive"));
        }
        Weights::new(self.weights.si, self.weights.eg, self.weights.tv)?;
        if !(self.calibration.eps > 0.0 && self.calibration.eps.is_finite()) {
            return Err(Error::invalid("eps", "must be positive"));
        }
        if self.calibration.min_pts == Some(0) {
            return Err(Error::invalid("min_pts", "must be at least 1"));
        }
        Ok(())
    }

    pub fn big_batch(&self) -> usize {
        // guard against 1.5 * 16 = 24.000000000000004
        ((self.big_batch_ratio * self.b as f64) - 1e-9).ceil().max(self.b as f64) as usize
    }
}

/// `max(|complexity - pivot|, delta)`.
#[inline]
pub fn proposed_denominator(complexity: f64, pivot: f64, delta: f64) -> f64 {
    (complexity - pivot).abs().max(delta)
}

/// `loss / max(|complexity - pivot|, delta)`.
pub fn score_proposed(loss: f64, complexity: f64, pivot: f64, delta: f64) -> Result<f64> {
    if !(loss >= 0.0 && loss.is_finite()) {
        return Err(Error::invalid("loss", format!("must be finite and nonnegative, got {loss}")));
    }
    if !complexity.is_finite() || !pivot.is_finite() {
        return Err(Error::invalid("complexity", "complexity and pivot must be finite"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let denominator = proposed_denominator(complexity, pivot, delta);
    assert!(denominator >= delta, "denominator {denominator} below delta floor {delta}");
    Ok(loss / denominator)
}

/// Proposed scores for a population; fails on the first non-finite score.
pub fn score_population(
    losses: &[f64],
    complexities: &[f64],
    pivot: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    if losses.len() != complexities.len() {
        return Err(Error::invalid(
            "losses",
            format!("{} losses for {} complexities", losses.len(), complexities.len()),
        ));
    }
    losses
        .iter()
        .zip(complexities)
        .enumerate()
        .map(|(id, (&l, &c))| {
            let s = score_proposed(l, c, pivot, delta)?;
            if s.is_finite() {
                Ok(s)
            } else {
                Err(Error::NonFiniteScore { id, score: s })
            }
        })
        .collect()
}

/// Indices of the `b` largest scores, largest first; ties go to the lower
/// index.
pub fn select_topk(scores: &[f64], b: usize) -> Result<Vec<usize>> {
    if b > scores.len() {
        return Err(Error::PopulationTooSmall {
            requested: b,
            available: scores.len(),
        });
    }
    if let Some((id, &score)) = scores.iter().enumerate().find(|(_, s)| s.is_nan()) {
        return Err(Error::NonFiniteScore { id, score });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let by_rank = |a: &usize, c: &usize| scores[*c].total_cmp(&scores[*a]).then(a.cmp(c));
    if b < idx.len() && b > 0 {
        idx.select_nth_unstable_by(b - 1, by_rank);
    }
    idx.truncate(b);
    idx.sort_by(by_rank);
    Ok(idx)
}

/// `CDF(s)^beta` with the empirical CDF `rank(s) / N`, ties taking the
/// maximum rank.
pub fn jiang_keep_probabilities(scores: &[f64], beta: f64) -> Vec<f64> {
    let n = scores.len() as f64;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    scores
        .iter()
        .map(|s| {
            let rank = sorted.partition_point(|v| v <= s) as f64;
            (rank / n).powf(beta)
        })
        .collect()
}

/// Independent keep/skip draws with probability `CDF(s)^beta`.
pub fn select_jiang(scores: &[f64], beta: f64, rng: &mut impl Rng) -> Vec<bool> {
    jiang_keep_probabilities(scores, beta)
        .into_iter()
        .map(|p| rng.random::<f64>() < p)
        .collect()
}

/// Batch form of the CDF^beta rule: the first `b` kept samples in population
/// order, backfilled with the rejects of highest keep probability.
pub fn jiang_batch(scores: &[f64], beta: f64, b: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if b > scores.len() {
        return Err(Error::PopulationTooSmall {
            requested: b,
            available: scores.len(),
        });
    }
    let keep = select_jiang(scores, beta, rng);
    let mut chosen: Vec<usize> = (0..scores.len()).filter(|&i| keep[i]).take(b).collect();
    if chosen.len() < b {
        let probs = jiang_keep_probabilities(scores, beta);
        let rejects: Vec<usize> = (0..scores.len()).filter(|&i| !keep[i]).collect();
        let reject_probs: Vec<f64> = rejects.iter().map(|&i| probs[i]).collect();
        let fill = select_topk(&reject_probs, b - chosen.len())?;
        chosen.extend(fill.into_iter().map(|k| rejects[k]));
    }
    Ok(chosen)
}

fn round_rng(seed: u64, stream: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(iteration);
    rng
}

/// Uniform draw of `size` distinct ids from `0..pool`, by partial
/// Fisher-Yates. The RNG depends only on `(seed, iteration)`, and a smaller
/// draw is always a prefix of a larger one.
pub fn draw_subset(pool: usize, size: usize, seed: u64, iteration: u64) -> Result<Vec<usize>> {
    if size > pool {
        return Err(Error::PopulationTooSmall {
            requested: size,
            available: pool,
        });
    }
    let mut rng = round_rng(seed, DRAW_STREAM, iteration);
    let mut ids: Vec<usize> = (0..pool).collect();
    for i in 0..size {
        let j = rng.random_range(i..pool);
        ids.swap(i, j);
    }
    ids.truncate(size);
    Ok(ids)
}

/// Data a selection round can ask for.
pub trait SamplePool {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raw complexity metrics of sample `id`; metrics with zero weight may be
    /// left at 0.
    fn raw_metrics(&self, id: usize, weights: &Weights) -> Result<Metrics>;

    /// Raw metrics for several samples. The default maps [`Self::raw_metrics`]
    /// sequentially.
    fn raw_metrics_many(&self, ids: &[usize], weights: &Weights, parallel: bool) -> Result<Vec<Metrics>>
    where
        Self: Sync,
    {
        if parallel {
            use rayon::prelude::*;
            ids.par_iter().map(|&id| self.raw_metrics(id, weights)).collect()
        } else {
            ids.iter().map(|&id| self.raw_metrics(id, weights)).collect()
        }
    }
}

/// In-memory pool of image/mask pairs.
pub struct ImagePool<'a> {
    pub samples: Vec<(&'a ImageTensor, &'a MaskGrid)>,
}

impl SamplePool for ImagePool<'_> {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn raw_metrics(&self, id: usize, weights: &Weights) -> Result<Metrics> {
        let (img, mask) = self.samples[id];
        crate::complexity::raw_metrics_weighted(img, mask, weights)
    }
}

/// A pool whose complexities are already known (used by synthetic studies).
pub struct FixedComplexityPool {
    pub complexities: Vec<f64>,
}

impl SamplePool for FixedComplexityPool {
    fn len(&self) -> usize {
        self.complexities.len()
    }

    fn raw_metrics(&self, id: usize, _weights: &Weights) -> Result<Metrics> {
        let c = self.complexities[id];
        Ok(Metrics { si: c, eg: c, tv: c })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoundTimings {
    pub score: Duration,
    pub select: Duration,
}

/// Everything one selection round saw and decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub iteration: u64,
    pub method: Method,
    pub subset_ids: Vec<usize>,
    /// Per subset position; empty when the method skipped loss evaluation.
    pub losses: Vec<f64>,
    /// Normalized combined complexity per subset position; empty when not
    /// computed.
    pub complexities: Vec<f64>,
    /// Selection values per subset position; empty when not computed.
    pub scores: Vec<f64>,
    pub chosen_ids: Vec<usize>,
    pub pivot: Option<f64>,
    #[serde(skip)]
    pub timings: RoundTimings,
}

/// Combined complexities of `ids`, min-max normalized over `ids` or, with
/// [`NormScope::Dataset`], over the whole pool.
pub fn population_complexities<P: SamplePool + Sync>(
    pool: &P,
    ids: &[usize],
    weights: &Weights,
    scope: NormScope,
    parallel: bool,
) -> Result<Vec<f64>> {
    let raw = pool.raw_metrics_many(ids, weights, parallel)?;
    let combined = match scope {
        NormScope::Batch => profiles(&raw, weights),
        NormScope::Dataset => {
            let all: Vec<usize> = (0..pool.len()).collect();
            let population = pool.raw_metrics_many(&all, weights, parallel)?;
            profiles_within(&raw, &population, weights)
        }
    };
    Ok(combined.into_iter().map(|p| p.combined).collect())
}

/// One round: draw `B` candidates, score them with `method`, keep `b`.
///
/// `loss_fn` receives pool ids and returns their losses. When `pivot` is
/// `None` and the method needs one, it is calibrated from this round's
/// complexities and stored back.
///
/// Random batching takes the first `b` drawn ids; with `score_baselines` it
/// still records losses, complexities, and uses the losses as scores.
pub fn run_selection_round<P, L>(
    pool: &P,
    config: &SelectorConfig,
    method: Method,
    iteration: u64,
    pivot: &mut Option<f64>,
    mut loss_fn: L,
) -> Result<SelectionDecision>
where
    P: SamplePool + Sync,
    L: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    config.validate()?;
    let b = config.b;
    let dataset_scope =
        method == Method::Fan || (method == Method::Proposed && config.form == SelectionFn::Fan);
    let subset_ids = if dataset_scope {
        if b > pool.len() {
            return Err(Error::PopulationTooSmall {
                requested: b,
                available: pool.len(),
            });
        }
        (0..pool.len()).collect()
    } else {
        draw_subset(pool.len(), config.big_batch(), config.seed, iteration)?
    };

    let needs_loss = method != Method::Random || config.score_baselines;
    let needs_complexity = method == Method::Proposed || config.score_baselines;

    let started = Instant::now();
    let losses = if needs_loss {
        let l = loss_fn(&subset_ids).map_err(|e| match e {
            Error::LossCallback(_) => e,
            other => Error::LossCallback(other.to_string()),
        })?;
        if l.len() != subset_ids.len() {
            return Err(Error::LossCallback(format!(
                "expected {} losses, got {}",
                subset_ids.len(),
                l.len()
            )));
        }
        l
    } else {
        Vec::new()
    };
    let complexities = if needs_complexity {
        population_complexities(pool, &subset_ids, &config.weights, config.normalize, config.parallel)?
    } else {
        Vec::new()
    };

    let scores = match method {
        Method::Proposed => {
            let p = match *pivot {
                Some(p) => p,
                None => {
                    let params = config.calibration.resolve(complexities.len());
                    let p = estimate_pivot_with(&complexities, params)?.pivot;
                    *pivot = Some(p);
                    p
                }
            };
            score_population(&losses, &complexities, p, config.delta)?
        }
        Method::Random if !needs_loss => Vec::new(),
        _ => {
            if let Some((id, &score)) = losses.iter().enumerate().find(|(_, l)| !l.is_finite()) {
                return Err(Error::NonFiniteScore { id, score });
            }
            losses.clone()
        }
    };
    let score_time = started.elapsed();

    let started = Instant::now();
    let form = match method {
        Method::Proposed => config.form,
        Method::Fan | Method::Kawaguchi => SelectionFn::TopK,
        Method::Jiang => SelectionFn::Jiang,
        Method::Random => SelectionFn::TopK,
    };
    let positions = if method == Method::Random {
        (0..b).collect()
    } else {
        match form {
            SelectionFn::TopK | SelectionFn::Fan => select_topk(&scores, b)?,
            SelectionFn::Jiang => {
                let mut rng = round_rng(config.seed, JIANG_STREAM, iteration);
                jiang_batch(&scores, config.beta, b, &mut rng)?
            }
        }
    };
    let chosen_ids = positions.iter().map(|&p| subset_ids[p]).collect();
    let select_time = started.elapsed();

    Ok(SelectionDecision {
        iteration,
        method,
        subset_ids,
        losses,
        complexities,
        scores,
        chosen_ids,
        pivot: if method == Method::Proposed { *pivot } else { None },
        timings: RoundTimings {
            score: score_time,
            select: select_time,
        },
    })
}

/// Scores a batch of image/mask pairs end to end: raw metrics, batch
/// normalization, weighting, pivot (calibrated on the batch when not given)
/// and the proposed ratio. Shared by the CLI and the C ABI.
pub fn score_samples(
    samples: &[(&ImageTensor, &MaskGrid)],
    losses: &[f64],
    weights: &Weights,
    pivot: Option<f64>,
    delta: f64,
    calibration: CalibrationParams,
) -> Result<ScoredBatch> {
    if samples.len() != losses.len() {
        return Err(Error::invalid(
            "losses",
            format!("{} losses for {} samples", losses.len(), samples.len()),
        ));
    }
    if samples.is_empty() {
        return Err(Error::invalid("samples", "must be non-empty"));
    }
    let raw = raw_metrics_batch(samples, weights, false)?;
    let complexities: Vec<f64> = profiles(&raw, weights).into_iter().map(|p| p.combined).collect();
    let pivot = match pivot {
        Some(p) => p,
        None => {
            let params = calibration.resolve(complexities.len());
            estimate_pivot_with(&complexities, params)?.pivot
        }
    };
    let scores = score_population(losses, &complexities, pivot, delta)?;
    Ok(ScoredBatch {
        complexities,
        pivot,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredBatch {
    pub complexities: Vec<f64>,
    pub pivot: f64,
    pub scores: Vec<f64>,
}
