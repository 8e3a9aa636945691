//! Analysis experiments built on the trainer and the selectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::model::ToyInpainter;
use super::train::{train, TrainConfig, TrainRecord};
use crate::calibration::estimate_pivot;
use crate::complexity::total_variation;
use crate::error::{Error, Result};
use crate::selection::{draw_subset, score_population, select_topk, Method};

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub sample: usize,
    pub loss: f64,
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStudy {
    pub rows: Vec<CorrelationRow>,
    pub pearson: Option<f64>,
}

/// Per-sample training loss against raw TV complexity under the masks of
/// `epoch`.
pub fn correlation_study(dataset: &Dataset, model: &ToyInpainter, epoch: u64) -> Result<CorrelationStudy> {
    let rows = (0..dataset.len())
        .map(|id| {
            let img = &dataset.images[id];
            let mask = dataset.mask_for(id, epoch)?;
            let pred = model.forward(img, &mask)?;
            Ok(CorrelationRow {
                sample: id,
                loss: model.loss(&pred, img, &mask),
                tv: total_variation(img.gray(), &mask)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    let tvs: Vec<f64> = rows.iter().map(|r| r.tv).collect();
    let pearson = pearson(&losses, &tvs);
    Ok(CorrelationStudy { rows, pearson })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub big_batch: usize,
    pub early_test_l1: f64,
    pub final_test_l1: f64,
    /// Median wall time per iteration.
    pub seconds_per_iteration: f64,
}

/// Number of leading iterations averaged into `early_test_l1`.
pub const EARLY_PHASE: usize = 500;

/// Trains with `method` at each big-batch ratio, holding every seed fixed.
/// Losses come from full-length runs; the time column comes from
/// [`timing_runs`] so the ratios are timed side by side.
pub fn sweep_ratio(
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
    method: Method,
    ratios: &[f64],
) -> Result<Vec<SweepRow>> {
    if let Some(r) = ratios.iter().find(|r| !(1.0..=4.0).contains(*r)) {
        return Err(Error::invalid("ratios", format!("{r} is outside [1, 4]")));
    }
    let configs: Vec<TrainConfig> = ratios
        .iter()
        .map(|&ratio| {
            let mut cfg = config.clone();
            cfg.selector.big_batch_ratio = ratio;
            cfg
        })
        .collect();
    let runs: Vec<(TrainConfig, Method)> = configs.iter().map(|c| (c.clone(), method)).collect();
    let timings = timing_runs(train_set, test_set, &runs, SWEEP_TIMING_ITERATIONS)?;
    configs
        .iter()
        .zip(timings)
        .map(|(cfg, timing)| {
            let out = train(train_set, test_set, cfg, method)?;
            Ok(SweepRow {
                ratio: cfg.selector.big_batch_ratio,
                big_batch: cfg.selector.big_batch(),
                early_test_l1: out.mean_test_loss_before(EARLY_PHASE.min(cfg.iterations)),
                final_test_l1: out.final_test_loss,
                seconds_per_iteration: timing.total_seconds,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: Method,
    pub score_seconds: f64,
    pub select_seconds: f64,
    pub update_seconds: f64,
    pub total_seconds: f64,
}

/// Iterations discarded at the start of every timing block.
pub const TIMING_WARMUP: usize = 10;
/// Measured iterations per block; runs take turns block by block.
pub const TIMING_BLOCK: usize = 50;
const SWEEP_TIMING_ITERATIONS: usize = 300;

/// Median per-phase seconds per iteration for each `(config, method)` run.
///
/// Runs take turns in blocks of [`TIMING_BLOCK`] iterations, each block a
/// fresh training run with its own warm-up and a block-specific seed, so
/// slow drift in machine speed hits every run alike. Evaluation is kept out
/// of the measured window and baselines skip scoring they do not need.
pub fn timing_runs(
    train_set: &Dataset,
    test_set: &Dataset,
    runs: &[(TrainConfig, Method)],
    iterations: usize,
) -> Result<Vec<TimingRow>> {
    if iterations < 50 {
        return Err(Error::invalid("iterations", "timing needs at least 50 measured iterations"));
    }
    let blocks = iterations.div_ceil(TIMING_BLOCK);
    let mut measured: Vec<Vec<TrainRecord>> = vec![Vec::new(); runs.len()];
    for block in 0..blocks {
        for ((config, method), records) in runs.iter().zip(&mut measured) {
            let mut cfg = config.clone();
            cfg.iterations = TIMING_BLOCK + TIMING_WARMUP;
            cfg.test_every = cfg.iterations + 1;
            cfg.keep_decisions = false;
            cfg.selector.score_baselines = false;
            cfg.selector.seed = config.selector.seed.wrapping_add(block as u64);
            let out = train(train_set, test_set, &cfg, *method)?;
            records.extend(out.records.into_iter().skip(TIMING_WARMUP));
        }
    }
    Ok(runs
        .iter()
        .zip(&measured)
        .map(|((_, method), records)| {
            let col = |f: fn(&TrainRecord) -> f64| median(&records.iter().map(f).collect::<Vec<_>>());
            TimingRow {
                method: *method,
                score_seconds: col(|r| r.score_seconds),
                select_seconds: col(|r| r.select_seconds),
                update_seconds: col(|r| r.update_seconds),
                total_seconds: col(|r| r.total_seconds),
            }
        })
        .collect())
}

/// [`timing_runs`] for several methods under one configuration.
pub fn timing_study(
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
    methods: &[Method],
    iterations: usize,
) -> Result<Vec<TimingRow>> {
    let runs: Vec<(TrainConfig, Method)> = methods.iter().map(|&m| (config.clone(), m)).collect();
    timing_runs(train_set, test_set, &runs, iterations)
}

/// Relative extra time per iteration of `method` over `baseline`.
pub fn overhead(rows: &[TimingRow], method: Method, baseline: Method) -> Option<f64> {
    let find = |m| rows.iter().find(|r| r.method == m).map(|r| r.total_seconds);
    let (t, base) = (find(method)?, find(baseline)?);
    Some(t / base - 1.0)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub pool_size: usize,
    pub rounds: usize,
    pub b: usize,
    pub big_batch_ratio: f64,
    /// Loss noise standard deviation as a fraction of the complexity range.
    pub noise: f64,
    pub delta: f64,
    pub seed: u64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig {
            pool_size: 1024,
            rounds: 100,
            b: 16,
            big_batch_ratio: 2.0,
            noise: 0.05,
            delta: crate::selection::DEFAULT_DELTA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub pivot: f64,
    /// Mean number of complexity deciles hit by one round's chosen samples.
    pub loss_only_coverage: f64,
    pub proposed_coverage: f64,
    pub random_coverage: f64,
    /// Share of all chosen samples falling in each decile, per method.
    pub loss_only_histogram: [f64; 10],
    pub proposed_histogram: [f64; 10],
}

/// Synthetic pool with complexity uniform on `[0, 1]` and
/// `loss = max(0, complexity + N(0, (noise * range)^2))`.
pub fn synthetic_bias_pool(config: &BiasConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let complexities: Vec<f64> = (0..config.pool_size).map(|_| rng.random::<f64>()).collect();
    let (lo, hi) = complexities
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let normal = Normal::new(0.0, config.noise * (hi - lo))
        .map_err(|e| Error::invalid("noise", e.to_string()))?;
    let losses = complexities
        .iter()
        .map(|&c| (c + normal.sample(&mut rng)).max(0.0))
        .collect();
    Ok((complexities, losses))
}

/// Decile (0..10) of each value by rank within the population.
pub fn deciles(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0; values.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = (rank * 10 / values.len()).min(9);
    }
    out
}

/// Compares which complexity deciles loss-only big-batch top-k, the proposed
/// ratio and random batching draw from, on a pool where loss tracks
/// complexity. The pivot is calibrated once over the whole pool.
pub fn selection_bias_study(config: &BiasConfig) -> Result<BiasReport> {
    let (complexities, losses) = synthetic_bias_pool(config)?;
    let pivot = estimate_pivot(&complexities)?.pivot;
    let decile = deciles(&complexities);
    let big = ((config.big_batch_ratio * config.b as f64) - 1e-9).ceil() as usize;

    let mut coverage = [0.0f64; 3];
    let mut hist = [[0.0f64; 10]; 2];
    for round in 0..config.rounds {
        let subset = draw_subset(complexities.len(), big, config.seed, round as u64)?;
        let l: Vec<f64> = subset.iter().map(|&i| losses[i]).collect();
        let c: Vec<f64> = subset.iter().map(|&i| complexities[i]).collect();
        let proposed = score_population(&l, &c, pivot, config.delta)?;
        let picks = [
            select_topk(&l, config.b)?,
            select_topk(&proposed, config.b)?,
            (0..config.b).collect(),
        ];
        for (k, positions) in picks.iter().enumerate() {
            let mut hit = [false; 10];
            for &p in positions {
                let d = decile[subset[p]];
                hit[d] = true;
                if k < 2 {
                    hist[k][d] += 1.0;
                }
            }
            coverage[k] += hit.iter().filter(|&&h| h).count() as f64;
        }
    }
    let rounds = config.rounds as f64;
    let total = rounds * config.b as f64;
    hist.iter_mut().flatten().for_each(|h| *h /= total);
    Ok(BiasReport {
        pivot,
        loss_only_coverage: coverage[0] / rounds,
        proposed_coverage: coverage[1] / rounds,
        random_coverage: coverage[2] / rounds,
        loss_only_histogram: hist[0],
        proposed_histogram: hist[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_extremes() {
        let x = [0.1, 0.5, 0.2, 0.9];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| 1.0 - v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[0.3; 4]), None);
    }

    #[test]
    fn deciles_partition_evenly() {
        let v: Vec<f64> = (0..100).rev().map(|i| i as f64).collect();
        let d = deciles(&v);
        assert_eq!(d[0], 9);
        assert_eq!(d[99], 0);
        for k in 0..10 {
            assert_eq!(d.iter().filter(|&&x| x == k).count(), 10);
        }
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn loss_only_prefers_high_deciles() {
        let r = selection_bias_study(&BiasConfig { rounds: 30, ..Default::default() }).unwrap();
        let low: f64 = r.loss_only_histogram[..5].iter().sum();
        let high: f64 = r.loss_only_histogram[5..].iter().sum();
        assert!(high > 0.85, "{r:?}");
        assert!(low < 0.15);
        let proposed_low: f64 = r.proposed_histogram[..5].iter().sum();
        assert!(proposed_low > 0.3, "{r:?}");
    }
}
