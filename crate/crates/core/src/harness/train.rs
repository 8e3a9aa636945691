use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::model::{Prediction, ToyInpainter};
use crate::complexity::{raw_metrics_weighted, Metrics, Weights};
use crate::error::{Error, Result};
use crate::imaging::{ImageTensor, MaskGrid};
use crate::selection::{run_selection_round, Method, SamplePool, SelectionDecision, SelectorConfig};

const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub kernel_size: usize,
    /// Test loss is evaluated every this many iterations and after the last.
    pub test_every: usize,
    pub selector: SelectorConfig,
    /// Keep every round's [`SelectionDecision`] in the outcome.
    pub keep_decisions: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            learning_rate: 0.002,
            kernel_size: 5,
            test_every: 20,
            selector: SelectorConfig::default(),
            keep_decisions: false,
        }
    }
}

/// One training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub method: Method,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub score_seconds: f64,
    pub select_seconds: f64,
    pub update_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<TrainRecord>,
    pub decisions: Vec<SelectionDecision>,
    pub model: ToyInpainter,
    pub final_test_loss: f64,
}

impl TrainOutcome {
    /// Mean of the test losses recorded before iteration `until`.
    pub fn mean_test_loss_before(&self, until: usize) -> f64 {
        let v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.iteration < until)
            .filter_map(|r| r.test_loss)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Training samples under the current epoch's masks, with raw complexity
/// cached per sample for the epoch (it depends only on image and mask).
pub(crate) struct EpochPool<'a> {
    images: &'a [ImageTensor],
    pub(crate) masks: Vec<MaskGrid>,
    weights: Weights,
    cache: Vec<OnceLock<Metrics>>,
}

impl<'a> EpochPool<'a> {
    pub(crate) fn new(images: &'a [ImageTensor], masks: Vec<MaskGrid>, weights: Weights) -> Self {
        let cache = (0..images.len()).map(|_| OnceLock::new()).collect();
        EpochPool {
            images,
            masks,
            weights,
            cache,
        }
    }
}

impl SamplePool for EpochPool<'_> {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn raw_metrics(&self, id: usize, weights: &Weights) -> Result<Metrics> {
        if *weights != self.weights {
            return raw_metrics_weighted(&self.images[id], &self.masks[id], weights);
        }
        if let Some(m) = self.cache[id].get() {
            return Ok(*m);
        }
        let m = raw_metrics_weighted(&self.images[id], &self.masks[id], weights)?;
        Ok(*self.cache[id].get_or_init(|| m))
    }
}

/// Mean clamped masked L1 over a fixed test split.
pub fn evaluate(model: &ToyInpainter, images: &[ImageTensor], masks: &[MaskGrid]) -> Result<f64> {
    let total: f64 = images
        .iter()
        .zip(masks)
        .map(|(img, m)| model.eval_loss(img, m))
        .sum::<Result<f64>>()?;
    Ok(total / images.len() as f64)
}

/// Trains the toy inpainter with `method` choosing each mini-batch.
///
/// The test split only ever feeds [`evaluate`]; it is never scored or used in
/// an update.
pub fn train(train_set: &Dataset, test_set: &Dataset, config: &TrainConfig, method: Method) -> Result<TrainOutcome> {
    config.selector.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::invalid("dataset", "train and test splits must be non-empty"));
    }
    let needed = config.selector.big_batch();
    if train_set.len() < needed {
        return Err(Error::PopulationTooSmall {
            requested: needed,
            available: train_set.len(),
        });
    }
    let test_every = config.test_every.max(1);
    let channels = train_set.images[0].channels();
    let mut model = ToyInpainter::new(config.kernel_size, channels, config.learning_rate)?;
    let test_masks = test_set.masks_for_epoch(0)?;

    let b = config.selector.b;
    let iters_per_epoch = (train_set.len() / b).max(1);
    let mut records = Vec::with_capacity(config.iterations);
    let mut decisions = Vec::new();
    let mut pool: Option<EpochPool> = None;
    let mut pivot = None;
    let mut initial_loss = None;

    for iteration in 0..config.iterations {
        if iteration % iters_per_epoch == 0 {
            let epoch = (iteration / iters_per_epoch) as u64;
            let masks = train_set.masks_for_epoch(epoch)?;
            pool = Some(EpochPool::new(&train_set.images, masks, config.selector.weights));
            pivot = None;
        }
        let pool = pool.as_ref().expect("pool initialised at epoch start");

        let test_loss = if iteration % test_every == 0 {
            Some(evaluate(&model, &test_set.images, &test_masks)?)
        } else {
            None
        };

        let started = Instant::now();
        let mut stash: HashMap<usize, Prediction> = HashMap::new();
        let decision = run_selection_round(pool, &config.selector, method, iteration as u64, &mut pivot, |ids| {
            ids.iter()
                .map(|&id| {
                    let (img, mask) = (&train_set.images[id], &pool.masks[id]);
                    let pred = model.forward(img, mask)?;
                    let loss = model.loss(&pred, img, mask);
                    stash.insert(id, pred);
                    Ok(loss)
                })
                .collect()
        })?;

        let update_started = Instant::now();
        let mut grad = vec![0.0; model.param_count()];
        let mut train_loss = 0.0;
        for &id in &decision.chosen_ids {
            let (img, mask) = (&train_set.images[id], &pool.masks[id]);
            let pred = match stash.remove(&id) {
                Some(p) => p,
                None => model.forward(img, mask)?,
            };
            train_loss += model.loss(&pred, img, mask);
            for (g, v) in grad.iter_mut().zip(model.gradient(&pred, img, mask)?) {
                *g += v;
            }
        }
        let n = decision.chosen_ids.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        train_loss /= n;
        model.apply(&grad);
        let update_time = update_started.elapsed();
        let total_time = started.elapsed();

        let initial = *initial_loss.get_or_insert(train_loss);
        if train_loss > DIVERGENCE_FACTOR * initial {
            return Err(Error::Diverged {
                iteration,
                loss: train_loss,
                initial,
            });
        }

        records.push(TrainRecord {
            iteration,
            method,
            train_loss,
            test_loss,
            score_seconds: decision.timings.score.as_secs_f64(),
            select_seconds: decision.timings.select.as_secs_f64(),
            update_seconds: update_time.as_secs_f64(),
            total_seconds: total_time.as_secs_f64(),
        });
        if config.keep_decisions {
            decisions.push(decision);
        }
    }

    let final_test_loss = evaluate(&model, &test_set.images, &test_masks)?;
    Ok(TrainOutcome {
        records,
        decisions,
        model,
        final_test_loss,
    })
}
