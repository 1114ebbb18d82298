use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{make_batch, Dataset, GraphBatch};
use crate::model::{Model, ModelConfig};
use crate::nn::{adam_step, lr_at_epoch, AdamState, Hyper};
use crate::real::Real;
use crate::tensor::{Mode, Tape};

/// Graphs per batch when only evaluating.
const EVAL_BATCH: usize = 256;

/// SplitMix64 finalizer over the combined inputs.
pub fn mix_seed(seed: u64, fold: u64, epoch: u64) -> u64 {
    let mut z = seed
        ^ fold.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ epoch.wrapping_mul(0xd1b5_4a32_d192_ed03).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Initialization seed of fold `fold`.
pub fn init_seed(seed: u64, fold: usize) -> u64 {
    mix_seed(seed, fold as u64, u64::MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's minibatches.
    pub loss_total: f64,
    pub loss_gc: f64,
    /// `None` when the decoder is not evaluated.
    pub loss_lfr: Option<f64>,
    /// Eval-mode accuracy on the training graphs after the epoch.
    pub train_acc: f64,
    pub lr: f64,
    /// Wall-clock seconds since training started.
    pub seconds: f64,
}

/// Extremes of the layer-attention weights over every forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaStats {
    /// Largest `|sum_k alpha_k - 1|` of any graph.
    pub max_sum_error: f64,
    pub min_weight: f64,
    pub passes: usize,
}

impl Default for AlphaStats {
    fn default() -> Self {
        AlphaStats {
            max_sum_error: 0.0,
            min_weight: f64::INFINITY,
            passes: 0,
        }
    }
}

impl AlphaStats {
    fn observe<T: Real>(&mut self, alpha: &ndarray::Array2<T>) {
        self.passes += 1;
        for row in alpha.rows() {
            let sum: f64 = row.iter().map(|v| v.to_f64_lossy()).sum();
            self.max_sum_error = self.max_sum_error.max((sum - 1.0).abs());
            for v in row {
                self.min_weight = self.min_weight.min(v.to_f64_lossy());
            }
        }
    }

    pub fn merge(&mut self, other: &AlphaStats) {
        self.max_sum_error = self.max_sum_error.max(other.max_sum_error);
        self.min_weight = self.min_weight.min(other.min_weight);
        self.passes += other.passes;
    }

    /// Rows sum to one within `tol` and no weight is negative.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.max_sum_error <= tol && self.min_weight >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub fold: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Test accuracy after each epoch; empty without test graphs.
    pub test_curve: Vec<f64>,
    pub final_train_acc: f64,
    pub final_test_acc: Option<f64>,
    /// `(epoch, accuracy)` of the best test epoch, first one on ties.
    pub best_test: Option<(usize, f64)>,
    pub alpha: AlphaStats,
    pub model: ModelConfig,
    pub hyper: Hyper,
}

/// Splits `order` into consecutive batches of `size`; a final batch with a
/// single graph joins the one before it.
pub fn minibatches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size.max(1)).collect();
    if out.len() >= 2 && out[out.len() - 1].len() < 2 {
        let n = out.len();
        let start = order.len() - out[n - 2].len() - out[n - 1].len();
        out.truncate(n - 2);
        out.push(&order[start..]);
    }
    out
}

fn batch_of<T: Real>(ds: &Dataset, idx: &[usize]) -> Result<GraphBatch<T>> {
    let graphs: Vec<_> = idx.iter().map(|&i| &ds.graphs[i]).collect();
    make_batch(&graphs, ds.feature_kind)
}

/// Eval-mode accuracy: the fraction of `batches`' graphs whose arg-max logit
/// equals the label (first maximum on ties).
pub fn accuracy<T: Real>(
    model: &mut Model<T>,
    batches: &[GraphBatch<T>],
    config: &ModelConfig,
    alpha: &mut AlphaStats,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut correct, mut total) = (0usize, 0usize);
    for batch in batches {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, batch, config, Mode::Eval, &mut rng)?;
        if let Some(a) = out.alpha {
            alpha.observe(tape.value(a));
        }
        for (row, &label) in tape.value(out.class_logits).rows().into_iter().zip(batch.labels.iter()) {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            correct += usize::from(best == label);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    Ok(correct as f64 / total as f64)
}

/// Trains one model on `train` and evaluates it on `test` (which may be
/// empty) after every epoch. Returns the report and the trained model.
///
/// Epoch `e` shuffles the training graphs and draws dropout masks from
/// `mix_seed(hyper.seed, fold, e)`; parameters start from
/// `init_seed(hyper.seed, fold)`.
pub fn train_fold<T: Real>(
    ds: &Dataset,
    train: &[usize],
    test: &[usize],
    config: &ModelConfig,
    hyper: &Hyper,
    fold: usize,
) -> Result<(TrainReport, Model<T>)> {
    hyper.validate()?;
    config.validate()?;
    if train.len() < 2 {
        return Err(Error::invalid("training needs at least two graphs"));
    }
    if let Some(i) = train.iter().chain(test).find(|&&i| i >= ds.len()) {
        return Err(Error::Index { op: "train_fold", index: *i, bound: ds.len() });
    }
    if train.iter().any(|i| test.contains(i)) {
        return Err(Error::invalid("training and test graphs overlap"));
    }
    let start = Instant::now();
    let seed = init_seed(hyper.seed, fold);
    let mut model = Model::<T>::init(config, seed)?;
    let mut adam = AdamState::new(model.store(), hyper.adam);
    let eval_train: Vec<GraphBatch<T>> = train.chunks(EVAL_BATCH).map(|c| batch_of(ds, c)).collect::<Result<_>>()?;
    let eval_test: Vec<GraphBatch<T>> = test.chunks(EVAL_BATCH).map(|c| batch_of(ds, c)).collect::<Result<_>>()?;
    let mut alpha = AlphaStats::default();
    let mut epochs = Vec::with_capacity(hyper.epochs);
    let mut test_curve = Vec::new();
    let mut order = train.to_vec();
    for epoch in 0..hyper.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(hyper.seed, fold as u64, epoch as u64));
        order.copy_from_slice(train);
        order.shuffle(&mut rng);
        let lr = lr_at_epoch(hyper, epoch);
        let (mut total, mut gc, mut lfr, mut n) = (0.0, 0.0, 0.0, 0usize);
        let mut saw_lfr = false;
        for idx in minibatches(&order, hyper.batch_size) {
            let batch = batch_of::<T>(ds, idx)?;
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &batch, config, Mode::Train, &mut rng)?;
            if let Some(a) = out.alpha {
                alpha.observe(tape.value(a));
            }
            total += tape.item(out.loss).to_f64_lossy();
            gc += tape.item(out.loss_gc).to_f64_lossy();
            if let Some(l) = out.loss_lfr {
                lfr += tape.item(l).to_f64_lossy();
                saw_lfr = true;
            }
            n += 1;
            let grads = out.bound.grads(model.store(), &tape.backward(out.loss)?);
            adam_step(model.store_mut(), &grads, &mut adam, lr)?;
        }
        let train_acc = accuracy(&mut model, &eval_train, config, &mut alpha)?;
        if !eval_test.is_empty() {
            test_curve.push(accuracy(&mut model, &eval_test, config, &mut alpha)?);
        }
        let nf = n as f64;
        epochs.push(EpochRecord {
            epoch,
            loss_total: total / nf,
            loss_gc: gc / nf,
            loss_lfr: saw_lfr.then_some(lfr / nf),
            train_acc,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let best_test = test_curve
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (e, &a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((e, a)),
        });
    let report = TrainReport {
        fold,
        seed,
        final_train_acc: epochs.last().map_or(0.0, |e| e.train_acc),
        final_test_acc: test_curve.last().copied(),
        best_test,
        epochs,
        test_curve,
        alpha,
        model: config.clone(),
        hyper: hyper.clone(),
    };
    Ok((report, model))
}
