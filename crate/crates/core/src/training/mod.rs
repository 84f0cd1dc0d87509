//! Two-round joint training.
//!
//! Each [`TrainSample`] is predicted twice: round 1 with the deviation branch
//! bypassed, round 2 with the deviation between round 2's observed tail and
//! the round-1 prediction. The per-round loss is the mean over frames of the
//! Euclidean norm of the full `K`-dimensional pose error, and the total loss
//! is the unweighted sum of both rounds. Gradients flow through the round-1
//! prediction into the deviation unless `detach_round1` is set.

pub mod adam;
pub mod gradcheck;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{dim_err, Error, Result};
use crate::nets::{BaselineKind, PredictorBundle};
use crate::rounds::{check_overlap, TrainSample};
pub use adam::{Adam, AdamConfig};
pub use gradcheck::{gradient_check, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub center_on_root: bool,
    /// Treat the round-1 prediction as a constant inside the round-2 deviation.
    pub detach_round1: bool,
    pub adam: AdamConfig,
}

impl TrainConfig {
    /// Defaults per baseline: learning rate 0.01 for the mixer, 0.0005 for
    /// the DCT graph network; 50 epochs, batches of 32.
    pub fn for_baseline(kind: BaselineKind) -> Self {
        Self {
            learning_rate: match kind {
                BaselineKind::Mixer => 0.01,
                BaselineKind::DctGcn => 0.0005,
            },
            epochs: 50,
            batch_size: 32,
            seed: 0,
            center_on_root: true,
            detach_round1: false,
            adam: AdamConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub loss_round1: f64,
    pub loss_round2: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(loss_round1: f64, loss_round2: f64) -> Self {
        Self {
            loss_round1,
            loss_round2,
            total: loss_round1 + loss_round2,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.loss_round1.is_finite() && self.loss_round2.is_finite() && self.total.is_finite()
    }
}

/// `(1/T) * sum_t ||pred_t - gt_t||_2` over full pose rows.
pub fn round_loss(pred: ArrayView2<f64>, gt: ArrayView2<f64>) -> Result<f64> {
    if pred.dim() != gt.dim() || pred.nrows() == 0 {
        return dim_err(format!("prediction {:?} vs ground truth {:?}", pred.dim(), gt.dim()));
    }
    let diff = &pred - &gt;
    let sum: f64 = diff.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum();
    Ok(sum / pred.nrows() as f64)
}

/// Loss nodes for one sample: `(round1, round2, total)`.
pub fn sample_graph(
    bundle: &PredictorBundle,
    tape: &mut Tape,
    p: &crate::nets::params::Bound,
    sample: &TrainSample,
    detach_round1: bool,
) -> Result<(Var, Var, Var)> {
    check_overlap(&sample.round1, &sample.round2)?;
    let t = bundle.layout().n_pred;
    if sample.round1.target.nrows() != t {
        return dim_err(format!(
            "sample predicts {} frames, bundle predicts {t}",
            sample.round1.target.nrows()
        ));
    }
    // losses are taken in each round's own centered frame
    let (pred1, off1) =
        bundle.predict_round_graph_centered(tape, p, sample.round1.observation.view(), None)?;
    let dev = if bundle.has_branch() {
        let tail = tape.leaf(sample.round2.observation_tail(t).to_owned());
        let v_tail = tape.row_diff(tail);
        let prev = if detach_round1 {
            tape.leaf(tape.value(pred1).clone())
        } else {
            pred1
        };
        let v_prev = tape.row_diff(prev);
        Some(tape.sub(v_tail, v_prev))
    } else {
        None
    };
    let (pred2, off2) =
        bundle.predict_round_graph_centered(tape, p, sample.round2.observation.view(), dev)?;
    let mut loss = |pred: Var, gt: &Array2<f64>, offset: Option<Array2<f64>>| {
        let gt = match offset {
            Some(off) => tape.leaf(gt - &off),
            None => tape.leaf(gt.clone()),
        };
        let diff = tape.sub(pred, gt);
        tape.mean_row_norm(diff)
    };
    let l1 = loss(pred1, &sample.round1.target, off1);
    let l2 = loss(pred2, &sample.round2.target, off2);
    let total = tape.add(l1, l2);
    Ok((l1, l2, total))
}

/// Forward-only loss of one sample.
pub fn train_sample_loss(bundle: &PredictorBundle, sample: &TrainSample) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let p = bundle.params.bind(&mut tape);
    let (l1, l2, _) = sample_graph(bundle, &mut tape, &p, sample, false)?;
    Ok(LossBreakdown::new(tape.scalar(l1), tape.scalar(l2)))
}

/// Loss and per-parameter gradients of the total loss for one sample.
pub fn sample_gradients(
    bundle: &PredictorBundle,
    sample: &TrainSample,
    detach_round1: bool,
) -> Result<(LossBreakdown, Vec<Array2<f64>>)> {
    let mut tape = Tape::new();
    let p = bundle.params.bind(&mut tape);
    let (l1, l2, total) = sample_graph(bundle, &mut tape, &p, sample, detach_round1)?;
    let grads = tape.backward(total);
    Ok((
        LossBreakdown::new(tape.scalar(l1), tape.scalar(l2)),
        bundle.params.collect_grads(&p, &grads),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: PredictorBundle,
    pub history: Vec<EpochLoss>,
}

/// Trains with Adam on batches of per-sample-averaged total losses.
///
/// Results do not depend on the rayon pool size: per-sample gradients are
/// computed in parallel and reduced in sample order.
pub fn train(
    mut bundle: PredictorBundle,
    samples: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("no training samples".into()));
    }
    bundle.config.center_on_root = cfg.center_on_root;
    let mut adam = Adam::new(&bundle.params, cfg.learning_rate, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<(LossBreakdown, Vec<Array2<f64>>)> = batch
                .par_iter()
                .map(|&i| sample_gradients(&bundle, &samples[i], cfg.detach_round1))
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grads: Vec<Array2<f64>> =
                bundle.params.iter().map(|p| Array2::zeros(p.value.dim())).collect();
            let mut batch_loss = LossBreakdown::default();
            for (loss, g) in &results {
                batch_loss.loss_round1 += loss.loss_round1;
                batch_loss.loss_round2 += loss.loss_round2;
                batch_loss.total += loss.total;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    acc.scaled_add(scale, gi);
                }
            }
            if !batch_loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx + 1,
                    loss_round1: batch_loss.loss_round1 * scale,
                    loss_round2: batch_loss.loss_round2 * scale,
                });
            }
            sum.loss_round1 += batch_loss.loss_round1;
            sum.loss_round2 += batch_loss.loss_round2;
            sum.total += batch_loss.total;
            adam.step(&mut bundle.params, &grads);
        }
        let n = samples.len() as f64;
        history.push(EpochLoss {
            epoch,
            loss: LossBreakdown {
                loss_round1: sum.loss_round1 / n,
                loss_round2: sum.loss_round2 / n,
                total: sum.total / n,
            },
        });
    }
    Ok(TrainOutcome { bundle, history })
}

/// Loss history as CSV: `epoch,loss_round1,loss_round2,total`.
pub fn history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,loss_round1,loss_round2,total\n");
    for e in history {
        out.push_str(&format!(
            "{},{:?},{:?},{:?}\n",
            e.epoch, e.loss.loss_round1, e.loss.loss_round2, e.loss.total
        ));
    }
    out
}
