//! Multi-round consecutive evaluation.
//!
//! Every round observes ground truth. With feedback on, round `r >= 2`
//! receives the deviation between its observed tail and the model's own
//! round `r-1` prediction; with feedback off the branch is bypassed at every
//! round. MPJPE is the mean over joints of the per-joint Euclidean error at a
//! given predicted frame.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::deviation::{compute_deviation, Deviation};
use crate::error::{dim_err, Error, Result};
use crate::nets::PredictorBundle;
use crate::rounds::{RoundSample, TestSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeedbackMode {
    DeviationOn,
    DeviationOff,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::DeviationOn => "deviation_on",
            FeedbackMode::DeviationOff => "deviation_off",
        }
    }
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deviation_on" => Ok(FeedbackMode::DeviationOn),
            "deviation_off" => Ok(FeedbackMode::DeviationOff),
            other => Err(Error::Config(format!("unknown feedback mode {other:?}"))),
        }
    }
}

/// Anything that predicts one round. Real models only read
/// `round.observation`; the oracle stub reads the target to self-test the
/// harness.
pub trait RoundPredictor: Sync {
    fn has_branch(&self) -> bool;
    fn dims_per_joint(&self) -> usize;
    fn predict(&self, round: &RoundSample, dev: Option<&Deviation>) -> Result<Array2<f64>>;
}

impl RoundPredictor for PredictorBundle {
    fn has_branch(&self) -> bool {
        PredictorBundle::has_branch(self)
    }

    fn dims_per_joint(&self) -> usize {
        self.config.dims_per_joint
    }

    fn predict(&self, round: &RoundSample, dev: Option<&Deviation>) -> Result<Array2<f64>> {
        self.predict_round(round.observation.view(), dev)
    }
}

/// Returns the ground-truth target; every error is zero.
#[derive(Debug, Clone, Copy)]
pub struct OracleStub {
    pub dims_per_joint: usize,
}

impl RoundPredictor for OracleStub {
    fn has_branch(&self) -> bool {
        false
    }

    fn dims_per_joint(&self) -> usize {
        self.dims_per_joint
    }

    fn predict(&self, round: &RoundSample, _dev: Option<&Deviation>) -> Result<Array2<f64>> {
        Ok(round.target.clone())
    }
}

/// Mean per-joint position error at 1-based `frame`.
pub fn mpjpe(pred: ArrayView2<f64>, gt: ArrayView2<f64>, dims_per_joint: usize, frame: usize) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return dim_err(format!("prediction {:?} vs ground truth {:?}", pred.dim(), gt.dim()));
    }
    let k = pred.ncols();
    if dims_per_joint == 0 || !k.is_multiple_of(dims_per_joint) || k == 0 {
        return dim_err(format!("pose dimension {k} is not a multiple of {dims_per_joint}"));
    }
    if frame == 0 || frame > pred.nrows() {
        return dim_err(format!("frame {frame} outside 1..={}", pred.nrows()));
    }
    let p = pred.row(frame - 1);
    let g = gt.row(frame - 1);
    let joints = k / dims_per_joint;
    let total: f64 = (0..joints)
        .map(|j| {
            (0..dims_per_joint)
                .map(|d| (p[j * dims_per_joint + d] - g[j * dims_per_joint + d]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / joints as f64)
}

/// Per-round predictions and the deviations that were fed in.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pub predictions: Vec<Array2<f64>>,
    /// `deviations[r]` is what round `r+1` received (`None` when bypassed).
    pub deviations: Vec<Option<Deviation>>,
}

pub fn rollout_sample(
    predictor: &impl RoundPredictor,
    sample: &TestSample,
    mode: FeedbackMode,
) -> Result<RolloutTrace> {
    if sample.rounds.len() < 2 {
        return Err(Error::Config(format!(
            "rollout needs at least 2 rounds, sample has {}",
            sample.rounds.len()
        )));
    }
    let mut predictions: Vec<Array2<f64>> = Vec::with_capacity(sample.rounds.len());
    let mut deviations = Vec::with_capacity(sample.rounds.len());
    for (r, round) in sample.rounds.iter().enumerate() {
        let dev = match (predictions.last(), mode) {
            (Some(prev), FeedbackMode::DeviationOn) if predictor.has_branch() => {
                let t = prev.nrows();
                Some(compute_deviation(round.observation_tail(t), prev.view(), r)?)
            }
            _ => None,
        };
        predictions.push(predictor.predict(round, dev.as_ref())?);
        deviations.push(dev);
    }
    Ok(RolloutTrace {
        predictions,
        deviations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutReport {
    pub mode: FeedbackMode,
    pub n_samples: usize,
    /// round -> [(testpoint frame, mean MPJPE over samples)]
    pub per_round: BTreeMap<usize, Vec<(usize, f64)>>,
    /// round -> mean over testpoints
    pub per_round_avg: BTreeMap<usize, f64>,
}

impl RolloutReport {
    /// Mean of the per-round averages over rounds `from..=to`.
    pub fn mean_over_rounds(&self, from: usize, to: usize) -> f64 {
        let vals: Vec<f64> = (from..=to).filter_map(|r| self.per_round_avg.get(&r).copied()).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Per-sample error table `[round][testpoint]`.
fn sample_errors(
    predictor: &impl RoundPredictor,
    sample: &TestSample,
    testpoints: &[usize],
    mode: FeedbackMode,
) -> Result<Vec<Vec<f64>>> {
    let trace = rollout_sample(predictor, sample, mode)?;
    sample
        .rounds
        .iter()
        .zip(&trace.predictions)
        .map(|(round, pred)| {
            testpoints
                .iter()
                .map(|&f| mpjpe(pred.view(), round.target.view(), predictor.dims_per_joint(), f))
                .collect()
        })
        .collect()
}

pub fn evaluate(
    predictor: &impl RoundPredictor,
    samples: &[TestSample],
    testpoints: &[usize],
    mode: FeedbackMode,
) -> Result<RolloutReport> {
    if samples.is_empty() {
        return Err(Error::Empty("no test samples".into()));
    }
    if testpoints.is_empty() {
        return Err(Error::Config("no testpoints".into()));
    }
    let rounds = samples[0].rounds.len();
    let t = samples[0].rounds[0].target.nrows();
    if samples.iter().any(|s| s.rounds.len() != rounds) {
        return Err(Error::Config("test samples have differing round counts".into()));
    }
    if let Some(&bad) = testpoints.iter().find(|&&f| f == 0 || f > t) {
        return Err(Error::Config(format!("testpoint {bad} outside 1..={t}")));
    }
    let tables: Vec<Vec<Vec<f64>>> = samples
        .par_iter()
        .map(|s| sample_errors(predictor, s, testpoints, mode))
        .collect::<Result<_>>()?;
    let n = samples.len() as f64;
    let mut per_round = BTreeMap::new();
    let mut per_round_avg = BTreeMap::new();
    for r in 0..rounds {
        let row: Vec<(usize, f64)> = testpoints
            .iter()
            .enumerate()
            .map(|(i, &f)| (f, tables.iter().map(|tab| tab[r][i]).sum::<f64>() / n))
            .collect();
        let avg = row.iter().map(|(_, e)| e).sum::<f64>() / row.len() as f64;
        per_round.insert(r + 1, row);
        per_round_avg.insert(r + 1, avg);
    }
    Ok(RolloutReport {
        mode,
        n_samples: samples.len(),
        per_round,
        per_round_avg,
    })
}

/// Evaluates each label group separately; unlabeled samples form the group
/// `"all"`. Groups come back sorted by label.
pub fn evaluate_grouped(
    predictor: &impl RoundPredictor,
    samples: &[TestSample],
    testpoints: &[usize],
    mode: FeedbackMode,
) -> Result<Vec<(String, RolloutReport)>> {
    let mut groups: BTreeMap<String, Vec<TestSample>> = BTreeMap::new();
    for s in samples {
        let key = s.label.clone().unwrap_or_else(|| "all".to_string());
        groups.entry(key).or_default().push(s.clone());
    }
    groups
        .into_iter()
        .map(|(label, group)| Ok((label, evaluate(predictor, &group, testpoints, mode)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    pub deviation_on: RolloutReport,
    pub deviation_off: RolloutReport,
    /// round -> `(off - on) / off` of the per-round averages.
    pub improvement: BTreeMap<usize, f64>,
}

impl ModeComparison {
    pub fn mean_improvement(&self, from: usize, to: usize) -> f64 {
        let vals: Vec<f64> = (from..=to).filter_map(|r| self.improvement.get(&r).copied()).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

pub fn compare_modes(
    predictor: &impl RoundPredictor,
    samples: &[TestSample],
    testpoints: &[usize],
) -> Result<ModeComparison> {
    let on = evaluate(predictor, samples, testpoints, FeedbackMode::DeviationOn)?;
    let off = evaluate(predictor, samples, testpoints, FeedbackMode::DeviationOff)?;
    let improvement = off
        .per_round_avg
        .iter()
        .map(|(&r, &o)| {
            let gain = if o > 0.0 { (o - on.per_round_avg[&r]) / o } else { 0.0 };
            (r, gain)
        })
        .collect();
    Ok(ModeComparison {
        deviation_on: on,
        deviation_off: off,
        improvement,
    })
}

/// Report rows: `mode,group_label,round,testpoint_frame,mpjpe,n_samples`.
pub fn report_csv(rows: &[(String, String, &RolloutReport)]) -> String {
    let mut out = String::from("mode,group_label,round,testpoint_frame,mpjpe,n_samples\n");
    for (mode, group, report) in rows {
        for (round, points) in &report.per_round {
            for (frame, err) in points {
                out.push_str(&format!(
                    "{mode},{group},{round},{frame},{err:?},{}\n",
                    report.n_samples
                ));
            }
        }
    }
    out
}

/// Plot data: `mode,round,avg_mpjpe`.
pub fn plot_csv(rows: &[(String, &RolloutReport)]) -> String {
    let mut out = String::from("mode,round,avg_mpjpe\n");
    for (mode, report) in rows {
        for (round, avg) in &report.per_round_avg {
            out.push_str(&format!("{mode},{round},{avg:?}\n"));
        }
    }
    out
}

/// Human-readable round-by-round table.
pub fn summary_table(cmp: &ModeComparison) -> String {
    let mut out = String::from("round  deviation_off  deviation_on  improvement\n");
    for (r, off) in &cmp.deviation_off.per_round_avg {
        let on = cmp.deviation_on.per_round_avg[r];
        out.push_str(&format!(
            "r{r:<5} {off:>13.5} {on:>13.5} {:>11.2}%\n",
            100.0 * cmp.improvement[r]
        ));
    }
    out
}
