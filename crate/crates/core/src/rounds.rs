//! Consecutive "observe then predict" rounds over a long sequence.
//!
//! Round `r` (1-based) covers source frames `1+(r-1)T ..= N+T+(r-1)T`; the
//! first `N` frames are observed and the last `T` are the target. Consecutive
//! rounds overlap: the last `T` observed frames of round `r` are exactly the
//! target of round `r-1`. Internally all frame indices are 0-based.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLayout {
    /// Observed frames per round (`N`).
    pub n_obs: usize,
    /// Predicted frames per round (`T`).
    pub n_pred: usize,
}

impl RoundLayout {
    pub fn new(n_obs: usize, n_pred: usize) -> Result<Self> {
        let layout = Self { n_obs, n_pred };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pred < 2 {
            return Err(Error::Config(format!(
                "n_pred must be at least 2 for a velocity deviation, got {}",
                self.n_pred
            )));
        }
        if self.n_obs < self.n_pred {
            return Err(Error::Config(format!(
                "n_obs ({}) must be >= n_pred ({})",
                self.n_obs, self.n_pred
            )));
        }
        Ok(())
    }

    /// Frames spanned by one round, `N + T`.
    pub fn span(&self) -> usize {
        self.n_obs + self.n_pred
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSample {
    /// 1-based round index.
    pub round_index: usize,
    /// 0-based first source frame of the round.
    pub start: usize,
    pub observation: Array2<f64>,
    pub target: Array2<f64>,
    pub source_id: String,
}

impl RoundSample {
    /// The last `T` observed frames.
    pub fn observation_tail(&self, n_pred: usize) -> ArrayView2<'_, f64> {
        let n = self.observation.nrows();
        self.observation.slice(s![n - n_pred.., ..])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub round1: RoundSample,
    pub round2: RoundSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSample {
    pub rounds: Vec<RoundSample>,
    pub label: Option<String>,
}

/// Checks that `next` follows `prev`: starts `T` frames later and observes
/// `prev`'s target as its last `T` frames, bit-exactly.
pub fn check_overlap(prev: &RoundSample, next: &RoundSample) -> Result<()> {
    let t = prev.target.nrows();
    if next.observation.nrows() < t {
        return Err(Error::Integrity(format!(
            "round {} observes {} frames, fewer than the {t} target frames of round {}",
            next.round_index,
            next.observation.nrows(),
            prev.round_index
        )));
    }
    if next.start != prev.start + t {
        return Err(Error::Integrity(format!(
            "round {} starts at frame {}, expected {}",
            next.round_index,
            next.start,
            prev.start + t
        )));
    }
    let tail = next.observation_tail(t);
    let exact = tail
        .iter()
        .zip(prev.target.iter())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    if !exact {
        return Err(Error::Integrity(format!(
            "observation tail of round {} differs from target of round {}",
            next.round_index, prev.round_index
        )));
    }
    Ok(())
}

fn round_at(
    frames: &Array2<f64>,
    layout: RoundLayout,
    start: usize,
    round_index: usize,
    source_id: &str,
) -> RoundSample {
    let (n, t) = (layout.n_obs, layout.n_pred);
    RoundSample {
        round_index,
        start,
        observation: frames.slice(s![start..start + n, ..]).to_owned(),
        target: frames.slice(s![start + n..start + n + t, ..]).to_owned(),
        source_id: source_id.to_string(),
    }
}

fn source_id(seq: &MotionSequence, index: usize) -> String {
    match &seq.label {
        Some(label) => format!("seq{index}:{label}"),
        None => format!("seq{index}"),
    }
}

/// Splits a sequence into consecutive rounds; `max_rounds = None` means all.
///
/// The count is `min(max_rounds, floor((L-N)/T))`.
pub fn extract_rounds(
    seq: &MotionSequence,
    layout: RoundLayout,
    max_rounds: Option<usize>,
) -> Result<Vec<RoundSample>> {
    layout.validate()?;
    let len = seq.len();
    if len < layout.span() {
        return Err(Error::InsufficientLength {
            len,
            need: layout.span(),
        });
    }
    let available = (len - layout.n_obs) / layout.n_pred;
    let count = max_rounds.map_or(available, |m| m.min(available));
    let id = source_id(seq, 0);
    Ok((0..count)
        .map(|r| round_at(&seq.frames, layout, r * layout.n_pred, r + 1, &id))
        .collect())
}

/// Two-round training windows of `N + 2T` frames slid with `stride`.
/// Sequences shorter than one window are skipped.
pub fn make_train_samples(
    seqs: &[MotionSequence],
    layout: RoundLayout,
    stride: usize,
) -> Result<Vec<TrainSample>> {
    layout.validate()?;
    if stride == 0 {
        return Err(Error::Config("stride must be positive".into()));
    }
    let window = layout.n_obs + 2 * layout.n_pred;
    let mut out = Vec::new();
    for (i, seq) in seqs.iter().enumerate() {
        if seq.len() < window {
            continue;
        }
        let id = source_id(seq, i);
        for start in (0..=seq.len() - window).step_by(stride) {
            out.push(TrainSample {
                round1: round_at(&seq.frames, layout, start, 1, &id),
                round2: round_at(&seq.frames, layout, start + layout.n_pred, 2, &id),
            });
        }
    }
    Ok(out)
}

/// Non-overlapping test samples of exactly `max_r` rounds (`N + max_r*T` frames).
pub fn make_test_samples(
    seqs: &[MotionSequence],
    layout: RoundLayout,
    max_r: usize,
) -> Result<Vec<TestSample>> {
    layout.validate()?;
    if max_r < 2 {
        return Err(Error::Config(format!("max_r must be at least 2, got {max_r}")));
    }
    let window = layout.n_obs + max_r * layout.n_pred;
    let mut out = Vec::new();
    for (i, seq) in seqs.iter().enumerate() {
        let id = source_id(seq, i);
        let mut start = 0;
        while start + window <= seq.len() {
            let rounds = (0..max_r)
                .map(|r| round_at(&seq.frames, layout, start + r * layout.n_pred, r + 1, &id))
                .collect();
            out.push(TestSample {
                rounds,
                label: seq.label.clone(),
            });
            start += window;
        }
    }
    Ok(out)
}
