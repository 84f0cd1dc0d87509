//! Deviation encoders: map a `(T-1) x K` deviation to an embedding shaped like
//! the injection slot. The last alignment layer of both variants starts at
//! zero, so an untrained encoder emits exact zeros.

use ndarray::Array2;
use rand::Rng;

use super::layers::{Linear, MixingBlock};
use super::params::{Bound, ParamStore};
use crate::autodiff::{Tape, Var};

/// One temporal-mixing and one spatial-mixing MLP with skip connections,
/// followed by a time alignment and a zero-initialized feature alignment.
#[derive(Debug, Clone)]
pub struct MlpDeviationEncoder {
    mixing: MixingBlock,
    align_time: Linear,
    align_feat: Linear,
}

impl MlpDeviationEncoder {
    pub fn new(
        store: &mut ParamStore,
        steps: usize,
        pose_dim: usize,
        slot: (usize, usize),
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            mixing: MixingBlock::new(store, "dev_mlp.mix", steps, pose_dim, slot.0, slot.1, rng),
            align_time: Linear::new(store, "dev_mlp.align_time", steps, slot.0, rng),
            align_feat: Linear::zeroed(store, "dev_mlp.align_feat", pose_dim, slot.1),
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, dev: Var) -> Var {
        let h = self.mixing.forward(tape, p, dev);
        let h = self.align_time.forward_rows(tape, p, h);
        self.align_feat.forward(tape, p, h)
    }
}

#[derive(Debug, Clone)]
struct GruCell {
    input_z: Linear,
    input_r: Linear,
    input_n: Linear,
    hidden_z: Linear,
    hidden_r: Linear,
    hidden_n: Linear,
    hidden: usize,
}

impl GruCell {
    fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut lin = |suffix: &str, fan_in: usize| {
            Linear::new(store, &format!("{name}.{suffix}"), fan_in, hidden, rng)
        };
        Self {
            input_z: lin("input_z", input),
            input_r: lin("input_r", input),
            input_n: lin("input_n", input),
            hidden_z: lin("hidden_z", hidden),
            hidden_r: lin("hidden_r", hidden),
            hidden_n: lin("hidden_n", hidden),
            hidden,
        }
    }

    /// `z = s(Wz x + Uz h)`, `r = s(Wr x + Ur h)`, `n = tanh(Wn x + r*(Un h))`,
    /// `h' = (1-z)*n + z*h`.
    fn step(&self, tape: &mut Tape, p: &Bound, x: Var, h: Var) -> Var {
        let zx = self.input_z.forward(tape, p, x);
        let zh = self.hidden_z.forward(tape, p, h);
        let z = tape.add(zx, zh);
        let z = tape.sigmoid(z);
        let rx = self.input_r.forward(tape, p, x);
        let rh = self.hidden_r.forward(tape, p, h);
        let r = tape.add(rx, rh);
        let r = tape.sigmoid(r);
        let nx = self.input_n.forward(tape, p, x);
        let nh = self.hidden_n.forward(tape, p, h);
        let nh = tape.mul(r, nh);
        let n = tape.add(nx, nh);
        let n = tape.tanh(n);
        let keep = tape.mul(z, h);
        let update = tape.one_minus(z);
        let update = tape.mul(update, n);
        tape.add(update, keep)
    }
}

/// Single-layer GRU over the deviation frames, with one fully-connected
/// layer along time and one along features for alignment to the slot.
#[derive(Debug, Clone)]
pub struct GruDeviationEncoder {
    cell: GruCell,
    align_time: Linear,
    align_feat: Linear,
}

impl GruDeviationEncoder {
    pub fn new(
        store: &mut ParamStore,
        steps: usize,
        pose_dim: usize,
        hidden: usize,
        slot: (usize, usize),
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            cell: GruCell::new(store, "dev_gru.cell", pose_dim, hidden, rng),
            align_time: Linear::new(store, "dev_gru.align_time", steps, slot.0, rng),
            align_feat: Linear::zeroed(store, "dev_gru.align_feat", hidden, slot.1),
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, dev: Var) -> Var {
        let steps = tape.shape(dev).0;
        let mut h = tape.leaf(Array2::zeros((1, self.cell.hidden)));
        let mut outputs = Vec::with_capacity(steps);
        for t in 0..steps {
            let x = tape.rows(dev, t, t + 1);
            h = self.cell.step(tape, p, x, h);
            outputs.push(h);
        }
        let seq = tape.stack_rows(&outputs);
        let h = self.align_time.forward_rows(tape, p, seq);
        self.align_feat.forward(tape, p, h)
    }
}
