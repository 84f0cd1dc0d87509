//! Parameterized layers used by the baselines and deviation encoders.

use rand::Rng;

use super::params::{Bound, ParamId, ParamStore};
use crate::autodiff::{Tape, Var};

/// `y = x W + b`, applied to every row of `x`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let w = store.add_uniform(format!("{name}.weight"), (fan_in, fan_out), fan_in, rng);
        let b = store.add_zeros(format!("{name}.bias"), (1, fan_out));
        Self { w, b, fan_in, fan_out }
    }

    pub fn zeroed(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize) -> Self {
        let w = store.add_zeros(format!("{name}.weight"), (fan_in, fan_out));
        let b = store.add_zeros(format!("{name}.bias"), (1, fan_out));
        Self { w, b, fan_in, fan_out }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let y = tape.matmul(x, p.var(self.w));
        tape.add_row(y, p.var(self.b))
    }

    /// Applies the layer along the row (time) axis: `(W^T x^T)^T`-style,
    /// mapping an `r x c` input to `fan_out x c`.
    pub fn forward_rows(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let xt = tape.transpose(x);
        let y = self.forward(tape, p, xt);
        tape.transpose(y)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Self {
            gamma: store.add_ones(format!("{name}.gamma"), (1, width)),
            beta: store.add_zeros(format!("{name}.beta"), (1, width)),
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        tape.layer_norm(x, p.var(self.gamma), p.var(self.beta))
    }
}

/// Two fully-connected layers with GELU between them.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            fc1: Linear::new(store, &format!("{name}.fc1"), width, hidden, rng),
            fc2: Linear::new(store, &format!("{name}.fc2"), hidden, width, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let h = self.fc1.forward(tape, p, x);
        let h = tape.gelu(h);
        self.fc2.forward(tape, p, h)
    }
}

/// Pre-norm mixer block over a `time x width` array:
/// `x += T(mlp_t(T(ln(x))))`, then `x += mlp_c(ln(x))`.
#[derive(Debug, Clone)]
pub struct MixingBlock {
    pub norm_time: LayerNorm,
    pub time_mlp: Mlp,
    pub norm_feat: LayerNorm,
    pub feat_mlp: Mlp,
}

impl MixingBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        time_len: usize,
        width: usize,
        time_hidden: usize,
        feat_hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            norm_time: LayerNorm::new(store, &format!("{name}.norm_time"), width),
            time_mlp: Mlp::new(store, &format!("{name}.time_mlp"), time_len, time_hidden, rng),
            norm_feat: LayerNorm::new(store, &format!("{name}.norm_feat"), width),
            feat_mlp: Mlp::new(store, &format!("{name}.feat_mlp"), width, feat_hidden, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let h = self.norm_time.forward(tape, p, x);
        let ht = tape.transpose(h);
        let ht = self.time_mlp.forward(tape, p, ht);
        let h = tape.transpose(ht);
        let x = tape.add(x, h);
        let h = self.norm_feat.forward(tape, p, x);
        let h = self.feat_mlp.forward(tape, p, h);
        tape.add(x, h)
    }
}
