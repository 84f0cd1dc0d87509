//! Reference baseline predictors, split into an encoder that produces the
//! latent and a decoder stack that turns it into a `T x K` prediction.

use ndarray::Array2;
use rand::Rng;

use super::dct::{dct_matrix, pad_last_frame};
use super::layers::{LayerNorm, Linear, MixingBlock};
use super::params::{Bound, ParamId, ParamStore};
use crate::autodiff::{Tape, Var};

/// Encoder output: the latent the deviation embedding is added to, and the
/// skip path the decoder needs.
#[derive(Debug, Clone, Copy)]
pub struct EncodedVars {
    pub latent: Var,
    pub skip: Var,
}

/// MLP-mixer style predictor. Frames are embedded to `width`, passed through
/// mixing blocks, then mapped `N -> T` along time and `width -> K` along
/// features, predicting offsets from the last observed frame.
#[derive(Debug, Clone)]
pub struct MixerBaseline {
    embed: Linear,
    encoder: Vec<MixingBlock>,
    decoder: Vec<MixingBlock>,
    head_norm: LayerNorm,
    head_time: Linear,
    head_feat: Linear,
    n_obs: usize,
    width: usize,
}

impl MixerBaseline {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        n_obs: usize,
        n_pred: usize,
        pose_dim: usize,
        width: usize,
        encoder_blocks: usize,
        decoder_blocks: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let embed = Linear::new(store, "mixer.embed", pose_dim, width, rng);
        let encoder = (0..encoder_blocks)
            .map(|i| MixingBlock::new(store, &format!("mixer.enc{i}"), n_obs, width, n_obs, width, rng))
            .collect();
        let decoder = (0..decoder_blocks)
            .map(|i| MixingBlock::new(store, &format!("mixer.dec{i}"), n_obs, width, n_obs, width, rng))
            .collect();
        Self {
            embed,
            encoder,
            decoder,
            head_norm: LayerNorm::new(store, "mixer.head_norm", width),
            head_time: Linear::new(store, "mixer.head_time", n_obs, n_pred, rng),
            head_feat: Linear::new(store, "mixer.head_feat", width, pose_dim, rng),
            n_obs,
            width,
        }
    }

    pub fn slot(&self) -> (usize, usize) {
        (self.n_obs, self.width)
    }

    pub fn encode(&self, tape: &mut Tape, p: &Bound, obs: Var) -> EncodedVars {
        let skip = tape.rows(obs, self.n_obs - 1, self.n_obs);
        let mut h = self.embed.forward(tape, p, obs);
        for block in &self.encoder {
            h = block.forward(tape, p, h);
        }
        EncodedVars { latent: h, skip }
    }

    pub fn decode(&self, tape: &mut Tape, p: &Bound, latent: Var, skip: Var) -> Var {
        let mut h = latent;
        for block in &self.decoder {
            h = block.forward(tape, p, h);
        }
        let h = self.head_norm.forward(tape, p, h);
        let h = self.head_time.forward_rows(tape, p, h);
        let delta = self.head_feat.forward(tape, p, h);
        tape.add_row(delta, skip)
    }
}

/// `A x W + b` with a learned `K x K` adjacency `A`.
#[derive(Debug, Clone)]
struct GraphConv {
    adj: ParamId,
    weight: ParamId,
    bias: ParamId,
}

impl GraphConv {
    fn new(store: &mut ParamStore, name: &str, nodes: usize, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            adj: store.add_uniform(format!("{name}.adj"), (nodes, nodes), nodes, rng),
            weight: store.add_uniform(format!("{name}.weight"), (fan_in, fan_out), fan_in, rng),
            bias: store.add_zeros(format!("{name}.bias"), (1, fan_out)),
        }
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let xw = tape.matmul(x, p.var(self.weight));
        let axw = tape.matmul(p.var(self.adj), xw);
        tape.add_row(axw, p.var(self.bias))
    }
}

#[derive(Debug, Clone)]
struct GraphBlock {
    gc1: GraphConv,
    gc2: GraphConv,
}

impl GraphBlock {
    fn new(store: &mut ParamStore, name: &str, nodes: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            gc1: GraphConv::new(store, &format!("{name}.gc1"), nodes, hidden, hidden, rng),
            gc2: GraphConv::new(store, &format!("{name}.gc2"), nodes, hidden, hidden, rng),
        }
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let h = self.gc1.forward(tape, p, x);
        let h = tape.tanh(h);
        let h = self.gc2.forward(tape, p, h);
        let h = tape.tanh(h);
        tape.add(x, h)
    }
}

/// Graph-convolution predictor in DCT space. The observation is padded with
/// its last frame to `N+T` frames, transformed along time, and each of the
/// `K` coordinates becomes a graph node whose features are its DCT
/// coefficients. The decoder adds its output to the input coefficients and
/// inverts the transform.
#[derive(Debug, Clone)]
pub struct DctGcnBaseline {
    dct: Array2<f64>,
    pad: Array2<f64>,
    input: GraphConv,
    encoder: Vec<GraphBlock>,
    decoder: Vec<GraphBlock>,
    output: GraphConv,
    n_obs: usize,
    pose_dim: usize,
    hidden: usize,
}

impl DctGcnBaseline {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        n_obs: usize,
        n_pred: usize,
        pose_dim: usize,
        hidden: usize,
        encoder_blocks: usize,
        decoder_blocks: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let len = n_obs + n_pred;
        let input = GraphConv::new(store, "gcn.input", pose_dim, len, hidden, rng);
        let encoder = (0..encoder_blocks)
            .map(|i| GraphBlock::new(store, &format!("gcn.enc{i}"), pose_dim, hidden, rng))
            .collect();
        let decoder = (0..decoder_blocks)
            .map(|i| GraphBlock::new(store, &format!("gcn.dec{i}"), pose_dim, hidden, rng))
            .collect();
        let output = GraphConv::new(store, "gcn.output", pose_dim, hidden, len, rng);
        Self {
            dct: dct_matrix(len),
            pad: pad_last_frame(n_obs, n_pred),
            input,
            encoder,
            decoder,
            output,
            n_obs,
            pose_dim,
            hidden,
        }
    }

    pub fn slot(&self) -> (usize, usize) {
        (self.pose_dim, self.hidden)
    }

    pub fn encode(&self, tape: &mut Tape, p: &Bound, obs: Var) -> EncodedVars {
        let pad = tape.leaf(self.pad.clone());
        let dct = tape.leaf(self.dct.clone());
        let padded = tape.matmul(pad, obs);
        let coefs = tape.matmul(dct, padded);
        // nodes x coefficients
        let skip = tape.transpose(coefs);
        let h = self.input.forward(tape, p, skip);
        let mut h = tape.tanh(h);
        for block in &self.encoder {
            h = block.forward(tape, p, h);
        }
        EncodedVars { latent: h, skip }
    }

    pub fn decode(&self, tape: &mut Tape, p: &Bound, latent: Var, skip: Var) -> Var {
        let mut h = latent;
        for block in &self.decoder {
            h = block.forward(tape, p, h);
        }
        let out = self.output.forward(tape, p, h);
        let coefs = tape.add(out, skip);
        let coefs = tape.transpose(coefs);
        let idct = tape.leaf(self.dct.t().to_owned());
        let frames = tape.matmul(idct, coefs);
        let len = self.dct.nrows();
        tape.rows(frames, self.n_obs, len)
    }
}
