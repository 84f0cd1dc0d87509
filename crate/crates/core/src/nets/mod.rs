//! Differentiable predictors: two reference baselines, the deviation
//! encoders, and [`PredictorBundle`], which wires an encoder into a baseline.
//!
//! With inserted wiring the deviation embedding is added to the baseline's
//! encoder latent right before its decoder stack. With corrective wiring the
//! encoder emits a `T x K` correction that is added to the finished
//! prediction.

pub mod baseline;
pub mod checkpoint;
pub mod dct;
pub mod encoder;
pub mod layers;
pub mod params;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::deviation::Deviation;
use crate::error::{dim_err, Error, Result};
use crate::rounds::RoundLayout;
use baseline::{DctGcnBaseline, EncodedVars, MixerBaseline};
use encoder::{GruDeviationEncoder, MlpDeviationEncoder};
use params::{Bound, ParamStore};

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

string_enum!(BaselineKind { Mixer => "mixer", DctGcn => "dct-gcn" });
string_enum!(EncoderVariant { None => "none", Mlp => "mlp", Gru => "gru" });
string_enum!(Wiring { Inserted => "inserted", Corrective => "corrective" });

/// Everything needed to rebuild a bundle's structure and initial parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub baseline: BaselineKind,
    pub variant: EncoderVariant,
    pub wiring: Wiring,
    pub layout: RoundLayout,
    pub pose_dim: usize,
    pub dims_per_joint: usize,
    pub mixer_width: usize,
    pub mixer_encoder_blocks: usize,
    pub mixer_decoder_blocks: usize,
    pub gcn_hidden: usize,
    pub gcn_encoder_blocks: usize,
    pub gcn_decoder_blocks: usize,
    pub gru_hidden: usize,
    /// Predict in coordinates where the root of the last observed frame is
    /// the origin.
    pub center_on_root: bool,
    pub init_seed: u64,
}

impl BundleConfig {
    pub fn new(
        baseline: BaselineKind,
        variant: EncoderVariant,
        wiring: Wiring,
        layout: RoundLayout,
        pose_dim: usize,
    ) -> Self {
        Self {
            baseline,
            variant,
            wiring,
            layout,
            pose_dim,
            dims_per_joint: 3,
            mixer_width: 64,
            mixer_encoder_blocks: 1,
            mixer_decoder_blocks: 2,
            gcn_hidden: 64,
            gcn_encoder_blocks: 2,
            gcn_decoder_blocks: 1,
            gru_hidden: 256,
            center_on_root: true,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.pose_dim == 0 || self.dims_per_joint == 0 || !self.pose_dim.is_multiple_of(self.dims_per_joint) {
            return Err(Error::Config(format!(
                "pose_dim {} must be a positive multiple of dims_per_joint {}",
                self.pose_dim, self.dims_per_joint
            )));
        }
        if self.mixer_width == 0 || self.gcn_hidden == 0 || self.gru_hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Baseline {
    Mixer(MixerBaseline),
    DctGcn(DctGcnBaseline),
}

impl Baseline {
    fn slot(&self) -> (usize, usize) {
        match self {
            Baseline::Mixer(m) => m.slot(),
            Baseline::DctGcn(g) => g.slot(),
        }
    }

    fn encode(&self, tape: &mut Tape, p: &Bound, obs: Var) -> EncodedVars {
        match self {
            Baseline::Mixer(m) => m.encode(tape, p, obs),
            Baseline::DctGcn(g) => g.encode(tape, p, obs),
        }
    }

    fn decode(&self, tape: &mut Tape, p: &Bound, latent: Var, skip: Var) -> Var {
        match self {
            Baseline::Mixer(m) => m.decode(tape, p, latent, skip),
            Baseline::DctGcn(g) => g.decode(tape, p, latent, skip),
        }
    }
}

#[derive(Debug, Clone)]
enum Branch {
    Mlp(MlpDeviationEncoder),
    Gru(GruDeviationEncoder),
}

/// Array form of the encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub latent: Array2<f64>,
    pub skip: Array2<f64>,
}

/// A baseline predictor, optionally with a deviation encoder attached.
#[derive(Debug, Clone)]
pub struct PredictorBundle {
    pub config: BundleConfig,
    pub params: ParamStore,
    baseline: Baseline,
    branch: Option<Branch>,
}

/// Added to the init seed for the branch's RNG stream, so the baseline's
/// initial weights do not depend on which encoder is attached.
const BRANCH_SEED_OFFSET: u64 = 0x5eed_b7a9;

impl PredictorBundle {
    pub fn new(config: BundleConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout;
        let (n, t, k) = (layout.n_obs, layout.n_pred, config.pose_dim);
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let baseline = match config.baseline {
            BaselineKind::Mixer => Baseline::Mixer(MixerBaseline::new(
                &mut params,
                n,
                t,
                k,
                config.mixer_width,
                config.mixer_encoder_blocks,
                config.mixer_decoder_blocks,
                &mut rng,
            )),
            BaselineKind::DctGcn => Baseline::DctGcn(DctGcnBaseline::new(
                &mut params,
                n,
                t,
                k,
                config.gcn_hidden,
                config.gcn_encoder_blocks,
                config.gcn_decoder_blocks,
                &mut rng,
            )),
        };
        let slot = match config.wiring {
            Wiring::Inserted => baseline.slot(),
            Wiring::Corrective => (t, k),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed.wrapping_add(BRANCH_SEED_OFFSET));
        let branch = match config.variant {
            EncoderVariant::None => None,
            EncoderVariant::Mlp => Some(Branch::Mlp(MlpDeviationEncoder::new(
                &mut params,
                t - 1,
                k,
                slot,
                &mut rng,
            ))),
            EncoderVariant::Gru => Some(Branch::Gru(GruDeviationEncoder::new(
                &mut params,
                t - 1,
                k,
                config.gru_hidden,
                slot,
                &mut rng,
            ))),
        };
        Ok(Self {
            config,
            params,
            baseline,
            branch,
        })
    }

    pub fn layout(&self) -> RoundLayout {
        self.config.layout
    }

    pub fn pose_dim(&self) -> usize {
        self.config.pose_dim
    }

    pub fn has_branch(&self) -> bool {
        self.branch.is_some()
    }

    /// Shape of the embedding the branch must produce.
    pub fn slot(&self) -> (usize, usize) {
        match self.config.wiring {
            Wiring::Inserted => self.baseline.slot(),
            Wiring::Corrective => (self.config.layout.n_pred, self.config.pose_dim),
        }
    }

    fn check_obs(&self, obs: ArrayView2<f64>) -> Result<()> {
        let want = (self.config.layout.n_obs, self.config.pose_dim);
        if obs.dim() != want {
            return dim_err(format!("observation is {:?}, expected {want:?}", obs.dim()));
        }
        Ok(())
    }

    fn check_dev(&self, dim: (usize, usize)) -> Result<()> {
        let want = (self.config.layout.n_pred - 1, self.config.pose_dim);
        if dim != want {
            return dim_err(format!("deviation is {dim:?}, expected {want:?}"));
        }
        Ok(())
    }

    /// Root position of the last observed frame, tiled across joints (`1 x K`).
    fn root_offset(&self, obs: ArrayView2<f64>) -> Array2<f64> {
        let d = self.config.dims_per_joint;
        let last = obs.row(obs.nrows() - 1);
        Array2::from_shape_fn((1, self.config.pose_dim), |(_, c)| last[c % d])
    }

    // ---- graph-level API (used for training) ----

    pub fn encode_graph(&self, tape: &mut Tape, p: &Bound, obs: Var) -> EncodedVars {
        self.baseline.encode(tape, p, obs)
    }

    pub fn decode_graph(
        &self,
        tape: &mut Tape,
        p: &Bound,
        enc: EncodedVars,
        embedding: Option<Var>,
    ) -> Result<Var> {
        let latent = match embedding {
            Some(e) => {
                if tape.shape(e) != tape.shape(enc.latent) {
                    return dim_err(format!(
                        "embedding is {:?} but latent slot is {:?}",
                        tape.shape(e),
                        tape.shape(enc.latent)
                    ));
                }
                tape.add(enc.latent, e)
            }
            None => enc.latent,
        };
        Ok(self.baseline.decode(tape, p, latent, enc.skip))
    }

    pub fn branch_graph(&self, tape: &mut Tape, p: &Bound, dev: Var) -> Result<Var> {
        self.check_dev(tape.shape(dev))?;
        match &self.branch {
            Some(Branch::Mlp(m)) => Ok(m.forward(tape, p, dev)),
            Some(Branch::Gru(g)) => Ok(g.forward(tape, p, dev)),
            None => Err(Error::Config("bundle has no deviation encoder".into())),
        }
    }

    /// One round: encode, optionally inject the deviation, decode. `dev =
    /// None` bypasses the branch entirely. Returns the prediction in world
    /// coordinates.
    pub fn predict_round_graph(
        &self,
        tape: &mut Tape,
        p: &Bound,
        obs: ArrayView2<f64>,
        dev: Option<Var>,
    ) -> Result<Var> {
        let (pred, offset) = self.predict_round_graph_centered(tape, p, obs, dev)?;
        Ok(match offset {
            Some(off) => {
                let off = tape.leaf(off);
                tape.add_row(pred, off)
            }
            None => pred,
        })
    }

    /// Like [`Self::predict_round_graph`] but returns the prediction in the
    /// root-centered frame together with the `1 x K` offset that maps it back
    /// (`None` when centering is off).
    pub fn predict_round_graph_centered(
        &self,
        tape: &mut Tape,
        p: &Bound,
        obs: ArrayView2<f64>,
        dev: Option<Var>,
    ) -> Result<(Var, Option<Array2<f64>>)> {
        self.check_obs(obs)?;
        if dev.is_some() && self.branch.is_none() {
            return Err(Error::Config(
                "deviation supplied but the bundle has no deviation encoder".into(),
            ));
        }
        let offset = self.config.center_on_root.then(|| self.root_offset(obs));
        let obs_var = match &offset {
            Some(off) => tape.leaf(&obs - off),
            None => tape.leaf(obs.to_owned()),
        };
        let enc = self.encode_graph(tape, p, obs_var);
        let pred = match (dev, self.config.wiring) {
            (None, _) => self.decode_graph(tape, p, enc, None)?,
            (Some(d), Wiring::Inserted) => {
                let emb = self.branch_graph(tape, p, d)?;
                self.decode_graph(tape, p, enc, Some(emb))?
            }
            (Some(d), Wiring::Corrective) => {
                let bare = self.decode_graph(tape, p, enc, None)?;
                let correction = self.branch_graph(tape, p, d)?;
                tape.add(bare, correction)
            }
        };
        Ok((pred, offset))
    }

    // ---- array-level API ----

    /// Encoder half on raw (uncentered) observations.
    pub fn baseline_encode(&self, obs: ArrayView2<f64>) -> Result<Encoded> {
        self.check_obs(obs)?;
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = tape.leaf(obs.to_owned());
        let enc = self.encode_graph(&mut tape, &p, x);
        Ok(Encoded {
            latent: tape.value(enc.latent).clone(),
            skip: tape.value(enc.skip).clone(),
        })
    }

    /// Decoder stack on an encoded observation, with an optional embedding
    /// added to the latent.
    pub fn decode_prediction(&self, enc: &Encoded, embedding: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let vars = EncodedVars {
            latent: tape.leaf(enc.latent.clone()),
            skip: tape.leaf(enc.skip.clone()),
        };
        let emb = embedding.map(|e| tape.leaf(e.clone()));
        let out = self.decode_graph(&mut tape, &p, vars, emb)?;
        Ok(tape.value(out).clone())
    }

    /// Branch output for a deviation, shaped like [`Self::slot`].
    pub fn branch_embedding(&self, dev: &Deviation) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let d = tape.leaf(dev.values.clone());
        let out = self.branch_graph(&mut tape, &p, d)?;
        Ok(tape.value(out).clone())
    }

    pub fn predict_round(&self, obs: ArrayView2<f64>, dev: Option<&Deviation>) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let d = match dev {
            Some(dev) => {
                self.check_dev(dev.values.dim())?;
                Some(tape.leaf(dev.values.clone()))
            }
            None => None,
        };
        let out = self.predict_round_graph(&mut tape, &p, obs, d)?;
        Ok(tape.value(out).clone())
    }
}
