//! Experiment runner: spec files, data preparation and the `generate`,
//! `train`, `evaluate` and `ablate` commands.
//!
//! A spec is a flat `key = value` text file; `#` starts a comment. Every
//! artifact is a pure function of the spec, with randomness split from the
//! single `seed` into named sub-seeds (`data`, `init`, `shuffle`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::motion::{generate_synthetic, load_motion, save_motion, MotionMode, MotionSequence, SyntheticConfig};
use crate::nets::{checkpoint, BaselineKind, BundleConfig, EncoderVariant, PredictorBundle, Wiring};
use crate::rollout::{self, compare_modes, evaluate_grouped, FeedbackMode, ModeComparison, OracleStub, RolloutReport};
use crate::rounds::{make_test_samples, make_train_samples, RoundLayout, TestSample, TrainSample};
use crate::training::{self, history_csv, LossBreakdown, TrainConfig};

/// Overrides the root that relative `out_dir` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "DEVFEED_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticData),
    Files { train_glob: String, test_glob: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub train_length: usize,
    pub test_length: usize,
    pub mode: MotionMode,
    pub fps: f64,
    pub frequency_jitter: f64,
    pub amplitude_jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub data: DataSource,
    pub layout: RoundLayout,
    pub bundle: BundleConfig,
    pub train: TrainConfig,
    pub stride: usize,
    pub max_r: usize,
    pub testpoints: Vec<usize>,
    /// Joint indices kept from every loaded sequence; `None` keeps all.
    pub joints: Option<Vec<usize>>,
    pub out_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "seed",
    "data",
    "train_glob",
    "test_glob",
    "train_sequences",
    "test_sequences",
    "train_length",
    "test_length",
    "motion_mode",
    "fps",
    "frequency_jitter",
    "amplitude_jitter",
    "n_obs",
    "n_pred",
    "baseline",
    "variant",
    "wiring",
    "mixer_width",
    "mixer_encoder_blocks",
    "mixer_decoder_blocks",
    "gcn_hidden",
    "gcn_encoder_blocks",
    "gcn_decoder_blocks",
    "gru_hidden",
    "learning_rate",
    "epochs",
    "batch_size",
    "center_on_root",
    "detach_round1",
    "stride",
    "joints",
    "max_r",
    "testpoints",
    "out_dir",
];

/// 64-bit mix of the master seed with a stream name.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finalizer
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Fields {
    map: BTreeMap<String, (usize, String)>,
}

impl Fields {
    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse().map(Some).map_err(|_| Error::Parse {
                path: PathBuf::from("<spec>"),
                line,
                msg: format!("bad value {raw:?} for {key}"),
            }),
        }
    }

    fn or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse {
                path: PathBuf::from("<spec>"),
                line: idx + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(perr(format!("unknown key {key:?}")));
            }
            if map.insert(key.to_string(), (idx + 1, value.trim().to_string())).is_some() {
                return Err(perr(format!("duplicate key {key:?}")));
            }
        }
        let mut f = Fields { map };

        let seed = f.or("seed", 0u64)?;
        let n_obs = f.or("n_obs", 10usize)?;
        let n_pred = f.or("n_pred", 10usize)?;
        let layout = RoundLayout::new(n_obs, n_pred)?;
        let max_r = f.or("max_r", 10usize)?;
        let data_kind: String = f.or("data", "synthetic".to_string())?;
        let data = match data_kind.as_str() {
            "synthetic" => DataSource::Synthetic(SyntheticData {
                train_sequences: f.or("train_sequences", 200)?,
                test_sequences: f.or("test_sequences", 50)?,
                train_length: f.or("train_length", n_obs + 4 * n_pred)?,
                test_length: f.or("test_length", n_obs + max_r * n_pred)?,
                mode: f.or("motion_mode", MotionMode::Periodic)?,
                fps: f.or("fps", 25.0)?,
                frequency_jitter: f.or("frequency_jitter", 0.3)?,
                amplitude_jitter: f.or("amplitude_jitter", 0.3)?,
            }),
            "files" => DataSource::Files {
                train_glob: f
                    .take("train_glob")?
                    .ok_or_else(|| Error::Config("data = files requires train_glob".into()))?,
                test_glob: f
                    .take("test_glob")?
                    .ok_or_else(|| Error::Config("data = files requires test_glob".into()))?,
            },
            other => return Err(Error::Config(format!("data must be synthetic or files, got {other:?}"))),
        };

        let baseline: BaselineKind = f.or("baseline", BaselineKind::Mixer)?;
        let mut bundle = BundleConfig::new(
            baseline,
            f.or("variant", EncoderVariant::Mlp)?,
            f.or("wiring", Wiring::Inserted)?,
            layout,
            15,
        );
        bundle.mixer_width = f.or("mixer_width", bundle.mixer_width)?;
        bundle.mixer_encoder_blocks = f.or("mixer_encoder_blocks", bundle.mixer_encoder_blocks)?;
        bundle.mixer_decoder_blocks = f.or("mixer_decoder_blocks", bundle.mixer_decoder_blocks)?;
        bundle.gcn_hidden = f.or("gcn_hidden", bundle.gcn_hidden)?;
        bundle.gcn_encoder_blocks = f.or("gcn_encoder_blocks", bundle.gcn_encoder_blocks)?;
        bundle.gcn_decoder_blocks = f.or("gcn_decoder_blocks", bundle.gcn_decoder_blocks)?;
        bundle.gru_hidden = f.or("gru_hidden", bundle.gru_hidden)?;
        bundle.init_seed = sub_seed(seed, "init");

        let defaults = TrainConfig::for_baseline(baseline);
        let train = TrainConfig {
            learning_rate: f.or("learning_rate", defaults.learning_rate)?,
            epochs: f.or("epochs", defaults.epochs)?,
            batch_size: f.or("batch_size", defaults.batch_size)?,
            seed: sub_seed(seed, "shuffle"),
            center_on_root: f.or("center_on_root", defaults.center_on_root)?,
            detach_round1: f.or("detach_round1", defaults.detach_round1)?,
            adam: defaults.adam,
        };
        train.validate()?;
        bundle.center_on_root = train.center_on_root;

        let testpoints = match f.take::<String>("testpoints")? {
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("bad testpoints {raw:?}")))?,
            // frames 2, 4, 8, 10 where the horizon reaches them, else the last frame
            None => {
                let tp: Vec<usize> = [2, 4, 8, 10].into_iter().filter(|&f| f <= n_pred).collect();
                if tp.is_empty() {
                    vec![n_pred]
                } else {
                    tp
                }
            }
        };
        if testpoints.is_empty() || testpoints.iter().any(|&t| t == 0 || t > n_pred) {
            return Err(Error::Config(format!("testpoints must lie in 1..={n_pred}")));
        }
        if max_r < 2 {
            return Err(Error::Config("max_r must be at least 2".into()));
        }
        if let DataSource::Synthetic(syn) = &data {
            if syn.train_length < n_obs + 2 * n_pred {
                return Err(Error::Config(format!(
                    "train_length {} is shorter than one training window of {} frames",
                    syn.train_length,
                    n_obs + 2 * n_pred
                )));
            }
            if syn.test_length < n_obs + max_r * n_pred {
                return Err(Error::Config(format!(
                    "test_length {} is shorter than the {} frames of a {max_r}-round rollout",
                    syn.test_length,
                    n_obs + max_r * n_pred
                )));
            }
        }
        let joints = match f.take::<String>("joints")? {
            None => None,
            Some(raw) => Some(
                raw.split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Config(format!("bad joints {raw:?}")))?,
            ),
        };

        let spec = Self {
            seed,
            data,
            layout,
            bundle,
            train,
            stride: f.or("stride", n_pred)?,
            max_r,
            testpoints,
            joints,
            out_dir: PathBuf::from(f.or("out_dir", "devfeed-out".to_string())?),
        };
        if let Some(key) = f.map.keys().next() {
            return Err(Error::Config(format!("key {key:?} does not apply to this data source")));
        }
        if spec.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }

    /// Output directory, resolved against `DEVFEED_OUTPUT_ROOT` when set.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.out_dir.is_relative() => PathBuf::from(root).join(&self.out_dir),
            _ => self.out_dir.clone(),
        }
    }

    /// Copy with a different bundle variant/wiring; everything else is shared.
    pub fn with_bundle(&self, variant: EncoderVariant, wiring: Wiring) -> Self {
        let mut spec = self.clone();
        spec.bundle.variant = variant;
        spec.bundle.wiring = wiring;
        spec
    }

    pub fn tag(&self) -> String {
        format!("{}_{}_{}", self.bundle.baseline, self.bundle.variant, self.bundle.wiring)
    }
}

/// One generated sequence and the metadata that reproduces it.
#[derive(Debug, Clone)]
pub struct GeneratedSequence {
    pub split: &'static str,
    pub seed: u64,
    pub transition_frame: Option<usize>,
    pub sequence: MotionSequence,
}

pub fn synthetic_split(spec: &ExperimentSpec, syn: &SyntheticData) -> Result<Vec<GeneratedSequence>> {
    let span = spec.layout.span();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, "data"));
    let mut out = Vec::with_capacity(syn.train_sequences + syn.test_sequences);
    for (split, count, length) in [
        ("train", syn.train_sequences, syn.train_length),
        ("test", syn.test_sequences, syn.test_length),
    ] {
        for _ in 0..count {
            let seed: u64 = rng.gen();
            let transition_frame = match syn.mode {
                MotionMode::Transition => {
                    if length < 2 * span + 3 {
                        return Err(Error::Config(format!(
                            "{split}_length {length} leaves no room for a transition (need >= {})",
                            2 * span + 3
                        )));
                    }
                    Some(rng.gen_range(span + 1..length - span))
                }
                _ => None,
            };
            let mut cfg = SyntheticConfig::desk(length, seed);
            cfg.fps = syn.fps;
            cfg.motion_mode = syn.mode;
            cfg.frequency_jitter = syn.frequency_jitter;
            cfg.amplitude_jitter = syn.amplitude_jitter;
            cfg.transition_frame = transition_frame;
            cfg.round_span = span;
            out.push(GeneratedSequence {
                split,
                seed,
                transition_frame,
                sequence: generate_synthetic(&cfg)?,
            });
        }
    }
    Ok(out)
}

fn glob_sequences(pattern: &str) -> Result<Vec<MotionSequence>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::Config(format!("bad glob {pattern:?}: {e}")))?
        .filter_map(|p| p.ok())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no motion files match {pattern:?}")));
    }
    paths.iter().map(load_motion).collect()
}

/// `(train, test)` sequences for the spec's data source, restricted to the
/// spec's joint selection.
pub fn load_sequences(spec: &ExperimentSpec) -> Result<(Vec<MotionSequence>, Vec<MotionSequence>)> {
    let (train, test) = load_all_joints(spec)?;
    match &spec.joints {
        None => Ok((train, test)),
        Some(joints) => {
            let pick = |seqs: Vec<MotionSequence>| -> Result<Vec<MotionSequence>> {
                seqs.iter().map(|s| s.select_joints(joints)).collect()
            };
            Ok((pick(train)?, pick(test)?))
        }
    }
}

fn load_all_joints(spec: &ExperimentSpec) -> Result<(Vec<MotionSequence>, Vec<MotionSequence>)> {
    match &spec.data {
        DataSource::Synthetic(syn) => {
            let all = synthetic_split(spec, syn)?;
            let (train, test): (Vec<_>, Vec<_>) = all.into_iter().partition(|g| g.split == "train");
            Ok((
                train.into_iter().map(|g| g.sequence).collect(),
                test.into_iter().map(|g| g.sequence).collect(),
            ))
        }
        DataSource::Files { train_glob, test_glob } => {
            Ok((glob_sequences(train_glob)?, glob_sequences(test_glob)?))
        }
    }
}

pub struct Datasets {
    pub pose_dim: usize,
    pub dims_per_joint: usize,
    pub train: Vec<TrainSample>,
    pub test: Vec<TestSample>,
}

pub fn prepare_datasets(spec: &ExperimentSpec) -> Result<Datasets> {
    let (train_seqs, test_seqs) = load_sequences(spec)?;
    let first = train_seqs
        .first()
        .or(test_seqs.first())
        .ok_or_else(|| Error::Config("no sequences".into()))?;
    let (pose_dim, dims_per_joint) = (first.pose_dim(), first.skeleton.dims_per_joint);
    if train_seqs.iter().chain(&test_seqs).any(|s| s.pose_dim() != pose_dim) {
        return Err(Error::Config("sequences have differing pose dimensions".into()));
    }
    Ok(Datasets {
        pose_dim,
        dims_per_joint,
        train: make_train_samples(&train_seqs, spec.layout, spec.stride)?,
        test: make_test_samples(&test_seqs, spec.layout, spec.max_r)?,
    })
}

// ---- generate ----

#[derive(Debug)]
pub struct GenerateSummary {
    pub data_dir: PathBuf,
    pub files: usize,
}

pub fn cmd_generate(spec: &ExperimentSpec, force: bool) -> Result<GenerateSummary> {
    let DataSource::Synthetic(syn) = &spec.data else {
        return Err(Error::Config("generate requires data = synthetic".into()));
    };
    let data_dir = spec.output_dir().join("data");
    if data_dir.exists() && fs::read_dir(&data_dir)?.next().is_some() {
        if !force {
            return Err(Error::Config(format!(
                "{} is not empty; pass --force to overwrite",
                data_dir.display()
            )));
        }
        fs::remove_dir_all(&data_dir)?;
    }
    let generated = synthetic_split(spec, syn)?;
    let mut manifest = String::from("split,file,seed,motion_mode,transition_frame,frames\n");
    let mut counters = BTreeMap::new();
    for g in &generated {
        let dir = data_dir.join(g.split);
        fs::create_dir_all(&dir)?;
        let n = counters.entry(g.split).or_insert(0usize);
        let name = format!("{:04}.motion", *n);
        *n += 1;
        save_motion(&g.sequence, dir.join(&name))?;
        manifest.push_str(&format!(
            "{},{}/{},{},{},{},{}\n",
            g.split,
            g.split,
            name,
            g.seed,
            syn.mode.as_str(),
            g.transition_frame.map(|f| f.to_string()).unwrap_or_default(),
            g.sequence.len()
        ));
    }
    fs::create_dir_all(&data_dir)?;
    fs::write(data_dir.join("manifest.csv"), manifest)?;
    Ok(GenerateSummary {
        data_dir,
        files: generated.len(),
    })
}

// ---- train ----

#[derive(Debug)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub final_loss: LossBreakdown,
}

pub fn checkpoint_path(spec: &ExperimentSpec, out_dir: &Path) -> PathBuf {
    out_dir.join(format!("checkpoint_{}.json", spec.tag()))
}

/// Trains the spec's bundle on the spec's data; returns the trained bundle
/// and its per-epoch history.
pub fn train_bundle(spec: &ExperimentSpec, data: &Datasets) -> Result<training::TrainOutcome> {
    let mut cfg = spec.bundle.clone();
    cfg.pose_dim = data.pose_dim;
    cfg.dims_per_joint = data.dims_per_joint;
    let bundle = PredictorBundle::new(cfg)?;
    training::train(bundle, &data.train, &spec.train)
}

pub fn cmd_train(spec: &ExperimentSpec, out_override: Option<&Path>) -> Result<TrainSummary> {
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| spec.output_dir());
    fs::create_dir_all(&out_dir)?;
    let data = prepare_datasets(spec)?;
    if data.train.is_empty() {
        return Err(Error::Config(format!(
            "no sequence is long enough for a training window of {} frames",
            spec.layout.n_obs + 2 * spec.layout.n_pred
        )));
    }
    let outcome = train_bundle(spec, &data)?;
    let ckpt = checkpoint_path(spec, &out_dir);
    checkpoint::save(&outcome.bundle, &ckpt)?;
    let history = out_dir.join(format!("history_{}.csv", spec.tag()));
    fs::write(&history, history_csv(&outcome.history))?;
    Ok(TrainSummary {
        checkpoint: ckpt,
        history,
        final_loss: outcome.history.last().map(|e| e.loss).unwrap_or_default(),
    })
}

// ---- evaluate ----

pub fn check_compatible(spec: &ExperimentSpec, bundle: &PredictorBundle, pose_dim: usize) -> Result<()> {
    if bundle.layout() != spec.layout {
        return Err(Error::Compatibility(format!(
            "checkpoint layout N={} T={} vs spec N={} T={}",
            bundle.layout().n_obs,
            bundle.layout().n_pred,
            spec.layout.n_obs,
            spec.layout.n_pred
        )));
    }
    if bundle.pose_dim() != pose_dim {
        return Err(Error::Compatibility(format!(
            "checkpoint pose dimension K={} vs data K={pose_dim}",
            bundle.pose_dim()
        )));
    }
    Ok(())
}

/// Report and plot CSV text for one or more evaluated bundles. `prefix` is
/// prepended to the mode column (empty for the primary bundle).
pub struct EvaluationOutput {
    pub comparison: ModeComparison,
    pub report_rows: Vec<(String, String, RolloutReport)>,
}

pub fn evaluate_bundle(
    predictor: &impl rollout::RoundPredictor,
    test: &[TestSample],
    testpoints: &[usize],
    prefix: &str,
) -> Result<EvaluationOutput> {
    let comparison = compare_modes(predictor, test, testpoints)?;
    let mut report_rows = Vec::new();
    for mode in [FeedbackMode::DeviationOn, FeedbackMode::DeviationOff] {
        let label = format!("{prefix}{mode}");
        report_rows.push((label.clone(), "all".to_string(), match mode {
            FeedbackMode::DeviationOn => comparison.deviation_on.clone(),
            FeedbackMode::DeviationOff => comparison.deviation_off.clone(),
        }));
        let groups = evaluate_grouped(predictor, test, testpoints, mode)?;
        // a single group duplicates the "all" rows
        if groups.len() > 1 || groups.first().is_some_and(|(g, _)| g != "all") {
            for (group, report) in groups {
                report_rows.push((label.clone(), group, report));
            }
        }
    }
    Ok(EvaluationOutput {
        comparison,
        report_rows,
    })
}

pub fn render_csvs(outputs: &[&EvaluationOutput]) -> (String, String) {
    let rows: Vec<(String, String, &RolloutReport)> = outputs
        .iter()
        .flat_map(|o| o.report_rows.iter().map(|(m, g, r)| (m.clone(), g.clone(), r)))
        .collect();
    let plot_rows: Vec<(String, &RolloutReport)> = rows
        .iter()
        .filter(|(_, g, _)| g == "all")
        .map(|(m, _, r)| (m.clone(), *r))
        .collect();
    (rollout::report_csv(&rows), rollout::plot_csv(&plot_rows))
}

#[derive(Debug)]
pub struct EvaluateSummary {
    pub report: PathBuf,
    pub plot: PathBuf,
    pub table: String,
}

pub fn cmd_evaluate(
    spec: &ExperimentSpec,
    checkpoint_file: Option<&Path>,
    corrective_checkpoint: Option<&Path>,
    oracle_stub: bool,
) -> Result<EvaluateSummary> {
    let out_dir = spec.output_dir();
    fs::create_dir_all(&out_dir)?;
    let (_, test_seqs) = load_sequences(spec)?;
    let test = make_test_samples(&test_seqs, spec.layout, spec.max_r)?;
    if test.is_empty() {
        return Err(Error::Empty(format!(
            "no test sequence has the {} frames {} rounds need",
            spec.layout.n_obs + spec.max_r * spec.layout.n_pred,
            spec.max_r
        )));
    }
    let pose_dim = test_seqs[0].pose_dim();
    let (primary, tag) = if oracle_stub {
        let stub = OracleStub {
            dims_per_joint: test_seqs[0].skeleton.dims_per_joint,
        };
        (evaluate_bundle(&stub, &test, &spec.testpoints, "")?, "oracle".to_string())
    } else {
        let path = checkpoint_file.ok_or_else(|| Error::Config("--checkpoint is required".into()))?;
        let bundle = checkpoint::load(path)?;
        check_compatible(spec, &bundle, pose_dim)?;
        let tag = format!("{}_{}_{}", bundle.config.baseline, bundle.config.variant, bundle.config.wiring);
        (evaluate_bundle(&bundle, &test, &spec.testpoints, "")?, tag)
    };
    let mut outputs = vec![primary];
    if let Some(path) = corrective_checkpoint {
        let bundle = checkpoint::load(path)?;
        check_compatible(spec, &bundle, pose_dim)?;
        if bundle.config.wiring != Wiring::Corrective {
            return Err(Error::Config(format!("{} is not a corrective-wiring checkpoint", path.display())));
        }
        outputs.push(evaluate_bundle(&bundle, &test, &spec.testpoints, "corrective_")?);
    }
    let refs: Vec<&EvaluationOutput> = outputs.iter().collect();
    let (report, plot) = render_csvs(&refs);
    let report_path = out_dir.join(format!("report_{tag}.csv"));
    let plot_path = out_dir.join(format!("plot_{tag}.csv"));
    fs::write(&report_path, report)?;
    fs::write(&plot_path, plot)?;
    let mut table = rollout::summary_table(&outputs[0].comparison);
    if let Some(corr) = outputs.get(1) {
        table.push_str("corrective wiring:\n");
        table.push_str(&rollout::summary_table(&corr.comparison));
    }
    Ok(EvaluateSummary {
        report: report_path,
        plot: plot_path,
        table,
    })
}

// ---- ablate ----

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub configuration: &'static str,
    pub variant: EncoderVariant,
    pub wiring: Wiring,
    pub round1_avg: f64,
    pub round2_avg: f64,
    pub later_rounds_avg: f64,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("configuration,variant,wiring,round1_avg_mpjpe,round2_avg_mpjpe,rounds2_to_max_avg_mpjpe\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:?},{:?},{:?}\n",
            r.configuration, r.variant, r.wiring, r.round1_avg, r.round2_avg, r.later_rounds_avg
        ));
    }
    out
}

/// The three configurations compared by `ablate`.
pub fn ablation_specs(spec: &ExperimentSpec) -> [(&'static str, ExperimentSpec); 3] {
    let variant = match spec.bundle.variant {
        EncoderVariant::None => EncoderVariant::Mlp,
        v => v,
    };
    [
        ("inserted", spec.with_bundle(variant, Wiring::Inserted)),
        ("corrective", spec.with_bundle(variant, Wiring::Corrective)),
        ("isolated", spec.with_bundle(EncoderVariant::None, Wiring::Inserted)),
    ]
}

/// Trains (or reuses checkpoints under `out_dir`) and compares the three
/// wirings on the same test samples.
pub fn run_ablation(spec: &ExperimentSpec, data: &Datasets, out_dir: Option<&Path>) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for (name, sub) in ablation_specs(spec) {
        let bundle = match out_dir.map(|d| checkpoint_path(&sub, d)) {
            Some(path) if path.exists() => {
                let b = checkpoint::load(&path)?;
                check_compatible(&sub, &b, data.pose_dim)?;
                b
            }
            cached => {
                let outcome = train_bundle(&sub, data)?;
                if let (Some(path), Some(dir)) = (cached, out_dir) {
                    checkpoint::save(&outcome.bundle, &path)?;
                    fs::write(dir.join(format!("history_{}.csv", sub.tag())), history_csv(&outcome.history))?;
                }
                outcome.bundle
            }
        };
        let report = rollout::evaluate(&bundle, &data.test, &spec.testpoints, FeedbackMode::DeviationOn)?;
        rows.push(AblationRow {
            configuration: name,
            variant: sub.bundle.variant,
            wiring: sub.bundle.wiring,
            round1_avg: report.per_round_avg[&1],
            round2_avg: report.per_round_avg[&2],
            later_rounds_avg: report.mean_over_rounds(2, spec.max_r),
        });
    }
    Ok(rows)
}

pub fn cmd_ablate(spec: &ExperimentSpec) -> Result<PathBuf> {
    let out_dir = spec.output_dir();
    fs::create_dir_all(&out_dir)?;
    let data = prepare_datasets(spec)?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::Empty("ablation needs both training and test samples".into()));
    }
    let rows = run_ablation(spec, &data, Some(&out_dir))?;
    let path = out_dir.join("ablation.csv");
    fs::write(&path, ablation_csv(&rows))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let spec = ExperimentSpec::parse("seed = 3\nbaseline = dct-gcn\nvariant = gru # comment\n").unwrap();
        assert_eq!(spec.train.learning_rate, 0.0005);
        assert_eq!(spec.bundle.variant, EncoderVariant::Gru);
        assert_eq!(spec.testpoints, vec![2, 4, 8, 10]);
        assert_eq!(spec.stride, 10);
        let spec = ExperimentSpec::parse("learning_rate = 0.002\ntestpoints = 3,6,8,10").unwrap();
        assert_eq!(spec.train.learning_rate, 0.002);
        assert_eq!(spec.testpoints, vec![3, 6, 8, 10]);
        assert_eq!(spec.train.learning_rate, 0.002);
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        assert!(matches!(ExperimentSpec::parse("colour = red"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ExperimentSpec::parse("seed = 1\nepochs = many"), Err(Error::Parse { line: 2, .. })));
        assert!(ExperimentSpec::parse("epochs = 0").is_err());
        assert!(ExperimentSpec::parse("testpoints = 11").is_err());
        assert!(ExperimentSpec::parse("seed = 1\nseed = 2").is_err());
        assert!(ExperimentSpec::parse("data = files\ntrain_glob = a\ntest_glob = b\ntrain_sequences = 3").is_err());
    }

    #[test]
    fn joint_selection_and_length_checks() {
        let spec = ExperimentSpec::parse("train_sequences = 1\ntest_sequences = 1\njoints = 0,2,4").unwrap();
        let (train, test) = load_sequences(&spec).unwrap();
        assert_eq!(train[0].pose_dim(), 9);
        assert_eq!(test[0].pose_dim(), 9);
        assert!(ExperimentSpec::parse("test_length = 50").is_err());
        assert!(ExperimentSpec::parse("train_length = 29").is_err());
        assert_eq!(ExperimentSpec::parse("max_r = 4\ntest_length = 50").unwrap().max_r, 4);
    }

    #[test]
    fn sub_seeds_differ_by_name() {
        assert_ne!(sub_seed(7, "data"), sub_seed(7, "init"));
        assert_eq!(sub_seed(7, "data"), sub_seed(7, "data"));
        assert_ne!(sub_seed(7, "data"), sub_seed(8, "data"));
    }

    #[test]
    fn transition_frames_fall_inside_rollouts() {
        let spec = ExperimentSpec::parse(
            "motion_mode = transition\ntrain_sequences = 5\ntest_sequences = 5\ntrain_length = 50\n",
        )
        .unwrap();
        let DataSource::Synthetic(syn) = &spec.data else { unreachable!() };
        for g in synthetic_split(&spec, syn).unwrap() {
            let f = g.transition_frame.unwrap();
            let len = g.sequence.len();
            assert!(f > 20 && f < len - 20);
        }
    }
}
