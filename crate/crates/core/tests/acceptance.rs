//! End-to-end acceptance suite. Every criterion runs at its stated tolerance
//! and prints one PASS/FAIL line; the test fails if any criterion fails.
//!
//! Runs without the libtest harness: criteria execute sequentially so
//! wall-clock budgets are not distorted by other tests sharing the CPU, and
//! the PASS/FAIL lines are always printed.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use devfeed::cli::{cmd_evaluate, cmd_train, prepare_datasets, ExperimentSpec};
use devfeed::deviation::{compute_deviation, Deviation};
use devfeed::motion::{MotionSequence, SkeletonSpec};
use devfeed::nets::{checkpoint, BaselineKind, BundleConfig, EncoderVariant, PredictorBundle, Wiring};
use devfeed::rollout::{compare_modes, ModeComparison};
use devfeed::rounds::{extract_rounds, make_test_samples, make_train_samples, RoundLayout, TrainSample};
use devfeed::training::gradcheck::gradient_check;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn record(out: &mut Vec<Outcome>, id: &'static str, pass: bool, elapsed: Duration, budget: Duration, detail: String) {
    let in_time = elapsed <= budget;
    let pass = pass && in_time;
    let detail = format!("{detail}; {:.1}s (budget {}s)", elapsed.as_secs_f64(), budget.as_secs());
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    out.push(Outcome { id, pass, detail });
}

fn bits_equal(a: &Array2<f64>, b: &Array2<f64>) -> bool {
    a.dim() == b.dim() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Multiple of 2^-10 in [-64, 64): sums of a few of these are exact in f64.
fn dyadic(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-65536i64..65536) as f64 / 1024.0
}

fn random_sequence(rng: &mut impl Rng, len: usize, k: usize) -> MotionSequence {
    let frames = Array2::from_shape_fn((len, k), |_| rng.gen_range(-2.0..2.0) * rng.gen::<f64>());
    MotionSequence::new(SkeletonSpec::star(k / 3, 3), frames, 25.0, None).unwrap()
}

fn criterion_overlap(out: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0usize;
    let mut violations = 0usize;
    for _ in 0..1000 {
        let t = rng.gen_range(2..9);
        let n = rng.gen_range(t..t + 8);
        let layout = RoundLayout::new(n, t).unwrap();
        let max_r = rng.gen_range(2..6);
        let len = n + t * rng.gen_range(max_r..max_r + 4) + rng.gen_range(0..t);
        let k = 3 * rng.gen_range(1..5);
        let seq = random_sequence(&mut rng, len, k);
        let seqs = vec![seq.clone()];
        let mut pairs = Vec::new();
        for s in make_train_samples(&seqs, layout, rng.gen_range(1..=t)).unwrap() {
            pairs.push((s.round1, s.round2));
        }
        for s in make_test_samples(&seqs, layout, max_r).unwrap() {
            for w in s.rounds.windows(2) {
                pairs.push((w[0].clone(), w[1].clone()));
            }
        }
        let all = extract_rounds(&seq, layout, None).unwrap();
        for w in all.windows(2) {
            pairs.push((w[0].clone(), w[1].clone()));
        }
        for (prev, next) in &pairs {
            // oracle: both slices read straight from the source frames
            let src = seq.frames.slice(s![next.start + n - t..next.start + n, ..]).to_owned();
            let tail = next.observation_tail(t).to_owned();
            if !bits_equal(&tail, &prev.target) || !bits_equal(&tail, &src) || next.start != prev.start + t {
                violations += 1;
            }
            checked += 1;
        }
    }
    record(
        out,
        "1 overlap identity",
        violations == 0 && checked > 1000,
        start.elapsed(),
        Duration::from_secs(10),
        format!("{checked} round pairs, {violations} violations"),
    );
}

fn criterion_deviation_algebra(out: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut failures = Vec::new();
    for case in 0..1000 {
        let t = rng.gen_range(2..12);
        let k = 3 * rng.gen_range(1..8);
        let tail = Array2::from_shape_fn((t, k), |_| dyadic(&mut rng));
        let pred = Array2::from_shape_fn((t, k), |_| dyadic(&mut rng));
        let shift: Vec<f64> = (0..k).map(|_| dyadic(&mut rng)).collect();
        let shifted = |m: &Array2<f64>| Array2::from_shape_fn((t, k), |(i, j)| m[[i, j]] + shift[j]);
        let d = compute_deviation(tail.view(), pred.view(), 1).unwrap();
        let d_shift = compute_deviation(shifted(&tail).view(), shifted(&pred).view(), 1).unwrap();
        let d_swap = compute_deviation(pred.view(), tail.view(), 1).unwrap();
        let d_zero = compute_deviation(tail.view(), tail.view(), 1).unwrap();
        // oracle: frame-by-frame velocity difference
        let oracle = Array2::from_shape_fn((t - 1, k), |(i, j)| {
            (tail[[i + 1, j]] - tail[[i, j]]) - (pred[[i + 1, j]] - pred[[i, j]])
        });
        let checks = [
            ("matches oracle", bits_equal(&d.values, &oracle)),
            ("translation invariance", d.values == d_shift.values),
            ("antisymmetry", d.values == d_swap.values.mapv(|v| -v)),
            ("zero on perfect prediction", d_zero.values.iter().all(|&v| v == 0.0)),
            ("shape", d.values.dim() == (t - 1, k)),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("case {case}: {name}"));
            }
        }
    }
    record(
        out,
        "2 deviation algebra",
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(5),
        format!("1000 cases, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    );
}

fn criterion_zero_init(out: &mut Vec<Outcome>) {
    let start = Instant::now();
    let layout = RoundLayout::new(10, 10).unwrap();
    let k = 15;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for baseline in [BaselineKind::Mixer, BaselineKind::DctGcn] {
        let mut bare_cfg = BundleConfig::new(baseline, EncoderVariant::None, Wiring::Inserted, layout, k);
        bare_cfg.init_seed = 17;
        let bare = PredictorBundle::new(bare_cfg.clone()).unwrap();
        for variant in [EncoderVariant::Mlp, EncoderVariant::Gru] {
            for wiring in [Wiring::Inserted, Wiring::Corrective] {
                let cfg = BundleConfig { variant, wiring, ..bare_cfg.clone() };
                let bundle = PredictorBundle::new(cfg).unwrap();
                for _ in 0..100 {
                    let obs = Array2::from_shape_fn((10, k), |_| rng.gen_range(-1.5..1.5));
                    let dev = Deviation {
                        values: Array2::from_shape_fn((9, k), |_| rng.gen_range(-0.5..0.5)),
                        round_origin: 1,
                    };
                    let want = bare.predict_round(obs.view(), None).unwrap();
                    let got = bundle.predict_round(obs.view(), Some(&dev)).unwrap();
                    compared += 1;
                    if !bits_equal(&want, &got) {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    record(
        out,
        "3 zero-init no-op",
        mismatches == 0,
        start.elapsed(),
        Duration::from_secs(30),
        format!("{compared} predictions, {mismatches} differ from the bare baseline"),
    );
}

/// Gives every zero-initialized branch layer small random values so the
/// check exercises gradients through the whole branch.
fn perturb_zero_layers(bundle: &mut PredictorBundle, rng: &mut impl Rng) {
    for p in bundle.params.iter_mut() {
        if p.value.iter().all(|&v| v == 0.0) {
            p.value.mapv_inplace(|_| rng.gen_range(-0.05..0.05));
        }
    }
}

fn criterion_gradients(out: &mut Vec<Outcome>) {
    let start = Instant::now();
    let layout = RoundLayout::new(10, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let seq = random_sequence(&mut rng, 30, 15);
    let sample: TrainSample = make_train_samples(&[seq], layout, 10).unwrap().remove(0);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for baseline in [BaselineKind::Mixer, BaselineKind::DctGcn] {
        for variant in [EncoderVariant::None, EncoderVariant::Mlp, EncoderVariant::Gru] {
            let mut cfg = BundleConfig::new(baseline, variant, Wiring::Inserted, layout, 15);
            cfg.init_seed = 5;
            let mut bundle = PredictorBundle::new(cfg).unwrap();
            perturb_zero_layers(&mut bundle, &mut rng);
            let err = gradient_check(&bundle, &sample, 50, 1e-5, 9).unwrap();
            worst = worst.max(err);
            parts.push(format!("{baseline}/{variant} {err:.1e}"));
        }
    }
    record(
        out,
        "4 gradient check",
        worst < 1e-4,
        start.elapsed(),
        Duration::from_secs(300),
        format!("max relative error {worst:.2e} [{}]", parts.join(", ")),
    );
}

/// Desk-scale experiment shared by criteria 5, 6, 8 and 9. The test split
/// uses 400 sequences (the floor is 50): with 100, the standard error of a
/// per-round average is about 5%, which alone puts the round-to-round spread
/// near the 0.15 stability bound.
const DESK_SPEC: &str = "\
seed = 1
train_sequences = 200
test_sequences = 400
n_obs = 10
n_pred = 10
max_r = 10
baseline = mixer
variant = mlp
wiring = inserted
epochs = 100
";

/// Same run on transition data. Training sequences match the 110-frame test
/// length so both motion regimes and the switch between them are covered.
const TRANSITION_SPEC: &str = "\
seed = 1
motion_mode = transition
train_sequences = 200
test_sequences = 400
train_length = 110
n_obs = 10
n_pred = 10
max_r = 10
baseline = mixer
variant = mlp
wiring = inserted
epochs = 100
";

fn spec_in(text: &str, dir: &Path) -> ExperimentSpec {
    ExperimentSpec::parse(&format!("{text}out_dir = {}\n", dir.display())).unwrap()
}

struct DeskRun {
    comparison: ModeComparison,
    inserted_r2: f64,
    corrective_r2: f64,
    train_secs: [f64; 2],
}

/// Trains inserted and corrective wiring through the CLI entry points,
/// writes history, report and plot CSVs to `dir`, and evaluates both.
fn desk_run(dir: &Path) -> DeskRun {
    let spec = spec_in(DESK_SPEC, dir);
    let corrective = spec.with_bundle(EncoderVariant::Mlp, Wiring::Corrective);
    let t0 = Instant::now();
    let ins = cmd_train(&spec, None).unwrap();
    let t1 = Instant::now();
    let cor = cmd_train(&corrective, None).unwrap();
    let t2 = Instant::now();
    cmd_evaluate(&spec, Some(&ins.checkpoint), Some(&cor.checkpoint), false).unwrap();
    let data = prepare_datasets(&spec).unwrap();
    let inserted = checkpoint::load(&ins.checkpoint).unwrap();
    let corrected = checkpoint::load(&cor.checkpoint).unwrap();
    let comparison = compare_modes(&inserted, &data.test, &spec.testpoints).unwrap();
    let corr_cmp = compare_modes(&corrected, &data.test, &spec.testpoints).unwrap();
    DeskRun {
        inserted_r2: comparison.deviation_on.per_round_avg[&2],
        corrective_r2: corr_cmp.deviation_on.per_round_avg[&2],
        comparison,
        train_secs: [(t1 - t0).as_secs_f64(), (t2 - t1).as_secs_f64()],
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criteria_desk(out: &mut Vec<Outcome>) {
    let root = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (root.path().join("a"), root.path().join("b"));
    let start = Instant::now();
    let run = desk_run(&dir_a);
    let elapsed = start.elapsed();
    let cmp = &run.comparison;

    let mean = cmp.mean_improvement(2, 10);
    let min_round = (2..=10).map(|r| cmp.improvement[&r]).fold(f64::INFINITY, f64::min);
    let per_round: Vec<String> = (2..=10).map(|r| format!("r{r} {:+.1}%", 100.0 * cmp.improvement[&r])).collect();
    record(
        out,
        "5 deviation feedback helps",
        mean >= 0.03 && min_round >= 0.0,
        elapsed - Duration::from_secs_f64(run.train_secs[1]),
        Duration::from_secs(900),
        format!(
            "mean improvement r2..10 {:.2}% (need >= 3%), worst round {:+.2}% (need >= 0) [{}]",
            100.0 * mean,
            100.0 * min_round,
            per_round.join(", ")
        ),
    );

    let on: Vec<f64> = (2..=10).map(|r| cmp.deviation_on.per_round_avg[&r]).collect();
    let hi = on.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = on.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / (on.iter().sum::<f64>() / on.len() as f64);
    record(
        out,
        "6 stable across rounds",
        spread < 0.15,
        Duration::ZERO,
        Duration::from_secs(1),
        format!("(max-min)/mean of deviation_on r2..10 = {spread:.4} (need < 0.15)"),
    );

    record(
        out,
        "8 inserted <= corrective",
        run.inserted_r2 <= run.corrective_r2,
        Duration::from_secs_f64(run.train_secs.iter().sum()),
        Duration::from_secs(1200),
        format!(
            "round-2 average MPJPE inserted {:.5} vs corrective {:.5}",
            run.inserted_r2, run.corrective_r2
        ),
    );

    let start = Instant::now();
    desk_run(&dir_b);
    let (a, b) = (csv_files(&dir_a), csv_files(&dir_b));
    let differing: Vec<&String> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| &x.0).collect();
    let names: Vec<&String> = a.iter().map(|(n, _)| n).collect();
    record(
        out,
        "9 determinism",
        a.len() == b.len() && a.len() >= 4 && differing.is_empty(),
        start.elapsed(),
        Duration::from_secs(1200),
        format!("{} CSVs compared {:?}, differing {:?}", a.len(), names, differing),
    );
}

fn criterion_transition(out: &mut Vec<Outcome>) {
    let root = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let spec = spec_in(TRANSITION_SPEC, root.path());
    let trained = cmd_train(&spec, None).unwrap();
    let bundle = checkpoint::load(&trained.checkpoint).unwrap();
    let data = prepare_datasets(&spec).unwrap();
    let cmp = compare_modes(&bundle, &data.test, &spec.testpoints).unwrap();
    let mean = cmp.mean_improvement(2, 5);
    let per_round: Vec<String> = (2..=5).map(|r| format!("r{r} {:+.1}%", 100.0 * cmp.improvement[&r])).collect();
    record(
        out,
        "7 transition robustness",
        mean >= 0.02,
        start.elapsed(),
        Duration::from_secs(900),
        format!("mean improvement r2..5 {:.2}% (need >= 2%) [{}]", 100.0 * mean, per_round.join(", ")),
    );
}

fn main() {
    let mut out = Vec::new();
    criterion_overlap(&mut out);
    criterion_deviation_algebra(&mut out);
    criterion_zero_init(&mut out);
    criterion_gradients(&mut out);
    criteria_desk(&mut out);
    criterion_transition(&mut out);
    out.sort_by_key(|o| o.id);
    println!("---- summary ----");
    for o in &out {
        println!("{} criterion {}", if o.pass { "PASS" } else { "FAIL" }, o.id);
    }
    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.pass).collect();
    if !failed.is_empty() {
        for o in failed {
            eprintln!("failed criterion {}: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}
