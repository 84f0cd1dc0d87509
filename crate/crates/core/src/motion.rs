//! Pose sequences, skeleton metadata, the motion text format and a
//! forward-kinematics generator for synthetic desk-scale data.
//!
//! Poses are stored frame-major: a sequence is `L` rows of `K` values with
//! joints flattened as `(j0.x, j0.y, j0.z, j1.x, ...)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub joint_names: Vec<String>,
    pub dims_per_joint: usize,
    /// `(parent, child)` pairs. Joint 0 is the root.
    pub edges: Vec<(usize, usize)>,
}

impl SkeletonSpec {
    pub fn new(
        joint_names: Vec<String>,
        dims_per_joint: usize,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let skeleton = Self {
            joint_names,
            dims_per_joint,
            edges,
        };
        skeleton.validate()?;
        Ok(skeleton)
    }

    /// Root plus two 2-link chains, 3D coordinates (K = 15).
    pub fn desk() -> Self {
        let names = ["root", "left_upper", "left_lower", "right_upper", "right_lower"];
        Self {
            joint_names: names.iter().map(|s| s.to_string()).collect(),
            dims_per_joint: 3,
            edges: vec![(0, 1), (1, 2), (0, 3), (3, 4)],
        }
    }

    /// Skeleton with no edge metadata beyond a star around joint 0, used when
    /// ingesting files whose header only carries `K`.
    pub fn star(joint_count: usize, dims_per_joint: usize) -> Self {
        Self {
            joint_names: (0..joint_count).map(|j| format!("j{j}")).collect(),
            dims_per_joint,
            edges: (1..joint_count).map(|c| (0, c)).collect(),
        }
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn pose_dim(&self) -> usize {
        self.joint_count() * self.dims_per_joint
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.joint_count();
        if j == 0 || self.dims_per_joint == 0 {
            return Err(Error::Config("skeleton needs at least one joint and one dim".into()));
        }
        if self.edges.len() != j - 1 {
            return Err(Error::Config(format!(
                "skeleton with {j} joints needs {} edges, got {}",
                j - 1,
                self.edges.len()
            )));
        }
        self.parents().map(|_| ())
    }

    /// Parent index for every joint (`None` for the root), checking that the
    /// edges form a tree rooted at joint 0.
    pub fn parents(&self) -> Result<Vec<Option<usize>>> {
        let j = self.joint_count();
        let mut parent = vec![None; j];
        for &(p, c) in &self.edges {
            if p >= j || c >= j {
                return Err(Error::Config(format!("edge ({p}, {c}) out of range for {j} joints")));
            }
            if c == 0 || parent[c].is_some() {
                return Err(Error::Config(format!("joint {c} has more than one parent")));
            }
            parent[c] = Some(p);
        }
        // every joint must reach the root
        for start in 0..j {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                cur = p;
                steps += 1;
                if steps > j {
                    return Err(Error::Config("skeleton edges contain a cycle".into()));
                }
            }
            if cur != 0 {
                return Err(Error::Config(format!("joint {start} is not connected to the root")));
            }
        }
        Ok(parent)
    }

    /// Joints ordered so every parent precedes its children.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let parent = self.parents()?;
        let mut order = vec![0];
        let mut i = 0;
        while i < order.len() {
            let p = order[i];
            order.extend((0..self.joint_count()).filter(|&c| parent[c] == Some(p)));
            i += 1;
        }
        Ok(order)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub skeleton: SkeletonSpec,
    pub frames: Array2<f64>,
    pub fps: f64,
    pub label: Option<String>,
}

impl MotionSequence {
    pub fn new(
        skeleton: SkeletonSpec,
        frames: Array2<f64>,
        fps: f64,
        label: Option<String>,
    ) -> Result<Self> {
        let seq = Self {
            skeleton,
            frames,
            fps,
            label,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn pose_dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.nrows() == 0 {
            return Err(Error::Config("motion sequence has no frames".into()));
        }
        if self.frames.ncols() != self.skeleton.pose_dim() {
            return Err(Error::Dimension(format!(
                "frames have {} columns, skeleton expects {}",
                self.frames.ncols(),
                self.skeleton.pose_dim()
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if self.frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("motion sequence contains non-finite values".into()));
        }
        if let Some(label) = &self.label {
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("label {label:?} must be a single token")));
            }
        }
        Ok(())
    }

    /// Keeps only `joints` (in the given order). Edges are not preserved, so
    /// the result carries a star skeleton with the selected joint names.
    pub fn select_joints(&self, joints: &[usize]) -> Result<Self> {
        let j = self.skeleton.joint_count();
        let d = self.skeleton.dims_per_joint;
        if joints.is_empty() {
            return Err(Error::Config("joint selection is empty".into()));
        }
        if let Some(&bad) = joints.iter().find(|&&i| i >= j) {
            return Err(Error::Config(format!("joint {bad} out of range for {j} joints")));
        }
        let mut seen = vec![false; j];
        for &i in joints {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("joint {i} selected twice")));
            }
        }
        let cols: Vec<usize> = joints.iter().flat_map(|&i| i * d..(i + 1) * d).collect();
        let mut skeleton = SkeletonSpec::star(joints.len(), d);
        skeleton.joint_names = joints.iter().map(|&i| self.skeleton.joint_names[i].clone()).collect();
        Self::new(skeleton, self.frames.select(Axis(1), &cols), self.fps, self.label.clone())
    }
}

/// Reads a motion file: header `L K fps [label]`, then `L` rows of `K` numbers.
///
/// The file does not carry skeleton topology, so the returned sequence uses
/// [`SkeletonSpec::star`] with 3 dims per joint when `K` is divisible by 3.
pub fn load_motion(path: impl AsRef<Path>) -> Result<MotionSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_motion(&text, path)
}

fn parse_motion(text: &str, path: &Path) -> Result<MotionSequence> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(perr(1, format!("header must be `L K fps [label]`, got {header:?}")));
    }
    let rows: usize = fields[0]
        .parse()
        .map_err(|_| perr(1, format!("bad frame count {:?}", fields[0])))?;
    let cols: usize = fields[1]
        .parse()
        .map_err(|_| perr(1, format!("bad pose dimension {:?}", fields[1])))?;
    let fps: f64 = fields[2]
        .parse()
        .map_err(|_| perr(1, format!("bad fps {:?}", fields[2])))?;
    if rows == 0 || cols == 0 {
        return Err(perr(1, "frame count and pose dimension must be positive".into()));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(perr(1, format!("fps must be positive, got {fps}")));
    }
    let label = fields.get(3).map(|s| s.to_string());

    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if seen == rows {
            return Err(perr(lineno, format!("more than the {rows} rows declared in the header")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| perr(lineno, format!("bad number {tok:?}")))?;
            if !v.is_finite() {
                return Err(perr(lineno, format!("non-finite value {tok:?}")));
            }
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(perr(
                lineno,
                format!("row has {} values, expected {cols}", values.len() - before),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(perr(
            text.lines().count() + 1,
            format!("header declares {rows} rows but file has {seen}"),
        ));
    }
    let frames = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| perr(1, e.to_string()))?;
    let skeleton = if cols.is_multiple_of(3) {
        SkeletonSpec::star(cols / 3, 3)
    } else {
        SkeletonSpec::star(cols, 1)
    };
    Ok(MotionSequence {
        skeleton,
        frames,
        fps,
        label,
    })
}

/// Writes `seq` in the motion text format with round-trip exact numbers.
pub fn save_motion(seq: &MotionSequence, path: impl AsRef<Path>) -> Result<()> {
    seq.validate()?;
    fs::write(path, format_motion(seq))?;
    Ok(())
}

pub fn format_motion(seq: &MotionSequence) -> String {
    let mut out = String::with_capacity(seq.frames.len() * 20);
    write!(out, "{} {} {:?}", seq.len(), seq.pose_dim(), seq.fps).unwrap();
    if let Some(label) = &seq.label {
        write!(out, " {label}").unwrap();
    }
    out.push('\n');
    for row in seq.frames.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            // Debug formatting is the shortest representation that parses back exactly.
            write!(out, "{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionMode {
    Periodic,
    Drift,
    Transition,
}

impl MotionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionMode::Periodic => "periodic",
            MotionMode::Drift => "drift",
            MotionMode::Transition => "transition",
        }
    }
}

impl std::str::FromStr for MotionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(MotionMode::Periodic),
            "drift" => Ok(MotionMode::Drift),
            "transition" => Ok(MotionMode::Transition),
            other => Err(Error::Config(format!("unknown motion mode {other:?}"))),
        }
    }
}

/// Frames over which the transition blends the two parameter sets.
pub const TRANSITION_BLEND_FRAMES: usize = 5;

/// Parameters for [`generate_synthetic`].
///
/// Joint `j` rotates about `joint_axes[j]` by
/// `amplitude_j * sin(frequency_j * t / fps + phase_j)` radians, and the
/// rotation carries the bone from its parent to `j` (the root rotation turns
/// the whole body). Per-sequence variation (phases, frequency and amplitude
/// jitter, drift direction, post-transition parameters) is drawn from `seed`.
/// At a transition every joint switches to a new frequency and amplitude with
/// its phase carried over.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub skeleton: SkeletonSpec,
    pub length: usize,
    pub fps: f64,
    pub seed: u64,
    pub motion_mode: MotionMode,
    /// Angular frequency per joint, rad/s.
    pub base_frequencies: Vec<f64>,
    /// Peak joint angle per joint, rad.
    pub amplitudes: Vec<f64>,
    /// Rest offset of each joint from its parent, in the parent's frame. The
    /// root entry is ignored.
    pub bone_offsets: Vec<[f64; 3]>,
    /// Unit rotation axis per joint.
    pub joint_axes: Vec<[f64; 3]>,
    /// Relative half-width of the uniform frequency multiplier.
    pub frequency_jitter: f64,
    /// Relative half-width of the uniform amplitude multiplier.
    pub amplitude_jitter: f64,
    pub random_phase: bool,
    /// Root translation speed in drift mode, units/s.
    pub drift_speed: f64,
    /// 0-based frame where transition mode switches parameters.
    pub transition_frame: Option<usize>,
    /// `N + T` of the intended round layout; transitions must fall strictly
    /// inside `(N+T, L-N-T)`.
    pub round_span: usize,
}

impl SyntheticConfig {
    /// Default desk configuration over [`SkeletonSpec::desk`].
    pub fn desk(length: usize, seed: u64) -> Self {
        Self {
            skeleton: SkeletonSpec::desk(),
            length,
            fps: 25.0,
            seed,
            motion_mode: MotionMode::Periodic,
            base_frequencies: vec![0.8, 2.2, 3.1, 2.6, 3.5],
            amplitudes: vec![0.3, 0.8, 0.9, 0.7, 1.0],
            bone_offsets: vec![
                [0.0, 0.0, 0.0],
                [-1.0, 0.2, 0.0],
                [-0.8, 0.0, 0.0],
                [1.0, 0.2, 0.0],
                [0.8, 0.0, 0.0],
            ],
            joint_axes: vec![
                [0.0, 0.0, 1.0],
                [0.0, 0.0, 1.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [1.0, 0.0, 0.0],
            ],
            frequency_jitter: 0.3,
            amplitude_jitter: 0.3,
            random_phase: true,
            drift_speed: 0.5,
            transition_frame: None,
            round_span: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.skeleton.validate()?;
        let j = self.skeleton.joint_count();
        if self.skeleton.dims_per_joint != 3 {
            return Err(Error::Config("synthetic generator needs 3D joints".into()));
        }
        if self.length == 0 {
            return Err(Error::Config("length must be positive".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        for (name, n) in [
            ("base_frequencies", self.base_frequencies.len()),
            ("amplitudes", self.amplitudes.len()),
            ("bone_offsets", self.bone_offsets.len()),
            ("joint_axes", self.joint_axes.len()),
        ] {
            if n != j {
                return Err(Error::Config(format!("{name} has {n} entries, skeleton has {j} joints")));
            }
        }
        for axis in &self.joint_axes {
            let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("joint axis {axis:?} is not unit length")));
            }
        }
        if !(0.0..1.0).contains(&self.frequency_jitter) || !(0.0..1.0).contains(&self.amplitude_jitter)
        {
            return Err(Error::Config("jitter must lie in [0, 1)".into()));
        }
        match (self.motion_mode, self.transition_frame) {
            (MotionMode::Transition, None) => {
                return Err(Error::Config("transition mode requires transition_frame".into()))
            }
            (_, Some(f)) => {
                let lo = self.round_span;
                let hi = self.length.saturating_sub(self.round_span);
                if !(f > lo && f < hi) {
                    return Err(Error::Config(format!(
                        "transition_frame {f} must lie in ({lo}, {hi})"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

struct JointParams {
    frequency: Vec<f64>,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
}

impl JointParams {
    fn draw(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng, freq_scale: f64) -> Self {
        let j = cfg.skeleton.joint_count();
        let mut jitter = |w: f64| if w > 0.0 { rng.gen_range(1.0 - w..1.0 + w) } else { 1.0 };
        let frequency: Vec<f64> = (0..j)
            .map(|i| cfg.base_frequencies[i] * freq_scale * jitter(cfg.frequency_jitter))
            .collect();
        let amplitude: Vec<f64> = (0..j)
            .map(|i| cfg.amplitudes[i] * jitter(cfg.amplitude_jitter))
            .collect();
        let phase = (0..j)
            .map(|_| {
                if cfg.random_phase {
                    rng.gen_range(0.0..std::f64::consts::TAU)
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            frequency,
            amplitude,
            phase,
        }
    }

    fn angle(&self, joint: usize, t: f64) -> f64 {
        self.amplitude[joint] * (self.frequency[joint] * t + self.phase[joint]).sin()
    }
}

type Mat3 = [[f64; 3]; 3];

fn axis_angle(axis: [f64; 3], angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    let [x, y, z] = axis;
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_vec(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

/// Forward kinematics for a single frame given per-joint angles.
pub(crate) fn forward_kinematics(
    cfg: &SyntheticConfig,
    order: &[usize],
    parents: &[Option<usize>],
    angles: &[f64],
    root: [f64; 3],
    out: &mut [f64],
) {
    let j = cfg.skeleton.joint_count();
    let mut rot = vec![[[0.0; 3]; 3]; j];
    let mut pos = vec![[0.0; 3]; j];
    for &joint in order {
        let local = axis_angle(cfg.joint_axes[joint], angles[joint]);
        match parents[joint] {
            None => {
                rot[joint] = local;
                pos[joint] = root;
            }
            Some(p) => {
                rot[joint] = mat_mul(&rot[p], &local);
                let off = mat_vec(&rot[joint], cfg.bone_offsets[joint]);
                pos[joint] = [0, 1, 2].map(|d| pos[p][d] + off[d]);
            }
        }
    }
    for (joint, p) in pos.iter().enumerate() {
        out[joint * 3..joint * 3 + 3].copy_from_slice(p);
    }
}

/// Generates a sequence deterministically from `cfg` (seed included).
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<MotionSequence> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let first = JointParams::draw(cfg, &mut rng, 1.0);
    let second = match (cfg.motion_mode, cfg.transition_frame) {
        (MotionMode::Transition, Some(f)) => {
            let scale = rng.gen_range(0.6..1.6);
            let mut next = JointParams::draw(cfg, &mut rng, scale);
            // keep each oscillation's phase continuous at the switch, so the
            // transition changes pace and range rather than teleporting
            let tf = f as f64 / cfg.fps;
            for j in 0..next.phase.len() {
                next.phase[j] = first.phase[j] + (first.frequency[j] - next.frequency[j]) * tf;
            }
            Some(next)
        }
        _ => None,
    };
    let drift = if cfg.motion_mode == MotionMode::Drift {
        let heading = rng.gen_range(0.0..std::f64::consts::TAU);
        [heading.cos() * cfg.drift_speed, heading.sin() * cfg.drift_speed, 0.0]
    } else {
        [0.0; 3]
    };

    let j = cfg.skeleton.joint_count();
    let order = cfg.skeleton.topological_order()?;
    let parents = cfg.skeleton.parents()?;
    let mut frames = Array2::zeros((cfg.length, j * 3));
    let mut angles = vec![0.0; j];
    for (t, mut row) in frames.rows_mut().into_iter().enumerate() {
        let time = t as f64 / cfg.fps;
        let blend = match (cfg.transition_frame, &second) {
            (Some(f), Some(_)) if t >= f => {
                (((t - f) + 1) as f64 / TRANSITION_BLEND_FRAMES as f64).min(1.0)
            }
            _ => 0.0,
        };
        for (joint, angle) in angles.iter_mut().enumerate() {
            let a = first.angle(joint, time);
            *angle = match &second {
                Some(s) if blend > 0.0 => (1.0 - blend) * a + blend * s.angle(joint, time),
                _ => a,
            };
        }
        let root = [0, 1, 2].map(|d| drift[d] * time);
        let slice = row.as_slice_mut().expect("standard layout");
        forward_kinematics(cfg, &order, &parents, &angles, root, slice);
    }
    MotionSequence::new(
        cfg.skeleton.clone(),
        frames,
        cfg.fps,
        Some(cfg.motion_mode.as_str().to_string()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayView1;
    use proptest::prelude::*;
    use rand::Rng;

    fn joint(row: ArrayView1<f64>, j: usize) -> [f64; 3] {
        [row[3 * j], row[3 * j + 1], row[3 * j + 2]]
    }

    fn tmpfile(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn select_joints_keeps_columns_in_order() {
        let frames = Array2::from_shape_fn((2, 9), |(t, k)| (10 * t + k) as f64);
        let seq = MotionSequence::new(SkeletonSpec::star(3, 3), frames, 25.0, None).unwrap();
        let sub = seq.select_joints(&[2, 0]).unwrap();
        assert_eq!(sub.frames.row(1).to_vec(), vec![16.0, 17.0, 18.0, 10.0, 11.0, 12.0]);
        assert_eq!(sub.skeleton.joint_names, vec!["j2", "j0"]);
        assert!(seq.select_joints(&[3]).is_err());
        assert!(seq.select_joints(&[1, 1]).is_err());
        assert!(seq.select_joints(&[]).is_err());
    }

    #[test]
    fn loads_zero_file() {
        let mut text = String::from("4 6 25\n");
        for _ in 0..4 {
            text.push_str("0 0 0 0 0 0\n");
        }
        let f = tmpfile(&text);
        let seq = load_motion(f.path()).unwrap();
        assert_eq!(seq.len(), 4);
        assert_eq!(seq.pose_dim(), 6);
        assert!(seq.frames.iter().all(|&v| v == 0.0));
        assert_eq!(seq.label, None);
    }

    #[test]
    fn short_file_reports_row_count() {
        let f = tmpfile("4 3 25\n1 2 3\n1 2 3\n1 2 3\n");
        let err = load_motion(f.path()).unwrap_err().to_string();
        assert!(err.contains("declares 4 rows but file has 3"), "{err}");
    }

    #[test]
    fn bad_row_names_line() {
        let f = tmpfile("2 3 25\n1 2 3\n1 2\n");
        let err = load_motion(f.path()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let f = tmpfile("1 3 25\n1 NaN 3\n");
        assert!(matches!(load_motion(f.path()), Err(Error::Parse { line: 2, .. })));
        let f = tmpfile("1 3\n1 2 3\n");
        assert!(matches!(load_motion(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn exact_small_round_trip() {
        let frames = Array2::from_shape_vec((1, 3), vec![1.5, -2.25, 0.0]).unwrap();
        let seq = MotionSequence::new(SkeletonSpec::star(1, 3), frames, 25.0, None).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_motion(&seq, f.path()).unwrap();
        let text = fs::read_to_string(f.path()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "1 3 25.0");
        let back = load_motion(f.path()).unwrap();
        assert_eq!(back.frames, seq.frames);
        assert_eq!(back.label, None);
    }

    #[test]
    fn label_round_trips() {
        let frames = Array2::from_elem((2, 3), 0.125);
        let seq = MotionSequence::new(SkeletonSpec::star(1, 3), frames, 50.0, Some("walk".into()))
            .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_motion(&seq, f.path()).unwrap();
        assert_eq!(load_motion(f.path()).unwrap().label.as_deref(), Some("walk"));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let seq = MotionSequence::new(SkeletonSpec::star(1, 3), Array2::zeros((1, 3)), 25.0, None)
            .unwrap();
        let err = save_motion(&seq, "/nonexistent-dir/x/y.motion").unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn random_sequences_round_trip_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (l, k) in [(20, 12), (100, 66)] {
            let frames = Array2::from_shape_fn((l, k), |_| rng.gen_range(-1e3..1e3) * rng.gen::<f64>());
            let seq = MotionSequence::new(SkeletonSpec::star(k / 3, 3), frames, 25.0, None).unwrap();
            let f = tempfile::NamedTempFile::new().unwrap();
            save_motion(&seq, f.path()).unwrap();
            let back = load_motion(f.path()).unwrap();
            let max_diff = back
                .frames
                .iter()
                .zip(seq.frames.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert_eq!(max_diff, 0.0);
            assert!(back.frames.iter().zip(seq.frames.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn skeleton_validation() {
        assert!(SkeletonSpec::desk().validate().is_ok());
        assert_eq!(SkeletonSpec::desk().pose_dim(), 15);
        let names: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        assert!(SkeletonSpec::new(names.clone(), 3, vec![(0, 1)]).is_err());
        assert!(SkeletonSpec::new(names.clone(), 3, vec![(0, 1), (0, 5)]).is_err());
        assert!(SkeletonSpec::new(names.clone(), 3, vec![(1, 2), (2, 1)]).is_err());
        assert!(SkeletonSpec::new(names, 3, vec![(0, 1), (1, 2)]).is_ok());
    }

    #[test]
    fn generation_is_deterministic() {
        let mut cfg = SyntheticConfig::desk(60, 11);
        cfg.motion_mode = MotionMode::Transition;
        cfg.transition_frame = Some(30);
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 12;
        assert_ne!(generate_synthetic(&cfg).unwrap().frames, a.frames);
    }

    #[test]
    fn zero_frequency_is_constant() {
        let mut cfg = SyntheticConfig::desk(30, 5);
        cfg.base_frequencies = vec![0.0; 5];
        let seq = generate_synthetic(&cfg).unwrap();
        let first = seq.frames.row(0).to_owned();
        assert!(seq.frames.rows().into_iter().all(|r| r == first));
    }

    #[test]
    fn transition_frame_bounds() {
        let mut cfg = SyntheticConfig::desk(60, 1);
        cfg.motion_mode = MotionMode::Transition;
        assert!(generate_synthetic(&cfg).is_err());
        cfg.transition_frame = Some(20);
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
        cfg.transition_frame = Some(40);
        assert!(generate_synthetic(&cfg).is_err());
        cfg.transition_frame = Some(39);
        assert!(generate_synthetic(&cfg).is_ok());
    }

    #[test]
    fn two_joint_chain_matches_closed_form_rotation() {
        let length = 3.0;
        let omega = 2.0;
        let amp = 0.7;
        let fps = 25.0;
        let cfg = SyntheticConfig {
            skeleton: SkeletonSpec::new(vec!["a".into(), "b".into()], 3, vec![(0, 1)]).unwrap(),
            length: 80,
            fps,
            seed: 0,
            motion_mode: MotionMode::Periodic,
            base_frequencies: vec![0.0, omega],
            amplitudes: vec![0.0, amp],
            bone_offsets: vec![[0.0; 3], [length, 0.0, 0.0]],
            joint_axes: vec![[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]],
            frequency_jitter: 0.0,
            amplitude_jitter: 0.0,
            random_phase: false,
            drift_speed: 0.0,
            transition_frame: None,
            round_span: 20,
        };
        let seq = generate_synthetic(&cfg).unwrap();
        for t in 0..80 {
            let theta = (omega * t as f64 / fps).sin() * amp;
            let expect = [length * theta.cos(), length * theta.sin(), 0.0];
            let got = joint(seq.frames.row(t), 1);
            for d in 0..3 {
                assert!((got[d] - expect[d]).abs() < 1e-12, "frame {t}: {got:?} vs {expect:?}");
            }
        }
    }

    fn bone_lengths_hold(cfg: &SyntheticConfig) {
        let seq = generate_synthetic(cfg).unwrap();
        for row in seq.frames.rows() {
            for &(p, c) in &cfg.skeleton.edges {
                let a = joint(row, p);
                let b = joint(row, c);
                let d = (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
                let o = cfg.bone_offsets[c];
                let expect = (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt();
                assert!((d - expect).abs() <= 1e-9 * expect);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn forward_kinematics_preserves_bone_lengths(seed in 0u64..10_000, mode in 0usize..3) {
            let mut cfg = SyntheticConfig::desk(70, seed);
            cfg.motion_mode = [MotionMode::Periodic, MotionMode::Drift, MotionMode::Transition][mode];
            if cfg.motion_mode == MotionMode::Transition {
                cfg.transition_frame = Some(35);
            }
            bone_lengths_hold(&cfg);
        }

        #[test]
        fn format_then_parse_is_identity(seed in 0u64..10_000, len in 1usize..12, joints in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames = Array2::from_shape_fn((len, 3 * joints), |_| {
                let v: f64 = rng.gen_range(-1e4..1e4) * rng.gen::<f64>().powi(8);
                if rng.gen_bool(0.1) { 0.0 } else { v }
            });
            let seq = MotionSequence::new(SkeletonSpec::star(joints, 3), frames, 30.0, None).unwrap();
            let back = parse_motion(&format_motion(&seq), Path::new("mem")).unwrap();
            prop_assert!(seq.frames.iter().zip(&back.frames).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back.fps, seq.fps);
        }

        #[test]
        fn generation_is_pure(seed in 0u64..10_000) {
            let mut cfg = SyntheticConfig::desk(40, seed);
            cfg.motion_mode = MotionMode::Transition;
            cfg.transition_frame = Some(25);
            cfg.round_span = 10;
            let a = generate_synthetic(&cfg).unwrap();
            let b = generate_synthetic(&cfg.clone()).unwrap();
            prop_assert!(a.frames.iter().zip(&b.frames).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
