//! Canonical motion data types: poses, sequences, labels, the fixed body
//! partition, and procedural sub-action generators.
//!
//! The skeleton uses the 24-joint SMPL joint ordering (see `JOINT_NAMES` and
//! `docs/skeleton.md`). Coordinates are world-space meters, y up.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of joints per pose.
pub const NUM_JOINTS: usize = 24;

/// SMPL joint names, index-aligned with `Pose::joints`.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

/// The 23 edges of the SMPL kinematic tree, as (parent, child) joint indices.
pub const BONES: [(usize, usize); 23] = [
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 4),
    (2, 5),
    (3, 6),
    (4, 7),
    (5, 8),
    (6, 9),
    (7, 10),
    (8, 11),
    (9, 12),
    (9, 13),
    (9, 14),
    (12, 15),
    (13, 16),
    (14, 17),
    (16, 18),
    (17, 19),
    (18, 20),
    (19, 21),
    (20, 22),
    (21, 23),
];

/// Neutral standing pose (T-pose, arms along +/-x, meters, y up).
pub const NEUTRAL_POSE: [[f64; 3]; NUM_JOINTS] = [
    [0.00, 0.95, 0.00],  // pelvis
    [0.10, 0.90, 0.00],  // left_hip
    [-0.10, 0.90, 0.00], // right_hip
    [0.00, 1.05, 0.00],  // spine1
    [0.11, 0.50, 0.00],  // left_knee
    [-0.11, 0.50, 0.00], // right_knee
    [0.00, 1.15, 0.00],  // spine2
    [0.12, 0.10, 0.00],  // left_ankle
    [-0.12, 0.10, 0.00], // right_ankle
    [0.00, 1.25, 0.00],  // spine3
    [0.13, 0.02, 0.12],  // left_foot
    [-0.13, 0.02, 0.12], // right_foot
    [0.00, 1.40, 0.00],  // neck
    [0.08, 1.35, 0.00],  // left_collar
    [-0.08, 1.35, 0.00], // right_collar
    [0.00, 1.55, 0.00],  // head
    [0.20, 1.35, 0.00],  // left_shoulder
    [-0.20, 1.35, 0.00], // right_shoulder
    [0.45, 1.35, 0.00],  // left_elbow
    [-0.45, 1.35, 0.00], // right_elbow
    [0.70, 1.35, 0.00],  // left_wrist
    [-0.70, 1.35, 0.00], // right_wrist
    [0.80, 1.35, 0.00],  // left_hand
    [-0.80, 1.35, 0.00], // right_hand
];

/// A single skeleton pose: 24 joints, each a 3D point in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub joints: [[f64; 3]; NUM_JOINTS],
}

impl Pose {
    pub fn neutral() -> Self {
        Pose { joints: NEUTRAL_POSE }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, j) in self.joints.iter().enumerate() {
            if !j.iter().all(|c| c.is_finite()) {
                return Err(Error::validation(format!("joint {n} has non-finite coordinate")));
            }
        }
        Ok(())
    }
}

/// Sub-action class label: an index into a class vocabulary of size `num_classes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLabel {
    pub class_id: usize,
    pub num_classes: usize,
}

impl ActionLabel {
    pub fn new(class_id: usize, num_classes: usize) -> Result<Self> {
        if class_id >= num_classes {
            return Err(Error::invalid_argument(format!(
                "class_id {class_id} out of range for {num_classes} classes"
            )));
        }
        Ok(ActionLabel { class_id, num_classes })
    }

    /// One-hot encoding: sums to 1 with a single nonzero entry.
    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_classes];
        v[self.class_id] = 1.0;
        v
    }
}

/// Convex mixture over classes. In this artifact at most two entries are nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedLabel {
    pub weights: Vec<f64>,
}

impl MixedLabel {
    pub fn from_one_hot(label: &ActionLabel) -> Self {
        MixedLabel { weights: label.one_hot() }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::validation("mixed label has negative or non-finite weight"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("mixed label weights sum to {sum}, expected 1")));
        }
        let nonzero = self.weights.iter().filter(|w| **w > 0.0).count();
        if nonzero > 2 {
            return Err(Error::validation(format!("mixed label has {nonzero} nonzero entries, expected at most 2")));
        }
        Ok(())
    }
}

/// An ordered sequence of poses with a class label and frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSequence {
    pub frames: Vec<Pose>,
    pub label: ActionLabel,
    pub fps: f64,
}

impl MotionSequence {
    pub fn new(frames: Vec<Pose>, label: ActionLabel, fps: f64) -> Result<Self> {
        let seq = MotionSequence { frames, label, fps };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::validation(format!(
                "sequence has {} frames, need at least 2",
                self.frames.len()
            )));
        }
        if !(self.fps > 0.0) {
            return Err(Error::validation(format!("fps must be positive, got {}", self.fps)));
        }
        for (t, f) in self.frames.iter().enumerate() {
            f.validate().map_err(|e| Error::validation(format!("frame {t}: {e}")))?;
        }
        Ok(())
    }

    /// Uniform temporal resampling to `target_len` frames by linear
    /// interpolation over the frame index.
    pub fn resample(&self, target_len: usize) -> Result<MotionSequence> {
        if target_len < 2 {
            return Err(Error::invalid_argument("resample target length must be >= 2"));
        }
        if target_len == self.len() {
            return Ok(self.clone());
        }
        let src_last = (self.len() - 1) as f64;
        let dst_last = (target_len - 1) as f64;
        let mut frames = Vec::with_capacity(target_len);
        for k in 0..target_len {
            let pos = k as f64 / dst_last * src_last;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(self.len() - 1);
            let frac = pos - lo as f64;
            let mut joints = [[0.0; 3]; NUM_JOINTS];
            for n in 0..NUM_JOINTS {
                for c in 0..3 {
                    let a = self.frames[lo].joints[n][c];
                    let b = self.frames[hi].joints[n][c];
                    joints[n][c] = a + frac * (b - a);
                }
            }
            frames.push(Pose { joints });
        }
        Ok(MotionSequence { frames, label: self.label, fps: self.fps })
    }
}

/// Identifier for one of the five default body parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartId {
    TorsoHead,
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
}

impl PartId {
    pub const ALL: [PartId; 5] =
        [PartId::TorsoHead, PartId::LeftArm, PartId::RightArm, PartId::LeftLeg, PartId::RightLeg];

    pub fn name(&self) -> &'static str {
        match self {
            PartId::TorsoHead => "torso-head",
            PartId::LeftArm => "left-arm",
            PartId::RightArm => "right-arm",
            PartId::LeftLeg => "left-leg",
            PartId::RightLeg => "right-leg",
        }
    }
}

/// Disjoint named joint-index sets covering all 24 joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyPartition {
    pub parts: Vec<(String, Vec<usize>)>,
}

impl BodyPartition {
    /// The default 5-part partition: torso+head, arms, legs.
    pub fn default_five() -> Self {
        BodyPartition {
            parts: vec![
                ("torso-head".into(), vec![0, 3, 6, 9, 12, 13, 14, 15]),
                ("left-arm".into(), vec![16, 18, 20, 22]),
                ("right-arm".into(), vec![17, 19, 21, 23]),
                ("left-leg".into(), vec![1, 4, 7, 10]),
                ("right-leg".into(), vec![2, 5, 8, 11]),
            ],
        }
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|(n, _)| n == name)
    }

    /// Map joint index -> part index. Errors if the partition is not a
    /// disjoint cover of 0..24 with non-empty parts.
    pub fn joint_to_part(&self) -> Result<[usize; NUM_JOINTS]> {
        let mut owner = [usize::MAX; NUM_JOINTS];
        for (p, (name, joints)) in self.parts.iter().enumerate() {
            if joints.is_empty() {
                return Err(Error::validation(format!("part `{name}` is empty")));
            }
            for &n in joints {
                if n >= NUM_JOINTS {
                    return Err(Error::validation(format!("part `{name}` references joint {n} out of range")));
                }
                if owner[n] != usize::MAX {
                    return Err(Error::validation(format!("joint {n} belongs to more than one part")));
                }
                owner[n] = p;
            }
        }
        if let Some(n) = owner.iter().position(|&p| p == usize::MAX) {
            return Err(Error::validation(format!("joint {n} is not covered by any part")));
        }
        Ok(owner)
    }

    pub fn validate(&self) -> Result<()> {
        self.joint_to_part().map(|_| ())
    }
}

/// Procedural sub-action generators. Each kind predominantly moves one body
/// part; that part is its declared dominant part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubActionKind {
    ArmWaveLeft,
    ArmWaveRight,
    ArmRaiseLeft,
    LegMarch,
    LegKick,
    TorsoSway,
}

impl SubActionKind {
    pub const ALL: [SubActionKind; 6] = [
        SubActionKind::ArmWaveLeft,
        SubActionKind::ArmWaveRight,
        SubActionKind::ArmRaiseLeft,
        SubActionKind::LegMarch,
        SubActionKind::LegKick,
        SubActionKind::TorsoSway,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SubActionKind::ArmWaveLeft => "arm-wave-left",
            SubActionKind::ArmWaveRight => "arm-wave-right",
            SubActionKind::ArmRaiseLeft => "arm-raise-left",
            SubActionKind::LegMarch => "leg-march",
            SubActionKind::LegKick => "leg-kick",
            SubActionKind::TorsoSway => "torso-sway",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::invalid_argument(format!("unknown sub-action kind `{name}`")))
    }

    /// The body part whose generated per-part energy is strictly maximal at
    /// default parameters.
    pub fn dominant_part(&self) -> PartId {
        match self {
            SubActionKind::ArmWaveLeft => PartId::LeftArm,
            SubActionKind::ArmWaveRight => PartId::RightArm,
            SubActionKind::ArmRaiseLeft => PartId::LeftArm,
            SubActionKind::LegMarch => PartId::LeftLeg,
            SubActionKind::LegKick => PartId::RightLeg,
            SubActionKind::TorsoSway => PartId::TorsoHead,
        }
    }

    /// Index of this kind within `SubActionKind::ALL`.
    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|k| k == self).unwrap()
    }
}

/// Trajectory parameters for the procedural generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Scales all motion amplitudes. 0 yields a static neutral pose.
    pub amplitude: f64,
    /// Oscillation frequency in Hz.
    pub frequency_hz: f64,
    /// Standard deviation of per-coordinate Gaussian jitter, meters.
    pub jitter_std: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { amplitude: 1.0, frequency_hz: 1.0, jitter_std: 1e-3 }
    }
}

pub const DEFAULT_FPS: f64 = 20.0;

/// Generate a sub-action sequence with default parameters and fps. The label
/// indexes the full `SubActionKind` vocabulary.
pub fn generate_sub_action<R: Rng>(kind: SubActionKind, t: usize, rng: &mut R) -> Result<MotionSequence> {
    let label = ActionLabel::new(kind.index(), SubActionKind::ALL.len())?;
    generate_sub_action_with(kind, &GenParams::default(), t, DEFAULT_FPS, label, rng)
}

/// Generate a sub-action sequence with explicit parameters and label.
///
/// Joints outside the kind's active set stay at the neutral pose; every joint
/// gets Gaussian jitter of `params.jitter_std` (0 disables it).
pub fn generate_sub_action_with<R: Rng>(
    kind: SubActionKind,
    params: &GenParams,
    t: usize,
    fps: f64,
    label: ActionLabel,
    rng: &mut R,
) -> Result<MotionSequence> {
    if t < 2 {
        return Err(Error::invalid_argument(format!("frame count must be >= 2, got {t}")));
    }
    if !(fps > 0.0) {
        return Err(Error::invalid_argument(format!("fps must be positive, got {fps}")));
    }
    let jitter = if params.jitter_std > 0.0 {
        Some(Normal::new(0.0, params.jitter_std).map_err(|e| Error::invalid_argument(e.to_string()))?)
    } else {
        None
    };
    let mut frames = Vec::with_capacity(t);
    for k in 0..t {
        let time = k as f64 / fps;
        let phase = 2.0 * std::f64::consts::PI * params.frequency_hz * time;
        let mut joints = NEUTRAL_POSE;
        apply_trajectory(kind, params.amplitude, phase, &mut joints);
        if let Some(dist) = &jitter {
            for j in joints.iter_mut() {
                for c in j.iter_mut() {
                    *c += dist.sample(rng);
                }
            }
        }
        frames.push(Pose { joints });
    }
    MotionSequence::new(frames, label, fps)
}

fn apply_trajectory(kind: SubActionKind, amp: f64, phase: f64, joints: &mut [[f64; 3]; NUM_JOINTS]) {
    let s = phase.sin();
    let c = phase.cos();
    match kind {
        SubActionKind::ArmWaveLeft => {
            // shoulder 16, elbow 18, wrist 20, hand 22
            joints[16][1] += 0.05 * amp * s;
            joints[18][1] += 0.15 * amp * s;
            joints[18][2] += 0.10 * amp * c;
            joints[20][1] += 0.30 * amp * s;
            joints[20][2] += 0.20 * amp * c;
            joints[22][1] += 0.35 * amp * s;
            joints[22][2] += 0.25 * amp * c;
        }
        SubActionKind::ArmWaveRight => {
            joints[17][1] += 0.05 * amp * s;
            joints[19][1] += 0.15 * amp * s;
            joints[19][2] += 0.10 * amp * c;
            joints[21][1] += 0.30 * amp * s;
            joints[21][2] += 0.20 * amp * c;
            joints[23][1] += 0.35 * amp * s;
            joints[23][2] += 0.25 * amp * c;
        }
        SubActionKind::ArmRaiseLeft => {
            // Raise the left arm from the T-pose toward overhead; distal
            // joints arc about the shoulder in the x-y plane.
            let theta = std::f64::consts::FRAC_PI_2 * amp.min(1.0) * (0.5 - 0.5 * c);
            let (sh_x, sh_y) = (NEUTRAL_POSE[16][0], NEUTRAL_POSE[16][1]);
            for (j, r) in [(18usize, 0.25), (20, 0.50), (22, 0.60)] {
                joints[j][0] = sh_x + r * theta.cos();
                joints[j][1] = sh_y + r * theta.sin();
            }
        }
        SubActionKind::LegMarch => {
            // Left-led march: left hip/knee/ankle/foot lift, slight right
            // counter-sway. Dominant part is the left leg.
            joints[1][1] += 0.03 * amp * s;
            joints[4][1] += 0.15 * amp * s;
            joints[4][2] += 0.12 * amp * c;
            joints[7][1] += 0.25 * amp * s;
            joints[7][2] += 0.20 * amp * c;
            joints[10][1] += 0.28 * amp * s;
            joints[10][2] += 0.22 * amp * c;
            joints[8][1] -= 0.02 * amp * s;
        }
        SubActionKind::LegKick => {
            // Right-leg forward kick.
            joints[2][2] += 0.03 * amp * s;
            joints[5][2] += 0.15 * amp * s;
            joints[8][1] += 0.10 * amp * s;
            joints[8][2] += 0.30 * amp * s;
            joints[11][1] += 0.12 * amp * s;
            joints[11][2] += 0.35 * amp * s;
        }
        SubActionKind::TorsoSway => {
            // Lateral lean, displacement growing with height above the pelvis.
            for (j, coeff) in [
                (0usize, 0.02),
                (3, 0.06),
                (6, 0.10),
                (9, 0.14),
                (13, 0.16),
                (14, 0.16),
                (12, 0.18),
                (15, 0.22),
            ] {
                joints[j][0] += coeff * amp * s;
            }
        }
    }
}
