//! Action coupling: mixing-rate sampling, label mixing, energy-weighted
//! sequence coupling, and pseudo-compositional dataset construction.
//!
//! A coupled joint position is the energy-weighted convex combination
//!   y~ = (l*Ei*yi + (1-l)*Ej*yj) / (l*Ei + (1-l)*Ej)
//! falling back to the plain mix l*yi + (1-l)*yj when the denominator
//! vanishes (both parts static).

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::energy::{compute_part_energy, PartEnergy};
use crate::error::{Error, Result};
use crate::motion::{ActionLabel, BodyPartition, MixedLabel, MotionSequence, Pose, NUM_JOINTS};

/// Denominator floor below which coupling falls back to the plain convex mix.
pub const DEFAULT_DENOM_EPS: f64 = 1e-12;

/// Distribution of the mixing rate lambda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MixingRateDist {
    /// N(0.5, std^2), rejection-sampled to [0,1]. The Gaussian parameter is a
    /// standard deviation (0.1 by default).
    Gaussian { std: f64 },
    /// Beta(alpha, alpha), the mix-up convention.
    Beta { alpha: f64 },
    Uniform,
    Fixed { value: f64 },
}

impl MixingRateDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            MixingRateDist::Gaussian { std } if !(*std > 0.0) => {
                Err(Error::invalid_argument(format!("gaussian std must be > 0, got {std}")))
            }
            MixingRateDist::Beta { alpha } if !(*alpha > 0.0) => {
                Err(Error::invalid_argument(format!("beta alpha must be > 0, got {alpha}")))
            }
            MixingRateDist::Fixed { value } if !(0.0..=1.0).contains(value) => {
                Err(Error::invalid_argument(format!("fixed lambda must be in [0,1], got {value}")))
            }
            _ => Ok(()),
        }
    }

    /// Parse CLI-style spec strings: `gaussian:0.1`, `beta:2.0`, `uniform`, `fixed:0.5`.
    pub fn parse(spec: &str) -> Result<Self> {
        let dist = match spec.split_once(':') {
            None if spec == "uniform" => MixingRateDist::Uniform,
            Some(("gaussian", v)) => MixingRateDist::Gaussian {
                std: v.parse().map_err(|_| Error::invalid_argument(format!("bad gaussian std `{v}`")))?,
            },
            Some(("beta", v)) => MixingRateDist::Beta {
                alpha: v.parse().map_err(|_| Error::invalid_argument(format!("bad beta alpha `{v}`")))?,
            },
            Some(("fixed", v)) => MixingRateDist::Fixed {
                value: v.parse().map_err(|_| Error::invalid_argument(format!("bad fixed lambda `{v}`")))?,
            },
            _ => return Err(Error::invalid_argument(format!("unknown mixing distribution `{spec}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Sample a mixing rate in [0,1]. Gaussian samples outside the interval are
/// rejected and redrawn, preserving the density shape near 0.5.
pub fn sample_lambda<R: Rng>(dist: &MixingRateDist, rng: &mut R) -> f64 {
    match dist {
        MixingRateDist::Fixed { value } => *value,
        MixingRateDist::Uniform => rng.gen::<f64>(),
        MixingRateDist::Beta { alpha } => {
            let beta = Beta::new(*alpha, *alpha).expect("validated alpha");
            beta.sample(rng)
        }
        MixingRateDist::Gaussian { std } => {
            let normal = Normal::new(0.5, *std).expect("validated std");
            loop {
                let x = normal.sample(rng);
                if (0.0..=1.0).contains(&x) {
                    return x;
                }
            }
        }
    }
}

/// Mix two distinct class labels: weight lambda on class i, 1-lambda on class j.
pub fn couple_labels(x_i: &ActionLabel, x_j: &ActionLabel, lambda: f64) -> Result<MixedLabel> {
    if x_i.num_classes != x_j.num_classes {
        return Err(Error::invalid_argument(format!(
            "label vocabularies differ: {} vs {}",
            x_i.num_classes, x_j.num_classes
        )));
    }
    if x_i.class_id == x_j.class_id {
        return Err(Error::invalid_argument(format!(
            "cannot couple a class with itself (class {})",
            x_i.class_id
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid_argument(format!("lambda must be in [0,1], got {lambda}")));
    }
    let mut weights = vec![0.0; x_i.num_classes];
    weights[x_i.class_id] = lambda;
    weights[x_j.class_id] = 1.0 - lambda;
    Ok(MixedLabel { weights })
}

/// Energy-weighted coupling of two equal-length sequences, per joint and frame.
pub fn couple_sequences(
    y_i: &MotionSequence,
    y_j: &MotionSequence,
    e_i: &PartEnergy,
    e_j: &PartEnergy,
    lambda: f64,
) -> Result<Vec<Pose>> {
    couple_sequences_eps(y_i, y_j, &e_i.per_joint, &e_j.per_joint, lambda, DEFAULT_DENOM_EPS)
}

/// As `couple_sequences`, with explicit per-joint energies and denominator floor.
pub fn couple_sequences_eps(
    y_i: &MotionSequence,
    y_j: &MotionSequence,
    e_i: &[f64; NUM_JOINTS],
    e_j: &[f64; NUM_JOINTS],
    lambda: f64,
    denom_eps: f64,
) -> Result<Vec<Pose>> {
    if y_i.len() != y_j.len() {
        return Err(Error::invalid_argument(format!(
            "sequence lengths differ: {} vs {}",
            y_i.len(),
            y_j.len()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid_argument(format!("lambda must be in [0,1], got {lambda}")));
    }
    let t = y_i.len();
    let mut frames = Vec::with_capacity(t);
    for k in 0..t {
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for n in 0..NUM_JOINTS {
            let wi = lambda * e_i[n];
            let wj = (1.0 - lambda) * e_j[n];
            let a = &y_i.frames[k].joints[n];
            let b = &y_j.frames[k].joints[n];
            // Exact boundary recovery when one side's weight is zero.
            joints[n] = if wj == 0.0 && wi > 0.0 {
                *a
            } else if wi == 0.0 && wj > 0.0 {
                *b
            } else if wi + wj < denom_eps {
                [
                    lambda * a[0] + (1.0 - lambda) * b[0],
                    lambda * a[1] + (1.0 - lambda) * b[1],
                    lambda * a[2] + (1.0 - lambda) * b[2],
                ]
            } else {
                let den = wi + wj;
                [
                    (wi * a[0] + wj * b[0]) / den,
                    (wi * a[1] + wj * b[1]) / den,
                    (wi * a[2] + wj * b[2]) / den,
                ]
            };
        }
        frames.push(Pose { joints });
    }
    Ok(frames)
}

/// Which class pairs may be coupled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PairingPolicy {
    /// Every unordered pair of distinct classes present in the data.
    FullClass,
    /// Explicit allowlist of unordered class pairs.
    Allowlist { pairs: Vec<(usize, usize)> },
}

impl PairingPolicy {
    /// Resolve to the sorted list of unordered pairs over `classes`.
    pub fn resolve(&self, classes: &[usize]) -> Result<Vec<(usize, usize)>> {
        let mut pairs = match self {
            PairingPolicy::FullClass => {
                let mut out = Vec::new();
                for (i, &a) in classes.iter().enumerate() {
                    for &b in &classes[i + 1..] {
                        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                        out.push((lo, hi));
                    }
                }
                out
            }
            PairingPolicy::Allowlist { pairs } => {
                let mut out = Vec::new();
                for &(a, b) in pairs {
                    if a == b {
                        return Err(Error::invalid_argument(format!("pair ({a},{b}) couples a class with itself")));
                    }
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    if classes.contains(&lo) && classes.contains(&hi) {
                        out.push((lo, hi));
                    }
                }
                out
            }
        };
        pairs.sort_unstable();
        pairs.dedup();
        if pairs.is_empty() {
            return Err(Error::invalid_argument("pairing policy admits no class pairs"));
        }
        Ok(pairs)
    }
}

/// A coupled training target with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoComposite {
    pub id: String,
    pub frames: Vec<Pose>,
    pub fps: f64,
    pub mixed_label: MixedLabel,
    pub lambda: f64,
    /// Ids of the source sequences (i, j).
    pub sources: (String, String),
    /// Indices of the sources in the input dataset order (i, j).
    pub source_indices: (usize, usize),
    pub source_classes: (usize, usize),
}

impl PseudoComposite {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_classes.0 == self.source_classes.1 {
            return Err(Error::validation("composite sources share a class"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::validation(format!("lambda {} outside [0,1]", self.lambda)));
        }
        self.mixed_label.validate()
    }
}

/// Build `count` pseudo-composites from a sub-action dataset.
///
/// Pair selection is uniform over the policy's class pairs, then uniform over
/// sequences within each class. Unequal-length pairs are resampled to the
/// shorter length before coupling. Sequence ids are `composite-NNNN`.
pub fn build_pseudo_dataset<R: Rng>(
    data: &[MotionSequence],
    ids: &[String],
    policy: &PairingPolicy,
    count: usize,
    dist: &MixingRateDist,
    partition: &BodyPartition,
    rng: &mut R,
) -> Result<Vec<PseudoComposite>> {
    build_pseudo_dataset_masked(data, ids, policy, count, dist, partition, true, rng)
}

/// As `build_pseudo_dataset`; with `use_energy_mask` false the attention mask
/// is set to one everywhere, so coupling degenerates to the plain convex mix.
pub fn build_pseudo_dataset_masked<R: Rng>(
    data: &[MotionSequence],
    ids: &[String],
    policy: &PairingPolicy,
    count: usize,
    dist: &MixingRateDist,
    partition: &BodyPartition,
    use_energy_mask: bool,
    rng: &mut R,
) -> Result<Vec<PseudoComposite>> {
    if data.len() != ids.len() {
        return Err(Error::invalid_argument("data and ids lengths differ"));
    }
    dist.validate()?;
    let mut classes: Vec<usize> = data.iter().map(|s| s.label.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "need at least two classes to couple, found {}",
            classes.len()
        )));
    }
    let pairs = policy.resolve(&classes)?;
    // per-class member indices, in dataset order
    let members = |class: usize| -> Vec<usize> {
        data.iter().enumerate().filter(|(_, s)| s.label.class_id == class).map(|(k, _)| k).collect()
    };

    let mut out = Vec::with_capacity(count);
    for draw in 0..count {
        let (class_i, class_j) = pairs[rng.gen_range(0..pairs.len())];
        let mi = members(class_i);
        let mj = members(class_j);
        let src_i = mi[rng.gen_range(0..mi.len())];
        let src_j = mj[rng.gen_range(0..mj.len())];
        let lambda = sample_lambda(dist, rng);

        let t = data[src_i].len().min(data[src_j].len());
        let y_i = data[src_i].resample(t)?;
        let y_j = data[src_j].resample(t)?;
        let (e_i, e_j) = if use_energy_mask {
            (compute_part_energy(&y_i, partition)?.per_joint, compute_part_energy(&y_j, partition)?.per_joint)
        } else {
            ([1.0; NUM_JOINTS], [1.0; NUM_JOINTS])
        };
        let frames = couple_sequences_eps(&y_i, &y_j, &e_i, &e_j, lambda, DEFAULT_DENOM_EPS)?;
        let mixed_label = couple_labels(&y_i.label, &y_j.label, lambda)?;

        let composite = PseudoComposite {
            id: format!("composite-{draw:04}"),
            frames,
            fps: y_i.fps,
            mixed_label,
            lambda,
            sources: (ids[src_i].clone(), ids[src_j].clone()),
            source_indices: (src_i, src_j),
            source_classes: (class_i, class_j),
        };
        composite.validate()?;
        out.push(composite);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{generate_sub_action, SubActionKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn fixed_lambda_is_degenerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(sample_lambda(&MixingRateDist::Fixed { value: 0.3 }, &mut rng), 0.3);
        }
    }

    #[test]
    fn gaussian_lambda_concentrates_and_stays_in_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(123);
        let dist = MixingRateDist::Gaussian { std: 0.1 };
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let l = sample_lambda(&dist, &mut rng);
            assert!((0.0..=1.0).contains(&l));
            sum += l;
        }
        let mean = sum / n as f64;
        assert!((0.49..=0.51).contains(&mean), "mean {mean}");
    }

    #[test]
    fn tiny_std_concentrates_at_half() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let l = sample_lambda(&MixingRateDist::Gaussian { std: 1e-9 }, &mut rng);
        assert!((l - 0.5).abs() < 1e-6);
    }

    #[test]
    fn label_mixing_formula() {
        let a = ActionLabel::new(2, 12).unwrap();
        let b = ActionLabel::new(5, 12).unwrap();
        let m = couple_labels(&a, &b, 0.5).unwrap();
        assert_eq!(m.weights[2], 0.5);
        assert_eq!(m.weights[5], 0.5);
        assert_eq!(m.weights.iter().sum::<f64>(), 1.0);

        let a = ActionLabel::new(0, 4).unwrap();
        let b = ActionLabel::new(1, 4).unwrap();
        let m = couple_labels(&a, &b, 0.3).unwrap();
        assert_eq!(m.weights, vec![0.3, 0.7, 0.0, 0.0]);

        // boundary: lambda = 1 gives the one-hot of class i
        let m = couple_labels(&a, &b, 1.0).unwrap();
        assert_eq!(m.weights, a.one_hot());

        assert!(couple_labels(&a, &a, 0.5).is_err());
    }

    fn two_sources(t: usize) -> (MotionSequence, MotionSequence) {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let a = generate_sub_action(SubActionKind::ArmWaveLeft, t, &mut rng).unwrap();
        let b = generate_sub_action(SubActionKind::LegMarch, t, &mut rng).unwrap();
        (a, b)
    }

    #[test]
    fn equal_energies_at_half_lambda_average() {
        let (a, b) = two_sources(6);
        let e = [1.7; NUM_JOINTS];
        let frames = couple_sequences_eps(&a, &b, &e, &e, 0.5, DEFAULT_DENOM_EPS).unwrap();
        for k in 0..frames.len() {
            for n in 0..NUM_JOINTS {
                for c in 0..3 {
                    let want = (a.frames[k].joints[n][c] + b.frames[k].joints[n][c]) / 2.0;
                    assert!((frames[k].joints[n][c] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_opposing_energy_recovers_source_exactly() {
        let (a, b) = two_sources(5);
        let e_i = [0.8; NUM_JOINTS];
        let e_j = [0.0; NUM_JOINTS];
        let frames = couple_sequences_eps(&a, &b, &e_i, &e_j, 0.7, DEFAULT_DENOM_EPS).unwrap();
        for (k, f) in frames.iter().enumerate() {
            assert_eq!(f.joints, a.frames[k].joints);
        }
    }

    #[test]
    fn direct_weight_evaluation() {
        // lambda=0.25, Ei=2, Ej=1, yi=(1,0,0), yj=(0,0,0): weights 0.5, 0.75 -> 0.4
        let label = ActionLabel::new(0, 2).unwrap();
        let mut fa = Pose::neutral();
        let mut fb = Pose::neutral();
        for n in 0..NUM_JOINTS {
            fa.joints[n] = [1.0, 0.0, 0.0];
            fb.joints[n] = [0.0, 0.0, 0.0];
        }
        let a = MotionSequence::new(vec![fa.clone(), fa], label, 20.0).unwrap();
        let label_b = ActionLabel::new(1, 2).unwrap();
        let b = MotionSequence::new(vec![fb.clone(), fb], label_b, 20.0).unwrap();
        let frames =
            couple_sequences_eps(&a, &b, &[2.0; NUM_JOINTS], &[1.0; NUM_JOINTS], 0.25, DEFAULT_DENOM_EPS).unwrap();
        for f in &frames {
            for n in 0..NUM_JOINTS {
                assert!((f.joints[n][0] - 0.4).abs() < 1e-15);
                assert_eq!(f.joints[n][1], 0.0);
            }
        }
    }

    #[test]
    fn both_static_falls_back_to_plain_mix() {
        let (a, b) = two_sources(4);
        let zero = [0.0; NUM_JOINTS];
        let frames = couple_sequences_eps(&a, &b, &zero, &zero, 0.25, DEFAULT_DENOM_EPS).unwrap();
        for k in 0..frames.len() {
            for n in 0..NUM_JOINTS {
                for c in 0..3 {
                    let want = 0.25 * a.frames[k].joints[n][c] + 0.75 * b.frames[k].joints[n][c];
                    assert!((frames[k].joints[n][c] - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let (a, _) = two_sources(4);
        let (_, b) = two_sources(6);
        let e = [1.0; NUM_JOINTS];
        assert!(couple_sequences_eps(&a, &b, &e, &e, 0.5, DEFAULT_DENOM_EPS).is_err());
    }

    fn toy_dataset(kinds: &[SubActionKind], per_class: usize, t: usize) -> (Vec<MotionSequence>, Vec<String>) {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut data = Vec::new();
        let mut ids = Vec::new();
        for (c, kind) in kinds.iter().enumerate() {
            for k in 0..per_class {
                let label = ActionLabel::new(c, kinds.len()).unwrap();
                let seq = crate::motion::generate_sub_action_with(
                    *kind,
                    &crate::motion::GenParams::default(),
                    t,
                    20.0,
                    label,
                    &mut rng,
                )
                .unwrap();
                data.push(seq);
                ids.push(format!("seq-{c}-{k}"));
            }
        }
        (data, ids)
    }

    #[test]
    fn two_classes_single_pair() {
        let (data, ids) = toy_dataset(&[SubActionKind::ArmWaveLeft, SubActionKind::LegMarch], 3, 8);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let partition = BodyPartition::default_five();
        let out = build_pseudo_dataset(
            &data,
            &ids,
            &PairingPolicy::FullClass,
            10,
            &MixingRateDist::Gaussian { std: 0.1 },
            &partition,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.len(), 10);
        for c in &out {
            assert_eq!(c.source_classes, (0, 1));
            assert_eq!(c.len(), 8);
        }
    }

    #[test]
    fn empty_policy_rejected() {
        let (data, ids) = toy_dataset(&[SubActionKind::ArmWaveLeft, SubActionKind::LegMarch], 2, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let partition = BodyPartition::default_five();
        let policy = PairingPolicy::Allowlist { pairs: vec![(4, 5)] };
        assert!(build_pseudo_dataset(
            &data,
            &ids,
            &policy,
            5,
            &MixingRateDist::Uniform,
            &partition,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn pair_frequencies_uniform_within_binomial_bounds() {
        let kinds =
            [SubActionKind::ArmWaveLeft, SubActionKind::ArmWaveRight, SubActionKind::LegMarch, SubActionKind::LegKick];
        let (data, ids) = toy_dataset(&kinds, 2, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let partition = BodyPartition::default_five();
        let count = 1000;
        let out = build_pseudo_dataset(
            &data,
            &ids,
            &PairingPolicy::FullClass,
            count,
            &MixingRateDist::Uniform,
            &partition,
            &mut rng,
        )
        .unwrap();
        let mut freq = std::collections::HashMap::new();
        for c in &out {
            *freq.entry(c.source_classes).or_insert(0usize) += 1;
        }
        assert_eq!(freq.len(), 6);
        let p = 1.0 / 6.0;
        let sigma = (count as f64 * p * (1.0 - p)).sqrt();
        for (&pair, &n) in &freq {
            let dev = (n as f64 - count as f64 * p).abs();
            assert!(dev <= 3.0 * sigma, "pair {pair:?} count {n} deviates {dev:.1} > 3 sigma");
        }
    }

    #[test]
    fn convexity_and_boundary_properties() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let yi = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>(), rng.gen::<f64>()];
            let yj = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>(), rng.gen::<f64>()];
            let ei = rng.gen::<f64>() * 3.0;
            let ej = rng.gen::<f64>() * 3.0;
            let lambda = rng.gen::<f64>();
            let wi = lambda * ei;
            let wj = (1.0 - lambda) * ej;
            let out = if wj == 0.0 && wi > 0.0 {
                yi
            } else if wi == 0.0 && wj > 0.0 {
                yj
            } else if wi + wj < DEFAULT_DENOM_EPS {
                [0, 1, 2].map(|c| lambda * yi[c] + (1.0 - lambda) * yj[c])
            } else {
                [0, 1, 2].map(|c| (wi * yi[c] + wj * yj[c]) / (wi + wj))
            };
            // on-segment check: out = yj + t (yi - yj) for t in [0,1]
            let t = if wi + wj < DEFAULT_DENOM_EPS { lambda } else { wi / (wi + wj) };
            assert!((0.0..=1.0).contains(&t));
            for c in 0..3 {
                let want = yj[c] + t * (yi[c] - yj[c]);
                assert!((out[c] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dominance_preserved_under_strong_energy_ratio() {
        // Source i dominant part has >= 10x source j's energy there; at
        // lambda = 0.5 the composite's trajectory on that part stays closer to i.
        let (a, b) = two_sources(12);
        let partition = BodyPartition::default_five();
        let e_a = compute_part_energy(&a, &partition).unwrap();
        let e_b = compute_part_energy(&b, &partition).unwrap();
        let arm = partition.part_index("left-arm").unwrap();
        assert!(e_a.per_part[arm] >= 10.0 * e_b.per_part[arm]);
        let frames = couple_sequences(&a, &b, &e_a, &e_b, 0.5).unwrap();
        let arm_joints = &partition.parts[arm].1;
        let mut d_i = 0.0;
        let mut d_j = 0.0;
        for (k, f) in frames.iter().enumerate() {
            for &n in arm_joints {
                for c in 0..3 {
                    d_i += (f.joints[n][c] - a.frames[k].joints[n][c]).powi(2);
                    d_j += (f.joints[n][c] - b.frames[k].joints[n][c]).powi(2);
                }
            }
        }
        assert!(d_i < d_j);
    }

    #[test]
    fn parse_dist_specs() {
        assert_eq!(MixingRateDist::parse("gaussian:0.1").unwrap(), MixingRateDist::Gaussian { std: 0.1 });
        assert_eq!(MixingRateDist::parse("beta:2").unwrap(), MixingRateDist::Beta { alpha: 2.0 });
        assert_eq!(MixingRateDist::parse("uniform").unwrap(), MixingRateDist::Uniform);
        assert_eq!(MixingRateDist::parse("fixed:0.4").unwrap(), MixingRateDist::Fixed { value: 0.4 });
        assert!(MixingRateDist::parse("gauss").is_err());
        assert!(MixingRateDist::parse("fixed:1.5").is_err());
    }
}
