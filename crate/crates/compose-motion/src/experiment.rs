//! Shared experiment machinery: procedural dataset generation, composite
//! construction, conversion to training items, and conditional sampling.
//! Used by the evaluation harness, the CLI pipeline, and the acceptance
//! suite.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::coupling::{build_pseudo_dataset_masked, MixingRateDist, PairingPolicy, PseudoComposite};
use crate::cvae::{generate, Cvae, Generated, TrainItem, TrainOptions, TrainState};
use crate::dataset::Dataset;
use crate::energy::compute_part_energy;
use crate::error::{Error, Result};
use crate::motion::{
    generate_sub_action_with, ActionLabel, BodyPartition, GenParams, MotionSequence, SubActionKind, NUM_JOINTS,
};
use crate::render::normalize_frontal;

/// Procedural dataset specification.
#[derive(Debug, Clone)]
pub struct DataSpec {
    pub kinds: Vec<SubActionKind>,
    pub per_class: usize,
    pub frames: usize,
    pub fps: f64,
    pub params: GenParams,
}

/// Generate `per_class` sequences per kind; class ids follow the kind order.
/// Coordinates are world-space (not normalized).
pub fn generate_dataset(spec: &DataSpec, seed: u64) -> Result<Dataset> {
    if spec.kinds.is_empty() {
        return Err(Error::invalid_argument("data spec lists no sub-action kinds"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sequences = Vec::new();
    let mut ids = Vec::new();
    for (class_id, kind) in spec.kinds.iter().enumerate() {
        for k in 0..spec.per_class {
            let label = ActionLabel::new(class_id, spec.kinds.len())?;
            let seq = generate_sub_action_with(*kind, &spec.params, spec.frames, spec.fps, label, &mut rng)?;
            sequences.push(seq);
            ids.push(format!("{}-{:03}", kind.name(), k));
        }
    }
    Ok(Dataset {
        sequences,
        ids,
        class_names: spec.kinds.iter().map(|k| k.name().to_string()).collect(),
    })
}

/// Frontal-normalize every sequence of a dataset.
pub fn normalize_dataset(ds: &Dataset) -> Dataset {
    Dataset {
        sequences: ds.sequences.iter().map(|s| normalize_frontal(s).0).collect(),
        ids: ds.ids.clone(),
        class_names: ds.class_names.clone(),
    }
}

/// Build pseudo-composites from (already normalized) sequences.
pub fn build_composites(
    data: &Dataset,
    policy: &PairingPolicy,
    count: usize,
    dist: &MixingRateDist,
    partition: &BodyPartition,
    use_energy_mask: bool,
    seed: u64,
) -> Result<Vec<PseudoComposite>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    build_pseudo_dataset_masked(&data.sequences, &data.ids, policy, count, dist, partition, use_energy_mask, &mut rng)
}

/// Reconstitute training items from composites plus the normalized source
/// dataset they were built from. Sources are resampled to the composite
/// length and their energies recomputed (or set to one for unmasked arms),
/// matching the coupling step exactly.
pub fn to_train_items(
    composites: &[PseudoComposite],
    data: &Dataset,
    partition: &BodyPartition,
    use_energy_mask: bool,
) -> Result<Vec<TrainItem>> {
    let mut items = Vec::with_capacity(composites.len());
    for c in composites {
        let (si, sj) = c.source_indices;
        if si >= data.sequences.len() || sj >= data.sequences.len() {
            return Err(Error::validation(format!(
                "composite `{}` references source index out of range",
                c.id
            )));
        }
        let t = c.frames.len();
        let source_i = data.sequences[si].resample(t)?;
        let source_j = data.sequences[sj].resample(t)?;
        let (e_i, e_j) = if use_energy_mask {
            (compute_part_energy(&source_i, partition)?.per_joint, compute_part_energy(&source_j, partition)?.per_joint)
        } else {
            ([1.0; NUM_JOINTS], [1.0; NUM_JOINTS])
        };
        items.push(TrainItem {
            id: c.id.clone(),
            frames: c.frames.clone(),
            label: c.mixed_label.clone(),
            source_i,
            source_j,
            e_i,
            e_j,
        });
    }
    Ok(items)
}

/// Initialize and train a model on the given items with split seeds for
/// initialization and the training loop.
pub fn train_model(
    config: crate::cvae::ModelConfig,
    items: &[TrainItem],
    opts: &TrainOptions,
    init_seed: u64,
    train_seed: u64,
) -> Result<(Cvae, TrainState)> {
    let mut init_rng = ChaCha20Rng::seed_from_u64(init_seed);
    let (model, params) = Cvae::new(config, &mut init_rng)?;
    let mut train_rng = ChaCha20Rng::seed_from_u64(train_seed);
    let state = crate::cvae::train(&model, params, items, opts, &mut train_rng)?;
    Ok((model, state))
}

/// A generated sample tagged with its conditioning pair.
#[derive(Debug, Clone)]
pub struct ConditionedSample {
    pub generated: Generated,
    pub pair: (usize, usize),
    pub pair_id: usize,
}

/// Sample `per_pair` generations for every class pair at a fixed mixing rate.
pub fn generate_per_pair(
    model: &Cvae,
    state: &TrainState,
    pairs: &[(usize, usize)],
    num_classes: usize,
    per_pair: usize,
    lambda: f64,
    seed: u64,
) -> Result<Vec<ConditionedSample>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(pairs.len() * per_pair);
    for (pair_id, &(a, b)) in pairs.iter().enumerate() {
        let xa = ActionLabel::new(a, num_classes)?;
        let xb = ActionLabel::new(b, num_classes)?;
        for _ in 0..per_pair {
            let generated = generate(model, state, &xa, &xb, lambda, &mut rng)?;
            out.push(ConditionedSample { generated, pair: (a, b), pair_id });
        }
    }
    Ok(out)
}

/// Source sequences of a resampled pair, for refinement evaluation.
pub fn resolve_sources(
    composite: &PseudoComposite,
    data: &Dataset,
) -> Result<(MotionSequence, MotionSequence)> {
    let (si, sj) = composite.source_indices;
    let t = composite.frames.len();
    Ok((data.sequences[si].resample(t)?, data.sequences[sj].resample(t)?))
}
