//! End-to-end evaluation of a trained generator against a fixed test
//! distribution, and the ablation harness that retrains under matched seeds
//! with individual pipeline stages disabled.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::coupling::{MixingRateDist, PairingPolicy, PseudoComposite};
use crate::cvae::{ModelConfig, TrainOptions};
use crate::decouple::DecoupleConfig;
use crate::error::{Error, Result};
use crate::eval::classifier::{accuracy, ClassifierConfig, PairClassifier};
use crate::eval::features::{extract_features, handcrafted_features, FeatureExtractor, HANDCRAFTED_DIM};
use crate::eval::metrics::{bootstrap_half_width, diversity, multimodality, MetricsReport};
use crate::eval::stats::{fid, gaussian_stats};
use crate::experiment::{
    build_composites, generate_dataset, generate_per_pair, normalize_dataset, to_train_items, train_model,
    ConditionedSample, DataSpec,
};
use crate::motion::BodyPartition;
use crate::refine::{build_inpainter, DrContext};
use crate::render::CameraConfig;

/// Derive a named sub-seed from a base seed.
pub fn subseed(seed: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest slice"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    Handcrafted,
    Classifier,
}

/// Evaluation protocol parameters.
#[derive(Debug, Clone)]
pub struct EvalParams {
    pub extractor: ExtractorKind,
    pub n_pairs: usize,
    pub bootstrap: usize,
    pub gen_per_pair: usize,
    /// Mixing rate used as the generation condition.
    pub lambda: f64,
    pub seed: u64,
    pub classifier: ClassifierConfig,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            extractor: ExtractorKind::Handcrafted,
            n_pairs: 200,
            bootstrap: 5,
            gen_per_pair: 20,
            lambda: 0.5,
            seed: 0,
            classifier: ClassifierConfig::default(),
        }
    }
}

fn pair_id_of(pairs: &[(usize, usize)], a: usize, b: usize) -> Result<usize> {
    let key = if a < b { (a, b) } else { (b, a) };
    pairs
        .iter()
        .position(|p| *p == key)
        .ok_or_else(|| Error::validation(format!("pair ({a},{b}) not in the evaluation pair set")))
}

/// Evaluate generated samples against the fixed test composites: Frechet
/// feature distance, recognition accuracy (classifier trained on the test
/// composites), and the two diversity metrics, each with a bootstrap
/// half-width over resampled generations.
pub fn evaluate_generated(
    test_composites: &[PseudoComposite],
    samples: &[ConditionedSample],
    pairs: &[(usize, usize)],
    params: &EvalParams,
) -> Result<MetricsReport> {
    if test_composites.len() < 2 || samples.len() < 2 {
        return Err(Error::invalid_argument("evaluation needs at least 2 test and 2 generated sequences"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(subseed(params.seed, "eval"));

    // recognizer trained on the test distribution
    let test_raw: Vec<Vec<f64>> =
        test_composites.iter().map(|c| handcrafted_features(&c.frames)).collect::<Result<_>>()?;
    let test_pair_ids: Vec<usize> = test_composites
        .iter()
        .map(|c| pair_id_of(pairs, c.source_classes.0, c.source_classes.1))
        .collect::<Result<_>>()?;
    let mut clf = PairClassifier::new(pairs.to_vec(), HANDCRAFTED_DIM, params.classifier, &mut rng)?;
    clf.fit(&test_raw, &test_pair_ids)?;

    let extractor = match params.extractor {
        ExtractorKind::Handcrafted => FeatureExtractor::Handcrafted,
        ExtractorKind::Classifier => FeatureExtractor::Trained(clf.clone()),
    };
    let test_features: Vec<Vec<f64>> =
        test_composites.iter().map(|c| extract_features(&c.frames, &extractor)).collect::<Result<_>>()?;
    let gen_features: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| extract_features(&s.generated.frames, &extractor))
        .collect::<Result<_>>()?;

    let test_stats = gaussian_stats(&test_features)?;
    let fid_value = fid(&test_stats, &gaussian_stats(&gen_features)?)?;

    let acc_items: Vec<(Vec<crate::motion::Pose>, (usize, usize))> =
        samples.iter().map(|s| (s.generated.frames.clone(), s.pair)).collect();
    let acc_value = accuracy(&clf, &acc_items)?;

    let div_value = diversity(&gen_features, params.n_pairs, &mut rng)?;
    let groups = group_by_pair(samples, &gen_features, pairs.len());
    let multi_value = multimodality(&groups, params.n_pairs, &mut rng)?;

    // bootstrap over resampled generations
    let mut fid_reps = Vec::new();
    let mut acc_reps = Vec::new();
    let mut div_reps = Vec::new();
    let mut multi_reps = Vec::new();
    for _ in 0..params.bootstrap {
        let idx: Vec<usize> =
            (0..samples.len()).map(|_| rand::Rng::gen_range(&mut rng, 0..samples.len())).collect();
        let rep_features: Vec<Vec<f64>> = idx.iter().map(|&i| gen_features[i].clone()).collect();
        fid_reps.push(fid(&test_stats, &gaussian_stats(&rep_features)?)?);
        let rep_acc: Vec<(Vec<crate::motion::Pose>, (usize, usize))> =
            idx.iter().map(|&i| (samples[i].generated.frames.clone(), samples[i].pair)).collect();
        acc_reps.push(accuracy(&clf, &rep_acc)?);
        div_reps.push(diversity(&rep_features, params.n_pairs, &mut rng)?);
        // per-group resample keeps every group populated
        let rep_groups: Vec<Vec<Vec<f64>>> = groups
            .iter()
            .map(|g| (0..g.len()).map(|_| g[rand::Rng::gen_range(&mut rng, 0..g.len())].clone()).collect())
            .collect();
        multi_reps.push(multimodality(&rep_groups, params.n_pairs, &mut rng)?);
    }

    let fingerprint = {
        let mut hasher = Sha256::new();
        hasher.update(format!(
            "extractor={};n_pairs={};bootstrap={};gen_per_pair={};lambda={};seed={};tests={};gens={}",
            extractor.name(),
            params.n_pairs,
            params.bootstrap,
            params.gen_per_pair,
            params.lambda,
            params.seed,
            test_composites.len(),
            samples.len()
        ));
        hex_prefix(&hasher.finalize(), 16)
    };

    let report = MetricsReport {
        fid: fid_value,
        accuracy: acc_value,
        diversity: div_value,
        multimodality: multi_value,
        fid_pm: bootstrap_half_width(&fid_reps),
        accuracy_pm: bootstrap_half_width(&acc_reps),
        diversity_pm: bootstrap_half_width(&div_reps),
        multimodality_pm: bootstrap_half_width(&multi_reps),
        config_fingerprint: fingerprint,
        seed: params.seed,
    };
    report.validate()?;
    Ok(report)
}

pub fn hex_prefix(digest: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(digest.len() * 2);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s.truncate(chars);
    s
}

fn group_by_pair(samples: &[ConditionedSample], features: &[Vec<f64>], num_pairs: usize) -> Vec<Vec<Vec<f64>>> {
    let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); num_pairs];
    for (s, f) in samples.iter().zip(features) {
        groups[s.pair_id].push(f.clone());
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// One ablation arm: which pipeline pieces are enabled.
#[derive(Debug, Clone)]
pub struct ArmSpec {
    pub name: String,
    /// Energy-weighted coupling; false sets the attention mask to one.
    pub use_energy_mask: bool,
    /// Training mixing-rate distribution.
    pub dist: MixingRateDist,
    /// Training pairing policy.
    pub policy: PairingPolicy,
    /// Refinement loss during training.
    pub with_dr: bool,
}

impl ArmSpec {
    /// The standard five-arm suite: full-class pairing, uniform lambda,
    /// unmasked coupling, and the full pipeline with and without refinement.
    pub fn standard_suite(dist: MixingRateDist, policy: PairingPolicy) -> Vec<ArmSpec> {
        vec![
            ArmSpec {
                name: "full-class".into(),
                use_energy_mask: true,
                dist,
                policy: PairingPolicy::FullClass,
                with_dr: false,
            },
            ArmSpec {
                name: "wo-gaussian".into(),
                use_energy_mask: true,
                dist: MixingRateDist::Uniform,
                policy: policy.clone(),
                with_dr: false,
            },
            ArmSpec { name: "wo-mask".into(), use_energy_mask: false, dist, policy: policy.clone(), with_dr: false },
            ArmSpec { name: "ours-wo-dr".into(), use_energy_mask: true, dist, policy: policy.clone(), with_dr: false },
            ArmSpec { name: "ours-with-dr".into(), use_energy_mask: true, dist, policy, with_dr: true },
        ]
    }
}

/// Refinement-stage settings used by arms that train with the DR term.
#[derive(Debug, Clone)]
pub struct RefineSettings {
    pub inpainter: String,
    pub cam: CameraConfig,
    pub decouple: DecoupleConfig,
    pub sigma_px: f64,
    pub stride: usize,
}

impl Default for RefineSettings {
    fn default() -> Self {
        RefineSettings {
            inpainter: "mean-fill".into(),
            cam: CameraConfig::desk(),
            decouple: DecoupleConfig::default(),
            sigma_px: 1.0,
            stride: 4,
        }
    }
}

/// Ablation suite configuration: shared data, seeds, and model config across
/// arms.
#[derive(Debug, Clone)]
pub struct AblationConfig {
    pub data: DataSpec,
    pub test_per_class: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub test_policy: PairingPolicy,
    pub test_dist: MixingRateDist,
    pub model: ModelConfig,
    pub eval: EvalParams,
    pub refine: RefineSettings,
    pub arms: Vec<ArmSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmReport {
    pub name: String,
    pub metrics: MetricsReport,
    pub final_recon: f64,
}

/// Train and evaluate every arm under matched seeds and data ordering: the
/// sub-action data, test composites, coupling draws, parameter init, and
/// training shuffles all share the same seed stream across arms.
pub fn run_ablation(cfg: &AblationConfig) -> Result<Vec<ArmReport>> {
    if cfg.arms.is_empty() {
        return Err(Error::invalid_argument("ablation needs at least one arm"));
    }
    let partition = BodyPartition::default_five();
    let train_data = normalize_dataset(&generate_dataset(&cfg.data, subseed(cfg.seed, "train-data"))?);
    let test_spec = DataSpec { per_class: cfg.test_per_class, ..cfg.data.clone() };
    let test_data = normalize_dataset(&generate_dataset(&test_spec, subseed(cfg.seed, "test-data"))?);
    let test_composites = build_composites(
        &test_data,
        &cfg.test_policy,
        cfg.test_count,
        &cfg.test_dist,
        &partition,
        true,
        subseed(cfg.seed, "test-couple"),
    )?;
    let classes: Vec<usize> = (0..test_data.num_classes()).collect();
    let pairs = cfg.test_policy.resolve(&classes)?;

    let mut reports = Vec::with_capacity(cfg.arms.len());
    for arm in &cfg.arms {
        let composites = build_composites(
            &train_data,
            &arm.policy,
            cfg.train_count,
            &arm.dist,
            &partition,
            arm.use_energy_mask,
            subseed(cfg.seed, "train-couple"),
        )?;
        let items = to_train_items(&composites, &train_data, &partition, arm.use_energy_mask)?;

        let mut model_cfg = cfg.model.clone();
        model_cfg.num_classes = train_data.num_classes();
        if !arm.with_dr {
            model_cfg.w_dr = 0.0;
        }

        let inpainter = build_inpainter(
            &cfg.refine.inpainter,
            &train_data.sequences,
            &cfg.refine.cam,
            cfg.refine.stride,
        )?;
        let dr_ctx = DrContext {
            cam: &cfg.refine.cam,
            decouple: &cfg.refine.decouple,
            sigma_px: cfg.refine.sigma_px,
            inpainter: inpainter.as_ref(),
        };
        let opts = TrainOptions {
            dr: if arm.with_dr { Some(dr_ctx) } else { None },
            threads: 1,
            checkpoint_dir: None,
            fps: cfg.data.fps,
        };
        let (model, state) =
            train_model(model_cfg, &items, &opts, subseed(cfg.seed, "init"), subseed(cfg.seed, "train"))?;

        let samples = generate_per_pair(
            &model,
            &state,
            &pairs,
            test_data.num_classes(),
            cfg.eval.gen_per_pair,
            cfg.eval.lambda,
            subseed(cfg.seed, "generate"),
        )?;
        let mut eval_params = cfg.eval.clone();
        eval_params.seed = subseed(cfg.seed, "eval");
        let metrics = evaluate_generated(&test_composites, &samples, &pairs, &eval_params)?;
        let final_recon = state.loss_history.last().map(|e| e.recon).unwrap_or(f64::NAN);
        reports.push(ArmReport { name: arm.name.clone(), metrics, final_recon });
    }
    Ok(reports)
}
