//! Command orchestration behind the CLI: every command materializes its
//! artifacts under `output_dir/<run-id>/<command>/` with a manifest recording
//! the exact config, seed, and content hashes. Run ids are content-derived,
//! so repeating an identical run is detected and skipped unless forced.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::coupling::PseudoComposite;
use crate::cvae::{Cvae, TrainOptions, TrainState};
use crate::dataset::{load_composites, load_dataset, save_composites, save_dataset, Dataset};
use crate::decouple::{apply_mask, region_average, source_mask, AttentionMap};
use crate::energy::compute_part_energy;
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_generated, run_ablation, subseed, AblationConfig, ArmSpec, EvalParams, RefineSettings,
};
use crate::experiment::{
    build_composites, generate_dataset, generate_per_pair, normalize_dataset, resolve_sources, to_train_items,
    ConditionedSample, DataSpec,
};
use crate::motion::BodyPartition;
use crate::refine::{build_inpainter, refinement_pass, DrContext};
use crate::render::{contact_sheet, render_sequence, Image};

pub const THREADS_ENV: &str = "COMPOSE_MOTION_THREADS";

/// Worker cap from the environment (default 1, single-threaded).
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n >= 1).unwrap_or(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenData,
    Couple,
    Energy,
    Render,
    Decouple,
    Train,
    Sample,
    RefineEval,
    Evaluate,
    Ablate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Couple => "couple",
            Command::Energy => "energy",
            Command::Render => "render",
            Command::Decouple => "decouple",
            Command::Train => "train",
            Command::Sample => "sample",
            Command::RefineEval => "refine-eval",
            Command::Evaluate => "evaluate",
            Command::Ablate => "ablate",
        }
    }
}

/// A resolved run: validated config plus the canonical JSON it came from.
pub struct RunContext {
    pub config: RunConfig,
    pub canonical_json: String,
    pub run_id: String,
    pub out_root: PathBuf,
    pub force: bool,
}

impl RunContext {
    /// Build from a JSON value (after overrides); the run id hashes the
    /// canonical config serialization and the effective seed.
    pub fn new(value: serde_json::Value, out_override: Option<&Path>, force: bool) -> Result<RunContext> {
        let config = RunConfig::from_value(value.clone())?;
        // canonicalize through the typed config so defaults are materialized
        let canonical_json =
            serde_json::to_string(&config).map_err(|e| Error::validation(e.to_string()))?;
        let mut hasher = Sha256::new();
        hasher.update(canonical_json.as_bytes());
        hasher.update(config.seed.to_le_bytes());
        let run_id = crate::eval::hex_prefix(&hasher.finalize(), 12);
        let out_root = out_override.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&config.output_dir));
        Ok(RunContext { config, canonical_json, run_id, out_root, force })
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_root.join(&self.run_id)
    }

    fn command_dir(&self, cmd: Command) -> PathBuf {
        self.run_dir().join(cmd.name())
    }

    fn data_spec(&self, per_class: usize) -> Result<DataSpec> {
        Ok(DataSpec {
            kinds: self.config.kinds()?,
            per_class,
            frames: self.config.data.frames,
            fps: self.config.data.fps,
            params: self.config.gen_params(),
        })
    }

    fn train_dataset_raw(&self) -> Result<Dataset> {
        // reuse the gen-data artifact when present, otherwise regenerate
        let artifact = self.command_dir(Command::GenData).join("dataset.jsonl");
        if artifact.is_file() {
            return load_dataset(&artifact);
        }
        generate_dataset(&self.data_spec(self.config.data.per_class)?, subseed(self.config.seed, "train-data"))
    }

    fn train_composites(&self, data_norm: &Dataset) -> Result<Vec<PseudoComposite>> {
        let artifact = self.command_dir(Command::Couple).join("composites.jsonl");
        if artifact.is_file() {
            return load_composites(&artifact);
        }
        build_composites(
            data_norm,
            &self.config.coupling.policy.to_policy()?,
            self.config.coupling.count,
            &self.config.mixing_dist()?,
            &BodyPartition::default_five(),
            self.config.coupling.use_energy_mask,
            subseed(self.config.seed, "train-couple"),
        )
    }

    fn model_config(&self) -> Result<crate::cvae::ModelConfig> {
        let mut model = self.config.model.clone();
        model.frames = self.config.data.frames;
        model.num_classes = self.config.kinds()?.len();
        Ok(model)
    }

    fn load_train_state(&self) -> Result<(Cvae, TrainState)> {
        let ckpt = self.command_dir(Command::Train).join("checkpoint.json");
        if ckpt.is_file() {
            let state = TrainState::load(&ckpt)?;
            let model = state.model()?;
            return Ok((model, state));
        }
        self.train_in_memory()
    }

    fn train_in_memory(&self) -> Result<(Cvae, TrainState)> {
        let raw = self.train_dataset_raw()?;
        let data = normalize_dataset(&raw);
        let composites = self.train_composites(&data)?;
        let partition = BodyPartition::default_five();
        let items = to_train_items(&composites, &data, &partition, self.config.coupling.use_energy_mask)?;
        let inpainter =
            build_inpainter(&self.config.refine.inpainter, &data.sequences, &self.config.render.camera(), self.config.refine.stride)?;
        let cam = self.config.render.camera();
        let dcfg = self.config.render.decouple();
        let dr = DrContext {
            cam: &cam,
            decouple: &dcfg,
            sigma_px: self.config.render.splat_sigma,
            inpainter: inpainter.as_ref(),
        };
        let opts = TrainOptions {
            dr: if self.config.model.w_dr > 0.0 { Some(dr) } else { None },
            threads: worker_count(),
            checkpoint_dir: None,
            fps: self.config.data.fps,
        };
        crate::experiment::train_model(
            self.model_config()?,
            &items,
            &opts,
            subseed(self.config.seed, "init"),
            subseed(self.config.seed, "train"),
        )
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

/// Collects artifacts as they are written and lands the manifest last.
struct ArtifactSink {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl ArtifactSink {
    fn create(dir: &Path) -> Result<ArtifactSink> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(ArtifactSink { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.record(name, bytes);
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::validation(e.to_string()))?;
        self.write(name, text.as_bytes())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            sha256: crate::eval::hex_prefix(&hasher.finalize(), 64),
            bytes: bytes.len(),
        });
    }

    fn finish(mut self, ctx: &RunContext, cmd: Command) -> Result<PathBuf> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = serde_json::json!({
            "command": cmd.name(),
            "run_id": ctx.run_id,
            "seed": ctx.config.seed,
            "config": serde_json::from_str::<serde_json::Value>(&ctx.canonical_json).expect("canonical json"),
            "artifacts": self.entries,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::validation(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.dir)
    }
}

/// Execute a command; returns the command directory. An existing manifest
/// short-circuits the run unless `force` is set.
pub fn run_command(ctx: &RunContext, cmd: Command) -> Result<PathBuf> {
    let dir = ctx.command_dir(cmd);
    let manifest = dir.join("manifest.json");
    if manifest.is_file() && !ctx.force {
        eprintln!("run {} already has {} artifacts; skipping (use --force to rerun)", ctx.run_id, cmd.name());
        return Ok(dir);
    }
    let mut sink = ArtifactSink::create(&dir)?;
    match cmd {
        Command::GenData => cmd_gen_data(ctx, &mut sink)?,
        Command::Couple => cmd_couple(ctx, &mut sink)?,
        Command::Energy => cmd_energy(ctx, &mut sink)?,
        Command::Render => cmd_render(ctx, &mut sink)?,
        Command::Decouple => cmd_decouple(ctx, &mut sink)?,
        Command::Train => cmd_train(ctx, &mut sink)?,
        Command::Sample => cmd_sample(ctx, &mut sink)?,
        Command::RefineEval => cmd_refine_eval(ctx, &mut sink)?,
        Command::Evaluate => cmd_evaluate(ctx, &mut sink)?,
        Command::Ablate => cmd_ablate(ctx, &mut sink)?,
    }
    sink.finish(ctx, cmd)
}

fn cmd_gen_data(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let data = generate_dataset(&ctx.data_spec(ctx.config.data.per_class)?, subseed(ctx.config.seed, "train-data"))?;
    // serialize through the dataset module for schema fidelity
    let tmp = sink.dir.join("dataset.jsonl");
    save_dataset(&data, &tmp)?;
    let bytes = std::fs::read(&tmp).map_err(|e| Error::io(&tmp, e))?;
    sink.record("dataset.jsonl", &bytes);
    let labels = std::fs::read(sink.dir.join("labels.json")).map_err(|e| Error::io(sink.dir.join("labels.json"), e))?;
    sink.record("labels.json", &labels);
    Ok(())
}

fn cmd_couple(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let raw = ctx.train_dataset_raw()?;
    let data = normalize_dataset(&raw);
    let composites = build_composites(
        &data,
        &ctx.config.coupling.policy.to_policy()?,
        ctx.config.coupling.count,
        &ctx.config.mixing_dist()?,
        &BodyPartition::default_five(),
        ctx.config.coupling.use_energy_mask,
        subseed(ctx.config.seed, "train-couple"),
    )?;
    let tmp = sink.dir.join("composites.jsonl");
    save_composites(&composites, &tmp)?;
    let bytes = std::fs::read(&tmp).map_err(|e| Error::io(&tmp, e))?;
    sink.record("composites.jsonl", &bytes);
    Ok(())
}

fn cmd_energy(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let raw = ctx.train_dataset_raw()?;
    let partition = BodyPartition::default_five();
    let mut rows = Vec::new();
    for (seq, id) in raw.sequences.iter().zip(&raw.ids) {
        let e = compute_part_energy(seq, &partition)?;
        let table: serde_json::Map<String, serde_json::Value> = e
            .part_names
            .iter()
            .zip(&e.per_part)
            .map(|(n, v)| (n.clone(), serde_json::json!(v)))
            .collect();
        rows.push(serde_json::json!({
            "id": id,
            "class": raw.class_names[seq.label.class_id],
            "per_part": table,
        }));
    }
    let path = sink.write_json("energy.json", &rows)?;
    println!("{}", std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?);
    Ok(())
}

fn cmd_render(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let raw = ctx.train_dataset_raw()?;
    let data = normalize_dataset(&raw);
    let seq = &data.sequences[0];
    let cam = ctx.config.render.camera();
    let frames = render_sequence(seq, &cam, 1)?;
    for (k, f) in frames.iter().enumerate() {
        sink.write(&format!("frame-{k:03}.pgm"), &f.pixels.to_pgm())?;
    }
    let cols = (frames.len() as f64).sqrt().ceil() as usize;
    let sheet = contact_sheet(&frames, cols.max(1))?;
    sink.write("contact.pgm", &sheet.to_pgm())?;
    Ok(())
}

fn cmd_decouple(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let raw = ctx.train_dataset_raw()?;
    let data = normalize_dataset(&raw);
    let composites = ctx.train_composites(&data)?;
    let probe = composites
        .first()
        .ok_or_else(|| Error::invalid_argument("no composites to decouple"))?;
    let (src_i, src_j) = resolve_sources(probe, &data)?;
    let partition = BodyPartition::default_five();
    let e_i = compute_part_energy(&src_i, &partition)?.per_joint;
    let e_j = compute_part_energy(&src_j, &partition)?.per_joint;
    let cam = ctx.config.render.camera();
    let dcfg = ctx.config.render.decouple();
    let frame = crate::render::render_frame(&probe.frames[0], &cam);

    let mut kept = serde_json::Map::new();
    for (tag, energies) in [("i", &e_i), ("j", &e_j)] {
        let a = crate::decouple::attention_map(&frame.joint_pixels, energies.as_slice(), cam.height, cam.width, dcfg.eps_pix)?;
        sink.write(&format!("attention-{tag}.pgm"), &normalized_pgm(&a))?;
        let grid = region_average(&a, dcfg.patch)?;
        let grid_img = Image { height: grid.rows, width: grid.cols, data: normalize_unit(&grid.values) };
        sink.write(&format!("grid-{tag}.pgm"), &grid_img.to_pgm())?;
        let mask = source_mask(&frame.joint_pixels, energies.as_slice(), cam.height, cam.width, &dcfg)?;
        let masked = apply_mask(&frame.pixels, &mask, dcfg.fill)?;
        sink.write(&format!("masked-{tag}.pgm"), &masked.pixels.to_pgm())?;
        kept.insert(tag.to_string(), serde_json::json!(mask.kept_indices()));
    }
    sink.write_json("kept_regions.json", &kept)?;
    Ok(())
}

fn normalize_unit(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| v / max).collect()
}

fn normalized_pgm(a: &AttentionMap) -> Vec<u8> {
    let img = Image { height: a.values.height, width: a.values.width, data: normalize_unit(&a.values.data) };
    img.to_pgm()
}

fn cmd_train(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let (_, state) = ctx.train_in_memory()?;
    let mut log = Vec::new();
    for e in &state.loss_history {
        log.extend_from_slice(serde_json::to_string(e).map_err(|err| Error::validation(err.to_string()))?.as_bytes());
        log.push(b'\n');
    }
    sink.write("training_log.jsonl", &log)?;
    let ckpt = serde_json::to_vec(&state).map_err(|e| Error::validation(e.to_string()))?;
    sink.write("checkpoint.json", &ckpt)?;
    Ok(())
}

fn cmd_sample(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let (model, state) = ctx.load_train_state()?;
    let samples = generate_samples(ctx, &model, &state)?;
    let mut out = Vec::new();
    for s in &samples {
        let rec = serde_json::json!({
            "pair": s.pair,
            "pair_id": s.pair_id,
            "mixed_label": s.generated.label.weights,
            "fps": s.generated.fps,
            "joints": s.generated.frames.iter().map(|p| p.joints.to_vec()).collect::<Vec<_>>(),
        });
        out.extend_from_slice(rec.to_string().as_bytes());
        out.push(b'\n');
    }
    sink.write("generated.jsonl", &out)?;
    Ok(())
}

fn generate_samples(ctx: &RunContext, model: &Cvae, state: &TrainState) -> Result<Vec<ConditionedSample>> {
    let num_classes = ctx.config.kinds()?.len();
    let classes: Vec<usize> = (0..num_classes).collect();
    let pairs = ctx.config.coupling.policy.to_policy()?.resolve(&classes)?;
    generate_per_pair(
        model,
        state,
        &pairs,
        num_classes,
        ctx.config.eval.gen_per_pair,
        ctx.config.eval.lambda,
        subseed(ctx.config.seed, "generate"),
    )
}

fn cmd_refine_eval(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let raw = ctx.train_dataset_raw()?;
    let data = normalize_dataset(&raw);
    let composites = ctx.train_composites(&data)?;
    let partition = BodyPartition::default_five();
    let cam = ctx.config.render.camera();
    let dcfg = ctx.config.render.decouple();
    let inpainter = build_inpainter(&ctx.config.refine.inpainter, &data.sequences, &cam, ctx.config.refine.stride)?;
    let mut per_item = Vec::new();
    let mut total = 0.0;
    for c in &composites {
        let (src_i, src_j) = resolve_sources(c, &data)?;
        let e_i = compute_part_energy(&src_i, &partition)?.per_joint;
        let e_j = compute_part_energy(&src_j, &partition)?.per_joint;
        let report = refinement_pass(
            &c.frames,
            &src_i,
            &src_j,
            &e_i,
            &e_j,
            &cam,
            &dcfg,
            inpainter.as_ref(),
            ctx.config.refine.stride,
        )?;
        total += report.mean_loss;
        per_item.push(serde_json::json!({
            "id": c.id,
            "loss": report.mean_loss,
            "branch_i": report.branch_i,
            "branch_j": report.branch_j,
            "frames_sampled": report.frames_sampled,
        }));
    }
    let summary = serde_json::json!({
        "inpainter": ctx.config.refine.inpainter,
        "mean_loss": total / composites.len().max(1) as f64,
        "items": per_item,
    });
    sink.write_json("refine_eval.json", &summary)?;
    Ok(())
}

fn eval_params(ctx: &RunContext) -> EvalParams {
    EvalParams {
        extractor: ctx.config.eval.extractor,
        n_pairs: ctx.config.eval.n_pairs,
        bootstrap: ctx.config.eval.bootstrap,
        gen_per_pair: ctx.config.eval.gen_per_pair,
        lambda: ctx.config.eval.lambda,
        seed: subseed(ctx.config.seed, "eval"),
        classifier: ctx.config.eval.classifier(),
    }
}

fn cmd_evaluate(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let (model, state) = ctx.load_train_state()?;
    let test_spec = ctx.data_spec(ctx.config.data.test_per_class)?;
    let test_data = normalize_dataset(&generate_dataset(&test_spec, subseed(ctx.config.seed, "test-data"))?);
    let test_composites = build_composites(
        &test_data,
        &ctx.config.coupling.policy.to_policy()?,
        ctx.config.coupling.test_count,
        &ctx.config.mixing_dist()?,
        &BodyPartition::default_five(),
        true,
        subseed(ctx.config.seed, "test-couple"),
    )?;
    let samples = generate_samples(ctx, &model, &state)?;
    let classes: Vec<usize> = (0..test_data.num_classes()).collect();
    let pairs = ctx.config.coupling.policy.to_policy()?.resolve(&classes)?;
    let report = evaluate_generated(&test_composites, &samples, &pairs, &eval_params(ctx))?;
    sink.write_json("metrics.json", &report)?;
    Ok(())
}

/// Ablation suite settings derived from a run config (arms from eval.arms,
/// or the standard suite when empty).
pub fn ablation_config(ctx: &RunContext) -> Result<AblationConfig> {
    let dist = ctx.config.mixing_dist()?;
    let policy = ctx.config.coupling.policy.to_policy()?;
    let all_arms = ArmSpec::standard_suite(dist, policy.clone());
    let arms = if ctx.config.eval.arms.is_empty() {
        all_arms
    } else {
        let mut picked = Vec::new();
        for name in &ctx.config.eval.arms {
            let arm = all_arms
                .iter()
                .find(|a| &a.name == name)
                .ok_or_else(|| Error::Config { path: "eval.arms".into(), msg: format!("unknown arm `{name}`") })?;
            picked.push(arm.clone());
        }
        picked
    };
    Ok(AblationConfig {
        data: ctx.data_spec(ctx.config.data.per_class)?,
        test_per_class: ctx.config.data.test_per_class,
        train_count: ctx.config.coupling.count,
        test_count: ctx.config.coupling.test_count,
        test_policy: policy,
        test_dist: dist,
        model: ctx.model_config()?,
        eval: eval_params(ctx),
        refine: RefineSettings {
            inpainter: ctx.config.refine.inpainter.clone(),
            cam: ctx.config.render.camera(),
            decouple: ctx.config.render.decouple(),
            sigma_px: ctx.config.render.splat_sigma,
            stride: ctx.config.refine.stride,
        },
        arms,
        seed: ctx.config.seed,
    })
}

fn cmd_ablate(ctx: &RunContext, sink: &mut ArtifactSink) -> Result<()> {
    let cfg = ablation_config(ctx)?;
    let reports = run_ablation(&cfg)?;
    sink.write_json("ablation.json", &reports)?;
    Ok(())
}
