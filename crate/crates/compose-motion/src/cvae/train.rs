//! Seeded training loop: decoupled-weight-decay adaptive-moment updates,
//! per-epoch loss history, bit-exact checkpointing, and conditional sampling
//! from the trained prior.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::loss::{batch_loss_and_grads, ItemNoise, LossBreakdown, TrainItem};
use super::model::{draw_standard_normal, Cvae, DiagonalGaussian, ModelConfig};
use super::tape::{Matrix, ParamSet};
use crate::coupling::couple_labels;
use crate::error::{Error, Result};
use crate::motion::{ActionLabel, MixedLabel, Pose};
use crate::refine::DrContext;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub recon: f64,
    pub kl: f64,
    pub dr: f64,
    pub total: f64,
}

/// Full training state; serializes to a versioned JSON checkpoint that
/// round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub version: u32,
    pub config: ModelConfig,
    pub params: ParamSet,
    pub opt_m: Vec<Matrix>,
    pub opt_v: Vec<Matrix>,
    pub opt_step: u64,
    pub epoch: usize,
    pub rng_seed: Vec<u8>,
    pub rng_word_pos: u128,
    pub loss_history: Vec<EpochStats>,
    pub fps: f64,
    pub trained: bool,
}

impl TrainState {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| Error::validation(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TrainState> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let state: TrainState =
            serde_json::from_slice(&bytes).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
        if state.version != CHECKPOINT_VERSION {
            return Err(Error::validation(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                state.version
            )));
        }
        Ok(state)
    }

    pub fn model(&self) -> Result<Cvae> {
        Cvae::from_config(self.config.clone())
    }
}

impl Cvae {
    /// Rebuild the architecture for an existing parameter set (layout is a
    /// pure function of the config).
    pub fn from_config(config: ModelConfig) -> Result<Cvae> {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let (model, _) = Cvae::new(config, &mut rng)?;
        Ok(model)
    }
}

struct AdamW {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl AdamW {
    fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay }
    }

    fn step(&self, params: &mut ParamSet, grads: &[Matrix], m: &mut [Matrix], v: &mut [Matrix], t: u64) {
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        for (i, tensor) in params.tensors.iter_mut().enumerate() {
            for k in 0..tensor.data.len() {
                let g = grads[i].data[k];
                m[i].data[k] = self.beta1 * m[i].data[k] + (1.0 - self.beta1) * g;
                v[i].data[k] = self.beta2 * v[i].data[k] + (1.0 - self.beta2) * g * g;
                let mhat = m[i].data[k] / bc1;
                let vhat = v[i].data[k] / bc2;
                let p = tensor.data[k];
                tensor.data[k] = p - self.lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * p);
            }
        }
    }
}

/// Runtime options orthogonal to the model config.
pub struct TrainOptions<'a> {
    /// Refinement context; None disables the refinement term.
    pub dr: Option<DrContext<'a>>,
    /// Worker count for gradient computation. 1 is the single-threaded
    /// deterministic default; with more workers each shard draws noise from
    /// its own stream, so loss histories differ from single-threaded runs but
    /// stay reproducible for a fixed (seed, threads) pair.
    pub threads: usize,
    /// Where to write periodic checkpoints and NaN diagnostics.
    pub checkpoint_dir: Option<&'a Path>,
    pub fps: f64,
}

impl Default for TrainOptions<'_> {
    fn default() -> Self {
        TrainOptions { dr: None, threads: 1, checkpoint_dir: None, fps: crate::motion::DEFAULT_FPS }
    }
}

fn draw_noise<R: Rng>(
    model: &Cvae,
    items: &[&TrainItem],
    use_dr: bool,
    rng: &mut R,
) -> Vec<ItemNoise> {
    items
        .iter()
        .map(|item| {
            let eps = draw_standard_normal(model.config.latent_dim, rng);
            let dr_frame = if use_dr { Some(rng.gen_range(0..item.frames.len())) } else { None };
            ItemNoise { eps, dr_frame }
        })
        .collect()
}

fn shard_bounds(len: usize, shards: usize) -> Vec<(usize, usize)> {
    let shards = shards.min(len).max(1);
    let base = len / shards;
    let extra = len % shards;
    let mut bounds = Vec::with_capacity(shards);
    let mut start = 0;
    for s in 0..shards {
        let size = base + usize::from(s < extra);
        bounds.push((start, start + size));
        start += size;
    }
    bounds
}

fn batch_step(
    model: &Cvae,
    params: &ParamSet,
    batch: &[&TrainItem],
    use_dr: bool,
    opts: &TrainOptions,
    rng: &mut ChaCha20Rng,
) -> Result<(LossBreakdown, Vec<Matrix>)> {
    let dr = if use_dr { opts.dr.as_ref() } else { None };
    if opts.threads <= 1 || batch.len() < 2 {
        let owned: Vec<TrainItem> = batch.iter().map(|i| (*i).clone()).collect();
        let noise = draw_noise(model, batch, dr.is_some(), rng);
        return batch_loss_and_grads(model, params, &owned, &noise, dr);
    }

    // data-parallel shards with per-shard noise streams
    let bounds = shard_bounds(batch.len(), opts.threads);
    let shard_seed_base: u64 = rng.gen();
    let results: Vec<Result<(LossBreakdown, Vec<Matrix>, usize)>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (s, &(lo, hi)) in bounds.iter().enumerate() {
            let shard: Vec<TrainItem> = batch[lo..hi].iter().map(|i| (*i).clone()).collect();
            let refs: Vec<&TrainItem> = batch[lo..hi].to_vec();
            handles.push(scope.spawn(move || {
                let mut shard_rng = ChaCha20Rng::seed_from_u64(shard_seed_base.wrapping_add(s as u64));
                let noise = draw_noise(model, &refs, dr.is_some(), &mut shard_rng);
                let (bd, grads) = batch_loss_and_grads(model, params, &shard, &noise, dr)?;
                Ok((bd, grads, shard.len()))
            }));
        }
        handles.into_iter().map(|h| h.join().expect("shard thread panicked")).collect()
    });

    let total_items = batch.len() as f64;
    let mut merged = params.zeros_like();
    let mut bd = LossBreakdown { recon: 0.0, kl: 0.0, dr: 0.0, total: 0.0 };
    for res in results {
        let (sbd, sgrads, slen) = res?;
        let w = slen as f64 / total_items;
        bd.recon += w * sbd.recon;
        bd.kl += w * sbd.kl;
        bd.dr += w * sbd.dr;
        bd.total += w * sbd.total;
        for (m, g) in merged.iter_mut().zip(&sgrads) {
            for (a, b) in m.data.iter_mut().zip(&g.data) {
                *a += w * b;
            }
        }
    }
    Ok((bd, merged))
}

/// Train a model on coupled data. Fully seeded: the (seed, config, dataset)
/// triple determines the loss history bit-exactly in single-threaded mode.
pub fn train(
    model: &Cvae,
    init_params: ParamSet,
    data: &[TrainItem],
    opts: &TrainOptions,
    rng: &mut ChaCha20Rng,
) -> Result<TrainState> {
    if data.is_empty() {
        return Err(Error::invalid_argument("training dataset is empty"));
    }
    for item in data {
        if item.frames.len() != model.config.frames {
            return Err(Error::invalid_argument(format!(
                "item `{}` has {} frames, model expects {}",
                item.id,
                item.frames.len(),
                model.config.frames
            )));
        }
    }
    let cfg = &model.config;
    let optimizer = AdamW::new(cfg.learning_rate, cfg.weight_decay);
    let mut params = init_params;
    let mut m = params.zeros_like();
    let mut v = params.zeros_like();
    let mut step: u64 = 0;
    let mut history = Vec::with_capacity(cfg.epochs);
    let dr_enabled = opts.dr.is_some() && cfg.w_dr > 0.0;

    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut sums = LossBreakdown { recon: 0.0, kl: 0.0, dr: 0.0, total: 0.0 };
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainItem> = chunk.iter().map(|&i| &data[i]).collect();
            let use_dr = dr_enabled && step % cfg.dr_every as u64 == 0;
            let (bd, grads) = batch_step(model, &params, &batch, use_dr, opts, rng)?;
            if !bd.total.is_finite() {
                let ids: Vec<&str> = batch.iter().map(|i| i.id.as_str()).collect();
                if let Some(dir) = opts.checkpoint_dir {
                    let dump = serde_json::json!({
                        "epoch": epoch, "step": step, "items": ids, "breakdown": bd,
                    });
                    let _ = std::fs::write(dir.join("nan_dump.json"), dump.to_string());
                }
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch} step {step}; batch items {ids:?}"
                )));
            }
            step += 1;
            optimizer.step(&mut params, &grads, &mut m, &mut v, step);
            let w = batch.len() as f64;
            sums.recon += w * bd.recon;
            sums.kl += w * bd.kl;
            sums.dr += w * bd.dr;
            sums.total += w * bd.total;
            seen += batch.len();
        }
        let n = seen as f64;
        history.push(EpochStats {
            epoch,
            recon: sums.recon / n,
            kl: sums.kl / n,
            dr: sums.dr / n,
            total: sums.total / n,
        });
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
            if let Some(dir) = opts.checkpoint_dir {
                let snapshot = make_state(model, &params, &m, &v, step, epoch + 1, rng, &history, opts.fps);
                snapshot.save(&dir.join(format!("checkpoint-{:04}.json", epoch + 1)))?;
            }
        }
    }
    Ok(make_state(model, &params, &m, &v, step, cfg.epochs, rng, &history, opts.fps))
}

#[allow(clippy::too_many_arguments)]
fn make_state(
    model: &Cvae,
    params: &ParamSet,
    m: &[Matrix],
    v: &[Matrix],
    step: u64,
    epoch: usize,
    rng: &ChaCha20Rng,
    history: &[EpochStats],
    fps: f64,
) -> TrainState {
    TrainState {
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        params: params.clone(),
        opt_m: m.to_vec(),
        opt_v: v.to_vec(),
        opt_step: step,
        epoch,
        rng_seed: rng.get_seed().to_vec(),
        rng_word_pos: rng.get_word_pos(),
        loss_history: history.to_vec(),
        fps,
        trained: epoch > 0,
    }
}

/// Trailing-window mean of the reconstruction loss at the start and end of a
/// history.
pub fn smoothed_recon_endpoints(history: &[EpochStats], window: usize) -> (f64, f64) {
    let w = window.max(1).min(history.len());
    let first: f64 = history[..w].iter().map(|e| e.recon).sum::<f64>() / w as f64;
    let last: f64 = history[history.len() - w..].iter().map(|e| e.recon).sum::<f64>() / w as f64;
    (first, last)
}

/// A generated composite sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub frames: Vec<Pose>,
    pub label: MixedLabel,
    pub fps: f64,
}

/// Sample a composite conditioned on two distinct sub-action labels: draw z
/// from the conditional prior and decode.
pub fn generate<R: Rng>(
    model: &Cvae,
    state: &TrainState,
    x_i: &ActionLabel,
    x_j: &ActionLabel,
    lambda: f64,
    rng: &mut R,
) -> Result<Generated> {
    if !state.trained {
        return Err(Error::InvalidState("model has not completed any training epoch".into()));
    }
    let label = couple_labels(x_i, x_j, lambda)?;
    let prior = model.prior(&state.params, &label)?;
    let z = super::model::reparameterize(&prior, rng);
    let frames = model.decode(&state.params, &label, &z)?;
    Ok(Generated { frames, label, fps: state.fps })
}

/// Deterministic decode of the prior mean for a condition (no sampling).
pub fn generate_mean(
    model: &Cvae,
    state: &TrainState,
    x_i: &ActionLabel,
    x_j: &ActionLabel,
    lambda: f64,
) -> Result<Generated> {
    if !state.trained {
        return Err(Error::InvalidState("model has not completed any training epoch".into()));
    }
    let label = couple_labels(x_i, x_j, lambda)?;
    let prior: DiagonalGaussian = model.prior(&state.params, &label)?;
    let frames = model.decode(&state.params, &label, &prior.mean)?;
    Ok(Generated { frames, label, fps: state.fps })
}
