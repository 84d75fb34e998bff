//! Decoupling refinement: a pluggable inpainting interface with two baseline
//! implementations, the refinement loss, and the smoothed-rasterizer training
//! path that carries its gradient.
//!
//! The refinement loss for one data pair is
//!   sum_pixels (inp_i - v_i)^2 + (inp_j - v_j)^2
//! where inp_* are inpainted decoupled images and v_* renders of the original
//! sub-actions.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};

use crate::decouple::{decouple_composite, source_mask, DecoupleConfig, MaskedImage};
use crate::error::{Error, Result};
use crate::motion::{MotionSequence, Pose, BONES, NUM_JOINTS};
use crate::render::{
    pixel_grad_to_world, project_pose, render_frame, sampled_frame_indices, splat_backward, splat_image,
    CameraConfig, Image,
};

/// Fills masked regions of an image. Implementations must be deterministic
/// for fixed inputs and internal state, and safe for concurrent read-only
/// inference once constructed.
pub trait Inpainter: Send + Sync {
    fn inpaint(&self, masked: &MaskedImage) -> Result<Image>;

    /// Whether kept-region pixels pass through unchanged.
    fn preserves_kept_pixels(&self) -> bool;

    /// Backpropagate d(loss)/d(output) to d(loss)/d(source pixels). Entries
    /// for dropped source pixels are zero (they were replaced by the fill
    /// value before inpainting).
    fn inpaint_backward(&self, masked: &MaskedImage, d_out: &Image) -> Result<Image>;

    fn name(&self) -> &'static str;
}

fn check_masked(masked: &MaskedImage) -> Result<(Vec<usize>, Vec<usize>)> {
    let h = masked.pixels.height;
    let w = masked.pixels.width;
    if masked.mask.rows * masked.mask.patch != h || masked.mask.cols * masked.mask.patch != w {
        return Err(Error::invalid_argument("mask geometry does not match image"));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for row in 0..h {
        for col in 0..w {
            if masked.pixel_kept(row, col) {
                kept.push(row * w + col);
            } else {
                dropped.push(row * w + col);
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::invalid_argument("mask keeps no pixels"));
    }
    Ok((kept, dropped))
}

/// Training-free baseline: fills every dropped region with the mean of the
/// kept pixels. Preserves kept pixels exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanFill;

impl Inpainter for MeanFill {
    fn inpaint(&self, masked: &MaskedImage) -> Result<Image> {
        let (kept, dropped) = check_masked(masked)?;
        let mean = kept.iter().map(|&i| masked.pixels.data[i]).sum::<f64>() / kept.len() as f64;
        let mut out = masked.pixels.clone();
        for &i in &dropped {
            out.data[i] = mean;
        }
        Ok(out)
    }

    fn preserves_kept_pixels(&self) -> bool {
        true
    }

    fn inpaint_backward(&self, masked: &MaskedImage, d_out: &Image) -> Result<Image> {
        if !d_out.same_shape(&masked.pixels) {
            return Err(Error::invalid_argument("gradient shape mismatch"));
        }
        let (kept, dropped) = check_masked(masked)?;
        let d_mean: f64 = dropped.iter().map(|&i| d_out.data[i]).sum();
        let share = d_mean / kept.len() as f64;
        let mut grad = Image::zeros(masked.pixels.height, masked.pixels.width);
        for &i in &kept {
            grad.data[i] = d_out.data[i] + share;
        }
        Ok(grad)
    }

    fn name(&self) -> &'static str {
        "mean-fill"
    }
}

struct PatchModel {
    /// One weight row per dropped pixel: [bias, kept-patch means...].
    weights: Vec<Vec<f64>>,
    dropped: Vec<usize>,
    kept_patches: Vec<usize>,
    /// Max per-pixel absolute fit residual over the corpus.
    residual_bound: f64,
}

/// Linear per-mask inpainter: each dropped pixel is a least-squares linear
/// function of the kept-patch mean intensities, fit on a rendered sub-action
/// corpus. Models are fit lazily per distinct mask and cached; fitting is
/// deterministic given the corpus.
pub struct PatchRegressor {
    corpus: Vec<Image>,
    models: Mutex<HashMap<Vec<bool>, std::sync::Arc<PatchModel>>>,
}

impl PatchRegressor {
    pub fn new(corpus: Vec<Image>) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid_argument("patch regressor needs a non-empty corpus"));
        }
        let (h, w) = (corpus[0].height, corpus[0].width);
        if corpus.iter().any(|img| img.height != h || img.width != w) {
            return Err(Error::invalid_argument("corpus images must share dimensions"));
        }
        Ok(PatchRegressor { corpus, models: Mutex::new(HashMap::new()) })
    }

    /// Build the corpus by rendering every `stride`-th frame of each sequence.
    pub fn from_sequences(sequences: &[MotionSequence], cam: &CameraConfig, stride: usize) -> Result<Self> {
        let mut corpus = Vec::new();
        for seq in sequences {
            for idx in sampled_frame_indices(seq.len(), stride)? {
                corpus.push(render_frame(&seq.frames[idx], cam).pixels);
            }
        }
        Self::new(corpus)
    }

    /// The max absolute fit residual recorded when the given mask was fit.
    pub fn residual_bound(&self, masked: &MaskedImage) -> Result<f64> {
        Ok(self.model_for(masked)?.residual_bound)
    }

    fn patch_means(img: &Image, mask: &crate::decouple::RegionMask, patches: &[usize]) -> Vec<f64> {
        let p = mask.patch;
        patches
            .iter()
            .map(|&cell| {
                let gr = cell / mask.cols;
                let gc = cell % mask.cols;
                let mut acc = 0.0;
                for r in 0..p {
                    for c in 0..p {
                        acc += img.get(gr * p + r, gc * p + c);
                    }
                }
                acc / (p * p) as f64
            })
            .collect()
    }

    fn model_for(&self, masked: &MaskedImage) -> Result<std::sync::Arc<PatchModel>> {
        let (h, w) = (masked.pixels.height, masked.pixels.width);
        if h != self.corpus[0].height || w != self.corpus[0].width {
            return Err(Error::invalid_argument("masked image does not match corpus dimensions"));
        }
        let key = masked.mask.keep.clone();
        if let Some(m) = self.models.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }

        let (_, dropped) = check_masked(masked)?;
        let kept_patches = masked.mask.kept_indices();
        let dim = kept_patches.len() + 1;

        // normal equations shared across outputs, small ridge for stability
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DMatrix::<f64>::zeros(dim, dropped.len());
        let mut feats = Vec::with_capacity(self.corpus.len());
        for img in &self.corpus {
            let mut x = vec![1.0];
            x.extend(Self::patch_means(img, &masked.mask, &kept_patches));
            let xv = DVector::from_vec(x.clone());
            gram += &xv * xv.transpose();
            for (o, &pix) in dropped.iter().enumerate() {
                for d in 0..dim {
                    rhs[(d, o)] += x[d] * img.data[pix];
                }
            }
            feats.push(x);
        }
        for d in 0..dim {
            gram[(d, d)] += 1e-8;
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("patch regressor normal equations not positive definite".into()))?;
        let solution = chol.solve(&rhs);

        let weights: Vec<Vec<f64>> =
            (0..dropped.len()).map(|o| (0..dim).map(|d| solution[(d, o)]).collect()).collect();

        let mut residual_bound = 0.0f64;
        for (img, x) in self.corpus.iter().zip(&feats) {
            for (o, &pix) in dropped.iter().enumerate() {
                let pred: f64 = weights[o].iter().zip(x).map(|(wd, xd)| wd * xd).sum();
                residual_bound = residual_bound.max((pred - img.data[pix]).abs());
            }
        }

        let model = std::sync::Arc::new(PatchModel { weights, dropped, kept_patches, residual_bound });
        self.models.lock().unwrap().insert(key, model.clone());
        Ok(model)
    }
}

impl Inpainter for PatchRegressor {
    fn inpaint(&self, masked: &MaskedImage) -> Result<Image> {
        let model = self.model_for(masked)?;
        let mut x = vec![1.0];
        x.extend(Self::patch_means(&masked.pixels, &masked.mask, &model.kept_patches));
        let mut out = masked.pixels.clone();
        for (o, &pix) in model.dropped.iter().enumerate() {
            out.data[pix] = model.weights[o].iter().zip(&x).map(|(wd, xd)| wd * xd).sum();
        }
        Ok(out)
    }

    fn preserves_kept_pixels(&self) -> bool {
        true
    }

    fn inpaint_backward(&self, masked: &MaskedImage, d_out: &Image) -> Result<Image> {
        if !d_out.same_shape(&masked.pixels) {
            return Err(Error::invalid_argument("gradient shape mismatch"));
        }
        let model = self.model_for(masked)?;
        let p = masked.mask.patch;
        let inv_area = 1.0 / (p * p) as f64;
        // accumulate d(loss)/d(kept patch mean c) over all dropped outputs
        let mut d_means = vec![0.0; model.kept_patches.len()];
        for (o, &pix) in model.dropped.iter().enumerate() {
            let up = d_out.data[pix];
            if up == 0.0 {
                continue;
            }
            for (c, dm) in d_means.iter_mut().enumerate() {
                *dm += up * model.weights[o][c + 1];
            }
        }
        let mut grad = Image::zeros(masked.pixels.height, masked.pixels.width);
        let w = masked.pixels.width;
        for (c, &cell) in model.kept_patches.iter().enumerate() {
            let gr = cell / masked.mask.cols;
            let gc = cell % masked.mask.cols;
            let spread = d_means[c] * inv_area;
            for r in 0..p {
                for cc in 0..p {
                    grad.data[(gr * p + r) * w + gc * p + cc] = spread;
                }
            }
        }
        // pass-through term for kept pixels
        for row in 0..masked.pixels.height {
            for col in 0..w {
                if masked.pixel_kept(row, col) {
                    grad.data[row * w + col] += d_out.data[row * w + col];
                }
            }
        }
        Ok(grad)
    }

    fn name(&self) -> &'static str {
        "patch-regressor"
    }
}

/// Build an inpainter by name; `patch-regressor` is fit on the given corpus
/// sequences.
pub fn build_inpainter(
    name: &str,
    corpus: &[MotionSequence],
    cam: &CameraConfig,
    stride: usize,
) -> Result<Box<dyn Inpainter>> {
    match name {
        "mean-fill" => Ok(Box::new(MeanFill)),
        "patch-regressor" => Ok(Box::new(PatchRegressor::from_sequences(corpus, cam, stride)?)),
        other => Err(Error::invalid_argument(format!("unknown inpainter `{other}`"))),
    }
}

/// Per-pair refinement loss: sum over pixels of squared residuals on both
/// branches.
pub fn dr_loss(inp_i: &Image, v_i: &Image, inp_j: &Image, v_j: &Image) -> Result<f64> {
    if !inp_i.same_shape(v_i) || !inp_j.same_shape(v_j) || !inp_i.same_shape(inp_j) {
        return Err(Error::invalid_argument("refinement loss images must share shape"));
    }
    let a: f64 = inp_i.data.iter().zip(&v_i.data).map(|(x, y)| (x - y) * (x - y)).sum();
    let b: f64 = inp_j.data.iter().zip(&v_j.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(a + b)
}

/// Breakdown of a refinement evaluation over sampled frames.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RefinementReport {
    /// Mean over sampled frames of the per-pair loss.
    pub mean_loss: f64,
    pub branch_i: f64,
    pub branch_j: f64,
    pub frames_sampled: usize,
}

/// Evaluate the refinement loss of a composite sequence against its two
/// sources: render composite frames every `stride` steps with the crisp
/// rasterizer, decouple with the sources' energies, inpaint, and compare to
/// the sources' renders at matching time indices.
pub fn refinement_pass(
    composite_frames: &[Pose],
    source_i: &MotionSequence,
    source_j: &MotionSequence,
    e_i: &[f64; NUM_JOINTS],
    e_j: &[f64; NUM_JOINTS],
    cam: &CameraConfig,
    cfg: &DecoupleConfig,
    inpainter: &dyn Inpainter,
    stride: usize,
) -> Result<RefinementReport> {
    if composite_frames.len() != source_i.len() || composite_frames.len() != source_j.len() {
        return Err(Error::invalid_argument(format!(
            "composite has {} frames, sources have {} and {}",
            composite_frames.len(),
            source_i.len(),
            source_j.len()
        )));
    }
    let indices = sampled_frame_indices(composite_frames.len(), stride)?;
    if indices.is_empty() {
        return Err(Error::invalid_argument("no frames sampled"));
    }
    let mut total = 0.0;
    let mut total_i = 0.0;
    let mut total_j = 0.0;
    for &t in &indices {
        let frame = render_frame(&composite_frames[t], cam);
        let (masked_i, masked_j) = decouple_composite(&frame, e_i, e_j, cfg)?;
        let inp_i = inpainter.inpaint(&masked_i)?;
        let inp_j = inpainter.inpaint(&masked_j)?;
        let v_i = render_frame(&source_i.frames[t], cam).pixels;
        let v_j = render_frame(&source_j.frames[t], cam).pixels;
        let li: f64 = inp_i.data.iter().zip(&v_i.data).map(|(x, y)| (x - y) * (x - y)).sum();
        let lj: f64 = inp_j.data.iter().zip(&v_j.data).map(|(x, y)| (x - y) * (x - y)).sum();
        total += li + lj;
        total_i += li;
        total_j += lj;
    }
    let n = indices.len() as f64;
    Ok(RefinementReport {
        mean_loss: total / n,
        branch_i: total_i / n,
        branch_j: total_j / n,
        frames_sampled: indices.len(),
    })
}

/// Everything the differentiable refinement path needs besides the decoded
/// frame itself.
pub struct DrContext<'a> {
    pub cam: &'a CameraConfig,
    pub decouple: &'a DecoupleConfig,
    /// Gaussian splat radius of the smoothed rasterizer, pixels.
    pub sigma_px: f64,
    pub inpainter: &'a dyn Inpainter,
}

/// Refinement loss of one decoded frame against the two source frames, both
/// sides rendered with the smoothed splat rasterizer, plus the loss gradient
/// with respect to the decoded frame's world coordinates.
///
/// Masks are treated as constants: the top-fraction region selection is
/// piecewise constant in the coordinates, so it contributes no gradient
/// almost everywhere.
pub fn dr_frame_loss_grad(
    decoded: &Pose,
    source_i: &Pose,
    source_j: &Pose,
    e_i: &[f64; NUM_JOINTS],
    e_j: &[f64; NUM_JOINTS],
    ctx: &DrContext,
) -> Result<(f64, [[f64; 3]; NUM_JOINTS])> {
    let cam = ctx.cam;
    let jp = project_pose(decoded, cam);
    let composite = splat_image(&jp, cam, &BONES, ctx.sigma_px);
    let mask_i = source_mask(&jp, e_i, cam.height, cam.width, ctx.decouple)?;
    let mask_j = source_mask(&jp, e_j, cam.height, cam.width, ctx.decouple)?;
    let masked_i = crate::decouple::apply_mask(&composite, &mask_i, ctx.decouple.fill)?;
    let masked_j = crate::decouple::apply_mask(&composite, &mask_j, ctx.decouple.fill)?;
    let inp_i = ctx.inpainter.inpaint(&masked_i)?;
    let inp_j = ctx.inpainter.inpaint(&masked_j)?;
    let v_i = splat_image(&project_pose(source_i, cam), cam, &BONES, ctx.sigma_px);
    let v_j = splat_image(&project_pose(source_j, cam), cam, &BONES, ctx.sigma_px);
    let loss = dr_loss(&inp_i, &v_i, &inp_j, &v_j)?;

    // backward: residuals -> inpainter -> kept pixels of the composite render
    let mut d_inp_i = Image::zeros(cam.height, cam.width);
    let mut d_inp_j = Image::zeros(cam.height, cam.width);
    for k in 0..d_inp_i.data.len() {
        d_inp_i.data[k] = 2.0 * (inp_i.data[k] - v_i.data[k]);
        d_inp_j.data[k] = 2.0 * (inp_j.data[k] - v_j.data[k]);
    }
    let g_i = ctx.inpainter.inpaint_backward(&masked_i, &d_inp_i)?;
    let g_j = ctx.inpainter.inpaint_backward(&masked_j, &d_inp_j)?;
    let mut d_pixels = g_i;
    for (a, b) in d_pixels.data.iter_mut().zip(&g_j.data) {
        *a += b;
    }
    let d_jp = splat_backward(&jp, cam, &BONES, ctx.sigma_px, &d_pixels);
    Ok((loss, pixel_grad_to_world(&d_jp, cam)))
}
