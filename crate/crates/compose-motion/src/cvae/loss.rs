//! Training objective: closed-form diagonal-Gaussian KL, mean-squared
//! reconstruction, and the optional refinement term, combined with the
//! configured weights.

use serde::Serialize;

use super::model::{frames_matrix, matrix_to_frames, Cvae, DiagonalGaussian, FRAME_DIM};
use super::tape::{Matrix, ParamSet, Tape, Var};
use crate::error::{Error, Result};
use crate::motion::{MixedLabel, MotionSequence, Pose, NUM_JOINTS};
use crate::refine::{dr_frame_loss_grad, DrContext};

/// KL(q || p) for diagonal Gaussians, summed over dimensions:
///   sum( log sp - log sq + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2 )
pub fn kl_divergence(q: &DiagonalGaussian, p: &DiagonalGaussian) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::invalid_argument(format!("KL dims differ: {} vs {}", q.dim(), p.dim())));
    }
    let mut acc = 0.0;
    for i in 0..q.dim() {
        let lq = q.log_std[i];
        let lp = p.log_std[i];
        let var_q = (2.0 * lq).exp();
        let var_p = (2.0 * lp).exp();
        let dm = q.mean[i] - p.mean[i];
        acc += lp - lq + (var_q + dm * dm) / (2.0 * var_p) - 0.5;
    }
    Ok(acc)
}

/// Mean over all T*24*3 coordinates of squared error.
pub fn recon_loss(pred: &[Pose], target: &[Pose]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::invalid_argument(format!(
            "reconstruction shapes differ: {} vs {} frames",
            pred.len(),
            target.len()
        )));
    }
    let mut acc = 0.0;
    for (a, b) in pred.iter().zip(target) {
        for n in 0..NUM_JOINTS {
            for c in 0..3 {
                let d = a.joints[n][c] - b.joints[n][c];
                acc += d * d;
            }
        }
    }
    Ok(acc / (pred.len() * FRAME_DIM) as f64)
}

/// Graph version of the KL above; inputs are (mu, log_std) node pairs.
pub fn kl_graph(t: &mut Tape, mu_q: Var, ls_q: Var, mu_p: Var, ls_p: Var) -> Var {
    let d = t.sub(mu_q, mu_p);
    let d2 = t.mul(d, d);
    let two_lq = t.scale(ls_q, 2.0);
    let var_q = t.exp(two_lq);
    let two_lp = t.scale(ls_p, 2.0);
    let var_p = t.exp(two_lp);
    let num = t.add(var_q, d2);
    let den = t.scale(var_p, 2.0);
    let frac = t.div(num, den);
    let log_ratio = t.sub(ls_p, ls_q);
    let sum_terms = t.add(log_ratio, frac);
    let shifted = t.add_scalar(sum_terms, -0.5);
    t.sum_all(shifted)
}

/// One training example: the coupled target with its (already normalized and
/// length-matched) sources and their per-joint energies.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub id: String,
    pub frames: Vec<Pose>,
    pub label: MixedLabel,
    pub source_i: MotionSequence,
    pub source_j: MotionSequence,
    pub e_i: [f64; NUM_JOINTS],
    pub e_j: [f64; NUM_JOINTS],
}

/// Frozen per-item stochasticity so a loss evaluation can be replayed
/// bit-exactly (finite differencing, determinism tests).
#[derive(Debug, Clone)]
pub struct ItemNoise {
    /// Reparameterization draw, length latent_dim.
    pub eps: Vec<f64>,
    /// Frame index for the refinement term; None disables the term.
    pub dr_frame: Option<usize>,
}

/// Per-term averages over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl: f64,
    pub dr: f64,
    pub total: f64,
}

/// Build the weighted batch loss graph. Returns the scalar loss node and the
/// unweighted per-term batch averages.
pub fn batch_loss_graph(
    model: &Cvae,
    t: &mut Tape,
    params: &ParamSet,
    items: &[TrainItem],
    noise: &[ItemNoise],
    dr: Option<&DrContext>,
) -> Result<(Var, LossBreakdown)> {
    if items.is_empty() {
        return Err(Error::invalid_argument("empty batch"));
    }
    if items.len() != noise.len() {
        return Err(Error::invalid_argument("items and noise lengths differ"));
    }
    let cfg = &model.config;
    let inv_b = 1.0 / items.len() as f64;
    let mut recon_terms: Option<Var> = None;
    let mut kl_terms: Option<Var> = None;
    let mut dr_terms: Option<Var> = None;

    for (item, n) in items.iter().zip(noise) {
        let (mu_q, ls_q) = model.encode_graph(t, params, &item.label, &item.frames)?;
        let (mu_p, ls_p) = model.prior_graph(t, params, &item.label)?;
        if n.eps.len() != cfg.latent_dim {
            return Err(Error::invalid_argument("noise dim mismatch"));
        }
        let eps = t.constant(Matrix::row_vector(n.eps.clone()));
        let sigma = t.exp(ls_q);
        let scaled = t.mul(sigma, eps);
        let z = t.add(mu_q, scaled);
        let decoded = model.decode_graph(t, params, &item.label, z)?;

        let target = t.constant(frames_matrix(&item.frames));
        let diff = t.sub(decoded, target);
        let sq = t.mul(diff, diff);
        let recon = t.mean_all(sq);
        recon_terms = Some(match recon_terms {
            Some(acc) => t.add(acc, recon),
            None => recon,
        });

        let kl = kl_graph(t, mu_q, ls_q, mu_p, ls_p);
        kl_terms = Some(match kl_terms {
            Some(acc) => t.add(acc, kl),
            None => kl,
        });

        if let (Some(frame), Some(ctx)) = (n.dr_frame, dr) {
            if frame >= item.frames.len() {
                return Err(Error::invalid_argument(format!(
                    "refinement frame {frame} out of range for {} frames",
                    item.frames.len()
                )));
            }
            let decoded_frames = matrix_to_frames(t.value(decoded));
            let (loss_val, grad) = dr_frame_loss_grad(
                &decoded_frames[frame],
                &item.source_i.frames[frame],
                &item.source_j.frames[frame],
                &item.e_i,
                &item.e_j,
                ctx,
            )?;
            // scatter the frame gradient into the decoded T x 72 layout
            let mut g = Matrix::zeros(item.frames.len(), FRAME_DIM);
            for n_j in 0..NUM_JOINTS {
                for c in 0..3 {
                    g.data[frame * FRAME_DIM + n_j * 3 + c] = grad[n_j][c];
                }
            }
            let dr_node = t.external_scalar(decoded, loss_val, g);
            dr_terms = Some(match dr_terms {
                Some(acc) => t.add(acc, dr_node),
                None => dr_node,
            });
        }
    }

    let recon_avg = t.scale(recon_terms.expect("non-empty batch"), inv_b);
    let kl_avg = t.scale(kl_terms.expect("non-empty batch"), inv_b);
    let dr_avg = dr_terms.map(|v| t.scale(v, inv_b));

    let recon_w = t.scale(recon_avg, cfg.w_recon);
    let kl_w = t.scale(kl_avg, cfg.w_kl);
    let mut total = t.add(recon_w, kl_w);
    if let Some(dr_avg) = dr_avg {
        let dr_w = t.scale(dr_avg, cfg.w_dr);
        total = t.add(total, dr_w);
    }

    let breakdown = LossBreakdown {
        recon: t.value(recon_avg).data[0],
        kl: t.value(kl_avg).data[0],
        dr: dr_avg.map(|v| t.value(v).data[0]).unwrap_or(0.0),
        total: t.value(total).data[0],
    };
    Ok((total, breakdown))
}

/// Evaluate the batch loss and its parameter gradients.
pub fn batch_loss_and_grads(
    model: &Cvae,
    params: &ParamSet,
    items: &[TrainItem],
    noise: &[ItemNoise],
    dr: Option<&DrContext>,
) -> Result<(LossBreakdown, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let (loss, breakdown) = batch_loss_graph(model, &mut tape, params, items, noise, dr)?;
    let mut grads = params.zeros_like();
    tape.backward(loss, &mut grads)?;
    Ok((breakdown, grads))
}

/// Evaluate the batch loss only.
pub fn batch_loss_value(
    model: &Cvae,
    params: &ParamSet,
    items: &[TrainItem],
    noise: &[ItemNoise],
    dr: Option<&DrContext>,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let (_, breakdown) = batch_loss_graph(model, &mut tape, params, items, noise, dr)?;
    Ok(breakdown)
}
