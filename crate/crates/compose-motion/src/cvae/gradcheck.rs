//! Central finite-difference verification of analytic gradients, exhaustive
//! over every scalar parameter of a small model.

use super::loss::{batch_loss_and_grads, batch_loss_value, ItemNoise, TrainItem};
use super::model::Cvae;
use super::tape::{Matrix, ParamSet};
use crate::error::Result;
use crate::refine::DrContext;

/// A differentiable scalar objective over a parameter set.
pub trait LossProbe {
    fn loss(&self, params: &ParamSet) -> Result<f64>;
    fn loss_and_grads(&self, params: &ParamSet) -> Result<(f64, Vec<Matrix>)>;
}

/// The full training objective on a frozen batch: fixed reparameterization
/// noise and refinement frame choices, so repeated evaluations are bit-exact.
pub struct CvaeLossProbe<'a> {
    pub model: &'a Cvae,
    pub items: &'a [TrainItem],
    pub noise: &'a [ItemNoise],
    pub dr: Option<&'a DrContext<'a>>,
}

impl LossProbe for CvaeLossProbe<'_> {
    fn loss(&self, params: &ParamSet) -> Result<f64> {
        Ok(batch_loss_value(self.model, params, self.items, self.noise, self.dr)?.total)
    }

    fn loss_and_grads(&self, params: &ParamSet) -> Result<(f64, Vec<Matrix>)> {
        let (bd, grads) = batch_loss_and_grads(self.model, params, self.items, self.noise, self.dr)?;
        Ok((bd.total, grads))
    }
}

/// Toy objective 0.5 * ||params||^2: the analytic gradient is the parameter
/// vector itself and central differences are exact up to roundoff.
pub struct QuadraticProbe;

impl LossProbe for QuadraticProbe {
    fn loss(&self, params: &ParamSet) -> Result<f64> {
        Ok(0.5 * params.tensors.iter().flat_map(|t| &t.data).map(|p| p * p).sum::<f64>())
    }

    fn loss_and_grads(&self, params: &ParamSet) -> Result<(f64, Vec<Matrix>)> {
        Ok((self.loss(params)?, params.tensors.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub params_checked: usize,
}

/// Compare analytic gradients against central finite differences over every
/// scalar parameter. The relative error per parameter is
/// |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8).
pub fn grad_check(params: &mut ParamSet, probe: &dyn LossProbe, eps: f64) -> Result<GradCheckReport> {
    let (_, grads) = probe.loss_and_grads(params)?;
    let total = params.total_len();
    let mut max_rel_err = 0.0f64;
    let mut worst = String::new();
    for flat in 0..total {
        let orig = params.get_flat(flat);
        params.set_flat(flat, orig + eps);
        let hi = probe.loss(params)?;
        params.set_flat(flat, orig - eps);
        let lo = probe.loss(params)?;
        params.set_flat(flat, orig);
        let fd = (hi - lo) / (2.0 * eps);
        let (ti, to) = params.locate(flat);
        let ga = grads[ti].data[to];
        let rel = (ga - fd).abs() / ga.abs().max(fd.abs()).max(1e-8);
        if rel > max_rel_err {
            max_rel_err = rel;
            worst = format!("{}[{}] (analytic {ga}, fd {fd})", params.names[ti], to);
        }
    }
    Ok(GradCheckReport { max_rel_err, worst_param: worst, params_checked: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvae::model::ModelConfig;
    use crate::cvae::tape::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn quadratic_probe_is_exact() {
        // order-one parameters: the quadratic has no truncation error, so the
        // central difference agrees to rounding noise
        let mut params = ParamSet::new();
        params.add("p", Matrix::from_vec(1, 4, vec![0.75, -1.25, 1.0, -0.5]));
        let report = grad_check(&mut params, &QuadraticProbe, 1e-5).unwrap();
        assert!(report.max_rel_err <= 1e-10, "rel err {} at {}", report.max_rel_err, report.worst_param);
    }

    #[test]
    fn cvae_loss_gradients_verify() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let (model, mut params) = Cvae::new(ModelConfig::grad_check_scale(4), &mut rng).unwrap();
        let items = crate::cvae::testutil::build_items(model.config.frames, 2, 9);
        let noise: Vec<ItemNoise> = (0..items.len())
            .map(|k| ItemNoise {
                eps: (0..model.config.latent_dim).map(|d| ((k * 4 + d) as f64 * 0.37).sin()).collect(),
                dr_frame: None,
            })
            .collect();
        let probe = CvaeLossProbe { model: &model, items: &items, noise: &noise, dr: None };
        let report = grad_check(&mut params, &probe, 1e-5).unwrap();
        assert!(report.params_checked <= 5000);
        assert!(report.max_rel_err < 1e-4, "rel err {} at {}", report.max_rel_err, report.worst_param);
    }
}
