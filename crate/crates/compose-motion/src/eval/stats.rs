//! Gaussian moment estimation and the Frechet distance between two fitted
//! Gaussians:
//!   d^2 = ||mu_t - mu_g||^2 + Tr(S_t + S_g - 2 (S_t S_g)^{1/2})
//! computed through the symmetric form (S_t^{1/2} S_g S_t^{1/2})^{1/2}, which
//! has the same trace for PSD inputs and avoids non-symmetric square roots.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sample mean and unbiased covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Estimate moments from feature vectors (at least two). The covariance is
/// the unbiased estimator, explicitly symmetrized.
pub fn gaussian_stats(features: &[Vec<f64>]) -> Result<GaussianStats> {
    if features.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "moment estimation needs at least 2 samples, got {}",
            features.len()
        )));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::invalid_argument("feature dimensions differ"));
    }
    let n = features.len() as f64;
    let mut mean = DVector::zeros(d);
    for f in features {
        for (m, x) in mean.iter_mut().zip(f) {
            *m += x;
        }
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for f in features {
        let centered = DVector::from_iterator(d, f.iter().zip(mean.iter()).map(|(x, m)| x - m));
        cov.ger(1.0, &centered, &centered, 1.0);
    }
    cov /= n - 1.0;
    // explicit symmetrization
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianStats { mean, cov })
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Symmetric PSD square root by eigendecomposition; negative eigenvalues are
/// clamped at zero (a warning is emitted when the clamp is material).
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid_argument("matrix square root needs a square matrix"));
    }
    let scale = max_abs(m).max(1.0);
    let asym = max_abs(&(m - m.transpose()));
    if asym > 1e-8 * scale {
        return Err(Error::invalid_argument(format!(
            "matrix is asymmetric (max deviation {asym:.3e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let norm = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut clamp_mag = 0.0f64;
    let roots: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < 0.0 {
                clamp_mag = clamp_mag.max(-l);
                0.0
            } else {
                l.sqrt()
            }
        })
        .collect();
    if clamp_mag > 1e-6 * norm.max(1e-300) {
        eprintln!("warning: matrix_sqrt_psd clamped eigenvalue of magnitude {clamp_mag:.3e} (norm {norm:.3e})");
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Frechet distance between two Gaussian moment sets, clamped at zero.
pub fn fid(t: &GaussianStats, g: &GaussianStats) -> Result<f64> {
    if t.dim() != g.dim() {
        return Err(Error::invalid_argument(format!("feature dims differ: {} vs {}", t.dim(), g.dim())));
    }
    let diff = &t.mean - &g.mean;
    let mean_term = diff.dot(&diff);
    let t_half = matrix_sqrt_psd(&t.cov)?;
    let inner = &t_half * &g.cov * &t_half;
    let cross = matrix_sqrt_psd(&inner)?;
    let trace_term = t.cov.trace() + g.cov.trace() - 2.0 * cross.trace();
    let value = mean_term + trace_term;
    if value < -1e-6 {
        eprintln!("warning: Frechet distance {value:.3e} below the numeric floor; clamping to 0");
    }
    Ok(value.max(0.0))
}
