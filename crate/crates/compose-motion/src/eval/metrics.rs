//! Diversity metrics and the aggregate metrics report.
//!
//! Diversity is the mean Euclidean feature distance over seeded random pairs;
//! multimodality applies the same estimator within each condition class and
//! averages across classes. Both choices are pinned here, not claimed as the
//! reference protocol.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean pairwise feature distance over `n_pairs` random index pairs.
pub fn diversity<R: Rng>(features: &[Vec<f64>], n_pairs: usize, rng: &mut R) -> Result<f64> {
    if features.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "diversity needs at least 2 samples, got {}",
            features.len()
        )));
    }
    if n_pairs == 0 {
        return Err(Error::invalid_argument("diversity needs n_pairs >= 1"));
    }
    let mut acc = 0.0;
    for _ in 0..n_pairs {
        let i = rng.gen_range(0..features.len());
        let mut j = rng.gen_range(0..features.len() - 1);
        if j >= i {
            j += 1;
        }
        acc += euclidean(&features[i], &features[j]);
    }
    Ok(acc / n_pairs as f64)
}

/// Within-class diversity averaged over classes. Every group needs at least
/// two members.
pub fn multimodality<R: Rng>(groups: &[Vec<Vec<f64>>], n_pairs: usize, rng: &mut R) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::invalid_argument("multimodality needs at least one group"));
    }
    let mut acc = 0.0;
    for (g, group) in groups.iter().enumerate() {
        if group.len() < 2 {
            return Err(Error::invalid_argument(format!(
                "multimodality group {g} has {} samples, need at least 2",
                group.len()
            )));
        }
        acc += diversity(group, n_pairs, rng)?;
    }
    Ok(acc / groups.len() as f64)
}

/// Aggregate evaluation result with bootstrap half-widths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub fid: f64,
    pub accuracy: f64,
    pub diversity: f64,
    pub multimodality: f64,
    pub fid_pm: f64,
    pub accuracy_pm: f64,
    pub diversity_pm: f64,
    pub multimodality_pm: f64,
    /// Hash of the evaluation configuration and seeds.
    pub config_fingerprint: String,
    pub seed: u64,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.fid,
            self.accuracy,
            self.diversity,
            self.multimodality,
            self.fid_pm,
            self.accuracy_pm,
            self.diversity_pm,
            self.multimodality_pm,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite metric".into()));
        }
        if self.fid_pm < 0.0 || self.accuracy_pm < 0.0 || self.diversity_pm < 0.0 || self.multimodality_pm < 0.0 {
            return Err(Error::validation("negative bootstrap half-width"));
        }
        Ok(())
    }
}

/// Sample standard deviation of bootstrap replicates (0 when fewer than 2).
pub fn bootstrap_half_width(replicates: &[f64]) -> f64 {
    if replicates.len() < 2 {
        return 0.0;
    }
    let n = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / n;
    let var = replicates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}
