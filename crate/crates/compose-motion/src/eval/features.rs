//! Feature extraction for the evaluation metrics.
//!
//! The handcrafted extractor emits, per joint, the mean and population
//! standard deviation of positions and frame differences (24 * 12 = 288
//! values), followed by the five per-part energies: 293 dimensions total.
//! The trained variant returns the penultimate activations of a pair
//! classifier fit on held-out composites.

use crate::energy::compute_part_energy;
use crate::error::{Error, Result};
use crate::eval::classifier::PairClassifier;
use crate::motion::{ActionLabel, BodyPartition, MotionSequence, Pose, NUM_JOINTS};

/// Dimension of the handcrafted feature vector.
pub const HANDCRAFTED_DIM: usize = NUM_JOINTS * 12 + 5;

#[derive(Clone)]
pub enum FeatureExtractor {
    Handcrafted,
    /// Penultimate activations of a trained pair classifier.
    Trained(PairClassifier),
}

impl FeatureExtractor {
    pub fn output_dim(&self) -> usize {
        match self {
            FeatureExtractor::Handcrafted => HANDCRAFTED_DIM,
            FeatureExtractor::Trained(c) => c.hidden_dim(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureExtractor::Handcrafted => "handcrafted",
            FeatureExtractor::Trained(_) => "classifier",
        }
    }
}

/// Extract features from a pose sequence.
pub fn extract_features(frames: &[Pose], extractor: &FeatureExtractor) -> Result<Vec<f64>> {
    match extractor {
        FeatureExtractor::Handcrafted => handcrafted_features(frames),
        FeatureExtractor::Trained(c) => {
            let h = handcrafted_features(frames)?;
            c.hidden(&h)
        }
    }
}

/// Convenience wrapper over a labeled sequence.
pub fn extract_sequence_features(seq: &MotionSequence, extractor: &FeatureExtractor) -> Result<Vec<f64>> {
    extract_features(&seq.frames, extractor)
}

/// The fixed handcrafted feature vector.
pub fn handcrafted_features(frames: &[Pose]) -> Result<Vec<f64>> {
    if frames.len() < 2 {
        return Err(Error::invalid_argument("features need at least 2 frames"));
    }
    let t = frames.len();
    let mut out = Vec::with_capacity(HANDCRAFTED_DIM);

    // per-joint position mean/std, per coordinate
    for n in 0..NUM_JOINTS {
        let mut mean = [0.0; 3];
        for f in frames {
            for c in 0..3 {
                mean[c] += f.joints[n][c];
            }
        }
        for m in mean.iter_mut() {
            *m /= t as f64;
        }
        let mut var = [0.0; 3];
        for f in frames {
            for c in 0..3 {
                let d = f.joints[n][c] - mean[c];
                var[c] += d * d;
            }
        }
        out.extend_from_slice(&mean);
        for v in var {
            out.push((v / t as f64).sqrt());
        }
    }

    // per-joint frame-difference mean/std, per coordinate
    for n in 0..NUM_JOINTS {
        let mut mean = [0.0; 3];
        for k in 1..t {
            for c in 0..3 {
                mean[c] += frames[k].joints[n][c] - frames[k - 1].joints[n][c];
            }
        }
        for m in mean.iter_mut() {
            *m /= (t - 1) as f64;
        }
        let mut var = [0.0; 3];
        for k in 1..t {
            for c in 0..3 {
                let d = frames[k].joints[n][c] - frames[k - 1].joints[n][c] - mean[c];
                var[c] += d * d;
            }
        }
        out.extend_from_slice(&mean);
        for v in var {
            out.push((v / (t - 1) as f64).sqrt());
        }
    }

    // per-part energies, default partition order
    let label = ActionLabel::new(0, 1).map_err(|e| Error::validation(e.to_string()))?;
    let seq = MotionSequence { frames: frames.to_vec(), label, fps: crate::motion::DEFAULT_FPS };
    let energy = compute_part_energy(&seq, &BodyPartition::default_five())?;
    out.extend_from_slice(&energy.per_part);

    debug_assert_eq!(out.len(), HANDCRAFTED_DIM);
    Ok(out)
}
