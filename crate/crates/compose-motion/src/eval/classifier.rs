//! Pair-class recognizer: a small feed-forward network over handcrafted
//! features with softmax cross-entropy, trained by plain gradient descent.
//! Stands in for the paper-scale recognition model; its penultimate layer
//! doubles as a learned feature extractor.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::features::handcrafted_features;
use crate::motion::Pose;

#[derive(Debug, Clone, Copy)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { hidden: 32, epochs: 300, learning_rate: 0.05 }
    }
}

/// Two-layer tanh MLP over standardized features.
#[derive(Clone)]
pub struct PairClassifier {
    pub pairs: Vec<(usize, usize)>,
    cfg: ClassifierConfig,
    in_dim: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    trained: bool,
}

impl PairClassifier {
    pub fn new<R: Rng>(pairs: Vec<(usize, usize)>, in_dim: usize, cfg: ClassifierConfig, rng: &mut R) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid_argument("classifier needs at least one pair class"));
        }
        let h = cfg.hidden;
        let out = pairs.len();
        let n1 = Normal::new(0.0, (2.0 / (in_dim + h) as f64).sqrt()).unwrap();
        let n2 = Normal::new(0.0, (2.0 / (h + out) as f64).sqrt()).unwrap();
        Ok(PairClassifier {
            pairs,
            cfg,
            in_dim,
            w1: (0..in_dim * h).map(|_| n1.sample(rng)).collect(),
            b1: vec![0.0; h],
            w2: (0..h * out).map(|_| n2.sample(rng)).collect(),
            b2: vec![0.0; out],
            feat_mean: vec![0.0; in_dim],
            feat_std: vec![1.0; in_dim],
            trained: false,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.cfg.hidden
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Index of an unordered class pair in this classifier's vocabulary.
    pub fn pair_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.pairs.iter().position(|p| *p == key)
    }

    fn standardize(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(self.feat_mean.iter().zip(&self.feat_std)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.cfg.hidden;
        let out = self.pairs.len();
        let mut hid = vec![0.0; h];
        for j in 0..h {
            let mut acc = self.b1[j];
            for (i, xi) in x.iter().enumerate() {
                acc += xi * self.w1[i * h + j];
            }
            hid[j] = acc.tanh();
        }
        let mut logits = vec![0.0; out];
        for o in 0..out {
            let mut acc = self.b2[o];
            for (j, hj) in hid.iter().enumerate() {
                acc += hj * self.w2[j * out + o];
            }
            logits[o] = acc;
        }
        (hid, logits)
    }

    /// Full-batch gradient-descent fit with softmax cross-entropy.
    pub fn fit(&mut self, features: &[Vec<f64>], pair_ids: &[usize]) -> Result<()> {
        if features.is_empty() || features.len() != pair_ids.len() {
            return Err(Error::invalid_argument("classifier fit needs matching non-empty features and labels"));
        }
        if features.iter().any(|f| f.len() != self.in_dim) {
            return Err(Error::invalid_argument("feature dimension mismatch"));
        }
        if let Some(&bad) = pair_ids.iter().find(|id| **id >= self.pairs.len()) {
            return Err(Error::invalid_argument(format!("pair id {bad} out of range")));
        }
        let n = features.len();
        let d = self.in_dim;
        // feature standardization from the training set
        for c in 0..d {
            let mean = features.iter().map(|f| f[c]).sum::<f64>() / n as f64;
            let var = features.iter().map(|f| (f[c] - mean).powi(2)).sum::<f64>() / n as f64;
            self.feat_mean[c] = mean;
            self.feat_std[c] = var.sqrt().max(1e-8);
        }
        let xs: Vec<Vec<f64>> = features.iter().map(|f| self.standardize(f)).collect();

        let h = self.cfg.hidden;
        let out = self.pairs.len();
        let lr = self.cfg.learning_rate;
        for _ in 0..self.cfg.epochs {
            let mut gw1 = vec![0.0; d * h];
            let mut gb1 = vec![0.0; h];
            let mut gw2 = vec![0.0; h * out];
            let mut gb2 = vec![0.0; out];
            for (x, &y) in xs.iter().zip(pair_ids) {
                let (hid, logits) = self.forward(x);
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                // d(cross-entropy)/d(logit) = softmax - one_hot
                let mut dlogit: Vec<f64> = exps.iter().map(|e| e / sum).collect();
                dlogit[y] -= 1.0;
                for o in 0..out {
                    gb2[o] += dlogit[o];
                    for j in 0..h {
                        gw2[j * out + o] += hid[j] * dlogit[o];
                    }
                }
                for j in 0..h {
                    let mut dh = 0.0;
                    for o in 0..out {
                        dh += dlogit[o] * self.w2[j * out + o];
                    }
                    let dpre = dh * (1.0 - hid[j] * hid[j]);
                    gb1[j] += dpre;
                    for (i, xi) in x.iter().enumerate() {
                        gw1[i * h + j] += xi * dpre;
                    }
                }
            }
            let scale = lr / n as f64;
            for (w, g) in self.w1.iter_mut().zip(&gw1) {
                *w -= scale * g;
            }
            for (b, g) in self.b1.iter_mut().zip(&gb1) {
                *b -= scale * g;
            }
            for (w, g) in self.w2.iter_mut().zip(&gw2) {
                *w -= scale * g;
            }
            for (b, g) in self.b2.iter_mut().zip(&gb2) {
                *b -= scale * g;
            }
        }
        self.trained = true;
        Ok(())
    }

    /// Predicted pair-class index for a raw feature vector.
    pub fn predict(&self, feature: &[f64]) -> Result<usize> {
        if !self.trained {
            return Err(Error::InvalidState("classifier has not been trained".into()));
        }
        let x = self.standardize(feature);
        let (_, logits) = self.forward(&x);
        Ok(logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap())
    }

    /// Penultimate activations for a raw feature vector.
    pub fn hidden(&self, feature: &[f64]) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(Error::InvalidState("classifier has not been trained".into()));
        }
        let x = self.standardize(feature);
        Ok(self.forward(&x).0)
    }
}

/// Fraction of generated sequences whose predicted pair class matches the
/// intended condition.
pub fn accuracy(classifier: &PairClassifier, generated: &[(Vec<Pose>, (usize, usize))]) -> Result<f64> {
    if !classifier.is_trained() {
        return Err(Error::InvalidState("classifier has not been trained".into()));
    }
    if generated.is_empty() {
        return Err(Error::invalid_argument("accuracy needs at least one generated sample"));
    }
    let mut hits = 0usize;
    for (frames, (a, b)) in generated {
        let intended = classifier
            .pair_index(*a, *b)
            .ok_or_else(|| Error::invalid_argument(format!("pair ({a},{b}) unknown to the classifier")))?;
        let f = handcrafted_features(frames)?;
        if classifier.predict(&f)? == intended {
            hits += 1;
        }
    }
    Ok(hits as f64 / generated.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::features::HANDCRAFTED_DIM;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy_problem(seed: u64, per_class: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        // three well-separated blobs in feature space
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.3).unwrap();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for class in 0..3usize {
            for _ in 0..per_class {
                let mut f = vec![0.0; 8];
                f[class] = 3.0;
                for v in f.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
                features.push(f);
                labels.push(class);
            }
        }
        (features, labels)
    }

    #[test]
    fn classifier_fits_its_training_data() {
        let (features, labels) = toy_problem(1, 20);
        let pairs = vec![(0, 1), (0, 2), (1, 2)];
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut clf = PairClassifier::new(pairs, 8, ClassifierConfig::default(), &mut rng).unwrap();
        clf.fit(&features, &labels).unwrap();
        let mut hits = 0;
        for (f, &y) in features.iter().zip(&labels) {
            if clf.predict(f).unwrap() == y {
                hits += 1;
            }
        }
        let acc = hits as f64 / features.len() as f64;
        assert!(acc >= 0.9, "training accuracy {acc}");
    }

    #[test]
    fn untrained_classifier_is_invalid_state() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let clf = PairClassifier::new(vec![(0, 1)], HANDCRAFTED_DIM, ClassifierConfig::default(), &mut rng).unwrap();
        assert!(matches!(clf.predict(&vec![0.0; HANDCRAFTED_DIM]), Err(Error::InvalidState(_))));
        assert!(matches!(clf.hidden(&vec![0.0; HANDCRAFTED_DIM]), Err(Error::InvalidState(_))));
        assert!(matches!(accuracy(&clf, &[]), Err(Error::InvalidState(_))));
    }

    #[test]
    fn random_labels_give_chance_accuracy() {
        // labels shuffled independently of features: accuracy near 1/#pairs
        let (features, _) = toy_problem(5, 40);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let labels: Vec<usize> = (0..features.len()).map(|_| rng.gen_range(0..3)).collect();
        let mut clf =
            PairClassifier::new(vec![(0, 1), (0, 2), (1, 2)], 8, ClassifierConfig { epochs: 100, ..Default::default() }, &mut rng)
                .unwrap();
        clf.fit(&features, &labels).unwrap();
        // fresh random labels as "intended": hit rate should hover near 1/3
        let eval_labels: Vec<usize> = (0..features.len()).map(|_| rng.gen_range(0..3)).collect();
        let mut hits = 0;
        for (f, &y) in features.iter().zip(&eval_labels) {
            if clf.predict(f).unwrap() == y {
                hits += 1;
            }
        }
        let acc = hits as f64 / features.len() as f64;
        let n = features.len() as f64;
        let sigma = (1.0 / 3.0 * 2.0 / 3.0 / n).sqrt();
        assert!((acc - 1.0 / 3.0).abs() < 4.0 * sigma + 0.05, "accuracy {acc} far from chance");
    }

    #[test]
    fn empty_input_rejected() {
        let (features, labels) = toy_problem(7, 5);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut clf = PairClassifier::new(vec![(0, 1), (0, 2), (1, 2)], 8, ClassifierConfig::default(), &mut rng).unwrap();
        clf.fit(&features, &labels).unwrap();
        assert!(accuracy(&clf, &[]).is_err());
    }
}
