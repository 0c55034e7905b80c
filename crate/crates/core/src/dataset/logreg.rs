//! Two-director logistic-regression discriminator over raw technique counts.

use serde::{Deserialize, Serialize};

use super::{ClipAnnotation, DatasetError, TechniqueId};
use crate::rng::SimRng;

const N: usize = TechniqueId::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 500,
            seed: 0,
        }
    }
}

/// Per-feature z-score fitted on the training set. Constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: [f64; N],
    pub std: [f64; N],
}

impl FeatureScaler {
    pub fn fit(rows: &[[f64; N]]) -> Self {
        let n = rows.len() as f64;
        let mut mean = [0.0; N];
        let mut std = [0.0; N];
        for row in rows {
            for j in 0..N {
                mean[j] += row[j] / n;
            }
        }
        for row in rows {
            for j in 0..N {
                std[j] += (row[j] - mean[j]).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt();
        }
        Self { mean, std }
    }

    pub fn transform(&self, row: &[f64; N]) -> [f64; N] {
        let mut out = [0.0; N];
        for j in 0..N {
            out[j] = if self.std[j] > 1e-12 {
                (row[j] - self.mean[j]) / self.std[j]
            } else {
                0.0
            };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: [f64; N],
    pub bias: f64,
    /// `labels[0]` is predicted below probability 0.5, `labels[1]` at or above.
    pub labels: [String; 2],
    pub scaler: FeatureScaler,
}

impl LogRegModel {
    pub fn decision_value(&self, clip: &ClipAnnotation) -> f64 {
        let x = self.scaler.transform(&clip.features());
        dot(&self.weights, &x) + self.bias
    }

    pub fn probability(&self, clip: &ClipAnnotation) -> f64 {
        sigmoid(self.decision_value(clip))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn dot(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean logistic loss and its gradient with respect to `(weights, bias)`.
pub fn loss_and_gradient(
    weights: &[f64; N],
    bias: f64,
    xs: &[[f64; N]],
    ys: &[f64],
) -> (f64, [f64; N], f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut gw = [0.0; N];
    let mut gb = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let z = dot(weights, x) + bias;
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for j in 0..N {
            gw[j] += r * x[j];
        }
        gb += r;
    }
    for g in &mut gw {
        *g /= n;
    }
    (loss / n, gw, gb / n)
}

/// Full-batch gradient descent on standardized counts. Class A is label 0.
pub fn train_discriminator(
    label_a: &str,
    clips_a: &[ClipAnnotation],
    label_b: &str,
    clips_b: &[ClipAnnotation],
    config: &TrainConfig,
) -> Result<LogRegModel, DatasetError> {
    if clips_a.is_empty() || clips_b.is_empty() {
        return Err(DatasetError::DegenerateData(format!(
            "need clips for both classes (got {} and {})",
            clips_a.len(),
            clips_b.len()
        )));
    }
    let raw: Vec<[f64; N]> = clips_a.iter().chain(clips_b).map(|c| c.features()).collect();
    let ys: Vec<f64> = std::iter::repeat_n(0.0, clips_a.len())
        .chain(std::iter::repeat_n(1.0, clips_b.len()))
        .collect();
    let scaler = FeatureScaler::fit(&raw);
    let xs: Vec<[f64; N]> = raw.iter().map(|r| scaler.transform(r)).collect();

    let mut rng = SimRng::new(config.seed);
    let mut weights = [0.0; N];
    for w in &mut weights {
        *w = rng.range(-0.01, 0.01);
    }
    let mut bias = 0.0;
    for _ in 0..config.epochs {
        let (_, gw, gb) = loss_and_gradient(&weights, bias, &xs, &ys);
        for j in 0..N {
            weights[j] -= config.learning_rate * gw[j];
        }
        bias -= config.learning_rate * gb;
    }
    Ok(LogRegModel {
        weights,
        bias,
        labels: [label_a.to_string(), label_b.to_string()],
        scaler,
    })
}

pub fn predict_director(model: &LogRegModel, clip: &ClipAnnotation) -> (String, f64) {
    let p = model.probability(clip);
    let label = if p >= 0.5 { &model.labels[1] } else { &model.labels[0] };
    (label.clone(), p)
}

/// Features by descending absolute weight; ties keep technique order.
pub fn feature_importance(model: &LogRegModel) -> Vec<(TechniqueId, f64)> {
    let mut ranked: Vec<(TechniqueId, f64)> = TechniqueId::ALL
        .iter()
        .map(|t| (*t, model.weights[t.code()].abs()))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.code().cmp(&b.0.code())));
    ranked
}

/// Fraction of clips whose predicted label matches their class.
pub fn accuracy(model: &LogRegModel, clips_a: &[ClipAnnotation], clips_b: &[ClipAnnotation]) -> f64 {
    let total = clips_a.len() + clips_b.len();
    if total == 0 {
        return 0.0;
    }
    let correct = clips_a.iter().filter(|c| model.probability(c) < 0.5).count()
        + clips_b.iter().filter(|c| model.probability(c) >= 0.5).count();
    correct as f64 / total as f64
}

/// Stratified k-fold cross-validated accuracy. Folds are assigned after a
/// seeded shuffle of each class.
pub fn cross_validate(
    clips_a: &[ClipAnnotation],
    clips_b: &[ClipAnnotation],
    folds: usize,
    config: &TrainConfig,
) -> Result<f64, DatasetError> {
    if folds < 2 || clips_a.len() < folds || clips_b.len() < folds {
        return Err(DatasetError::DegenerateData(format!(
            "{folds}-fold split needs at least {folds} clips per class"
        )));
    }
    let mut rng = SimRng::new(config.seed ^ 0xF01D);
    let assign = |n: usize, rng: &mut SimRng| {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.index(i + 1);
            idx.swap(i, j);
        }
        let mut fold_of = vec![0; n];
        for (pos, i) in idx.into_iter().enumerate() {
            fold_of[i] = pos % folds;
        }
        fold_of
    };
    let fold_a = assign(clips_a.len(), &mut rng);
    let fold_b = assign(clips_b.len(), &mut rng);

    let mut correct = 0.0;
    for k in 0..folds {
        let split = |clips: &[ClipAnnotation], folds_of: &[usize]| {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (c, f) in clips.iter().zip(folds_of) {
                if *f == k {
                    test.push(c.clone());
                } else {
                    train.push(c.clone());
                }
            }
            (train, test)
        };
        let (train_a, test_a) = split(clips_a, &fold_a);
        let (train_b, test_b) = split(clips_b, &fold_b);
        let model = train_discriminator("a", &train_a, "b", &train_b, config)?;
        correct += accuracy(&model, &test_a, &test_b) * (test_a.len() + test_b.len()) as f64;
    }
    Ok(correct / (clips_a.len() + clips_b.len()) as f64)
}
