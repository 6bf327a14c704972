//! Linear classifiers trained by full-batch (sub)gradient descent from a
//! zero initialization, so training is deterministic.

pub const LEARNING_RATE: f64 = 0.1;
pub const EPOCHS: usize = 500;
pub const L2: f64 = 1e-4;

/// One weight row per class; the last entry is the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
}

impl LinearModel {
    fn zeros(n_classes: usize, d: usize) -> Self {
        LinearModel {
            weights: vec![vec![0.0; d + 1]; n_classes],
        }
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()])
            .collect()
    }

    /// Highest score; ties go to the lower class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Multinomial logistic regression.
pub fn fit_logistic(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> LinearModel {
    let d = x.first().map_or(0, Vec::len);
    let n = x.len() as f64;
    let mut model = LinearModel::zeros(n_classes, d);
    for _ in 0..EPOCHS {
        let mut grad = vec![vec![0.0; d + 1]; n_classes];
        for (xi, &yi) in x.iter().zip(y) {
            let p = softmax(&model.scores(xi));
            for c in 0..n_classes {
                let err = p[c] - if c == yi { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[c][j] += err * xi[j];
                }
                grad[c][d] += err;
            }
        }
        for c in 0..n_classes {
            for j in 0..=d {
                let reg = if j < d { L2 * model.weights[c][j] } else { 0.0 };
                model.weights[c][j] -= LEARNING_RATE * (grad[c][j] / n + reg);
            }
        }
    }
    model
}

/// One-vs-rest linear SVM on the hinge loss.
pub fn fit_svm(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> LinearModel {
    let d = x.first().map_or(0, Vec::len);
    let n = x.len() as f64;
    let mut model = LinearModel::zeros(n_classes, d);
    for c in 0..n_classes {
        let w = &mut model.weights[c];
        for _ in 0..EPOCHS {
            let mut grad = vec![0.0; d + 1];
            for (xi, &yi) in x.iter().zip(y) {
                let t = if yi == c { 1.0 } else { -1.0 };
                let margin = t * (w[..d].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + w[d]);
                if margin < 1.0 {
                    for j in 0..d {
                        grad[j] -= t * xi[j];
                    }
                    grad[d] -= t;
                }
            }
            for j in 0..=d {
                let reg = if j < d { L2 * w[j] } else { 0.0 };
                w[j] -= LEARNING_RATE * (grad[j] / n + reg);
            }
        }
    }
    model
}
