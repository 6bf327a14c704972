//! Gradient-boosted depth-2 regression trees with a softmax objective.
//!
//! Every round fits one tree per class to the negative gradient
//! `onehot − p`; leaves take the one-step Newton value
//! `(K−1)/K · Σr / Σ|r|(1−|r|)`.

use super::linear::argmax;

pub const ROUNDS: usize = 50;
pub const SHRINKAGE: f64 = 0.1;
pub const MAX_DEPTH: usize = 2;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.eval(x)
                } else {
                    right.eval(x)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gbt {
    init: Vec<f64>,
    /// `rounds × classes` trees.
    trees: Vec<Vec<Node>>,
}

impl Gbt {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for round in &self.trees {
            for (c, t) in round.iter().enumerate() {
                f[c] += SHRINKAGE * t.eval(x);
            }
        }
        f
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

fn leaf_value(idx: &[usize], r: &[f64], k: usize) -> f64 {
    let num: f64 = idx.iter().map(|&i| r[i]).sum();
    let den: f64 = idx.iter().map(|&i| r[i].abs() * (1.0 - r[i].abs())).sum();
    if den < 1e-12 {
        return 0.0;
    }
    (k as f64 - 1.0) / k as f64 * num / den
}

/// Best least-squares split of `idx`; `None` when no split reduces the
/// squared error.
fn best_split(x: &[Vec<f64>], r: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
    let d = x.first().map_or(0, Vec::len);
    let total: f64 = idx.iter().map(|&i| r[i]).sum();
    let n = idx.len() as f64;
    let base = total * total / n;
    let mut best: Option<(f64, usize, f64)> = None;
    for j in 0..d {
        let mut order = idx.to_vec();
        order.sort_by(|&a, &b| x[a][j].total_cmp(&x[b][j]));
        let mut left_sum = 0.0;
        for p in 0..order.len() - 1 {
            left_sum += r[order[p]];
            let (lo, hi) = (x[order[p]][j], x[order[p + 1]][j]);
            if lo == hi {
                continue;
            }
            let nl = (p + 1) as f64;
            let nr = n - nl;
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base;
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, j, (lo + hi) / 2.0));
            }
        }
    }
    best.map(|(_, j, t)| (j, t))
}

fn grow(x: &[Vec<f64>], r: &[f64], idx: &[usize], depth: usize, k: usize) -> Node {
    if depth == MAX_DEPTH || idx.len() < 2 {
        return Node::Leaf(leaf_value(idx, r, k));
    }
    match best_split(x, r, idx) {
        None => Node::Leaf(leaf_value(idx, r, k)),
        Some((feature, threshold)) => {
            let (l, rt): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(grow(x, r, &l, depth + 1, k)),
                right: Box::new(grow(x, r, &rt, depth + 1, k)),
            }
        }
    }
}

fn softmax(f: &[f64]) -> Vec<f64> {
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = f.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn fit_gbt(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Gbt {
    let n = x.len();
    let init = vec![0.0; n_classes];
    let mut f: Vec<Vec<f64>> = vec![init.clone(); n];
    let all: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(ROUNDS);
    for _ in 0..ROUNDS {
        let probs: Vec<Vec<f64>> = f.iter().map(|fi| softmax(fi)).collect();
        let mut round = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let r: Vec<f64> = (0..n)
                .map(|i| if y[i] == c { 1.0 } else { 0.0 } - probs[i][c])
                .collect();
            let tree = grow(x, &r, &all, 0, n_classes);
            for i in 0..n {
                f[i][c] += SHRINKAGE * tree.eval(&x[i]);
            }
            round.push(tree);
        }
        trees.push(round);
    }
    Gbt { init, trees }
}
