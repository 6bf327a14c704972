//! Agglomerative clustering of 2-D points with the nearest-neighbour chain
//! algorithm.
//!
//! Ward linkage runs on cluster centroids and sizes, so memory stays linear
//! in the number of points. The other linkages keep a condensed
//! dissimilarity matrix and update it with the Lance–Williams formulas, which
//! caps the number of points they accept at [`MATRIX_LIMIT`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest input accepted by the matrix-backed linkages.
pub const MATRIX_LIMIT: usize = 8_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Ward,
    Single,
    Complete,
    Average,
}

impl Linkage {
    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Ward => "ward",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ward" => Ok(Linkage::Ward),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            _ => Err(format!("unknown linkage `{s}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LinkageError {
    #[error("{linkage} linkage accepts at most {limit} points, got {n}; subsample first")]
    TooManyPoints { linkage: Linkage, n: usize, limit: usize },
}

/// One agglomeration step. Clusters are named by a member point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

trait Dissimilarity {
    fn dist(&self, a: usize, b: usize) -> f64;
    /// Merges cluster `b` into cluster `a`; `active` lists the clusters that
    /// remain after the merge, `a` included.
    fn merge(&mut self, a: usize, b: usize, active: &[usize]);
}

struct WardCentroids {
    centroid: Vec<[f64; 2]>,
    size: Vec<f64>,
}

impl Dissimilarity for WardCentroids {
    fn dist(&self, a: usize, b: usize) -> f64 {
        let (ca, cb) = (self.centroid[a], self.centroid[b]);
        let (dx, dy) = (ca[0] - cb[0], ca[1] - cb[1]);
        let (na, nb) = (self.size[a], self.size[b]);
        na * nb / (na + nb) * (dx * dx + dy * dy)
    }

    fn merge(&mut self, a: usize, b: usize, _active: &[usize]) {
        let (na, nb) = (self.size[a], self.size[b]);
        let n = na + nb;
        let (ca, cb) = (self.centroid[a], self.centroid[b]);
        self.centroid[a] = [(na * ca[0] + nb * cb[0]) / n, (na * ca[1] + nb * cb[1]) / n];
        self.size[a] = n;
    }
}

struct Condensed {
    n: usize,
    d: Vec<f64>,
    size: Vec<f64>,
    linkage: Linkage,
}

impl Condensed {
    fn new(points: &[[f64; 2]], linkage: Linkage) -> Self {
        let n = points.len();
        let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (points[i][0] - points[j][0], points[i][1] - points[j][1]);
                let sq = dx * dx + dy * dy;
                // Lance–Williams Ward operates on squared distances
                d.push(if linkage == Linkage::Ward { sq } else { sq.sqrt() });
            }
        }
        Condensed {
            n,
            d,
            size: vec![1.0; n],
            linkage,
        }
    }

    fn idx(&self, a: usize, b: usize) -> usize {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }
}

impl Dissimilarity for Condensed {
    fn dist(&self, a: usize, b: usize) -> f64 {
        self.d[self.idx(a, b)]
    }

    fn merge(&mut self, a: usize, b: usize, active: &[usize]) {
        let (na, nb) = (self.size[a], self.size[b]);
        let dab = self.dist(a, b);
        for &k in active {
            if k == a {
                continue;
            }
            let (dak, dbk) = (self.dist(a, k), self.dist(b, k));
            let nk = self.size[k];
            let updated = match self.linkage {
                Linkage::Single => dak.min(dbk),
                Linkage::Complete => dak.max(dbk),
                Linkage::Average => (na * dak + nb * dbk) / (na + nb),
                Linkage::Ward => ((na + nk) * dak + (nb + nk) * dbk - nk * dab) / (na + nb + nk),
            };
            let i = self.idx(a, k);
            self.d[i] = updated;
        }
        self.size[a] = na + nb;
    }
}

fn nn_chain(n: usize, diss: &mut impl Dissimilarity) -> Vec<Merge> {
    let mut active: Vec<usize> = (0..n).collect();
    let mut chain: Vec<usize> = Vec::new();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        if chain.is_empty() {
            chain.push(active[0]);
        }
        let (a, b, height) = loop {
            let a = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // the previous chain element wins ties, which guarantees progress
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| diss.dist(a, p));
            for &c in &active {
                if c == a {
                    continue;
                }
                let d = diss.dist(a, c);
                if d < best_d {
                    best_d = d;
                    best = Some(c);
                }
            }
            let best = best.expect("at least two active clusters");
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                break (a.min(best), a.max(best), best_d);
            }
            chain.push(best);
        };
        active.retain(|&c| c != b);
        diss.merge(a, b, &active);
        merges.push(Merge { a, b, height });
    }
    merges
}

/// Runs the full agglomeration and returns the merge steps in the order
/// they were found (not sorted by height).
pub fn agglomerate(points: &[[f64; 2]], linkage: Linkage) -> Result<Vec<Merge>, LinkageError> {
    let n = points.len();
    match linkage {
        Linkage::Ward => {
            let mut diss = WardCentroids {
                centroid: points.to_vec(),
                size: vec![1.0; n],
            };
            Ok(nn_chain(n, &mut diss))
        }
        _ if n > MATRIX_LIMIT => Err(LinkageError::TooManyPoints {
            linkage,
            n,
            limit: MATRIX_LIMIT,
        }),
        _ => Ok(nn_chain(n, &mut Condensed::new(points, linkage))),
    }
}

/// Same as [`agglomerate`] but always uses the dissimilarity-matrix route.
pub fn agglomerate_matrix(points: &[[f64; 2]], linkage: Linkage) -> Vec<Merge> {
    nn_chain(points.len(), &mut Condensed::new(points, linkage))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Cuts a merge list at `k` clusters. Labels are numbered by first
/// appearance in point order.
pub fn cut(n: usize, merges: &[Merge], k: usize) -> Vec<usize> {
    let mut sorted: Vec<Merge> = merges.to_vec();
    sorted.sort_by(|x, y| x.height.total_cmp(&y.height));
    let mut parent: Vec<usize> = (0..n).collect();
    let steps = n.saturating_sub(k.max(1));
    for m in sorted.iter().take(steps) {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

/// Agglomerates `points` and cuts the result at `k` clusters.
pub fn cluster(points: &[[f64; 2]], linkage: Linkage, k: usize) -> Result<Vec<usize>, LinkageError> {
    let merges = agglomerate(points, linkage)?;
    Ok(cut(points.len(), &merges, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        a.len() == b.len()
            && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    fn random_points(seed: u64, n: usize) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect()
    }

    #[test]
    fn ward_routes_agree() {
        for seed in 0..20 {
            let pts = random_points(seed, 40);
            let fast = cut(pts.len(), &agglomerate(&pts, Linkage::Ward).unwrap(), 2);
            let slow = cut(pts.len(), &agglomerate_matrix(&pts, Linkage::Ward), 2);
            assert!(same_partition(&fast, &slow), "seed {seed}");
            for k in [3, 5] {
                let fast = cut(pts.len(), &agglomerate(&pts, Linkage::Ward).unwrap(), k);
                let slow = cut(pts.len(), &agglomerate_matrix(&pts, Linkage::Ward), k);
                assert!(same_partition(&fast, &slow), "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn ward_heights_are_half_lance_williams() {
        let pts = random_points(3, 25);
        let mut a: Vec<f64> = agglomerate(&pts, Linkage::Ward).unwrap().iter().map(|m| m.height).collect();
        let mut b: Vec<f64> = agglomerate_matrix(&pts, Linkage::Ward).iter().map(|m| m.height).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-9 * y.max(1.0));
        }
    }

    /// Naive O(n^3) single linkage: repeatedly merge the closest pair of clusters.
    fn naive_single(pts: &[[f64; 2]], k: usize) -> Vec<usize> {
        let mut label: Vec<usize> = (0..pts.len()).collect();
        let d = |i: usize, j: usize| ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
        let mut clusters = pts.len();
        while clusters > k {
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if label[i] != label[j] && d(i, j) < best.0 {
                        best = (d(i, j), label[i], label[j]);
                    }
                }
            }
            let (_, from, to) = best;
            for l in &mut label {
                if *l == from {
                    *l = to;
                }
            }
            clusters -= 1;
        }
        label
    }

    #[test]
    fn single_linkage_matches_naive() {
        for seed in 0..10 {
            let pts = random_points(100 + seed, 30);
            let got = cluster(&pts, Linkage::Single, 3).unwrap();
            assert!(same_partition(&got, &naive_single(&pts, 3)), "seed {seed}");
        }
    }

    #[test]
    fn merge_count_and_labels() {
        let pts = random_points(9, 17);
        for linkage in [Linkage::Ward, Linkage::Single, Linkage::Complete, Linkage::Average] {
            let merges = agglomerate(&pts, linkage).unwrap();
            assert_eq!(merges.len(), 16);
            let labels = cut(17, &merges, 4);
            let mut distinct = labels.clone();
            distinct.sort();
            distinct.dedup();
            assert_eq!(distinct, vec![0, 1, 2, 3]);
            assert_eq!(labels[0], 0);
        }
        assert_eq!(cut(3, &agglomerate(&pts[..3], Linkage::Ward).unwrap(), 5), vec![0, 1, 2]);
    }

    #[test]
    fn matrix_limit() {
        let pts = vec![[0.0, 0.0]; MATRIX_LIMIT + 1];
        assert!(matches!(
            agglomerate(&pts, Linkage::Average),
            Err(LinkageError::TooManyPoints { .. })
        ));
    }

    #[test]
    fn parse_linkage() {
        assert_eq!("ward".parse::<Linkage>(), Ok(Linkage::Ward));
        assert!("median".parse::<Linkage>().is_err());
    }
}
