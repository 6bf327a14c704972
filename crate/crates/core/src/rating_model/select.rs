/// Redundancy threshold: a column is dropped when its absolute correlation
/// with an already kept column exceeds this.
pub const REDUNDANCY: f64 = 0.7;

/// Pearson correlation; 0 when either side is constant. NaN entries are
/// skipped pairwise.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .map(|(&x, &y)| (x, y))
        .collect();
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 1e-24 || sbb <= 1e-24 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Column indices ranked by |correlation with the label|, keeping a column
/// only if it is not redundant with a better-ranked kept column.
pub fn select_features(rows: &[Vec<f64>], labels: &[u8]) -> Vec<usize> {
    let d = rows.first().map_or(0, Vec::len);
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let relevance: Vec<f64> = cols.iter().map(|c| pearson(c, &y).abs()).collect();
    let mut ranked: Vec<usize> = (0..d).collect();
    ranked.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for j in ranked {
        if kept.iter().all(|&k| pearson(&cols[j], &cols[k]).abs() <= REDUNDANCY) {
            kept.push(j);
        }
    }
    kept
}
