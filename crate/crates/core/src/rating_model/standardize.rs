use serde::Serialize;

/// Per-column z-scoring fitted on training rows. Missing values (NaN) are
/// ignored when fitting and imputed with the column mean, i.e. mapped to 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; a constant column gets 1.
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let d = rows.first().map_or(0, Vec::len);
        let mut means = vec![0.0; d];
        let mut scales = vec![1.0; d];
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
            if col.is_empty() {
                continue;
            }
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            means[j] = m;
            scales[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        Standardizer { means, scales }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, &v)| if v.is_nan() { 0.0 } else { (v - self.means[j]) / self.scales[j] })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscores_with_missing_and_constant() {
        let rows = vec![vec![1.0, 5.0, f64::NAN], vec![3.0, 5.0, 2.0]];
        let s = Standardizer::fit(&rows);
        assert_eq!(s.means, vec![2.0, 5.0, 2.0]);
        assert_eq!(s.scales, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.transform(&rows), vec![vec![-1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        let s = Standardizer::fit(&[vec![0.0], vec![4.0]]);
        assert_eq!(s.scales, vec![2.0]);
    }
}
