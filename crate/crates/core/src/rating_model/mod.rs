//! Cross-validated rating classification: does the feature vector of a
//! session predict its expert rating?
//!
//! Every classifier runs on every feature set under stratified k-fold
//! cross-validation. Standardization and any feature selection are fitted
//! on the training part of each fold only.

pub mod folds;
pub mod gbt;
pub mod linear;
pub mod select;
pub mod standardize;

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::aggregate::{Feature, SessionFeatures};
pub use folds::stratified_folds;
pub use select::select_features;
pub use standardize::Standardizer;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("fold count must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("cannot split {n} samples into {k} folds")]
    KTooLarge { k: usize, n: usize },
    #[error("no rated sessions")]
    NoRatedSessions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Classifier {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "GBT")]
    Gbt,
}

impl Classifier {
    pub const ALL: [Classifier; 3] = [Classifier::Lr, Classifier::Svm, Classifier::Gbt];

    pub fn as_str(self) -> &'static str {
        match self {
            Classifier::Lr => "LR",
            Classifier::Svm => "SVM",
            Classifier::Gbt => "GBT",
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeatureSet {
    pub name: String,
    pub columns: Vec<Feature>,
    /// Run correlation-based selection over `columns` inside each fold.
    pub select_in_fold: bool,
}

impl FeatureSet {
    fn fixed(name: &str, columns: &[Feature]) -> Self {
        FeatureSet {
            name: name.into(),
            columns: columns.to_vec(),
            select_in_fold: false,
        }
    }

    pub fn paraverbal() -> Self {
        Self::fixed("paraverbal", Feature::paraverbal())
    }

    pub fn nonverbal() -> Self {
        Self::fixed("nonverbal", Feature::nonverbal())
    }

    pub fn all() -> Self {
        Self::fixed("para+non", &Feature::ALL)
    }

    /// The reference selection: question, statement, sentiment, gaze, smile,
    /// happiness, sadness and anger.
    pub fn selected() -> Self {
        Self::fixed(
            "selected",
            &[
                Feature::Question,
                Feature::Statement,
                Feature::Sentiment,
                Feature::Gaze,
                Feature::Smile,
                Feature::Happiness,
                Feature::Sadness,
                Feature::Anger,
            ],
        )
    }

    /// Selection recomputed from the training data of every fold.
    pub fn auto() -> Self {
        FeatureSet {
            name: "auto".into(),
            columns: Feature::ALL.to_vec(),
            select_in_fold: true,
        }
    }

    pub fn standard() -> Vec<FeatureSet> {
        vec![
            Self::paraverbal(),
            Self::nonverbal(),
            Self::all(),
            Self::selected(),
            Self::auto(),
        ]
    }
}

/// Rated sessions as a design matrix over all features; missing values are
/// NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub session_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    /// Keeps rated sessions, ordered by session id.
    pub fn from_sessions(sessions: &[SessionFeatures]) -> Result<Dataset, ModelError> {
        let mut rated: Vec<&SessionFeatures> = sessions.iter().filter(|s| s.rating.is_some()).collect();
        if rated.is_empty() {
            return Err(ModelError::NoRatedSessions);
        }
        rated.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        Ok(Dataset {
            session_ids: rated.iter().map(|s| s.session_id.clone()).collect(),
            rows: rated
                .iter()
                .map(|s| s.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
                .collect(),
            labels: rated.iter().map(|s| s.rating.expect("rated")).collect(),
        })
    }

    fn project(&self, idx: &[usize], columns: &[Feature]) -> Vec<Vec<f64>> {
        idx.iter()
            .map(|&i| columns.iter().map(|&f| self.rows[i][f as usize]).collect())
            .collect()
    }
}

/// Trains on standardized rows and predicts labels for `test`. A training
/// set with a single class predicts that class.
pub fn train_predict(clf: Classifier, train: &[Vec<f64>], labels: &[u8], test: &[Vec<f64>]) -> Vec<u8> {
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return vec![classes.first().copied().unwrap_or(0); test.len()];
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("known class"))
        .collect();
    let k = classes.len();
    let predicted: Vec<usize> = match clf {
        Classifier::Lr => {
            let m = linear::fit_logistic(train, &y, k);
            test.iter().map(|x| m.predict(x)).collect()
        }
        Classifier::Svm => {
            let m = linear::fit_svm(train, &y, k);
            test.iter().map(|x| m.predict(x)).collect()
        }
        Classifier::Gbt => {
            let m = gbt::fit_gbt(train, &y, k);
            test.iter().map(|x| m.predict(x)).collect()
        }
    };
    predicted.into_iter().map(|c| classes[c]).collect()
}

/// Most frequent training label, ties to the smaller label.
pub fn majority_baseline(train_labels: &[u8], n_test: usize) -> Vec<u8> {
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for &l in train_labels {
        *counts.entry(l).or_default() += 1;
    }
    let best = counts
        .iter()
        .fold(None, |acc: Option<(u8, usize)>, (&l, &c)| match acc {
            Some((_, bc)) if bc >= c => acc,
            _ => Some((l, c)),
        })
        .map_or(0, |(l, _)| l);
    vec![best; n_test]
}

pub fn accuracy(predicted: &[u8], truth: &[u8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// What a fold learned from its training part.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldTrace {
    pub standardizer: Standardizer,
    /// Features actually used, in selection order for selected sets.
    pub features: Vec<Feature>,
}

/// Fits one fold: standardization, optional selection, training, and
/// prediction of the test rows.
pub fn fit_fold(
    data: &Dataset,
    train: &[usize],
    test: &[usize],
    set: &FeatureSet,
    clf: Classifier,
) -> (Vec<u8>, FoldTrace) {
    let train_labels: Vec<u8> = train.iter().map(|&i| data.labels[i]).collect();
    let raw_train = data.project(train, &set.columns);
    let standardizer = Standardizer::fit(&raw_train);
    let mut features = set.columns.clone();
    let mut train_x = standardizer.transform(&raw_train);
    let mut test_x = standardizer.transform(&data.project(test, &set.columns));
    if set.select_in_fold {
        let keep = select_features(&train_x, &train_labels);
        let pick = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect()
        };
        train_x = pick(&train_x);
        test_x = pick(&test_x);
        features = keep.iter().map(|&j| set.columns[j]).collect();
    }
    let predicted = train_predict(clf, &train_x, &train_labels, &test_x);
    (predicted, FoldTrace { standardizer, features })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellStats {
    pub avg: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub fold_accuracies: Vec<f64>,
}

impl CellStats {
    pub fn from_folds(fold_accuracies: Vec<f64>) -> Self {
        let n = fold_accuracies.len().max(1) as f64;
        let avg = fold_accuracies.iter().sum::<f64>() / n;
        let std = (fold_accuracies.iter().map(|a| (a - avg).powi(2)).sum::<f64>() / n).sqrt();
        CellStats {
            avg,
            std,
            fold_accuracies,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvCell {
    pub classifier: Classifier,
    pub feature_set: String,
    #[serde(flatten)]
    pub stats: CellStats,
    pub baseline: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub class_distribution: BTreeMap<u8, usize>,
    pub baseline: CellStats,
    pub cells: Vec<CvCell>,
}

pub fn cross_validate(
    data: &Dataset,
    sets: &[FeatureSet],
    classifiers: &[Classifier],
    k: usize,
    seed: u64,
) -> Result<CvReport, ModelError> {
    let folds = stratified_folds(&data.labels, k, seed)?;
    let n = data.labels.len();
    let splits: Vec<(Vec<usize>, &Vec<usize>)> = folds
        .iter()
        .map(|test| {
            let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
            (train, test)
        })
        .collect();
    let truth = |idx: &[usize]| -> Vec<u8> { idx.iter().map(|&i| data.labels[i]).collect() };

    let baseline = CellStats::from_folds(
        splits
            .iter()
            .map(|(train, test)| accuracy(&majority_baseline(&truth(train), test.len()), &truth(test)))
            .collect(),
    );
    let mut cells = Vec::new();
    for set in sets {
        for &clf in classifiers {
            let accs = splits
                .iter()
                .map(|(train, test)| {
                    let (pred, _) = fit_fold(data, train, test, set, clf);
                    accuracy(&pred, &truth(test))
                })
                .collect();
            cells.push(CvCell {
                classifier: clf,
                feature_set: set.name.clone(),
                stats: CellStats::from_folds(accs),
                baseline: baseline.avg,
            });
        }
    }
    let mut class_distribution = BTreeMap::new();
    for &l in &data.labels {
        *class_distribution.entry(l).or_default() += 1;
    }
    Ok(CvReport {
        k,
        seed,
        n_samples: n,
        class_distribution,
        baseline,
        cells,
    })
}

/// Plain-text table: one row per feature set, avg and std per classifier.
pub fn render_table(report: &CvReport) -> String {
    let mut sets: Vec<&str> = Vec::new();
    let mut clfs: Vec<Classifier> = Vec::new();
    for c in &report.cells {
        if !sets.contains(&c.feature_set.as_str()) {
            sets.push(&c.feature_set);
        }
        if !clfs.contains(&c.classifier) {
            clfs.push(c.classifier);
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<12}", "features");
    for c in &clfs {
        let _ = write!(out, " {:>7} {:>7}", format!("{c} avg"), "std");
    }
    out.push('\n');
    for s in sets {
        let _ = write!(out, "{s:<12}");
        for &c in &clfs {
            match report.cells.iter().find(|x| x.feature_set == s && x.classifier == c) {
                Some(cell) => {
                    let _ = write!(out, " {:>7.3} {:>7.3}", cell.stats.avg, cell.stats.std);
                }
                None => {
                    let _ = write!(out, " {:>7} {:>7}", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "majority baseline {:.3} ({:.3}); {} sessions, {}-fold, classes {:?}",
        report.baseline.avg, report.baseline.std, report.n_samples, report.k, report.class_distribution
    );
    out
}
