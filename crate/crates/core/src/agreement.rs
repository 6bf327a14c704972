//! Agreement between two annotators of the same tier kind.
//!
//! Both tiers are rasterized onto a common step grid. Step `t` carries the
//! label whose span contains the step midpoint, or nothing. Counts are kept
//! directionally (rows: first annotator, columns: second) with an extra
//! `none` row and column for unlabeled steps; those steps are reported but
//! never count towards agreement.

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::aggregate::format_2dp;
use crate::ingest::{AnnotationTier, Label, SessionBundle, TierKind};

pub const NONE_LABEL: &str = "none";

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("cannot compare a {0} tier with a {1} tier")]
    VocabularyMismatch(TierKind, TierKind),
    #[error("step {0} must be positive")]
    InvalidStep(f64),
}

/// Number of steps needed to cover every span of the given tiers.
pub fn grid_len(tiers: &[&AnnotationTier], step_s: f64) -> usize {
    let end = tiers.iter().map(|t| t.end_s()).fold(0.0, f64::max);
    (end / step_s).ceil() as usize
}

/// One entry per step: the (optionally collapsed) label covering the step
/// midpoint.
pub fn rasterize_tier(tier: &AnnotationTier, step_s: f64, n_steps: usize, keep_subcategories: bool) -> Vec<Option<Label>> {
    let mut out = vec![None; n_steps];
    let mut spans: Vec<_> = tier.spans.iter().collect();
    spans.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let mut next = 0;
    for (t, slot) in out.iter_mut().enumerate() {
        let mid = (t as f64 + 0.5) * step_s;
        while next < spans.len() && spans[next].end_s <= mid {
            next += 1;
        }
        if let Some(span) = spans.get(next) {
            if span.start_s <= mid && mid < span.end_s {
                *slot = Some(if keep_subcategories {
                    span.label
                } else {
                    span.label.collapsed()
                });
            }
        }
    }
    out
}

/// Label-by-label step counts of two annotators. Index `labels.len()` is
/// the `none` row/column.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceMatrix {
    pub kind: TierKind,
    pub labels: Vec<Label>,
    pub counts: Vec<Vec<u64>>,
}

impl CoincidenceMatrix {
    pub fn empty(kind: TierKind, keep_subcategories: bool) -> Self {
        let labels = kind.vocabulary(keep_subcategories);
        let n = labels.len() + 1;
        CoincidenceMatrix {
            kind,
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    fn index(&self, label: Option<Label>) -> usize {
        label
            .and_then(|l| self.labels.iter().position(|&x| x == l))
            .unwrap_or(self.labels.len())
    }

    pub fn add_sequences(&mut self, a: &[Option<Label>], b: &[Option<Label>]) {
        for (x, y) in a.iter().zip(b) {
            let (i, j) = (self.index(*x), self.index(*y));
            self.counts[i][j] += 1;
        }
    }

    pub fn merge(&mut self, other: &CoincidenceMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Steps where both annotators assigned a label.
    pub fn labeled_total(&self) -> u64 {
        let l = self.labels.len();
        self.counts[..l].iter().map(|r| r[..l].iter().sum::<u64>()).sum()
    }

    pub fn agreed(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Share of jointly labeled steps with the same label.
    pub fn percent_agreement(&self) -> Option<f64> {
        let n = self.labeled_total();
        (n > 0).then(|| self.agreed() as f64 / n as f64)
    }

    /// Rows over the labeled columns, each summing to 1 (or all 0 when the
    /// first annotator never used the label on a jointly labeled step).
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        let l = self.labels.len();
        self.counts[..l]
            .iter()
            .map(|r| {
                let s: u64 = r[..l].iter().sum();
                r[..l]
                    .iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn row(&self, label: Label) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|&x| x == label)?;
        Some(self.row_normalized().swap_remove(i))
    }

    pub fn transposed(&self) -> CoincidenceMatrix {
        let n = self.counts.len();
        CoincidenceMatrix {
            kind: self.kind,
            labels: self.labels.clone(),
            counts: (0..n).map(|i| (0..n).map(|j| self.counts[j][i]).collect()).collect(),
        }
    }

    /// Nominal Krippendorff alpha over jointly labeled steps, from the
    /// symmetrized counts. `None` when expected disagreement is zero.
    pub fn krippendorff_alpha(&self) -> Option<f64> {
        let l = self.labels.len();
        let o: Vec<Vec<f64>> = (0..l)
            .map(|i| (0..l).map(|j| (self.counts[i][j] + self.counts[j][i]) as f64).collect())
            .collect();
        let marg: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
        let n: f64 = marg.iter().sum();
        if n < 2.0 {
            return None;
        }
        let mut observed = 0.0;
        let mut expected = 0.0;
        for i in 0..l {
            for j in 0..l {
                if i != j {
                    observed += o[i][j];
                    expected += marg[i] * marg[j];
                }
            }
        }
        if expected == 0.0 {
            return None;
        }
        Some(1.0 - (n - 1.0) * observed / expected)
    }

    /// Row-normalized matrix with two decimals; the first column holds the
    /// first annotator's label.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string()];
        header.extend(self.labels.iter().map(Label::name));
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(self.row_normalized()) {
            let mut rec = vec![label.name()];
            rec.extend(row.into_iter().map(|v| format_2dp(Some(v))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelConfusion {
    pub label: String,
    /// Jointly labeled steps where the first annotator used this label.
    pub steps: u64,
    pub agreement: Option<f64>,
    /// Most frequent other label chosen by the second annotator.
    pub main_confusion: Option<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementReport {
    pub kind: TierKind,
    pub step_s: f64,
    pub pairs: usize,
    pub total_steps: u64,
    pub labeled_steps: u64,
    pub percent_agreement: Option<f64>,
    /// Nominal Krippendorff alpha from the same counts, for reference.
    pub krippendorff_alpha: Option<f64>,
    pub labels: Vec<String>,
    /// Raw counts including the trailing `none` row and column.
    pub counts: Vec<Vec<u64>>,
    pub per_label: Vec<LabelConfusion>,
}

pub fn report(matrix: &CoincidenceMatrix, step_s: f64, pairs: usize) -> AgreementReport {
    let norm = matrix.row_normalized();
    let l = matrix.labels.len();
    let per_label = (0..l)
        .map(|i| {
            let steps: u64 = matrix.counts[i][..l].iter().sum();
            let confusion = (0..l)
                .filter(|&j| j != i && norm[i][j] > 0.0)
                .fold(None, |best: Option<usize>, j| match best {
                    Some(b) if norm[i][b] >= norm[i][j] => Some(b),
                    _ => Some(j),
                });
            LabelConfusion {
                label: matrix.labels[i].name(),
                steps,
                agreement: (steps > 0).then(|| norm[i][i]),
                main_confusion: confusion.map(|j| (matrix.labels[j].name(), norm[i][j])),
            }
        })
        .collect();
    let mut labels: Vec<String> = matrix.labels.iter().map(Label::name).collect();
    labels.push(NONE_LABEL.into());
    AgreementReport {
        kind: matrix.kind,
        step_s,
        pairs,
        total_steps: matrix.total(),
        labeled_steps: matrix.labeled_total(),
        percent_agreement: matrix.percent_agreement(),
        krippendorff_alpha: matrix.krippendorff_alpha(),
        labels,
        counts: matrix.counts.clone(),
        per_label,
    }
}

/// Compares two tiers on a grid covering both.
pub fn coincidence(
    a: &AnnotationTier,
    b: &AnnotationTier,
    step_s: f64,
    keep_subcategories: bool,
) -> Result<(CoincidenceMatrix, AgreementReport), AgreementError> {
    if a.kind != b.kind {
        return Err(AgreementError::VocabularyMismatch(a.kind, b.kind));
    }
    if !(step_s > 0.0 && step_s.is_finite()) {
        return Err(AgreementError::InvalidStep(step_s));
    }
    let n = grid_len(&[a, b], step_s);
    let mut m = CoincidenceMatrix::empty(a.kind, keep_subcategories);
    m.add_sequences(
        &rasterize_tier(a, step_s, n, keep_subcategories),
        &rasterize_tier(b, step_s, n, keep_subcategories),
    );
    let r = report(&m, step_s, 1);
    Ok((m, r))
}

/// Counts pooled over sessions and over every annotator pair (in annotator
/// id order) of the same kind.
pub fn pooled(
    sessions: &[SessionBundle],
    kind: TierKind,
    step_s: f64,
    keep_subcategories: bool,
) -> Result<(CoincidenceMatrix, AgreementReport), AgreementError> {
    if !(step_s > 0.0 && step_s.is_finite()) {
        return Err(AgreementError::InvalidStep(step_s));
    }
    let mut total = CoincidenceMatrix::empty(kind, keep_subcategories);
    let mut pairs = 0;
    let mut ordered: Vec<&SessionBundle> = sessions.iter().collect();
    ordered.sort_by(|a, b| a.meta.session_id.cmp(&b.meta.session_id));
    for s in ordered {
        let mut by_annotator: BTreeMap<&str, &AnnotationTier> = BTreeMap::new();
        for t in s.tiers.iter().filter(|t| t.kind == kind) {
            by_annotator.insert(&t.annotator_id, t);
        }
        let tiers: Vec<&AnnotationTier> = by_annotator.into_values().collect();
        for i in 0..tiers.len() {
            for j in i + 1..tiers.len() {
                let (m, _) = coincidence(tiers[i], tiers[j], step_s, keep_subcategories)?;
                total.merge(&m);
                pairs += 1;
            }
        }
    }
    let r = report(&total, step_s, pairs);
    Ok((total, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AnnotationSpan;
    use proptest::prelude::*;

    fn label(kind: TierKind, s: &str) -> Label {
        Label::parse(kind, s).unwrap()
    }

    fn tier(id: &str, kind: TierKind, spans: &[(f64, f64, &str)]) -> AnnotationTier {
        AnnotationTier {
            annotator_id: id.into(),
            kind,
            spans: spans
                .iter()
                .map(|&(s, e, l)| AnnotationSpan {
                    start_s: s,
                    end_s: e,
                    label: label(kind, l),
                })
                .collect(),
        }
    }

    #[test]
    fn rasterize_cases() {
        let t = tier("a", TierKind::Phases, &[(0.0, 1.0, "Informational")]);
        assert_eq!(rasterize_tier(&t, 0.5, 2, false), vec![Some(label(TierKind::Phases, "Informational")); 2]);
        let empty = tier("a", TierKind::Phases, &[]);
        assert_eq!(rasterize_tier(&empty, 0.5, 3, false), vec![None; 3]);
        let adj = tier("a", TierKind::Phases, &[(0.0, 1.0, "Informational"), (1.0, 2.0, "Argumentative")]);
        let r = rasterize_tier(&adj, 0.25, 8, false);
        assert!(r[..4].iter().all(|l| *l == Some(label(TierKind::Phases, "Informational"))));
        assert!(r[4..].iter().all(|l| *l == Some(label(TierKind::Phases, "Argumentative"))));
        let sub = tier("a", TierKind::Phases, &[(0.0, 1.0, "Greeting")]);
        assert_eq!(rasterize_tier(&sub, 0.5, 1, false), vec![Some(label(TierKind::Phases, "Beginning"))]);
        assert_eq!(rasterize_tier(&sub, 0.5, 1, true), vec![Some(label(TierKind::Phases, "Greeting"))]);
    }

    #[test]
    fn identical_and_disjoint() {
        let k = TierKind::Techniques;
        let a = tier("a", k, &[(0.0, 2.0, "Verbalising"), (2.0, 3.0, "Structuring")]);
        let (m, r) = coincidence(&a, &a, 0.04, false).unwrap();
        assert_eq!(r.percent_agreement, Some(1.0));
        assert_eq!(m.krippendorff_alpha(), Some(1.0));
        let b = tier("b", k, &[(0.0, 2.0, "Paraphrasing"), (2.0, 3.0, "Verbalising")]);
        let (_, r) = coincidence(&a, &b, 0.04, false).unwrap();
        assert_eq!(r.percent_agreement, Some(0.0));
        let p = tier("p", TierKind::Phases, &[]);
        assert_eq!(
            coincidence(&a, &p, 0.04, false).unwrap_err(),
            AgreementError::VocabularyMismatch(TierKind::Techniques, TierKind::Phases)
        );
    }

    #[test]
    fn paraphrasing_confused_with_verbalising() {
        let k = TierKind::Techniques;
        let a = tier("a", k, &[(0.0, 4.0, "Paraphrasing")]);
        let b = tier("b", k, &[(0.0, 3.28, "Paraphrasing"), (3.28, 4.0, "Statement")]);
        let (m, r) = coincidence(&a, &b, 0.04, false).unwrap();
        assert_eq!(m.total(), 100);
        let row = m.row(label(k, "Paraphrasing")).unwrap();
        // columns in vocabulary order: verbalising, paraphrasing, structuring
        assert_eq!(row, vec![0.18, 0.82, 0.0]);
        let p = &r.per_label[1];
        assert_eq!(p.main_confusion, Some(("Verbalising".to_string(), 0.18)));
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "label,Verbalising,Paraphrasing,Structuring\n\
             Verbalising,0.00,0.00,0.00\n\
             Paraphrasing,0.18,0.82,0.00\n\
             Structuring,0.00,0.00,0.00\n"
        );
    }

    #[test]
    fn gaps_are_counted_but_excluded() {
        let k = TierKind::Phases;
        let a = tier("a", k, &[(0.0, 1.0, "Beginning"), (2.0, 3.0, "Concluding")]);
        let b = tier("b", k, &[(0.0, 3.0, "Beginning")]);
        let (m, r) = coincidence(&a, &b, 0.5, false).unwrap();
        assert_eq!(r.total_steps, 6);
        assert_eq!(r.labeled_steps, 4);
        assert_eq!(r.percent_agreement, Some(0.5));
        assert_eq!(m.counts[5][0], 2);
    }

    #[test]
    fn alpha_hand_oracle() {
        // two annotators, 4 units: (x,x), (x,y), (y,y), (y,y)
        // symmetrized o: xx=2, xy=1, yx=1, yy=4; n_x=3, n_y=5, n=8
        // alpha = 1 - (n-1) * (1+1) / (3*5 + 5*3) = 1 - 14/30
        let k = TierKind::Techniques;
        let a = tier("a", k, &[(0.0, 2.0, "Verbalising"), (2.0, 4.0, "Paraphrasing")]);
        let b = tier("b", k, &[(0.0, 1.0, "Verbalising"), (1.0, 4.0, "Paraphrasing")]);
        let (m, _) = coincidence(&a, &b, 1.0, false).unwrap();
        assert!((m.krippendorff_alpha().unwrap() - (1.0 - 14.0 / 30.0)).abs() < 1e-12);
    }

    fn arb_tier(kind: TierKind) -> impl Strategy<Value = Vec<(usize, usize)>> {
        let n = kind.vocabulary(false).len();
        prop::collection::vec((1usize..40, 0..n), 1..15)
    }

    fn build(kind: TierKind, parts: &[(usize, usize)], unit: f64, id: &str) -> AnnotationTier {
        let vocab = kind.vocabulary(false);
        let mut t = 0;
        AnnotationTier {
            annotator_id: id.into(),
            kind,
            spans: parts
                .iter()
                .map(|&(len, l)| {
                    let s = AnnotationSpan {
                        start_s: t as f64 * unit,
                        end_s: (t + len) as f64 * unit,
                        label: vocab[l],
                    };
                    t += len;
                    s
                })
                .collect(),
        }
    }

    proptest! {
        #[test]
        fn self_agreement_and_transpose(a in arb_tier(TierKind::Phases), b in arb_tier(TierKind::Phases)) {
            let ta = build(TierKind::Phases, &a, 0.1, "a");
            let tb = build(TierKind::Phases, &b, 0.1, "b");
            let (m, r) = coincidence(&ta, &ta, 0.04, false).unwrap();
            prop_assert_eq!(r.percent_agreement, Some(1.0));
            prop_assert_eq!(m.total(), grid_len(&[&ta], 0.04) as u64);
            let (ab, _) = coincidence(&ta, &tb, 0.04, false).unwrap();
            let (ba, _) = coincidence(&tb, &ta, 0.04, false).unwrap();
            prop_assert_eq!(ab.transposed(), ba);
            for row in ab.row_normalized() {
                let s: f64 = row.iter().sum();
                prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn refining_steps_moves_agreement_by_boundaries_only(a in arb_tier(TierKind::Techniques), b in arb_tier(TierKind::Techniques)) {
            // spans on a 0.1 s lattice; pad the shorter tier so both cover the same time
            let ta = build(TierKind::Techniques, &a, 0.1, "a");
            let mut tb = build(TierKind::Techniques, &b, 0.1, "b");
            let (ea, eb) = (ta.end_s(), tb.end_s());
            let mut ta = ta;
            let (short, end) = if ea < eb { (&mut ta, eb) } else { (&mut tb, ea) };
            let last = short.spans.last().unwrap().clone();
            short.spans.push(AnnotationSpan { start_s: last.end_s, end_s: end, label: last.label });
            short.spans.retain(|s| s.end_s > s.start_s);
            let (coarse, _) = coincidence(&ta, &tb, 0.04, false).unwrap();
            let (fine, _) = coincidence(&ta, &tb, 0.02, false).unwrap();
            let mut bounds: Vec<i64> = ta.spans.iter().chain(&tb.spans).map(|s| (s.end_s * 1000.0).round() as i64).collect();
            bounds.sort_unstable();
            bounds.dedup();
            let n = coarse.total() as f64;
            let diff = (coarse.percent_agreement().unwrap() - fine.percent_agreement().unwrap()).abs();
            prop_assert!(diff <= bounds.len() as f64 / n + 1e-12);
        }
    }
}
