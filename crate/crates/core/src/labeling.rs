//! Per-point labels from snippets, and scoring against ground truth.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::snippets::{is_tie, SnippetResult};
use crate::SCHEMA_VERSION;

/// One class id per point of the series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSequence {
    pub labels: Vec<u32>,
}

impl LabelSequence {
    /// Id for points no window covers. The labeling rule below never emits
    /// it; it may appear in externally supplied sequences.
    pub const UNLABELED: u32 = u32::MAX;

    pub fn new(labels: Vec<u32>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One integer per line; blank lines are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut labels = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                path: Default::default(),
                source,
            })?;
            let cell = line.trim();
            if cell.is_empty() {
                continue;
            }
            let label = cell.parse().map_err(|_| Error::Parse {
                row: i + 1,
                cell: cell.to_string(),
            })?;
            labels.push(label);
        }
        Ok(Self { labels })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for l in &self.labels {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }
}

/// Labels every point of a length-`n` series with the rank (position in
/// `result.snippets`) of a snippet.
///
/// Window `j` goes to the snippet whose profile is smallest at `j`, ties to
/// the lower rank. Point `i` takes the label of the window starting at `i`;
/// the last `m - 1` points, which start no window, take the label of the
/// last window.
pub fn label_series(result: &SnippetResult, n: usize) -> Result<LabelSequence> {
    if result.profiles.is_empty() {
        return Err(Error::Empty("snippets"));
    }
    let windows = n + 1 - result.m.min(n + 1);
    if windows == 0 || result.profiles.iter().any(|p| p.len() != windows) {
        return Err(Error::LengthMismatch {
            left: result.profiles[0].len(),
            right: windows,
        });
    }
    let mut labels: Vec<u32> = (0..windows)
        .map(|j| {
            let low = result
                .profiles
                .iter()
                .map(|p| p.values[j])
                .fold(f64::INFINITY, f64::min);
            result
                .profiles
                .iter()
                .position(|p| is_tie(p.values[j], low))
                .expect("at least one profile") as u32
        })
        .collect();
    let last = labels[windows - 1];
    labels.resize(n, last);
    Ok(LabelSequence { labels })
}

/// Counts and scores for one ground-truth class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: u32,
    /// Predicted class matched to this one, if any.
    pub matched: Option<u32>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassReport>,
    pub macro_f1: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "schema": SCHEMA_VERSION,
            "classes": self.classes,
            "macro_f1": self.macro_f1,
        })
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Point-wise precision, recall and F1 per truth class.
///
/// Predicted ids carry no meaning, so each truth class is first matched to
/// a predicted class: repeatedly take the largest remaining cell of the
/// confusion matrix (ties to the lower truth id, then to the predicted class
/// that occurs first in the sequence). Truth classes left unmatched score 0.
/// Macro F1 is the mean over truth classes.
pub fn evaluate(pred: &LabelSequence, truth: &LabelSequence) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("labels"));
    }

    let mut first_seen: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, &p) in pred.labels.iter().enumerate() {
        first_seen.entry(p).or_insert(i);
    }
    let mut truth_size: BTreeMap<u32, usize> = BTreeMap::new();
    let mut pred_size: BTreeMap<u32, usize> = BTreeMap::new();
    let mut confusion: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
        *truth_size.entry(t).or_default() += 1;
        *pred_size.entry(p).or_default() += 1;
        *confusion.entry((t, p)).or_default() += 1;
    }

    let mut cells: Vec<(usize, u32, usize, u32)> = confusion
        .iter()
        .map(|(&(t, p), &c)| (c, t, first_seen[&p], p))
        .collect();
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut matched: BTreeMap<u32, u32> = BTreeMap::new();
    let mut used_pred = std::collections::BTreeSet::new();
    for (_, t, _, p) in cells {
        if !matched.contains_key(&t) && !used_pred.contains(&p) {
            matched.insert(t, p);
            used_pred.insert(p);
        }
    }

    let classes: Vec<ClassReport> = truth_size
        .iter()
        .map(|(&class, &size)| {
            let (tp, fp, fn_) = match matched.get(&class) {
                Some(&p) => {
                    let tp = confusion[&(class, p)];
                    (tp, pred_size[&p] - tp, size - tp)
                }
                None => (0, 0, size),
            };
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = if tp == 0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassReport {
                class,
                matched: matched.get(&class).copied(),
                tp,
                fp,
                fn_,
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let macro_f1 = classes.iter().map(|c| c.f1).sum::<f64>() / classes.len() as f64;
    Ok(EvalReport { classes, macro_f1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpdist::MPdistProfile;

    fn seq(v: &[u32]) -> LabelSequence {
        LabelSequence::new(v.to_vec())
    }

    fn result_with(m: usize, profiles: Vec<Vec<f64>>) -> SnippetResult {
        SnippetResult {
            m,
            l: 1,
            k: 1,
            snippets: Vec::new(),
            curve: Vec::new(),
            profile_area: 0.0,
            profiles: profiles
                .into_iter()
                .enumerate()
                .map(|(i, values)| MPdistProfile {
                    segment_index: i,
                    values,
                })
                .collect(),
            area_trace: Vec::new(),
            unassigned: 0,
        }
    }

    #[test]
    fn single_snippet_labels_everything() {
        let r = result_with(3, vec![vec![0.5; 8]]);
        let labels = label_series(&r, 10).unwrap();
        assert_eq!(labels.labels, vec![0; 10]);
    }

    #[test]
    fn argmin_and_trailing_inheritance() {
        let r = result_with(3, vec![vec![0.0, 1.0, 2.0, 1.0], vec![1.0, 1.0, 0.5, 0.2]]);
        let labels = label_series(&r, 6).unwrap();
        assert_eq!(labels.labels, vec![0, 0, 1, 1, 1, 1]);
        assert!(label_series(&r, 7).is_err());
    }

    #[test]
    fn perfect_prediction() {
        let t = seq(&[0, 0, 1, 1, 2, 2]);
        let rep = evaluate(&t, &t).unwrap();
        for c in &rep.classes {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(rep.macro_f1, 1.0);
    }

    #[test]
    fn counts_eight_two_two() {
        // truth class 0: 10 points; predicted 7 gets 8 of them plus 2 others
        let mut truth = vec![0; 10];
        truth.extend([1; 4]);
        let mut pred = vec![7; 8];
        pred.extend([9, 9, 7, 7, 9, 9]);
        let rep = evaluate(&seq(&pred), &seq(&truth)).unwrap();
        let c0 = &rep.classes[0];
        assert_eq!((c0.tp, c0.fp, c0.fn_), (8, 2, 2));
        assert!((c0.precision - 0.8).abs() < 1e-12);
        assert!((c0.recall - 0.8).abs() < 1e-12);
        assert!((c0.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn single_predicted_class() {
        let truth = seq(&[0, 0, 0, 1, 1]);
        let pred = seq(&[4, 4, 4, 4, 4]);
        let rep = evaluate(&pred, &truth).unwrap();
        assert_eq!(rep.classes[0].recall, 1.0);
        assert_eq!(rep.classes[1].f1, 0.0);
        assert_eq!(rep.classes[1].matched, None);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            evaluate(&seq(&[1, 2]), &seq(&[1])),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
        assert!(evaluate(&seq(&[]), &seq(&[])).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = seq(&[0, 1, 1, 2]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(LabelSequence::read_csv(buf.as_slice()).unwrap(), s);
        assert!(LabelSequence::read_csv("1\nx\n".as_bytes()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn relabeling_predictions_changes_nothing(
                pairs in prop::collection::vec((0u32..4, 0u32..3), 1..200),
                perm in Just([0u32, 1, 2, 3]).prop_shuffle(),
            ) {
                let pred = seq(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
                let truth = seq(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
                let renamed = seq(&pred.labels.iter().map(|&p| perm[p as usize] + 10).collect::<Vec<_>>());
                let a = evaluate(&pred, &truth).unwrap();
                let b = evaluate(&renamed, &truth).unwrap();
                prop_assert_eq!(a.macro_f1, b.macro_f1);
                for (x, y) in a.classes.iter().zip(&b.classes) {
                    prop_assert_eq!((x.tp, x.fp, x.fn_), (y.tp, y.fp, y.fn_));
                }
                prop_assert!((0.0..=1.0).contains(&a.macro_f1));
                for c in &a.classes {
                    prop_assert!((0.0..=1.0).contains(&c.precision));
                    prop_assert!((0.0..=1.0).contains(&c.recall));
                    prop_assert!((c.f1 * (c.precision + c.recall) - 2.0 * c.precision * c.recall).abs() < 1e-12);
                }
            }
        }
    }
}
