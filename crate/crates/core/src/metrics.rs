//! Evaluation metrics: worst-group error, (adjusted) average accuracy,
//! group-inference quality, and Cramér's V association.

use crate::datagen::{ClassId, SpuriousId};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub type GroupKey = (ClassId, SpuriousId);

/// Per-group accuracy over (prediction, label, group) triples; groups with
/// no examples are simply absent.
pub fn per_group_accuracy(
    preds: &[ClassId],
    labels: &[ClassId],
    groups: &[GroupKey],
) -> Result<BTreeMap<GroupKey, f64>> {
    if preds.len() != labels.len() || preds.len() != groups.len() {
        return Err(Error::DimensionMismatch {
            context: "per-group accuracy",
            expected: preds.len(),
            got: labels.len().min(groups.len()),
        });
    }
    let mut correct: BTreeMap<GroupKey, (usize, usize)> = BTreeMap::new();
    for ((p, l), g) in preds.iter().zip(labels).zip(groups) {
        let e = correct.entry(*g).or_insert((0, 0));
        e.1 += 1;
        if p == l {
            e.0 += 1;
        }
    }
    Ok(correct.into_iter().map(|(g, (c, n))| (g, c as f64 / n as f64)).collect())
}

/// Highest per-group misclassification rate.
pub fn worst_group_error(preds: &[ClassId], labels: &[ClassId], groups: &[GroupKey]) -> Result<f64> {
    let acc = per_group_accuracy(preds, labels, groups)?;
    if acc.is_empty() {
        return Err(Error::EmptyInput("groups"));
    }
    Ok(acc.values().map(|a| 1.0 - a).fold(0.0, f64::max))
}

pub fn average_accuracy(preds: &[ClassId], labels: &[ClassId]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "average accuracy",
            expected: preds.len(),
            got: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Group accuracies weighted by their training-split sizes.
pub fn adjusted_average_accuracy(
    per_group_acc: &BTreeMap<GroupKey, f64>,
    train_group_sizes: &BTreeMap<GroupKey, usize>,
) -> Result<f64> {
    let mut total = 0usize;
    let mut acc = 0.0;
    for (g, a) in per_group_acc {
        let size = *train_group_sizes
            .get(g)
            .ok_or(Error::UnknownId { kind: "group size", id: format!("{g:?}") })?;
        total += size;
        acc += size as f64 * a;
    }
    if total == 0 {
        return Err(Error::EmptyInput("train group sizes"));
    }
    Ok(acc / total as f64)
}

/// Fraction of true minority examples found by the inferred minority.
/// `None` when there are no true minority examples.
pub fn minority_recall(inferred: &[usize], true_minority: &[usize]) -> Option<f64> {
    if true_minority.is_empty() {
        return None;
    }
    let inf: BTreeSet<usize> = inferred.iter().copied().collect();
    let hit = true_minority.iter().filter(|i| inf.contains(i)).count();
    Some(hit as f64 / true_minority.len() as f64)
}

/// True minority examples the inference placed in the majority.
pub fn minority_in_majority(inferred_minority: &[usize], true_minority: &[usize]) -> usize {
    let inf: BTreeSet<usize> = inferred_minority.iter().copied().collect();
    true_minority.iter().filter(|i| !inf.contains(i)).count()
}

/// Fraction of true majority examples the inference placed in the minority.
/// `None` when there are no true majority examples.
pub fn majority_in_minority(inferred_minority: &[usize], true_majority: &[usize]) -> Option<f64> {
    if true_majority.is_empty() {
        return None;
    }
    let inf: BTreeSet<usize> = inferred_minority.iter().copied().collect();
    let hit = true_majority.iter().filter(|i| inf.contains(i)).count();
    Some(hit as f64 / true_majority.len() as f64)
}

/// Cramér's V between two categorical variables: √(χ²/(n·(min(r,c)−1))),
/// Pearson χ² with expected counts from the marginals, no bias correction.
/// A degenerate axis (single level) gives 0.
pub fn cramers_v(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "cramers_v",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("cramers_v values"));
    }
    let levels = |v: &[u32]| -> Vec<u32> {
        let mut l: Vec<u32> = v.to_vec();
        l.sort_unstable();
        l.dedup();
        l
    };
    let (la, lb) = (levels(a), levels(b));
    let (r, c) = (la.len(), lb.len());
    if r < 2 || c < 2 {
        return Ok(0.0);
    }
    let index = |l: &[u32], v: u32| l.binary_search(&v).unwrap();
    let n = a.len();
    let mut table = vec![vec![0usize; c]; r];
    for (&x, &y) in a.iter().zip(b) {
        table[index(&la, x)][index(&lb, y)] += 1;
    }
    let row_sums: Vec<usize> = table.iter().map(|row| row.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let mut chi2 = 0.0;
    for i in 0..r {
        for j in 0..c {
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / n as f64;
            if expected > 0.0 {
                let diff = table[i][j] as f64 - expected;
                chi2 += diff * diff / expected;
            }
        }
    }
    Ok((chi2 / (n as f64 * (r.min(c) as f64 - 1.0))).sqrt())
}

/// One evaluation of a model over a split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub n: usize,
    pub average_accuracy: f64,
    pub adjusted_average_accuracy: Option<f64>,
    pub worst_group_accuracy: f64,
    pub worst_group_error: f64,
    pub per_group_accuracy: BTreeMap<String, f64>,
    pub minority_recall: Option<f64>,
    pub minority_in_majority: Option<usize>,
    pub majority_in_minority: Option<f64>,
    pub cramers_v: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn build(
        split: &str,
        preds: &[ClassId],
        labels: &[ClassId],
        groups: &[GroupKey],
        train_group_sizes: Option<&BTreeMap<GroupKey, usize>>,
    ) -> Result<EvalReport> {
        let per_group = per_group_accuracy(preds, labels, groups)?;
        if per_group.is_empty() {
            return Err(Error::EmptyInput("evaluation groups"));
        }
        let worst_acc = per_group.values().cloned().fold(f64::INFINITY, f64::min);
        let adjusted = match train_group_sizes {
            // groups absent from the train table carry zero train weight
            Some(sizes) => {
                let known: BTreeMap<GroupKey, f64> = per_group
                    .iter()
                    .filter(|(g, _)| sizes.contains_key(*g))
                    .map(|(g, a)| (*g, *a))
                    .collect();
                if known.is_empty() {
                    None
                } else {
                    Some(adjusted_average_accuracy(&known, sizes)?)
                }
            }
            None => None,
        };
        Ok(EvalReport {
            split: split.to_string(),
            n: preds.len(),
            average_accuracy: average_accuracy(preds, labels)?,
            adjusted_average_accuracy: adjusted,
            worst_group_accuracy: worst_acc,
            worst_group_error: 1.0 - worst_acc,
            per_group_accuracy: per_group
                .into_iter()
                .map(|((c, s), a)| (format!("g_{c}_{s}"), a))
                .collect(),
            minority_recall: None,
            minority_in_majority: None,
            majority_in_minority: None,
            cramers_v: BTreeMap::new(),
        })
    }
}
