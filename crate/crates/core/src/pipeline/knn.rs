use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::{ClassId, Matrix};

/// Majority vote over the `k` Euclidean-nearest training columns.
///
/// Distance ties go to the lower training index. Among classes with equal
/// votes, the one whose first member appears earliest in the neighbor list
/// wins, so the single nearest neighbor decides a full tie.
pub fn knn_classify(train_emb: &Matrix, train_labels: &[ClassId], test_emb: &Matrix, k: usize) -> Result<Vec<ClassId>> {
    let nt = train_emb.ncols();
    if train_labels.len() != nt {
        return Err(Error::dims(format!(
            "{} labels for {nt} training embeddings",
            train_labels.len()
        )));
    }
    if train_emb.nrows() != test_emb.nrows() {
        return Err(Error::dims(format!(
            "training embeddings have dimension {}, test embeddings {}",
            train_emb.nrows(),
            test_emb.nrows()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidNeighborCount);
    }
    if k > nt {
        return Err(Error::KTooLarge { k, available: nt });
    }
    Ok((0..test_emb.ncols())
        .into_par_iter()
        .map(|j| {
            let q = test_emb.column(j);
            let mut dist: Vec<(f64, usize)> = (0..nt)
                .map(|i| {
                    let d: f64 = train_emb
                        .column(i)
                        .iter()
                        .zip(q.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d, i)
                })
                .collect();
            let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < nt {
                dist.select_nth_unstable_by(k - 1, order);
                dist.truncate(k);
            }
            dist.sort_unstable_by(order);
            vote(dist.iter().map(|&(_, i)| train_labels[i]))
        })
        .collect())
}

fn vote(neighbors: impl Iterator<Item = ClassId>) -> ClassId {
    // (class, count) in order of first appearance
    let mut tally: Vec<(ClassId, usize)> = Vec::new();
    for c in neighbors {
        match tally.iter_mut().find(|(t, _)| *t == c) {
            Some(entry) => entry.1 += 1,
            None => tally.push((c, 1)),
        }
    }
    let mut best = tally[0];
    for &entry in &tally[1..] {
        if entry.1 > best.1 {
            best = entry;
        }
    }
    best.0
}

/// Classification accuracy with per-class breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    /// `(class, correct, total)` in ascending class order.
    pub per_class: Vec<(ClassId, usize, usize)>,
}

impl Accuracy {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn per_class_ratios(&self) -> Vec<(ClassId, f64)> {
        self.per_class
            .iter()
            .map(|&(c, ok, n)| (c, ok as f64 / n as f64))
            .collect()
    }
}

pub fn accuracy(predicted: &[ClassId], truth: &[ClassId]) -> Result<Accuracy> {
    if predicted.len() != truth.len() {
        return Err(Error::dims(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut per_class: std::collections::BTreeMap<ClassId, (usize, usize)> = Default::default();
    let mut correct = 0;
    for (&p, &t) in predicted.iter().zip(truth) {
        let e = per_class.entry(t).or_default();
        e.1 += 1;
        if p == t {
            e.0 += 1;
            correct += 1;
        }
    }
    Ok(Accuracy {
        correct,
        total: truth.len(),
        per_class: per_class.into_iter().map(|(c, (ok, n))| (c, ok, n)).collect(),
    })
}
