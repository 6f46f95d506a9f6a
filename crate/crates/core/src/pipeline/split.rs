use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::{ClassId, Matrix};

/// First `dx` rows become view X, the rest view Y.
pub fn split_views(vectors: &Matrix, dx: usize) -> Result<(Matrix, Matrix)> {
    let rows = vectors.nrows();
    if dx == 0 || dx >= rows {
        return Err(Error::BadSplitPoint { dx, rows });
    }
    Ok((
        vectors.rows(0, dx).into_owned(),
        vectors.rows(dx, rows - dx).into_owned(),
    ))
}

/// How the per-class remainder after training draws is divided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Remainder {
    /// Fractions of the remainder; they must sum to 1.
    Fractions { tune: f64, test: f64 },
    /// Exact per-class counts; leftover samples are unused.
    Counts { tune: usize, test: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    pub n_train_per_class: usize,
    pub remainder: Remainder,
    pub seed: u64,
}

impl SplitPlan {
    /// `n_train` per class, the remainder halved between tuning and testing.
    pub fn new(n_train_per_class: usize, seed: u64) -> Self {
        SplitPlan {
            n_train_per_class,
            remainder: Remainder::Fractions { tune: 0.5, test: 0.5 },
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SplitPlan { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_train_per_class == 0 {
            return Err(Error::InvalidPlan("n_train_per_class must be positive".into()));
        }
        match self.remainder {
            Remainder::Fractions { tune, test } => {
                if !(tune > 0.0 && test > 0.0) || (tune + test - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidPlan(format!(
                        "fractions {tune} and {test} must be positive and sum to 1"
                    )));
                }
            }
            Remainder::Counts { tune, test } => {
                if tune == 0 || test == 0 {
                    return Err(Error::InvalidPlan("tune and test counts must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Minimum class size the plan can serve.
    pub fn required_per_class(&self) -> usize {
        match self.remainder {
            Remainder::Fractions { .. } => self.n_train_per_class + 2,
            Remainder::Counts { tune, test } => self.n_train_per_class + tune + test,
        }
    }

    /// `(tune, test)` counts for a class of `size`.
    fn remainder_counts(&self, size: usize) -> (usize, usize) {
        let rest = size - self.n_train_per_class;
        match self.remainder {
            Remainder::Fractions { tune, .. } => {
                let t = ((rest as f64) * tune).round() as usize;
                let t = t.clamp(1, rest - 1);
                (t, rest - t)
            }
            Remainder::Counts { tune, test } => (tune, test),
        }
    }
}

/// Disjoint train/tune/test sample indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub tune: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class random split, deterministic in `(labels, plan)`.
///
/// Classes are visited in ascending id order and drawn from a single
/// generator seeded with `plan.seed`.
pub fn partition(labels: &[ClassId], plan: &SplitPlan) -> Result<Partition> {
    plan.validate()?;
    let mut classes: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let required = plan.required_per_class();
    for (&class, members) in &classes {
        if members.len() < required {
            return Err(Error::ClassTooSmall {
                class,
                size: members.len(),
                required,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Partition {
        train: Vec::new(),
        tune: Vec::new(),
        test: Vec::new(),
    };
    for members in classes.values_mut() {
        members.shuffle(&mut rng);
        let (n_tune, n_test) = plan.remainder_counts(members.len());
        let ntr = plan.n_train_per_class;
        out.train.extend_from_slice(&members[..ntr]);
        out.tune.extend_from_slice(&members[ntr..ntr + n_tune]);
        out.test
            .extend_from_slice(&members[ntr + n_tune..ntr + n_tune + n_test]);
    }
    out.train.sort_unstable();
    out.tune.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Columns of `m` at `idx`, in that order.
pub fn select_columns(m: &Matrix, idx: &[usize]) -> Matrix {
    m.select_columns(idx)
}

pub fn select_labels(labels: &[ClassId], idx: &[usize]) -> Vec<ClassId> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// `count` distinct classes drawn uniformly, returned in ascending order.
pub fn sample_classes(labels: &[ClassId], count: usize, seed: u64) -> Result<Vec<ClassId>> {
    let mut all: Vec<ClassId> = labels.to_vec();
    all.sort_unstable();
    all.dedup();
    if count == 0 || count > all.len() {
        return Err(Error::InvalidPlan(format!(
            "cannot draw {count} classes from {}",
            all.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // separate stream from the partition drawn with the same seed
    rng.set_stream(1);
    all.shuffle(&mut rng);
    let mut chosen = all[..count].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Indices of samples whose label is in `classes`.
pub fn indices_of_classes(labels: &[ClassId], classes: &[ClassId]) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, l)| classes.contains(l))
        .map(|(i, _)| i)
        .collect()
}
