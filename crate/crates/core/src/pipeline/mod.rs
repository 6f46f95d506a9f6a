//! Evaluation protocol: view splitting, per-class partitions, kNN scoring
//! in the embedding space and hyperparameter grid search.

mod grid;
mod knn;
mod report;
mod split;

pub use grid::{
    grid_search, log_spaced, mean_std, run_monte_carlo, run_split, source_kernel, BuiltGraph, CellRecord, EvalReport,
    GraphSource, GraphSpec, GridConfig, GridEvent, HyperGrid, McPlan, McResult, Observer, RunResult,
};
pub use knn::{accuracy, knn_classify, Accuracy};
pub use report::{write_curve, write_report, CurvePoint};
pub use split::{
    indices_of_classes, partition, sample_classes, select_columns, select_labels, split_views, Partition, Remainder,
    SplitPlan,
};

use crate::error::{Error, Result};
use crate::{ClassId, Matrix};

/// Labeled two-view data, samples as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
    pub labels: Vec<ClassId>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix, labels: Vec<ClassId>) -> Result<Self> {
        if x.ncols() != y.ncols() || labels.len() != x.ncols() {
            return Err(Error::dims(format!(
                "X has {} samples, Y {}, labels {}",
                x.ncols(),
                y.ncols(),
                labels.len()
            )));
        }
        Ok(Dataset { x, y, labels })
    }

    /// Splits stacked vectors at row `dx`.
    pub fn from_stacked(vectors: &Matrix, dx: usize, labels: Vec<ClassId>) -> Result<Self> {
        let (x, y) = split_views(vectors, dx)?;
        Dataset::new(x, y, labels)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: select_columns(&self.x, idx),
            y: select_columns(&self.y, idx),
            labels: select_labels(&self.labels, idx),
        }
    }
}
