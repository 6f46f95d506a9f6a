use std::time::Instant;

use rayon::prelude::*;

use super::knn::{accuracy, knn_classify};
use super::split::{
    indices_of_classes, partition, sample_classes, select_columns, select_labels, Partition, SplitPlan,
};
use super::Dataset;
use crate::cca::{fit_cca, subtract_mean, GccaProblem, PairedViews};
use crate::dual::GdccaProblem;
use crate::error::{Error, Result};
use crate::graph::{
    cosine_class_graph, kernel_class_graph, FilteredLaplacian, GraphOperator, SourceGraph, SpectralFilter,
};
use crate::kernel::{center_kernel, gram, Bandwidth, GkccaProblem, KernelBasis, KernelSpec, MultiKernelSpec};
use crate::model::{Family, FittedModel, Variant};
use crate::{ClassId, Matrix};

/// Candidate `γ` and `ε` values, each positive and ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub gammas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

/// `count` values evenly spaced in log10 between `min` and `max` inclusive.
pub fn log_spaced(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) || count == 0 {
        return Err(Error::InvalidGrid(format!(
            "need 0 < min <= max and count > 0, got [{min}, {max}] x {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.log10(), max.log10());
    let step = (hi - lo) / (count - 1) as f64;
    let mut v: Vec<f64> = (0..count).map(|i| 10f64.powf(lo + step * i as f64)).collect();
    // pin the end points against powf rounding
    v[0] = min;
    v[count - 1] = max;
    Ok(v)
}

impl Default for HyperGrid {
    /// 30 log-spaced values in `[1e-3, 1e3]` for both parameters.
    fn default() -> Self {
        let v = log_spaced(1e-3, 1e3, 30).expect("valid default grid");
        HyperGrid {
            gammas: v.clone(),
            epsilons: v,
        }
    }
}

impl HyperGrid {
    pub fn single(gamma: f64, epsilon: f64) -> Self {
        HyperGrid {
            gammas: vec![gamma],
            epsilons: vec![epsilon],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in [("gamma", &self.gammas), ("epsilon", &self.epsilons)] {
            if values.is_empty() {
                return Err(Error::InvalidGrid(format!("{name} grid is empty")));
            }
            if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidGrid(format!("{name} values must be positive")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!("{name} values must be strictly ascending")));
            }
        }
        Ok(())
    }

    /// `(γ, ε)` cells searched for `variant`, γ-major. Untuned parameters are 0.
    pub fn cells(&self, variant: Variant) -> Vec<(f64, f64)> {
        let gammas: &[f64] = if variant.uses_graph() { &self.gammas } else { &[0.0] };
        let epsilons: &[f64] = if variant.uses_epsilon() { &self.epsilons } else { &[0.0] };
        gammas
            .iter()
            .flat_map(|&g| epsilons.iter().map(move |&e| (g, e)))
            .collect()
    }
}

/// Where the source graph of a run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    /// Cosine graph for gcca/gdcca, Gaussian kernel graph for gkcca.
    Auto,
    /// Cosine similarity of the uncentered stacked training samples.
    Cosine,
    /// Centered kernel of the per-view-centered stacked training samples.
    Kernel(KernelSpec),
    /// A precomputed graph over the training samples.
    Fixed(SourceGraph),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub source: GraphSource,
    /// Same-class neighbors per node; defaults to the smallest training class size − 1.
    pub k: Option<usize>,
    pub filter: SpectralFilter,
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec {
            source: GraphSource::Auto,
            k: None,
            filter: SpectralFilter::Identity,
        }
    }
}

/// Centered Gaussian kernel of the stacked, per-view-centered sources.
pub fn source_kernel(x: &Matrix, y: &Matrix, spec: KernelSpec) -> Result<Matrix> {
    let views = PairedViews::center(x, y)?;
    center_kernel(&gram(&views.stacked(), spec)?)
}

fn stack(x: &Matrix, y: &Matrix) -> Matrix {
    let mut s = Matrix::zeros(x.nrows() + y.nrows(), x.ncols());
    s.rows_mut(0, x.nrows()).copy_from(x);
    s.rows_mut(x.nrows(), y.nrows()).copy_from(y);
    s
}

/// Operator handed to the solvers: a Laplacian or a filtered Laplacian.
pub enum BuiltGraph {
    Plain(SourceGraph),
    Filtered(FilteredLaplacian),
}

impl GraphOperator for BuiltGraph {
    fn node_count(&self) -> usize {
        match self {
            BuiltGraph::Plain(g) => g.node_count(),
            BuiltGraph::Filtered(g) => g.node_count(),
        }
    }

    fn operator(&self) -> &Matrix {
        match self {
            BuiltGraph::Plain(g) => g.operator(),
            BuiltGraph::Filtered(g) => g.operator(),
        }
    }
}

impl GraphSpec {
    /// Source graph over the raw training samples of `variant`.
    pub fn build_source(&self, variant: Variant, x: &Matrix, y: &Matrix, labels: &[ClassId]) -> Result<SourceGraph> {
        let k = match self.k {
            Some(k) => k,
            None => smallest_class(labels).saturating_sub(1),
        };
        let source = match (&self.source, variant.family()) {
            (GraphSource::Auto, Family::Kernel) => &GraphSource::Kernel(KernelSpec::Gaussian(Bandwidth::Median)),
            (GraphSource::Auto, _) => &GraphSource::Cosine,
            (other, _) => other,
        };
        match source {
            GraphSource::Cosine => cosine_class_graph(&stack(x, y), labels, k),
            GraphSource::Kernel(spec) => kernel_class_graph(&source_kernel(x, y, *spec)?, labels, k),
            GraphSource::Fixed(g) => {
                if g.n() != x.ncols() {
                    return Err(Error::GraphSizeMismatch {
                        graph: g.n(),
                        samples: x.ncols(),
                    });
                }
                Ok(g.clone())
            }
            GraphSource::Auto => unreachable!("resolved above"),
        }
    }

    pub fn build(&self, variant: Variant, x: &Matrix, y: &Matrix, labels: &[ClassId]) -> Result<BuiltGraph> {
        let g = self.build_source(variant, x, y, labels)?;
        Ok(match self.filter {
            SpectralFilter::Identity => BuiltGraph::Plain(g),
            f => BuiltGraph::Filtered(FilteredLaplacian::new(&g, f)?),
        })
    }
}

fn smallest_class(labels: &[ClassId]) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts.values().cloned().min().unwrap_or(0)
}

/// Everything a grid search needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub variant: Variant,
    pub grid: HyperGrid,
    pub d: usize,
    /// Neighbors in the kNN classifier.
    pub k: usize,
    /// Ridge added to both covariances of the primal variants.
    pub jitter: f64,
    pub kernel_x: MultiKernelSpec,
    pub kernel_y: MultiKernelSpec,
    pub graph: GraphSpec,
}

impl GridConfig {
    pub fn new(variant: Variant, d: usize) -> Self {
        let gauss = MultiKernelSpec::single(KernelSpec::Gaussian(Bandwidth::Median));
        GridConfig {
            variant,
            grid: HyperGrid::default(),
            d,
            k: 10,
            jitter: 0.0,
            kernel_x: gauss.clone(),
            kernel_y: gauss,
            graph: GraphSpec::default(),
        }
    }
}

/// Instrumentation hooks fired during a grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridEvent {
    /// Training and tuning data have been read; test data untouched.
    CellScored {
        run: usize,
        cell: usize,
    },
    Selected {
        run: usize,
        cell: usize,
    },
    /// Test samples are read for the first time in this run.
    TestAccess {
        run: usize,
    },
}

pub type Observer<'a> = &'a (dyn Fn(&GridEvent) + Sync);

/// Tuning and test accuracy of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRecord {
    pub gamma: f64,
    pub epsilon: f64,
    pub tune_acc: f64,
    pub test_acc: f64,
}

/// Outcome of one search: the selected cell's test performance.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub variant: Variant,
    pub d: usize,
    /// Test accuracy of the selected cell.
    pub accuracy: f64,
    pub per_class_accuracy: Vec<(ClassId, f64)>,
    pub tune_accuracy: f64,
    pub chosen_gamma: f64,
    pub chosen_epsilon: f64,
    /// Wall time of the whole search, seconds.
    pub runtime: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub cells: Vec<CellRecord>,
    pub selected: usize,
    pub report: EvalReport,
    pub model: FittedModel,
}

enum Prepared {
    Cca(PairedViews),
    Primal(GccaProblem),
    Dual(GdccaProblem),
    Kernel(GkccaProblem),
}

impl Prepared {
    fn fit(&self, variant: Variant, gamma: f64, epsilon: f64, d: usize, jitter: f64) -> Result<FittedModel> {
        Ok(match self {
            Prepared::Cca(views) => FittedModel::Primal(variant, fit_cca(views, d, jitter)?),
            Prepared::Primal(p) => FittedModel::Primal(variant, p.fit(gamma, d)?),
            Prepared::Dual(p) => FittedModel::Dual(variant, p.fit(gamma, epsilon, d)?),
            Prepared::Kernel(p) => FittedModel::Kernel(variant, p.fit(gamma, epsilon, d)?),
        })
    }
}

/// Maps raw X-view samples to the features the model coefficients act on.
enum Featurizer {
    Centered(crate::Vector),
    Dual(Matrix, crate::Vector),
    Kernel(KernelBasis),
}

impl Featurizer {
    fn features(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Featurizer::Centered(mean) => Ok(subtract_mean(x, mean)),
            Featurizer::Dual(train, mean) => Ok(train.transpose() * subtract_mean(x, mean)),
            Featurizer::Kernel(basis) => basis.centered_cross(x),
        }
    }
}

/// Fits every cell on the training split, selects by tuning accuracy
/// computed on X-view embeddings only, then scores the test split.
///
/// Test samples are not read until a cell has been selected.
pub fn grid_search(
    cfg: &GridConfig,
    data: &Dataset,
    part: &Partition,
    run: usize,
    observer: Observer<'_>,
) -> Result<RunResult> {
    let started = Instant::now();
    cfg.grid.validate()?;
    if part.tune.is_empty() || part.test.is_empty() || part.train.is_empty() {
        return Err(Error::InvalidPlan(
            "train, tune and test partitions must be nonempty".into(),
        ));
    }
    let variant = cfg.variant;
    let x_tr = select_columns(&data.x, &part.train);
    let y_tr = select_columns(&data.y, &part.train);
    let l_tr = select_labels(&data.labels, &part.train);
    let views = PairedViews::center(&x_tr, &y_tr)?;

    let graph = if variant.uses_graph() {
        Some(cfg.graph.build(variant, &x_tr, &y_tr, &l_tr)?)
    } else {
        None
    };
    let (prepared, featurizer) = match (variant, variant.family()) {
        (Variant::Cca, _) => (
            Prepared::Cca(views.clone()),
            Featurizer::Centered(views.x_mean().clone()),
        ),
        (_, Family::Primal) => (
            Prepared::Primal(GccaProblem::new(&views, graph.as_ref(), cfg.jitter)?),
            Featurizer::Centered(views.x_mean().clone()),
        ),
        (_, Family::Dual) => (
            Prepared::Dual(GdccaProblem::new(&views, graph.as_ref())?),
            Featurizer::Dual(views.x().clone(), views.x_mean().clone()),
        ),
        (_, Family::Kernel) => {
            let (xb, kx) = KernelBasis::build(&cfg.kernel_x, &x_tr)?;
            let (_, ky) = KernelBasis::build(&cfg.kernel_y, &y_tr)?;
            (
                Prepared::Kernel(GkccaProblem::new(&kx, &ky, graph.as_ref())?),
                Featurizer::Kernel(xb),
            )
        }
    };
    let f_train = featurizer.features(&x_tr)?;
    let x_tune = select_columns(&data.x, &part.tune);
    let l_tune = select_labels(&data.labels, &part.tune);
    let f_tune = featurizer.features(&x_tune)?;

    let cells = cfg.grid.cells(variant);
    let fitted: Vec<(FittedModel, f64)> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(gamma, epsilon))| {
            let annotate = |e: Error| Error::GridCell {
                variant: variant.tag().to_string(),
                gamma,
                epsilon,
                source: Box::new(e),
            };
            let model = prepared
                .fit(variant, gamma, epsilon, cfg.d, cfg.jitter)
                .map_err(annotate)?;
            let w = model.x_coefficients();
            let pred = knn_classify(&(w.transpose() * &f_train), &l_tr, &(w.transpose() * &f_tune), cfg.k)
                .map_err(annotate)?;
            let acc = accuracy(&pred, &l_tune)?.ratio();
            observer(&GridEvent::CellScored { run, cell: idx });
            Ok((model, acc))
        })
        .collect::<Result<_>>()?;

    let mut selected = 0;
    for (i, (_, acc)) in fitted.iter().enumerate() {
        if *acc > fitted[selected].1 {
            selected = i;
        }
    }
    observer(&GridEvent::Selected { run, cell: selected });

    observer(&GridEvent::TestAccess { run });
    let x_te = select_columns(&data.x, &part.test);
    let l_te = select_labels(&data.labels, &part.test);
    let f_te = featurizer.features(&x_te)?;
    let tested: Vec<(f64, Option<super::knn::Accuracy>)> = fitted
        .par_iter()
        .enumerate()
        .map(|(i, (model, _))| {
            let w = model.x_coefficients();
            let pred = knn_classify(&(w.transpose() * &f_train), &l_tr, &(w.transpose() * &f_te), cfg.k)?;
            let acc = accuracy(&pred, &l_te)?;
            Ok((acc.ratio(), (i == selected).then_some(acc)))
        })
        .collect::<Result<_>>()?;

    let records: Vec<CellRecord> = cells
        .iter()
        .zip(&fitted)
        .zip(&tested)
        .map(|((&(gamma, epsilon), (_, tune_acc)), (test_acc, _))| CellRecord {
            gamma,
            epsilon,
            tune_acc: *tune_acc,
            test_acc: *test_acc,
        })
        .collect();
    let best = tested[selected].1.clone().expect("selected cell carries its accuracy");
    let report = EvalReport {
        variant,
        d: cfg.d,
        accuracy: best.ratio(),
        per_class_accuracy: best.per_class_ratios(),
        tune_accuracy: records[selected].tune_acc,
        chosen_gamma: records[selected].gamma,
        chosen_epsilon: records[selected].epsilon,
        runtime: started.elapsed().as_secs_f64(),
    };
    let model = fitted.into_iter().nth(selected).expect("selected index in range").0;
    Ok(RunResult {
        run,
        cells: records,
        selected,
        report,
        model,
    })
}

/// Monte Carlo protocol: run `r` uses seed `seed + r` for its class draw
/// and its partition.
#[derive(Debug, Clone, PartialEq)]
pub struct McPlan {
    pub runs: usize,
    pub seed: u64,
    pub split: SplitPlan,
    /// Draw this many classes per run; `None` keeps all classes.
    pub classes_per_run: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub variant: Variant,
    pub runs: Vec<RunResult>,
}

impl McResult {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.report.accuracy).collect()
    }

    pub fn mean_accuracy(&self) -> f64 {
        mean_std(&self.accuracies()).0
    }

    pub fn std_accuracy(&self) -> f64 {
        mean_std(&self.accuracies()).1
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Data and partition used by run `run` of `plan`.
pub fn run_split(data: &Dataset, plan: &McPlan, run: usize) -> Result<(Dataset, Partition)> {
    let seed = plan.seed.wrapping_add(run as u64);
    let subset = match plan.classes_per_run {
        Some(c) => {
            let classes = sample_classes(&data.labels, c, seed)?;
            data.subset(&indices_of_classes(&data.labels, &classes))
        }
        None => data.clone(),
    };
    let part = partition(&subset.labels, &plan.split.with_seed(seed))?;
    Ok((subset, part))
}

pub fn run_monte_carlo(cfg: &GridConfig, data: &Dataset, plan: &McPlan, observer: Observer<'_>) -> Result<McResult> {
    let mut runs = Vec::with_capacity(plan.runs);
    for r in 0..plan.runs {
        let (subset, part) = run_split(data, plan, r)?;
        let result = grid_search(cfg, &subset, &part, r, observer)?;
        log::info!(
            "{} run {r}: test accuracy {:.4} at gamma={:e} epsilon={:e}",
            cfg.variant,
            result.report.accuracy,
            result.report.chosen_gamma,
            result.report.chosen_epsilon
        );
        runs.push(result);
    }
    Ok(McResult {
        variant: cfg.variant,
        runs,
    })
}
