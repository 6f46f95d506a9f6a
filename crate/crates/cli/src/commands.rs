use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gcca_core::cca::{fit_cca, GccaProblem, PairedViews};
use gcca_core::dual::{default_epsilon, linear_gram, GdccaProblem};
use gcca_core::graph::{read_edges, spectral_filter, write_edges, SourceGraph, SpectralFilter};
use gcca_core::io::{load_idx, load_model, resize_columns, save_csv, save_model};
use gcca_core::kernel::{GkccaProblem, KernelBasis};
use gcca_core::model::{Family, FittedModel, Variant};
use gcca_core::pipeline::{
    run_monte_carlo, run_split, select_columns, select_labels, write_curve, write_report, CurvePoint, Dataset,
    GraphSource, GraphSpec, GridConfig, GridEvent, McPlan, McResult, SplitPlan,
};
use gcca_core::{ClassId, Matrix};

use crate::config::{ExperimentConfig, GraphChoice};
use crate::data::{self, balanced_subset, Loaded, View};

fn load_edges(path: &Path, n: usize) -> Result<SourceGraph> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_edges(BufReader::new(file), n).with_context(|| format!("reading edges from {}", path.display()))
}

/// Graph construction for samples of size `n` (only file graphs need `n`).
fn graph_spec(cfg: &ExperimentConfig, n: usize) -> Result<GraphSpec> {
    let source = match &cfg.graph {
        GraphChoice::Auto => GraphSource::Auto,
        GraphChoice::Cosine => GraphSource::Cosine,
        GraphChoice::Kernel(spec) => GraphSource::Kernel(*spec),
        GraphChoice::File(p) => GraphSource::Fixed(load_edges(p, n)?),
    };
    Ok(GraphSpec {
        source,
        k: cfg.graph_k,
        filter: cfg.filter,
    })
}

fn grid_config(cfg: &ExperimentConfig, variant: Variant, n: usize) -> Result<GridConfig> {
    Ok(GridConfig {
        variant,
        grid: cfg.grid.clone(),
        d: cfg.d()?,
        k: cfg.k,
        jitter: cfg.jitter,
        kernel_x: cfg.kernel_x.clone(),
        kernel_y: cfg.kernel_y.clone(),
        graph: graph_spec(cfg, n)?,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Centered Grams, written by `--dump-kernels`.
struct Grams {
    kx: Matrix,
    ky: Matrix,
}

/// One fit on all given samples, self-contained for saving and projection.
fn fit_model(
    cfg: &GridConfig,
    x: &Matrix,
    y: &Matrix,
    labels: Option<&[ClassId]>,
    gamma: f64,
    epsilon: Option<f64>,
) -> Result<(FittedModel, Option<Grams>)> {
    let variant = cfg.variant;
    let views = PairedViews::center(x, y)?;
    let graph = if variant.uses_graph() {
        let labels = match (&cfg.graph.source, labels) {
            (_, Some(l)) => l,
            (GraphSource::Fixed(_), None) => &[][..],
            _ => bail!("building a class graph needs labels; set data.labels or use graph.source=file"),
        };
        Some(
            cfg.graph
                .build(variant, x, y, labels)
                .context("building the source graph")?,
        )
    } else {
        None
    };
    let n = views.n() as f64;
    Ok(match variant.family() {
        Family::Primal => {
            let m = if variant == Variant::Cca {
                fit_cca(&views, cfg.d, cfg.jitter)?
            } else {
                GccaProblem::new(&views, graph.as_ref(), cfg.jitter)?.fit(gamma, cfg.d)?
            };
            (FittedModel::Primal(variant, m), None)
        }
        Family::Dual => {
            let eps = epsilon.unwrap_or_else(|| default_epsilon(&views));
            let m = GdccaProblem::new(&views, graph.as_ref())?.fit(gamma, eps, cfg.d)?;
            let grams = Grams {
                kx: linear_gram(views.x()),
                ky: linear_gram(views.y()),
            };
            (FittedModel::Dual(variant, m), Some(grams))
        }
        Family::Kernel => {
            let (xb, kx) = KernelBasis::build(&cfg.kernel_x, x).context("kernel.x")?;
            let (yb, ky) = KernelBasis::build(&cfg.kernel_y, y).context("kernel.y")?;
            // Same scale-aware rule as the dual default, on the centered Gram.
            let eps = epsilon.unwrap_or(1e-3 * kx.trace() / n);
            let mut m = GkccaProblem::new(&kx, &ky, graph.as_ref())?.fit(gamma, eps, cfg.d)?;
            m.x_basis = Some(xb);
            m.y_basis = Some(yb);
            (FittedModel::Kernel(variant, m), Some(Grams { kx, ky }))
        }
    })
}

pub fn fit(cfg: &ExperimentConfig, dump_kernels: bool) -> Result<()> {
    let loaded = data::load(cfg.data()?)?;
    let (x, y) = loaded.views()?;
    let gc = grid_config(cfg, cfg.variant, x.ncols())?;
    let (model, grams) = fit_model(&gc, &x, &y, loaded.labels.as_deref(), cfg.gamma, cfg.epsilon)
        .with_context(|| format!("fitting {}", cfg.variant))?;
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(format!("{}.model", cfg.variant));
    save_model(&path, &model).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "{} d={} gamma={:e} epsilon={:e} -> {}",
        cfg.variant,
        model.d(),
        model.gamma(),
        model.epsilon(),
        path.display()
    );
    if dump_kernels {
        match grams {
            Some(g) => {
                for (name, k) in [("kx", &g.kx), ("ky", &g.ky)] {
                    let p = cfg.output_dir.join(format!("{}.{name}.csv", cfg.variant));
                    save_csv(&p, k, None, false).with_context(|| format!("writing {}", p.display()))?;
                    println!("{name} {}x{} -> {}", k.nrows(), k.ncols(), p.display());
                }
            }
            None => log::warn!("--dump-kernels ignored: {} uses no kernel matrices", cfg.variant),
        }
    }
    Ok(())
}

pub fn transform(cfg: &ExperimentConfig, model_path: &Path, view: View, out: &Path) -> Result<()> {
    let loaded = data::load(cfg.data()?)?;
    let model = load_model(model_path).with_context(|| format!("reading model {}", model_path.display()))?;
    let samples = loaded.view(view)?;
    let emb = match view {
        View::X => model.project_x(&samples),
        View::Y => model.project_y(&samples),
    }
    .context("projecting samples")?;
    save_csv(out, &emb, loaded.labels.as_deref(), true).with_context(|| format!("writing {}", out.display()))?;
    println!("{} samples -> {} dims -> {}", emb.ncols(), emb.nrows(), out.display());
    Ok(())
}

fn log_event(e: &GridEvent) {
    log::trace!("{e:?}");
}

/// Refits the selected cell of `run` with kernel bases attached, since
/// grid fits keep only the Grams.
fn standalone_model(
    gc: &GridConfig,
    data: &Dataset,
    plan: &McPlan,
    result: &McResult,
    run: usize,
) -> Result<FittedModel> {
    let r = &result.runs[run];
    if gc.variant.family() != Family::Kernel {
        return Ok(r.model.clone());
    }
    let (subset, part) = run_split(data, plan, run)?;
    let x = select_columns(&subset.x, &part.train);
    let y = select_columns(&subset.y, &part.train);
    let l = select_labels(&subset.labels, &part.train);
    let (m, _) = fit_model(
        gc,
        &x,
        &y,
        Some(&l),
        r.report.chosen_gamma,
        Some(r.report.chosen_epsilon),
    )?;
    Ok(m)
}

/// Monte Carlo grid searches for each variant and training size; writes
/// reports, selected models and one curve per variant.
fn protocol(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<Vec<(Variant, Vec<CurvePoint>)>> {
    let loaded: Loaded = data::load(cfg.data()?)?;
    let data = loaded.dataset()?;
    if cfg.n_train.is_empty() {
        bail!("split.n_train is required");
    }
    let models_dir = cfg.output_dir.join("models");
    create_dir(&models_dir)?;
    let mut curves = Vec::new();
    for &variant in variants {
        let mut curve = Vec::new();
        for &n_train in &cfg.n_train {
            let split = SplitPlan {
                n_train_per_class: n_train,
                remainder: cfg.remainder,
                seed: cfg.seed,
            };
            let plan = McPlan {
                runs: cfg.runs,
                seed: cfg.seed,
                split,
                classes_per_run: cfg.classes_per_run,
            };
            let classes = cfg.classes_per_run.unwrap_or_else(|| {
                let mut l = data.labels.clone();
                l.sort_unstable();
                l.dedup();
                l.len()
            });
            let gc = grid_config(cfg, variant, n_train * classes)?;
            let ctx = || format!("{variant} with n_train={n_train}");
            let result = run_monte_carlo(&gc, &data, &plan, &log_event).with_context(ctx)?;

            let report = cfg.output_dir.join(format!("report-{variant}-n{n_train}.txt"));
            let mut out = open_out(&report)?;
            write_report(&mut out, &result, false)?;
            out.flush()?;
            for run in 0..result.runs.len() {
                let model = standalone_model(&gc, &data, &plan, &result, run).with_context(ctx)?;
                let path = models_dir.join(format!("{variant}-n{n_train}-run{run}.model"));
                save_model(&path, &model).with_context(|| format!("writing {}", path.display()))?;
            }
            let point = CurvePoint {
                n_train,
                mean_acc: result.mean_accuracy(),
                std_acc: result.std_accuracy(),
            };
            println!(
                "{variant} n_train={n_train} runs={} mean_acc={:.4} std_acc={:.4}",
                result.runs.len(),
                point.mean_acc,
                point.std_acc
            );
            curve.push(point);
        }
        let path = cfg.output_dir.join(format!("curve-{variant}.csv"));
        let mut out = open_out(&path)?;
        write_curve(&mut out, &curve)?;
        out.flush()?;
        curves.push((variant, curve));
    }
    Ok(curves)
}

pub fn grid(cfg: &ExperimentConfig) -> Result<()> {
    protocol(cfg, &[cfg.variant])?;
    Ok(())
}

/// The configured variant against its graph-free ablation.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let ablation = cfg.variant.ablation();
    if ablation == cfg.variant {
        protocol(cfg, &[cfg.variant])?;
        return Ok(());
    }
    let curves = protocol(cfg, &[cfg.variant, ablation])?;
    let (full, base) = (&curves[0].1, &curves[1].1);
    for (f, b) in full.iter().zip(base) {
        println!(
            "n_train={} {}-{} accuracy gain {:+.4}",
            f.n_train,
            cfg.variant,
            ablation,
            f.mean_acc - b.mean_acc
        );
    }
    Ok(())
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(open_out(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn graph_build(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let loaded = data::load(cfg.data()?)?;
    let (x, y) = loaded.views()?;
    let spec = graph_spec(cfg, x.ncols())?;
    let g = spec
        .build_source(cfg.variant, &x, &y, loaded.labels()?)
        .context("building the source graph")?;
    log::info!("{} nodes, {} edges", g.n(), g.edge_count());
    let mut w = writer(out)?;
    write_edges(&g, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GraphMatrix {
    Adjacency,
    Degrees,
    /// The Laplacian, passed through graph.filter.
    Laplacian,
}

pub fn graph_export(cfg: &ExperimentConfig, nodes: usize, what: GraphMatrix, out: Option<&Path>) -> Result<()> {
    let path = match &cfg.graph {
        GraphChoice::File(p) => p.clone(),
        _ => bail!("graph export reads an edge list; set graph.source=file and graph.path"),
    };
    let g = load_edges(&path, nodes)?;
    let m = match what {
        GraphMatrix::Adjacency => g.weights().clone(),
        GraphMatrix::Degrees => Matrix::from_column_slice(nodes, 1, g.degrees().as_slice()),
        GraphMatrix::Laplacian if cfg.filter == SpectralFilter::Identity => g.laplacian().clone(),
        GraphMatrix::Laplacian => spectral_filter(&g, cfg.filter)?,
    };
    let mut w = writer(out)?;
    gcca_core::io::write_csv(&mut w, &m, None, false)?;
    w.flush()?;
    Ok(())
}

pub struct MnistFixture {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub per_class: usize,
    pub size: usize,
    pub out: PathBuf,
}

pub fn fixture_mnist(f: &MnistFixture) -> Result<()> {
    for p in [&f.images, &f.labels] {
        if !p.is_file() {
            bail!("file {} does not exist", p.display());
        }
    }
    let (img, labels) = load_idx(&f.images, &f.labels)?;
    let idx = balanced_subset(&labels, f.per_class)?;
    let pixels = select_columns(&img.pixels, &idx);
    let pixels = if f.size == img.rows && f.size == img.cols {
        pixels
    } else {
        resize_columns(&pixels, img.rows, img.cols, f.size, f.size)?
    };
    save_csv(&f.out, &pixels, Some(&select_labels(&labels, &idx)), true)
        .with_context(|| format!("writing {}", f.out.display()))?;
    println!(
        "{} samples of {} features -> {}",
        pixels.ncols(),
        pixels.nrows(),
        f.out.display()
    );
    Ok(())
}

pub fn fixture_synthetic(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let loaded = data::load(cfg.data()?)?;
    save_csv(out, &loaded.vectors, loaded.labels.as_deref(), true)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{} samples of {} features (data.dx={}) -> {}",
        loaded.vectors.ncols(),
        loaded.vectors.nrows(),
        loaded.dx.unwrap_or(0),
        out.display()
    );
    Ok(())
}
