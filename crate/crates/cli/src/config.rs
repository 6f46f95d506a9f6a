//! Flat `key=value` experiment configuration.
//!
//! Keys carry section prefixes (`grid.gamma.min`). A config file supplies
//! defaults and every key can be overridden by a long flag of the same name.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use gcca_core::graph::SpectralFilter;
use gcca_core::kernel::{KernelSpec, MultiKernelSpec};
use gcca_core::model::Variant;
use gcca_core::pipeline::{log_spaced, HyperGrid, Remainder};
use gcca_core::synth::SyntheticSpec;

macro_rules! config_keys {
    ($($field:ident => $key:literal: $help:literal,)*) => {
        /// Command-line overrides, one per config key.
        #[derive(Debug, Default, Clone, clap::Args)]
        #[command(next_help_heading = "Config keys (also valid in --config files)")]
        pub struct Overrides {
            $(
                #[arg(long = $key, value_name = "VALUE", global = true, help = $help)]
                pub $field: Option<String>,
            )*
        }

        pub const KEYS: &[&str] = &[$($key),*];

        impl Overrides {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut v = Vec::new();
                $(
                    if let Some(s) = &self.$field {
                        v.push(($key, s.as_str()));
                    }
                )*
                v
            }
        }
    };
}

config_keys! {
    data_format => "data.format": "csv, idx or synthetic [default: idx for *ubyte paths, else csv]",
    data_path => "data.path": "Stacked feature vectors (CSV) or IDX image file",
    data_labels => "data.labels": "IDX label file, or a one-column CSV of labels",
    data_rows_are_samples => "data.rows_are_samples": "CSV lines are samples [default: true]",
    data_labels_inline => "data.labels_inline": "Last CSV field is the label [default: true unless data.labels is set]",
    data_dx => "data.dx": "Rows of the stacked vectors that form view X",
    data_resize => "data.resize": "Resize IDX images to HxW, e.g. 20x20",
    synthetic_classes => "synthetic.classes": "Synthetic class count [default: 4]",
    synthetic_per_class => "synthetic.per_class": "Synthetic samples per class [default: 30]",
    synthetic_dx => "synthetic.dx": "Synthetic X dimension [default: 10]",
    synthetic_dy => "synthetic.dy": "Synthetic Y dimension [default: 8]",
    synthetic_latent => "synthetic.latent": "Synthetic source dimension [default: 3]",
    synthetic_separation => "synthetic.separation": "Synthetic class-center spread [default: 2]",
    synthetic_noise => "synthetic.noise": "Synthetic view noise [default: 0.5]",
    synthetic_seed => "synthetic.seed": "Synthetic generator seed [default: 0]",
    model_variant => "model.variant": "cca, gcca, dcca, gdcca, kcca or gkcca [default: gcca]",
    model_d => "model.d": "Number of canonical directions",
    model_gamma => "model.gamma": "Graph weight for single fits [default: 0]",
    model_epsilon => "model.epsilon": "Tikhonov parameter for single dual/kernel fits [default: scale-aware]",
    model_jitter => "model.jitter": "Ridge added to both covariances of primal fits [default: 0]",
    grid_gamma_values => "grid.gamma.values": "Comma-separated gamma grid; overrides min/max/count",
    grid_gamma_min => "grid.gamma.min": "Smallest gamma [default: 1e-3]",
    grid_gamma_max => "grid.gamma.max": "Largest gamma [default: 1e3]",
    grid_gamma_count => "grid.gamma.count": "Log-spaced gamma count [default: 30]",
    grid_epsilon_values => "grid.epsilon.values": "Comma-separated epsilon grid; overrides min/max/count",
    grid_epsilon_min => "grid.epsilon.min": "Smallest epsilon [default: 1e-3]",
    grid_epsilon_max => "grid.epsilon.max": "Largest epsilon [default: 1e3]",
    grid_epsilon_count => "grid.epsilon.count": "Log-spaced epsilon count [default: 30]",
    split_n_train => "split.n_train": "Training samples per class; a comma list traces a curve",
    split_tune => "split.tune": "Tuning samples per class [default: half the remainder]",
    split_test => "split.test": "Test samples per class [default: half the remainder]",
    split_classes => "split.classes": "Classes drawn per run [default: all]",
    mc_runs => "mc.runs": "Monte Carlo runs [default: 1]",
    mc_seed => "mc.seed": "Seed of run 0; run r uses seed + r [default: 0]",
    knn_k => "knn.k": "Neighbors of the kNN classifier [default: 10]",
    graph_source => "graph.source": "auto, cosine, kernel[:SPEC] or file [default: auto]",
    graph_path => "graph.path": "Edge-list CSV for graph.source=file",
    graph_k => "graph.k": "Same-class neighbors per node [default: smallest class size - 1]",
    graph_filter => "graph.filter": "identity, power:P or exp:T [default: identity]",
    kernel_x => "kernel.x": "Kernel of view X, e.g. gaussian:median or linear+gaussian:2@0.5 [default: gaussian:median]",
    kernel_y => "kernel.y": "Kernel of view Y [default: gaussian:median]",
    output_dir => "output.dir": "Directory for models, reports and curves [default: gcca-out]",
}

/// Merged key/value pairs: file entries first, flags on top.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {lineno}: expected key=value, got '{line}'"))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                bail!("line {lineno}: unknown key '{key}'");
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                bail!("line {lineno}: duplicate key '{key}'");
            }
        }
        Ok(RawConfig { values })
    }

    pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut raw = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                RawConfig::parse(&text).with_context(|| format!("in config {}", p.display()))?
            }
            None => RawConfig::default(),
        };
        for (k, v) in overrides.pairs() {
            raw.values.insert(k.to_string(), v.to_string());
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|s| !s.is_empty())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.str(key)
            .map(|s| s.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse '{s}': {e}")))
            .transpose()
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.str(key)
            .map(|s| {
                s.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<T>()
                            .map_err(|e| anyhow!("{key}: cannot parse '{v}': {e}"))
                    })
                    .collect()
            })
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Idx,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        labels: Option<PathBuf>,
        rows_are_samples: bool,
        labels_inline: bool,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        resize: Option<(usize, usize)>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    pub dx: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphChoice {
    Auto,
    Cosine,
    Kernel(KernelSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: Option<DataConfig>,
    pub variant: Variant,
    pub d: Option<usize>,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub jitter: f64,
    pub grid: HyperGrid,
    pub n_train: Vec<usize>,
    pub remainder: Remainder,
    pub classes_per_run: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub k: usize,
    pub graph: GraphChoice,
    pub graph_k: Option<usize>,
    pub filter: SpectralFilter,
    pub kernel_x: MultiKernelSpec,
    pub kernel_y: MultiKernelSpec,
    pub output_dir: PathBuf,
}

fn parse_resize(s: &str) -> Result<(usize, usize)> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("data.resize: expected HxW, got '{s}'"))?;
    let h: usize = h.trim().parse().context("data.resize height")?;
    let w: usize = w.trim().parse().context("data.resize width")?;
    if h == 0 || w == 0 {
        bail!("data.resize: dimensions must be positive");
    }
    Ok((h, w))
}

fn axis(raw: &RawConfig, name: &str) -> Result<Vec<f64>> {
    if let Some(v) = raw.list::<f64>(&format!("grid.{name}.values"))? {
        return Ok(v);
    }
    let min = raw.get_or(&format!("grid.{name}.min"), 1e-3)?;
    let max = raw.get_or(&format!("grid.{name}.max"), 1e3)?;
    let count = raw.get_or(&format!("grid.{name}.count"), 30usize)?;
    log_spaced(min, max, count).with_context(|| format!("grid.{name}"))
}

fn synthetic_spec(raw: &RawConfig) -> Result<SyntheticSpec> {
    let base = SyntheticSpec::default();
    Ok(SyntheticSpec {
        classes: raw.get_or("synthetic.classes", base.classes)?,
        per_class: raw.get_or("synthetic.per_class", base.per_class)?,
        dx: raw.get_or("synthetic.dx", base.dx)?,
        dy: raw.get_or("synthetic.dy", base.dy)?,
        latent: raw.get_or("synthetic.latent", base.latent)?,
        separation: raw.get_or("synthetic.separation", base.separation)?,
        noise: raw.get_or("synthetic.noise", base.noise)?,
        seed: raw.get_or("synthetic.seed", base.seed)?,
    })
}

fn data_config(raw: &RawConfig) -> Result<Option<DataConfig>> {
    let path = raw.get::<PathBuf>("data.path")?;
    let format = match raw.str("data.format") {
        Some("csv") => DataFormat::Csv,
        Some("idx") => DataFormat::Idx,
        Some("synthetic") => DataFormat::Synthetic,
        Some(other) => bail!("data.format: expected csv, idx or synthetic, got '{other}'"),
        None => match &path {
            None => return Ok(None),
            Some(p) if p.to_string_lossy().ends_with("ubyte") => DataFormat::Idx,
            Some(_) => DataFormat::Csv,
        },
    };
    let labels = raw.get::<PathBuf>("data.labels")?;
    let mut dx = raw.get::<usize>("data.dx")?;
    let source = match format {
        DataFormat::Csv => DataSource::Csv {
            path: path.ok_or_else(|| anyhow!("data.path is required for csv data"))?,
            rows_are_samples: raw.get_or("data.rows_are_samples", true)?,
            labels_inline: raw.get_or("data.labels_inline", labels.is_none())?,
            labels,
        },
        DataFormat::Idx => DataSource::Idx {
            images: path.ok_or_else(|| anyhow!("data.path is required for idx data"))?,
            labels: labels.ok_or_else(|| anyhow!("data.labels is required for idx data"))?,
            resize: raw.str("data.resize").map(parse_resize).transpose()?,
        },
        DataFormat::Synthetic => {
            let spec = synthetic_spec(raw)?;
            dx.get_or_insert(spec.dx);
            DataSource::Synthetic(spec)
        }
    };
    Ok(Some(DataConfig { source, dx }))
}

fn graph_choice(raw: &RawConfig) -> Result<GraphChoice> {
    let choice = match raw.str("graph.source").unwrap_or("auto") {
        "auto" => GraphChoice::Auto,
        "cosine" => GraphChoice::Cosine,
        "file" => GraphChoice::File(
            raw.get("graph.path")?
                .ok_or_else(|| anyhow!("graph.path is required for graph.source=file"))?,
        ),
        "kernel" => GraphChoice::Kernel("gaussian:median".parse()?),
        other => match other.strip_prefix("kernel:") {
            Some(spec) => GraphChoice::Kernel(spec.parse().context("graph.source")?),
            None => bail!("graph.source: expected auto, cosine, kernel[:SPEC] or file, got '{other}'"),
        },
    };
    Ok(choice)
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let variant = raw.get_or("model.variant", Variant::Gcca)?;
        let remainder = match (raw.get::<usize>("split.tune")?, raw.get::<usize>("split.test")?) {
            (None, None) => Remainder::Fractions { tune: 0.5, test: 0.5 },
            (Some(tune), Some(test)) => Remainder::Counts { tune, test },
            _ => bail!("split.tune and split.test must be given together"),
        };
        let default_kernel: MultiKernelSpec = "gaussian:median".parse()?;
        Ok(ExperimentConfig {
            data: data_config(raw)?,
            variant,
            d: raw.get("model.d")?,
            gamma: raw.get_or("model.gamma", 0.0)?,
            epsilon: raw.get("model.epsilon")?,
            jitter: raw.get_or("model.jitter", 0.0)?,
            grid: HyperGrid {
                gammas: axis(raw, "gamma")?,
                epsilons: axis(raw, "epsilon")?,
            },
            n_train: raw.list("split.n_train")?.unwrap_or_default(),
            remainder,
            classes_per_run: raw.get("split.classes")?,
            runs: raw.get_or("mc.runs", 1)?,
            seed: raw.get_or("mc.seed", 0)?,
            k: raw.get_or("knn.k", 10)?,
            graph: graph_choice(raw)?,
            graph_k: raw.get("graph.k")?,
            filter: raw.get_or("graph.filter", SpectralFilter::Identity)?,
            kernel_x: raw.get("kernel.x")?.unwrap_or_else(|| default_kernel.clone()),
            kernel_y: raw.get("kernel.y")?.unwrap_or(default_kernel),
            output_dir: raw.get_or("output.dir", PathBuf::from("gcca-out"))?,
        })
    }

    /// Checks that every referenced input file exists.
    pub fn validate_inputs(&self) -> Result<()> {
        let mut paths: Vec<(&str, &Path)> = Vec::new();
        if let Some(data) = &self.data {
            match &data.source {
                DataSource::Csv { path, labels, .. } => {
                    paths.push(("data.path", path));
                    if let Some(l) = labels {
                        paths.push(("data.labels", l));
                    }
                }
                DataSource::Idx { images, labels, .. } => {
                    paths.push(("data.path", images));
                    paths.push(("data.labels", labels));
                }
                DataSource::Synthetic(_) => {}
            }
        }
        if let GraphChoice::File(p) = &self.graph {
            paths.push(("graph.path", p));
        }
        for (key, p) in paths {
            if !p.is_file() {
                bail!("{key}: file {} does not exist", p.display());
            }
        }
        Ok(())
    }

    pub fn data(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| anyhow!("no dataset configured; set data.path or data.format=synthetic"))
    }

    pub fn d(&self) -> Result<usize> {
        self.d.ok_or_else(|| anyhow!("model.d is required"))
    }
}
