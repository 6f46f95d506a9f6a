//! Dataset ingestion for the configured source.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gcca_core::io::{load_csv, load_idx, resize_columns, CsvLayout};
use gcca_core::pipeline::{split_views, Dataset};
use gcca_core::synth::two_view;
use gcca_core::{ClassId, Matrix};

use crate::config::{DataConfig, DataSource};

/// Stacked feature vectors (samples as columns) with optional labels.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub vectors: Matrix,
    pub labels: Option<Vec<ClassId>>,
    pub dx: Option<usize>,
}

fn load_label_column(path: &Path) -> Result<Vec<ClassId>> {
    let (m, _) = load_csv(
        path,
        CsvLayout {
            rows_are_samples: true,
            labels_inline: false,
        },
    )
    .with_context(|| format!("reading labels {}", path.display()))?;
    if m.nrows() != 1 {
        bail!("labels file {} must have exactly one value per line", path.display());
    }
    m.iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= ClassId::MAX as f64 {
                Ok(v as ClassId)
            } else {
                Err(anyhow!("labels file {}: '{v}' is not a class id", path.display()))
            }
        })
        .collect()
}

pub fn load(cfg: &DataConfig) -> Result<Loaded> {
    let (vectors, labels) = match &cfg.source {
        DataSource::Csv {
            path,
            labels,
            rows_are_samples,
            labels_inline,
        } => {
            let layout = CsvLayout {
                rows_are_samples: *rows_are_samples,
                labels_inline: *labels_inline,
            };
            let (m, inline) = load_csv(path, layout).with_context(|| format!("reading {}", path.display()))?;
            let labels = match labels {
                Some(p) => Some(load_label_column(p)?),
                None => inline,
            };
            (m, labels)
        }
        DataSource::Idx { images, labels, resize } => {
            let (img, l) = load_idx(images, labels)
                .with_context(|| format!("reading {} and {}", images.display(), labels.display()))?;
            let pixels = match resize {
                Some((h, w)) => resize_columns(&img.pixels, img.rows, img.cols, *h, *w)?,
                None => img.pixels,
            };
            (pixels, Some(l))
        }
        DataSource::Synthetic(spec) => {
            let d = two_view(spec)?;
            let mut stacked = Matrix::zeros(d.x.nrows() + d.y.nrows(), d.n());
            stacked.rows_mut(0, d.x.nrows()).copy_from(&d.x);
            stacked.rows_mut(d.x.nrows(), d.y.nrows()).copy_from(&d.y);
            (stacked, Some(d.labels))
        }
    };
    if let Some(l) = &labels {
        if l.len() != vectors.ncols() {
            bail!("{} labels for {} samples", l.len(), vectors.ncols());
        }
    }
    Ok(Loaded {
        vectors,
        labels,
        dx: cfg.dx,
    })
}

impl Loaded {
    fn dx(&self) -> Result<usize> {
        self.dx
            .ok_or_else(|| anyhow!("data.dx is required to split the vectors into two views"))
    }

    pub fn views(&self) -> Result<(Matrix, Matrix)> {
        split_views(&self.vectors, self.dx()?).context("data.dx")
    }

    pub fn labels(&self) -> Result<&[ClassId]> {
        self.labels
            .as_deref()
            .ok_or_else(|| anyhow!("this command needs class labels; set data.labels or data.labels_inline"))
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let (x, y) = self.views()?;
        Ok(Dataset::new(x, y, self.labels()?.to_vec())?)
    }

    /// One view's samples. Without `data.dx` the whole matrix is that view.
    pub fn view(&self, which: View) -> Result<Matrix> {
        match (self.dx, which) {
            (None, _) => Ok(self.vectors.clone()),
            (Some(_), View::X) => Ok(self.views()?.0),
            (Some(_), View::Y) => Ok(self.views()?.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum View {
    X,
    Y,
}

/// The first `per_class` samples of each class, in file order.
pub fn balanced_subset(labels: &[ClassId], per_class: usize) -> Result<Vec<usize>> {
    let mut taken: BTreeMap<ClassId, usize> = BTreeMap::new();
    let mut idx = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        let c = taken.entry(l).or_insert(0);
        if *c < per_class {
            *c += 1;
            idx.push(i);
        }
    }
    if let Some((class, &n)) = taken.iter().find(|(_, &n)| n < per_class) {
        bail!("class {class} has only {n} samples, {per_class} requested");
    }
    Ok(idx)
}
