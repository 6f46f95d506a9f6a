//! Plain-text model files.
//!
//! ```text
//! #gcca-model variant=gcca dx=15 dy=12 d=5 gamma=... epsilon=... jitter=...
//! vector singulars 5
//! <one value per line>
//! matrix u 15 5
//! <one comma-separated row per line>
//! ```
//!
//! Floats carry 17 significant digits, so a write/read cycle is bit-exact.
//! Dual and kernel models reference their training views through `x_ref` and
//! `y_ref` CSV files (samples as rows): dual models store the centered
//! views, kernel models the raw ones. Relative references resolve against
//! the directory passed to [`read_model`].

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::csv::{load_csv, save_csv, CsvLayout};
use crate::cca::GccaModel;
use crate::dual::DualModel;
use crate::error::{Error, Result};
use crate::kernel::{CenteringStats, KernelBasis, KernelModel, MultiKernelSpec};
use crate::model::{Family, FittedModel, Variant};
use crate::{Matrix, Vector};

const MAGIC: &str = "#gcca-model";

/// Training-view files referenced by a dual or kernel model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRefs {
    pub x: PathBuf,
    pub y: PathBuf,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn path_token(p: &Path) -> Result<String> {
    let s = p
        .to_str()
        .ok_or_else(|| Error::InvalidParameter(format!("path {p:?} is not UTF-8")))?;
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::InvalidParameter(format!(
            "model reference path '{s}' must be nonempty and contain no whitespace"
        )));
    }
    Ok(s.to_string())
}

fn write_vector(out: &mut impl Write, name: &str, v: &Vector) -> Result<()> {
    writeln!(out, "vector {name} {}", v.len())?;
    for x in v.iter() {
        writeln!(out, "{}", fmt_f(*x))?;
    }
    Ok(())
}

fn write_matrix(out: &mut impl Write, name: &str, m: &Matrix) -> Result<()> {
    writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|&x| fmt_f(x)).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Training views a model needs on disk: `(x, y)` as stored in the refs.
pub fn reference_views(model: &FittedModel) -> Option<(Matrix, Matrix)> {
    match model {
        FittedModel::Primal(..) => None,
        FittedModel::Dual(_, m) => Some((m.x_train.clone(), m.y_train.clone())),
        FittedModel::Kernel(_, m) => match (&m.x_basis, &m.y_basis) {
            (Some(xb), Some(yb)) => Some((xb.train.clone(), yb.train.clone())),
            _ => None,
        },
    }
}

/// Writes the reference CSVs of `model` (if it needs any) into `dir` as
/// `<stem>.train-x.csv` and `<stem>.train-y.csv`, returning file names
/// relative to `dir`.
pub fn save_references(dir: &Path, stem: &str, model: &FittedModel) -> Result<Option<ModelRefs>> {
    let Some((x, y)) = reference_views(model) else {
        return Ok(None);
    };
    let refs = ModelRefs {
        x: PathBuf::from(format!("{stem}.train-x.csv")),
        y: PathBuf::from(format!("{stem}.train-y.csv")),
    };
    save_csv(dir.join(&refs.x), &x, None, true)?;
    save_csv(dir.join(&refs.y), &y, None, true)?;
    Ok(Some(refs))
}

pub fn write_model(out: &mut impl Write, model: &FittedModel, refs: Option<&ModelRefs>) -> Result<()> {
    let needs_refs = reference_views(model).is_some();
    let ref_tokens = match (needs_refs, refs) {
        (false, _) => String::new(),
        (true, Some(r)) => format!(" x_ref={} y_ref={}", path_token(&r.x)?, path_token(&r.y)?),
        (true, None) => {
            return Err(Error::InvalidParameter(
                "dual and kernel models need training-view references".into(),
            ))
        }
    };
    let v = model.variant();
    match model {
        FittedModel::Primal(_, m) => {
            writeln!(
                out,
                "{MAGIC} variant={v} dx={} dy={} d={} gamma={} epsilon={} jitter={}",
                m.dx(),
                m.dy(),
                m.d(),
                fmt_f(m.gamma),
                fmt_f(0.0),
                fmt_f(m.jitter)
            )?;
            write_vector(out, "singulars", &m.singulars)?;
            write_vector(out, "x_mean", &m.x_mean)?;
            write_vector(out, "y_mean", &m.y_mean)?;
            write_matrix(out, "u", &m.u)?;
            write_matrix(out, "v", &m.v)?;
        }
        FittedModel::Dual(_, m) => {
            writeln!(
                out,
                "{MAGIC} variant={v} dx={} dy={} n={} d={} gamma={} epsilon={}{ref_tokens}",
                m.x_train.nrows(),
                m.y_train.nrows(),
                m.n(),
                m.d(),
                fmt_f(m.gamma),
                fmt_f(m.epsilon)
            )?;
            write_vector(out, "eigvals", &m.eigvals)?;
            write_vector(out, "x_mean", &m.x_mean)?;
            write_vector(out, "y_mean", &m.y_mean)?;
            write_matrix(out, "a", &m.a)?;
            write_matrix(out, "b", &m.b)?;
        }
        FittedModel::Kernel(_, m) => {
            write!(
                out,
                "{MAGIC} variant={v} n={} d={} gamma={} epsilon={}",
                m.n(),
                m.d(),
                fmt_f(m.gamma),
                fmt_f(m.epsilon)
            )?;
            if let (Some(xb), Some(yb)) = (&m.x_basis, &m.y_basis) {
                write!(
                    out,
                    " dx={} dy={} kernel_x={} kernel_y={} x_grand={} y_grand={}",
                    xb.train.nrows(),
                    yb.train.nrows(),
                    xb.spec,
                    yb.spec,
                    fmt_f(xb.stats.grand_mean),
                    fmt_f(yb.stats.grand_mean)
                )?;
            }
            writeln!(out, "{ref_tokens}")?;
            write_vector(out, "singulars", &m.singulars)?;
            write_matrix(out, "a", &m.a)?;
            write_matrix(out, "b", &m.b)?;
            if let (Some(xb), Some(yb)) = (&m.x_basis, &m.y_basis) {
                write_vector(out, "x_col_means", &xb.stats.col_means)?;
                write_vector(out, "y_col_means", &yb.stats.col_means)?;
            }
        }
    }
    Ok(())
}

/// Writes `model` to `path`, plus its reference CSVs next to it.
pub fn save_model(path: &Path, model: &FittedModel) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidParameter(format!("bad model path {path:?}")))?;
    let refs = save_references(dir, stem, model)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut out, model, refs.as_ref())?;
    out.flush()?;
    Ok(())
}

struct Sections {
    vectors: BTreeMap<String, Vector>,
    matrices: BTreeMap<String, Matrix>,
}

impl Sections {
    fn vector(&mut self, name: &str) -> Result<Vector> {
        self.vectors.remove(name).ok_or_else(|| missing(name))
    }

    fn matrix(&mut self, name: &str) -> Result<Matrix> {
        self.matrices.remove(name).ok_or_else(|| missing(name))
    }
}

fn missing(name: &str) -> Error {
    Error::Format {
        line: 0,
        message: format!("missing section '{name}'"),
    }
}

fn parse_f(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Format {
        line,
        message: format!("'{s}' is not a number"),
    })
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse::<usize>().map_err(|_| Error::Format {
        line,
        message: format!("'{s}' is not a count"),
    })
}

fn next_line(lines: &mut impl Iterator<Item = (usize, String)>, what: &str, after: usize) -> Result<(usize, String)> {
    lines.next().ok_or_else(|| Error::Format {
        line: after + 1,
        message: format!("unexpected end of file in {what}"),
    })
}

fn read_sections(lines: &mut impl Iterator<Item = (usize, String)>) -> Result<Sections> {
    let mut s = Sections {
        vectors: BTreeMap::new(),
        matrices: BTreeMap::new(),
    };
    while let Some((lineno, line)) = lines.next() {
        let head: Vec<&str> = line.split_whitespace().collect();
        match head.as_slice() {
            [] => continue,
            ["vector", name, len] => {
                let len = parse_usize(len, lineno)?;
                let mut v = DVector::zeros(len);
                for i in 0..len {
                    let (ln, text) = next_line(lines, name, lineno + i)?;
                    v[i] = parse_f(&text, ln)?;
                }
                s.vectors.insert(name.to_string(), v);
            }
            ["matrix", name, rows, cols] => {
                let (rows, cols) = (parse_usize(rows, lineno)?, parse_usize(cols, lineno)?);
                let mut m = DMatrix::zeros(rows, cols);
                for i in 0..rows {
                    let (ln, text) = next_line(lines, name, lineno + i)?;
                    let fields: Vec<&str> = if cols == 0 {
                        Vec::new()
                    } else {
                        text.split(',').collect()
                    };
                    if fields.len() != cols {
                        return Err(Error::RaggedRows {
                            line: ln,
                            expected: cols,
                            found: fields.len(),
                        });
                    }
                    for (j, f) in fields.iter().enumerate() {
                        m[(i, j)] = parse_f(f, ln)?;
                    }
                }
                s.matrices.insert(name.to_string(), m);
            }
            _ => {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("expected a section header, found '{line}'"),
                })
            }
        }
    }
    Ok(s)
}

struct Header(BTreeMap<String, String>);

impl Header {
    fn get(&self, key: &str) -> Result<&str> {
        self.0.get(key).map(String::as_str).ok_or_else(|| Error::Format {
            line: 1,
            message: format!("header lacks '{key}'"),
        })
    }

    fn f64(&self, key: &str) -> Result<f64> {
        parse_f(self.get(key)?, 1)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        parse_usize(self.get(key)?, 1)
    }
}

fn check_shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Format {
            line: 0,
            message: format!("section '{name}' is {:?}, expected ({rows}, {cols})", m.shape()),
        });
    }
    Ok(())
}

fn load_ref(base: &Path, rel: &str, rows: usize, cols: usize) -> Result<Matrix> {
    let path = base.join(rel);
    let layout = CsvLayout {
        rows_are_samples: true,
        labels_inline: false,
    };
    let (m, _) = load_csv(&path, layout)?;
    check_shape(rel, &m, rows, cols)?;
    Ok(m)
}

/// Parses a model file; `base_dir` anchors relative reference paths.
pub fn read_model(input: impl BufRead, base_dir: &Path) -> Result<FittedModel> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter();
    let (_, first) = lines.next().ok_or(Error::Format {
        line: 1,
        message: "empty model file".into(),
    })?;
    let mut tokens = first.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(Error::Format {
            line: 1,
            message: format!("missing '{MAGIC}' header"),
        });
    }
    let mut map = BTreeMap::new();
    for t in tokens {
        let (k, v) = t.split_once('=').ok_or_else(|| Error::Format {
            line: 1,
            message: format!("header token '{t}' is not key=value"),
        })?;
        map.insert(k.to_string(), v.to_string());
    }
    let header = Header(map);
    let variant: Variant = header.get("variant")?.parse()?;
    let d = header.usize("d")?;
    let gamma = header.f64("gamma")?;
    let epsilon = header.f64("epsilon")?;
    let mut s = read_sections(&mut lines)?;

    Ok(match variant.family() {
        Family::Primal => {
            let (dx, dy) = (header.usize("dx")?, header.usize("dy")?);
            let u = s.matrix("u")?;
            let v = s.matrix("v")?;
            check_shape("u", &u, dx, d)?;
            check_shape("v", &v, dy, d)?;
            FittedModel::Primal(
                variant,
                GccaModel {
                    u,
                    v,
                    gamma,
                    singulars: s.vector("singulars")?,
                    jitter: header.f64("jitter")?,
                    x_mean: s.vector("x_mean")?,
                    y_mean: s.vector("y_mean")?,
                },
            )
        }
        Family::Dual => {
            let (dx, dy, n) = (header.usize("dx")?, header.usize("dy")?, header.usize("n")?);
            let a = s.matrix("a")?;
            let b = s.matrix("b")?;
            check_shape("a", &a, n, d)?;
            check_shape("b", &b, n, d)?;
            let x_train = load_ref(base_dir, header.get("x_ref")?, dx, n)?;
            let y_train = load_ref(base_dir, header.get("y_ref")?, dy, n)?;
            FittedModel::Dual(
                variant,
                DualModel {
                    a,
                    b,
                    gamma,
                    epsilon,
                    eigvals: s.vector("eigvals")?,
                    x_train,
                    y_train,
                    x_mean: s.vector("x_mean")?,
                    y_mean: s.vector("y_mean")?,
                },
            )
        }
        Family::Kernel => {
            let n = header.usize("n")?;
            let a = s.matrix("a")?;
            let b = s.matrix("b")?;
            check_shape("a", &a, n, d)?;
            check_shape("b", &b, n, d)?;
            let (x_basis, y_basis) = if header.0.contains_key("x_ref") {
                let mut basis = |view: &str| -> Result<KernelBasis> {
                    let spec: MultiKernelSpec = header.get(&format!("kernel_{view}"))?.parse()?;
                    let dim = header.usize(&format!("d{view}"))?;
                    let train = load_ref(base_dir, header.get(&format!("{view}_ref"))?, dim, n)?;
                    Ok(KernelBasis {
                        spec,
                        train,
                        stats: CenteringStats {
                            col_means: s.vector(&format!("{view}_col_means"))?,
                            grand_mean: header.f64(&format!("{view}_grand"))?,
                        },
                    })
                };
                (Some(basis("x")?), Some(basis("y")?))
            } else {
                (None, None)
            };
            FittedModel::Kernel(
                variant,
                KernelModel {
                    a,
                    b,
                    gamma,
                    epsilon,
                    singulars: s.vector("singulars")?,
                    x_basis,
                    y_basis,
                },
            )
        }
    })
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_model(file, path.parent().unwrap_or(Path::new(".")))
}
