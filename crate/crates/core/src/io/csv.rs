use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::{ClassId, Matrix};

/// How a CSV file maps onto the samples-as-columns layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvLayout {
    /// Each line is one sample (transposed on load).
    pub rows_are_samples: bool,
    /// The last field of each sample holds its class label.
    pub labels_inline: bool,
}

/// Reads a numeric CSV. Lines starting with `#` are skipped.
pub fn load_csv(path: impl AsRef<Path>, layout: CsvLayout) -> Result<(Matrix, Option<Vec<ClassId>>)> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, layout)
}

pub fn read_csv(input: impl Read, layout: CsvLayout) -> Result<(Matrix, Option<Vec<ClassId>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows {
                line,
                expected,
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    column: c + 1,
                    message: format!("'{field}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let width = width.unwrap_or(0);
    let table = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    let samples = if layout.rows_are_samples {
        table.transpose()
    } else {
        table
    };
    if !layout.labels_inline {
        return Ok((samples, None));
    }
    if samples.nrows() == 0 {
        return Err(Error::Format {
            line: 1,
            message: "inline labels requested but the file has no fields".into(),
        });
    }
    let last = samples.nrows() - 1;
    let labels = samples
        .row(last)
        .iter()
        .enumerate()
        .map(|(j, &v)| to_label(v).ok_or_else(|| label_error(j, v, layout)))
        .collect::<Result<Vec<ClassId>>>()?;
    Ok((samples.rows(0, last).into_owned(), Some(labels)))
}

fn label_error(sample: usize, value: f64, layout: CsvLayout) -> Error {
    let (line, column) = if layout.rows_are_samples {
        (sample + 1, 0)
    } else {
        (0, sample + 1)
    };
    Error::Parse {
        line,
        column,
        message: format!("label {value} is not a nonnegative integer"),
    }
}

fn to_label(v: f64) -> Option<ClassId> {
    (v >= 0.0 && v.fract() == 0.0 && v <= ClassId::MAX as f64).then_some(v as ClassId)
}

/// Writes `m` (samples as columns) with 17 significant digits, which
/// round-trips every finite value exactly.
pub fn write_csv(out: &mut impl Write, m: &Matrix, labels: Option<&[ClassId]>, rows_are_samples: bool) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != m.ncols() {
            return Err(Error::dims(format!("{} labels for {} samples", l.len(), m.ncols())));
        }
    }
    let table = if rows_are_samples { m.transpose() } else { m.clone() };
    let field = |i: usize, j: usize| format!("{:.16e}", table[(i, j)]);
    if rows_are_samples {
        for i in 0..table.nrows() {
            let mut line: Vec<String> = (0..table.ncols()).map(|j| field(i, j)).collect();
            if let Some(l) = labels {
                line.push(l[i].to_string());
            }
            writeln!(out, "{}", line.join(","))?;
        }
    } else {
        for i in 0..table.nrows() {
            let line: Vec<String> = (0..table.ncols()).map(|j| field(i, j)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        if let Some(l) = labels {
            let line: Vec<String> = l.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
    }
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, m: &Matrix, labels: Option<&[ClassId]>, rows_are_samples: bool) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    write_csv(&mut out, m, labels, rows_are_samples)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLES: CsvLayout = CsvLayout {
        rows_are_samples: true,
        labels_inline: false,
    };

    #[test]
    fn rows_are_samples_transposes() {
        let (m, l) = read_csv("1,2\n3,4\n".as_bytes(), SAMPLES).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]));
        assert!(l.is_none());
        let (m, _) = read_csv("1,2\n3,4\n".as_bytes(), CsvLayout::default()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn inline_labels() {
        let layout = CsvLayout {
            rows_are_samples: true,
            labels_inline: true,
        };
        let (m, l) = read_csv("# comment\n0.5,1,2\n0.25,3,7\n".as_bytes(), layout).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(l.unwrap(), vec![2, 7]);
        assert!(read_csv("1,2.5\n".as_bytes(), layout).is_err());
    }

    #[test]
    fn errors_carry_positions() {
        match read_csv("1,2\n3,x\n".as_bytes(), SAMPLES) {
            Err(Error::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_csv("1,2\n3\n".as_bytes(), SAMPLES),
            Err(Error::RaggedRows {
                line: 2,
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn roundtrip_is_exact() {
        let m = DMatrix::from_fn(3, 4, |i, j| ((i * 7 + j) as f64).sin() / 3.0 * 10f64.powi(j as i32 - 2));
        for rows in [true, false] {
            let mut buf = Vec::new();
            write_csv(&mut buf, &m, Some(&[1, 2, 3, 4]), rows).unwrap();
            let layout = CsvLayout {
                rows_are_samples: rows,
                labels_inline: true,
            };
            let (back, l) = read_csv(buf.as_slice(), layout).unwrap();
            assert_eq!(back, m);
            assert_eq!(l.unwrap(), vec![1, 2, 3, 4]);
        }
    }
}
