use std::io::Write;

use super::grid::{mean_std, McResult};
use crate::error::Result;

/// Line-delimited `key=value` report: one `cell` record per (run, cell), one
/// `run` record per run, and a closing `summary` record.
///
/// Runtimes are omitted unless `with_runtime` is set, so output is a pure
/// function of the inputs.
pub fn write_report(out: &mut impl Write, result: &McResult, with_runtime: bool) -> Result<()> {
    let variant = result.variant;
    for run in &result.runs {
        for (i, c) in run.cells.iter().enumerate() {
            writeln!(
                out,
                "record=cell variant={variant} run={} cell={i} gamma={:e} epsilon={:e} tune_acc={} test_acc={} selected={}",
                run.run,
                c.gamma,
                c.epsilon,
                c.tune_acc,
                c.test_acc,
                i == run.selected
            )?;
        }
        let r = &run.report;
        write!(
            out,
            "record=run variant={variant} run={} d={} gamma={:e} epsilon={:e} tune_acc={} test_acc={}",
            run.run, r.d, r.chosen_gamma, r.chosen_epsilon, r.tune_accuracy, r.accuracy
        )?;
        for (class, acc) in &r.per_class_accuracy {
            write!(out, " class_{class}={acc}")?;
        }
        if with_runtime {
            write!(out, " runtime={:.6}", r.runtime)?;
        }
        writeln!(out)?;
    }
    let (mean, std) = mean_std(&result.accuracies());
    writeln!(
        out,
        "record=summary variant={variant} runs={} mean_acc={mean} std_acc={std}",
        result.runs.len()
    )?;
    Ok(())
}

/// One point of an accuracy-versus-training-size curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n_train: usize,
    pub mean_acc: f64,
    pub std_acc: f64,
}

/// CSV with header `n_train,mean_acc,std_acc`.
pub fn write_curve(out: &mut impl Write, points: &[CurvePoint]) -> Result<()> {
    writeln!(out, "n_train,mean_acc,std_acc")?;
    for p in points {
        writeln!(out, "{},{},{}", p.n_train, p.mean_acc, p.std_acc)?;
    }
    Ok(())
}
