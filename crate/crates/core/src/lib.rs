//! Graph-regularized canonical correlation analysis.
//!
//! Primal, dual and kernel solvers for CCA with a source-similarity graph
//! penalty, plus the evaluation pipeline used to tune and compare them.
//!
//! Views are stored with samples as columns: `X` is Dx×N, `Y` is Dy×N.

pub mod cca;
pub mod dual;
pub mod error;
pub mod graph;
pub mod io;
pub mod kernel;
pub mod matkit;
pub mod model;
pub mod pipeline;
mod spectral;
pub mod synth;

pub use error::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
pub type ClassId = u32;
