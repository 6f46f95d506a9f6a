//! Variant tags and a common handle over fitted models of every family.

use std::fmt;
use std::str::FromStr;

use crate::cca::GccaModel;
use crate::dual::DualModel;
use crate::error::{Error, Result};
use crate::kernel::KernelModel;
use crate::Matrix;

/// Solver variants. `Dcca` and `Kcca` are the `γ = 0` ablations of the
/// graph-regularized dual and kernel solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Cca,
    Gcca,
    Dcca,
    Gdcca,
    Kcca,
    Gkcca,
}

/// Solver family a variant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Primal,
    Dual,
    Kernel,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Cca,
        Variant::Gcca,
        Variant::Dcca,
        Variant::Gdcca,
        Variant::Kcca,
        Variant::Gkcca,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Cca => "cca",
            Variant::Gcca => "gcca",
            Variant::Dcca => "dcca",
            Variant::Gdcca => "gdcca",
            Variant::Kcca => "kcca",
            Variant::Gkcca => "gkcca",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Variant::Cca | Variant::Gcca => Family::Primal,
            Variant::Dcca | Variant::Gdcca => Family::Dual,
            Variant::Kcca | Variant::Gkcca => Family::Kernel,
        }
    }

    /// Whether the variant uses a source graph and tunes `γ`.
    pub fn uses_graph(self) -> bool {
        matches!(self, Variant::Gcca | Variant::Gdcca | Variant::Gkcca)
    }

    /// Whether the variant tunes the Tikhonov parameter `ε`.
    pub fn uses_epsilon(self) -> bool {
        self.family() != Family::Primal
    }

    /// The graph-free counterpart.
    pub fn ablation(self) -> Variant {
        match self {
            Variant::Gcca => Variant::Cca,
            Variant::Gdcca => Variant::Dcca,
            Variant::Gkcca => Variant::Kcca,
            other => other,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Variant::ALL
            .into_iter()
            .find(|v| v.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variant '{s}'")))
    }
}

/// A fitted model of any family, tagged with the variant that produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Primal(Variant, GccaModel),
    Dual(Variant, DualModel),
    Kernel(Variant, KernelModel),
}

impl FittedModel {
    pub fn variant(&self) -> Variant {
        match self {
            FittedModel::Primal(v, _) | FittedModel::Dual(v, _) | FittedModel::Kernel(v, _) => *v,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            FittedModel::Primal(_, m) => m.d(),
            FittedModel::Dual(_, m) => m.d(),
            FittedModel::Kernel(_, m) => m.d(),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            FittedModel::Primal(_, m) => m.gamma,
            FittedModel::Dual(_, m) => m.gamma,
            FittedModel::Kernel(_, m) => m.gamma,
        }
    }

    /// `ε` of dual and kernel models, 0 for primal ones.
    pub fn epsilon(&self) -> f64 {
        match self {
            FittedModel::Primal(..) => 0.0,
            FittedModel::Dual(_, m) => m.epsilon,
            FittedModel::Kernel(_, m) => m.epsilon,
        }
    }

    /// Embeds X-view samples (raw, D×M) into d×M.
    pub fn project_x(&self, x_new: &Matrix) -> Result<Matrix> {
        match self {
            FittedModel::Primal(_, m) => m.project_x(x_new),
            FittedModel::Dual(_, m) => m.project_x(x_new),
            FittedModel::Kernel(_, m) => m.project_kernel_x(x_new),
        }
    }

    pub fn project_y(&self, y_new: &Matrix) -> Result<Matrix> {
        match self {
            FittedModel::Primal(_, m) => m.project_y(y_new),
            FittedModel::Dual(_, m) => m.project_y(y_new),
            FittedModel::Kernel(_, m) => m.project_kernel_y(y_new),
        }
    }

    /// Coefficients applied to X-view features: `U` for primal models, `A`
    /// otherwise.
    pub fn x_coefficients(&self) -> &Matrix {
        match self {
            FittedModel::Primal(_, m) => &m.u,
            FittedModel::Dual(_, m) => &m.a,
            FittedModel::Kernel(_, m) => &m.a,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(v.tag().parse::<Variant>().unwrap(), v);
            assert!(!v.ablation().uses_graph());
        }
        assert!("pca".parse::<Variant>().is_err());
        assert_eq!(Variant::Gkcca.ablation(), Variant::Kcca);
    }
}
