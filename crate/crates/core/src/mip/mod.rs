//! Integer programs, exact backends and the multicommodity flow model.
//!
//! Backends implement [`MipBackend`]. The bundled [`BranchAndBound`]
//! backend needs nothing beyond this crate; [`HighsBackend`] (feature
//! `highs`) delegates to the HiGHS solver and is much faster on the larger
//! flow models.

mod bnb;
#[cfg(feature = "highs")]
mod highs;
mod model;
mod tolerance;

pub use bnb::BranchAndBound;
#[cfg(feature = "highs")]
pub use self::highs::HighsBackend;
pub use model::{build_model, solve_model, FlowModel, FlowSolution, ModelError};
pub use tolerance::{next_tolerance, ToleranceState};

use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

/// Smallest gap a backend is asked to close; below this, values are noise.
pub const GAP_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min c'x` subject to linear rows, `0 <= x <= upper` and integrality markers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntegerProgram {
    pub objective: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub rows: Vec<Row>,
}

impl IntegerProgram {
    pub fn add_column(&mut self, cost: f64, upper: f64, integer: bool) -> usize {
        self.objective.push(cost);
        self.upper.push(upper);
        self.integer.push(integer);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row { coeffs, sense, rhs });
    }

    pub fn num_columns(&self) -> usize {
        self.objective.len()
    }

    /// True when every feasible objective value is an integer.
    pub fn has_integral_objective(&self) -> bool {
        self.objective
            .iter()
            .zip(&self.integer)
            .all(|(&c, &int)| if int { c.fract() == 0.0 } else { c == 0.0 })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest absolute violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(-v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum Tolerance {
    Relative(f64),
    Absolute(f64),
}

impl Tolerance {
    pub const EXACT: Tolerance = Tolerance::Absolute(0.0);

    /// Gap the backend may leave open around an incumbent of value `incumbent`.
    pub fn allowed_gap(&self, incumbent: f64) -> f64 {
        match *self {
            Tolerance::Relative(r) => (r * incumbent.abs()).max(GAP_FLOOR),
            Tolerance::Absolute(a) => a.max(GAP_FLOOR),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveParams {
    pub tolerance: Tolerance,
    pub time_limit: Option<Duration>,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { tolerance: Tolerance::EXACT, time_limit: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleWithinTolerance,
    Infeasible,
    TimeLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpSolution {
    pub status: SolveStatus,
    /// Column values; empty when no feasible point was found.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Valid lower bound on the program optimum.
    pub dual_bound: f64,
}

impl IpSolution {
    pub fn has_solution(&self) -> bool {
        match self.status {
            SolveStatus::Optimal | SolveStatus::FeasibleWithinTolerance => true,
            SolveStatus::TimeLimit => !self.values.is_empty(),
            SolveStatus::Infeasible => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum MipError {
    #[error("program is unbounded")]
    Unbounded,
    #[error("backend failure: {0}")]
    Backend(String),
}

/// An exact integer-programming solver.
pub trait MipBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, program: &IntegerProgram, params: &SolveParams) -> Result<IpSolution, MipError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    BranchAndBound,
    Highs,
}

impl BackendKind {
    pub fn default_kind() -> Self {
        if cfg!(feature = "highs") {
            BackendKind::Highs
        } else {
            BackendKind::BranchAndBound
        }
    }

    pub fn create(self) -> Result<Box<dyn MipBackend>, MipError> {
        match self {
            BackendKind::BranchAndBound => Ok(Box::new(BranchAndBound::default())),
            #[cfg(feature = "highs")]
            BackendKind::Highs => Ok(Box::new(HighsBackend::default())),
            #[cfg(not(feature = "highs"))]
            BackendKind::Highs => Err(MipError::Backend("built without the `highs` feature".into())),
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bnb" | "branch-and-bound" => Ok(BackendKind::BranchAndBound),
            "highs" => Ok(BackendKind::Highs),
            other => Err(format!("unknown backend `{other}`")),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::BranchAndBound => "branch-and-bound",
            BackendKind::Highs => "highs",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allowed_gap_has_a_floor() {
        assert_eq!(Tolerance::Absolute(0.0).allowed_gap(100.0), GAP_FLOOR);
        assert_eq!(Tolerance::Relative(0.01).allowed_gap(1000.0), 10.0);
    }

    #[test]
    fn integral_objective_detection() {
        let mut ip = IntegerProgram::default();
        ip.add_column(3.0, f64::INFINITY, true);
        ip.add_column(0.0, 1.0, false);
        assert!(ip.has_integral_objective());
        ip.add_column(0.5, 1.0, true);
        assert!(!ip.has_integral_objective());
    }
}
