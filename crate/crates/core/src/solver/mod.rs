//! Small dense convex engines for minimum-norm programs.
//!
//! Every program here has the objective `‖x̄‖²`. [`solve_min_norm`] is a
//! log-barrier interior-point method handling linear inequalities, linear
//! equalities and at most one quadratic cone block. The purely polyhedral
//! case can also be solved through the Lagrange dual with
//! [`dual_gradient_projection`], and the non-convex norm-floor variant is
//! handled by sequential convex programming in [`scp`].

mod dual;
mod ipm;
pub mod scp;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use dual::{
    backtracking_line_search, dual_gradient_projection, ConcaveObjective, DualOutcome,
    DualProblem, DualSettings, LineSearch, LineSearchParams,
};
pub use ipm::{solve_min_norm, solve_min_norm_with, IpmSettings};
pub use scp::{feasible_init_norm_floor, scp_minimize_with_norm_floor, ScpOutcome, ScpSettings};

/// Absolute feasibility tolerance used when auditing solutions.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SolverResult {
    pub(crate) fn failed(dim: usize, status: SolveStatus, iterations: usize) -> Self {
        Self {
            x: DVector::zeros(dim),
            objective: f64::NAN,
            status,
            kkt_residual: f64::INFINITY,
            iterations,
        }
    }
}

/// `‖C x̄‖ ≤ r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub rows: DMatrix<f64>,
    pub radius: f64,
}

/// `min ‖x̄‖²` subject to `G x̄ ≤ h`, `E x̄ = f` and an optional cone block.
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormProgram {
    dim: usize,
    ineq_rows: Vec<DVector<f64>>,
    ineq_rhs: Vec<f64>,
    eq_rows: Vec<DVector<f64>>,
    eq_rhs: Vec<f64>,
    cone: Option<ConeBlock>,
}

impl MinNormProgram {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            cone: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_row(&self, row: &DVector<f64>, rhs: f64) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Dimension(format!(
                "row of length {} for a program of dimension {}",
                row.len(),
                self.dim
            )));
        }
        if !rhs.is_finite() || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("constraint data must be finite".into()));
        }
        Ok(())
    }

    /// `rowᵀx̄ ≤ rhs`.
    pub fn add_inequality(&mut self, row: DVector<f64>, rhs: f64) -> Result<&mut Self> {
        self.check_row(&row, rhs)?;
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
        Ok(self)
    }

    /// `rowᵀx̄ ≥ rhs`.
    pub fn add_lower_bound(&mut self, row: DVector<f64>, rhs: f64) -> Result<&mut Self> {
        self.add_inequality(-row, -rhs)
    }

    /// `rowᵀx̄ = rhs`.
    pub fn add_equality(&mut self, row: DVector<f64>, rhs: f64) -> Result<&mut Self> {
        self.check_row(&row, rhs)?;
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        Ok(self)
    }

    pub fn set_cone(&mut self, rows: DMatrix<f64>, radius: f64) -> Result<&mut Self> {
        if rows.ncols() != self.dim {
            return Err(Error::Dimension(format!(
                "cone block has {} columns, expected {}",
                rows.ncols(),
                self.dim
            )));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Argument(format!("cone radius {radius} must be >= 0")));
        }
        self.cone = Some(ConeBlock { rows, radius });
        Ok(self)
    }

    pub fn inequality_count(&self) -> usize {
        self.ineq_rows.len()
    }

    pub fn equality_count(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn cone(&self) -> Option<&ConeBlock> {
        self.cone.as_ref()
    }

    fn stack(rows: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows.len(), dim);
        for (i, r) in rows.iter().enumerate() {
            m.set_row(i, &r.transpose());
        }
        m
    }

    /// Inequality rows stacked into `G`.
    pub fn inequality_matrix(&self) -> DMatrix<f64> {
        Self::stack(&self.ineq_rows, self.dim)
    }

    pub fn inequality_rhs(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.ineq_rhs)
    }

    pub fn equality_matrix(&self) -> DMatrix<f64> {
        Self::stack(&self.eq_rows, self.dim)
    }

    pub fn equality_rhs(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.eq_rhs)
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        for (r, h) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            v = v.max(r.dot(x) - h);
        }
        for (r, f) in self.eq_rows.iter().zip(&self.eq_rhs) {
            v = v.max((r.dot(x) - f).abs());
        }
        if let Some(c) = &self.cone {
            v = v.max((&c.rows * x).norm() - c.radius);
        }
        v
    }
}
