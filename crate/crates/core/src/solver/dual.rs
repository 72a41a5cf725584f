//! Lagrange-dual gradient projection for `min ‖x̄‖² s.t. Qx̄ − b ⪯ 0`.
//!
//! The dual function is `g(λ) = −¼ λᵀQQᵀλ − λᵀb` with gradient
//! `−½ QQᵀλ − b`, maximized over `λ ⪰ 0` by projected ascent with an
//! Armijo backtracking step. The primal point is recovered as
//! `x̄ = −½ Qᵀλ`.

use nalgebra::{DMatrix, DVector};

use super::{SolveStatus, SolverResult};
use crate::error::{Error, Result};

/// A concave function maximized over the nonnegative orthant.
pub trait ConcaveObjective {
    fn value(&self, lambda: &DVector<f64>) -> f64;
    fn gradient(&self, lambda: &DVector<f64>) -> DVector<f64>;
}

/// Dual of the polyhedral minimum-norm program.
#[derive(Debug, Clone)]
pub struct DualProblem {
    q: DMatrix<f64>,
    b: DVector<f64>,
    gram: DMatrix<f64>,
}

impl DualProblem {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if q.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "Q has {} rows but b has {} entries",
                q.nrows(),
                b.len()
            )));
        }
        let gram = &q * q.transpose();
        Ok(Self { q, b, gram })
    }

    /// Equivalent problem with every row of `Q` scaled to unit norm.
    ///
    /// The primal feasible set and `x̄(λ)` are unchanged; multipliers map
    /// back as `λᵢ = λ̃ᵢ / ‖qᵢ‖`. Zero rows are left as they are.
    pub fn row_normalized(&self) -> Result<(DualProblem, DVector<f64>)> {
        let norms = DVector::from_fn(self.q.nrows(), |i, _| {
            let n = self.q.row(i).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        });
        let mut q = self.q.clone();
        let mut b = self.b.clone();
        for i in 0..q.nrows() {
            q.row_mut(i).scale_mut(1.0 / norms[i]);
            b[i] /= norms[i];
        }
        Ok((DualProblem::new(q, b)?, norms))
    }

    pub fn constraint_count(&self) -> usize {
        self.b.len()
    }

    /// `x̄(λ) = −½ Qᵀλ`.
    pub fn primal(&self, lambda: &DVector<f64>) -> DVector<f64> {
        self.q.tr_mul(lambda) * -0.5
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }
}

impl ConcaveObjective for DualProblem {
    fn value(&self, lambda: &DVector<f64>) -> f64 {
        -0.25 * lambda.dot(&(&self.gram * lambda)) - lambda.dot(&self.b)
    }

    fn gradient(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.gram * lambda * -0.5 - &self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub initial_step: f64,
    pub delta: f64,
    pub shrink: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            delta: 0.1,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearch {
    pub step: f64,
    /// `max{λ + t∇g(λ), 0}` at the accepted step.
    pub next: DVector<f64>,
    pub next_value: f64,
    /// Step fell below 1e-16 before the Armijo test passed.
    pub underflow: bool,
}

fn project(lambda: &DVector<f64>, grad: &DVector<f64>, step: f64) -> DVector<f64> {
    lambda.zip_map(grad, |l, g| (l + step * g).max(0.0))
}

/// Projected Armijo backtracking: shrink `t` from `initial_step` until
/// `g(λ⁺) ≥ g(λ) + δ ∇g(λ)ᵀ(λ⁺ − λ)`.
pub fn backtracking_line_search<F: ConcaveObjective + ?Sized>(
    f: &F,
    lambda: &DVector<f64>,
    grad: &DVector<f64>,
    value: f64,
    params: &LineSearchParams,
) -> LineSearch {
    let mut t = params.initial_step;
    loop {
        let next = project(lambda, grad, t);
        let next_value = f.value(&next);
        let predicted = value + params.delta * grad.dot(&(&next - lambda));
        if next_value >= predicted {
            return LineSearch {
                step: t,
                next,
                next_value,
                underflow: false,
            };
        }
        t *= params.shrink;
        if t < 1e-16 {
            return LineSearch {
                step: t,
                next_value: value,
                next: lambda.clone(),
                underflow: true,
            };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSettings {
    /// Stop once the dual gain per iteration is at most this value...
    pub eps: f64,
    /// ...and the projected dual gradient (primal violation) is this small.
    pub gradient_tol: f64,
    /// Projected-gradient level still reported as optimal when the
    /// iteration cap is reached first.
    pub accept_tol: f64,
    pub max_iter: usize,
    /// `‖λ‖` above this bound certifies primal infeasibility.
    pub divergence_bound: f64,
    pub line_search: LineSearchParams,
}

impl Default for DualSettings {
    fn default() -> Self {
        Self {
            eps: 1e-8,
            gradient_tol: super::FEAS_TOL,
            accept_tol: 1e-4,
            max_iter: 5000,
            divergence_bound: 1e8,
            line_search: LineSearchParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualOutcome {
    pub result: SolverResult,
    pub lambda: DVector<f64>,
    /// Dual value after every iteration, starting with `g(λ0)`.
    pub dual_values: Vec<f64>,
}

/// Projected-gradient norm: components pushing `λ` below zero are dropped.
fn projected_gradient_norm(lambda: &DVector<f64>, grad: &DVector<f64>) -> f64 {
    lambda
        .iter()
        .zip(grad.iter())
        .map(|(&l, &g)| if l > 0.0 { g.abs() } else { g.max(0.0) })
        .fold(0.0, f64::max)
}

/// Gradient projection ascent on the dual, from `lambda0 ⪰ 0`.
pub fn dual_gradient_projection(
    problem: &DualProblem,
    lambda0: &DVector<f64>,
    settings: &DualSettings,
) -> Result<DualOutcome> {
    if lambda0.len() != problem.constraint_count() {
        return Err(Error::Dimension("lambda0 length differs from row count".into()));
    }
    if lambda0.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::Argument("lambda0 must be elementwise nonnegative".into()));
    }
    if !(settings.eps > 0.0) {
        return Err(Error::Argument("eps must be positive".into()));
    }

    let mut lambda = lambda0.clone();
    let mut value = problem.value(&lambda);
    let mut grad = problem.gradient(&lambda);
    let mut dual_values = vec![value];
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < settings.max_iter {
        iterations += 1;
        let ls = backtracking_line_search(problem, &lambda, &grad, value, &settings.line_search);
        let gain = ls.next_value - value;
        lambda = ls.next;
        value = ls.next_value;
        grad = problem.gradient(&lambda);
        dual_values.push(value);

        if lambda.norm() > settings.divergence_bound {
            status = SolveStatus::Infeasible;
            break;
        }
        let pg = projected_gradient_norm(&lambda, &grad);
        if ls.underflow {
            if pg <= settings.gradient_tol {
                status = SolveStatus::Optimal;
            }
            break;
        }
        if gain <= settings.eps && pg <= settings.gradient_tol {
            status = SolveStatus::Optimal;
            break;
        }
    }

    let pg = projected_gradient_norm(&lambda, &grad);
    if status == SolveStatus::MaxIterations && pg <= settings.accept_tol {
        status = SolveStatus::Optimal;
    }
    let x = problem.primal(&lambda);
    let objective = x.norm_squared();
    let kkt_residual = pg.max((objective - value).abs());
    Ok(DualOutcome {
        result: SolverResult {
            x,
            objective,
            status,
            kkt_residual,
            iterations,
        },
        lambda,
        dual_values,
    })
}
