//! Dense log-barrier interior-point method for minimum-norm programs.
//!
//! Phase 1 minimizes a common violation bound `s` over all inequality and
//! cone constraints (equalities are kept exact) until a strictly feasible
//! point appears. Phase 2 follows the central path of
//! `t‖x‖² − Σ ln(h_i − g_iᵀx) − ln(r² − ‖Cx‖²)` with Newton centering,
//! multiplying `t` by the barrier factor until `m/t` is below tolerance.

use nalgebra::{DMatrix, DVector};

use super::{MinNormProgram, SolveStatus, SolverResult};
use crate::error::{Error, Result};

/// Phase 1 reports infeasibility only once no strictly feasible point with
/// `‖x‖² ≤ CERTIFIED_REACH · reach` can exist.
const CERTIFIED_REACH: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    /// Relative duality-measure target: `m/t ≤ tol·(1 + ‖x‖²)`.
    pub tol: f64,
    /// Phase-1 violation above which the program is declared infeasible.
    pub feas_tol: f64,
    pub barrier_factor: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            feas_tol: super::FEAS_TOL,
            barrier_factor: 10.0,
            max_outer: 200,
            max_newton: 100,
        }
    }
}

/// Solve `p` to relative duality measure `tol`.
pub fn solve_min_norm(p: &MinNormProgram, tol: f64) -> Result<SolverResult> {
    solve_min_norm_with(
        p,
        &IpmSettings {
            tol,
            ..IpmSettings::default()
        },
        None,
    )
}

/// Like [`solve_min_norm`], optionally starting phase 1 from `start`
/// instead of the minimum-norm solution of the equality block.
pub fn solve_min_norm_with(
    p: &MinNormProgram,
    settings: &IpmSettings,
    start: Option<&DVector<f64>>,
) -> Result<SolverResult> {
    if !(settings.tol > 0.0) || !(settings.feas_tol > 0.0) || !(settings.barrier_factor > 1.0) {
        return Err(Error::Argument("solver tolerances must be positive".into()));
    }
    if let Some(s) = start {
        if s.len() != p.dim() {
            return Err(Error::Dimension("start point has wrong length".into()));
        }
    }
    let data = Data::new(p);
    Ok(data.solve(settings, start))
}

struct Data {
    d: usize,
    g: DMatrix<f64>,
    h: DVector<f64>,
    e: DMatrix<f64>,
    f: DVector<f64>,
    /// `(CᵀC, r²)`
    cone: Option<(DMatrix<f64>, f64)>,
    /// Orthonormal basis of `ker E` (identity without equalities).
    null: DMatrix<f64>,
    /// Weight of the phase-1 proximal term `w‖x‖²`, which keeps the
    /// phase-1 central path bounded when the feasible set is.
    prox: f64,
    /// `1 + Σ` squared distances from the origin to each constraint boundary.
    reach: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Feasibility,
    Optimize,
}

struct Slacks {
    lin: DVector<f64>,
    cone: f64,
}

impl Data {
    fn new(p: &MinNormProgram) -> Self {
        let g = p.inequality_matrix();
        let cone = p.cone().map(|c| (c.rows.transpose() * &c.rows, c.radius * c.radius));
        let null = null_space(&p.equality_matrix(), p.dim());
        // squared distances from the origin to each constraint boundary
        let h = p.inequality_rhs();
        let mut reach = 1.0;
        for (i, hi) in h.iter().enumerate() {
            let gn = g.row(i).norm();
            if gn > 0.0 {
                reach += (hi / gn).powi(2);
            }
        }
        let e = p.equality_matrix();
        for (i, fi) in p.equality_rhs().iter().enumerate() {
            let en = e.row(i).norm();
            if en > 0.0 {
                reach += (fi / en).powi(2);
            }
        }
        Self {
            d: p.dim(),
            g,
            h,
            e,
            f: p.equality_rhs(),
            cone,
            null,
            prox: 1e-2 / reach,
            reach,
        }
    }

    fn barrier_terms(&self) -> usize {
        self.g.nrows() + usize::from(self.cone.is_some())
    }

    fn n(&self, phase: Phase) -> usize {
        match phase {
            Phase::Feasibility => self.d + 1,
            Phase::Optimize => self.d,
        }
    }

    fn s_of(&self, y: &DVector<f64>, phase: Phase) -> f64 {
        match phase {
            Phase::Feasibility => y[self.d],
            Phase::Optimize => 0.0,
        }
    }

    /// Slacks of all barrier constraints, `None` if any is non-positive.
    fn slacks(&self, y: &DVector<f64>, phase: Phase) -> Option<Slacks> {
        let x = y.rows(0, self.d);
        let s = self.s_of(y, phase);
        let mut lin = &self.h - &self.g * x;
        lin.add_scalar_mut(s);
        if lin.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let cone = match &self.cone {
            Some((ctc, r2)) => {
                let u = r2 + s - x.dot(&(ctc * x));
                if !(u > 0.0) {
                    return None;
                }
                u
            }
            None => f64::INFINITY,
        };
        Some(Slacks { lin, cone })
    }

    fn objective(&self, y: &DVector<f64>, phase: Phase) -> f64 {
        match phase {
            Phase::Feasibility => y[self.d],
            Phase::Optimize => y.norm_squared(),
        }
    }

    fn barrier_value(&self, y: &DVector<f64>, t: f64, phase: Phase) -> Option<f64> {
        let sl = self.slacks(y, phase)?;
        let mut v = t * self.objective(y, phase) - sl.lin.iter().map(|s| s.ln()).sum::<f64>();
        if phase == Phase::Feasibility {
            v += self.prox * y.rows(0, self.d).norm_squared();
        }
        if self.cone.is_some() {
            v -= sl.cone.ln();
        }
        Some(v)
    }

    /// Gradient and Hessian of the barrier objective at a strictly feasible `y`.
    fn derivatives(
        &self,
        y: &DVector<f64>,
        sl: &Slacks,
        t: f64,
        phase: Phase,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n(phase);
        let d = self.d;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        match phase {
            Phase::Optimize => {
                grad.copy_from(&(y * (2.0 * t)));
                hess.fill_diagonal(2.0 * t);
            }
            Phase::Feasibility => {
                grad[d] = t;
                grad.rows_mut(0, d).axpy(2.0 * self.prox, &y.rows(0, d), 0.0);
                hess.view_mut((0, 0), (d, d)).fill_diagonal(2.0 * self.prox);
            }
        }

        // rows of ∇φ_i scaled by 1/σ_i
        let m = self.g.nrows();
        if m > 0 {
            let mut a = DMatrix::zeros(m, n);
            a.view_mut((0, 0), (m, d)).copy_from(&self.g);
            if phase == Phase::Feasibility {
                a.column_mut(d).fill(-1.0);
            }
            for i in 0..m {
                let inv = 1.0 / sl.lin[i];
                a.row_mut(i).scale_mut(inv);
            }
            grad += a.row_sum().transpose();
            hess += a.transpose() * &a;
        }

        if let Some((ctc, _)) = &self.cone {
            let x = y.rows(0, d);
            let u = sl.cone;
            let mut dphi = DVector::zeros(n);
            dphi.rows_mut(0, d).copy_from(&(ctc * x * 2.0));
            if phase == Phase::Feasibility {
                dphi[d] = -1.0;
            }
            grad.axpy(1.0 / u, &dphi, 1.0);
            let mut hv = hess.view_mut((0, 0), (d, d));
            hv += ctc * (2.0 / u);
            hess.ger(1.0 / (u * u), &dphi, &dphi, 1.0);
        }
        (grad, hess)
    }

    /// Newton direction restricted to `ker E`, so iterates stay on the
    /// equality manifold.
    fn newton_step(
        &self,
        grad: &DVector<f64>,
        hess: &DMatrix<f64>,
        phase: Phase,
    ) -> Option<DVector<f64>> {
        let n = grad.len();
        let basis = &self.null;
        let k = basis.ncols();
        let nz = n - self.d + k;
        let mut z = DMatrix::zeros(n, nz);
        z.view_mut((0, 0), (self.d, k)).copy_from(basis);
        if phase == Phase::Feasibility {
            z[(self.d, k)] = 1.0;
        }
        let h = z.tr_mul(&(hess * &z));
        let rhs = -z.tr_mul(grad);
        let dz = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                // phase 1 can be unbounded along a direction of zero curvature
                let mut h = h;
                let shift = 1e-10 * (1.0 + h.diagonal().amax());
                for i in 0..nz {
                    h[(i, i)] += shift;
                }
                h.lu().solve(&rhs)?
            }
        };
        Some(z * dz)
    }

    /// Largest `α ≤ 1` keeping linear slacks positive (scaled by 0.99).
    fn max_step(&self, sl: &Slacks, dy: &DVector<f64>, phase: Phase) -> f64 {
        let dx = dy.rows(0, self.d);
        let ds = self.s_of(dy, phase);
        let mut alpha: f64 = 1.0;
        for i in 0..self.g.nrows() {
            let rate = self.g.row(i).transpose().dot(&dx) - ds;
            if rate > 0.0 {
                alpha = alpha.min(0.99 * sl.lin[i] / rate);
            }
        }
        alpha
    }

    /// Centering at fixed `t`; returns Newton iterations, the last
    /// stationarity estimate and whether the Newton decrement converged.
    /// With `floor` set (phase 1 only), stops as soon as `s < 0` and never
    /// steps below `s = floor`.
    fn center(
        &self,
        y: &mut DVector<f64>,
        t: f64,
        phase: Phase,
        settings: &IpmSettings,
        floor: Option<f64>,
    ) -> (usize, f64, bool) {
        let mut residual = f64::INFINITY;
        for it in 0..settings.max_newton {
            let Some(sl) = self.slacks(y, phase) else {
                return (it, residual, false);
            };
            let (grad, hess) = self.derivatives(y, &sl, t, phase);
            let Some(dy) = self.newton_step(&grad, &hess, phase) else {
                return (it, residual, false);
            };
            let dec2 = -grad.dot(&dy);
            residual = (&hess * &dy).norm() / t;
            if !dec2.is_finite() {
                return (it, residual, false);
            }
            if dec2 * 0.5 <= 1e-12 {
                return (it, residual, true);
            }

            let mut alpha = self.max_step(&sl, &dy, phase);
            if let (Some(floor), Phase::Feasibility) = (floor, phase) {
                // do not overshoot along directions where s is unbounded
                let ds = dy[self.d];
                if ds < 0.0 {
                    alpha = alpha.min((y[self.d] - floor) / -ds);
                }
            }
            let f0 = self.barrier_value(y, t, phase).unwrap_or(f64::INFINITY);
            let slope = grad.dot(&dy);
            let negligible = 1e-15 * (1.0 + y.amax());
            let mut accepted = false;
            while alpha * dy.amax() > negligible {
                let cand = &*y + &dy * alpha;
                if let Some(fv) = self.barrier_value(&cand, t, phase) {
                    if fv <= f0 + 0.01 * alpha * slope {
                        *y = cand;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // no progress possible at this precision
                return (it + 1, residual, true);
            }
            if floor.is_some() && y[self.d] < 0.0 {
                return (it + 1, residual, true);
            }
        }
        (settings.max_newton, residual, false)
    }

    fn solve(&self, settings: &IpmSettings, start: Option<&DVector<f64>>) -> SolverResult {
        let d = self.d;
        let p = self.e.nrows();
        let mut iterations = 0;

        // start on the equality manifold
        let x0 = match start {
            Some(s) if p == 0 => s.clone(),
            Some(s) => {
                // project start onto {Ex = f}
                let r = &self.e * s - &self.f;
                match self.e.clone().svd(true, true).solve(&r, 1e-12) {
                    Ok(corr) => s - corr,
                    Err(_) => return SolverResult::failed(d, SolveStatus::Infeasible, 0),
                }
            }
            None if p == 0 => DVector::zeros(d),
            None => match self.e.clone().svd(true, true).solve(&self.f, 1e-12) {
                Ok(x) => x,
                Err(_) => return SolverResult::failed(d, SolveStatus::Infeasible, 0),
            },
        };
        let eq_scale = 1.0 + self.f.amax();
        if p > 0 && (&self.e * &x0 - &self.f).amax() > settings.feas_tol * eq_scale {
            return SolverResult::failed(d, SolveStatus::Infeasible, 0);
        }

        let m = self.barrier_terms();
        if m == 0 {
            // equality-constrained minimum norm is the pseudo-inverse solution
            let obj = x0.norm_squared();
            return SolverResult {
                x: x0,
                objective: obj,
                status: SolveStatus::Optimal,
                kkt_residual: 0.0,
                iterations: 1,
            };
        }

        let mut x = x0;
        if self.slacks(&x, Phase::Optimize).is_none() {
            match self.phase_one(&x, settings, &mut iterations) {
                Some(feasible) => x = feasible,
                None => return SolverResult::failed(d, SolveStatus::Infeasible, iterations),
            }
        }

        let mf = m as f64;
        let mut t = mf / x.norm_squared().max(1e-6);
        let mut residual = f64::INFINITY;
        for _ in 0..settings.max_outer {
            let (its, res, _) = self.center(&mut x, t, Phase::Optimize, settings, None);
            iterations += its;
            residual = res;
            let obj = x.norm_squared();
            if mf / t <= settings.tol * (1.0 + obj) {
                return SolverResult {
                    objective: obj,
                    x,
                    status: SolveStatus::Optimal,
                    kkt_residual: residual.max(mf / t),
                    iterations,
                };
            }
            t *= settings.barrier_factor;
        }
        SolverResult {
            objective: x.norm_squared(),
            x,
            status: SolveStatus::MaxIterations,
            kkt_residual: residual,
            iterations,
        }
    }

    /// Minimizes the common violation `s`; returns a strictly feasible
    /// point or `None` when the optimal violation stays non-negative.
    fn phase_one(
        &self,
        x0: &DVector<f64>,
        settings: &IpmSettings,
        iterations: &mut usize,
    ) -> Option<DVector<f64>> {
        let d = self.d;
        let mut worst = (&self.g * x0 - &self.h).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if let Some((ctc, r2)) = &self.cone {
            worst = worst.max(x0.dot(&(ctc * x0)) - r2);
        }
        let scale = 1.0 + self.h.amax().max(worst.abs());
        let mut y = DVector::zeros(d + 1);
        y.rows_mut(0, d).copy_from(x0);
        y[d] = worst.max(0.0) + 1.0;

        let mf = self.barrier_terms() as f64;
        let mut t = 1.0 / scale;
        for _ in 0..settings.max_outer {
            let (its, _, centered) =
                self.center(&mut y, t, Phase::Feasibility, settings, Some(-0.1 * scale));
            *iterations += its;
            if y[d] < 0.0 {
                return Some(y.rows(0, d).into_owned());
            }
            // A centered point gives s' ≥ s − m/t − (w/t)(‖x'‖² − ‖x‖²) for
            // every (x', s') in the domain, which rules out strictly feasible
            // points inside a radius that grows with t.
            let gap = y[d] - mf / t;
            if centered && gap > 0.0 {
                let radius2 = y.rows(0, d).norm_squared() + t * gap / self.prox;
                if radius2 >= CERTIFIED_REACH * self.reach {
                    return None;
                }
            }
            if mf / t < 0.1 * settings.feas_tol {
                return None;
            }
            t *= settings.barrier_factor;
        }
        None
    }
}

/// Orthonormal basis of the null space of `e` (`d` columns).
fn null_space(e: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    if e.nrows() == 0 {
        return DMatrix::identity(d, d);
    }
    let eig = (e.transpose() * e).symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..d)
        .filter(|&i| eig.eigenvalues[i] <= 1e-12 * top.max(f64::MIN_POSITIVE))
        .collect();
    eig.eigenvectors.select_columns(&keep)
}
