//! Sequential convex programming for `min ‖x̄‖²` over a convex base set
//! intersected with the non-convex floor `‖x̄‖² ≥ P0`.
//!
//! Each iteration replaces the floor by its first-order expansion at the
//! current iterate, `‖x̄ₙ‖² + 2x̄ₙᵀ(x̄ − x̄ₙ) ≥ P0`. Because `‖·‖²` is convex
//! the expansion lies below the function, so the surrogate set is inside
//! the true feasible set and every iterate stays feasible.

use nalgebra::DVector;

use super::ipm::{solve_min_norm_with, IpmSettings};
use super::{MinNormProgram, SolveStatus, SolverResult, FEAS_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScpSettings {
    /// Stop when `‖x̄ₙ₋₁‖² − ‖x̄ₙ‖² ≤ eps`.
    pub eps: f64,
    pub max_iter: usize,
    pub inner: IpmSettings,
}

impl Default for ScpSettings {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            max_iter: 100,
            inner: IpmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScpOutcome {
    pub result: SolverResult,
    /// `‖x̄ₙ‖²` for every accepted iterate, starting with the initial point.
    pub objectives: Vec<f64>,
}

/// Base program plus the floor linearized at `xn`, scaled to a unit row.
fn with_linearized_floor(base: &MinNormProgram, xn: &DVector<f64>, p0: f64) -> Result<MinNormProgram> {
    let mut p = base.clone();
    let norm = xn.norm();
    // 2x̄ₙᵀx̄ ≥ P0 + ‖x̄ₙ‖²
    p.add_lower_bound(xn / norm, (p0 + norm * norm) / (2.0 * norm))?;
    Ok(p)
}

pub fn scp_minimize_with_norm_floor(
    base: &MinNormProgram,
    p0: f64,
    x0: &DVector<f64>,
    settings: &ScpSettings,
) -> Result<ScpOutcome> {
    if x0.len() != base.dim() {
        return Err(Error::Dimension("initial point has wrong length".into()));
    }
    let scale = 1.0 + x0.norm_squared();
    if base.max_violation(x0) > 1e-6 * scale || x0.norm_squared() < p0 - 1e-9 * scale {
        return Err(Error::Argument(
            "SCP must start from a point feasible for the base program and the floor".into(),
        ));
    }

    if p0 <= 0.0 {
        let r = solve_min_norm_with(base, &settings.inner, None)?;
        if !r.status.is_optimal() {
            return Err(Error::Solver(format!("base program returned {:?}", r.status)));
        }
        let objectives = vec![x0.norm_squared(), r.objective];
        return Ok(ScpOutcome { result: r, objectives });
    }

    let mut x = x0.clone();
    let mut obj = x.norm_squared();
    let mut objectives = vec![obj];
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;

    while iterations < settings.max_iter {
        iterations += 1;
        let inner = with_linearized_floor(base, &x, p0)?;
        let r = solve_min_norm_with(&inner, &settings.inner, Some(&x))?;
        if !r.status.is_optimal() {
            return Err(Error::Solver(format!(
                "SCP inner problem {} returned {:?} from a feasible iterate",
                iterations, r.status
            )));
        }
        if r.objective > obj {
            // the previous iterate is optimal for this surrogate to solver precision
            status = SolveStatus::Optimal;
            break;
        }
        let decrease = obj - r.objective;
        x = r.x;
        obj = r.objective;
        kkt = r.kkt_residual;
        objectives.push(obj);
        if decrease <= settings.eps {
            status = SolveStatus::Optimal;
            break;
        }
    }

    Ok(ScpOutcome {
        result: SolverResult {
            x,
            objective: obj,
            status,
            kkt_residual: kkt,
            iterations,
        },
        objectives,
    })
}

/// Stacked inequality and equality rows.
fn all_rows(base: &MinNormProgram) -> nalgebra::DMatrix<f64> {
    let g = base.inequality_matrix();
    let e = base.equality_matrix();
    let mut a = nalgebra::DMatrix::zeros(g.nrows() + e.nrows(), base.dim());
    a.view_mut((0, 0), g.shape()).copy_from(&g);
    a.view_mut((g.nrows(), 0), e.shape()).copy_from(&e);
    a
}

/// Orthonormal basis of the common null space of all constraint rows.
fn null_space(base: &MinNormProgram) -> Vec<DVector<f64>> {
    let a = all_rows(base);
    let d = base.dim();
    if a.nrows() == 0 {
        return (0..d).map(|i| DVector::from_fn(d, |j, _| f64::from(i == j))).collect();
    }
    let gram = a.tr_mul(&a);
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.amax().max(1e-300);
    (0..d)
        .filter(|&i| eig.eigenvalues[i] <= 1e-10 * top)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// A point feasible for `base` with `‖x̄‖² ≥ P0`.
///
/// Starts at the base optimum and moves along the common null space of
/// every constraint row, which leaves all constraints unchanged while the
/// norm grows without bound. When that null space is empty it falls back
/// to repeatedly minimizing the common violation of the base constraints
/// and the floor linearized at the latest point.
pub fn feasible_init_norm_floor(base: &MinNormProgram, p0: f64, ipm: &IpmSettings) -> Result<DVector<f64>> {
    let r = solve_min_norm_with(base, ipm, None)?;
    if !r.status.is_optimal() {
        return Err(Error::Initialization(format!(
            "base program returned {:?}",
            r.status
        )));
    }
    let xb = r.x;
    let target = p0 * (1.0 + 1e-9) + 1e-12;
    if xb.norm_squared() >= target {
        return Ok(xb);
    }

    if let Some(v) = null_space(base).into_iter().next() {
        // ‖x̄b + αv‖² = target, positive root
        let bv = xb.dot(&v);
        let c = xb.norm_squared() - target;
        let alpha = -bv + (bv * bv - c).sqrt();
        return Ok(&xb + v * alpha);
    }

    violation_descent(base, p0, &xb, ipm)
}

fn violation_descent(
    base: &MinNormProgram,
    p0: f64,
    xb: &DVector<f64>,
    ipm: &IpmSettings,
) -> Result<DVector<f64>> {
    let d = base.dim();
    let mut xc = if xb.norm() > 1e-12 {
        xb.clone()
    } else {
        DVector::from_fn(d, |i, _| f64::from(i == 0))
    };
    for _ in 0..50 {
        let surrogate = with_linearized_floor(base, &xc, p0)?;
        let r = solve_min_norm_with(&surrogate, ipm, Some(&xc))?;
        if r.status.is_optimal() && base.max_violation(&r.x) <= FEAS_TOL && r.x.norm_squared() >= p0 {
            return Ok(r.x);
        }
        // move the linearization point outward along the current direction
        let scale = (p0.sqrt() / xc.norm()).max(2.0);
        xc *= scale;
    }
    Err(Error::Initialization(
        "no point satisfies both the base constraints and the power floor".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_base(rng: &mut ChaCha8Rng, d: usize, eq: usize, ineq: usize) -> MinNormProgram {
        let mut p = MinNormProgram::new(d);
        for _ in 0..eq {
            let row = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            p.add_equality(row, rng.gen_range(0.5..1.5)).unwrap();
        }
        for _ in 0..ineq {
            let row = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            p.add_lower_bound(row, rng.gen_range(0.0..1.0)).unwrap();
        }
        p
    }

    #[test]
    fn zero_floor_is_single_base_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = random_base(&mut rng, 6, 2, 3);
        let x0 = feasible_init_norm_floor(&base, 0.0, &IpmSettings::default()).unwrap();
        let out = scp_minimize_with_norm_floor(&base, 0.0, &x0, &Default::default()).unwrap();
        let direct = solve_min_norm_with(&base, &IpmSettings::default(), None).unwrap();
        assert_abs_diff_eq!(out.result.objective, direct.objective, epsilon = 1e-9);
    }

    #[test]
    fn inactive_floor_converges_to_base_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = random_base(&mut rng, 6, 2, 3);
        let direct = solve_min_norm_with(&base, &IpmSettings::default(), None).unwrap();
        let p0 = 0.5 * direct.objective;
        let x0 = feasible_init_norm_floor(&base, p0, &IpmSettings::default()).unwrap();
        let out = scp_minimize_with_norm_floor(&base, p0, &x0, &Default::default()).unwrap();
        assert_abs_diff_eq!(out.result.objective, direct.objective, epsilon = 1e-6);
    }

    #[test]
    fn null_space_initializer_reaches_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let base = random_base(&mut rng, 8, 2, 4);
            let x0 = feasible_init_norm_floor(&base, 100.0, &IpmSettings::default()).unwrap();
            assert!(base.max_violation(&x0) <= 1e-7);
            assert!(x0.norm_squared() >= 100.0);
        }
    }

    #[test]
    fn fallback_when_rows_span_space() {
        // x₁ ≥ 1, x₂ ≥ 1 in R²: no null space, floor of 50 reachable
        let mut p = MinNormProgram::new(2);
        p.add_lower_bound(DVector::from_vec(vec![1.0, 0.0]), 1.0).unwrap();
        p.add_lower_bound(DVector::from_vec(vec![0.0, 1.0]), 1.0).unwrap();
        let x0 = feasible_init_norm_floor(&p, 50.0, &IpmSettings::default()).unwrap();
        assert!(p.max_violation(&x0) <= 1e-7);
        assert!(x0.norm_squared() >= 50.0);
    }

    #[test]
    fn fallback_reports_unreachable_floor() {
        // bounded box 0 ≤ x ≤ 1 cannot reach norm² 10
        let mut p = MinNormProgram::new(1);
        p.add_lower_bound(DVector::from_vec(vec![1.0]), 0.0).unwrap();
        p.add_inequality(DVector::from_vec(vec![1.0]), 1.0).unwrap();
        assert!(feasible_init_norm_floor(&p, 10.0, &IpmSettings::default()).is_err());
    }

    #[test]
    fn rejects_infeasible_start() {
        let mut p = MinNormProgram::new(2);
        p.add_lower_bound(DVector::from_vec(vec![1.0, 0.0]), 1.0).unwrap();
        let x0 = DVector::from_vec(vec![0.0, 5.0]);
        assert!(scp_minimize_with_norm_floor(&p, 1.0, &x0, &Default::default()).is_err());
    }

    #[test]
    fn monotone_and_feasible_iterates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let base = random_base(&mut rng, 8, 2, 4);
            let p0 = 40.0;
            let x0 = feasible_init_norm_floor(&base, p0, &IpmSettings::default()).unwrap();
            let out = scp_minimize_with_norm_floor(&base, p0, &x0, &Default::default()).unwrap();
            for w in out.objectives.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert!(out.result.x.norm_squared() >= p0 - 1e-6);
            assert!(base.max_violation(&out.result.x) <= 1e-6);
            assert_eq!(out.result.status, SolveStatus::Optimal);
            // the floor binds at a local optimum since the base optimum is smaller
            assert!(out.result.objective <= x0.norm_squared() + 1e-12);
        }
    }
}
