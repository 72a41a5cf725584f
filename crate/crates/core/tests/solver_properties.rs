use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use secure_slp::solver::*;

/// Rows, offsets and a point known to satisfy them strictly.
fn planted(d: usize, m: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    (
        prop::collection::vec(-1.0..1.0f64, m * d),
        prop::collection::vec(-3.0..3.0f64, d),
        prop::collection::vec(0.01..1.0f64, m),
    )
        .prop_map(move |(g, z, slack)| {
            let g = DMatrix::from_row_slice(m, d, &g);
            let z = DVector::from_vec(z);
            let h = &g * &z + DVector::from_vec(slack);
            (g, h, z)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// A min-norm point x* satisfies x*ᵀ(y − x*) ≥ 0 for every feasible y.
    #[test]
    fn ipm_satisfies_variational_inequality((g, h, z) in planted(6, 8)) {
        let mut p = MinNormProgram::new(6);
        for i in 0..8 {
            p.add_inequality(g.row(i).transpose(), h[i]).unwrap();
        }
        let r = solve_min_norm(&p, 1e-10).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert!(p.max_violation(&r.x) <= 1e-7);
        let scale = 1.0 + r.objective;
        prop_assert!(r.x.dot(&(&z - &r.x)) >= -1e-6 * scale);
        prop_assert!(r.objective <= z.norm_squared() + 1e-9);
    }

    #[test]
    fn dual_matches_ipm((g, h, _z) in planted(6, 6)) {
        let problem = DualProblem::new(g.clone(), h.clone()).unwrap();
        let out = dual_gradient_projection(&problem, &DVector::zeros(6), &DualSettings::default()).unwrap();
        let mut p = MinNormProgram::new(6);
        for i in 0..6 {
            p.add_inequality(g.row(i).transpose(), h[i]).unwrap();
        }
        let r = solve_min_norm(&p, 1e-11).unwrap();
        prop_assume!(out.result.status == SolveStatus::Optimal);
        prop_assert!((out.result.objective - r.objective).abs() <= 1e-5 * (1.0 + r.objective));
        prop_assert!(out.lambda.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn cone_constraint_holds((g, h, z) in planted(4, 3), radius in 0.5..2.0f64) {
        let mut p = MinNormProgram::new(4);
        for i in 0..3 {
            p.add_inequality(g.row(i).transpose(), h[i]).unwrap();
        }
        let c = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, -0.5]);
        // only keep instances where the planted point also meets the cone
        prop_assume!((&c * &z).norm() < radius);
        p.set_cone(c.clone(), radius).unwrap();
        let r = solve_min_norm(&p, 1e-10).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert!((&c * &r.x).norm() <= radius + 1e-7);
        prop_assert!(r.x.dot(&(&z - &r.x)) >= -1e-6 * (1.0 + r.objective));
    }
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut p = MinNormProgram::new(2);
    let row = DVector::from_vec(vec![1.0, 1.0]);
    p.add_inequality(row.clone(), -1.0).unwrap();
    p.add_lower_bound(row, 1.0).unwrap();
    assert_eq!(solve_min_norm(&p, 1e-9).unwrap().status, SolveStatus::Infeasible);
}

#[test]
fn norm_floor_on_a_line() {
    // x₁ = 1 with ‖x‖² ≥ 5 forces |x₂| = 2
    let mut base = MinNormProgram::new(2);
    base.add_equality(DVector::from_vec(vec![1.0, 0.0]), 1.0).unwrap();
    let ipm = IpmSettings::default();
    let x0 = feasible_init_norm_floor(&base, 5.0, &ipm).unwrap();
    let out = scp_minimize_with_norm_floor(&base, 5.0, &x0, &ScpSettings::default()).unwrap();
    assert!(out.result.status.is_optimal());
    assert!((out.result.x[0] - 1.0).abs() < 1e-7);
    assert!((out.result.x[1].abs() - 2.0).abs() < 1e-5);
    for w in out.objectives.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
}
