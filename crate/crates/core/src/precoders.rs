//! Per-symbol precoders.
//!
//! Every scheme minimizes the transmit power `‖x‖²` for one channel draw and
//! one symbol vector. User constraints keep each noise-free received point
//! `h_kᵀx` inside the constructive wedge of its own symbol; the secure
//! schemes add a constraint on the eavesdropper's point `h_eᵀx`, expressed in
//! the frame of user 1's symbol.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::geometry::{
    constructive_rows, inverse_lift, real_lift, rotate_to_symbol_frame, HalfspaceCoeffs, PskConstellation,
    QosParams,
};
use crate::solver::{
    dual_gradient_projection, feasible_init_norm_floor, scp_minimize_with_norm_floor,
    solve_min_norm_with, DualProblem, DualSettings, IpmSettings, MinNormProgram, ScpSettings,
    SolveStatus, SolverResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecoderKind {
    TraditionalCi,
    CdPartial,
    CdFull,
    Icss,
    FastIcss,
    Zf,
    AnNoCsi,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 7] = [
        PrecoderKind::TraditionalCi,
        PrecoderKind::CdPartial,
        PrecoderKind::CdFull,
        PrecoderKind::Icss,
        PrecoderKind::FastIcss,
        PrecoderKind::Zf,
        PrecoderKind::AnNoCsi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrecoderKind::TraditionalCi => "traditional_ci",
            PrecoderKind::CdPartial => "cd_partial",
            PrecoderKind::CdFull => "cd_full",
            PrecoderKind::Icss => "icss",
            PrecoderKind::FastIcss => "fast_icss",
            PrecoderKind::Zf => "zf",
            PrecoderKind::AnNoCsi => "an_no_csi",
        }
    }

    /// Whether the scheme uses the eavesdropper's channel.
    pub fn uses_eve_csi(self) -> bool {
        matches!(
            self,
            PrecoderKind::CdPartial
                | PrecoderKind::CdFull
                | PrecoderKind::Icss
                | PrecoderKind::FastIcss
                | PrecoderKind::Zf
        )
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        PrecoderKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Argument(format!("unknown scheme '{s}'")))
    }
}

/// Which branch of the full destructive region produced a `CdFull` solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CdBranch {
    /// `Re z_e ≤ τe`
    D1,
    /// Upper wedge `Im z_e ≥ (Re z_e − τe) tan Φ`
    D2,
    /// Lower wedge `−Im z_e ≥ (Re z_e − τe) tan Φ`
    D3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSolution {
    pub kind: PrecoderKind,
    pub x: DVector<Complex64>,
    /// `‖x‖²`, NaN unless the status is optimal.
    pub power: f64,
    pub status: SolveStatus,
    pub branch: Option<CdBranch>,
    /// Per-branch statuses for `CdFull`, in D1, D2, D3 order.
    pub branch_status: Vec<SolveStatus>,
    pub solve_time: Duration,
}

impl PrecoderSolution {
    fn from_result(kind: PrecoderKind, r: SolverResult, started: Instant) -> Self {
        let optimal = r.status.is_optimal();
        Self {
            kind,
            x: inverse_lift(&r.x),
            power: if optimal { r.x.norm_squared() } else { f64::NAN },
            status: r.status,
            branch: None,
            branch_status: Vec::new(),
            solve_time: started.elapsed(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status.is_optimal()
    }
}

/// Everything a precoder sees for one trial.
#[derive(Debug, Clone, Copy)]
pub struct PrecoderInput<'a> {
    pub channel: &'a ChannelRealization,
    /// One symbol per user.
    pub symbols: &'a [Complex64],
    pub psk: PskConstellation,
    pub qos: QosParams,
}

impl PrecoderInput<'_> {
    fn check(&self) -> Result<()> {
        if self.symbols.len() != self.channel.users() {
            return Err(Error::Dimension(format!(
                "{} symbols for {} users",
                self.symbols.len(),
                self.channel.users()
            )));
        }
        Ok(())
    }

    fn dim(&self) -> usize {
        2 * self.channel.antennas()
    }

    fn phi(&self) -> f64 {
        self.psk.half_angle()
    }

    fn user_coeffs(&self, k: usize) -> Result<HalfspaceCoeffs> {
        let g = rotate_to_symbol_frame(&self.channel.user_channel(k), self.symbols[k])?;
        Ok(HalfspaceCoeffs::from_rotated(&g))
    }

    /// Eavesdropper rows in the frame of user 1's symbol.
    pub fn eve_coeffs(&self) -> Result<HalfspaceCoeffs> {
        let g = rotate_to_symbol_frame(&self.channel.h_e, self.symbols[0])?;
        Ok(HalfspaceCoeffs::from_rotated(&g))
    }
}

fn ipm() -> IpmSettings {
    IpmSettings::default()
}

/// Constructive-region rows for users `from..K`.
fn add_user_constraints(p: &mut MinNormProgram, input: &PrecoderInput<'_>, from: usize) -> Result<()> {
    let tau0 = input.qos.tau0();
    for k in from..input.channel.users() {
        for r in constructive_rows(&input.user_coeffs(k)?, tau0, input.phi()) {
            p.add_lower_bound(r.row, r.offset)?;
        }
    }
    Ok(())
}

/// Program with only the user constraints.
pub fn user_program(input: &PrecoderInput<'_>) -> Result<MinNormProgram> {
    input.check()?;
    let mut p = MinNormProgram::new(input.dim());
    add_user_constraints(&mut p, input, 0)?;
    Ok(p)
}

fn solve(kind: PrecoderKind, p: &MinNormProgram, started: Instant) -> Result<PrecoderSolution> {
    let r = solve_min_norm_with(p, &ipm(), None)?;
    Ok(PrecoderSolution::from_result(kind, r, started))
}

pub fn traditional_ci(input: &PrecoderInput<'_>) -> Result<PrecoderSolution> {
    let started = Instant::now();
    let p = user_program(input)?;
    solve(PrecoderKind::TraditionalCi, &p, started)
}

/// Constrains the eavesdropper to the upper destructive wedge only.
pub fn cd_partial(input: &PrecoderInput<'_>) -> Result<PrecoderSolution> {
    let started = Instant::now();
    let mut p = user_program(input)?;
    let e = input.eve_coeffs()?;
    let t = input.phi().tan();
    let tau_e = input.qos.tau_e();
    p.add_inequality(-(&e.a * t + &e.b), -tau_e * t)?;
    p.add_inequality(&e.a * t - &e.b, tau_e * t)?;
    solve(PrecoderKind::CdPartial, &p, started)
}

/// The three convex pieces whose union is the destructive region.
pub fn cd_full_branches(input: &PrecoderInput<'_>) -> Result<[(CdBranch, MinNormProgram); 3]> {
    let base = user_program(input)?;
    let e = input.eve_coeffs()?;
    let t = input.phi().tan();
    let tau_e = input.qos.tau_e();

    let mut d1 = base.clone();
    d1.add_inequality(e.a.clone(), tau_e)?;
    let mut d2 = base.clone();
    d2.add_inequality(&e.a * t - &e.b, tau_e * t)?;
    let mut d3 = base;
    d3.add_inequality(&e.a * t + &e.b, tau_e * t)?;
    Ok([(CdBranch::D1, d1), (CdBranch::D2, d2), (CdBranch::D3, d3)])
}

/// Minimum-power point over the full destructive region.
pub fn cd_full(input: &PrecoderInput<'_>) -> Result<PrecoderSolution> {
    let started = Instant::now();
    let mut best: Option<(CdBranch, SolverResult)> = None;
    let mut statuses = Vec::with_capacity(3);
    for (branch, p) in cd_full_branches(input)? {
        let r = solve_min_norm_with(&p, &ipm(), None)?;
        statuses.push(r.status);
        if r.status.is_optimal() && best.as_ref().map_or(true, |(_, b)| r.objective < b.objective) {
            best = Some((branch, r));
        }
    }
    let mut sol = match best {
        Some((branch, r)) => {
            let mut s = PrecoderSolution::from_result(PrecoderKind::CdFull, r, started);
            s.branch = Some(branch);
            s
        }
        None => {
            let status = if statuses.contains(&SolveStatus::MaxIterations) {
                SolveStatus::MaxIterations
            } else {
                SolveStatus::Infeasible
            };
            PrecoderSolution::from_result(
                PrecoderKind::CdFull,
                SolverResult::failed(input.dim(), status, 0),
                started,
            )
        }
    };
    sol.branch_status = statuses;
    sol.solve_time = started.elapsed();
    Ok(sol)
}

/// Caps the eavesdropper's received power at `τe²`.
pub fn icss(input: &PrecoderInput<'_>) -> Result<PrecoderSolution> {
    let started = Instant::now();
    let mut p = user_program(input)?;
    let e = input.eve_coeffs()?;
    let c = DMatrix::from_rows(&[e.a.transpose(), e.b.transpose()]);
    p.set_cone(c, input.qos.tau_e())?;
    // A slightly scaled ZF point is strictly inside every user wedge and
    // nulls the eavesdropper, so phase 1 can be skipped. Thin feasible sets
    // (N = K + 1 with near-singular channels) otherwise stall phase 1.
    let start = zf_vector(input).ok().map(|x| real_lift(&(x * Complex64::from(1.01))));
    let r = solve_min_norm_with(&p, &ipm(), start.as_ref())?;
    Ok(PrecoderSolution::from_result(PrecoderKind::Icss, r, started))
}

/// Stacked `Q`, `b` of the square-cap program `min ‖x̄‖² s.t. Qx̄ ⪯ b`.
pub fn fast_icss_problem(input: &PrecoderInput<'_>) -> Result<DualProblem> {
    input.check()?;
    let k_users = input.channel.users();
    let d = input.dim();
    let t = input.phi().tan();
    let tau0 = input.qos.tau0();
    let half = std::f64::consts::FRAC_1_SQRT_2 * input.qos.tau_e();

    let mut q = DMatrix::zeros(2 * k_users + 4, d);
    let mut b = DVector::zeros(2 * k_users + 4);
    for k in 0..k_users {
        let c = input.user_coeffs(k)?;
        q.set_row(2 * k, &(&c.b - &c.a * t).transpose());
        q.set_row(2 * k + 1, &(-(&c.a * t) - &c.b).transpose());
        b[2 * k] = -tau0 * t;
        b[2 * k + 1] = -tau0 * t;
    }
    let e = input.eve_coeffs()?;
    let base = 2 * k_users;
    q.set_row(base, &e.a.transpose());
    q.set_row(base + 1, &(-&e.a).transpose());
    q.set_row(base + 2, &e.b.transpose());
    q.set_row(base + 3, &(-&e.b).transpose());
    b.rows_mut(base, 4).fill(half);
    DualProblem::new(q, b)
}

/// Square-cap variant solved through its Lagrange dual.
pub fn fast_icss(input: &PrecoderInput<'_>) -> Result<PrecoderSolution> {
    let started = Instant::now();
    let (problem, _) = fast_icss_problem(input)?.row_normalized()?;
    let lambda0 = DVector::zeros(problem.constraint_count());
    let out = dual_gradient_projection(&problem, &lambda0, &DualSettings::default())?;
    Ok(PrecoderSolution::from_result(PrecoderKind::FastIcss, out.result, started))
}

/// Minimum-norm solution of `[H; h_eᵀ] x = [τ0 s; 0]`.
pub fn zf(input: &PrecoderInput<'_>) -> Result<PrecoderSolution> {
    let started = Instant::now();
    let x = zf_vector(input)?;
    let power = x.norm_squared();
    Ok(PrecoderSolution {
        kind: PrecoderKind::Zf,
        x,
        power,
        status: SolveStatus::Optimal,
        branch: None,
        branch_status: Vec::new(),
        solve_time: started.elapsed(),
    })
}

fn zf_vector(input: &PrecoderInput<'_>) -> Result<DVector<Complex64>> {
    input.check()?;
    let ch = input.channel;
    let (k_users, n) = (ch.users(), ch.antennas());
    if n < k_users + 1 {
        return Err(Error::Argument(format!(
            "zero-forcing needs N >= K + 1, got N = {n}, K = {k_users}"
        )));
    }
    let mut a = DMatrix::<Complex64>::zeros(k_users + 1, n);
    a.rows_mut(0, k_users).copy_from(&ch.h);
    a.set_row(k_users, &ch.h_e.transpose());
    let tau0 = input.qos.tau0();
    let mut rhs = DVector::<Complex64>::zeros(k_users + 1);
    for (k, s) in input.symbols.iter().enumerate() {
        rhs[k] = s * tau0;
    }

    // x = Aᴴ (A Aᴴ)⁻¹ rhs
    let ah = a.adjoint();
    let gram = &a * &ah;
    let chol = gram.cholesky().ok_or_else(|| {
        Error::RankDeficient("stacked user/eavesdropper channel is rank deficient".into())
    })?;
    let x = ah * chol.solve(&rhs);
    let residual = (&a * &x - &rhs).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(residual <= 1e-9 * (1.0 + tau0)) {
        return Err(Error::RankDeficient(format!(
            "zero-forcing residual {residual:.3e} too large"
        )));
    }
    Ok(x)
}

/// Convex part of the no-CSI scheme: user 1 pinned to the vertex `τ0`,
/// the others in their constructive wedges.
pub fn an_base_program(input: &PrecoderInput<'_>) -> Result<MinNormProgram> {
    input.check()?;
    let mut p = MinNormProgram::new(input.dim());
    let c1 = input.user_coeffs(0)?;
    p.add_equality(c1.a, input.qos.tau0())?;
    p.add_equality(c1.b, 0.0)?;
    add_user_constraints(&mut p, input, 1)?;
    Ok(p)
}

/// No-CSI scheme with average power floor `p0` (linear scale).
pub fn an_no_csi(input: &PrecoderInput<'_>, p0: f64) -> Result<PrecoderSolution> {
    an_no_csi_with(input, p0, &ScpSettings::default()).map(|(s, _)| s)
}

/// As [`an_no_csi`], also returning the SCP objective trace.
pub fn an_no_csi_with(
    input: &PrecoderInput<'_>,
    p0: f64,
    settings: &ScpSettings,
) -> Result<(PrecoderSolution, Vec<f64>)> {
    let started = Instant::now();
    if !(p0 >= 0.0) {
        return Err(Error::Argument(format!("power floor {p0} must be >= 0")));
    }
    let base = an_base_program(input)?;
    let x0 = match feasible_init_norm_floor(&base, p0, &settings.inner) {
        Ok(x) => x,
        Err(Error::Initialization(msg)) => {
            log::debug!("no-CSI initializer failed: {msg}");
            let failed = SolverResult::failed(input.dim(), SolveStatus::Infeasible, 0);
            return Ok((PrecoderSolution::from_result(PrecoderKind::AnNoCsi, failed, started), Vec::new()));
        }
        Err(e) => return Err(e),
    };
    let out = scp_minimize_with_norm_floor(&base, p0, &x0, settings)?;
    Ok((
        PrecoderSolution::from_result(PrecoderKind::AnNoCsi, out.result, started),
        out.objectives,
    ))
}

/// Runs `kind`; `p0` is the linear power floor used by `AnNoCsi` only.
pub fn precode(kind: PrecoderKind, input: &PrecoderInput<'_>, p0: f64) -> Result<PrecoderSolution> {
    match kind {
        PrecoderKind::TraditionalCi => traditional_ci(input),
        PrecoderKind::CdPartial => cd_partial(input),
        PrecoderKind::CdFull => cd_full(input),
        PrecoderKind::Icss => icss(input),
        PrecoderKind::FastIcss => fast_icss(input),
        PrecoderKind::Zf => zf(input),
        PrecoderKind::AnNoCsi => an_no_csi(input, p0),
    }
}
