//! PSK constellations, symbol-frame rotation, real-valued lifting and the
//! constructive / destructive region algebra.
//!
//! Complex vectors `x ∈ Cᴺ` are lifted to `x̄ = [Re x; Im x] ∈ R²ᴺ`. For a
//! channel `g` rotated into the frame of the symbol of interest, the lifted
//! rows `a = [Re g; −Im g]` and `b = [Im g; Re g]` satisfy
//! `aᵀx̄ = Re{gᵀx}` and `bᵀx̄ = Im{gᵀx}`, which turns every region
//! constraint into a (pair of) linear inequalities in `x̄`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Closed-set tolerance used by the region predicates.
pub const REGION_TOL: f64 = 1e-9;

/// Normalized M-PSK constellation with points `exp(j(2i+1)π/M)`, `i = 0..M`.
///
/// Symbol indices are zero-based throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PskConstellation {
    order: usize,
}

impl PskConstellation {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::Argument(format!(
                "PSK order must be at least 2, got {order}"
            )));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Half-sector angle `Φ = π/M`.
    pub fn half_angle(&self) -> f64 {
        PI / self.order as f64
    }

    /// Constellation point for zero-based index `index`.
    ///
    /// Panics if `index >= M`; use [`psk_symbol`] for a checked variant.
    pub fn point(&self, index: usize) -> Complex64 {
        assert!(index < self.order, "symbol index {index} out of range");
        Complex64::from_polar(1.0, (2 * index + 1) as f64 * self.half_angle())
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.order).map(|i| self.point(i)).collect()
    }
}

/// Checked constellation lookup: `exp(j(2i+1)π/M)` for zero-based `index`.
pub fn psk_symbol(index: usize, order: usize) -> Result<Complex64> {
    let psk = PskConstellation::new(order)?;
    if index >= order {
        return Err(Error::Argument(format!(
            "symbol index {index} out of range for {order}-PSK"
        )));
    }
    Ok(psk.point(index))
}

/// User SNR floor and eavesdropper SNR ceiling, stored in dB.
///
/// Noise power is fixed to one, so the amplitude thresholds are simply
/// `τ0 = √γ0` and `τe = √γe` in linear scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosParams {
    pub gamma0_db: f64,
    pub gamma_e_db: f64,
}

impl QosParams {
    pub fn new(gamma0_db: f64, gamma_e_db: f64) -> Result<Self> {
        if !gamma0_db.is_finite() {
            return Err(Error::Argument("gamma0_db must be finite".into()));
        }
        if gamma_e_db.is_nan() {
            return Err(Error::Argument("gamma_e_db must not be NaN".into()));
        }
        Ok(Self {
            gamma0_db,
            gamma_e_db,
        })
    }

    pub fn tau0(&self) -> f64 {
        db_to_linear(self.gamma0_db).sqrt()
    }

    pub fn tau_e(&self) -> f64 {
        db_to_linear(self.gamma_e_db).sqrt()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Channel expressed in the coordinate frame of one transmitted symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedChannel {
    pub g: DVector<Complex64>,
}

/// `g = h·s*`. The symbol must have unit modulus.
pub fn rotate_to_symbol_frame(h: &DVector<Complex64>, s: Complex64) -> Result<RotatedChannel> {
    if (s.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Argument(format!(
            "symbol must have unit modulus, got |s| = {}",
            s.norm()
        )));
    }
    let sc = s.conj();
    Ok(RotatedChannel {
        g: h.map(|v| v * sc),
    })
}

/// `[Re x; Im x]`.
pub fn real_lift(x: &DVector<Complex64>) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

/// Inverse of [`real_lift`]. Panics on odd length.
pub fn inverse_lift(xbar: &DVector<f64>) -> DVector<Complex64> {
    assert!(xbar.len() % 2 == 0, "lifted vector must have even length");
    let n = xbar.len() / 2;
    DVector::from_fn(n, |i, _| Complex64::new(xbar[i], xbar[i + n]))
}

/// Lifted real and imaginary rows of a rotated channel.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceCoeffs {
    /// `aᵀx̄ = Re{gᵀx}`
    pub a: DVector<f64>,
    /// `bᵀx̄ = Im{gᵀx}`
    pub b: DVector<f64>,
}

impl HalfspaceCoeffs {
    pub fn from_rotated(g: &RotatedChannel) -> Self {
        let n = g.g.len();
        let g = &g.g;
        let a = DVector::from_fn(2 * n, |i, _| if i < n { g[i].re } else { -g[i - n].im });
        let b = DVector::from_fn(2 * n, |i, _| if i < n { g[i].im } else { g[i - n].re });
        Self { a, b }
    }

    /// Noise-free received point `gᵀx` recovered from the lifted vector.
    pub fn received(&self, xbar: &DVector<f64>) -> Complex64 {
        Complex64::new(self.a.dot(xbar), self.b.dot(xbar))
    }
}

pub fn halfspace_coeffs(g: &RotatedChannel) -> HalfspaceCoeffs {
    HalfspaceCoeffs::from_rotated(g)
}

/// Closed constructive wedge `|Im z| ≤ (Re z − τ0)·tan Φ`.
pub fn in_constructive_region(z: Complex64, tau0: f64, phi: f64) -> bool {
    z.im.abs() <= (z.re - tau0) * phi.tan() + REGION_TOL
}

/// Strict interior of the constructive wedge.
pub fn in_constructive_interior(z: Complex64, tau0: f64, phi: f64) -> bool {
    z.im.abs() < (z.re - tau0) * phi.tan()
}

/// Closed destructive region `|Im z| ≥ (Re z − τe)·tan Φ`.
pub fn in_destructive_region(z: Complex64, tau_e: f64, phi: f64) -> bool {
    z.im.abs() >= (z.re - tau_e) * phi.tan() - REGION_TOL
}

/// One lifted linear constraint `rowᵀx̄ − offset ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundRow {
    pub row: DVector<f64>,
    pub offset: f64,
}

impl LowerBoundRow {
    pub fn margin(&self, xbar: &DVector<f64>) -> f64 {
        self.row.dot(xbar) - self.offset
    }
}

/// The two linear rows `(a tanΦ − b)` and `(a tanΦ + b)` with common offset
/// `τ0 tanΦ` whose joint satisfaction is the constructive-region condition.
pub fn constructive_rows(coeffs: &HalfspaceCoeffs, tau0: f64, phi: f64) -> [LowerBoundRow; 2] {
    let t = phi.tan();
    let offset = tau0 * t;
    [
        LowerBoundRow {
            row: &coeffs.a * t - &coeffs.b,
            offset,
        },
        LowerBoundRow {
            row: &coeffs.a * t + &coeffs.b,
            offset,
        },
    ]
}

/// Phase mapped into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = theta.rem_euclid(two_pi);
    if w >= two_pi {
        0.0
    } else {
        w
    }
}
