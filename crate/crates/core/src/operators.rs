//! Solution-operator families E_α(t), S_α(t), R_α(t) of the fractional wave
//! equation, realized on the Dirichlet eigenbasis.
//!
//! On an eigenmode with −Δφ = λφ the three families act as scalar multipliers
//!
//! ```text
//! E: E_{α,1}(−λt^α)      S: t E_{α,2}(−λt^α)      R: t^{α−1} E_{α,α}(−λt^α)
//! ```
//!
//! which are the inverse Laplace transforms of λ^{α−1}, λ^{α−2} and 1 divided
//! by (λ^α + μ). [`invert_symbol`] computes the same transforms straight from
//! the contour integral in the unscaled Laplace variable, as an independent
//! check on the Mittag-Leffler route.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mittag_leffler::{default_eta0, ml_real};
use crate::quadrature::{integrate_adaptive, GaussLegendre};
use crate::special::rgamma;
use crate::spectral::{SpectralDomain, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyKind {
    E,
    S,
    R,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [FamilyKind::E, FamilyKind::S, FamilyKind::R];

    /// Power γ of the Laplace variable in the symbol λ^γ/(λ^α + μ).
    pub fn symbol_power(self, alpha: f64) -> f64 {
        match self {
            FamilyKind::E => alpha - 1.0,
            FamilyKind::S => alpha - 2.0,
            FamilyKind::R => 0.0,
        }
    }

    /// Second Mittag-Leffler index of the multiplier.
    pub fn ml_beta(self, alpha: f64) -> f64 {
        match self {
            FamilyKind::E => 1.0,
            FamilyKind::S => 2.0,
            FamilyKind::R => alpha,
        }
    }

    /// Power of t multiplying the Mittag-Leffler factor.
    pub fn time_power(self, alpha: f64) -> f64 {
        match self {
            FamilyKind::E => 0.0,
            FamilyKind::S => 1.0,
            FamilyKind::R => alpha - 1.0,
        }
    }

    /// Exponent of t in the bound ‖F(t)‖ ≲ t^e for an operator that gains `p`
    /// powers of the Laplacian (from X^{β} into X^{1+θ}, p = 1 + θ − β).
    pub fn expected_slope(self, alpha: f64, p: f64) -> f64 {
        self.time_power(alpha) - alpha * p
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            FamilyKind::E => "E",
            FamilyKind::S => "S",
            FamilyKind::R => "R",
        };
        f.write_str(tag)
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E" | "e" => Ok(FamilyKind::E),
            "S" | "s" => Ok(FamilyKind::S),
            "R" | "r" => Ok(FamilyKind::R),
            other => Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

/// Per-mode multipliers of one family at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierTable {
    pub t: f64,
    pub alpha: f64,
    pub family: FamilyKind,
    pub values: Vec<f64>,
}

impl MultiplierTable {
    /// sup_n λ_n^p |m_n|: the norm of the truncated operator between spaces
    /// that differ by `p` powers of the Laplacian.
    pub fn weighted_sup(&self, eigenvalues: &[f64], p: f64) -> f64 {
        eigenvalues
            .iter()
            .zip(&self.values)
            .map(|(l, m)| l.powf(p) * m.abs())
            .fold(0.0, f64::max)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in (1, 2)"
        )))
    }
}

/// Scalar multiplier of `family` on a mode with eigenvalue `lambda`.
pub fn multiplier(family: FamilyKind, alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time t = {t} must be >= 0"
        )));
    }
    if t == 0.0 {
        return Ok(match family {
            FamilyKind::E => 1.0,
            FamilyKind::S | FamilyKind::R => 0.0,
        });
    }
    let ml = ml_real(alpha, family.ml_beta(alpha), -lambda * t.powf(alpha))?;
    Ok(t.powf(family.time_power(alpha)) * ml)
}

pub fn multipliers(
    domain: &SpectralDomain,
    family: FamilyKind,
    alpha: f64,
    t: f64,
) -> Result<MultiplierTable> {
    multipliers_for(domain.eigenvalues(), family, alpha, t)
}

/// Same as [`multipliers`] for a bare eigenvalue list.
pub fn multipliers_for(
    eigenvalues: &[f64],
    family: FamilyKind,
    alpha: f64,
    t: f64,
) -> Result<MultiplierTable> {
    check_alpha(alpha)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time t = {t} must be >= 0"
        )));
    }
    let values = eigenvalues
        .par_iter()
        .map(|&l| multiplier(family, alpha, l, t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MultiplierTable {
        t,
        alpha,
        family,
        values,
    })
}

/// Applies the family at time `t` to a field: c_n ← m_n c_n.
pub fn apply(
    domain: &SpectralDomain,
    family: FamilyKind,
    alpha: f64,
    t: f64,
    field: &SpectralField,
) -> Result<SpectralField> {
    domain.check_field(field)?;
    let table = multipliers(domain, family, alpha, t)?;
    Ok(apply_table(&table, field))
}

pub fn apply_table(table: &MultiplierTable, field: &SpectralField) -> SpectralField {
    SpectralField::new(
        table
            .values
            .iter()
            .zip(field.coeffs())
            .map(|(m, c)| m * c)
            .collect(),
    )
}

/// Norm of the family at time `t` from X^{beta_in} into X^{1+theta_out}
/// (with ‖x‖_{X^{1+s}} = (Σ λ_n^{2s} c_n²)^{1/2}), taken over the retained modes.
pub fn operator_norm(
    domain: &SpectralDomain,
    family: FamilyKind,
    alpha: f64,
    t: f64,
    theta_out: f64,
    beta_in: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("time t = {t} must be > 0")));
    }
    if !(0.0..=1.0).contains(&beta_in) {
        return Err(Error::InvalidParameter(format!(
            "beta_in = {beta_in} must lie in [0, 1]"
        )));
    }
    if !(theta_out >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta_out = {theta_out} must be non-negative"
        )));
    }
    let table = multipliers(domain, family, alpha, t)?;
    Ok(table.weighted_sup(domain.eigenvalues(), 1.0 + theta_out - beta_in))
}

/// Inverse Laplace transform of λ^γ/(λ^α + μ) at time `t`, with γ set by the
/// family, computed on the Hankel path of radius 1/t in the unscaled variable.
pub fn invert_symbol(family: FamilyKind, alpha: f64, mu: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t > 0.0) || !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "symbol inversion needs t > 0 and mu >= 0 (got t = {t}, mu = {mu})"
        )));
    }
    let gamma_pow = family.symbol_power(alpha);
    let eta = default_eta0(alpha);
    let r = 1.0 / t;
    // e^{Re(λ) t} must decay by 1e-18 along the rays
    let length = r + 41.5 / (eta.cos().abs() * t);
    let integrand = |lam: Complex64| -> Complex64 {
        (lam * t).exp() * lam.powf(gamma_pow) / (lam.powf(alpha) + mu)
    };
    let rule = GaussLegendre::new(32);
    let up = Complex64::from_polar(1.0, eta);
    let down = Complex64::from_polar(1.0, -eta);
    let evaluate = |panels: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let step = (length - r) / panels as f64;
        for p in 0..panels {
            let a = r + p as f64 * step;
            for (rho, w) in rule.mapped(a, a + step) {
                acc += integrand(up * rho) * up * w;
                acc -= integrand(down * rho) * down * w;
            }
        }
        let dphi = 2.0 * eta / panels as f64;
        for p in 0..panels {
            let a = -eta + p as f64 * dphi;
            for (phi, w) in rule.mapped(a, a + dphi) {
                let lam = Complex64::from_polar(r, phi);
                acc += integrand(lam) * Complex64::new(0.0, 1.0) * lam * w;
            }
        }
        acc / Complex64::new(0.0, 2.0 * PI)
    };
    let mut panels = 8;
    let mut previous = evaluate(panels);
    for _ in 0..8 {
        panels *= 2;
        let current = evaluate(panels);
        if (current - previous).norm() <= 1e-12 * current.norm().max(1e-3) {
            return Ok(current.re);
        }
        previous = current;
    }
    Err(Error::QuadratureFailure(format!(
        "symbol inversion did not settle (family {family}, alpha {alpha}, mu {mu}, t {t})"
    )))
}

/// Which subordination identity to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subordination {
    /// S(t)x = ∫₀ᵗ E(s)x ds
    SFromE,
    /// R(t)x = ∫₀ᵗ g_{α−1}(t−s) E(s)x ds, g_γ(τ) = τ^{γ−1}/Γ(γ)
    RFromE,
}

/// L² distance between the family applied directly and its subordination
/// integral over E, computed by adaptive quadrature per mode.
pub fn subordination_residual(
    domain: &SpectralDomain,
    alpha: f64,
    t: f64,
    field: &SpectralField,
    which: Subordination,
) -> Result<f64> {
    check_alpha(alpha)?;
    domain.check_field(field)?;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("time t = {t} must be > 0")));
    }
    let per_mode = domain
        .eigenvalues()
        .par_iter()
        .zip(field.coeffs().par_iter())
        .map(|(&lambda, &c)| -> Result<f64> {
            if c == 0.0 {
                return Ok(0.0);
            }
            let e = |s: f64| multiplier(FamilyKind::E, alpha, lambda, s).unwrap_or(f64::NAN);
            let (direct, integral) = match which {
                Subordination::SFromE => (
                    multiplier(FamilyKind::S, alpha, lambda, t)?,
                    integrate_adaptive(e, 0.0, t, 1e-14, 1e-13)?,
                ),
                Subordination::RFromE => {
                    // [0, t/2]: smooth kernel; [t/2, t]: τ = t − s = u^{1/(α−1)}
                    // turns τ^{α−2} dτ into du/(α−1).
                    let g = rgamma(alpha - 1.0);
                    let near = integrate_adaptive(
                        |s| (t - s).powf(alpha - 2.0) * e(s),
                        0.0,
                        0.5 * t,
                        1e-14,
                        1e-13,
                    )?;
                    let exponent = 1.0 / (alpha - 1.0);
                    let far = integrate_adaptive(
                        |u| e(t - u.powf(exponent)),
                        0.0,
                        (0.5 * t).powf(alpha - 1.0),
                        1e-14,
                        1e-13,
                    )?;
                    (
                        multiplier(FamilyKind::R, alpha, lambda, t)?,
                        g * (near + far / (alpha - 1.0)),
                    )
                }
            };
            let d = (direct - integral) * c;
            Ok(d * d)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_mode.iter().sum::<f64>().sqrt())
}
