//! Two-parameter Mittag-Leffler function E_{α,β}(z).
//!
//! Near the origin the defining power series Σ z^k / Γ(αk + β) is summed
//! directly. Elsewhere the function is recovered as an inverse Laplace
//! transform,
//!
//! ```text
//! E_{α,β}(z) = 1/(2πi) ∫_Ha e^s s^{α-β} / (s^α - z) ds,
//! ```
//!
//! along the Hankel path `Ha(r, η₀)`: the ray `{ρ e^{-iη₀}}` travelled inwards,
//! the arc `{r e^{iφ} : |φ| ≤ η₀}` and the ray `{ρ e^{iη₀}}` travelled outwards.
//! The variable `s` is the Laplace variable scaled by the time, so the radius
//! `r = 1` corresponds to the unscaled choice `r = 1/t`. Poles of the integrand
//! lying to the right of the path are added back as residues
//! `s*^{1-β} e^{s*} / α`.
//!
//! Quadrature tables (nodes `s_j^α` and weights folded with `e^{s_j} s_j^{α-β}`)
//! depend only on `(α, β, η₀, r)` and the refinement level, so they are built
//! once and shared; a single evaluation is then one pass of complex divisions.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::special::rgamma;

pub type C64 = Complex64;

/// Default radius separating the series branch from the contour branch.
pub const DEFAULT_SWITCH_RADIUS: f64 = 5.0;
/// Band in which both branches are evaluated and compared by [`ml_eval`].
pub const OVERLAP_BAND: (f64, f64) = (3.0, 8.0);

const SERIES_MAX_TERMS: usize = 500;
const SERIES_TOL: f64 = 1e-17;
const BASE_PANEL_LENGTH: f64 = 16.0;
const MAX_LEVEL: u32 = 10;
const LEVEL_AGREEMENT: f64 = 1e-10;
const MAX_RADIUS_RETRIES: usize = 3;
/// Poles at least this far from the path skip the panel-doubling loop. A
/// 24-node panel of half-length 8 resolves such a pole to ~1e-14.
const SAFE_POLE_DISTANCE: f64 = 6.0;
/// The series is only trusted while |z|^{1/α} stays below this: its terms
/// peak near e^{|z|^{1/α}}, and that much cancellation costs ~1e-14.
const SERIES_GROWTH_LIMIT: f64 = 5.0;
/// ln(1e18): rays are cut where e^{ρ cos η₀} has decayed by this many e-folds.
const TAIL_EFOLDS: f64 = 41.446_531_673_892_82;

/// Evaluation configuration for the contour branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlParams {
    pub alpha: f64,
    pub beta: f64,
    /// Half-opening angle η₀ of the Hankel path.
    pub eta0: f64,
    /// Arc radius in the scaled variable.
    pub radius: f64,
    /// Gauss–Legendre nodes per panel on each ray.
    pub nodes_per_panel: usize,
    /// Gauss–Legendre nodes per panel on the arc.
    pub arc_nodes: usize,
    /// Ray length; derived from the decay of e^{ρ cos η₀} when unset.
    pub truncation: Option<f64>,
    pub switch_radius: f64,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            eta0: default_eta0(alpha),
            radius: 1.0,
            nodes_per_panel: 24,
            arc_nodes: 24,
            truncation: None,
            switch_radius: DEFAULT_SWITCH_RADIUS,
        }
    }

    /// Whether the dispatcher sends `z` to the power series.
    pub fn uses_series(&self, z: C64) -> bool {
        let r = z.norm();
        r <= self.switch_radius && r.powf(1.0 / self.alpha) <= SERIES_GROWTH_LIMIT
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return bad(format!("alpha = {} must lie in (0, 2]", self.alpha));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad(format!("beta = {} must be positive", self.beta));
        }
        if !(self.eta0 > FRAC_PI_2 && self.eta0 < PI) {
            return bad(format!("eta0 = {} must lie in (pi/2, pi)", self.eta0));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return bad(format!("radius = {} must be positive", self.radius));
        }
        if self.nodes_per_panel < 8 || self.arc_nodes < 8 {
            return bad("node counts must be at least 8".into());
        }
        if let Some(len) = self.truncation {
            if !(len > self.radius) {
                return bad(format!(
                    "ray truncation {len} must exceed the radius {}",
                    self.radius
                ));
            }
        }
        if !(self.switch_radius >= 0.0) {
            return bad("switch radius must be non-negative".into());
        }
        Ok(())
    }

    fn ray_length(&self) -> f64 {
        self.truncation
            .unwrap_or_else(|| self.radius + TAIL_EFOLDS / self.eta0.cos().abs())
    }
}

/// Centre of the admissible interval (π/2, π/α) for α in (1, 2); 3π/4 otherwise.
pub fn default_eta0(alpha: f64) -> f64 {
    if alpha > 1.0 && alpha < 2.0 {
        0.5 * (FRAC_PI_2 + PI / alpha)
    } else {
        0.75 * PI
    }
}

/// Which evaluation route produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Series,
    Contour,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Series => write!(f, "series"),
            Branch::Contour => write!(f, "contour"),
        }
    }
}

/// Result of [`ml_eval`]: the value, its route and, inside the overlap band,
/// the disagreement between the two routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlEvaluation {
    pub value: C64,
    pub branch: Branch,
    pub disagreement: Option<f64>,
}

/// Power series Σ z^k / Γ(αk + β), stopped once the terms have passed their
/// peak and fall below `tol` relative to the partial sum.
pub fn ml_series(alpha: f64, beta: f64, z: C64, tol: f64) -> Result<C64> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "series needs alpha > 0 and beta > 0 (got {alpha}, {beta})"
        )));
    }
    let mut sum = C64::new(rgamma(beta), 0.0);
    if z == C64::new(0.0, 0.0) {
        return Ok(sum);
    }
    let zabs = z.norm();
    let mut power = C64::new(1.0, 0.0);
    let mut small_run = 0;
    let mut last = 0.0;
    for k in 1..SERIES_MAX_TERMS {
        power *= z;
        let term = power * rgamma(alpha * k as f64 + beta);
        sum += term;
        last = term.norm();
        // the terms |z|^k/Γ(αk+β) are decreasing once Γ grows faster than |z|^k
        let decreasing = zabs.ln() < alpha * (alpha * k as f64 + beta).max(1.0).ln();
        if decreasing && last <= tol * sum.norm().max(1.0) {
            small_run += 1;
            if small_run >= 2 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::SeriesNonConvergence {
        terms: SERIES_MAX_TERMS,
        last_term: last,
    })
}

/// Contour-integral evaluation of E_{α,β}(z).
pub fn ml_contour(params: &MlParams, z: C64) -> Result<C64> {
    params.validate()?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite argument {z}")));
    }
    if z.norm() == 0.0 {
        return Ok(C64::new(rgamma(params.beta), 0.0));
    }
    if is_integer(params.alpha) && is_integer(params.beta) {
        return Ok(meromorphic_residues(
            params.alpha as u32,
            params.beta as u32,
            z,
        ));
    }
    let mut attempt = *params;
    let mut retries = 0;
    loop {
        match contour_once(&attempt, z) {
            Err(Error::PoleProximity { .. }) if retries < MAX_RADIUS_RETRIES => {
                attempt.radius *= 2.0;
                if let Some(len) = attempt.truncation {
                    attempt.truncation = Some(len.max(attempt.radius * 2.0));
                }
                retries += 1;
            }
            other => return other,
        }
    }
}

/// Dispatcher: series for |z| ≤ 5, contour otherwise.
pub fn ml(alpha: f64, beta: f64, z: C64) -> Result<C64> {
    ml_with(&MlParams::new(alpha, beta), z)
}

/// Real-argument convenience wrapper around [`ml`].
pub fn ml_real(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    ml(alpha, beta, C64::new(x, 0.0)).map(|v| v.re)
}

/// Like [`ml`] with explicit parameters. When `eta0` is left at its default
/// and a pole sits close to that path, the contour is rotated to the angle
/// that keeps the poles farthest away; an explicitly chosen angle is kept.
pub fn ml_with(params: &MlParams, z: C64) -> Result<C64> {
    if params.uses_series(z) {
        params.validate()?;
        ml_series(params.alpha, params.beta, z, SERIES_TOL)
    } else if params.eta0 == default_eta0(params.alpha) {
        ml_contour(&reroute(params, z), z)
    } else {
        ml_contour(params, z)
    }
}

fn reroute(params: &MlParams, z: C64) -> MlParams {
    let roots = principal_roots(params.alpha, z);
    let clearance = |eta: f64| {
        roots
            .iter()
            .map(|s| distance_to_path(*s, params.radius, eta))
            .fold(f64::INFINITY, f64::min)
    };
    if clearance(params.eta0) >= SAFE_POLE_DISTANCE {
        return *params;
    }
    let phi = roots
        .iter()
        .map(|s| s.arg().abs())
        .fold(0.0, f64::max)
        .clamp(FRAC_PI_2, PI);
    let mut best = *params;
    let mut best_clearance = clearance(params.eta0);
    for eta in [0.5 * (FRAC_PI_2 + phi), 0.5 * (phi + PI)] {
        let c = clearance(eta);
        if eta > FRAC_PI_2 + 0.05 && eta < PI - 0.05 && c > best_clearance {
            best.eta0 = eta;
            best_clearance = c;
        }
    }
    best
}

/// Evaluates through the dispatcher and, inside the overlap band, also
/// through the other branch to report their disagreement.
pub fn ml_eval(alpha: f64, beta: f64, z: C64) -> Result<MlEvaluation> {
    let params = MlParams::new(alpha, beta);
    params.validate()?;
    let branch = if params.uses_series(z) {
        Branch::Series
    } else {
        Branch::Contour
    };
    let value = ml_with(&params, z)?;
    let r = z.norm();
    let disagreement = if r >= OVERLAP_BAND.0 && r <= OVERLAP_BAND.1 {
        let other = match branch {
            Branch::Series => ml_contour(&params, z)?,
            Branch::Contour => ml_series(alpha, beta, z, SERIES_TOL)?,
        };
        Some((other - value).norm())
    } else {
        None
    };
    Ok(MlEvaluation {
        value,
        branch,
        disagreement,
    })
}

fn is_integer(x: f64) -> bool {
    x == x.round() && x.abs() < 64.0
}

/// For integer α and β the integrand has no branch cut, so the Hankel
/// integral is exactly the sum of its residues: the α roots of s^α = z and,
/// when β > α, the pole of order β − α at the origin.
fn meromorphic_residues(alpha: u32, beta: u32, z: C64) -> C64 {
    let a = alpha as f64;
    let modulus = z.norm().powf(1.0 / a);
    let arg = z.arg();
    let mut total = C64::new(0.0, 0.0);
    for k in 0..alpha {
        let root = C64::from_polar(modulus, (arg + 2.0 * PI * k as f64) / a);
        total += root.powi(1 - beta as i32) * root.exp() / a;
    }
    if beta > alpha {
        // coefficient of s^{m-1} in -Σ_j z^{-j-1} s^{αj} e^s, with m = β - α
        let m = beta - alpha;
        let mut j = 0;
        while alpha * j < m {
            let fact: f64 = (1..=(m - 1 - alpha * j)).map(|i| i as f64).product();
            total -= z.powi(-(j as i32) - 1) / fact;
            j += 1;
        }
    }
    total
}

#[derive(Debug)]
struct ContourTable {
    s_alpha: Vec<C64>,
    weight: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TableKey {
    alpha: u64,
    beta: u64,
    eta0: u64,
    radius: u64,
    ray_length: u64,
    nodes_per_panel: usize,
    arc_nodes: usize,
    level: u32,
}

type TableCache = RwLock<HashMap<TableKey, Arc<ContourTable>>>;

fn table_cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn rule_cache(n: usize) -> Arc<GaussLegendre> {
    static RULES: OnceLock<RwLock<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(rule) = rules.read().expect("rule cache poisoned").get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(GaussLegendre::new(n));
    rules
        .write()
        .expect("rule cache poisoned")
        .entry(n)
        .or_insert(rule)
        .clone()
}

fn table(params: &MlParams, level: u32) -> Arc<ContourTable> {
    let key = TableKey {
        alpha: params.alpha.to_bits(),
        beta: params.beta.to_bits(),
        eta0: params.eta0.to_bits(),
        radius: params.radius.to_bits(),
        ray_length: params.ray_length().to_bits(),
        nodes_per_panel: params.nodes_per_panel,
        arc_nodes: params.arc_nodes,
        level,
    };
    if let Some(t) = table_cache()
        .read()
        .expect("table cache poisoned")
        .get(&key)
    {
        return Arc::clone(t);
    }
    let built = Arc::new(build_table(params, level));
    table_cache()
        .write()
        .expect("table cache poisoned")
        .entry(key)
        .or_insert(built)
        .clone()
}

fn build_table(params: &MlParams, level: u32) -> ContourTable {
    let alpha = params.alpha;
    let exponent = alpha - params.beta;
    let eta = params.eta0;
    let r = params.radius;
    let length = params.ray_length();
    let refine = 1usize << level;
    let ray_rule = rule_cache(params.nodes_per_panel);
    let arc_rule = rule_cache(params.arc_nodes);
    let two_pi_i = C64::new(0.0, 2.0 * PI);

    let mut s_alpha = Vec::new();
    let mut weight = Vec::new();
    let mut push = |s: C64, w: C64| {
        // weight already carries ds and the orientation
        s_alpha.push(s.powf(alpha));
        weight.push(w * s.exp() * s.powf(exponent) / two_pi_i);
    };

    let ray_panels = ((length - r) / BASE_PANEL_LENGTH).ceil().max(1.0) as usize * refine;
    let step = (length - r) / ray_panels as f64;
    let up = C64::from_polar(1.0, eta);
    let down = C64::from_polar(1.0, -eta);
    for p in 0..ray_panels {
        let a = r + p as f64 * step;
        for (rho, w) in ray_rule.mapped(a, a + step) {
            push(up * rho, up * w);
            push(down * rho, -down * w);
        }
    }

    let arc_len = 2.0 * eta * r;
    let arc_panels = (arc_len / BASE_PANEL_LENGTH).ceil().max(1.0) as usize * refine;
    let dphi = 2.0 * eta / arc_panels as f64;
    for p in 0..arc_panels {
        let a = -eta + p as f64 * dphi;
        for (phi, w) in arc_rule.mapped(a, a + dphi) {
            let s = C64::from_polar(r, phi);
            push(s, C64::new(0.0, 1.0) * s * w);
        }
    }
    ContourTable { s_alpha, weight }
}

impl ContourTable {
    fn eval(&self, z: C64) -> std::result::Result<C64, f64> {
        let mut acc = C64::new(0.0, 0.0);
        let mut closest = f64::INFINITY;
        for (sa, w) in self.s_alpha.iter().zip(&self.weight) {
            let d = sa - z;
            let n2 = d.norm_sqr();
            closest = closest.min(n2);
            acc += w * d.conj() / n2;
        }
        if closest < 1e-24 {
            Err(closest.sqrt())
        } else {
            Ok(acc)
        }
    }
}

/// Roots of s^α = z on the principal sheet |arg s| < π.
fn principal_roots(alpha: f64, z: C64) -> Vec<C64> {
    let modulus = z.norm().powf(1.0 / alpha);
    let arg = z.arg();
    let mut roots = Vec::new();
    let kmax = (alpha / 2.0).ceil() as i32 + 1;
    for k in -kmax..=kmax {
        let phase = arg + 2.0 * PI * k as f64;
        if phase.abs() < alpha * PI {
            roots.push(C64::from_polar(modulus, phase / alpha));
        }
    }
    roots
}

fn distance_to_path(s: C64, r: f64, eta: f64) -> f64 {
    let rho = s.norm();
    let phi = s.arg();
    // arc
    let arc = if phi.abs() <= eta {
        (rho - r).abs()
    } else {
        (s - C64::from_polar(r, eta * phi.signum())).norm()
    };
    // rays
    let ray = [eta, -eta]
        .iter()
        .map(|&e| {
            let dir = C64::from_polar(1.0, e);
            let proj = (s * dir.conj()).re.max(r);
            (s - dir * proj).norm()
        })
        .fold(f64::INFINITY, f64::min);
    arc.min(ray)
}

fn contour_once(params: &MlParams, z: C64) -> Result<C64> {
    contour_at(params, z, false)
}

fn contour_at(params: &MlParams, z: C64, force_refinement: bool) -> Result<C64> {
    let proximity = |distance: f64| Error::PoleProximity {
        re: z.re,
        im: z.im,
        distance,
    };
    let roots = principal_roots(params.alpha, z);
    let mut nearest = f64::INFINITY;
    for root in &roots {
        let d = distance_to_path(*root, params.radius, params.eta0);
        if d < 1e-3 {
            return Err(proximity(d));
        }
        nearest = nearest.min(d);
    }

    let mut converged = None;
    if nearest >= SAFE_POLE_DISTANCE && !force_refinement {
        // integrand is analytic well beyond the panel scale: one pass of the base rule
        converged = Some(table(params, 0).eval(z).map_err(proximity)?);
    } else {
        let mut previous = table(params, 0).eval(z).map_err(proximity)?;
        for level in 1..=MAX_LEVEL {
            let current = table(params, level).eval(z).map_err(proximity)?;
            if (current - previous).norm() < LEVEL_AGREEMENT * current.norm().max(1.0) {
                converged = Some(current);
                break;
            }
            previous = current;
        }
    }
    let mut value = converged.ok_or_else(|| {
        Error::QuadratureFailure(format!(
            "panel refinement did not settle for z = {z} after {MAX_LEVEL} doublings"
        ))
    })?;

    // bound on the discarded ray tails
    let length = params.ray_length();
    let c = params.eta0.cos().abs();
    let s_end = C64::from_polar(length, params.eta0);
    let denom = (s_end.powf(params.alpha) - z).norm();
    let tail = (length * params.eta0.cos()).exp() * length.powf(params.alpha - params.beta)
        / (denom * c * PI);
    if !(tail <= 1e-12 * value.norm().max(1.0)) {
        return Err(Error::QuadratureFailure(format!(
            "ray tail bound {tail:e} exceeds tolerance at truncation {length}"
        )));
    }

    for root in roots {
        if root.arg().abs() < params.eta0 && root.norm() > params.radius {
            value += root.powf(1.0 - params.beta) * root.exp() / params.alpha;
        }
    }
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::QuadratureFailure(format!(
            "E_{{{},{}}}({z}) overflows double precision",
            params.alpha, params.beta
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use approx::assert_relative_eq;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn series_at_origin() {
        assert_eq!(ml_series(1.5, 1.0, c(0.0), 1e-16).unwrap(), c(1.0));
        let v = ml(1.5, 1.5, c(0.0)).unwrap();
        assert_relative_eq!(v.re, std::f64::consts::FRAC_2_SQRT_PI, epsilon = 1e-10);
    }

    #[test]
    fn series_exponential_and_cosine() {
        let v = ml_series(1.0, 1.0, c(-1.0), 1e-16).unwrap();
        assert_relative_eq!(v.re, (-1.0f64).exp(), epsilon = 1e-15);
        let x = FRAC_PI_2;
        let v = ml_series(2.0, 1.0, c(-x * x), 1e-16).unwrap();
        assert!(v.re.abs() < 1e-12);
    }

    #[test]
    fn series_flags_non_convergence() {
        let err = ml_series(0.1, 1.0, c(-60.0), 1e-16).unwrap_err();
        assert!(matches!(err, Error::SeriesNonConvergence { .. }));
    }

    #[test]
    fn contour_matches_series_on_overlap() {
        let p = MlParams::new(1.5, 1.0);
        let a = ml_contour(&p, c(-1.0)).unwrap();
        let b = ml_series(1.5, 1.0, c(-1.0), 1e-17).unwrap();
        assert!((a - b).norm() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn contour_exponential_identity() {
        let p = MlParams::new(1.0, 1.0);
        let v = ml_contour(&p, c(-10.0)).unwrap();
        assert_relative_eq!(v.re, 4.539_992_976_248_485e-5, max_relative = 1e-12);
    }

    #[test]
    fn contour_at_zero_is_reciprocal_gamma() {
        let p = MlParams::new(1.5, 0.7);
        let v = ml_contour(&p, c(0.0)).unwrap();
        assert_relative_eq!(v.re, 1.0 / gamma(0.7).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn sine_identity_through_dispatcher() {
        let v = ml(2.0, 2.0, c(-1.0)).unwrap();
        assert_relative_eq!(v.re, 1f64.sin(), epsilon = 1e-12);
        let v = ml(2.0, 3.0, c(-100.0)).unwrap();
        assert_relative_eq!(v.re, (1.0 - 10f64.cos()) / 100.0, epsilon = 1e-14);
    }

    #[test]
    fn large_negative_argument_follows_leading_asymptotics() {
        // E_{α,β}(z) ~ -1/(z Γ(β-α)) as z → -∞
        let z = -1e4;
        let v = ml(1.8, 1.0, c(z)).unwrap();
        let asym = -rgamma(1.0 - 1.8) / z;
        assert!(v.im.abs() < 1e-14);
        assert!(((v.re - asym) / asym).abs() < 0.05, "{} vs {}", v.re, asym);
    }

    #[test]
    fn params_validation() {
        let mut p = MlParams::new(1.5, 1.0);
        p.eta0 = 1.0;
        assert!(p.validate().is_err());
        let mut p = MlParams::new(1.5, 1.0);
        p.nodes_per_panel = 4;
        assert!(p.validate().is_err());
        let mut p = MlParams::new(1.5, 1.0);
        p.truncation = Some(0.5);
        assert!(p.validate().is_err());
        assert!(MlParams::new(2.5, 1.0).validate().is_err());
        assert!(MlParams::new(1.5, 0.0).validate().is_err());
    }

    #[test]
    fn short_truncation_is_reported() {
        let mut p = MlParams::new(1.5, 1.0);
        p.truncation = Some(3.0);
        let err = ml_contour(&p, c(-20.0)).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure(_)), "{err:?}");
    }

    #[test]
    fn pole_on_path_triggers_radius_retry() {
        // z = s^α with s on the arc of radius 1: after doubling r the pole sits inside the disk
        let p = MlParams::new(1.5, 1.0);
        let s = C64::from_polar(1.0, 0.3);
        let z = s.powf(1.5);
        let v = ml_contour(&p, z).unwrap();
        let w = ml_series(1.5, 1.0, z, 1e-17).unwrap();
        assert!((v - w).norm() < 1e-9, "{v} vs {w}");
    }

    #[test]
    fn single_pass_agrees_with_refinement() {
        for &alpha in &[1.25, 1.5, 1.75] {
            for &beta in &[1.0, 2.0, alpha, alpha + 1.0] {
                let p = MlParams::new(alpha, beta);
                for &x in &[6.0, 40.0, 300.0, 5e3, 1e5, 1e7] {
                    for &arg in &[PI, 2.6, 2.0] {
                        if arg < PI && x > 500.0 {
                            // exponentially large residue: no longer representable
                            continue;
                        }
                        let z = C64::from_polar(x, arg);
                        let fast = contour_at(&p, z, false).unwrap();
                        let slow = contour_at(&p, z, true).unwrap();
                        let scale = slow.norm().max(1e-300);
                        assert!(
                            (fast - slow).norm() <= 1e-12 * scale.max(1.0),
                            "alpha {alpha} beta {beta} z {z}: {fast} vs {slow}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn overflow_is_an_error() {
        let p = MlParams::new(1.5, 1.0);
        let z = C64::from_polar(1e7, 2.0);
        assert!(matches!(
            ml_contour(&p, z),
            Err(Error::QuadratureFailure(_))
        ));
    }

    #[test]
    fn eval_reports_disagreement_in_band() {
        let e = ml_eval(1.5, 1.0, c(-4.0)).unwrap();
        assert_eq!(e.branch, Branch::Series);
        assert!(e.disagreement.unwrap() < 1e-8);
        let e = ml_eval(1.5, 1.0, c(-20.0)).unwrap();
        assert_eq!(e.branch, Branch::Contour);
        assert!(e.disagreement.is_none());
    }
}
