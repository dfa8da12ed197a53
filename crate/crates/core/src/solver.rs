//! Time stepping for the mild formulation
//!
//!   u(t) = E(t)u₀ + S(t)u₁ + ∫₀ᵗ R(t−s) f(u(s)) ds
//!
//! by product integration. On each interval [t_{j−1}, t_j] the forcing is
//! frozen at its right endpoint and the kernel is integrated exactly per mode
//! through the primitive P(T) = T^α E_{α,α+1}(−λT^α), so the weight of f(u_j)
//! in the integral up to t_k is P(t_k − t_{j−1}) − P(t_k − t_j). The current
//! node appears in its own weight and is resolved by Picard iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mittag_leffler::ml_real;
use crate::operators::{multipliers, FamilyKind};
use crate::spectral::{admissibility, DomainSpec, SpectralDomain, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// f(u) = c·u·|u|^{ρ−1}
    PowerAbs,
    /// f(u) = c·g(u) with g piecewise linear through `table`, extended
    /// linearly past both ends.
    CustomTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    #[serde(default = "one")]
    pub coefficient: f64,
    #[serde(default)]
    pub exponent: Option<f64>,
    #[serde(default)]
    pub table: Vec<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

impl NonlinearitySpec {
    pub fn power_abs(coefficient: f64, exponent: f64) -> Self {
        Self {
            kind: NonlinearityKind::PowerAbs,
            coefficient,
            exponent: Some(exponent),
            table: Vec::new(),
        }
    }

    /// f(u) = κu.
    pub fn linear(kappa: f64) -> Self {
        Self {
            kind: NonlinearityKind::CustomTable,
            coefficient: kappa,
            exponent: None,
            table: vec![[-1.0, -1.0], [1.0, 1.0]],
        }
    }

    /// f ≡ 0 (power law with zero coefficient).
    pub fn zero() -> Self {
        Self::power_abs(0.0, 1.5)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !self.coefficient.is_finite() {
            return bad(format!("coefficient {} is not finite", self.coefficient));
        }
        match self.kind {
            NonlinearityKind::PowerAbs => match self.exponent {
                Some(rho) if rho > 1.0 && rho.is_finite() => Ok(()),
                Some(rho) => bad(format!("exponent rho = {rho} must exceed 1")),
                None => bad("power_abs needs an exponent".into()),
            },
            NonlinearityKind::CustomTable => {
                if self.table.len() < 2 {
                    return bad("custom_table needs at least two points".into());
                }
                for pair in self.table.windows(2) {
                    if !(pair[1][0] > pair[0][0]) {
                        return bad("custom_table abscissae must increase strictly".into());
                    }
                }
                if self.table.iter().flatten().any(|v| !v.is_finite()) {
                    return bad("custom_table entries must be finite".into());
                }
                Ok(())
            }
        }
    }

    /// κ when f(u) = κu exactly (zero coefficient or a table on a line
    /// through the origin).
    pub fn as_linear(&self) -> Option<f64> {
        if self.is_zero() {
            return Some(0.0);
        }
        match self.kind {
            NonlinearityKind::PowerAbs => None,
            NonlinearityKind::CustomTable => {
                let slope =
                    (self.table[1][1] - self.table[0][1]) / (self.table[1][0] - self.table[0][0]);
                let on_line = self
                    .table
                    .iter()
                    .all(|&[x, y]| (y - slope * x).abs() <= 1e-14 * (1.0 + y.abs()));
                on_line.then_some(self.coefficient * slope)
            }
        }
    }

    /// `true` when f vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.coefficient == 0.0
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self.kind {
            NonlinearityKind::PowerAbs => {
                let rho = self.exponent.unwrap_or(1.0);
                self.coefficient * u * u.abs().powf(rho - 1.0)
            }
            NonlinearityKind::CustomTable => self.coefficient * self.interpolate(u),
        }
    }

    fn interpolate(&self, u: f64) -> f64 {
        let t = &self.table;
        let last = t.len() - 1;
        // segment index, clamped so the end segments extrapolate
        let i = t.partition_point(|p| p[0] <= u).clamp(1, last);
        let ([x0, y0], [x1, y1]) = (t[i - 1], t[i]);
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }

    /// Constant C in |f(r) − f(s)| ≤ C(|r|^{ρ−1} + |s|^{ρ−1})|r − s|; for
    /// tables this is the plain Lipschitz constant (ρ = 1).
    pub fn growth_constant(&self) -> f64 {
        match self.kind {
            NonlinearityKind::PowerAbs => self.coefficient.abs() * self.exponent.unwrap_or(1.0),
            NonlinearityKind::CustomTable => 0.5 * self.coefficient.abs() * self.max_slope(),
        }
    }

    /// Lipschitz constant of f on [−bound, bound].
    pub fn lipschitz(&self, bound: f64) -> f64 {
        match self.kind {
            NonlinearityKind::PowerAbs => {
                let rho = self.exponent.unwrap_or(1.0);
                self.coefficient.abs() * rho * bound.abs().powf(rho - 1.0)
            }
            NonlinearityKind::CustomTable => self.coefficient.abs() * self.max_slope(),
        }
    }

    fn max_slope(&self) -> f64 {
        self.table
            .windows(2)
            .map(|p| ((p[1][1] - p[0][1]) / (p[1][0] - p[0][0])).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub t_end: f64,
    pub steps: usize,
    /// Picard stops once successive iterates differ by at most
    /// picard_tol·max(1, ‖u‖).
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iters")]
    pub picard_max_iters: usize,
    #[serde(default = "default_blowup_threshold")]
    pub blowup_threshold: f64,
    #[serde(default)]
    pub dealias: bool,
    /// Exponent q of the L^q norm used for diagnostics and blow-up.
    #[serde(default = "default_lq")]
    pub lq_exponent: f64,
    /// Order θ of the X^{1+θ} diagnostic norm.
    #[serde(default)]
    pub theta: f64,
    /// Run even when the admissibility arithmetic rejects the parameters.
    #[serde(default)]
    pub override_admissibility: bool,
}

fn default_lq() -> f64 {
    2.0
}
fn default_picard_tol() -> f64 {
    1e-12
}
fn default_picard_max_iters() -> usize {
    500
}
fn default_blowup_threshold() -> f64 {
    1e6
}

impl SolverConfig {
    pub fn new(alpha: f64, t_end: f64, steps: usize) -> Self {
        Self {
            alpha,
            t_end,
            steps,
            picard_tol: default_picard_tol(),
            picard_max_iters: default_picard_max_iters(),
            blowup_threshold: default_blowup_threshold(),
            dealias: false,
            lq_exponent: 2.0,
            theta: 0.0,
            override_admissibility: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return bad(format!("alpha = {} must lie in (1, 2)", self.alpha));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if self.steps < 1 {
            return bad("steps must be at least 1".into());
        }
        if !(self.picard_tol >= 1e-14) {
            return bad(format!(
                "picard_tol = {} must be at least 1e-14",
                self.picard_tol
            ));
        }
        if self.picard_max_iters < 1 {
            return bad("picard_max_iters must be at least 1".into());
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blowup_threshold must be positive".into());
        }
        if !(self.lq_exponent > 1.0) {
            return bad(format!("lq_exponent = {} must exceed 1", self.lq_exponent));
        }
        if !(self.theta >= 0.0) {
            return bad(format!("theta = {} must be non-negative", self.theta));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.steps as f64
    }
}

/// Per-node diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub l2_norm: f64,
    pub lq_norm: f64,
    pub frac_norm: f64,
    pub picard_iters: usize,
    pub picard_residual: f64,
    /// Largest own-node weight times the local Lipschitz constant of f.
    pub local_contraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub domain: DomainSpec,
    pub alpha: f64,
    pub step: f64,
    pub theta: f64,
    pub lq_exponent: f64,
    pub u0: SpectralField,
    pub u1: SpectralField,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub blown: bool,
    /// Warnings collected on the way (admissibility override, step advice).
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("a trajectory holds at least t = 0")
    }

    pub fn final_field(&self) -> &SpectralField {
        self.fields
            .last()
            .expect("a trajectory holds at least t = 0")
    }

    pub fn total_picard_iterations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.picard_iters).sum()
    }

    /// Index of the node closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            return 0;
        }
        if i == self.times.len() || t - self.times[i - 1] <= self.times[i] - t {
            i - 1
        } else {
            i
        }
    }
}

/// Outcome of [`detect_blowup`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub blown: bool,
    pub t_flag: Option<f64>,
    /// (t, lq_norm) at every node.
    pub growth_table: Vec<(f64, f64)>,
}

pub fn detect_blowup(traj: &Trajectory) -> BlowupReport {
    BlowupReport {
        blown: traj.blown,
        t_flag: traj.blown.then(|| traj.final_time()),
        growth_table: traj
            .times
            .iter()
            .zip(&traj.diagnostics)
            .map(|(&t, d)| (t, d.lq_norm))
            .collect(),
    }
}

/// Product-integration weights per mode.
#[derive(Debug, Clone)]
pub struct ConvolutionWeights {
    times: Vec<f64>,
    modes: usize,
    storage: WeightStorage,
}

#[derive(Debug, Clone)]
enum WeightStorage {
    /// Uniform grid: weights depend on k − j only; `diffs[m]` holds all modes.
    Toeplitz { diffs: Vec<Vec<f64>> },
    /// Row k holds P(t_k − t_j) for j = 0..=k, all modes.
    Primitive { rows: Vec<Vec<Vec<f64>>> },
}

/// P(T) = ∫₀^T s^{α−1} E_{α,α}(−λs^α) ds = T^α E_{α,α+1}(−λT^α).
pub fn kernel_primitive(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let ta = t.powf(alpha);
    Ok(ta * ml_real(alpha, alpha + 1.0, -lambda * ta)?)
}

fn primitives(alpha: f64, eigenvalues: &[f64], t: f64) -> Result<Vec<f64>> {
    eigenvalues
        .iter()
        .map(|&l| kernel_primitive(alpha, l, t))
        .collect()
}

fn uniform_step(times: &[f64]) -> Option<f64> {
    let n = times.len() - 1;
    let h = times[n] / n as f64;
    times
        .iter()
        .enumerate()
        .all(|(k, &t)| t == k as f64 * h)
        .then_some(h)
}

pub fn convolution_weights(
    domain: &SpectralDomain,
    alpha: f64,
    times: &[f64],
) -> Result<ConvolutionWeights> {
    ConvolutionWeights::for_eigenvalues(domain.eigenvalues(), alpha, times)
}

impl ConvolutionWeights {
    pub fn for_eigenvalues(eigenvalues: &[f64], alpha: f64, times: &[f64]) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must lie in (1, 2)"
            )));
        }
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "time grid needs at least two nodes and must start at 0".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "time grid must be strictly increasing".into(),
            ));
        }
        let n = times.len() - 1;
        let storage = match uniform_step(times) {
            Some(h) => {
                let prims = (0..=n)
                    .map(|m| primitives(alpha, eigenvalues, m as f64 * h))
                    .collect::<Result<Vec<_>>>()?;
                let diffs = prims
                    .windows(2)
                    .map(|p| p[1].iter().zip(&p[0]).map(|(a, b)| a - b).collect())
                    .collect();
                WeightStorage::Toeplitz { diffs }
            }
            None => {
                let rows = times
                    .iter()
                    .map(|&tk| {
                        times
                            .iter()
                            .take_while(|&&tj| tj <= tk)
                            .map(|&tj| primitives(alpha, eigenvalues, tk - tj))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                WeightStorage::Primitive { rows }
            }
        };
        Ok(Self {
            times: times.to_vec(),
            modes: eigenvalues.len(),
            storage,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.storage, WeightStorage::Toeplitz { .. })
    }

    /// Per-mode weight of f(u_j) in the integral up to t_k, for 1 ≤ j ≤ k.
    pub fn weight(&self, k: usize, j: usize) -> Vec<f64> {
        assert!(j >= 1 && j <= k && k < self.times.len(), "need 1 <= j <= k");
        match &self.storage {
            WeightStorage::Toeplitz { diffs } => diffs[k - j].clone(),
            WeightStorage::Primitive { rows } => {
                let row = &rows[k];
                (0..self.modes).map(|n| row[j - 1][n] - row[j][n]).collect()
            }
        }
    }

    /// Σ_{j=lo}^{hi} W_{kj} ⊙ F_j, with `forcing[j]` the coefficients of f(u_j).
    fn accumulate(&self, k: usize, lo: usize, hi: usize, forcing: &[SpectralField]) -> Vec<f64> {
        let mut acc = vec![0.0; self.modes];
        for j in lo..=hi {
            let f = forcing[j].coeffs();
            match &self.storage {
                WeightStorage::Toeplitz { diffs } => {
                    for ((a, w), c) in acc.iter_mut().zip(&diffs[k - j]).zip(f) {
                        *a += w * c;
                    }
                }
                WeightStorage::Primitive { .. } => {
                    for ((a, w), c) in acc.iter_mut().zip(self.weight(k, j)).zip(f) {
                        *a += w * c;
                    }
                }
            }
        }
        acc
    }
}

/// Pseudo-spectral evaluation of f(u): synthesize, apply pointwise, analyze.
struct Forcing<'a> {
    domain: &'a SpectralDomain,
    f: &'a NonlinearitySpec,
    mask: Option<Vec<bool>>,
    lq: f64,
}

struct Evaluated {
    coeffs: SpectralField,
    lq_norm: f64,
    max_abs: f64,
}

impl<'a> Forcing<'a> {
    fn new(domain: &'a SpectralDomain, f: &'a NonlinearitySpec, config: &SolverConfig) -> Self {
        Self {
            domain,
            f,
            mask: config.dealias.then(|| domain.dealias_mask()),
            lq: config.lq_exponent,
        }
    }

    fn eval(&self, u: &SpectralField) -> Result<Evaluated> {
        let values = self.domain.inverse_transform(u)?;
        let lq_norm = self.domain.lq_norm(&values, self.lq)?;
        let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let coeffs = if self.f.is_zero() {
            SpectralField::zeros(u.len())
        } else {
            let mapped: Vec<f64> = values.iter().map(|&v| self.f.eval(v)).collect();
            let mut c = self.domain.transform(&mapped)?;
            if let Some(mask) = &self.mask {
                for (v, keep) in c.coeffs_mut().iter_mut().zip(mask) {
                    if !keep {
                        *v = 0.0;
                    }
                }
            }
            c
        };
        Ok(Evaluated {
            coeffs,
            lq_norm,
            max_abs,
        })
    }
}

fn check_inputs(
    domain: &SpectralDomain,
    config: &SolverConfig,
    f: &NonlinearitySpec,
    u0: &SpectralField,
    u1: &SpectralField,
) -> Result<Vec<String>> {
    config.validate()?;
    f.validate()?;
    domain.check_field(u0)?;
    domain.check_field(u1)?;
    let mut warnings = Vec::new();
    // tables and f ≡ 0 are globally Lipschitz: no growth condition to check
    if f.kind == NonlinearityKind::PowerAbs && !f.is_zero() {
        let rho = f.exponent.unwrap_or(1.0);
        let adm = admissibility(domain.dimension(), 2.0, rho, config.alpha);
        if !adm.ok {
            let msg = format!(
                "N = {}, q = 2, rho = {rho}, alpha = {} fails the growth condition",
                domain.dimension(),
                config.alpha
            );
            if !config.override_admissibility {
                return Err(Error::Inadmissible(msg));
            }
            warnings.push(format!("admissibility overridden: {msg}"));
        }
    }
    Ok(warnings)
}

fn linear_part(
    domain: &SpectralDomain,
    alpha: f64,
    t: f64,
    u0: &SpectralField,
    u1: &SpectralField,
) -> Result<SpectralField> {
    let e = multipliers(domain, FamilyKind::E, alpha, t)?;
    let s = multipliers(domain, FamilyKind::S, alpha, t)?;
    Ok(SpectralField::new(
        e.values
            .iter()
            .zip(&s.values)
            .zip(u0.coeffs().iter().zip(u1.coeffs()))
            .map(|((me, ms), (a, b))| me * a + ms * b)
            .collect(),
    ))
}

/// Sequential stepper shared by [`solve`] and [`continue_trajectory`].
struct Stepper<'a> {
    domain: &'a SpectralDomain,
    config: &'a SolverConfig,
    forcing: Forcing<'a>,
    weights: ConvolutionWeights,
}

impl<'a> Stepper<'a> {
    fn new(
        domain: &'a SpectralDomain,
        config: &'a SolverConfig,
        f: &'a NonlinearitySpec,
        times: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            domain,
            config,
            forcing: Forcing::new(domain, f, config),
            weights: convolution_weights(domain, config.alpha, times)?,
        })
    }

    fn diagnostics(&self, u: &SpectralField, eval: &Evaluated) -> Result<StepDiagnostics> {
        Ok(StepDiagnostics {
            l2_norm: u.l2_norm(),
            lq_norm: eval.lq_norm,
            frac_norm: self.domain.fractional_norm(u, self.config.theta)?,
            picard_iters: 0,
            picard_residual: 0.0,
            local_contraction: 0.0,
        })
    }

    /// Advances `traj` through nodes `start..times.len()`; `forcing` holds
    /// f(u_j) for every node already in `traj`.
    fn run(
        &self,
        traj: &mut Trajectory,
        forcing: &mut Vec<SpectralField>,
        start: usize,
    ) -> Result<()> {
        let times = self.weights.times().to_vec();
        let threshold = self.config.blowup_threshold;
        for (k, &t) in times.iter().enumerate().skip(start) {
            let mut base = linear_part(self.domain, self.config.alpha, t, &traj.u0, &traj.u1)?;
            let history = self.weights.accumulate(k, 1, k - 1, forcing);
            for (b, h) in base.coeffs_mut().iter_mut().zip(&history) {
                *b += h;
            }
            let own = self.weights.weight(k, k);
            let own_max = own.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
            let apply = |f: &SpectralField| {
                SpectralField::new(
                    base.coeffs()
                        .iter()
                        .zip(&own)
                        .zip(f.coeffs())
                        .map(|((b, w), c)| b + w * c)
                        .collect(),
                )
            };

            // predictor: freeze the forcing at the previous node
            let mut u = apply(&forcing[k - 1]);
            let mut iters = 1;
            let mut residual = f64::INFINITY;
            let mut eval = self.forcing.eval(&u)?;
            let mut blown = false;
            while !self.forcing.f.is_zero() {
                if !(eval.lq_norm <= threshold) {
                    blown = true;
                    break;
                }
                let next = apply(&eval.coeffs);
                residual = next.distance(&u);
                u = next;
                iters += 1;
                eval = self.forcing.eval(&u)?;
                if residual <= self.config.picard_tol * u.l2_norm().max(1.0) {
                    break;
                }
                if iters >= self.config.picard_max_iters {
                    if !(eval.lq_norm <= threshold) {
                        blown = true;
                        break;
                    }
                    return Err(Error::PicardNonConvergence {
                        time: t,
                        iterations: iters,
                        residual,
                    });
                }
            }
            if self.forcing.f.is_zero() {
                residual = 0.0;
            }
            let mut diag = self.diagnostics(&u, &eval)?;
            diag.picard_iters = iters;
            diag.picard_residual = residual;
            diag.local_contraction = own_max * self.forcing.f.lipschitz(eval.max_abs);
            if diag.local_contraction >= 0.5 && !blown {
                traj.warnings.push(format!(
                    "local contraction {:.3} >= 0.5 at t = {t}: consider a smaller step",
                    diag.local_contraction
                ));
            }
            traj.times.push(t);
            traj.fields.push(u);
            traj.diagnostics.push(diag);
            forcing.push(eval.coeffs);
            if blown || !(diag.lq_norm <= threshold) {
                traj.blown = true;
                break;
            }
        }
        Ok(())
    }
}

fn uniform_times(step: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * step).collect()
}

/// Time-stepped solution on the uniform grid t_k = k·t_end/steps.
pub fn solve(
    domain: &SpectralDomain,
    config: &SolverConfig,
    f: &NonlinearitySpec,
    u0: &SpectralField,
    u1: &SpectralField,
) -> Result<Trajectory> {
    let warnings = check_inputs(domain, config, f, u0, u1)?;
    let times = uniform_times(config.step(), config.steps);
    let stepper = Stepper::new(domain, config, f, &times)?;
    let mut traj = Trajectory {
        domain: domain.spec().clone(),
        alpha: config.alpha,
        step: config.step(),
        theta: config.theta,
        lq_exponent: config.lq_exponent,
        u0: u0.clone(),
        u1: u1.clone(),
        times: Vec::new(),
        fields: Vec::new(),
        diagnostics: Vec::new(),
        blown: false,
        warnings,
    };
    let eval0 = stepper.forcing.eval(u0)?;
    traj.times.push(0.0);
    traj.fields.push(u0.clone());
    traj.diagnostics.push(stepper.diagnostics(u0, &eval0)?);
    if !(eval0.lq_norm <= config.blowup_threshold) {
        traj.blown = true;
        return Ok(traj);
    }
    let mut forcing = vec![eval0.coeffs];
    stepper.run(&mut traj, &mut forcing, 1)?;
    Ok(traj)
}

/// Extends `traj` by `extra_time` (a whole number of its steps). Old nodes
/// are copied unchanged; new nodes see the full history through freshly
/// built weights.
pub fn continue_trajectory(
    domain: &SpectralDomain,
    traj: &Trajectory,
    extra_time: f64,
    config: &SolverConfig,
    f: &NonlinearitySpec,
) -> Result<Trajectory> {
    if traj.blown {
        return Err(Error::BlownUp(traj.final_time()));
    }
    if domain.spec() != &traj.domain {
        return Err(Error::InvalidParameter(
            "domain differs from the one the trajectory was computed on".into(),
        ));
    }
    if config.alpha != traj.alpha {
        return Err(Error::InvalidParameter(format!(
            "alpha {} differs from the trajectory's {}",
            config.alpha, traj.alpha
        )));
    }
    if !(extra_time >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "extra time {extra_time} must be non-negative"
        )));
    }
    let extra_steps = (extra_time / traj.step).round();
    if (extra_steps * traj.step - extra_time).abs() > 1e-9 * traj.step.max(extra_time) {
        return Err(Error::InvalidParameter(format!(
            "extra time {extra_time} is not a whole number of steps {}",
            traj.step
        )));
    }
    let mut out = traj.clone();
    if extra_steps == 0.0 {
        return Ok(out);
    }
    let mut config = config.clone();
    config.theta = traj.theta;
    config.lq_exponent = traj.lq_exponent;
    check_inputs(domain, &config, f, &traj.u0, &traj.u1)?;
    let old = traj.times.len() - 1;
    let times = uniform_times(traj.step, old + extra_steps as usize);
    let stepper = Stepper::new(domain, &config, f, &times)?;
    let mut forcing = traj
        .fields
        .iter()
        .map(|u| stepper.forcing.eval(u).map(|e| e.coeffs))
        .collect::<Result<Vec<_>>>()?;
    stepper.run(&mut out, &mut forcing, old + 1)?;
    Ok(out)
}

/// Starting point of the whole-trajectory iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// u(t) ≡ E(t)u₀ + S(t)u₁
    Linear,
    /// u(t) ≡ 0 for t > 0
    Zero,
    /// u(t) ≡ u₀. Unlike `Zero` (whose first image is the linear part when
    /// f(0) = 0) this starts the iteration off a genuinely different path.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPicard {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// sup_t of each update, in order.
    pub updates: Vec<f64>,
    /// Ratios of successive updates.
    pub ratios: Vec<f64>,
    pub diverged: bool,
}

/// Iterates the map u ↦ E u₀ + S u₁ + ∫R f(u) on the whole window [0, τ]
/// at once (τ rounded to the step grid of `config`).
pub fn solve_picard_global(
    domain: &SpectralDomain,
    config: &SolverConfig,
    f: &NonlinearitySpec,
    u0: &SpectralField,
    u1: &SpectralField,
    tau: f64,
    guess: InitialGuess,
) -> Result<GlobalPicard> {
    let warnings = check_inputs(domain, config, f, u0, u1)?;
    if !(tau > 0.0 && tau <= config.t_end * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "window tau = {tau} must lie in (0, t_end = {}]",
            config.t_end
        )));
    }
    let h = config.step();
    let n = ((tau / h).round() as usize).max(1);
    let times = uniform_times(h, n);
    let stepper = Stepper::new(domain, config, f, &times)?;

    let linear = times
        .iter()
        .map(|&t| linear_part(domain, config.alpha, t, u0, u1))
        .collect::<Result<Vec<_>>>()?;
    let mut u: Vec<SpectralField> = match guess {
        InitialGuess::Linear => linear.clone(),
        InitialGuess::Zero => {
            let mut z = vec![SpectralField::zeros(u0.len()); n + 1];
            z[0] = u0.clone();
            z
        }
        InitialGuess::Frozen => vec![u0.clone(); n + 1],
    };

    let mut updates = Vec::new();
    let mut ratios = Vec::new();
    let mut rising = 0;
    let mut evals: Vec<Evaluated>;
    loop {
        evals = u
            .iter()
            .map(|v| stepper.forcing.eval(v))
            .collect::<Result<Vec<_>>>()?;
        let forcing: Vec<SpectralField> = evals.iter().map(|e| e.coeffs.clone()).collect();
        let next: Vec<SpectralField> = (0..=n)
            .map(|k| {
                if k == 0 {
                    return u0.clone();
                }
                let mut v = linear[k].clone();
                for (a, h) in v
                    .coeffs_mut()
                    .iter_mut()
                    .zip(stepper.weights.accumulate(k, 1, k, &forcing))
                {
                    *a += h;
                }
                v
            })
            .collect();
        let update = next
            .iter()
            .zip(&u)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        if let Some(prev) = updates.last() {
            let ratio = if *prev > 0.0 { update / prev } else { 0.0 };
            ratios.push(ratio);
            rising = if ratio > 1.0 { rising + 1 } else { 0 };
        }
        updates.push(update);
        u = next;
        let scale = u.iter().map(|v| v.l2_norm()).fold(1.0, f64::max);
        if update <= config.picard_tol * scale || rising >= 3 || !update.is_finite() {
            break;
        }
        if updates.len() >= config.picard_max_iters {
            return Err(Error::PicardNonConvergence {
                time: times[n],
                iterations: updates.len(),
                residual: update,
            });
        }
    }
    let diverged = rising >= 3 || !updates.last().copied().unwrap_or(0.0).is_finite();
    let iterations = updates.len();
    let final_update = *updates.last().expect("at least one iteration");

    let mut traj = Trajectory {
        domain: domain.spec().clone(),
        alpha: config.alpha,
        step: h,
        theta: config.theta,
        lq_exponent: config.lq_exponent,
        u0: u0.clone(),
        u1: u1.clone(),
        times: Vec::new(),
        fields: Vec::new(),
        diagnostics: Vec::new(),
        blown: false,
        warnings,
    };
    for (k, v) in u.into_iter().enumerate() {
        let eval = stepper.forcing.eval(&v)?;
        let mut diag = stepper.diagnostics(&v, &eval)?;
        if k > 0 {
            diag.picard_iters = iterations;
            diag.picard_residual = final_update;
        }
        traj.blown |= !(diag.lq_norm <= config.blowup_threshold);
        traj.times.push(times[k]);
        traj.fields.push(v);
        traj.diagnostics.push(diag);
    }
    Ok(GlobalPicard {
        trajectory: traj,
        iterations,
        updates,
        ratios,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_domain;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn interval(modes: usize) -> SpectralDomain {
        build_domain(&DomainSpec::interval(PI, 4 * modes, modes)).unwrap()
    }

    #[test]
    fn power_nonlinearity() {
        let f = NonlinearitySpec::power_abs(1.0, 1.5);
        assert_eq!(f.eval(0.0), 0.0);
        assert_relative_eq!(f.eval(4.0), 8.0);
        assert_relative_eq!(f.eval(-4.0), -8.0);
        assert_relative_eq!(f.growth_constant(), 1.5);
    }

    #[test]
    fn table_extrapolates_linearly() {
        let f = NonlinearitySpec::linear(0.5);
        assert_relative_eq!(f.eval(3.0), 1.5);
        assert_relative_eq!(f.eval(-7.0), -3.5);
        let g = NonlinearitySpec {
            kind: NonlinearityKind::CustomTable,
            coefficient: 1.0,
            exponent: None,
            table: vec![[0.0, 0.0], [1.0, 2.0], [2.0, 3.0]],
        };
        assert_relative_eq!(g.eval(0.5), 1.0);
        assert_relative_eq!(g.eval(1.5), 2.5);
        assert_relative_eq!(g.eval(4.0), 5.0);
        assert_relative_eq!(g.eval(-1.0), -2.0);
        assert_relative_eq!(g.lipschitz(10.0), 2.0);
        assert_eq!(g.as_linear(), None);
        assert_eq!(f.as_linear(), Some(0.5));
        assert_eq!(NonlinearitySpec::zero().as_linear(), Some(0.0));
        assert_eq!(NonlinearitySpec::power_abs(1.0, 2.0).as_linear(), None);
    }

    #[test]
    fn nonlinearity_validation() {
        assert!(NonlinearitySpec::power_abs(1.0, 1.0).validate().is_err());
        let mut t = NonlinearitySpec::linear(1.0);
        t.table = vec![[1.0, 0.0], [1.0, 1.0]];
        assert!(t.validate().is_err());
        t.table.truncate(1);
        assert!(t.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(1.5, 1.0, 10).validate().is_ok());
        assert!(SolverConfig::new(2.0, 1.0, 10).validate().is_err());
        assert!(SolverConfig::new(1.5, 1.0, 0).validate().is_err());
        let mut c = SolverConfig::new(1.5, 1.0, 10);
        c.picard_tol = 1e-15;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_step_weight_without_decay() {
        let w = ConvolutionWeights::for_eigenvalues(&[0.0], 1.5, &[0.0, 0.1]).unwrap();
        let expected = 0.1_f64.powf(1.5) / crate::special::gamma(2.5).unwrap();
        assert_relative_eq!(w.weight(1, 1)[0], expected, max_relative = 1e-13);
    }

    #[test]
    fn graded_and_uniform_storage_agree() {
        let eig = [1.0, 4.0, 9.0];
        let uniform: Vec<f64> = (0..=8).map(|k| k as f64 * 0.125).collect();
        let mut nudged = uniform.clone();
        nudged[3] += 1e-3;
        let a = ConvolutionWeights::for_eigenvalues(&eig, 1.5, &uniform).unwrap();
        let b = ConvolutionWeights::for_eigenvalues(&eig, 1.5, &nudged).unwrap();
        assert!(a.is_uniform() && !b.is_uniform());
        for n in 0..3 {
            assert_relative_eq!(a.weight(8, 6)[n], b.weight(8, 6)[n], max_relative = 1e-12);
        }
    }

    #[test]
    fn weights_telescope() {
        let eig = [1.0, 25.0, 400.0];
        let times = [0.0, 0.05, 0.15, 0.2, 0.4, 0.7];
        let w = ConvolutionWeights::for_eigenvalues(&eig, 1.3, &times).unwrap();
        let mut negative = 0;
        for k in 1..times.len() {
            for (n, &l) in eig.iter().enumerate() {
                let sum: f64 = (1..=k).map(|j| w.weight(k, j)[n]).sum();
                let p = kernel_primitive(1.3, l, times[k]).unwrap();
                assert!(
                    (sum - p).abs() <= 1e-10 * p.abs().max(1e-3),
                    "k {k} lambda {l}: {sum} vs {p}"
                );
                for j in 1..=k {
                    let wkj = w.weight(k, j)[n];
                    // the kernel keeps its sign until λT^α passes the first zero of E_{α,α}(−x), near 4.5
                    if l * (times[k] - times[j - 1]).powf(1.3) <= 4.5 {
                        assert!(wkj >= 0.0, "k {k} j {j} lambda {l}: {wkj}");
                    } else if wkj < 0.0 {
                        negative += 1;
                    }
                }
            }
        }
        // past the first zero the kernel oscillates and so do the weights
        assert!(negative > 0);
    }

    #[test]
    fn zero_data_stays_zero() {
        let d = interval(8);
        let cfg = SolverConfig::new(1.5, 1.0, 16);
        let zero = SpectralField::zeros(8);
        let tr = solve(
            &d,
            &cfg,
            &NonlinearitySpec::power_abs(1.0, 1.5),
            &zero,
            &zero,
        )
        .unwrap();
        assert!(!tr.blown);
        assert!(tr.fields.iter().all(|u| u.l2_norm() == 0.0));
        assert!(detect_blowup(&tr)
            .growth_table
            .iter()
            .all(|&(_, n)| n == 0.0));
    }

    #[test]
    fn inadmissible_growth_needs_override() {
        let d = interval(4);
        let mut cfg = SolverConfig::new(1.5, 0.1, 2);
        let f = NonlinearitySpec::power_abs(1.0, 3.0);
        let u = SpectralField::unit(4, 0);
        assert!(matches!(
            solve(&d, &cfg, &f, &u, &u),
            Err(Error::Inadmissible(_))
        ));
        cfg.override_admissibility = true;
        let tr = solve(&d, &cfg, &f, &u, &u).unwrap();
        assert!(tr.warnings[0].contains("overridden"));
    }

    #[test]
    fn blown_trajectory_cannot_continue() {
        let d = interval(4);
        let mut cfg = SolverConfig::new(1.5, 1.0, 4);
        cfg.blowup_threshold = 0.5;
        let u = SpectralField::unit(4, 0);
        let tr = solve(&d, &cfg, &NonlinearitySpec::zero(), &u, &u).unwrap();
        assert!(tr.blown);
        assert!(matches!(
            continue_trajectory(&d, &tr, 1.0, &cfg, &NonlinearitySpec::zero()),
            Err(Error::BlownUp(_))
        ));
    }

    #[test]
    fn nearest_index_picks_closest_node() {
        let d = interval(2);
        let cfg = SolverConfig::new(1.5, 1.0, 4);
        let u = SpectralField::unit(2, 0);
        let tr = solve(&d, &cfg, &NonlinearitySpec::zero(), &u, &u).unwrap();
        assert_eq!(tr.nearest_index(0.0), 0);
        assert_eq!(tr.nearest_index(0.3), 1);
        assert_eq!(tr.nearest_index(0.4), 2);
        assert_eq!(tr.nearest_index(9.0), 4);
    }
}
