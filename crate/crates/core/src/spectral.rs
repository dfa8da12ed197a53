//! Dirichlet Laplacian on intervals and rectangles.
//!
//! The eigenpairs of −Δ with zero boundary values are known in closed form:
//! on `(0, L)` they are `λ_n = (nπ/L)²`, `φ_n(x) = √(2/L) sin(nπx/L)`, and on a
//! rectangle the tensor products. Retained modes are sorted by ascending
//! eigenvalue, ties broken lexicographically on the mode tuple.
//!
//! Grid functions live on the uniform node set `x_i = iL/G`, `i = 0..=G`
//! (boundary nodes included), flattened row-major. Integrals use composite
//! trapezoid weights; with `G ≥ 2K` the sampled sines are exactly orthonormal
//! under that rule.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry and resolution of a box domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dimension: usize,
    #[serde(default)]
    pub lengths: Vec<f64>,
    /// Grid intervals per axis.
    pub grid: Vec<usize>,
    /// Retained sine modes per axis.
    pub modes: Vec<usize>,
}

impl DomainSpec {
    pub fn interval(length: f64, grid: usize, modes: usize) -> Self {
        Self {
            dimension: 1,
            lengths: vec![length],
            grid: vec![grid],
            modes: vec![modes],
        }
    }

    pub fn rectangle(lengths: [f64; 2], grid: [usize; 2], modes: [usize; 2]) -> Self {
        Self {
            dimension: 2,
            lengths: lengths.to_vec(),
            grid: grid.to_vec(),
            modes: modes.to_vec(),
        }
    }

    /// Side lengths, defaulting to π on every axis.
    pub fn side_lengths(&self) -> Vec<f64> {
        if self.lengths.is_empty() {
            vec![PI; self.dimension]
        } else {
            self.lengths.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDomain(msg));
        if self.dimension != 1 && self.dimension != 2 {
            return bad(format!("dimension must be 1 or 2, got {}", self.dimension));
        }
        let lengths = self.side_lengths();
        if lengths.len() != self.dimension
            || self.grid.len() != self.dimension
            || self.modes.len() != self.dimension
        {
            return bad(format!(
                "lengths, grid and modes need {} entries each",
                self.dimension
            ));
        }
        for (axis, &len) in lengths.iter().enumerate() {
            if !(len > 0.0 && len.is_finite()) {
                return bad(format!("side length {len} on axis {axis} must be positive"));
            }
        }
        for axis in 0..self.dimension {
            let (k, g) = (self.modes[axis], self.grid[axis]);
            if k == 0 {
                return bad(format!("mode cutoff on axis {axis} must be at least 1"));
            }
            if g < 2 * k {
                return bad(format!(
                    "grid resolution {g} on axis {axis} must be at least twice the mode cutoff {k}"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
struct AxisBasis {
    /// `values[(n-1) * nodes + i] = φ_n(x_i)`
    values: Vec<f64>,
    weights: Vec<f64>,
    nodes: usize,
}

impl AxisBasis {
    fn new(length: f64, grid: usize, modes: usize) -> Self {
        let nodes = grid + 1;
        let h = length / grid as f64;
        let norm = (2.0 / length).sqrt();
        let mut values = Vec::with_capacity(modes * nodes);
        for n in 1..=modes {
            for i in 0..nodes {
                // reduce the phase modulo 2G to keep sin() arguments small
                let phase = ((n * i) % (2 * grid)) as f64 * PI / grid as f64;
                values.push(norm * phase.sin());
            }
        }
        let mut weights = vec![h; nodes];
        weights[0] = 0.5 * h;
        weights[nodes - 1] = 0.5 * h;
        Self {
            values,
            weights,
            nodes,
        }
    }

    fn row(&self, n: usize) -> &[f64] {
        &self.values[(n - 1) * self.nodes..n * self.nodes]
    }
}

/// Eigen-decomposition of the Dirichlet Laplacian on a box.
#[derive(Debug)]
pub struct SpectralDomain {
    spec: DomainSpec,
    lengths: Vec<f64>,
    eigenvalues: Vec<f64>,
    modes: Vec<Vec<usize>>,
    bases: OnceLock<Vec<AxisBasis>>,
}

impl Clone for SpectralDomain {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            lengths: self.lengths.clone(),
            eigenvalues: self.eigenvalues.clone(),
            modes: self.modes.clone(),
            bases: OnceLock::new(),
        }
    }
}

impl PartialEq for SpectralDomain {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

/// Builds the eigenpairs for a validated spec.
pub fn build_domain(spec: &DomainSpec) -> Result<SpectralDomain> {
    SpectralDomain::new(spec)
}

impl SpectralDomain {
    pub fn new(spec: &DomainSpec) -> Result<Self> {
        spec.validate()?;
        let lengths = spec.side_lengths();
        let axis_eig = |axis: usize, n: usize| (n as f64 * PI / lengths[axis]).powi(2);
        let mut pairs: Vec<(f64, Vec<usize>)> = match spec.dimension {
            1 => (1..=spec.modes[0])
                .map(|n| (axis_eig(0, n), vec![n]))
                .collect(),
            _ => (1..=spec.modes[0])
                .flat_map(|m| (1..=spec.modes[1]).map(move |n| (m, n)))
                .map(|(m, n)| (axis_eig(0, m) + axis_eig(1, n), vec![m, n]))
                .collect(),
        };
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let (eigenvalues, modes) = pairs.into_iter().unzip();
        Ok(Self {
            spec: spec.clone(),
            lengths,
            eigenvalues,
            modes,
            bases: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Mode tuples aligned with [`eigenvalues`](Self::eigenvalues).
    pub fn modes(&self) -> &[Vec<usize>] {
        &self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Nodes per axis (boundary included).
    pub fn grid_shape(&self) -> Vec<usize> {
        self.spec.grid.iter().map(|g| g + 1).collect()
    }

    pub fn grid_len(&self) -> usize {
        self.grid_shape().iter().product()
    }

    /// Node coordinates, flattened row-major, one `Vec` per point.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dimension())
            .map(|a| {
                let g = self.spec.grid[a];
                (0..=g)
                    .map(|i| i as f64 * self.lengths[a] / g as f64)
                    .collect()
            })
            .collect();
        match self.dimension() {
            1 => axes[0].iter().map(|&x| vec![x]).collect(),
            _ => axes[0]
                .iter()
                .flat_map(|&x| axes[1].iter().map(move |&y| vec![x, y]))
                .collect(),
        }
    }

    /// Trapezoid weights for every grid node, flattened row-major.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let bases = self.bases();
        match self.dimension() {
            1 => bases[0].weights.clone(),
            _ => bases[0]
                .weights
                .iter()
                .flat_map(|&wx| bases[1].weights.iter().map(move |&wy| wx * wy))
                .collect(),
        }
    }

    fn bases(&self) -> &[AxisBasis] {
        self.bases.get_or_init(|| {
            (0..self.dimension())
                .map(|a| AxisBasis::new(self.lengths[a], self.spec.grid[a], self.spec.modes[a]))
                .collect()
        })
    }

    /// Samples of the `index`-th eigenfunction (in sorted order) on the grid.
    pub fn basis_samples(&self, index: usize) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.mode_count()];
        coeffs[index] = 1.0;
        self.synthesize(&coeffs)
    }

    fn check_grid(&self, values: &[f64]) -> Result<()> {
        let expected = self.grid_len();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(())
    }

    pub fn check_field(&self, field: &SpectralField) -> Result<()> {
        if field.len() != self.mode_count() {
            return Err(Error::ShapeMismatch {
                expected: self.mode_count(),
                got: field.len(),
            });
        }
        Ok(())
    }

    /// Quadrature inner products ⟨values, φ_n⟩ for every retained mode.
    pub fn transform(&self, values: &[f64]) -> Result<SpectralField> {
        self.check_grid(values)?;
        Ok(SpectralField::new(self.analyze(values)))
    }

    /// Pointwise Σ c_n φ_n on the grid.
    pub fn inverse_transform(&self, field: &SpectralField) -> Result<Vec<f64>> {
        self.check_field(field)?;
        Ok(self.synthesize(field.coeffs()))
    }

    fn analyze(&self, values: &[f64]) -> Vec<f64> {
        let bases = self.bases();
        match self.dimension() {
            1 => {
                let b = &bases[0];
                self.modes
                    .iter()
                    .map(|mode| {
                        b.row(mode[0])
                            .iter()
                            .zip(&b.weights)
                            .zip(values)
                            .map(|((p, w), v)| p * w * v)
                            .sum()
                    })
                    .collect()
            }
            _ => {
                let (bx, by) = (&bases[0], &bases[1]);
                let (nx, ny) = (bx.nodes, by.nodes);
                let ky = self.spec.modes[1];
                // contract the y axis: partial[i][n-1] = Σ_j w_j v_ij φ_n(y_j)
                let mut partial = vec![0.0; nx * ky];
                for i in 0..nx {
                    let row = &values[i * ny..(i + 1) * ny];
                    for n in 1..=ky {
                        partial[i * ky + n - 1] = by
                            .row(n)
                            .iter()
                            .zip(&by.weights)
                            .zip(row)
                            .map(|((p, w), v)| p * w * v)
                            .sum();
                    }
                }
                self.modes
                    .iter()
                    .map(|mode| {
                        let (m, n) = (mode[0], mode[1]);
                        bx.row(m)
                            .iter()
                            .zip(&bx.weights)
                            .enumerate()
                            .map(|(i, (p, w))| p * w * partial[i * ky + n - 1])
                            .sum()
                    })
                    .collect()
            }
        }
    }

    fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let bases = self.bases();
        match self.dimension() {
            1 => {
                let b = &bases[0];
                let mut out = vec![0.0; b.nodes];
                for (mode, &c) in self.modes.iter().zip(coeffs) {
                    if c != 0.0 {
                        for (o, p) in out.iter_mut().zip(b.row(mode[0])) {
                            *o += c * p;
                        }
                    }
                }
                out
            }
            _ => {
                let (bx, by) = (&bases[0], &bases[1]);
                let (nx, ny) = (bx.nodes, by.nodes);
                let kx = self.spec.modes[0];
                // partial[m-1][j] = Σ_n c_mn φ_n(y_j)
                let mut partial = vec![0.0; kx * ny];
                for (mode, &c) in self.modes.iter().zip(coeffs) {
                    if c != 0.0 {
                        let (m, n) = (mode[0], mode[1]);
                        let dst = &mut partial[(m - 1) * ny..m * ny];
                        for (d, p) in dst.iter_mut().zip(by.row(n)) {
                            *d += c * p;
                        }
                    }
                }
                let mut out = vec![0.0; nx * ny];
                for m in 1..=kx {
                    let src = &partial[(m - 1) * ny..m * ny];
                    if src.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for (i, px) in bx.row(m).iter().enumerate() {
                        let dst = &mut out[i * ny..(i + 1) * ny];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += px * s;
                        }
                    }
                }
                out
            }
        }
    }

    /// X^{1+θ} norm (Σ λ_n^{2θ} c_n²)^{1/2}.
    pub fn fractional_norm(&self, field: &SpectralField, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order theta = {theta} must be non-negative"
            )));
        }
        self.check_field(field)?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(field.coeffs())
            .map(|(l, c)| l.powf(2.0 * theta) * c * c)
            .sum::<f64>()
            .sqrt())
    }

    /// Quadrature L^q norm (Σ w_i |v_i|^q)^{1/q} of grid values.
    pub fn lq_norm(&self, values: &[f64], q: f64) -> Result<f64> {
        if !(q > 1.0) {
            return Err(Error::InvalidParameter(format!("q = {q} must exceed 1")));
        }
        self.check_grid(values)?;
        let weights = self.quadrature_weights();
        let sum: f64 = weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v.abs().powf(q))
            .sum();
        Ok(sum.powf(1.0 / q))
    }

    /// Gram matrix of the sampled eigenfunctions under the grid quadrature.
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.mode_count())
            .map(|k| self.analyze(&self.basis_samples(k)))
            .collect()
    }

    /// `true` for modes kept by the 2/3 rule (every axis index ≤ 2K/3).
    pub fn dealias_mask(&self) -> Vec<bool> {
        let limits: Vec<usize> = self.spec.modes.iter().map(|&k| (2 * k) / 3).collect();
        self.modes
            .iter()
            .map(|mode| mode.iter().zip(&limits).all(|(&m, &lim)| m <= lim.max(1)))
            .collect()
    }
}

/// A function stored through its eigen-coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralField(Vec<f64>);

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// The `index`-th eigenfunction.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut c = vec![0.0; len];
        c[index] = 1.0;
        Self(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// L² norm; the basis is orthonormal so this is the coefficient 2-norm.
    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|c| c * factor).collect())
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        SpectralField(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        SpectralField(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

/// Outcome of the parameter admissibility arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// Largest admissible β for the given growth exponent (clamped at 0).
    pub beta_max: f64,
    /// Supremum of the attainable regularity gain θ.
    pub theta_sup: f64,
    /// Lower end of the window 1 − N/(2q′) < β (at least 0).
    pub beta_lower: f64,
    pub ok: bool,
}

/// Parameter arithmetic for the growth condition 1 < ρ ≤ 1 + (2q/N)(1 − β)
/// with 1 − N/(2q′) < β < 1.
pub fn admissibility(n: usize, q: f64, rho: f64, alpha: f64) -> Admissibility {
    let nf = n as f64;
    let q_conj = q / (q - 1.0);
    let raw = 1.0 - nf * (rho - 1.0) / (2.0 * q);
    let beta_lower = (1.0 - nf / (2.0 * q_conj)).max(0.0);
    let beta_max = raw.clamp(0.0, 1.0);
    let ok = n >= 1
        && q > 1.0
        && rho > 1.0
        && alpha > 1.0
        && alpha < 2.0
        && beta_lower < 1.0
        && raw > beta_lower;
    Admissibility {
        beta_max,
        theta_sup: beta_max,
        beta_lower,
        ok,
    }
}
