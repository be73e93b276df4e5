//! The energy
//!
//! ```text
//! J(u) = ε⁻ⁿ ∫ ( ½ε⁴(Δu)² + ½ε² b_eff |∇u|² + ½ a_eff u² − (u⁺)^{q+1}/(q+1) )
//! ```
//!
//! with constant coefficients, its first variation, and the Nehari manifold
//! `{ Q(u) = M(u) }` where `Q` is the ε⁻ⁿ-weighted quadratic form and
//! `M(u) = ε⁻ⁿ ∫ (u⁺)^{q+1}`. Curvature terms of an Einstein-like base are
//! folded into the effective coefficients
//!
//! ```text
//! b_eff = b − ε² c_phi,    a_eff = a + (N−4)/2 · (ε⁴ f₀ + ε² f₂),
//! ```
//!
//! using `∫ u · c_phi Δu = −c_phi ∫ |∇u|²`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::GeometryConstants;
use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};

/// Mass below this fraction of `∫|u|^{q+1}` counts as `u⁺ ≡ 0`.
pub const DEGENERATE_MASS_FRACTION: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearCoefficients {
    pub a: f64,
    pub b: f64,
    pub f0: f64,
    pub f2: f64,
    pub c_phi: f64,
    /// `(N − 4)/2`; irrelevant when `f₀ = f₂ = 0`.
    pub conformal_factor: f64,
}

impl LinearCoefficients {
    /// Plain `(α, β)` coefficients with no curvature corrections.
    pub fn limit(alpha: f64, beta: f64) -> Self {
        LinearCoefficients { a: alpha, b: beta, f0: 0.0, f2: 0.0, c_phi: 0.0, conformal_factor: 0.0 }
    }

    pub fn effective_a(&self, eps: f64) -> f64 {
        let e2 = eps * eps;
        self.a + self.conformal_factor * (e2 * e2 * self.f0 + e2 * self.f2)
    }

    pub fn effective_b(&self, eps: f64) -> f64 {
        self.b - eps * eps * self.c_phi
    }
}

impl From<&GeometryConstants> for LinearCoefficients {
    fn from(c: &GeometryConstants) -> Self {
        LinearCoefficients {
            a: c.a,
            b: c.b,
            f0: c.f0,
            f2: c.f2,
            c_phi: c.c_phi,
            conformal_factor: c.conformal_factor(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnergyParams {
    eps: f64,
    q: f64,
    coeffs: LinearCoefficients,
    grid: Arc<TorusGrid>,
    a_eff: f64,
    b_eff: f64,
    /// `ε⁴|k|⁴ + ε² b_eff |k|² + a_eff` per mode.
    symbol: Vec<f64>,
    /// `ε⁻ⁿ`.
    weight: f64,
}

impl EnergyParams {
    pub fn new(eps: f64, q: f64, coeffs: LinearCoefficients, grid: Arc<TorusGrid>) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
        }
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("exponent q = {q} must exceed 1")));
        }
        let n = grid.dim();
        if n > 4 {
            let critical = (n as f64 + 4.0) / (n as f64 - 4.0);
            if q >= critical {
                return Err(Error::InvalidParameter(format!("q = {q} is not subcritical (< {critical})")));
            }
        }
        let a_eff = coeffs.effective_a(eps);
        let b_eff = coeffs.effective_b(eps);
        if !(a_eff > 0.0) || !(b_eff > 0.0) {
            return Err(Error::NotCoercive(format!("a_eff = {a_eff}, b_eff = {b_eff} must both be positive")));
        }
        let e2 = eps * eps;
        let e4 = e2 * e2;
        let symbol: Vec<f64> = grid.k_squared().iter().map(|&t| e4 * t * t + e2 * b_eff * t + a_eff).collect();
        if let Some(bad) = symbol.iter().find(|&&s| !(s > 0.0)) {
            return Err(Error::NotCoercive(format!("Fourier symbol {bad} is not positive")));
        }
        let weight = eps.powi(-(n as i32));
        Ok(EnergyParams { eps, q, coeffs, grid, a_eff, b_eff, symbol, weight })
    }

    /// Same coefficients and grid at another `ε`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(eps, self.q, self.coeffs, self.grid.clone())
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn coefficients(&self) -> &LinearCoefficients {
        &self.coeffs
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn a_eff(&self) -> f64 {
        self.a_eff
    }

    pub fn b_eff(&self) -> f64 {
        self.b_eff
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// The `ε⁻ⁿ` prefactor.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// The positive constant solution `a_eff^{1/(q−1)}`.
    pub fn constant_solution_value(&self) -> f64 {
        self.a_eff.powf(1.0 / (self.q - 1.0))
    }

    fn check(&self, u: &Field) -> Result<()> {
        if **u.grid() == *self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `Q(u) = ε⁻ⁿ ∫ (ε⁴(Δu)² + ε² b_eff |∇u|² + a_eff u²)`.
    pub fn quadratic_form(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(self.weight * self.grid.multiplier_form(u.values(), &self.symbol))
    }

    /// `∫ (u⁺)^{q+1}` without the `ε⁻ⁿ` factor.
    fn raw_mass(&self, u: &Field) -> f64 {
        let e = self.q + 1.0;
        u.values().iter().map(|&v| if v > 0.0 { v.powf(e) } else { 0.0 }).sum::<f64>() * self.grid.cell_volume()
    }

    /// `M(u) = ε⁻ⁿ ∫ (u⁺)^{q+1}`.
    pub fn mass(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(self.weight * self.raw_mass(u))
    }

    pub fn energy(&self, u: &Field) -> Result<f64> {
        let quad = self.quadratic_form(u)?;
        let mass = self.mass(u)?;
        Ok(quad / 2.0 - mass / (self.q + 1.0))
    }

    /// `L u = ε⁴Δ²u − ε² b_eff Δu + a_eff u`.
    pub fn linear_operator(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(u.apply_multiplier(&self.symbol))
    }

    /// `L⁻¹ f`.
    pub fn solve_linear(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let inv: Vec<f64> = self.symbol.iter().map(|s| 1.0 / s).collect();
        Ok(f.apply_multiplier(&inv))
    }

    /// `(u⁺)^q`, equal to `(u⁺)^{q−1} u` pointwise.
    pub fn nonlinearity(&self, u: &Field) -> Field {
        let q = self.q;
        u.map(|v| if v > 0.0 { v.powf(q) } else { 0.0 })
    }

    /// L²-Riesz representative of `J′(u)`: `ε⁻ⁿ (L u − (u⁺)^q)`.
    pub fn gradient(&self, u: &Field) -> Result<Field> {
        let lu = self.linear_operator(u)?;
        Ok(lu.sub(&self.nonlinearity(u))?.scale(self.weight))
    }

    fn check_mass(&self, u: &Field) -> Result<f64> {
        let raw = self.raw_mass(u);
        let e = self.q + 1.0;
        let scale: f64 = u.values().iter().map(|v| v.abs().powf(e)).sum::<f64>() * self.grid.cell_volume();
        if !(raw > DEGENERATE_MASS_FRACTION * scale) || raw == 0.0 {
            return Err(Error::DegenerateInput("positive part vanishes; Nehari projection undefined".into()));
        }
        Ok(self.weight * raw)
    }

    /// The unique `λ > 0` with `λu` on the Nehari manifold:
    /// `λ = (Q(u) / M(u))^{1/(q−1)}`.
    pub fn nehari_lambda(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let mass = self.check_mass(u)?;
        let quad = self.quadratic_form(u)?;
        Ok((quad / mass).powf(1.0 / (self.q - 1.0)))
    }

    pub fn nehari_project(&self, u: &Field) -> Result<NehariPoint> {
        let lambda = self.nehari_lambda(u)?;
        let projected = u.scale(lambda);
        let mut point = NehariPoint::evaluate(projected, self)?;
        point.lambda = lambda;
        Ok(point)
    }

    /// `Y⁺(u) = ½Q(u) / M(u)^{2/(q+1)}`, invariant under `u ↦ cu`, `c > 0`.
    pub fn y_quotient(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let mass = self.check_mass(u)?;
        let quad = self.quadratic_form(u)?;
        Ok(0.5 * quad / mass.powf(2.0 / (self.q + 1.0)))
    }

    /// Level obtained from a quotient value: `(q−1)/(q+1) · 2^{2/(q−1)} · Y^{(q+1)/(q−1)}`.
    pub fn level_from_quotient(&self, y: f64) -> f64 {
        level_from_quotient(self.q, y)
    }
}

pub fn level_from_quotient(q: f64, y: f64) -> f64 {
    (q - 1.0) / (q + 1.0) * 2f64.powf(2.0 / (q - 1.0)) * y.powf((q + 1.0) / (q - 1.0))
}

/// Inverse of [`level_from_quotient`]: `2^{−2/(q+1)} ((q+1)/(q−1) · m)^{(q−1)/(q+1)}`.
pub fn quotient_from_level(q: f64, level: f64) -> f64 {
    2f64.powf(-2.0 / (q + 1.0)) * ((q + 1.0) / (q - 1.0) * level).powf((q - 1.0) / (q + 1.0))
}

/// A field on the Nehari manifold together with its cached scalars.
#[derive(Clone, Debug)]
pub struct NehariPoint {
    pub u: Field,
    pub energy: f64,
    /// `Q(u)`, already carrying `ε⁻ⁿ`.
    pub quad: f64,
    /// `ε⁻ⁿ ∫ (u⁺)^{q+1}`.
    pub mass: f64,
    /// `‖J′(u)‖₂` of the L²-Riesz gradient.
    pub grad_norm: f64,
    /// Factor applied by the projection that produced this point (1 if none).
    pub lambda: f64,
}

impl NehariPoint {
    /// Evaluates the cached scalars of `u`; does not rescale it.
    pub fn evaluate(u: Field, p: &EnergyParams) -> Result<Self> {
        let quad = p.quadratic_form(&u)?;
        let mass = p.mass(&u)?;
        let energy = quad / 2.0 - mass / (p.q() + 1.0);
        let grad_norm = p.gradient(&u)?.l2_norm();
        Ok(NehariPoint { u, energy, quad, mass, grad_norm, lambda: 1.0 })
    }

    /// `|Q − M| / max(Q, M)`.
    pub fn nehari_defect(&self) -> f64 {
        (self.quad - self.mass).abs() / self.quad.max(self.mass)
    }

    /// `(q−1)/(2(q+1)) · M`, which equals the energy on the manifold.
    pub fn mass_level(&self, q: f64) -> f64 {
        (q - 1.0) / (2.0 * (q + 1.0)) * self.mass
    }
}
