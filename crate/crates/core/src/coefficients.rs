//! Constants of the product metric `g + ε²h` on `M × X`.
//!
//! The fiber `(X, h)` is Einstein with constant `Λ₀ > 0`; the base is either
//! flat or Einstein-like with constant scalar curvature `κ` (so `Ric = κ/n · g`
//! and `Δ scal = 0`). Under those assumptions every coefficient of the reduced
//! equation is a number rather than a field.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Flat,
    /// Constant scalar curvature `κ` of the base, with `Ric_g = (κ/n) g`.
    EinsteinLike(f64),
}

impl BaseKind {
    pub fn scalar_curvature(&self) -> f64 {
        match *self {
            BaseKind::Flat => 0.0,
            BaseKind::EinsteinLike(kappa) => kappa,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    /// Base dimension.
    pub n: u32,
    /// Fiber dimension.
    pub m: u32,
    /// Einstein constant of the fiber.
    pub lambda0: f64,
    pub base: BaseKind,
}

impl ProductSpec {
    pub fn new(n: u32, m: u32, lambda0: f64, base: BaseKind) -> Result<Self> {
        let spec = ProductSpec { n, m, lambda0, base };
        spec.validate()?;
        Ok(spec)
    }

    pub fn flat(n: u32, m: u32, lambda0: f64) -> Result<Self> {
        Self::new(n, m, lambda0, BaseKind::Flat)
    }

    /// Total dimension `N = n + m`.
    pub fn total_dim(&self) -> u32 {
        self.n + self.m
    }

    /// True when `A > 0` and `b > 2√a` are expected: `m ≥ 3`, or `m = 2` with `N ≥ 9`.
    pub fn in_positive_regime(&self) -> bool {
        self.m >= 3 || (self.m == 2 && self.total_dim() >= 9)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidSpec(format!("base dimension n = {} must be ≥ 1", self.n)));
        }
        if self.m < 2 {
            return Err(Error::InvalidSpec(format!("fiber dimension m = {} must be ≥ 2", self.m)));
        }
        if !(self.lambda0 > 0.0) || !self.lambda0.is_finite() {
            return Err(Error::InvalidSpec(format!("Einstein constant Λ₀ = {} must be positive", self.lambda0)));
        }
        if let BaseKind::EinsteinLike(kappa) = self.base {
            if !kappa.is_finite() {
                return Err(Error::InvalidSpec("base scalar curvature must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub spec: ProductSpec,
    /// `A_{N,m}`: the `ε⁻⁴` coefficient of the Q-curvature.
    pub big_a: f64,
    /// `a_{N,m} = (N − 4)/2 · A_{N,m}`.
    pub a: f64,
    /// `b_{N,m} = (N² − 4N + 8) / (2(N − 1)(N − 2)) · mΛ₀`.
    pub b: f64,
    pub f0: f64,
    pub f2: f64,
    /// `φ(u) = c_phi · Δu` on the supported bases.
    pub c_phi: f64,
}

impl GeometryConstants {
    pub fn total_dim(&self) -> u32 {
        self.spec.total_dim()
    }

    /// `(N − 4)/2`, the factor in front of the zeroth-order curvature terms.
    pub fn conformal_factor(&self) -> f64 {
        (self.total_dim() as f64 - 4.0) / 2.0
    }

    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a
    }

    /// `Q = f₀ + ε⁻² f₂ + ε⁻⁴ A`.
    pub fn q_curvature(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
        }
        let e2 = eps * eps;
        Ok(self.f0 + self.f2 / e2 + self.big_a / (e2 * e2))
    }

    /// The sign law and coercivity law hold for this product.
    pub fn sign_ok(&self) -> bool {
        let spec = &self.spec;
        let same_sign = (self.a > 0.0) == (self.big_a > 0.0);
        if spec.in_positive_regime() {
            same_sign && self.big_a > 0.0 && self.b > 0.0 && self.discriminant() > 0.0
        } else if spec.m == 2 && (5..=8).contains(&spec.total_dim()) {
            same_sign && self.big_a < 0.0
        } else {
            same_sign
        }
    }
}

/// Evaluates every product-geometry constant from its closed form.
pub fn paneitz_constants(spec: &ProductSpec) -> Result<GeometryConstants> {
    spec.validate()?;
    let big_n_int = spec.total_dim();
    if big_n_int <= 4 {
        return Err(Error::InvalidSpec(format!("total dimension N = {big_n_int} must exceed 4")));
    }
    let big_n = big_n_int as f64;
    let n = spec.n as f64;
    let m = spec.m as f64;
    let l0 = spec.lambda0;
    let kappa = spec.base.scalar_curvature();

    let nm1 = big_n - 1.0;
    let nm2 = big_n - 2.0;
    let cubic = big_n.powi(3) - 4.0 * big_n.powi(2) + 16.0 * big_n - 16.0;
    let quad = big_n * big_n - 4.0 * big_n + 8.0;

    let big_a = m * l0 * l0 / (nm2 * nm2) * (cubic / (8.0 * nm1 * nm1) * m - 2.0);
    let a = (big_n - 4.0) / 2.0 * big_a;
    let b = quad / (2.0 * nm1 * nm2) * m * l0;

    // Δ scal = 0 and |Ric|² = κ²/n on the supported bases.
    let ric_sq = kappa * kappa / n;
    let f0 = -2.0 / (nm2 * nm2) * ric_sq + cubic / (8.0 * nm1 * nm1 * nm2 * nm2) * kappa * kappa;
    let f2 = cubic / (4.0 * nm1 * nm1 * nm2 * nm2) * m * kappa * l0;
    let c_phi = 4.0 * kappa / (n * nm2) - kappa * quad / (2.0 * nm1 * nm2);

    Ok(GeometryConstants { spec: *spec, big_a, a, b, f0, f2, c_phi })
}

/// `Q_{g_ε}` of the product metric.
pub fn q_curvature_product(spec: &ProductSpec, eps: f64) -> Result<f64> {
    paneitz_constants(spec)?.q_curvature(eps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientRow {
    pub spec: ProductSpec,
    pub outcome: std::result::Result<GeometryConstants, String>,
}

impl CoefficientRow {
    pub fn constants(&self) -> Option<&GeometryConstants> {
        self.outcome.as_ref().ok()
    }

    pub fn sign_ok(&self) -> Option<bool> {
        self.constants().map(GeometryConstants::sign_ok)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientReport {
    pub rows: Vec<CoefficientRow>,
}

pub const REPORT_HEADER: &str = "n,m,N,lambda0,A,a,b,f0,f2,c_phi,b2_minus_4a,sign_ok";

impl CoefficientReport {
    /// CSV with [`REPORT_HEADER`]; rows whose spec was rejected carry `NaN`
    /// values and `flagged` in the sign column.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for row in &self.rows {
            let s = &row.spec;
            let _ = write!(out, "{},{},{},{},", s.n, s.m, s.total_dim(), s.lambda0);
            match &row.outcome {
                Ok(c) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        c.big_a,
                        c.a,
                        c.b,
                        c.f0,
                        c.f2,
                        c.c_phi,
                        c.discriminant(),
                        c.sign_ok()
                    );
                }
                Err(_) => out.push_str("NaN,NaN,NaN,NaN,NaN,NaN,NaN,flagged\n"),
            }
        }
        out
    }

    pub fn all_signs_ok(&self) -> bool {
        self.rows.iter().all(|r| r.sign_ok() != Some(false))
    }
}

/// Tabulates the constants for every spec; failures become flagged rows.
pub fn coefficient_report(specs: &[ProductSpec]) -> Result<CoefficientReport> {
    if specs.is_empty() {
        return Err(Error::EmptyInput("coefficient report needs at least one spec"));
    }
    let rows = specs
        .iter()
        .map(|spec| CoefficientRow { spec: *spec, outcome: paneitz_constants(spec).map_err(|e| e.to_string()) })
        .collect();
    Ok(CoefficientReport { rows })
}
