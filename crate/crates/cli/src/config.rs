use std::fmt;

use paneitz_core::coefficients::paneitz_constants;
use paneitz_core::{BaseKind, LinearCoefficients, ProductSpec, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Constants,
    #[serde(rename = "groundstate")]
    GroundState,
    #[serde(alias = "solve")]
    Multiplicity,
    Sweep,
}

impl Mode {
    pub fn verb(self) -> &'static str {
        match self {
            Mode::Constants => "constants",
            Mode::GroundState => "groundstate",
            Mode::Multiplicity => "solve",
            Mode::Sweep => "sweep",
        }
    }
}

/// Einstein fiber over a base of constant scalar curvature `kappa`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductConfig {
    pub n: u32,
    pub m: u32,
    #[serde(default = "one")]
    pub lambda0: f64,
    #[serde(default)]
    pub kappa: f64,
}

/// Constant-coefficient limit `Δ²u − βΔu + αu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "P")]
    pub points: usize,
}

/// Box of the ground-state solve; the dimension comes from `[grid]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateConfig {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "P")]
    pub points: usize,
    pub n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    /// Photography seeds per axis.
    #[serde(default = "eight")]
    pub lattice: usize,
    #[serde(default)]
    pub random: usize,
    #[serde(default = "yes")]
    pub constant: bool,
    /// Cutoff radius `s`; half the torus edge when absent.
    pub cutoff: Option<f64>,
    /// Concentration radius for the sweep; a quarter of the edge when absent.
    pub radius: Option<f64>,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        SeedsConfig { lattice: 8, random: 0, constant: true, cutoff: None, radius: None }
    }
}

/// Rows of the coefficient table: every fiber dimension in `fibers`
/// against every total dimension in `total`, inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub fibers: Vec<u32>,
    pub total: [u32; 2],
    #[serde(default = "one")]
    pub lambda0: f64,
    #[serde(default)]
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    #[serde(default = "three")]
    pub q: f64,
    /// Single source of all randomness.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    pub output_dir: Option<String>,
    pub product: Option<ProductConfig>,
    pub limit: Option<LimitConfig>,
    pub grid: Option<GridConfig>,
    pub groundstate: Option<GroundStateConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seeds: SeedsConfig,
    pub constants: Option<ConstantsConfig>,
}

fn one() -> f64 {
    1.0
}
fn three() -> f64 {
    3.0
}
fn eight() -> usize {
    8
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.into(), message: message.into() }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("{v} must be a positive finite number")))
    }
}

fn check_points(field: &str, p: usize) -> Result<(), ConfigError> {
    if p < 8 || !p.is_multiple_of(2) {
        return Err(bad(field, format!("{p} must be even and at least 8")));
    }
    Ok(())
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let field = e.span().map(|s| text[s].trim().to_string()).filter(|s| !s.is_empty());
        bad(field.as_deref().unwrap_or("<document>"), e.message().to_string())
    })
}

/// What the linear part of the equation is built from.
pub enum Coefficients {
    Limit(f64, f64),
    Product(ProductSpec),
}

impl Coefficients {
    pub fn linear(&self) -> Result<LinearCoefficients, ConfigError> {
        match self {
            Coefficients::Limit(a, b) => Ok(LinearCoefficients::limit(*a, *b)),
            Coefficients::Product(spec) => paneitz_constants(spec)
                .map(|c| LinearCoefficients::from(&c))
                .map_err(|e| bad("product", e.to_string())),
        }
    }

    /// `(α, β)` of the limit problem.
    pub fn limit_pair(&self) -> Result<(f64, f64), ConfigError> {
        match self {
            Coefficients::Limit(a, b) => Ok((*a, *b)),
            Coefficients::Product(spec) => {
                let c = paneitz_constants(spec).map_err(|e| bad("product", e.to_string()))?;
                Ok((c.a, c.b))
            }
        }
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types serialize")
    }

    /// `[limit]` wins over `[product]` when both are given.
    pub fn coefficients(&self) -> Result<Coefficients, ConfigError> {
        if let Some(l) = &self.limit {
            return Ok(Coefficients::Limit(l.alpha, l.beta));
        }
        match &self.product {
            Some(p) => {
                let base = if p.kappa == 0.0 { BaseKind::Flat } else { BaseKind::EinsteinLike(p.kappa) };
                ProductSpec::new(p.n, p.m, p.lambda0, base)
                    .map(Coefficients::Product)
                    .map_err(|e| bad("product", e.to_string()))
            }
            None => Err(bad("limit", "one of [limit] or [product] is required")),
        }
    }

    pub fn grid(&self) -> Result<&GridConfig, ConfigError> {
        self.grid.as_ref().ok_or_else(|| bad("grid", "section [grid] is required"))
    }

    pub fn ground_state_box(&self) -> Result<&GroundStateConfig, ConfigError> {
        self.groundstate.as_ref().ok_or_else(|| bad("groundstate", "section [groundstate] is required"))
    }

    pub fn ground_state_dim(&self) -> Result<usize, ConfigError> {
        let gs = self.ground_state_box()?;
        match (gs.n, &self.grid) {
            (Some(n), Some(g)) if n != g.n => {
                Err(bad("groundstate.n", format!("{n} differs from grid.n = {}", g.n)))
            }
            (Some(n), _) => Ok(n),
            (None, Some(g)) => Ok(g.n),
            (None, None) => Err(bad("groundstate.n", "needed when [grid] is absent")),
        }
    }

    pub fn specs(&self) -> Result<Vec<ProductSpec>, ConfigError> {
        let c = self.constants.as_ref().ok_or_else(|| bad("constants", "section [constants] is required"))?;
        let base = if c.kappa == 0.0 { BaseKind::Flat } else { BaseKind::EinsteinLike(c.kappa) };
        let mut out = Vec::new();
        for &m in &c.fibers {
            for big_n in c.total[0]..=c.total[1] {
                if big_n <= m {
                    continue;
                }
                out.push(ProductSpec { n: big_n - m, m, lambda0: c.lambda0, base });
            }
        }
        Ok(out)
    }

    /// Checks everything `mode` needs before any compute.
    pub fn validate(&self, mode: Mode) -> Result<(), ConfigError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(bad("mode", format!("config says `{}` but the verb is `{}`", m.verb(), mode.verb())));
            }
        }
        if !(self.q > 1.0) || !self.q.is_finite() {
            return Err(bad("q", format!("{} must exceed 1", self.q)));
        }
        self.solver.validate().map_err(|e| bad("solver", e.to_string()))?;
        match mode {
            Mode::Constants => {
                let c = self.constants.as_ref().ok_or_else(|| bad("constants", "section [constants] is required"))?;
                if c.fibers.is_empty() {
                    return Err(bad("constants.fibers", "must list at least one fiber dimension"));
                }
                if let Some(&m) = c.fibers.iter().find(|&&m| m < 2) {
                    return Err(bad("constants.fibers", format!("fiber dimension {m} must be at least 2")));
                }
                if c.total[0] > c.total[1] {
                    return Err(bad("constants.total", "range must be increasing"));
                }
                positive("constants.lambda0", c.lambda0)?;
                if !c.kappa.is_finite() {
                    return Err(bad("constants.kappa", "must be finite"));
                }
                if self.specs()?.is_empty() {
                    return Err(bad("constants.total", "no row has a base of dimension at least 1"));
                }
            }
            Mode::GroundState => {
                self.check_ground_state()?;
            }
            Mode::Multiplicity | Mode::Sweep => {
                self.check_ground_state()?;
                let g = self.grid()?;
                if g.n == 0 || g.n > 3 {
                    return Err(bad("grid.n", format!("{} must lie in 1..=3", g.n)));
                }
                positive("grid.L", g.length)?;
                check_points("grid.P", g.points)?;
                if self.eps_list.is_empty() {
                    return Err(bad("eps_list", "must not be empty"));
                }
                for &e in &self.eps_list {
                    positive("eps_list", e)?;
                }
                if mode == Mode::Multiplicity && self.eps_list.len() != 1 {
                    return Err(bad("eps_list", "solve takes exactly one ε"));
                }
                if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(bad("eps_list", "must be strictly decreasing"));
                }
                if self.seeds.lattice == 0 && self.seeds.random == 0 && !self.seeds.constant {
                    return Err(bad("seeds", "no seeds requested"));
                }
                if let Some(s) = self.seeds.cutoff {
                    positive("seeds.cutoff", s)?;
                    if s >= g.length {
                        return Err(bad("seeds.cutoff", format!("{s} must be below grid.L = {}", g.length)));
                    }
                }
                if let Some(r) = self.seeds.radius {
                    positive("seeds.radius", r)?;
                    if r >= g.length / 2.0 {
                        return Err(bad("seeds.radius", format!("{r} must be below grid.L/2")));
                    }
                }
                let lin = self.coefficients()?.linear()?;
                for &e in &self.eps_list {
                    let (a, b) = (lin.effective_a(e), lin.effective_b(e));
                    if !(a > 0.0 && b > 0.0) {
                        return Err(bad(
                            "eps_list",
                            format!("at ε = {e} the effective pair (a, b) = ({a}, {b}) is not coercive"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_ground_state(&self) -> Result<(), ConfigError> {
        let (alpha, beta) = self.coefficients()?.limit_pair()?;
        let field = if self.limit.is_some() { "limit" } else { "product" };
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(bad(field, format!("limit pair (α, β) = ({alpha}, {beta}) must be positive")));
        }
        if beta * beta < 4.0 * alpha * (1.0 - 1e-12) {
            return Err(bad(field, format!("β² = {} is below 4α = {}", beta * beta, 4.0 * alpha)));
        }
        let n = self.ground_state_dim()?;
        if n == 0 || n > 3 {
            return Err(bad("groundstate.n", format!("{n} must lie in 1..=3")));
        }
        let gs = self.ground_state_box()?;
        positive("groundstate.L", gs.length)?;
        check_points("groundstate.P", gs.points)?;
        Ok(())
    }
}
