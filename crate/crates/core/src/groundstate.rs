//! The limit problem on `Rⁿ`,
//!
//! ```text
//! Δ²U − βΔU + αU = U^q,
//! ```
//!
//! solved as a Nehari minimizer on a large periodic box, together with the
//! rescaling `u_ε(x) = u(x/ε)` and the cut-off profile `φ_s U^ε` that seeds
//! the photography map.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{EnergyParams, LinearCoefficients};
use crate::grid::{Field, TorusGrid};
use crate::io::{read_field, write_field};
use crate::solver::{minimize_on_nehari, SolverConfig};

/// Largest admissible `max_boundary |U| / max |U|`.
pub const DECAY_LIMIT: f64 = 1e-6;
/// Share of `U^{q+1}` the inner cutoff ball must retain.
pub const CUTOFF_MASS_FRACTION: f64 = 0.999;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateProblem {
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    pub n: usize,
    pub box_length: f64,
    pub points: usize,
}

impl GroundStateProblem {
    pub fn new(alpha: f64, beta: f64, q: f64, n: usize, box_length: f64, points: usize) -> Self {
        GroundStateProblem { alpha, beta, q, n, box_length, points }
    }

    /// Same problem on a box of twice the edge with twice the nodes.
    pub fn doubled(&self) -> Self {
        GroundStateProblem { box_length: 2.0 * self.box_length, points: 2 * self.points, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta = {} must be positive", self.beta)));
        }
        if self.beta * self.beta < 4.0 * self.alpha * (1.0 - 1e-12) {
            return Err(Error::NotCoercive(format!(
                "beta² = {} is below 4·alpha = {}",
                self.beta * self.beta,
                4.0 * self.alpha
            )));
        }
        Ok(())
    }

    fn params(&self) -> Result<EnergyParams> {
        self.validate()?;
        let grid = TorusGrid::new(self.n, self.box_length, self.points)?;
        EnergyParams::new(1.0, self.q, LinearCoefficients::limit(self.alpha, self.beta), grid)
    }

    /// Centered Gaussian of width `sqrt(β/α)/2`.
    pub fn initial_guess(&self) -> Result<Field> {
        let grid = TorusGrid::new(self.n, self.box_length, self.points)?;
        let sigma = (self.beta / self.alpha).sqrt() / 2.0;
        let c = grid.center_point();
        let g = grid.clone();
        Field::from_fn(grid, |x| {
            let d2: f64 = g.displacement(x, c.coords()).iter().map(|d| d * d).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        })
    }
}

#[derive(Clone, Debug)]
pub struct GroundState {
    /// Peak at the box center node, on the `ε = 1` box.
    pub profile: Field,
    pub level: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    pub box_l: f64,
    pub decay_indicator: f64,
    /// Minimized `Y⁺` quotient.
    pub quotient: f64,
    /// `‖Δ²U − βΔU + αU − U^q‖₂ / ‖U^q‖₂`.
    pub residual: f64,
    pub tail_indicator: f64,
    pub iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct GroundStateMeta {
    alpha: f64,
    beta: f64,
    q: f64,
    level: f64,
    #[serde(rename = "box_L")]
    box_l: f64,
    decay_indicator: f64,
    quotient: f64,
    residual: f64,
    tail_indicator: f64,
    iterations: usize,
}

pub fn solve_ground_state(problem: &GroundStateProblem, cfg: &SolverConfig) -> Result<GroundState> {
    let u0 = problem.initial_guess()?;
    solve_ground_state_from(problem, &u0, cfg)
}

/// As [`solve_ground_state`] from a caller-supplied start on the problem's box.
pub fn solve_ground_state_from(problem: &GroundStateProblem, u0: &Field, cfg: &SolverConfig) -> Result<GroundState> {
    let p = problem.params()?;
    let grid = p.grid().clone();
    let u0 = u0.with_grid(grid.clone())?;
    let sol = minimize_on_nehari(&u0, &p, cfg)?;
    if !sol.converged {
        return Err(Error::NotConverged { iterations: sol.iterations, gradient: sol.gradient });
    }
    let shift = grid.shift_between(sol.field().argmax(), grid.center_node());
    let profile = sol.field().translate(&shift);
    let decay_indicator = boundary_max(&profile) / profile.max_abs();
    if decay_indicator >= DECAY_LIMIT {
        return Err(Error::BoxTooSmall { indicator: decay_indicator, limit: DECAY_LIMIT });
    }
    let nl = p.nonlinearity(&profile);
    let residual = p.linear_operator(&profile)?.sub(&nl)?.l2_norm() / nl.l2_norm();
    Ok(GroundState {
        level: p.energy(&profile)?,
        quotient: p.y_quotient(&profile)?,
        tail_indicator: profile.tail_indicator(),
        alpha: problem.alpha,
        beta: problem.beta,
        q: problem.q,
        box_l: problem.box_length,
        decay_indicator,
        residual,
        iterations: sol.iterations,
        profile,
    })
}

/// Largest `|u|` over nodes with index 0 on some axis, i.e. at distance
/// `L/2` from the center along that axis.
fn boundary_max(u: &Field) -> f64 {
    let grid = u.grid();
    let dim = grid.dim();
    u.values()
        .iter()
        .enumerate()
        .filter(|(flat, _)| grid.multi_index(*flat)[..dim].contains(&0))
        .fold(0.0, |m, (_, v)| m.max(v.abs()))
}

impl GroundState {
    pub fn dim(&self) -> usize {
        self.profile.grid().dim()
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.profile.grid()
    }

    /// Energy parameters of the limit problem on the profile's box.
    pub fn params(&self) -> Result<EnergyParams> {
        EnergyParams::new(1.0, self.q, LinearCoefficients::limit(self.alpha, self.beta), self.grid().clone())
    }

    pub fn is_positive(&self) -> bool {
        self.profile.min() > 0.0
    }

    /// Means of the profile over distance shells of width `h` about the
    /// center, out to `L/2`.
    pub fn radial_bins(&self) -> Vec<f64> {
        let grid = self.grid();
        let h = grid.spacing();
        let c = grid.center_point();
        let bins = grid.points() / 2;
        let mut sum = vec![0.0; bins];
        let mut count = vec![0usize; bins];
        for (flat, &v) in self.profile.values().iter().enumerate() {
            let d = grid.distance(&grid.node_point(flat), &c);
            let b = (d / h).floor() as usize;
            if b < bins {
                sum[b] += v;
                count[b] += 1;
            }
        }
        sum.iter().zip(&count).filter(|(_, &n)| n > 0).map(|(s, &n)| s / n as f64).collect()
    }

    /// Largest relative increase `(m_{k+1} − m_k)/m_k` between consecutive
    /// radial bins; nonpositive for a radially non-increasing profile.
    pub fn radial_increase(&self) -> f64 {
        self.radial_bins().windows(2).map(|w| (w[1] - w[0]) / w[0].abs()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn save(&self, stem: &Path) -> Result<()> {
        let meta = GroundStateMeta {
            alpha: self.alpha,
            beta: self.beta,
            q: self.q,
            level: self.level,
            box_l: self.box_l,
            decay_indicator: self.decay_indicator,
            quotient: self.quotient,
            residual: self.residual,
            tail_indicator: self.tail_indicator,
            iterations: self.iterations,
        };
        write_field(stem, &self.profile, Some(serde_json::to_value(meta)?))?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (profile, meta) = read_field(stem)?;
        let m: GroundStateMeta = serde_json::from_value(meta)?;
        Ok(GroundState {
            profile,
            level: m.level,
            alpha: m.alpha,
            beta: m.beta,
            q: m.q,
            box_l: m.box_l,
            decay_indicator: m.decay_indicator,
            quotient: m.quotient,
            residual: m.residual,
            tail_indicator: m.tail_indicator,
            iterations: m.iterations,
        })
    }
}

/// The same samples on a box of edge `εL`.
pub fn rescale(u: &Field, eps: f64) -> Result<Field> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    let g = u.grid();
    u.with_grid(TorusGrid::new(g.dim(), eps * g.length(), g.points())?)
}

/// Quintic smoothstep cutoff: 1 on `[0, s/4]`, 0 on `[s/2, ∞)`, C² between.
pub fn cutoff_weight(r: f64, s: f64) -> f64 {
    let inner = s / 4.0;
    let outer = s / 2.0;
    if r <= inner {
        1.0
    } else if r >= outer {
        0.0
    } else {
        let t = (outer - r) / (outer - inner);
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

/// `U(x/ε)` at each target node, centered on the target box center. Nodes
/// whose preimage leaves the ground-state box get 0, as do nodes outside the
/// cube of half-edge `support` when one is given.
fn sample_rescaled(gs: &GroundState, eps: f64, target: &TorusGrid, support: Option<f64>) -> Vec<f64> {
    let lt = target.length();
    let half_gs = gs.box_l / 2.0;
    let h = target.spacing();
    let coords: Vec<Option<f64>> = (0..target.points())
        .map(|t| {
            let d = t as f64 * h - lt / 2.0;
            if support.is_some_and(|s| d.abs() > s) {
                return None;
            }
            let y = d / eps;
            (y.abs() <= half_gs).then_some(half_gs + y)
        })
        .collect();
    let axes = vec![coords; target.dim()];
    gs.profile.interpolate_tensor(&axes)
}

/// `U^ε` sampled on `target`, peak at its center.
pub fn rescaled_profile(gs: &GroundState, eps: f64, target: &Arc<TorusGrid>) -> Result<Field> {
    check_target(gs, eps, target)?;
    Field::new(target.clone(), sample_rescaled(gs, eps, target, None))
}

fn check_target(gs: &GroundState, eps: f64, target: &TorusGrid) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    if target.dim() != gs.dim() {
        return Err(Error::InvalidParameter(format!(
            "target dimension {} differs from the ground state's {}",
            target.dim(),
            gs.dim()
        )));
    }
    Ok(())
}

/// Share of `U^{q+1}` within distance `radius` of the profile's peak.
pub fn inner_mass_fraction(gs: &GroundState, radius: f64) -> f64 {
    let grid = gs.grid();
    let c = grid.center_point();
    let e = gs.q + 1.0;
    let (mut inside, mut total) = (0.0, 0.0);
    for (flat, &v) in gs.profile.values().iter().enumerate() {
        let w = if v > 0.0 { v.powf(e) } else { 0.0 };
        total += w;
        if grid.distance(&grid.node_point(flat), &c) <= radius {
            inside += w;
        }
    }
    inside / total
}

/// `φ_s U^ε` on `target`, peak at its center.
pub fn cutoff_profile(gs: &GroundState, eps: f64, s: f64, target: &Arc<TorusGrid>) -> Result<Field> {
    check_target(gs, eps, target)?;
    if !(s > 0.0) || s >= target.length() {
        return Err(Error::InvalidParameter(format!(
            "cutoff s = {s} must be positive with s/2 below half the box edge {}",
            target.length()
        )));
    }
    let fraction = inner_mass_fraction(gs, s / (4.0 * eps));
    if fraction < CUTOFF_MASS_FRACTION {
        return Err(Error::CutoffTooTight { fraction, required: CUTOFF_MASS_FRACTION });
    }
    let mut values = sample_rescaled(gs, eps, target, Some(s / 2.0));
    let c = target.center_point();
    for (flat, v) in values.iter_mut().enumerate() {
        let r = target.distance(&target.node_point(flat), &c);
        *v *= cutoff_weight(r, s);
    }
    Field::new(target.clone(), values)
}
