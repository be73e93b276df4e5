//! Concentration of the measure `(u⁺)^{q+1}`, the center-of-mass map, and the
//! sweep of the minimal level over `ε`.
//!
//! Ball sums run over node offsets relative to the node nearest the center,
//! in a fixed lexicographic order, so whole-step translations of the field
//! and the center leave every ratio bit-for-bit unchanged.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::EnergyParams;
use crate::grid::{wrap_centered, Field, TorusGrid, TorusPoint, MAX_DIM};
use crate::groundstate::GroundState;
use crate::solver::{multistart_solve, MultistartOptions, MultistartReport, SolverConfig};

pub const SWEEP_HEADER: &str = "eps,m_eps,gap,eta_at_r,n_solutions,n_classes";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub center: TorusPoint,
    pub radius: f64,
    pub eta: f64,
    /// `ε⁻ⁿ ∫ (u⁺)^{q+1}`.
    pub total_mass: f64,
}

fn density(u: &Field, q: f64) -> Vec<f64> {
    let e = q + 1.0;
    u.values().iter().map(|&v| if v > 0.0 { v.powf(e) } else { 0.0 }).collect()
}

fn check_radius(grid: &TorusGrid, r: f64) -> Result<()> {
    if !(r > 0.0) || r >= grid.length() / 2.0 {
        return Err(Error::InvalidParameter(format!("radius {r} must lie in (0, L/2) with L = {}", grid.length())));
    }
    Ok(())
}

/// Visits every node once as `(flat index, offset from the anchor node)`,
/// offsets in `[−P/2, P/2)ⁿ` in lexicographic order.
fn for_each_offset(grid: &TorusGrid, anchor: usize, mut f: impl FnMut(usize, &[i64])) {
    let dim = grid.dim();
    let p = grid.points() as i64;
    let half = p / 2;
    let base = grid.multi_index(anchor);
    let mut off = [-half; MAX_DIM];
    let mut node = [0usize; MAX_DIM];
    loop {
        for d in 0..dim {
            node[d] = (base[d] as i64 + off[d]).rem_euclid(p) as usize;
        }
        f(grid.flat_index(&node), &off[..dim]);
        let mut d = dim;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            off[d] += 1;
            if off[d] < half {
                break;
            }
            off[d] = -half;
        }
    }
}

/// `(ball sum, complement sum, total)` of `w` for the ball of radius `r`
/// about `x`.
fn ball_sums(grid: &TorusGrid, w: &[f64], x: &TorusPoint, r: f64) -> (f64, f64, f64) {
    let h = grid.spacing();
    let anchor = grid.nearest_node(x);
    let frac: Vec<f64> = x
        .coords()
        .iter()
        .map(|&c| {
            let t = c / h;
            t - t.round()
        })
        .collect();
    let r2 = r * r;
    let (mut inside, mut outside, mut total) = (0.0, 0.0, 0.0);
    for_each_offset(grid, anchor, |flat, off| {
        let d2: f64 = off.iter().zip(&frac).map(|(&o, &f)| ((o as f64 - f) * h).powi(2)).sum();
        let v = w[flat];
        total += v;
        if d2 <= r2 {
            inside += v;
        } else {
            outside += v;
        }
    });
    (inside, outside, total)
}

/// Share of `(u⁺)^{q+1}` held by nodes within torus distance `r` of `x`.
pub fn concentration_ratio(u: &Field, x: &TorusPoint, r: f64, p: &EnergyParams) -> Result<f64> {
    Ok(ratio_and_complement(u, x, r, p.q())?.0)
}

/// `(ratio, complement ratio)`; the two add up to one up to rounding.
pub fn ratio_and_complement(u: &Field, x: &TorusPoint, r: f64, q: f64) -> Result<(f64, f64)> {
    let grid = u.grid();
    check_radius(grid, r)?;
    let w = density(u, q);
    let (inside, outside, total) = ball_sums(grid, &w, x, r);
    if total == 0.0 {
        return Err(Error::DegenerateInput("positive part vanishes; no concentration measure".into()));
    }
    Ok((inside / total, outside / total))
}

pub fn concentration_report(u: &Field, x: &TorusPoint, r: f64, p: &EnergyParams) -> Result<ConcentrationReport> {
    let eta = concentration_ratio(u, x, r, p)?;
    Ok(ConcentrationReport { center: x.clone(), radius: r, eta, total_mass: p.mass(u)? })
}

/// Offsets `o` with `|o| h ≤ r`, in the same order [`ball_sums`] visits them.
fn node_ball(grid: &TorusGrid, r: f64) -> Vec<Vec<i64>> {
    let h = grid.spacing();
    let r2 = r * r;
    let mut out = Vec::new();
    for_each_offset(grid, 0, |_, off| {
        let d2: f64 = off.iter().map(|&o| (o as f64 * h).powi(2)).sum();
        if d2 <= r2 {
            out.push(off.to_vec());
        }
    });
    out
}

/// Grid node maximizing the concentration ratio at radius `r`, with that
/// ratio. Ties go to the smallest flat index.
pub fn best_concentration_center(u: &Field, r: f64, q: f64) -> Result<(TorusPoint, f64)> {
    let grid = u.grid();
    check_radius(grid, r)?;
    let w = density(u, q);
    let scale: f64 = w.iter().sum();
    if scale == 0.0 {
        return Err(Error::DegenerateInput("positive part vanishes; no concentration measure".into()));
    }
    let ball = node_ball(grid, r);

    // FFT convolution screens candidates; exact ordered sums decide.
    let mut kernel = vec![0.0; grid.len()];
    let p = grid.points() as i64;
    let mut idx = [0usize; MAX_DIM];
    for off in &ball {
        for (d, &o) in off.iter().enumerate() {
            idx[d] = o.rem_euclid(p) as usize;
        }
        kernel[grid.flat_index(&idx)] = 1.0;
    }
    let fw = grid.forward(&w);
    let fk = grid.forward(&kernel);
    let spec: Vec<Complex64> = fw.iter().zip(&fk).map(|(a, b)| a * b).collect();
    let approx = grid.inverse_real(spec);
    let top = approx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-9 * scale;

    let mut best: Option<(usize, f64)> = None;
    let mut node = [0usize; MAX_DIM];
    for (z, &a) in approx.iter().enumerate() {
        if a < top - slack {
            continue;
        }
        let base = grid.multi_index(z);
        let mut sum = 0.0;
        for off in &ball {
            for (d, &o) in off.iter().enumerate() {
                node[d] = (base[d] as i64 + o).rem_euclid(p) as usize;
            }
            sum += w[grid.flat_index(&node)];
        }
        if best.is_none_or(|(_, s)| sum > s) {
            best = Some((z, sum));
        }
    }
    let (z, _) = best.expect("the FFT maximum is always a candidate");
    let center = grid.node_point(z);
    let (inside, _, total) = ball_sums(grid, &w, &center, r);
    Ok((center, inside / total))
}

/// Per-axis circular mean of `(u⁺)^{q+1}`, for fields whose best ratio at
/// radius `r` exceeds `eta_min`. The result is checked to lie within `2r` of
/// the best concentration center.
pub fn center_of_mass(u: &Field, r: f64, eta_min: f64, q: f64) -> Result<TorusPoint> {
    let (best, ratio) = best_concentration_center(u, r, q)?;
    if ratio <= eta_min {
        return Err(Error::NotConcentrated { ratio, radius: r, eta_min });
    }
    let grid = u.grid();
    let l = grid.length();
    let w = density(u, q);
    let k = 2.0 * std::f64::consts::PI / l;
    let mut sums = vec![Complex64::new(0.0, 0.0); grid.dim()];
    for (flat, &m) in w.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let x = grid.node_point(flat);
        for (s, &c) in sums.iter_mut().zip(x.coords()) {
            *s += Complex64::from_polar(m, k * c);
        }
    }
    let cm = TorusPoint(
        sums.iter()
            .map(|s| {
                let c = (s.arg() / k).rem_euclid(l);
                if c >= l {
                    0.0
                } else {
                    c
                }
            })
            .collect(),
    );
    let distance = grid.distance(&cm, &best);
    if distance > 2.0 * r {
        return Err(Error::CenterOfMassOffTarget { distance, bound: 2.0 * r });
    }
    Ok(cm)
}

/// Torus distance between two points of the same grid.
pub fn torus_distance(grid: &TorusGrid, a: &TorusPoint, b: &TorusPoint) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(&x, &y)| wrap_centered(x - y, grid.length()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Lattice of `per_axis` points per axis with spacing `L / per_axis`,
/// starting at the origin.
pub fn seed_lattice(grid: &TorusGrid, per_axis: usize) -> Vec<TorusPoint> {
    let step = grid.length() / per_axis as f64;
    let dim = grid.dim();
    let count = per_axis.pow(dim as u32);
    (0..count)
        .map(|t| {
            let mut rest = t;
            let mut c = vec![0.0; dim];
            for slot in c.iter_mut().rev() {
                *slot = (rest % per_axis) as f64 * step;
                rest /= per_axis;
            }
            TorusPoint(c)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    /// Lowest accepted energy, NaN when the row is flagged.
    pub m_eps: f64,
    pub gap: f64,
    pub eta_at_r: f64,
    pub n_solutions: usize,
    pub n_classes: usize,
    /// No run at this `ε` produced an accepted solution.
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub seeds: Vec<TorusPoint>,
    pub options: MultistartOptions,
    /// Concentration radius; `L/4` when absent.
    pub radius: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub reports: Vec<MultistartReport>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.eps, r.m_eps, r.gap, r.eta_at_r, r.n_solutions, r.n_classes);
        }
        out
    }
}

/// Multistart at each `ε` of a strictly decreasing list, recording the
/// lowest accepted level, its distance to the ground-state level, and the
/// best concentration ratio of the minimizer.
pub fn epsilon_sweep(
    eps_list: &[f64],
    template: &EnergyParams,
    cfg: &SolverConfig,
    gs: &GroundState,
    plan: &SweepPlan,
) -> Result<SweepResult> {
    if eps_list.is_empty() {
        return Err(Error::EmptyInput("eps_list"));
    }
    if let Some(bad) = eps_list.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter(format!("ε = {bad} must be positive")));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eps_list must be strictly decreasing".into()));
    }
    let radius = plan.radius.unwrap_or(template.grid().length() / 4.0);
    let params: Vec<EnergyParams> = eps_list.iter().map(|&e| template.with_eps(e)).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for p in &params {
        let report = multistart_solve(&plan.seeds, gs, p, cfg, &plan.options)?;
        let row = match report.minimizer() {
            Some(best) => {
                let (_, eta) = best_concentration_center(best.field(), radius, p.q())?;
                SweepRow {
                    eps: p.eps(),
                    m_eps: best.energy(),
                    gap: (best.energy() - gs.level).abs(),
                    eta_at_r: eta,
                    n_solutions: report.accepted_count(),
                    n_classes: report.classes.len(),
                    flagged: false,
                }
            }
            None => SweepRow {
                eps: p.eps(),
                m_eps: f64::NAN,
                gap: f64::NAN,
                eta_at_r: f64::NAN,
                n_solutions: 0,
                n_classes: 0,
                flagged: true,
            },
        };
        rows.push(row);
        reports.push(report);
    }
    Ok(SweepResult { rows, reports })
}
