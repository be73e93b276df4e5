//! Descent on the Nehari manifold, the photography map, multistart search
//! with deduplication modulo grid translations, and residual certification.
//!
//! The descent direction is the Riesz representative of `J′(u)` in the inner
//! product `⟨v, w⟩_Q = ε⁻ⁿ ∫ v · L w`, namely `G = u − L⁻¹(u⁺)^q`, with its
//! `u`-component removed. A unit step is therefore `u ↦ P(L⁻¹(u⁺)^q)`, where
//! `P` is the Nehari projection; Armijo backtracking on `J ∘ P` guards it.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{best_concentration_center, concentration_report, ConcentrationReport};
use crate::error::{Error, Result};
use crate::functional::{EnergyParams, NehariPoint};
use crate::grid::{Field, TorusGrid, TorusPoint};
use crate::groundstate::{cutoff_profile, GroundState};
use crate::io::write_field;

/// Relative Euler–Lagrange residual an accepted solution must reach.
pub const ACCEPT_RESIDUAL: f64 = 1e-5;
/// Accepted solutions satisfy `min u > POSITIVITY_FRACTION · max u`.
pub const POSITIVITY_FRACTION: f64 = 1e-10;
/// Nehari membership tolerance for accepted solutions.
pub const NEHARI_TOL: f64 = 1e-8;

const MAX_RESTARTS: usize = 8;

/// Energy differences below this bound are indistinguishable from rounding
/// in the nodal sums behind `J`: `max(64, 8√N)` ulps of `|J|` for `N` nodes.
pub fn energy_slack(nodes: usize, energy: f64) -> f64 {
    f64::EPSILON * energy.abs() * (8.0 * (nodes as f64).sqrt()).max(64.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when `‖G⊥‖₂ / ‖u‖₂ ≤ grad_tol`, `G = u − L⁻¹(u⁺)^q` the
    /// preconditioned gradient.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub backtrack: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo_c: f64,
    pub min_step: f64,
    /// Relative L² distance modulo translation below which two solutions coincide.
    pub dedup_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 500,
            grad_tol: 1e-10,
            initial_step: 1.0,
            backtrack: 0.5,
            armijo_c: 1e-4,
            min_step: 1e-8,
            dedup_tol: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("initial_step", self.initial_step),
            ("armijo_c", self.armijo_c),
            ("min_step", self.min_step),
            ("dedup_tol", self.dedup_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("solver.{name} = {v} must be positive")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter(format!("solver.backtrack = {} must lie in (0, 1)", self.backtrack)));
        }
        if self.armijo_c >= 1.0 {
            return Err(Error::InvalidParameter(format!("solver.armijo_c = {} must be below 1", self.armijo_c)));
        }
        if self.min_step > self.initial_step {
            return Err(Error::InvalidParameter("solver.min_step exceeds solver.initial_step".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("solver.max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where a run started.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seed {
    Photography { x: TorusPoint },
    Constant,
    Random { index: usize, rng_seed: u64 },
    /// A caller-supplied starting field.
    Initial,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub point: NehariPoint,
    pub residual: f64,
    pub positive: bool,
    pub center: TorusPoint,
    /// Concentration ratio at `center` for `r = L/4`.
    pub center_ratio: f64,
    pub seed: Seed,
    pub converged: bool,
    pub iterations: usize,
    /// `‖G⊥‖₂ / ‖u‖₂` at the returned iterate.
    pub gradient: f64,
    /// Energy of every accepted iterate, starting with the projected seed.
    pub energy_history: Vec<f64>,
    pub restarts: usize,
    pub tail_indicator: f64,
}

impl Solution {
    pub fn energy(&self) -> f64 {
        self.point.energy
    }

    pub fn field(&self) -> &Field {
        &self.point.u
    }

    /// Converged, strictly positive, on the manifold, and with a small residual.
    pub fn accepted(&self) -> bool {
        self.converged && self.positive && self.residual <= ACCEPT_RESIDUAL && self.point.nehari_defect() <= NEHARI_TOL
    }
}

/// `‖L u − (u⁺)^q‖₂ / max(‖(u⁺)^q‖₂, a_eff ‖u‖₂)`.
pub fn pde_residual(u: &Field, p: &EnergyParams) -> Result<f64> {
    let lu = p.linear_operator(u)?;
    let nl = p.nonlinearity(u);
    let scale = nl.l2_norm().max(p.a_eff() * u.l2_norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(lu.sub(&nl)?.l2_norm() / scale)
}

/// `‖G⊥‖₂ / ‖u‖₂` for the preconditioned gradient `G = u − w`,
/// `w = L⁻¹(u⁺)^q`, with `⊥` the L²-orthogonal complement of `u`.
fn projected_gradient(u: &Field, w: &Field) -> Result<f64> {
    let g = u.sub(w)?;
    let uu = u.inner(u)?;
    let along = g.inner(u)? / uu;
    Ok(g.axpy(-along, u)?.l2_norm() / uu.sqrt())
}

fn is_positive(u: &Field) -> bool {
    u.min() > POSITIVITY_FRACTION * u.max()
}

#[allow(clippy::too_many_arguments)]
fn certify(
    point: NehariPoint,
    p: &EnergyParams,
    seed: Seed,
    converged: bool,
    iterations: usize,
    gradient: f64,
    energy_history: Vec<f64>,
    restarts: usize,
) -> Result<Solution> {
    let residual = pde_residual(&point.u, p)?;
    let (center, center_ratio) = best_concentration_center(&point.u, p.grid().length() / 4.0, p.q())?;
    Ok(Solution {
        residual,
        positive: is_positive(&point.u),
        center,
        center_ratio,
        seed,
        converged,
        iterations,
        gradient,
        energy_history,
        restarts,
        tail_indicator: point.u.tail_indicator(),
        point,
    })
}

/// Projected descent from `u0`. Stagnation at the minimum step returns the
/// current iterate with `converged = false`.
pub fn minimize_on_nehari(u0: &Field, p: &EnergyParams, cfg: &SolverConfig) -> Result<Solution> {
    minimize_seeded(u0, p, cfg, Seed::Initial)
}

fn minimize_seeded(u0: &Field, p: &EnergyParams, cfg: &SolverConfig, seed: Seed) -> Result<Solution> {
    cfg.validate()?;
    let mut point = p.nehari_project(u0)?;
    let mut history = vec![point.energy];
    let mut restarts = 0;
    let mut iterations = 0;

    loop {
        let w = p.solve_linear(&p.nonlinearity(&point.u))?;
        let gradient = projected_gradient(&point.u, &w)?;
        if gradient <= cfg.grad_tol {
            return certify(point, p, seed, true, iterations, gradient, history, restarts);
        }
        if iterations >= cfg.max_iters {
            return certify(point, p, seed, false, iterations, gradient, history, restarts);
        }

        let raw = point.u.sub(&w)?;
        // ⟨u − L⁻¹(u⁺)^q, u⟩_Q = Q(u) − M(u).
        let along = (point.quad - point.mass) / point.quad;
        let dir = raw.axpy(-along, &point.u)?;
        let dir_sq = p.quadratic_form(&dir)?;

        let slack = energy_slack(p.grid().len(), point.energy);
        let mut tau = cfg.initial_step;
        let next = loop {
            let trial = point.u.axpy(-tau, &dir)?;
            match p.nehari_project(&trial) {
                Ok(cand) => {
                    let wanted = cfg.armijo_c * tau * dir_sq;
                    let sufficient = cand.energy <= point.energy - wanted;
                    let unresolvable = wanted <= slack && cand.energy <= point.energy + slack;
                    if sufficient || unresolvable {
                        break Some(cand);
                    }
                }
                Err(Error::DegenerateInput(_)) if point.u.min() < 0.0 => {
                    restarts += 1;
                    if restarts > MAX_RESTARTS {
                        return Err(Error::DegenerateInput(format!("{MAX_RESTARTS} restarts from |u| exhausted")));
                    }
                    break Some(p.nehari_project(&point.u.map(f64::abs))?);
                }
                Err(Error::DegenerateInput(_)) => {}
                Err(e) => return Err(e),
            }
            tau *= cfg.backtrack;
            if tau < cfg.min_step {
                break None;
            }
        };

        match next {
            Some(cand) => {
                iterations += 1;
                history.push(cand.energy);
                point = cand;
            }
            None => return certify(point, p, seed, false, iterations, gradient, history, restarts),
        }
    }
}

/// `λ(Ū) Ū` with `Ū` the cut-off rescaled ground state moved to the node nearest `x`.
pub fn photography(x: &TorusPoint, gs: &GroundState, p: &EnergyParams, s: f64) -> Result<Field> {
    let grid = p.grid();
    let base = cutoff_profile(gs, p.eps(), s, grid)?;
    let shift = grid.shift_between(grid.center_node(), grid.nearest_node(x));
    Ok(p.nehari_project(&base.translate(&shift))?.u)
}

/// Smooth positive field `exp(1.5 g)`, `g` a random low-mode trigonometric
/// sum normalized to `max |g| = 1`. Reproducible from `(rng_seed, index)`.
pub fn random_seed_field(grid: &std::sync::Arc<TorusGrid>, rng_seed: u64, index: usize) -> Field {
    const MODES: i64 = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(index as u64);
    let dim = grid.dim();
    let count = (2 * MODES + 1).pow(dim as u32);
    let mut terms = Vec::with_capacity(count as usize);
    for t in 0..count {
        let mut rest = t;
        let mut j = vec![0i64; dim];
        for slot in j.iter_mut() {
            *slot = rest % (2 * MODES + 1) - MODES;
            rest /= 2 * MODES + 1;
        }
        let norm2: i64 = j.iter().map(|v| v * v).sum();
        let damp = 1.0 / (1.0 + norm2 as f64);
        let a: f64 = rng.gen_range(-1.0..1.0) * damp;
        let b: f64 = rng.gen_range(-1.0..1.0) * damp;
        terms.push((j, a, b));
    }
    let base = 2.0 * std::f64::consts::PI / grid.length();
    let g: Vec<f64> = (0..grid.len())
        .map(|flat| {
            let x = grid.node_point(flat);
            terms
                .iter()
                .map(|(j, a, b)| {
                    let phase: f64 = j.iter().zip(x.coords()).map(|(&k, &c)| base * k as f64 * c).sum();
                    a * phase.cos() + b * phase.sin()
                })
                .sum()
        })
        .collect();
    let top = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let values = g.iter().map(|v| (1.5 * v / top).exp()).collect();
    Field::new(grid.clone(), values).expect("finite by construction")
}

/// `min_τ ‖u₁ − τu₂‖₂ / ‖u₁‖₂` over whole-step grid translations `τ`, with
/// the minimizing shift (`τu₂` as in [`Field::translate`]).
pub fn translation_distance(u1: &Field, u2: &Field) -> Result<(f64, Vec<i64>)> {
    if **u1.grid() != **u2.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = u1.grid();
    let f1 = grid.forward(u1.values());
    let f2 = grid.forward(u2.values());
    let spec: Vec<Complex64> = f1.iter().zip(&f2).map(|(a, b)| a * b.conj()).collect();
    // corr[τ] = Σᵢ u₁[i + τ] u₂[i]
    let corr = grid.inverse_real(spec);
    let mut best = 0;
    for (i, &c) in corr.iter().enumerate() {
        if c > corr[best] {
            best = i;
        }
    }
    let n1: f64 = u1.values().iter().map(|v| v * v).sum();
    let n2: f64 = u2.values().iter().map(|v| v * v).sum();
    let d2 = (n1 + n2 - 2.0 * corr[best]).max(0.0);
    let idx = grid.multi_index(best);
    let p = grid.points() as i64;
    let shift = idx[..grid.dim()]
        .iter()
        .map(|&i| {
            let i = i as i64;
            if 2 * i >= p {
                i - p
            } else {
                i
            }
        })
        .collect();
    Ok(((d2 / n1).sqrt(), shift))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultistartOptions {
    /// Cutoff radius `s` of the photography seeds.
    pub cutoff: f64,
    pub include_constant: bool,
    pub random_seeds: usize,
    pub rng_seed: u64,
    pub parallel: bool,
}

impl MultistartOptions {
    /// Constant seed included, no random seeds, parallel runs, `s = L/2`.
    pub fn for_grid(grid: &TorusGrid) -> Self {
        MultistartOptions { cutoff: grid.length() / 2.0, include_constant: true, random_seeds: 0, rng_seed: 0, parallel: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum RunOutcome {
    /// Joined the class with this index (into the energy-sorted class list).
    Accepted(usize),
    /// Converged but failed positivity, residual, or Nehari checks.
    Rejected(String),
    Unconverged,
    /// No starting field could be built.
    SeedFailed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: Seed,
    pub outcome: RunOutcome,
    pub energy: Option<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SolutionClass {
    /// First accepted run (in seed order) that landed in the class.
    pub representative: Solution,
    pub size: usize,
    pub seeds: Vec<Seed>,
}

#[derive(Clone, Debug)]
pub struct MultistartReport {
    /// Sorted by representative energy.
    pub classes: Vec<SolutionClass>,
    /// One record per run, in seed order.
    pub runs: Vec<RunRecord>,
}

impl MultistartReport {
    pub fn representatives(&self) -> Vec<&Solution> {
        self.classes.iter().map(|c| &c.representative).collect()
    }

    pub fn min_energy(&self) -> Option<f64> {
        self.classes.first().map(|c| c.representative.energy())
    }

    pub fn minimizer(&self) -> Option<&Solution> {
        self.classes.first().map(|c| &c.representative)
    }

    pub fn accepted_count(&self) -> usize {
        self.runs.iter().filter(|r| matches!(r.outcome, RunOutcome::Accepted(_))).count()
    }

    pub fn unconverged_count(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome == RunOutcome::Unconverged).count()
    }

    pub fn rejected_count(&self) -> usize {
        self.runs.iter().filter(|r| matches!(r.outcome, RunOutcome::Rejected(_))).count()
    }

    pub fn seed_failures(&self) -> usize {
        self.runs.iter().filter(|r| matches!(r.outcome, RunOutcome::SeedFailed(_))).count()
    }
}

enum RunResult {
    Done(Box<Solution>),
    SeedFailed(Seed, String),
}

fn run_one(seed: Seed, gs: &GroundState, p: &EnergyParams, cfg: &SolverConfig, cutoff: f64) -> Result<RunResult> {
    let grid = p.grid();
    let start = match &seed {
        Seed::Photography { x } => match photography(x, gs, p, cutoff) {
            Ok(u) => u,
            Err(e @ (Error::CutoffTooTight { .. } | Error::DegenerateInput(_) | Error::InvalidParameter(_))) => {
                return Ok(RunResult::SeedFailed(seed, e.to_string()))
            }
            Err(e) => return Err(e),
        },
        Seed::Constant => Field::constant(grid.clone(), p.constant_solution_value()),
        Seed::Random { index, rng_seed } => random_seed_field(grid, *rng_seed, *index),
        Seed::Initial => return Err(Error::InvalidParameter("multistart needs explicit seeds".into())),
    };
    match minimize_seeded(&start, p, cfg, seed.clone()) {
        Ok(sol) => Ok(RunResult::Done(Box::new(sol))),
        Err(Error::DegenerateInput(msg)) => Ok(RunResult::SeedFailed(seed, msg)),
        Err(e) => Err(e),
    }
}

/// Runs descent from the photography of every point in `seeds`, then from the
/// constant and the random seeds requested in `opts`, and groups accepted
/// solutions into classes modulo grid translation.
pub fn multistart_solve(
    seeds: &[TorusPoint],
    gs: &GroundState,
    p: &EnergyParams,
    cfg: &SolverConfig,
    opts: &MultistartOptions,
) -> Result<MultistartReport> {
    cfg.validate()?;
    let mut all: Vec<Seed> = seeds.iter().map(|x| Seed::Photography { x: x.clone() }).collect();
    if opts.include_constant {
        all.push(Seed::Constant);
    }
    all.extend((0..opts.random_seeds).map(|index| Seed::Random { index, rng_seed: opts.rng_seed }));
    if all.is_empty() {
        return Err(Error::EmptyInput("multistart seed list"));
    }

    let results: Vec<Result<RunResult>> = if opts.parallel {
        all.into_par_iter().map(|s| run_one(s, gs, p, cfg, opts.cutoff)).collect()
    } else {
        all.into_iter().map(|s| run_one(s, gs, p, cfg, opts.cutoff)).collect()
    };

    let mut runs = Vec::new();
    let mut classes: Vec<SolutionClass> = Vec::new();
    let mut run_class: Vec<Option<usize>> = Vec::new();
    for result in results {
        match result? {
            RunResult::SeedFailed(seed, msg) => {
                runs.push(RunRecord { seed, outcome: RunOutcome::SeedFailed(msg), energy: None, iterations: 0 });
                run_class.push(None);
            }
            RunResult::Done(sol) => {
                let mut record =
                    RunRecord { seed: sol.seed.clone(), outcome: RunOutcome::Unconverged, energy: Some(sol.energy()), iterations: sol.iterations };
                let mut class = None;
                if !sol.converged {
                } else if !sol.accepted() {
                    record.outcome = RunOutcome::Rejected(format!(
                        "positive = {}, residual = {:.3e}, nehari defect = {:.3e}",
                        sol.positive,
                        sol.residual,
                        sol.point.nehari_defect()
                    ));
                } else {
                    for (k, c) in classes.iter_mut().enumerate() {
                        if translation_distance(c.representative.field(), sol.field())?.0 <= cfg.dedup_tol {
                            c.size += 1;
                            c.seeds.push(sol.seed.clone());
                            class = Some(k);
                            break;
                        }
                    }
                    if class.is_none() {
                        class = Some(classes.len());
                        classes.push(SolutionClass { seeds: vec![sol.seed.clone()], representative: *sol, size: 1 });
                    }
                    record.outcome = RunOutcome::Accepted(0);
                }
                runs.push(record);
                run_class.push(class);
            }
        }
    }

    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| classes[a].representative.energy().total_cmp(&classes[b].representative.energy()));
    let mut rank = vec![0; classes.len()];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r;
    }
    for (record, class) in runs.iter_mut().zip(&run_class) {
        if let Some(k) = class {
            record.outcome = RunOutcome::Accepted(rank[*k]);
        }
    }
    let mut slots: Vec<Option<SolutionClass>> = classes.into_iter().map(Some).collect();
    let classes = order.iter().map(|&k| slots[k].take().expect("each class once")).collect();
    Ok(MultistartReport { classes, runs })
}

#[derive(Clone, Debug, Serialize)]
struct IndexEntry<'a> {
    file: String,
    energy: f64,
    residual: f64,
    mass: f64,
    center: &'a TorusPoint,
    seed: &'a Seed,
    class_size: usize,
    iterations: usize,
    tail_indicator: f64,
    concentration: ConcentrationReport,
}

#[derive(Clone, Debug, Serialize)]
struct SolutionIndex<'a> {
    eps: f64,
    q: f64,
    solutions: Vec<IndexEntry<'a>>,
    runs: &'a [RunRecord],
}

/// Writes `solution_XXX.{bin,json}` per class and `solutions.json`. Returns
/// every path written.
pub fn write_solution_set(dir: &Path, report: &MultistartReport, p: &EnergyParams) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    let radius = p.grid().length() / 4.0;
    for (i, class) in report.classes.iter().enumerate() {
        let sol = &class.representative;
        let name = format!("solution_{i:03}");
        let concentration = concentration_report(sol.field(), &sol.center, radius, p)?;
        let extra = serde_json::json!({ "energy": sol.energy(), "residual": sol.residual, "seed": sol.seed });
        written.extend(write_field(&dir.join(&name), sol.field(), Some(extra))?);
        entries.push(IndexEntry {
            file: format!("{name}.bin"),
            energy: sol.energy(),
            residual: sol.residual,
            mass: sol.point.mass,
            center: &sol.center,
            seed: &sol.seed,
            class_size: class.size,
            iterations: sol.iterations,
            tail_indicator: sol.tail_indicator,
            concentration,
        });
    }
    let index = SolutionIndex { eps: p.eps(), q: p.q(), solutions: entries, runs: &report.runs };
    let path = dir.join("solutions.json");
    let mut text = serde_json::to_string_pretty(&index)?;
    text.push('\n');
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}
