//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use paneitz_core::diagnostics::seed_lattice;
use paneitz_core::groundstate::{solve_ground_state, GroundStateProblem};
use paneitz_core::solver::MultistartOptions;
use paneitz_core::{EnergyParams, Field, GroundState, LinearCoefficients, SolverConfig, TorusGrid, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHA: f64 = 1.0;
pub const BETA: f64 = 2.0;
pub const Q: f64 = 3.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn limit_params(eps: f64, dim: usize, length: f64, points: usize) -> EnergyParams {
    let grid = TorusGrid::new(dim, length, points).unwrap();
    EnergyParams::new(eps, Q, LinearCoefficients::limit(ALPHA, BETA), grid).unwrap()
}

/// Random trigonometric polynomial with per-axis wavenumbers up to `modes`,
/// plus `offset`.
pub fn band_limited(grid: &Arc<TorusGrid>, rng: &mut ChaCha8Rng, modes: i64, offset: f64) -> Field {
    let dim = grid.dim();
    let side = 2 * modes + 1;
    let count = side.pow(dim as u32);
    let mut terms = Vec::new();
    for t in 0..count {
        let mut rest = t;
        let mut j = vec![0i64; dim];
        for slot in j.iter_mut() {
            *slot = rest % side - modes;
            rest /= side;
        }
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        terms.push((j, a, b));
    }
    let base = 2.0 * std::f64::consts::PI / grid.length();
    Field::from_fn(grid.clone(), |x| {
        offset
            + terms
                .iter()
                .map(|(j, a, b)| {
                    let ph: f64 = j.iter().zip(x).map(|(&k, &c)| base * k as f64 * c).sum();
                    (a * ph.cos() + b * ph.sin()) / (1.0 + j.iter().map(|v| v * v).sum::<i64>() as f64)
                })
                .sum::<f64>()
    })
    .unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

// --- exact product constants -------------------------------------------------

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub struct ExactConstants {
    pub big_a: BigRational,
    pub a: BigRational,
    pub b: BigRational,
}

impl ExactConstants {
    pub fn discriminant(&self) -> BigRational {
        &self.b * &self.b - ratio(4, 1) * &self.a
    }
}

/// `A`, `a`, `b` of an Einstein fiber over a flat base, in exact arithmetic.
pub fn exact_constants(n: u32, m: u32, lambda0: &BigRational) -> ExactConstants {
    let big_n = ratio((n + m) as i64, 1);
    let m = ratio(m as i64, 1);
    let one = ratio(1, 1);
    let two = ratio(2, 1);
    let nm1 = &big_n - &one;
    let nm2 = &big_n - &two;
    let n2 = &big_n * &big_n;
    let n3 = &n2 * &big_n;
    let cubic = &n3 - ratio(4, 1) * &n2 + ratio(16, 1) * &big_n - ratio(16, 1);
    let quad = &n2 - ratio(4, 1) * &big_n + ratio(8, 1);
    let big_a = &m * lambda0 * lambda0 / (&nm2 * &nm2) * (&cubic / (ratio(8, 1) * &nm1 * &nm1) * &m - &two);
    let a = (&big_n - ratio(4, 1)) / &two * &big_a;
    let b = &quad / (&two * &nm1 * &nm2) * &m * lambda0;
    ExactConstants { big_a, a, b }
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

pub fn is_positive(x: &BigRational) -> bool {
    *x > BigRational::zero()
}

/// The 50-point lattice: `m = 2` with `n = 7..=11`, `m = 3..=6` with
/// `n = 2..=6`, each at `Λ₀ ∈ {1/2, 3}`.
pub fn coefficient_lattice() -> Vec<(u32, u32, BigRational)> {
    let mut out = Vec::new();
    let mut pairs: Vec<(u32, u32)> = (7..=11).map(|n| (n, 2)).collect();
    for m in 3..=6 {
        pairs.extend((2..=6).map(|n| (n, m)));
    }
    for (n, m) in pairs {
        for l in [ratio(1, 2), ratio(3, 1)] {
            out.push((n, m, l));
        }
    }
    out
}

// --- radial finite differences -------------------------------------------------

/// Nehari ground-state level of `Δ²U − βΔU + αU = U^q` restricted to radial
/// functions on the ball of radius `r_max` in `Rⁿ` with `U(r_max) = 0`,
/// discretized by a conservative second-order scheme on `cells` cell centres.
pub fn radial_fd_level(dim: usize, alpha: f64, beta: f64, q: f64, r_max: f64, cells: usize) -> f64 {
    let h = r_max / cells as f64;
    let k = dim as i32 - 1;
    let r: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * h).collect();
    let face = |j: usize| (j as f64 * h).powi(k);
    let surface = match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    };
    let w: Vec<f64> = r.iter().map(|rj| surface * rj.powi(k) * h).collect();

    let mut d = DMatrix::<f64>::zeros(cells, cells);
    for j in 0..cells {
        let scale = 1.0 / (r[j].powi(k) * h * h);
        let right = face(j + 1);
        let left = face(j);
        if j + 1 < cells {
            d[(j, j + 1)] += scale * right;
            d[(j, j)] -= scale * right;
        } else {
            // Dirichlet at the outer face: ghost value −u.
            d[(j, j)] -= 2.0 * scale * right;
        }
        if j > 0 {
            d[(j, j - 1)] += scale * left;
            d[(j, j)] -= scale * left;
        }
    }
    let id = DMatrix::<f64>::identity(cells, cells);
    let op = &d * &d - &d * beta + &id * alpha;
    let lu = op.lu();
    let form = |u: &DVector<f64>| -> f64 {
        let du = &d * u;
        let lap_sq: f64 = du.iter().zip(&w).map(|(x, wj)| x * x * wj).sum();
        let grad: f64 = -u.iter().zip(du.iter()).zip(&w).map(|((a, b), wj)| a * b * wj).sum::<f64>();
        let mass: f64 = u.iter().zip(&w).map(|(x, wj)| x * x * wj).sum();
        lap_sq + beta * grad + alpha * mass
    };
    let power = |u: &DVector<f64>| -> f64 { u.iter().zip(&w).map(|(x, wj)| x.max(0.0).powf(q + 1.0) * wj).sum() };

    let sigma = (beta / alpha).sqrt() / 2.0;
    let mut u = DVector::from_iterator(cells, r.iter().map(|x| (-x * x / (2.0 * sigma * sigma)).exp()));
    let mut level = f64::NAN;
    for _ in 0..400 {
        let lam = (form(&u) / power(&u)).powf(1.0 / (q - 1.0));
        u *= lam;
        let next = power(&u) * (q - 1.0) / (2.0 * (q + 1.0));
        let done = (next - level).abs() <= 1e-15 * next;
        level = next;
        if done {
            break;
        }
        let rhs = u.map(|x| x.max(0.0).powf(q));
        u = lu.solve(&rhs).unwrap();
    }
    level
}

/// Richardson extrapolation of [`radial_fd_level`] from `cells` and `2·cells`.
pub fn radial_fd_level_extrapolated(dim: usize, r_max: f64, cells: usize) -> f64 {
    let coarse = radial_fd_level(dim, ALPHA, BETA, Q, r_max, cells);
    let fine = radial_fd_level(dim, ALPHA, BETA, Q, r_max, 2 * cells);
    (4.0 * fine - coarse) / 3.0
}

// --- shared ground states -------------------------------------------------------

pub fn gs_problem(dim: usize) -> GroundStateProblem {
    match dim {
        1 => GroundStateProblem::new(ALPHA, BETA, Q, 1, 40.0, 320),
        2 => GroundStateProblem::new(ALPHA, BETA, Q, 2, 40.0, 128),
        _ => panic!("no fixture in dimension {dim}"),
    }
}

pub fn ground_state(dim: usize) -> &'static GroundState {
    static GS1: OnceLock<GroundState> = OnceLock::new();
    static GS2: OnceLock<GroundState> = OnceLock::new();
    let cell = if dim == 1 { &GS1 } else { &GS2 };
    cell.get_or_init(|| solve_ground_state(&gs_problem(dim), &SolverConfig::default()).unwrap())
}

// --- multistart fixtures ----------------------------------------------------------

/// Flat torus of edge 1; photography cutoff `s = 0.9`.
pub const TORUS_L: f64 = 1.0;
pub const CUTOFF: f64 = 0.9;

pub fn torus_params(dim: usize, eps: f64) -> EnergyParams {
    let points = if dim == 1 { 256 } else { 128 };
    limit_params(eps, dim, TORUS_L, points)
}

/// 8 seeds on T¹, 3×3 on T².
pub fn torus_lattice(p: &EnergyParams) -> Vec<TorusPoint> {
    let per_axis = if p.grid().dim() == 1 { 8 } else { 3 };
    seed_lattice(p.grid(), per_axis)
}

pub fn torus_options(dim: usize) -> MultistartOptions {
    MultistartOptions {
        cutoff: CUTOFF,
        include_constant: true,
        random_seeds: if dim == 1 { 4 } else { 2 },
        rng_seed: 1,
        parallel: true,
    }
}

// --- scalar root finding -----------------------------------------------------------

pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "root not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
