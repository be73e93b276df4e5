//! Periodic spectral calculus on the flat torus `[0, L)ⁿ`, `n ≤ 3`.
//!
//! Fields are stored row-major (last axis fastest). Differential operators are
//! Fourier multipliers; quadrature is the `hⁿ`-weighted Riemann sum, which is
//! Parseval-consistent with the unnormalized forward FFT:
//!
//! ```text
//! ∫ u² = hⁿ Σ u_j² = (hⁿ / Pⁿ) Σ |û_k|²
//! ```

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// A point of the torus; coordinates are taken modulo `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint(pub Vec<f64>);

impl TorusPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

pub struct TorusGrid {
    dim: usize,
    length: f64,
    points: usize,
    wavenumbers: Vec<f64>,
    k_sq: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("length", &self.length)
            .field("points", &self.points)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.length == other.length && self.points == other.points
    }
}

impl TorusGrid {
    /// `points` per axis must be even and at least 8.
    pub fn new(dim: usize, length: f64, points: usize) -> Result<Arc<Self>> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("box edge {length} must be positive")));
        }
        if points < 8 || !points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("points per axis {points} must be even and ≥ 8")));
        }

        let base = 2.0 * std::f64::consts::PI / length;
        // FFT order: 0, 1, …, P/2, −P/2+1, …, −1. The Nyquist index P/2 is its
        // own negative modulo P, so the set is closed under negation.
        let wavenumbers: Vec<f64> = (0..points)
            .map(|j| {
                let signed = if j <= points / 2 { j as i64 } else { j as i64 - points as i64 };
                base * signed as f64
            })
            .collect();

        let total = points.pow(dim as u32);
        let mut k_sq = vec![0.0; total];
        let mut idx = [0usize; MAX_DIM];
        for (flat, slot) in k_sq.iter_mut().enumerate() {
            decompose(flat, dim, points, &mut idx);
            *slot = idx[..dim].iter().map(|&j| wavenumbers[j] * wavenumbers[j]).sum();
        }

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        Ok(Arc::new(TorusGrid { dim, length, points, wavenumbers, k_sq, forward, inverse }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `hⁿ` of every node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Per-axis wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `|k|²` for every mode, row-major in FFT order.
    pub fn k_squared(&self) -> &[f64] {
        &self.k_sq
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        decompose(flat, self.dim, self.points, &mut idx);
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn node_point(&self, flat: usize) -> TorusPoint {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        TorusPoint(idx[..self.dim].iter().map(|&i| i as f64 * h).collect())
    }

    /// Node at the middle of the box, index `P/2` on every axis.
    pub fn center_node(&self) -> usize {
        self.flat_index(&[self.points / 2; MAX_DIM])
    }

    pub fn center_point(&self) -> TorusPoint {
        TorusPoint(vec![self.length / 2.0; self.dim])
    }

    /// Node nearest to `x` (coordinates taken modulo `L`).
    pub fn nearest_node(&self, x: &TorusPoint) -> usize {
        let p = self.points as i64;
        let h = self.spacing();
        let mut idx = [0usize; MAX_DIM];
        for (slot, &c) in idx.iter_mut().zip(x.coords()) {
            *slot = ((c / h).round() as i64).rem_euclid(p) as usize;
        }
        self.flat_index(&idx)
    }

    /// Per-axis displacement from `b` to `a`, wrapped into `[−L/2, L/2)`.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| wrap_centered(x - y, self.length)).collect()
    }

    pub fn distance(&self, a: &TorusPoint, b: &TorusPoint) -> f64 {
        self.displacement(a.coords(), b.coords()).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Index-space shift moving node `from` onto node `to`.
    pub fn shift_between(&self, from: usize, to: usize) -> Vec<i64> {
        let a = self.multi_index(from);
        let b = self.multi_index(to);
        (0..self.dim).map(|d| b[d] as i64 - a[d] as i64).collect()
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let p = self.points;
        let total = data.len();
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); p];
        for axis in 0..self.dim {
            let stride = p.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * p;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, value) in line.iter().enumerate() {
                        data[base + j * stride] = *value;
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform of real nodal values.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform (with the `1/Pⁿ` normalization), real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spectrum, &self.inverse);
        let scale = 1.0 / spectrum.len() as f64;
        spectrum.iter().map(|c| c.re * scale).collect()
    }

    /// Applies the real Fourier multiplier `symbol[k]` (one entry per mode).
    pub fn apply_multiplier(&self, values: &[f64], symbol: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (c, &s) in spec.iter_mut().zip(symbol) {
            *c *= s;
        }
        self.inverse_real(spec)
    }

    /// `∫ u · M u` for the multiplier `M`, evaluated in Fourier space.
    pub fn multiplier_form(&self, values: &[f64], symbol: &[f64]) -> f64 {
        let spec = self.forward(values);
        let sum: f64 = spec.iter().zip(symbol).map(|(c, &s)| s * c.norm_sqr()).sum();
        sum * self.cell_volume() / self.len() as f64
    }
}

fn decompose(mut flat: usize, dim: usize, points: usize, idx: &mut [usize; MAX_DIM]) {
    for d in (0..dim).rev() {
        idx[d] = flat % points;
        flat /= points;
    }
}

/// Wraps `x` into `[−L/2, L/2)`.
pub fn wrap_centered(x: f64, length: f64) -> f64 {
    let half = length / 2.0;
    (x + half).rem_euclid(length) - half
}

/// Real grid function on a [`TorusGrid`].
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Field { grid, values })
    }

    fn from_parts(grid: Arc<TorusGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Field { grid, values }
    }

    pub fn constant(grid: Arc<TorusGrid>, c: f64) -> Self {
        let n = grid.len();
        Self::from_parts(grid, vec![c; n])
    }

    pub fn zeros(grid: Arc<TorusGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every node; `f` receives the node coordinates.
    pub fn from_fn(grid: Arc<TorusGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let h = grid.spacing();
        let dim = grid.dim();
        let mut coords = [0.0; MAX_DIM];
        let values = (0..grid.len())
            .map(|flat| {
                let idx = grid.multi_index(flat);
                for d in 0..dim {
                    coords[d] = idx[d] as f64 * h;
                }
                f(&coords[..dim])
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same samples on another grid with the same node count.
    pub fn with_grid(&self, grid: Arc<TorusGrid>) -> Result<Self> {
        Self::new(grid, self.values.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    fn check_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + c * b).collect();
        Ok(Self::from_parts(self.grid.clone(), values))
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn mul(&self, other: &Field) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).collect();
        Ok(Self::from_parts(self.grid.clone(), values))
    }

    /// `∫ u`.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫ u v`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Discrete `Lᵖ` norm. Panics if `p < 1`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "Lp norm needs p ≥ 1, got {p}");
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// First node attaining the maximum.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// Periodic shift by whole grid steps: `result[i + shift] = self[i]`.
    pub fn translate(&self, shift: &[i64]) -> Self {
        let grid = &self.grid;
        let p = grid.points() as i64;
        let dim = grid.dim();
        let mut out = vec![0.0; self.values.len()];
        let mut target = [0usize; MAX_DIM];
        for (flat, &v) in self.values.iter().enumerate() {
            let idx = grid.multi_index(flat);
            for d in 0..dim {
                let s = shift.get(d).copied().unwrap_or(0);
                target[d] = (idx[d] as i64 + s).rem_euclid(p) as usize;
            }
            out[grid.flat_index(&target)] = v;
        }
        Self::from_parts(grid.clone(), out)
    }

    /// Spectral Laplacian, multiplier `−|k|²`.
    pub fn laplacian(&self) -> Self {
        let symbol: Vec<f64> = self.grid.k_squared().iter().map(|k2| -k2).collect();
        self.apply_multiplier(&symbol)
    }

    /// Spectral bilaplacian, multiplier `|k|⁴`.
    pub fn bilaplacian(&self) -> Self {
        let symbol: Vec<f64> = self.grid.k_squared().iter().map(|k2| k2 * k2).collect();
        self.apply_multiplier(&symbol)
    }

    pub fn apply_multiplier(&self, symbol: &[f64]) -> Self {
        Self::from_parts(self.grid.clone(), self.grid.apply_multiplier(&self.values, symbol))
    }

    /// `∫ |∇u|² = (hⁿ/Pⁿ) Σ |k|² |û_k|²`.
    pub fn grad_norm_sq_integral(&self) -> f64 {
        self.grid.multiplier_form(&self.values, self.grid.k_squared())
    }

    /// `∫ u²` evaluated from the Fourier coefficients.
    pub fn spectral_l2_sq(&self) -> f64 {
        let ones = vec![1.0; self.values.len()];
        self.grid.multiplier_form(&self.values, &ones)
    }

    /// Fraction of `Σ|û|²` carried by modes whose largest per-axis index
    /// `|j|` exceeds `P/3`.
    pub fn tail_indicator(&self) -> f64 {
        let grid = &self.grid;
        let p = grid.points();
        let spec = grid.forward(&self.values);
        let mut total = 0.0;
        let mut tail = 0.0;
        for (flat, c) in spec.iter().enumerate() {
            let idx = grid.multi_index(flat);
            let top = idx[..grid.dim()].iter().map(|&j| j.min(p - j)).max().unwrap_or(0);
            let e = c.norm_sqr();
            total += e;
            if 3 * top > p {
                tail += e;
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    /// Trigonometric interpolant evaluated on a tensor product of axis
    /// coordinates. `axes[d][t]` is the `t`-th coordinate along axis `d`;
    /// `None` marks coordinates where the result is forced to zero. Output is
    /// row-major over the target axes.
    pub fn interpolate_tensor(&self, axes: &[Vec<Option<f64>>]) -> Vec<f64> {
        let grid = &self.grid;
        let dim = grid.dim();
        assert_eq!(axes.len(), dim, "one coordinate list per axis");
        let p = grid.points();
        let k = grid.wavenumbers();
        let inv_p = 1.0 / p as f64;

        let mut data = grid.forward(&self.values);
        let mut shape = vec![p; dim];
        for (axis, coords) in axes.iter().enumerate() {
            let rows = coords.len();
            let mut mat = vec![Complex64::new(0.0, 0.0); rows * p];
            for (t, c) in coords.iter().enumerate() {
                let Some(y) = *c else { continue };
                for j in 0..p {
                    mat[t * p + j] = if 2 * j == p {
                        // Split Nyquist mode: ½(e^{ik y} + e^{−ik y}).
                        Complex64::new((k[j] * y).cos() * inv_p, 0.0)
                    } else {
                        Complex64::from_polar(inv_p, k[j] * y)
                    };
                }
            }
            data = contract_axis(&data, &shape, axis, &mat, rows);
            shape[axis] = rows;
        }
        data.iter().map(|c| c.re).collect()
    }
}

fn contract_axis(data: &[Complex64], shape: &[usize], axis: usize, mat: &[Complex64], rows: usize) -> Vec<Complex64> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let len = shape[axis];
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; outer * rows * inner];
    for o in 0..outer {
        for r in 0..rows {
            let mrow = &mat[r * len..(r + 1) * len];
            let dst = &mut out[(o * rows + r) * inner..(o * rows + r + 1) * inner];
            for (j, &m) in mrow.iter().enumerate() {
                if m == zero {
                    continue;
                }
                let src = &data[(o * len + j) * inner..(o * len + j + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
    out
}
