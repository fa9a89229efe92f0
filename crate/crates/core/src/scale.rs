//! The interpolation scale `B_θ = H^{2θ}(𝕋)`, uniform time grids, grid
//! functions with one, two and three time indices, and the Hölder-type norms
//! built on top of them.
//!
//! Elements of the scale are truncated Fourier series on the one-dimensional
//! torus. The norm of `v = Σ c_k e^{ikx}` at regularity `θ` is
//!
//! ```text
//! ‖v‖_θ = ( Σ_k (1 + k²)^{2θ} |c_k|² )^{1/2}
//! ```
//!
//! so every norm is exactly computable from the coefficients and the
//! interpolation inequality holds with constant one.
//!
//! All Hölder norms are suprema over grid nodes only. They are therefore lower
//! bounds of the corresponding continuum norms.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid. Node `k` sits at time `(k - origin)·dt`, computed from
/// the index so that no rounding accumulates along the grid.
///
/// A driver grid covers `I_r = [-r, T]`: its `origin` equals `delay_steps`
/// and the delay `r = delay_steps·dt` lies exactly on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dt: f64,
    n_points: usize,
    origin: usize,
    delay_steps: usize,
}

impl Grid {
    pub fn new(dt: f64, n_points: usize, origin: usize, delay_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Grid(format!("dt must be positive, got {dt}")));
        }
        if n_points == 0 {
            return Err(Error::Grid("a grid needs at least one node".into()));
        }
        if origin >= n_points {
            return Err(Error::Grid(format!(
                "origin node {origin} outside a grid of {n_points} nodes"
            )));
        }
        if delay_steps > origin {
            return Err(Error::Grid(format!(
                "delay of {delay_steps} steps needs at least that many history nodes (have {origin})"
            )));
        }
        Ok(Self { dt, n_points, origin, delay_steps })
    }

    /// Grid on `[0, t_end]` with `n_steps` cells and no delay.
    pub fn interval(t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Grid("need at least one cell".into()));
        }
        Self::new(t_end / n_steps as f64, n_steps + 1, 0, 0)
    }

    /// Grid on `I_r = [-r, T]` with `r = delay_steps·dt` and `T = steps·dt`.
    pub fn delayed(dt: f64, steps: usize, delay_steps: usize) -> Result<Self> {
        Self::new(dt, steps + delay_steps + 1, delay_steps, delay_steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_cells(&self) -> usize {
        self.n_points - 1
    }

    /// Index of the node at time zero.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    pub fn delay(&self) -> f64 {
        self.delay_steps as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        (k as f64 - self.origin as f64) * self.dt
    }

    pub fn t_start(&self) -> f64 {
        self.time(0)
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_points - 1)
    }

    /// Time between two nodes, `t ≥ s`.
    pub fn span(&self, s: usize, t: usize) -> f64 {
        (t as f64 - s as f64) * self.dt
    }

    /// Node index of a time lying on the grid.
    pub fn node_at(&self, time: f64) -> Result<usize> {
        let k = time / self.dt + self.origin as f64;
        let rounded = k.round();
        if (k - rounded).abs() > 1e-9 || rounded < 0.0 || rounded >= self.n_points as f64 {
            return Err(Error::Grid(format!("time {time} is not a node of this grid")));
        }
        Ok(rounded as usize)
    }
}

/// Squared amplitude weights `(1 + k²)^{2θ}` for modes `-K..=K`.
#[derive(Debug, Clone)]
pub struct ScaleWeights {
    theta: f64,
    squared: Vec<f64>,
}

impl ScaleWeights {
    pub fn new(max_mode: usize, theta: f64) -> Self {
        let squared = (0..2 * max_mode + 1)
            .map(|i| {
                let k = i as f64 - max_mode as f64;
                (1.0 + k * k).powf(2.0 * theta)
            })
            .collect();
        Self { theta, squared }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn max_mode(&self) -> usize {
        (self.squared.len() - 1) / 2
    }

    fn squared(&self) -> &[f64] {
        &self.squared
    }
}

/// Truncated Fourier series on the torus, modes `-K..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralVector {
    max_mode: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralVector {
    pub fn zeros(max_mode: usize) -> Self {
        Self { max_mode, coeffs: vec![Complex64::new(0.0, 0.0); 2 * max_mode + 1] }
    }

    /// Builds a vector from coefficients ordered `c_{-K}, …, c_K`.
    pub fn from_coeffs(max_mode: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * max_mode + 1 {
            return Err(Error::Parameter(format!(
                "{} coefficients for max mode {max_mode}",
                coeffs.len()
            )));
        }
        Ok(Self { max_mode, coeffs })
    }

    /// A single Fourier mode `amplitude · e^{ikx}`.
    pub fn single_mode(max_mode: usize, k: i64, amplitude: Complex64) -> Self {
        let mut v = Self::zeros(max_mode);
        v.set(k, amplitude);
        v
    }

    /// Real-valued trigonometric polynomial `Σ a_k cos(kx) + b_k sin(kx)`,
    /// with `cos_sin[k] = (a_k, b_k)` for `k = 0..`.
    pub fn from_trig(max_mode: usize, cos_sin: &[(f64, f64)]) -> Self {
        let mut v = Self::zeros(max_mode);
        for (k, &(a, b)) in cos_sin.iter().enumerate().take(max_mode + 1) {
            let k = k as i64;
            if k == 0 {
                v.set(0, Complex64::new(a, 0.0));
            } else {
                // a cos + b sin = (a - ib)/2 e^{ikx} + (a + ib)/2 e^{-ikx}
                v.set(k, Complex64::new(a / 2.0, -b / 2.0));
                v.set(-k, Complex64::new(a / 2.0, b / 2.0));
            }
        }
        v
    }

    /// Random real-valued vector with Gaussian coefficients decaying like
    /// `(1 + k²)^{-decay}`.
    pub fn random_real<R: Rng + ?Sized>(rng: &mut R, max_mode: usize, decay: f64) -> Self {
        let mut v = Self::zeros(max_mode);
        let c0: f64 = rng.sample(StandardNormal);
        v.set(0, Complex64::new(c0, 0.0));
        for k in 1..=max_mode as i64 {
            let scale = (1.0 + (k * k) as f64).powf(-decay);
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let c = Complex64::new(re, im) * scale;
            v.set(k, c);
            v.set(-k, c.conj());
        }
        v
    }

    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of mode `k`, zero outside the truncation.
    pub fn get(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.max_mode {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(k + self.max_mode as i64) as usize]
    }

    pub fn set(&mut self, k: i64, value: Complex64) {
        assert!(k.unsigned_abs() as usize <= self.max_mode, "mode {k} outside truncation");
        let i = (k + self.max_mode as i64) as usize;
        self.coeffs[i] = value;
    }

    /// Mode numbers in storage order.
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let k = self.max_mode as i64;
        -k..=k
    }

    /// `‖v‖_θ`.
    pub fn norm(&self, theta: f64) -> f64 {
        self.norm_with(&ScaleWeights::new(self.max_mode, theta))
    }

    pub fn norm_with(&self, weights: &ScaleWeights) -> f64 {
        debug_assert_eq!(weights.max_mode(), self.max_mode);
        self.coeffs
            .iter()
            .zip(weights.squared())
            .map(|(c, w)| w * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `‖self - other‖` without allocating.
    pub fn distance_with(&self, other: &Self, weights: &ScaleWeights) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(weights.squared())
            .map(|((a, b), w)| w * (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Whether `c_{-k} = conj(c_k)` holds to `tol`, i.e. the function is real.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.modes().all(|k| (self.get(-k) - self.get(k).conj()).norm() <= tol)
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert_eq!(self.max_mode, x.max_mode);
        for (c, xc) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += xc * a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// Mode-wise multiplication by a real Fourier multiplier `m(k)`.
    pub fn apply_multiplier<M: Fn(i64) -> f64>(&self, multiplier: M) -> Self {
        let mut out = self.clone();
        out.apply_multiplier_in_place(multiplier);
        out
    }

    pub fn apply_multiplier_in_place<M: Fn(i64) -> f64>(&mut self, multiplier: M) {
        let k0 = self.max_mode as i64;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c *= multiplier(i as i64 - k0);
        }
    }

    /// Keeps modes `|k| ≤ cutoff`, zeroing the rest.
    pub fn truncated(&self, cutoff: usize) -> Self {
        let cutoff = cutoff as i64;
        self.apply_multiplier(|k| if k.abs() <= cutoff { 1.0 } else { 0.0 })
    }
}

impl Add<&SpectralVector> for &SpectralVector {
    type Output = SpectralVector;
    fn add(self, rhs: &SpectralVector) -> SpectralVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&SpectralVector> for &SpectralVector {
    type Output = SpectralVector;
    fn sub(self, rhs: &SpectralVector) -> SpectralVector {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&SpectralVector> for SpectralVector {
    fn add_assign(&mut self, rhs: &SpectralVector) {
        debug_assert_eq!(self.max_mode, rhs.max_mode);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&SpectralVector> for SpectralVector {
    fn sub_assign(&mut self, rhs: &SpectralVector) {
        debug_assert_eq!(self.max_mode, rhs.max_mode);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Mul<f64> for &SpectralVector {
    type Output = SpectralVector;
    fn mul(self, rhs: f64) -> SpectralVector {
        self.scaled(rhs)
    }
}

impl Neg for &SpectralVector {
    type Output = SpectralVector;
    fn neg(self) -> SpectralVector {
        self.scaled(-1.0)
    }
}

/// `‖v‖_θ`.
pub fn sobolev_norm(v: &SpectralVector, theta: f64) -> f64 {
    v.norm(theta)
}

/// Ratio `‖v‖_{θ2}^{θ3-θ1} / (‖v‖_{θ1}^{θ3-θ2} ‖v‖_{θ3}^{θ2-θ1})`, which never
/// exceeds one on this scale. The zero vector yields 0.
pub fn interpolation_inequality_check(
    v: &SpectralVector,
    theta1: f64,
    theta2: f64,
    theta3: f64,
) -> Result<f64> {
    if !(theta1 <= theta2 && theta2 <= theta3) {
        return Err(Error::Parameter(format!(
            "need θ1 ≤ θ2 ≤ θ3, got {theta1}, {theta2}, {theta3}"
        )));
    }
    if v.is_zero() {
        return Ok(0.0);
    }
    let (n1, n2, n3) = (v.norm(theta1).ln(), v.norm(theta2).ln(), v.norm(theta3).ln());
    let log_ratio = (theta3 - theta1) * n2 - (theta3 - theta2) * n1 - (theta2 - theta1) * n3;
    Ok(log_ratio.exp())
}

/// Values a grid function can carry: elements of the scale, or driver-valued
/// reals measured in the Euclidean norm (`θ` is then ignored).
pub trait PathValue: Clone + Send + Sync {
    fn difference(&self, other: &Self) -> Self;
    fn value_norm(&self, theta: f64) -> f64;
}

impl PathValue for SpectralVector {
    fn difference(&self, other: &Self) -> Self {
        self - other
    }
    fn value_norm(&self, theta: f64) -> f64 {
        self.norm(theta)
    }
}

impl PathValue for f64 {
    fn difference(&self, other: &Self) -> Self {
        self - other
    }
    fn value_norm(&self, _theta: f64) -> f64 {
        self.abs()
    }
}

impl PathValue for Vec<f64> {
    fn difference(&self, other: &Self) -> Self {
        self.iter().zip(other).map(|(a, b)| a - b).collect()
    }
    fn value_norm(&self, _theta: f64) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// One-index grid function on nodes `lo..=hi` of a grid.
#[derive(Debug, Clone)]
pub struct GridFn1<V> {
    grid: Grid,
    lo: usize,
    values: Vec<V>,
}

impl<V: PathValue> GridFn1<V> {
    pub fn new(grid: Grid, lo: usize, values: Vec<V>) -> Result<Self> {
        if values.is_empty() || lo + values.len() > grid.n_points() {
            return Err(Error::Grid(format!(
                "{} values from node {lo} do not fit a grid of {} nodes",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, lo, values })
    }

    pub fn from_fn<F: Fn(usize) -> V>(grid: Grid, lo: usize, hi: usize, f: F) -> Result<Self> {
        Self::new(grid, lo, (lo..=hi).map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.lo + self.values.len() - 1
    }

    pub fn at(&self, k: usize) -> &V {
        &self.values[k - self.lo]
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    /// `δf_{t,s} = f_t - f_s`.
    pub fn delta(&self) -> GridFn2<V> {
        GridFn2::from_fn(self.grid, self.lo, self.hi(), |s, t| self.at(t).difference(self.at(s)))
    }

    /// `sup_t ‖f_t‖_θ`.
    pub fn sup_norm(&self, theta: f64) -> f64 {
        self.values.iter().map(|v| v.value_norm(theta)).fold(0.0, f64::max)
    }
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i.saturating_sub(1)) / 2 + j
}

/// Two-index grid function stored on ordered node pairs `lo ≤ s ≤ t ≤ hi`.
#[derive(Debug, Clone)]
pub struct GridFn2<V> {
    grid: Grid,
    lo: usize,
    hi: usize,
    values: Vec<V>,
}

impl<V: PathValue> GridFn2<V> {
    pub fn from_fn<F: Fn(usize, usize) -> V>(grid: Grid, lo: usize, hi: usize, f: F) -> Self {
        let mut values = Vec::with_capacity((hi - lo + 1) * (hi - lo + 2) / 2);
        for s in lo..=hi {
            for t in s..=hi {
                values.push(f(s, t));
            }
        }
        Self { grid, lo, hi, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn range(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    /// `f_{t,s}`, requiring `s ≤ t`.
    pub fn get(&self, s: usize, t: usize) -> Result<&V> {
        if s > t {
            return Err(Error::Unordered { s, t });
        }
        if s < self.lo || t > self.hi {
            return Err(Error::Grid(format!("pair ({s}, {t}) outside [{}, {}]", self.lo, self.hi)));
        }
        let n = self.hi - self.lo + 1;
        Ok(&self.values[pair_index(n, s - self.lo, t - s)])
    }

    fn at(&self, s: usize, t: usize) -> &V {
        let n = self.hi - self.lo + 1;
        &self.values[pair_index(n, s - self.lo, t - s)]
    }

    /// `δg_{t,u,s} = g_{t,s} - g_{t,u} - g_{u,s}`.
    pub fn delta(&self) -> GridFn3<V> {
        GridFn3::from_fn(self.grid, self.lo, self.hi, |s, u, t| {
            self.at(s, t).difference(self.at(u, t)).difference(self.at(s, u))
        })
    }

    pub fn map<F: Fn(&V) -> V>(&self, f: F) -> Self {
        Self { grid: self.grid, lo: self.lo, hi: self.hi, values: self.values.iter().map(f).collect() }
    }
}

/// Three-index grid function stored on ordered triples `s ≤ u ≤ t`.
/// Storage is cubic in the number of nodes; intended for small grids.
#[derive(Debug, Clone)]
pub struct GridFn3<V> {
    grid: Grid,
    lo: usize,
    hi: usize,
    values: Vec<V>,
}

impl<V: PathValue> GridFn3<V> {
    pub fn from_fn<F: Fn(usize, usize, usize) -> V>(grid: Grid, lo: usize, hi: usize, f: F) -> Self {
        let mut values = Vec::new();
        for s in lo..=hi {
            for u in s..=hi {
                for t in u..=hi {
                    values.push(f(s, u, t));
                }
            }
        }
        Self { grid, lo, hi, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn range(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    /// Visits every stored triple as `(s, u, t, value)`.
    pub fn for_each<F: FnMut(usize, usize, usize, &V)>(&self, mut f: F) {
        let mut i = 0;
        for s in self.lo..=self.hi {
            for u in s..=self.hi {
                for t in u..=self.hi {
                    f(s, u, t, &self.values[i]);
                    i += 1;
                }
            }
        }
    }
}

/// `max_{lo ≤ s < t ≤ hi} norm(s, t) / (t - s)^α`, the discrete Hölder
/// supremum of a two-index function given through its pointwise norm.
pub fn holder_sup<F>(grid: &Grid, lo: usize, hi: usize, alpha: f64, norm_at: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if hi <= lo {
        return 0.0;
    }
    let dt = grid.dt();
    let row = |s: usize| {
        (s + 1..=hi)
            .map(|t| norm_at(s, t) / ((t - s) as f64 * dt).powf(alpha))
            .fold(0.0, f64::max)
    };
    if (hi - lo) >= 64 {
        (lo..hi).into_par_iter().map(row).reduce(|| 0.0, f64::max)
    } else {
        (lo..hi).map(row).fold(0.0, f64::max)
    }
}

/// Like [`holder_sup`], but `row(s)` returns the norms for every
/// `t = s+1..=hi` at once, so rows can be computed incrementally.
pub fn holder_sup_rows<F>(grid: &Grid, lo: usize, hi: usize, alpha: f64, row: F) -> f64
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    if hi <= lo {
        return 0.0;
    }
    let dt = grid.dt();
    let scaled = |s: usize| {
        row(s)
            .into_iter()
            .enumerate()
            .map(|(i, v)| v / ((i + 1) as f64 * dt).powf(alpha))
            .fold(0.0, f64::max)
    };
    if (hi - lo) >= 16 {
        (lo..hi).into_par_iter().map(scaled).reduce(|| 0.0, f64::max)
    } else {
        (lo..hi).map(scaled).fold(0.0, f64::max)
    }
}

/// `‖f‖_{α,θ}` for a stored two-index function.
pub fn holder_norm2<V: PathValue>(f: &GridFn2<V>, alpha: f64, theta: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::Parameter(format!("α must be positive, got {alpha}")));
    }
    let (lo, hi) = f.range();
    if hi - lo < 1 {
        return Err(Error::Grid("Hölder norm needs at least two nodes".into()));
    }
    Ok(holder_sup(f.grid(), lo, hi, alpha, |s, t| f.at(s, t).value_norm(theta)))
}

/// `‖f‖_{α1,α2,θ} = max_{s<u<t} ‖f_{t,u,s}‖_θ / ((u - s)^{α1} (t - u)^{α2})`.
pub fn holder_norm3<V: PathValue>(f: &GridFn3<V>, alpha1: f64, alpha2: f64, theta: f64) -> Result<f64> {
    if alpha1 <= 0.0 || alpha2 <= 0.0 {
        return Err(Error::Parameter("exponents must be positive".into()));
    }
    let (lo, hi) = f.range();
    if hi - lo < 2 {
        return Err(Error::Grid("three-index norm needs at least three nodes".into()));
    }
    let dt = f.grid().dt();
    let mut best = 0.0f64;
    f.for_each(|s, u, t, v| {
        if s < u && u < t {
            let denom = ((u - s) as f64 * dt).powf(alpha1) * ((t - u) as f64 * dt).powf(alpha2);
            best = best.max(v.value_norm(theta) / denom);
        }
    });
    Ok(best)
}

/// `sup_k ‖v_k‖_θ` over a slice of scale elements.
pub fn sup_norm(values: &[SpectralVector], theta: f64) -> f64 {
    match values.first() {
        None => 0.0,
        Some(v0) => {
            let w = ScaleWeights::new(v0.max_mode(), theta);
            values.iter().map(|v| v.norm_with(&w)).fold(0.0, f64::max)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_grid(n_steps: usize) -> Grid {
        Grid::interval(1.0, n_steps).unwrap()
    }

    #[test]
    fn grid_times_come_from_indices() {
        let g = Grid::delayed(0.1, 30, 5).unwrap();
        assert_eq!(g.origin(), 5);
        assert_eq!(g.time(5), 0.0);
        assert_eq!(g.time(0), -0.5);
        assert!((g.time(35) - 3.0).abs() < 1e-15);
        assert_eq!(g.time(17), 12.0 * 0.1);
        assert_eq!(g.delay(), 0.5);
        assert_eq!(g.node_at(1.2).unwrap(), 17);
        assert!(g.node_at(1.25).is_err());
        assert!(Grid::new(0.1, 10, 2, 3).is_err());
    }

    #[test]
    fn sobolev_norm_examples() {
        let v = SpectralVector::single_mode(4, 0, Complex64::new(1.0, 0.0));
        assert_eq!(sobolev_norm(&v, 5.0), 1.0);
        let v = SpectralVector::single_mode(4, 1, Complex64::new(1.0, 0.0));
        assert!((sobolev_norm(&v, 0.5) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sobolev_norm_monotone_in_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v = SpectralVector::random_real(&mut rng, 12, 0.5);
            let t1: f64 = rng.gen_range(-2.0..2.0);
            let t2 = t1 + rng.gen_range(0.0..2.0);
            assert!(v.norm(t1) <= v.norm(t2));
        }
    }

    #[test]
    fn interpolation_ratio_examples() {
        let v = SpectralVector::single_mode(6, 3, Complex64::new(0.3, -2.0));
        let r = interpolation_inequality_check(&v, -1.0, 0.2, 1.7).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let z = SpectralVector::zeros(6);
        assert_eq!(interpolation_inequality_check(&z, 0.0, 1.0, 2.0).unwrap(), 0.0);
        assert!(interpolation_inequality_check(&v, 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn interpolation_ratio_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v = SpectralVector::random_real(&mut rng, 16, 0.0);
            let mut th = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            th.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let r = interpolation_inequality_check(&v, th[0], th[1], th[2]).unwrap();
            assert!(r <= 1.0 + 1e-10, "ratio {r}");
        }
    }

    #[test]
    fn holder_norm2_examples() {
        let g = unit_grid(64);
        let id = GridFn1::from_fn(g, 0, 64, |k| g.time(k)).unwrap();
        assert!((holder_norm2(&id.delta(), 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);

        let zero = GridFn2::from_fn(g, 0, 64, |_, _| 0.0);
        assert_eq!(holder_norm2(&zero, 0.5, 0.0).unwrap(), 0.0);

        let sqrt = GridFn1::from_fn(g, 0, 64, |k| g.time(k).sqrt()).unwrap();
        assert!((holder_norm2(&sqrt.delta(), 0.5, 0.0).unwrap() - 1.0).abs() < 1e-12);

        let single = Grid::interval(1.0, 1).unwrap();
        let f = GridFn2::from_fn(single, 0, 0, |_, _| 0.0);
        assert!(holder_norm2(&f, 0.5, 0.0).is_err());
        assert!(f.get(0, 0).is_ok());
    }

    #[test]
    fn unordered_pairs_are_rejected() {
        let g = unit_grid(4);
        let f = GridFn2::from_fn(g, 0, 4, |s, t| (t - s) as f64);
        assert!(matches!(f.get(3, 1), Err(Error::Unordered { s: 3, t: 1 })));
        assert_eq!(*f.get(1, 3).unwrap(), 2.0);
    }

    #[test]
    fn holder_norm3_examples() {
        let g = unit_grid(12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<SpectralVector> = (0..=12).map(|_| SpectralVector::random_real(&mut rng, 4, 0.0)).collect();
        let f = GridFn1::new(g, 0, vals).unwrap();
        assert!(holder_norm3(&f.delta().delta(), 0.4, 0.4, 1.0).unwrap() < 1e-12);

        let zero = GridFn3::from_fn(g, 0, 12, |_, _, _| 0.0);
        assert_eq!(holder_norm3(&zero, 1.0, 1.0, 0.0).unwrap(), 0.0);

        let prod = GridFn3::from_fn(g, 0, 12, |s, u, t| g.span(u, t) * g.span(s, u));
        assert!((holder_norm3(&prod, 1.0, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);

        let tiny = GridFn3::from_fn(Grid::interval(1.0, 1).unwrap(), 0, 1, |_, _, _| 0.0);
        assert!(holder_norm3(&tiny, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn three_index_norm_uses_alpha1_on_the_left_gap() {
        let g = unit_grid(8);
        let f = GridFn3::from_fn(g, 0, 8, |s, u, _t| g.span(s, u).powi(2));
        // (u - s)^2 / ((u - s)^2 (t - u)^{0+}) stays bounded by the smallest t - u.
        let n = holder_norm3(&f, 2.0, 1e-9, 0.0).unwrap();
        assert!((n - 1.0).abs() < 1e-6);
    }

    #[test]
    fn trig_constructor_is_real() {
        let v = SpectralVector::from_trig(5, &[(1.0, 0.0), (0.5, -0.25), (0.0, 2.0)]);
        assert!(v.is_hermitian(0.0));
        assert_eq!(v.get(1), Complex64::new(0.25, 0.125));
    }
}
