//! Delayed rough drivers `𝐗̄ = (X, 𝕏, 𝕏(-r))`.
//!
//! A driver is built from a path sampled on a fine subgrid (each coarse cell
//! split into `subgrid_factor` fine cells). Second-level increments are
//! symmetric (trapezoidal) sums over the fine cells:
//!
//! ```text
//! 𝕏^{ij}_{t,s}     = Σ ((X^i_a + X^i_b)/2 - X^i_s)             (X^j_b - X^j_a)
//! 𝕏(-r)^{ij}_{t,s} = Σ ((X^i_{a-r} + X^i_{b-r})/2 - X^i_{s-r}) (X^j_b - X^j_a)
//! ```
//!
//! so the first tensor slot carries the (possibly delayed) integrand and
//! Chen's relations
//!
//! ```text
//! δ𝕏_{t,u,s}     = δX_{u,s} ⊗ δX_{t,u}
//! δ𝕏(-r)_{t,u,s} = δX_{u-r,s-r} ⊗ δX_{t,u}
//! ```
//!
//! hold for the discrete sums.
//!
//! Areas are stored per coarse cell and, independently, per dyadic block of
//! cells (each block summed directly from the fine path). Arbitrary pairs are
//! reconstructed from the coarsest blocks through Chen's relation, and
//! [`chen_residual`] compares every block against the composition of its two
//! halves. Memory stays `O(n·d²)`.

mod cache;
pub mod fbm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::Grid;

pub use cache::{load_driver, read_driver, save_driver, write_driver, DRIVER_MAGIC};

/// How the second-level increments were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// fractional Brownian motion, symmetric (Russo–Vallois) sums
    FbmSymmetric,
    /// Brownian motion, Stratonovich (geometric) lift
    BmStratonovich,
    /// Brownian motion with the `-½(t-s)δ_ij` correction on the non-delayed area
    BmIto,
    /// a given deterministic path
    Deterministic,
}

impl Flavor {
    pub fn code(self) -> u64 {
        match self {
            Flavor::FbmSymmetric => 0,
            Flavor::BmStratonovich => 1,
            Flavor::BmIto => 2,
            Flavor::Deterministic => 3,
        }
    }

    pub fn from_code(code: u64) -> Result<Self> {
        Ok(match code {
            0 => Flavor::FbmSymmetric,
            1 => Flavor::BmStratonovich,
            2 => Flavor::BmIto,
            3 => Flavor::Deterministic,
            other => return Err(Error::Format(format!("unknown flavor code {other}"))),
        })
    }
}

/// A path sampled on the fine subgrid of a coarse grid. Fine node
/// `j·subgrid_factor` coincides with coarse node `j`.
#[derive(Debug, Clone)]
pub struct FinePath {
    grid: Grid,
    subgrid_factor: usize,
    d: usize,
    /// node-major, `d` values per fine node
    values: Vec<f64>,
}

impl FinePath {
    pub fn new(grid: Grid, subgrid_factor: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if subgrid_factor == 0 || d == 0 {
            return Err(Error::Parameter("subgrid factor and dimension must be positive".into()));
        }
        let n_fine = grid.n_cells() * subgrid_factor + 1;
        if values.len() != n_fine * d {
            return Err(Error::Parameter(format!(
                "fine path has {} values, expected {}",
                values.len(),
                n_fine * d
            )));
        }
        Ok(Self { grid, subgrid_factor, d, values })
    }

    /// Evaluates `path` at every fine node.
    pub fn from_fn<F: Fn(f64) -> Vec<f64>>(grid: Grid, subgrid_factor: usize, d: usize, path: F) -> Result<Self> {
        if subgrid_factor == 0 {
            return Err(Error::Parameter("subgrid factor must be positive".into()));
        }
        let n_fine = grid.n_cells() * subgrid_factor + 1;
        let fine_dt = grid.dt() / subgrid_factor as f64;
        let origin = (grid.origin() * subgrid_factor) as f64;
        let mut values = Vec::with_capacity(n_fine * d);
        for j in 0..n_fine {
            let x = path((j as f64 - origin) * fine_dt);
            if x.len() != d {
                return Err(Error::Parameter(format!("path returned {} components, expected {d}", x.len())));
            }
            values.extend(x);
        }
        Self::new(grid, subgrid_factor, d, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn subgrid_factor(&self) -> usize {
        self.subgrid_factor
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_fine(&self) -> usize {
        self.values.len() / self.d
    }

    #[inline]
    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.d + i]
    }

    /// Drops history so that the path covers `[-delay_steps·dt, T]`.
    pub fn restrict_history(&self, delay_steps: usize) -> Result<Self> {
        let origin = self.grid.origin();
        if delay_steps > origin {
            return Err(Error::MissingHistory(format!(
                "path holds {origin} history cells, {delay_steps} requested"
            )));
        }
        let skip = (origin - delay_steps) * self.subgrid_factor * self.d;
        let grid = Grid::delayed(self.grid.dt(), self.grid.n_points() - 1 - origin, delay_steps)?;
        Self::new(grid, self.subgrid_factor, self.d, self.values[skip..].to_vec())
    }

    /// Adds another fine path on the same grid, scaled by `eps`.
    pub fn perturbed(&self, other: &FinePath, eps: f64) -> Result<Self> {
        if self.grid != other.grid || self.subgrid_factor != other.subgrid_factor || self.d != other.d {
            return Err(Error::GridMismatch("fine paths differ in layout".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + eps * b).collect();
        Self::new(self.grid, self.subgrid_factor, self.d, values)
    }
}

/// Samples `d` independent fBm components on the fine subgrid of `grid`,
/// two-sided with `X_0 = 0`. `hurst = 1/2` gives Brownian motion.
pub fn sample_fine_path(seed: u64, hurst: f64, grid: &Grid, d: usize, subgrid_factor: usize) -> Result<FinePath> {
    if !(hurst > 1.0 / 3.0 && hurst <= 0.5) {
        return Err(Error::Parameter(format!("Hurst index {hurst} outside (1/3, 1/2]")));
    }
    if subgrid_factor == 0 || d == 0 {
        return Err(Error::Parameter("subgrid factor and dimension must be positive".into()));
    }
    let n_inc = grid.n_cells() * subgrid_factor;
    if n_inc == 0 {
        return Err(Error::Factorisation(0));
    }
    let h = grid.dt() / subgrid_factor as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals = fbm::draw_normals(&mut rng, d, n_inc);
    let increments = if hurst == 0.5 {
        let sd = h.sqrt();
        normals.iter().map(|z| z.iter().map(|x| sd * x).collect()).collect()
    } else {
        fbm::fgn_from_normals(hurst, h, &normals)?
    };
    let origin = grid.origin() * subgrid_factor;
    let paths: Vec<Vec<f64>> = increments
        .iter()
        .map(|inc| {
            let p = fbm::cumulate(inc);
            let x0 = p[origin];
            p.into_iter().map(|x| x - x0).collect()
        })
        .collect();
    let n_fine = n_inc + 1;
    let mut values = Vec::with_capacity(n_fine * d);
    for j in 0..n_fine {
        for p in &paths {
            values.push(p[j]);
        }
    }
    FinePath::new(*grid, subgrid_factor, d, values)
}

/// Area data per cell and per dyadic block of cells. Level `l` block `j`
/// covers cells `j·2^l .. (j+1)·2^l` counted from the pyramid's base node.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pyramid {
    pub(crate) base: usize,
    pub(crate) levels: Vec<Vec<f64>>,
}

impl Pyramid {
    fn block(&self, level: usize, j: usize, d2: usize) -> &[f64] {
        &self.levels[level][j * d2..(j + 1) * d2]
    }

    fn n_cells(&self, d2: usize) -> usize {
        self.levels.first().map_or(0, |l| l.len() / d2)
    }
}

/// Neumaier-compensated sum of one block area from the fine path. `shift` is
/// the delay in fine steps applied to the integrand slot.
fn block_area(fine: &FinePath, a: usize, b: usize, shift: usize, out: &mut [f64]) {
    let d = fine.d;
    for i in 0..d {
        let base = fine.at(a - shift, i);
        for j in 0..d {
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for p in a..b {
                let inner = 0.5 * (fine.at(p - shift, i) + fine.at(p + 1 - shift, i)) - base;
                let term = inner * (fine.at(p + 1, j) - fine.at(p, j));
                let t = sum + term;
                if sum.abs() >= term.abs() {
                    comp += (sum - t) + term;
                } else {
                    comp += (term - t) + sum;
                }
                sum = t;
            }
            out[i * d + j] = sum + comp;
        }
    }
}

fn build_pyramid(fine: &FinePath, first_cell: usize, n_cells: usize, shift_cells: usize) -> Pyramid {
    let m = fine.subgrid_factor;
    let d2 = fine.d * fine.d;
    let shift = shift_cells * m;
    let mut levels = Vec::new();
    let mut width = 1usize;
    while width <= n_cells && (width == 1 || n_cells / width >= 1) {
        let count = n_cells / width;
        if count == 0 {
            break;
        }
        let mut level = vec![0.0; count * d2];
        for j in 0..count {
            let a = (first_cell + j * width) * m;
            let b = (first_cell + (j + 1) * width) * m;
            block_area(fine, a, b, shift, &mut level[j * d2..(j + 1) * d2]);
        }
        levels.push(level);
        if count < 2 {
            break;
        }
        width *= 2;
    }
    Pyramid { base: first_cell, levels }
}

/// `𝐗̄ = (X, 𝕏, 𝕏(-r))` on a grid covering `[-r, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedRoughDriver {
    grid: Grid,
    d: usize,
    flavor: Flavor,
    seed: u64,
    hurst: f64,
    subgrid_factor: usize,
    x: Vec<f64>,
    area: Pyramid,
    delayed: Pyramid,
}

impl DelayedRoughDriver {
    /// Enhances a fine path into a delayed rough driver with symmetric sums.
    pub fn from_fine_path(fine: &FinePath, flavor: Flavor, seed: u64, hurst: f64) -> Result<Self> {
        let grid = *fine.grid();
        let m = fine.subgrid_factor;
        let d = fine.d;
        if grid.n_points() < 2 {
            return Err(Error::Grid("a driver needs at least one cell".into()));
        }
        if grid.origin() != grid.delay_steps() {
            return Err(Error::Grid("a driver grid starts at -r: origin must equal the delay".into()));
        }
        let mut x = Vec::with_capacity(grid.n_points() * d);
        for k in 0..grid.n_points() {
            for i in 0..d {
                x.push(fine.at(k * m, i));
            }
        }
        let area = build_pyramid(fine, 0, grid.n_cells(), 0);
        let origin = grid.origin();
        let delayed = build_pyramid(fine, origin, grid.n_cells() - origin, grid.delay_steps());
        let driver = Self { grid, d, flavor, seed, hurst, subgrid_factor: m, x, area, delayed };
        Ok(match flavor {
            Flavor::BmIto => driver.with_ito_correction(),
            _ => driver,
        })
    }

    pub(crate) fn from_parts(
        grid: Grid,
        d: usize,
        flavor: Flavor,
        seed: u64,
        hurst: f64,
        subgrid_factor: usize,
        x: Vec<f64>,
        area: Pyramid,
        delayed: Pyramid,
    ) -> Self {
        Self { grid, d, flavor, seed, hurst, subgrid_factor, x, area, delayed }
    }

    pub(crate) fn pyramids(&self) -> (&Pyramid, &Pyramid) {
        (&self.area, &self.delayed)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn subgrid_factor(&self) -> usize {
        self.subgrid_factor
    }

    pub fn delay_steps(&self) -> usize {
        self.grid.delay_steps()
    }

    /// `X_k`.
    #[inline]
    pub fn x(&self, k: usize) -> &[f64] {
        &self.x[k * self.d..(k + 1) * self.d]
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x
    }

    /// `δX^i_{t,s}`.
    #[inline]
    pub fn increment(&self, s: usize, t: usize, i: usize) -> f64 {
        self.x[t * self.d + i] - self.x[s * self.d + i]
    }

    /// `𝕏` on cell `[k, k+1]`, row-major `d×d`.
    pub fn cell_area(&self, k: usize) -> &[f64] {
        let d2 = self.d * self.d;
        self.area.block(0, k, d2)
    }

    /// `𝕏(-r)` on cell `[k, k+1]`, defined for cells inside `[0, T]`.
    pub fn cell_delayed_area(&self, k: usize) -> &[f64] {
        let d2 = self.d * self.d;
        self.delayed.block(0, k - self.delayed.base, d2)
    }

    /// All stored cell areas, in index order.
    pub fn cell_areas(&self) -> &[f64] {
        &self.area.levels[0]
    }

    pub fn cell_delayed_areas(&self) -> &[f64] {
        &self.delayed.levels[0]
    }

    /// `sup_k |X_k|`.
    pub fn sup_x(&self) -> f64 {
        (0..self.grid.n_points())
            .map(|k| self.x(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Tolerance used for Chen and reconstruction checks, `1e-12·(1 + ‖X‖∞²)`.
    pub fn chen_tolerance(&self) -> f64 {
        1e-12 * (1.0 + self.sup_x().powi(2))
    }

    fn shift(&self, delayed: bool) -> usize {
        if delayed {
            self.grid.delay_steps()
        } else {
            0
        }
    }

    /// Adds `δX_{u-shift,s-shift} ⊗ δX_{t,u}` to `acc`.
    fn add_cross(&self, acc: &mut [f64], s: usize, u: usize, t: usize, shift: usize) {
        let d = self.d;
        for i in 0..d {
            let a = self.increment(s - shift, u - shift, i);
            if a == 0.0 {
                continue;
            }
            for j in 0..d {
                acc[i * d + j] += a * self.increment(u, t, j);
            }
        }
    }

    /// `𝕏_{t,s}` (or `𝕏(-r)_{t,s}`) reconstructed from the coarsest stored
    /// blocks through Chen's relation.
    pub fn reconstruct_area(&self, s: usize, t: usize, delayed: bool) -> Result<Vec<f64>> {
        if s > t {
            return Err(Error::Unordered { s, t });
        }
        if t >= self.grid.n_points() {
            return Err(Error::Grid(format!("node {t} outside the driver grid")));
        }
        let pyr = if delayed { &self.delayed } else { &self.area };
        if s < pyr.base {
            return Err(Error::MissingHistory(format!(
                "delayed area is defined on [0, T] only (node {s} < {})",
                pyr.base
            )));
        }
        let d2 = self.d * self.d;
        let shift = self.shift(delayed);
        let mut acc = vec![0.0; d2];
        let (start, end) = (s - pyr.base, t - pyr.base);
        let mut p = start;
        while p < end {
            let mut level = 0;
            while level + 1 < pyr.levels.len() {
                let w = 1usize << (level + 1);
                if p % w == 0 && p + w <= end && (p / w) < pyr.levels[level + 1].len() / d2 {
                    level += 1;
                } else {
                    break;
                }
            }
            let w = 1usize << level;
            let block = pyr.block(level, p >> level, d2);
            let (u, v) = (p + pyr.base, p + w + pyr.base);
            self.add_cross(&mut acc, s, u, v, shift);
            for (a, b) in acc.iter_mut().zip(block) {
                *a += b;
            }
            p += w;
        }
        Ok(acc)
    }

    /// `𝕏_{t,s}` for every `t` in `s..=hi`, by accumulating cells left to right.
    pub fn area_sweep(&self, s: usize, hi: usize, delayed: bool) -> Vec<Vec<f64>> {
        let d2 = self.d * self.d;
        let shift = self.shift(delayed);
        let mut out = Vec::with_capacity(hi - s + 1);
        let mut acc = vec![0.0; d2];
        out.push(acc.clone());
        for k in s..hi {
            self.add_cross(&mut acc, s, k, k + 1, shift);
            let cell = if delayed { self.cell_delayed_area(k) } else { self.cell_area(k) };
            for (a, b) in acc.iter_mut().zip(cell) {
                *a += b;
            }
            out.push(acc.clone());
        }
        out
    }

    /// Copy with the `-½(t-s)δ_ij` correction on every non-delayed block.
    fn with_ito_correction(mut self) -> Self {
        let d = self.d;
        let d2 = d * d;
        let dt = self.grid.dt();
        for (level, data) in self.area.levels.iter_mut().enumerate() {
            let width = (1usize << level) as f64 * dt;
            for block in data.chunks_mut(d2) {
                for i in 0..d {
                    block[i * d + i] -= 0.5 * width;
                }
            }
        }
        self.flavor = Flavor::BmIto;
        self
    }

    /// Coarsens by merging pairs of cells (`dt → 2dt`). The merged cells are
    /// the stored level-one blocks, so no information is recomputed.
    pub fn coarsened(&self) -> Result<Self> {
        let g = &self.grid;
        if g.n_cells() % 2 != 0 || g.origin() % 2 != 0 || g.delay_steps() % 2 != 0 {
            return Err(Error::Grid("coarsening needs an even number of cells, history and delay".into()));
        }
        if self.area.levels.len() < 2 || self.delayed.levels.len() < 2 {
            return Err(Error::Grid("grid too small to coarsen".into()));
        }
        let grid = Grid::new(2.0 * g.dt(), g.n_cells() / 2 + 1, g.origin() / 2, g.delay_steps() / 2)?;
        let d = self.d;
        let x: Vec<f64> = (0..grid.n_points()).flat_map(|k| self.x(2 * k).to_vec()).collect();
        let area = Pyramid { base: 0, levels: self.area.levels[1..].to_vec() };
        let delayed = Pyramid { base: self.delayed.base / 2, levels: self.delayed.levels[1..].to_vec() };
        Ok(Self {
            grid,
            d,
            flavor: self.flavor,
            seed: self.seed,
            hurst: self.hurst,
            subgrid_factor: self.subgrid_factor * 2,
            x,
            area,
            delayed,
        })
    }

    /// Copy with `amount` added to entry `(i, j)` of one stored cell area.
    /// Used to exercise the Chen checks.
    pub fn with_perturbed_cell_area(&self, cell: usize, i: usize, j: usize, amount: f64) -> Self {
        let mut out = self.clone();
        let d = self.d;
        out.area.levels[0][cell * d * d + i * d + j] += amount;
        out
    }

    /// Copy with the `-½(t-s)δ_ij` correction applied to the non-delayed area.
    pub fn enhance_brownian_ito(&self) -> Result<Self> {
        if self.flavor != Flavor::BmStratonovich {
            return Err(Error::Parameter(format!(
                "the corrected Brownian lift starts from a Stratonovich driver, got {:?}",
                self.flavor
            )));
        }
        Ok(self.clone().with_ito_correction())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.d != other.d {
            return Err(Error::GridMismatch("drivers live on different grids or dimensions".into()));
        }
        Ok(())
    }
}

/// Samples an fBm driver (symmetric lift). `hurst = 1/2` is allowed and gives
/// a Brownian path with the same flavor code.
pub fn sample_fbm(seed: u64, hurst: f64, grid: &Grid, d: usize, subgrid_factor: usize) -> Result<DelayedRoughDriver> {
    let fine = sample_fine_path(seed, hurst, grid, d, subgrid_factor)?;
    DelayedRoughDriver::from_fine_path(&fine, Flavor::FbmSymmetric, seed, hurst)
}

/// Brownian driver with the geometric (Stratonovich) lift.
pub fn sample_brownian(seed: u64, grid: &Grid, d: usize, subgrid_factor: usize) -> Result<DelayedRoughDriver> {
    let fine = sample_fine_path(seed, 0.5, grid, d, subgrid_factor)?;
    DelayedRoughDriver::from_fine_path(&fine, Flavor::BmStratonovich, seed, 0.5)
}

/// Lift of a deterministic path evaluated on the fine subgrid.
pub fn enhance_deterministic<F: Fn(f64) -> Vec<f64>>(
    path: F,
    d: usize,
    grid: &Grid,
    subgrid_factor: usize,
) -> Result<DelayedRoughDriver> {
    let fine = FinePath::from_fn(*grid, subgrid_factor, d, path)?;
    DelayedRoughDriver::from_fine_path(&fine, Flavor::Deterministic, 0, f64::NAN)
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Chen residuals `(non-delayed, delayed)`: the largest defect of
/// `δ𝕏_{t,u,s} = δX_{u,s} ⊗ δX_{t,u}` (and its delayed analogue) over every
/// stored dyadic block against its two halves and over grid triples
/// (exhaustive on small grids, a fixed pseudo-random sample otherwise).
pub fn chen_residual(driver: &DelayedRoughDriver) -> (f64, f64) {
    (chen_residual_level(driver, false), chen_residual_level(driver, true))
}

fn chen_residual_level(driver: &DelayedRoughDriver, delayed: bool) -> f64 {
    let d2 = driver.d * driver.d;
    let pyr = if delayed { &driver.delayed } else { &driver.area };
    let shift = driver.shift(delayed);
    let mut worst = 0.0f64;

    for level in 1..pyr.levels.len() {
        let half = 1usize << (level - 1);
        let count = pyr.levels[level].len() / d2;
        for j in 0..count {
            let s = pyr.base + j * 2 * half;
            let (u, t) = (s + half, s + 2 * half);
            let mut r: Vec<f64> = pyr.block(level, j, d2).to_vec();
            for (a, (l, rr)) in r.iter_mut().zip(pyr.block(level - 1, 2 * j, d2).iter().zip(pyr.block(level - 1, 2 * j + 1, d2))) {
                *a -= l + rr;
            }
            let mut cross = vec![0.0; d2];
            driver.add_cross(&mut cross, s, u, t, shift);
            for (a, c) in r.iter_mut().zip(&cross) {
                *a -= c;
            }
            worst = worst.max(frobenius(&r));
        }
    }

    let lo = pyr.base;
    let hi = pyr.base + pyr.n_cells(d2);
    let mut check = |s: usize, u: usize, t: usize| {
        let (Ok(ts), Ok(us), Ok(tu)) = (
            driver.reconstruct_area(s, t, delayed),
            driver.reconstruct_area(s, u, delayed),
            driver.reconstruct_area(u, t, delayed),
        ) else {
            return;
        };
        let mut cross = vec![0.0; d2];
        driver.add_cross(&mut cross, s, u, t, shift);
        let r: Vec<f64> = (0..d2).map(|k| ts[k] - us[k] - tu[k] - cross[k]).collect();
        worst = worst.max(frobenius(&r));
    };
    if hi - lo <= 40 {
        for s in lo..=hi {
            for u in s..=hi {
                for t in u..=hi {
                    check(s, u, t);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x43_48_45_4e);
        for _ in 0..4096 {
            let mut v = [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)];
            v.sort_unstable();
            check(v[0], v[1], v[2]);
        }
    }
    worst
}

/// Discrete Hölder norms of a driver (or of the difference of two drivers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverMetricReport {
    pub alpha: f64,
    pub path_holder: f64,
    pub area_holder: f64,
    pub delayed_area_holder: f64,
    pub rho: f64,
}

fn holder_of_path(a: &DelayedRoughDriver, b: Option<&DelayedRoughDriver>, alpha: f64, lo: usize, hi: usize) -> f64 {
    let d = a.d;
    crate::scale::holder_sup(&a.grid, lo, hi, alpha, |s, t| {
        (0..d)
            .map(|i| {
                let v = a.increment(s, t, i) - b.map_or(0.0, |b| b.increment(s, t, i));
                v * v
            })
            .sum::<f64>()
            .sqrt()
    })
}

fn holder_of_area(
    a: &DelayedRoughDriver,
    b: Option<&DelayedRoughDriver>,
    alpha2: f64,
    lo: usize,
    hi: usize,
    delayed: bool,
) -> f64 {
    crate::scale::holder_sup_rows(&a.grid, lo, hi, alpha2, |s| {
        let sa = a.area_sweep(s, hi, delayed);
        let sb = b.map(|b| b.area_sweep(s, hi, delayed));
        (1..sa.len())
            .map(|k| {
                let x = &sa[k];
                match &sb {
                    Some(sb) => frobenius(&x.iter().zip(&sb[k]).map(|(p, q)| p - q).collect::<Vec<_>>()),
                    None => frobenius(x),
                }
            })
            .collect()
    })
}

fn metrics(a: &DelayedRoughDriver, b: Option<&DelayedRoughDriver>, alpha: f64, lo: usize, hi: usize) -> DriverMetricReport {
    let g = &a.grid;
    let path_lo = lo.saturating_sub(g.delay_steps());
    let path_holder = holder_of_path(a, b, alpha, path_lo, hi);
    let area_holder = holder_of_area(a, b, 2.0 * alpha, path_lo, hi, false);
    let delayed_area_holder = holder_of_area(a, b, 2.0 * alpha, lo.max(g.origin()), hi, true);
    DriverMetricReport {
        alpha,
        path_holder,
        area_holder,
        delayed_area_holder,
        rho: path_holder + area_holder + delayed_area_holder,
    }
}

/// Norms of `𝐗̄` over `I = [0, T]`, i.e. `ρ_{α,I}(𝐗̄) = ρ_{α,I}(𝐗̄, 0)`. The
/// path and area terms range over `I_r`, the delayed area over `I`.
pub fn driver_metrics(driver: &DelayedRoughDriver, alpha: f64) -> DriverMetricReport {
    let g = driver.grid;
    metrics(driver, None, alpha, g.origin(), g.n_points() - 1)
}

/// `ρ_{α,I}(𝐗̄, 𝐘̄) = ‖δ(X - Y)‖_α + ‖𝕏 - 𝕐‖_{2α} + ‖𝕏(-r) - 𝕐(-r)‖_{2α}`.
pub fn rough_distance(a: &DelayedRoughDriver, b: &DelayedRoughDriver, alpha: f64) -> Result<f64> {
    a.check_compatible(b)?;
    let g = a.grid;
    Ok(metrics(a, Some(b), alpha, g.origin(), g.n_points() - 1).rho)
}

/// Same metric restricted to nodes `lo..=hi` of `[0, T]`.
pub fn rough_distance_on(a: &DelayedRoughDriver, b: &DelayedRoughDriver, alpha: f64, lo: usize, hi: usize) -> Result<f64> {
    a.check_compatible(b)?;
    Ok(metrics(a, Some(b), alpha, lo, hi).rho)
}

/// `ρ_{α,[lo,hi]}(𝐗) = ‖δX‖_α + ‖𝕏‖_{2α}` of the plain (non-delayed) rough
/// path on nodes `lo..=hi`.
pub fn plain_rough_norm(driver: &DelayedRoughDriver, alpha: f64, lo: usize, hi: usize) -> f64 {
    holder_of_path(driver, None, alpha, lo, hi) + holder_of_area(driver, None, 2.0 * alpha, lo, hi, false)
}

/// `h(r) = sup_{r ≤ s < t ≤ T} |𝕏_{t,s} - 𝕏(-r)_{t,s}| / (t - s)^{2ᾱ}`.
pub fn area_gap(driver: &DelayedRoughDriver, alpha_bar: f64) -> f64 {
    let g = driver.grid;
    if g.delay_steps() == 0 {
        return 0.0;
    }
    let lo = g.origin() + g.delay_steps();
    let hi = g.n_points() - 1;
    if lo >= hi {
        return 0.0;
    }
    crate::scale::holder_sup_rows(&g, lo, hi, 2.0 * alpha_bar, |s| {
        let plain = driver.area_sweep(s, hi, false);
        let delayed = driver.area_sweep(s, hi, true);
        (1..plain.len())
            .map(|k| frobenius(&plain[k].iter().zip(&delayed[k]).map(|(p, q)| p - q).collect::<Vec<_>>()))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> Grid {
        Grid::delayed(1.0 / 32.0, 32, 8).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = small_grid();
        let a = sample_fbm(42, 0.4, &g, 2, 4).unwrap();
        let b = sample_fbm(42, 0.4, &g, 2, 4).unwrap();
        assert_eq!(a, b);
        let c = sample_fbm(43, 0.4, &g, 2, 4).unwrap();
        assert_ne!(a.x_values(), c.x_values());
        assert_eq!(a.x(g.origin()), &[0.0, 0.0]);
    }

    #[test]
    fn hurst_out_of_range() {
        let g = small_grid();
        assert!(sample_fbm(1, 0.3, &g, 1, 2).is_err());
        assert!(sample_fbm(1, 0.55, &g, 1, 2).is_err());
        assert!(sample_fbm(1, 0.4, &g, 1, 0).is_err());
    }

    #[test]
    fn linear_path_areas_are_exact() {
        let g = Grid::delayed(0.125, 8, 2).unwrap();
        let drv = enhance_deterministic(|t| vec![t], 1, &g, 4).unwrap();
        for k in 0..g.n_cells() {
            assert!((drv.cell_area(k)[0] - 0.125f64.powi(2) / 2.0).abs() < 1e-16);
        }
        for k in g.origin()..g.n_cells() {
            assert!((drv.cell_delayed_area(k)[0] - 0.125f64.powi(2) / 2.0).abs() < 1e-16);
        }
        let a = drv.reconstruct_area(2, 10, false).unwrap();
        assert!((a[0] - 0.5).abs() < 1e-15);
        let a = drv.reconstruct_area(3, 9, true).unwrap();
        assert!((a[0] - 0.75f64.powi(2) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_path_delayed_area_matches_quadrature() {
        // X_t = t², r = 1/4, 𝕏(-r)_{1,1/2} = ∫_{1/2}^1 ((u-r)² - (1/2-r)²) 2u du
        let g = Grid::delayed(1.0 / 16.0, 16, 4).unwrap();
        let drv = enhance_deterministic(|t| vec![t * t], 1, &g, 64).unwrap();
        let (s, t) = (g.node_at(0.5).unwrap(), g.node_at(1.0).unwrap());
        let got = drv.reconstruct_area(s, t, true).unwrap()[0];
        let n = 1_000_000;
        let h = 0.5 / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let u = 0.5 + (i as f64 + 0.5) * h;
                ((u - 0.25).powi(2) - 0.0625) * 2.0 * u * h
            })
            .sum();
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn zero_delay_areas_coincide_bitwise() {
        let g = Grid::delayed(1.0 / 16.0, 16, 0).unwrap();
        let drv = sample_fbm(5, 0.45, &g, 2, 4).unwrap();
        assert_eq!(drv.cell_areas(), drv.cell_delayed_areas());
        let (a, b) = chen_residual(&drv);
        assert_eq!(a, b);
    }

    #[test]
    fn chen_detects_injected_defect() {
        let g = small_grid();
        let drv = sample_fbm(7, 0.45, &g, 2, 4).unwrap();
        let (a, b) = chen_residual(&drv);
        assert!(a <= drv.chen_tolerance() && b <= drv.chen_tolerance(), "{a} {b}");
        let bad = drv.with_perturbed_cell_area(11, 0, 1, 1.0);
        let (a, _) = chen_residual(&bad);
        assert!(a >= 0.5);
    }

    #[test]
    fn ito_correction_shifts_diagonal() {
        let g = small_grid();
        let bm = sample_brownian(3, &g, 1, 4).unwrap();
        let corrected = bm.enhance_brownian_ito().unwrap();
        for k in 0..g.n_cells() {
            assert!((corrected.cell_area(k)[0] - (bm.cell_area(k)[0] - g.dt() / 2.0)).abs() < 1e-15);
        }
        assert_eq!(corrected.cell_delayed_areas(), bm.cell_delayed_areas());
        let (a, b) = chen_residual(&corrected);
        assert!(a <= corrected.chen_tolerance() && b <= corrected.chen_tolerance());
        assert!(corrected.enhance_brownian_ito().is_err());
    }

    #[test]
    fn reconstruct_edge_cases() {
        let g = small_grid();
        let drv = sample_fbm(8, 0.4, &g, 2, 2).unwrap();
        assert_eq!(drv.reconstruct_area(12, 12, false).unwrap(), vec![0.0; 4]);
        assert_eq!(drv.reconstruct_area(12, 13, false).unwrap(), drv.cell_area(12).to_vec());
        assert!(matches!(drv.reconstruct_area(13, 12, false), Err(Error::Unordered { .. })));
        assert!(drv.reconstruct_area(2, 12, true).is_err());
    }

    #[test]
    fn coarsening_keeps_chen_and_path() {
        let g = small_grid();
        let drv = sample_fbm(21, 0.45, &g, 2, 2).unwrap();
        let coarse = drv.coarsened().unwrap();
        assert_eq!(coarse.grid().dt(), 2.0 * g.dt());
        assert_eq!(coarse.x(coarse.grid().origin()), drv.x(g.origin()));
        let direct = drv.reconstruct_area(8, 20, false).unwrap();
        let via = coarse.reconstruct_area(4, 10, false).unwrap();
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn area_gap_zero_cases() {
        let g = Grid::delayed(1.0 / 16.0, 16, 0).unwrap();
        let drv = sample_brownian(1, &g, 1, 2).unwrap();
        assert_eq!(area_gap(&drv, 0.4), 0.0);
        let g = Grid::delayed(1.0 / 16.0, 16, 4).unwrap();
        let lin = enhance_deterministic(|t| vec![t], 1, &g, 4).unwrap();
        assert!(area_gap(&lin, 0.4) < 1e-14);
    }

    #[test]
    fn distance_to_self_and_zero() {
        let g = small_grid();
        let a = sample_fbm(2, 0.45, &g, 2, 2).unwrap();
        assert_eq!(rough_distance(&a, &a, 0.4).unwrap(), 0.0);
        let zero = enhance_deterministic(|_| vec![0.0, 0.0], 2, &g, 2).unwrap();
        let rho = rough_distance(&a, &zero, 0.4).unwrap();
        assert!((rho - driver_metrics(&a, 0.4).rho).abs() < 1e-12 * rho);
    }
}
