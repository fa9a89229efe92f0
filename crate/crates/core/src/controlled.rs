//! Controlled and delayed controlled paths `(y, y', ȳ')`, their remainders
//!
//! ```text
//! R̄^y_{t,s} = δy_{t,s} - Σ_i y'^i_s δX^i_{t,s} - Σ_i ȳ'^i_s δX^i_{t-r,s-r},
//! ```
//!
//! norms and distances, and composition with nonlinearities.
//!
//! Paths live on a contiguous range of nodes of their driver's grid. A plain
//! controlled path is the case `ȳ' = 0`, stored as `None` so that no delayed
//! increments are ever read for it.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{plain_rough_norm, DelayedRoughDriver};
use crate::error::{Error, Result};
use crate::nonlinearity::{NonlinearitySpec, Slot};
use crate::scale::{Grid, GridFn2, ScaleWeights, SpectralVector};

/// Derivative data per node: `d` vectors, one per driver component.
pub type Derivatives = Vec<Vec<SpectralVector>>;

#[derive(Debug, Clone)]
pub struct DelayedControlledPath {
    driver: Arc<DelayedRoughDriver>,
    lo: usize,
    theta: f64,
    y: Vec<SpectralVector>,
    y_prime: Derivatives,
    ybar_prime: Option<Derivatives>,
}

impl DelayedControlledPath {
    /// `lo` is the driver node of the first value.
    pub fn new(
        driver: Arc<DelayedRoughDriver>,
        lo: usize,
        theta: f64,
        y: Vec<SpectralVector>,
        y_prime: Derivatives,
        ybar_prime: Option<Derivatives>,
    ) -> Result<Self> {
        let n = y.len();
        let g = driver.grid();
        if n == 0 || lo + n > g.n_points() {
            return Err(Error::Grid(format!(
                "{n} nodes from {lo} do not fit a driver grid of {} nodes",
                g.n_points()
            )));
        }
        let k = y[0].max_mode();
        let d = driver.dim();
        let check = |name: &str, v: &Derivatives| -> Result<()> {
            if v.len() != n {
                return Err(Error::Parameter(format!("{name} has {} nodes, expected {n}", v.len())));
            }
            if v.iter().any(|row| row.len() != d || row.iter().any(|x| x.max_mode() != k)) {
                return Err(Error::Parameter(format!("{name} needs {d} components of max mode {k}")));
            }
            Ok(())
        };
        if y.iter().any(|v| v.max_mode() != k) {
            return Err(Error::Parameter("all values must share the max mode".into()));
        }
        check("y'", &y_prime)?;
        if let Some(yb) = &ybar_prime {
            check("ȳ'", yb)?;
            if lo < g.delay_steps() {
                return Err(Error::MissingHistory(format!(
                    "delayed increments at node {lo} need the driver on [{}, ..]",
                    g.time(lo) - g.delay()
                )));
            }
        }
        Ok(Self { driver, lo, theta, y, y_prime, ybar_prime })
    }

    /// Plain controlled path `(y, y')`.
    pub fn controlled(
        driver: Arc<DelayedRoughDriver>,
        lo: usize,
        theta: f64,
        y: Vec<SpectralVector>,
        y_prime: Derivatives,
    ) -> Result<Self> {
        Self::new(driver, lo, theta, y, y_prime, None)
    }

    /// `y ≡ c` with vanishing derivatives on nodes `lo..=hi`.
    pub fn constant(driver: Arc<DelayedRoughDriver>, lo: usize, hi: usize, theta: f64, c: &SpectralVector) -> Result<Self> {
        if hi < lo {
            return Err(Error::Unordered { s: lo, t: hi });
        }
        let d = driver.dim();
        let n = hi - lo + 1;
        let zero = SpectralVector::zeros(c.max_mode());
        Self::controlled(driver, lo, theta, vec![c.clone(); n], vec![vec![zero; d]; n])
    }

    /// `y_t = y₀ + Σ_i c_i (X^i_t - X^i_lo)`, `y' ≡ c`. Its remainder vanishes.
    pub fn driver_linear(
        driver: Arc<DelayedRoughDriver>,
        lo: usize,
        hi: usize,
        theta: f64,
        y0: &SpectralVector,
        c: &[SpectralVector],
    ) -> Result<Self> {
        if hi < lo {
            return Err(Error::Unordered { s: lo, t: hi });
        }
        if c.len() != driver.dim() {
            return Err(Error::Parameter(format!("need {} slopes, got {}", driver.dim(), c.len())));
        }
        let y = (lo..=hi)
            .map(|k| {
                let mut v = y0.clone();
                for (i, ci) in c.iter().enumerate() {
                    v.axpy(driver.increment(lo, k, i), ci);
                }
                v
            })
            .collect();
        let n = hi - lo + 1;
        Self::controlled(driver, lo, theta, y, vec![c.to_vec(); n])
    }

    pub fn driver(&self) -> &Arc<DelayedRoughDriver> {
        &self.driver
    }

    pub fn grid(&self) -> &Grid {
        self.driver.grid()
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.lo + self.y.len() - 1
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn max_mode(&self) -> usize {
        self.y[0].max_mode()
    }

    pub fn dim(&self) -> usize {
        self.driver.dim()
    }

    pub fn is_delayed(&self) -> bool {
        self.ybar_prime.is_some()
    }

    /// `y` at driver node `k`.
    pub fn y(&self, k: usize) -> &SpectralVector {
        &self.y[k - self.lo]
    }

    pub fn y_prime(&self, k: usize) -> &[SpectralVector] {
        &self.y_prime[k - self.lo]
    }

    pub fn ybar_prime(&self, k: usize) -> Option<&[SpectralVector]> {
        self.ybar_prime.as_ref().map(|v| v[k - self.lo].as_slice())
    }

    pub fn values(&self) -> &[SpectralVector] {
        &self.y
    }

    pub fn derivatives(&self) -> &Derivatives {
        &self.y_prime
    }

    pub fn delayed_derivatives(&self) -> Option<&Derivatives> {
        self.ybar_prime.as_ref()
    }

    /// Copy with every value shifted by `c`; derivatives unchanged.
    pub fn shifted(&self, c: &SpectralVector) -> Self {
        let mut out = self.clone();
        for v in &mut out.y {
            *v += c;
        }
        out
    }

    /// Same path on a sub-range of its nodes.
    pub fn restrict(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo < self.lo || hi > self.hi() || hi < lo {
            return Err(Error::Grid(format!("[{lo}, {hi}] not inside [{}, {}]", self.lo, self.hi())));
        }
        let (a, b) = (lo - self.lo, hi - self.lo + 1);
        Ok(Self {
            driver: self.driver.clone(),
            lo,
            theta: self.theta,
            y: self.y[a..b].to_vec(),
            y_prime: self.y_prime[a..b].to_vec(),
            ybar_prime: self.ybar_prime.as_ref().map(|v| v[a..b].to_vec()),
        })
    }

    /// Same data, read against another driver on the same grid.
    pub fn with_driver(&self, driver: Arc<DelayedRoughDriver>) -> Result<Self> {
        if driver.grid() != self.driver.grid() || driver.dim() != self.driver.dim() {
            return Err(Error::GridMismatch("replacement driver has a different layout".into()));
        }
        let mut out = self.clone();
        out.driver = driver;
        Ok(out)
    }

    /// Writes `R̄^y_{t,s}` into `out`.
    pub fn remainder_into(&self, s: usize, t: usize, out: &mut SpectralVector) {
        let drv = &*self.driver;
        let r = drv.delay_steps();
        out.coeffs_mut().copy_from_slice(self.y(t).coeffs());
        *out -= self.y(s);
        for (i, yp) in self.y_prime(s).iter().enumerate() {
            let dx = drv.increment(s, t, i);
            if dx != 0.0 {
                out.axpy(-dx, yp);
            }
        }
        if let Some(ybar) = self.ybar_prime(s) {
            for (i, yb) in ybar.iter().enumerate() {
                let dx = drv.increment(s - r, t - r, i);
                if dx != 0.0 {
                    out.axpy(-dx, yb);
                }
            }
        }
    }

    pub fn remainder_at(&self, s: usize, t: usize) -> Result<SpectralVector> {
        if s > t {
            return Err(Error::Unordered { s, t });
        }
        if s < self.lo || t > self.hi() {
            return Err(Error::Grid(format!("pair ({s}, {t}) outside [{}, {}]", self.lo, self.hi())));
        }
        let mut out = SpectralVector::zeros(self.max_mode());
        self.remainder_into(s, t, &mut out);
        Ok(out)
    }

    /// `R̄^y` on every ordered pair. Quadratic memory; meant for small grids.
    pub fn remainder(&self) -> GridFn2<SpectralVector> {
        GridFn2::from_fn(*self.grid(), self.lo, self.hi(), |s, t| {
            let mut out = SpectralVector::zeros(self.max_mode());
            self.remainder_into(s, t, &mut out);
            out
        })
    }
}

/// `R̄^y_{t,s}` as a two-index grid function.
pub fn remainder(p: &DelayedControlledPath) -> GridFn2<SpectralVector> {
    p.remainder()
}

/// Hölder suprema of a two-index quantity against several targets
/// `(time exponent, spatial regularity)` in a single pass over the pairs.
pub(crate) fn pair_suprema<F>(grid: &Grid, lo: usize, hi: usize, max_mode: usize, targets: &[(f64, f64)], fill: F) -> Vec<f64>
where
    F: Fn(usize, usize, &mut SpectralVector) + Sync,
{
    let m = targets.len();
    if hi <= lo {
        return vec![0.0; m];
    }
    let weights: Vec<ScaleWeights> = targets.iter().map(|&(_, th)| ScaleWeights::new(max_mode, th)).collect();
    let dt = grid.dt();
    let row = |s: usize| {
        let mut buf = SpectralVector::zeros(max_mode);
        let mut best = vec![0.0f64; m];
        for t in s + 1..=hi {
            fill(s, t, &mut buf);
            let span = (t - s) as f64 * dt;
            for (b, ((exp, _), w)) in best.iter_mut().zip(targets.iter().zip(&weights)) {
                *b = b.max(buf.norm_with(w) / span.powf(*exp));
            }
        }
        best
    };
    let merge = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect::<Vec<_>>();
    (lo..hi).into_par_iter().map(row).reduce(|| vec![0.0; m], merge)
}

/// The seven terms of `‖y, y', ȳ'‖_{𝐗̄,2α,θ}`, or of the distance
/// `ρ_{2α̃,2α,θ}` when computed for a difference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlledNormReport {
    pub sup_y: f64,
    pub sup_yprime: f64,
    pub holder_yprime: f64,
    pub sup_ybarprime: f64,
    pub holder_ybarprime: f64,
    pub holder_r_alpha: f64,
    pub holder_r_2alpha: f64,
    pub total: f64,
}

impl ControlledNormReport {
    fn finish(mut self) -> Self {
        self.total = self.sup_y
            + self.sup_yprime
            + self.holder_yprime
            + self.sup_ybarprime
            + self.holder_ybarprime
            + self.holder_r_alpha
            + self.holder_r_2alpha;
        self
    }
}

fn check_same_layout(p: &DelayedControlledPath, q: &DelayedControlledPath) -> Result<()> {
    if p.grid() != q.grid() || p.lo != q.lo || p.len() != q.len() || p.dim() != q.dim() || p.max_mode() != q.max_mode() {
        return Err(Error::GridMismatch(format!(
            "paths on [{}, {}] and [{}, {}] (or with different d, K) cannot be compared",
            p.lo,
            p.hi(),
            q.lo,
            q.hi()
        )));
    }
    Ok(())
}

/// Shared engine for norms (`q = None`) and distances. Hölder exponent `h`
/// for derivatives and `h, 2h` for remainders; spatial offsets `reg, 2·reg`.
fn seven_terms(p: &DelayedControlledPath, q: Option<&DelayedControlledPath>, h: f64, reg: f64, theta: f64) -> ControlledNormReport {
    let (lo, hi) = (p.lo, p.hi());
    let k = p.max_mode();
    let grid = *p.grid();
    let w0 = ScaleWeights::new(k, theta);
    let w1 = ScaleWeights::new(k, theta - reg);
    let zero = SpectralVector::zeros(k);

    let sup_y = (lo..=hi)
        .map(|t| match q {
            Some(q) => p.y(t).distance_with(q.y(t), &w0),
            None => p.y(t).norm_with(&w0),
        })
        .fold(0.0, f64::max);

    let deriv_terms = |get: &(dyn Fn(&DelayedControlledPath, usize) -> Option<&[SpectralVector]> + Sync)| -> (f64, f64) {
        if get(p, lo).is_none() && q.map_or(true, |q| get(q, lo).is_none()) {
            return (0.0, 0.0);
        }
        let comp = |path: &DelayedControlledPath, t: usize, i: usize| -> SpectralVector {
            get(path, t).map_or_else(|| zero.clone(), |v| v[i].clone())
        };
        let mut sup = 0.0;
        let mut hol = 0.0;
        for i in 0..p.dim() {
            let diff = |t: usize| match q {
                Some(q) => &comp(p, t, i) - &comp(q, t, i),
                None => comp(p, t, i),
            };
            sup += (lo..=hi).map(|t| diff(t).norm_with(&w1)).fold(0.0, f64::max);
            hol += pair_suprema(&grid, lo, hi, k, &[(h, theta - 2.0 * reg)], |s, t, out| {
                let d = &diff(t) - &diff(s);
                out.coeffs_mut().copy_from_slice(d.coeffs());
            })[0];
        }
        (sup, hol)
    };
    let (sup_yprime, holder_yprime) = deriv_terms(&|path, t| Some(path.y_prime(t)));
    let (sup_ybarprime, holder_ybarprime) = deriv_terms(&|path, t| path.ybar_prime(t));

    let r = pair_suprema(&grid, lo, hi, k, &[(h, theta - reg), (2.0 * h, theta - 2.0 * reg)], |s, t, out| {
        p.remainder_into(s, t, out);
        if let Some(q) = q {
            let mut other = SpectralVector::zeros(k);
            q.remainder_into(s, t, &mut other);
            *out -= &other;
        }
    });

    ControlledNormReport {
        sup_y,
        sup_yprime,
        holder_yprime,
        sup_ybarprime,
        holder_ybarprime,
        holder_r_alpha: r[0],
        holder_r_2alpha: r[1],
        total: 0.0,
    }
    .finish()
}

/// `‖y, y', ȳ'‖_{𝐗̄,2α,θ}` term by term.
pub fn controlled_norm(p: &DelayedControlledPath, alpha: f64, theta: f64) -> ControlledNormReport {
    seven_terms(p, None, alpha, alpha, theta)
}

/// `ρ_{2α̃,2α,θ}(p, q)` term by term. The two paths may be controlled by
/// different drivers on the same grid; each remainder uses its own driver.
pub fn controlled_distance_report(
    p: &DelayedControlledPath,
    q: &DelayedControlledPath,
    alpha_tilde: f64,
    alpha: f64,
    theta: f64,
) -> Result<ControlledNormReport> {
    check_same_layout(p, q)?;
    Ok(seven_terms(p, Some(q), alpha_tilde, alpha, theta))
}

pub fn controlled_distance(p: &DelayedControlledPath, q: &DelayedControlledPath, alpha_tilde: f64, alpha: f64, theta: f64) -> Result<f64> {
    Ok(controlled_distance_report(p, q, alpha_tilde, alpha, theta)?.total)
}

/// `‖δy‖_{α,θ-α}`.
pub fn increment_holder(p: &DelayedControlledPath, alpha: f64, theta: f64) -> f64 {
    pair_suprema(p.grid(), p.lo, p.hi(), p.max_mode(), &[(alpha, theta - alpha)], |s, t, out| {
        out.coeffs_mut().copy_from_slice(p.y(t).coeffs());
        *out -= p.y(s);
    })[0]
}

/// `ρ_{α}(𝐗̄)` over the nodes a delayed path reads: `I_{-r}` for the path and
/// plain area, the path's own range for the delayed area.
pub fn driver_norm_for(p: &DelayedControlledPath, alpha: f64) -> f64 {
    let drv = &*p.driver;
    let r = drv.delay_steps();
    let lo = p.lo.saturating_sub(r);
    let plain = plain_rough_norm(drv, alpha, lo, p.hi());
    if p.lo < drv.grid().origin() {
        return plain;
    }
    let delayed = crate::scale::holder_sup_rows(drv.grid(), p.lo, p.hi(), 2.0 * alpha, |s| {
        drv.area_sweep(s, p.hi(), true)[1..]
            .iter()
            .map(|m| m.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    });
    plain + delayed
}

fn same_driver(a: &Arc<DelayedRoughDriver>, b: &Arc<DelayedRoughDriver>) -> bool {
    Arc::ptr_eq(a, b) || (a.grid() == b.grid() && a.x_values() == b.x_values())
}

/// The composed triple at one node:
/// `(G(y, z), D₁G(y, z)∘y', D₂G(y, z)∘z')`, one entry per component of `G`.
pub(crate) fn compose_node(
    g: &NonlinearitySpec,
    y: &SpectralVector,
    yp: &[SpectralVector],
    z: &SpectralVector,
    zp: &[SpectralVector],
) -> (Vec<SpectralVector>, Derivatives, Derivatives) {
    let m = g.eval(y, z);
    let mp = (0..g.dim())
        .map(|i| yp.iter().map(|h| g.derivative_component(i, y, z, h, Slot::Present)).collect())
        .collect();
    let mbar = (0..g.dim())
        .map(|i| zp.iter().map(|h| g.derivative_component(i, y, z, h, Slot::Delayed)).collect())
        .collect();
    (m, mp, mbar)
}

/// `(m, m', m̄')_t = (G(y_t, z_{t-r}), D₁G∘y'_t, D₂G∘z'_{t-r})` for every
/// node of `p`, returned as one delayed controlled path per component of `G`.
/// `q` must cover the nodes `p.lo - r ..= p.hi - r`.
pub fn compose(g: &NonlinearitySpec, p: &DelayedControlledPath, q: &DelayedControlledPath) -> Result<Vec<DelayedControlledPath>> {
    g.validate()?;
    if p.is_delayed() || q.is_delayed() {
        return Err(Error::Parameter("composition takes plain controlled paths".into()));
    }
    if !same_driver(&p.driver, &q.driver) {
        return Err(Error::GridMismatch("both paths must be controlled by the same driver".into()));
    }
    if p.max_mode() != q.max_mode() {
        return Err(Error::Parameter("paths must share the max mode".into()));
    }
    let r = p.driver.delay_steps();
    if p.lo < r || p.lo - r < q.lo || p.hi() - r > q.hi() {
        return Err(Error::GridMismatch(format!(
            "delayed path on [{}, {}] does not cover [{}, {}]",
            q.lo,
            q.hi(),
            p.lo as i64 - r as i64,
            p.hi() as i64 - r as i64
        )));
    }
    let dg = g.dim();
    let n = p.len();
    let mut ms = vec![Vec::with_capacity(n); dg];
    let mut mps = vec![Vec::with_capacity(n); dg];
    let mut mbars = vec![Vec::with_capacity(n); dg];
    let nodes: Vec<_> = (p.lo..=p.hi())
        .into_par_iter()
        .map(|t| compose_node(g, p.y(t), p.y_prime(t), q.y(t - r), q.y_prime(t - r)))
        .collect();
    for (m, mp, mbar) in nodes {
        for (i, ((a, b), c)) in m.into_iter().zip(mp).zip(mbar).enumerate() {
            ms[i].push(a);
            mps[i].push(b);
            mbars[i].push(c);
        }
    }
    let theta = p.theta - g.order();
    ms.into_iter()
        .zip(mps)
        .zip(mbars)
        .map(|((m, mp), mbar)| DelayedControlledPath::new(p.driver.clone(), p.lo, theta, m, mp, Some(mbar)))
        .collect()
}

/// Requires `y'_t = G(y_t, z_{t-r})` at every node (relative tolerance
/// `1e-10`), then composes.
pub fn compose_self_derivative(g: &NonlinearitySpec, p: &DelayedControlledPath, q: &DelayedControlledPath) -> Result<Vec<DelayedControlledPath>> {
    check_self_derivative(g, p, q, 1e-10)?;
    compose(g, p, q)
}

/// Checks `y'_t = G(y_t, z_{t-r})` node by node.
pub fn check_self_derivative(g: &NonlinearitySpec, p: &DelayedControlledPath, q: &DelayedControlledPath, tol: f64) -> Result<()> {
    if g.dim() != p.dim() {
        return Err(Error::Parameter(format!("G has {} components, the driver {}", g.dim(), p.dim())));
    }
    let r = p.driver.delay_steps();
    if p.lo < r || p.lo - r < q.lo || p.hi() - r > q.hi() {
        return Err(Error::GridMismatch("delayed path does not cover the shifted range".into()));
    }
    let w = ScaleWeights::new(p.max_mode(), p.theta - 2.0);
    for t in p.lo..=p.hi() {
        let gv = g.eval(p.y(t), q.y(t - r));
        for (i, (a, b)) in p.y_prime(t).iter().zip(&gv).enumerate() {
            let err = a.distance_with(b, &w);
            if err > tol * (1.0 + b.norm_with(&w)) {
                return Err(Error::DerivativeMismatch {
                    node: t,
                    detail: format!("component {i} off by {err:.3e}"),
                });
            }
        }
    }
    Ok(())
}

/// Sum of the norms of a tuple of delayed controlled paths.
pub fn tuple_norm(paths: &[DelayedControlledPath], alpha: f64, theta: f64) -> f64 {
    paths.iter().map(|m| controlled_norm(m, alpha, theta).total).sum()
}

/// Ratio of the composed norm to the bracket
/// `(1 + ρ_{α,I₁}(𝐗) + ρ_{α,I₂}(𝐗))² · B`, where `B` is
/// `(1 + ‖y,y'‖ + ‖z,z'‖)²` in general and
/// `1 + ‖y,y'‖ + ‖y,y'‖‖z,z'‖ + ‖z,z'‖²` under the self-derivative relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn rough_bracket(p: &DelayedControlledPath, q: &DelayedControlledPath, alpha: f64) -> f64 {
    let d = &*p.driver;
    1.0 + plain_rough_norm(d, alpha, p.lo, p.hi()) + plain_rough_norm(d, alpha, q.lo, q.hi())
}

pub fn composition_bound(
    g: &NonlinearitySpec,
    p: &DelayedControlledPath,
    q: &DelayedControlledPath,
    alpha: f64,
    self_derivative: bool,
) -> Result<CompositionBound> {
    let m = if self_derivative { compose_self_derivative(g, p, q)? } else { compose(g, p, q)? };
    let lhs = tuple_norm(&m, alpha, p.theta - g.order());
    let (ny, nz) = (controlled_norm(p, alpha, p.theta).total, controlled_norm(q, alpha, q.theta).total);
    let paths = if self_derivative { 1.0 + ny + ny * nz + nz * nz } else { (1.0 + ny + nz).powi(2) };
    let rhs = rough_bracket(p, q, alpha).powi(2) * paths;
    Ok(CompositionBound { lhs, rhs, ratio: lhs / rhs })
}

/// Norm of the difference of two compositions, `(m - l, m' - l', m̄' - l̄')`,
/// against the product of the input distances and the cubic bracket.
pub fn compose_difference(
    g: &NonlinearitySpec,
    p: &DelayedControlledPath,
    q: &DelayedControlledPath,
    u: &DelayedControlledPath,
    v: &DelayedControlledPath,
    alpha: f64,
) -> Result<CompositionBound> {
    check_same_layout(p, u)?;
    check_same_layout(q, v)?;
    let m = compose(g, p, q)?;
    let l = compose(g, u, v)?;
    let theta = p.theta - g.order();
    let lhs: f64 = m.iter().zip(&l).map(|(a, b)| difference_norm(a, b, alpha, theta)).sum();
    let dist = difference_norm(p, u, alpha, p.theta) + difference_norm(q, v, alpha, q.theta);
    let norms: f64 = [p, q, u, v].iter().map(|x| controlled_norm(x, alpha, x.theta).total).sum();
    let rhs = rough_bracket(p, q, alpha).powi(2) * dist * (1.0 + norms).powi(2);
    Ok(CompositionBound { lhs, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 } })
}

/// `‖p - q‖_{𝐗̄,2α,θ}`: the norm of the componentwise difference, which is
/// again controlled by the same driver.
pub fn difference_norm(p: &DelayedControlledPath, q: &DelayedControlledPath, alpha: f64, theta: f64) -> f64 {
    seven_terms(p, Some(q), alpha, alpha, theta).total
}
