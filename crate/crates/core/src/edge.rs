//! Per-Fourier-mode radial solver for the S¹×C edge operator
//! L = (r d/dr)² − (n²r² + μ²), the I/K rate split with its coefficient
//! bound, and the K₀/K₁ obstruction modes.
//!
//! All radial work happens in t = log r on a uniform grid, so r d/dr is a
//! plain finite-difference stencil and ds/s integrals are dt integrals.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{gk15, integrate, QuadError};
use crate::special::{bessel_i, bessel_k, gamma_fn};

pub const DEFAULT_POINTS: usize = 2048;
pub const DEFAULT_R_MIN: f64 = 1e-8;
/// absolute tolerance on Bessel-weighted integrals
pub const QUAD_TOL: f64 = 1e-10;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;
pub const KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("mode n = 0, μ = 0 has no particular solution of this form")]
    UnsupportedMode,
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("weights must satisfy −μ < δ′ < μ < δ″ (got δ′ = {delta_p}, μ = {mu}, δ″ = {delta_pp})")]
    WeightOrderViolation { delta_p: f64, mu: f64, delta_pp: f64 },
    #[error("∫K_μ²(s)s^(2δ″+4)ds/s diverges at 0 for μ = {mu}, δ″ = {delta_pp}")]
    DivergentConstant { mu: f64, delta_pp: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<QuadError> for EdgeError {
    fn from(e: QuadError) -> Self {
        EdgeError::QuadratureFailure(e.to_string())
    }
}

/// Radii uniform in log r.
#[derive(Debug, Clone, Serialize)]
pub struct LogGrid {
    pub r: Vec<f64>,
    /// spacing in t = log r
    pub h: f64,
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, points: usize) -> Result<Self, EdgeError> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(EdgeError::InvalidArgument(format!("grid range [{r_min}, {r_max}]")));
        }
        if points < 16 {
            return Err(EdgeError::InvalidArgument(format!("{points} grid points, need at least 16")));
        }
        let (t0, t1) = (r_min.ln(), r_max.ln());
        let h = (t1 - t0) / (points - 1) as f64;
        let mut r: Vec<f64> = (0..points).map(|i| (t0 + h * i as f64).exp()).collect();
        r[0] = r_min;
        r[points - 1] = r_max;
        Ok(LogGrid { r, h })
    }

    /// 2048 points on [1e−8, 1].
    pub fn unit() -> Self {
        LogGrid::new(DEFAULT_R_MIN, 1.0, DEFAULT_POINTS).expect("default grid")
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.r[i].ln()
    }
}

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Right-hand side z(r), zero outside an explicit support [lo, hi] with hi < 1.
#[derive(Clone)]
pub struct Rhs {
    pub support: (f64, f64),
    f: Profile,
}

impl std::fmt::Debug for Rhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rhs").field("support", &self.support).finish_non_exhaustive()
    }
}

impl Rhs {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(support: (f64, f64), f: F) -> Result<Self, EdgeError> {
        let (lo, hi) = support;
        if !(lo >= 0.0 && hi > lo && hi < 1.0) {
            return Err(EdgeError::InvalidArgument(format!("support [{lo}, {hi}] must lie in [0, 1)")));
        }
        Ok(Rhs { support, f: Arc::new(f) })
    }

    pub fn zero() -> Self {
        Rhs { support: (0.5, 0.5), f: Arc::new(|_| 0.0) }
    }

    /// Smooth bump amp·exp(−1/((r−a)(b−r))·(b−a)²/4) on (a, b).
    pub fn bump(a: f64, b: f64, amp: f64) -> Result<Self, EdgeError> {
        Rhs::new((a, b), move |r| {
            if r <= a || r >= b {
                0.0
            } else {
                amp * (1.0 - 0.25 * (b - a).powi(2) / ((r - a) * (b - r))).exp()
            }
        })
    }

    /// Cubic interpolation in log r through samples (r_i, z_i); the last
    /// sample must be zero and below 1.
    pub fn from_samples(r: Vec<f64>, z: Vec<f64>) -> Result<Self, EdgeError> {
        if r.len() != z.len() || r.len() < 4 {
            return Err(EdgeError::InvalidArgument("rhs needs at least 4 (r, z) samples".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) || r[0] <= 0.0 || *r.last().expect("nonempty") > 1.0 {
            return Err(EdgeError::InvalidArgument("rhs radii must increase within (0, 1]".into()));
        }
        let last_nz = z.iter().rposition(|v| *v != 0.0);
        let Some(last_nz) = last_nz else { return Ok(Rhs::zero()) };
        if last_nz + 1 >= r.len() || r[last_nz + 1] >= 1.0 {
            return Err(EdgeError::InvalidArgument("rhs must vanish near r = 1".into()));
        }
        let first_nz = z.iter().position(|v| *v != 0.0).expect("some nonzero");
        let lo = if first_nz == 0 { 0.0 } else { r[first_nz - 1] };
        let hi = r[last_nz + 1];
        let t: Vec<f64> = r.iter().map(|x| x.ln()).collect();
        let (t_first, z_first, p) = (t[0], z[0], if z[0] != 0.0 && z[1] != 0.0 { (z[1] / z[0]).ln() / (t[1] - t[0]) } else { 0.0 });
        Rhs::new((lo, hi), move |x| {
            let s = x.ln();
            if s < t_first {
                // power-law continuation below the first sample
                return z_first * (p * (s - t_first)).exp();
            }
            let i = match t.binary_search_by(|v| v.total_cmp(&s)) {
                Ok(i) => return z[i],
                Err(i) => i - 1,
            };
            if i + 1 >= t.len() {
                return 0.0;
            }
            let h = t[i + 1] - t[i];
            let u = (s - t[i]) / h;
            let slope = |j: usize| {
                let a = j.saturating_sub(1);
                let b = (j + 1).min(t.len() - 1);
                (z[b] - z[a]) / (t[b] - t[a]) * h
            };
            let (m0, m1) = (slope(i), slope(i + 1));
            let (u2, u3) = (u * u, u * u * u);
            (2.0 * u3 - 3.0 * u2 + 1.0) * z[i] + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * z[i + 1] + (u3 - u2) * m1
        })
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r < self.support.0 || r > self.support.1 {
            0.0
        } else {
            (self.f)(r)
        }
    }

    /// self + c·other
    pub fn combine(&self, c: f64, other: &Rhs) -> Rhs {
        let (a, b) = (self.clone(), other.clone());
        let support = (self.support.0.min(other.support.0), self.support.1.max(other.support.1));
        Rhs { support, f: Arc::new(move |r| a.eval(r) + c * b.eval(r)) }
    }

    fn t_support(&self, t_lo: f64) -> (f64, f64) {
        let lo = if self.support.0 > 0.0 { self.support.0.ln().max(t_lo) } else { t_lo };
        (lo, self.support.1.ln())
    }
}

#[derive(Debug, Clone)]
pub struct ModeProblem {
    pub n: i64,
    pub mu: f64,
    pub rhs: Rhs,
    pub grid: LogGrid,
    /// (C₁, C₂) added as C₁I_μ(|n|r) + C₂K_μ(|n|r), or C₁r^μ + C₂r^{−μ} for n = 0
    pub homogeneous: (f64, f64),
}

impl ModeProblem {
    pub fn new(n: i64, mu: f64, rhs: Rhs, grid: LogGrid) -> Result<Self, EdgeError> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(EdgeError::InvalidArgument(format!("μ = {mu} must be finite and ≥ 0")));
        }
        if n == 0 && mu == 0.0 {
            return Err(EdgeError::UnsupportedMode);
        }
        if *grid.r.last().expect("grid") > 1.0 {
            return Err(EdgeError::InvalidArgument("mode grids must lie in (0, 1]".into()));
        }
        Ok(ModeProblem { n, mu, rhs, grid, homogeneous: (0.0, 0.0) })
    }

    pub fn with_homogeneous(mut self, c1: f64, c2: f64) -> Self {
        self.homogeneous = (c1, c2);
        self
    }

    fn nabs(&self) -> f64 {
        self.n.unsigned_abs() as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sampled {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

impl Sampled {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,value\n");
        for (r, v) in self.r.iter().zip(&self.values) {
            s.push_str(&format!("{r:.17e},{v:.17e}\n"));
        }
        s
    }
}

/// A solved mode with the cumulative integrals it was built from, so it can
/// be evaluated between grid points.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub y: Sampled,
    /// n ≠ 0: ∫_0¹ K_μ(|n|s)z ds/s; n = 0: ∫_0¹ u(s)s^{−2μ} ds/s
    pub full_moment: f64,
    n: i64,
    mu: f64,
    rhs: Rhs,
    homogeneous: (f64, f64),
    t: Vec<f64>,
    /// n ≠ 0: ∫_r¹K z ds/s and ∫_0^r I z ds/s; n = 0: C(r) and u(r)
    cum: [Vec<f64>; 2],
}

impl ModeSolution {
    fn integrands(&self, s: f64) -> (f64, f64) {
        let r = s.exp();
        let zr = self.rhs.eval(r);
        if zr == 0.0 {
            return (0.0, 0.0);
        }
        if self.n == 0 {
            ((-self.mu * s).exp() * zr, (self.mu * s).exp() * zr)
        } else {
            let x = self.n.unsigned_abs() as f64 * r;
            (bessel_k(self.mu, x) * zr, bessel_i(self.mu, x) * zr)
        }
    }

    fn piece(&self, which: usize, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        gk15(&|s| if which == 0 { self.integrands(s).0 } else { self.integrands(s).1 }, a, b).0
    }

    /// y(r) for r inside the grid range; NaN outside.
    pub fn eval(&self, r: f64) -> f64 {
        let s = r.ln();
        let m = self.t.len();
        if !(s >= self.t[0] - 1e-12 && s <= self.t[m - 1] + 1e-12) {
            return f64::NAN;
        }
        let i = match self.t.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => return self.y.values[i],
            Err(i) => (i.max(1) - 1).min(m - 2),
        };
        let mu = self.mu;
        let (c1, c2) = self.homogeneous;
        if self.n == 0 {
            let c = self.cum[0][i] + self.piece(0, self.t[i], s);
            let u = self.cum[1][i] + self.piece(1, self.t[i], s);
            (r.powf(mu) * c - r.powf(-mu) * u) / (2.0 * mu) + c1 * r.powf(mu) + c2 * r.powf(-mu)
        } else {
            let a = self.cum[0][i + 1] + self.piece(0, s, self.t[i + 1]);
            let b = self.cum[1][i] + self.piece(1, self.t[i], s);
            let x = self.n.unsigned_abs() as f64 * r;
            let (iv, kv) = (bessel_i(mu, x), bessel_k(mu, x));
            -iv * a - kv * b + c1 * iv + c2 * kv
        }
    }

    /// Operator residual of this solution, see [`operator_residual_with`].
    pub fn residual(&self, grid: &LogGrid) -> f64 {
        let rhs = self.rhs.clone();
        operator_residual_with(self.n, self.mu, grid, |r| self.eval(r), move |r| rhs.eval(r))
    }
}

fn interval_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64, EdgeError> {
    Ok(integrate(f, a, b, 1e-15, 1e-13)?.value)
}

/// ∫_0^{t_0} of an integrand that behaves like g₀·e^{p(t−t₀)} as t → −∞.
fn power_tail<F: Fn(f64) -> f64>(g: F, t0: f64, h: f64) -> Result<f64, EdgeError> {
    let (g0, g1) = (g(t0), g(t0 + h));
    if g0 == 0.0 {
        return Ok(0.0);
    }
    let p = (g1 / g0).ln() / h;
    if !(p > 0.0 && p.is_finite()) {
        return Err(EdgeError::QuadratureFailure("integrand does not decay toward r = 0".into()));
    }
    Ok(g0 / p)
}

/// Green-kernel particular solution of L y = z plus the problem's
/// homogeneous constants (zero by default).
pub fn solve_mode(problem: &ModeProblem) -> Result<ModeSolution, EdgeError> {
    let grid = &problem.grid;
    let m = grid.len();
    let t: Vec<f64> = (0..m).map(|i| grid.t(i)).collect();
    let mut sol = ModeSolution {
        y: Sampled { r: grid.r.clone(), values: vec![0.0; m] },
        full_moment: 0.0,
        n: problem.n,
        mu: problem.mu,
        rhs: problem.rhs.clone(),
        homogeneous: problem.homogeneous,
        t,
        cum: [vec![0.0; m], vec![0.0; m]],
    };
    if problem.n == 0 {
        solve_mode_zero(problem, &mut sol)?;
    } else {
        solve_mode_bessel(problem, &mut sol)?;
    }
    Ok(sol)
}

fn solve_mode_bessel(p: &ModeProblem, sol: &mut ModeSolution) -> Result<(), EdgeError> {
    let (n, mu) = (p.nabs(), p.mu);
    let grid = &p.grid;
    let m = grid.len();
    let t = sol.t.clone();
    let (s_lo, s_hi) = p.rhs.t_support(t[0]);
    let f = |s: f64| sol.integrands(s);
    // per-interval moments, skipping intervals outside the support
    let mut ja = vec![0.0; m];
    let mut jb = vec![0.0; m];
    for i in 0..m - 1 {
        let (a, b) = (t[i].max(s_lo), t[i + 1].min(s_hi));
        if a >= b {
            continue;
        }
        ja[i] = interval_integral(|s| f(s).0, a, b)?;
        jb[i] = interval_integral(|s| f(s).1, a, b)?;
    }
    // support above the last grid point
    let top = if s_hi > t[m - 1] { interval_integral(|s| f(s).0, t[m - 1].max(s_lo), s_hi)? } else { 0.0 };
    let b_tail = if s_lo <= t[0] { power_tail(|s| f(s).1, t[0], grid.h)? } else { 0.0 };
    let a_tail = if s_lo <= t[0] { power_tail(|s| f(s).0, t[0], grid.h).ok() } else { Some(0.0) };
    let mut a_cum = vec![0.0; m];
    let mut acc = top;
    for i in (0..m).rev() {
        a_cum[i] = acc;
        if i > 0 {
            acc += ja[i - 1];
        }
    }
    let mut b_cum = vec![0.0; m];
    let mut acc = b_tail;
    for i in 0..m {
        b_cum[i] = acc;
        acc += jb[i];
    }
    let (c1, c2) = p.homogeneous;
    let values = (0..m)
        .map(|i| {
            let x = n * grid.r[i];
            let (iv, kv) = (bessel_i(mu, x), bessel_k(mu, x));
            -iv * a_cum[i] - kv * b_cum[i] + c1 * iv + c2 * kv
        })
        .collect();
    sol.full_moment = a_tail.map_or(f64::NAN, |tail| a_cum[0] + tail);
    sol.y.values = values;
    sol.cum = [a_cum, b_cum];
    Ok(())
}

/// n = 0: y = r^μ∫_0^r(∫_0^s t^μ z dt/t)s^{−2μ}ds/s, evaluated through
/// y = (r^μ C(r) − r^{−μ} u(r))/(2μ), C = ∫_0^r s^{−μ}z ds/s, u = ∫_0^r s^μ z ds/s.
fn solve_mode_zero(p: &ModeProblem, sol: &mut ModeSolution) -> Result<(), EdgeError> {
    let mu = p.mu;
    let grid = &p.grid;
    let m = grid.len();
    let t = sol.t.clone();
    let (s_lo, s_hi) = p.rhs.t_support(t[0]);
    let f = |s: f64| sol.integrands(s);
    let (mut c, mut u) = if s_lo <= t[0] {
        (power_tail(|s| f(s).0, t[0], grid.h)?, power_tail(|s| f(s).1, t[0], grid.h)?)
    } else {
        (0.0, 0.0)
    };
    let (c1, c2) = p.homogeneous;
    let mut values = Vec::with_capacity(m);
    let mut cum = [Vec::with_capacity(m), Vec::with_capacity(m)];
    for i in 0..m {
        if i > 0 {
            let (a, b) = (t[i - 1].max(s_lo), t[i].min(s_hi));
            if a < b {
                c += interval_integral(|s| f(s).0, a, b)?;
                u += interval_integral(|s| f(s).1, a, b)?;
            }
        }
        cum[0].push(c);
        cum[1].push(u);
        let r = grid.r[i];
        values.push((r.powf(mu) * c - r.powf(-mu) * u) / (2.0 * mu) + c1 * r.powf(mu) + c2 * r.powf(-mu));
    }
    // remaining support above the grid
    let (a, b) = (t[m - 1].max(s_lo), s_hi);
    if a < b {
        c += interval_integral(|s| f(s).0, a, b)?;
        u += interval_integral(|s| f(s).1, a, b)?;
    }
    sol.full_moment = (c - u) / (2.0 * mu);
    sol.y.values = values;
    sol.cum = cum;
    Ok(())
}

/// Log-step of the residual stencils.
const FD_STEP: f64 = 1e-3;

/// Residual checks use at most this many grid points, evenly strided.
const RESIDUAL_POINTS: usize = 512;

/// (d/dt)²g at t: 5-point central differences at h and 2h, Richardson-combined.
fn log_second_derivative<F: Fn(f64) -> f64>(f: &F, t: f64, h: f64) -> f64 {
    let g: Vec<f64> = [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0].iter().map(|k| f((t + k * h).exp())).collect();
    let d2h = (-g[5] + 16.0 * g[4] - 30.0 * g[3] + 16.0 * g[2] - g[1]) / (12.0 * h * h);
    let d22h = (-g[6] + 16.0 * g[5] - 30.0 * g[3] + 16.0 * g[1] - g[0]) / (48.0 * h * h);
    (16.0 * d2h - d22h) / 15.0
}

/// max over grid points of |L y − z| / (1 + ‖z‖_sup), with (r d/dr)² from
/// central differences in log r.
pub fn operator_residual_with<Y: Fn(f64) -> f64, Z: Fn(f64) -> f64>(n: i64, mu: f64, grid: &LogGrid, y: Y, z: Z) -> f64 {
    let n2 = (n as f64).powi(2);
    let (t_lo, t_hi) = (grid.t(0) + 4.0 * FD_STEP, grid.t(grid.len() - 1) - 4.0 * FD_STEP);
    let zsup = grid.r.iter().fold(0.0f64, |a, &r| a.max(z(r).abs()));
    let stride = grid.len().div_ceil(RESIDUAL_POINTS);
    let mut worst: f64 = 0.0;
    for &r in grid.r.iter().step_by(stride) {
        let t = r.ln();
        if t < t_lo || t > t_hi {
            continue;
        }
        let d2 = log_second_derivative(&y, t, FD_STEP);
        worst = worst.max((d2 - (n2 * r * r + mu * mu) * y(r) - z(r)).abs());
    }
    worst / (1.0 + zsup)
}

pub fn operator_residual(problem: &ModeProblem, sol: &ModeSolution) -> f64 {
    sol.residual(&problem.grid)
}

/// χ(s) = 1 for s ≤ 1, 0 for s ≥ 2, smooth in between.
pub fn cutoff(s: f64) -> f64 {
    if s <= 1.0 {
        return 1.0;
    }
    if s >= 2.0 {
        return 0.0;
    }
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let a = psi(2.0 - s);
    a / (a + psi(s - 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitSolution {
    pub y: Sampled,
    /// (1/|n|)∫_0¹K_μ(|n|s)z ds/s for n ≠ 0; ∫_0¹u(s)s^{−2μ}ds/s for n = 0
    pub c_low: f64,
    /// c_low·(|n+½|/|n|)^μ for n ≠ 0; c_low·(½)^μ for n = 0
    pub c_reg: f64,
    pub y_low: Sampled,
    pub y_high: Sampled,
    pub delta_pp: f64,
    /// δ″-weighted squared norms of y_high on dyadic shells, outermost first
    pub shell_norms: Vec<f64>,
    pub high_norm_finite: bool,
}

/// y = y_≤ + y_>, y_≤ = −I_μ(|n|r)χ(2|n|r)·c_low·|n|. For n = 0 the split
/// applies to the representative −r^μ∫_r¹u(s)s^{−2μ}ds/s − r^{−μ}u(r)/(2μ)
/// (the one vanishing near 1 when ∫s^μz ds/s = 0), with y_≤ = −χ(2r)r^μ·c_low.
pub fn split_solution(problem: &ModeProblem, delta_p: f64, delta_pp: f64) -> Result<SplitSolution, EdgeError> {
    let mu = problem.mu;
    if !(-mu < delta_p && delta_p < mu && mu < delta_pp) {
        return Err(EdgeError::WeightOrderViolation { delta_p, mu, delta_pp });
    }
    let mut sol = solve_mode(problem)?;
    if !sol.full_moment.is_finite() {
        return Err(EdgeError::QuadratureFailure("∫K_μ z ds/s diverges at r = 0".into()));
    }
    let r = &problem.grid.r;
    let (c_low, c_reg, low): (f64, f64, Vec<f64>) = if problem.n == 0 {
        let c = sol.full_moment;
        for (v, &x) in sol.y.values.iter_mut().zip(r) {
            *v -= c * x.powf(mu);
        }
        (c, c * 0.5f64.powf(mu), r.iter().map(|&x| -cutoff(2.0 * x) * x.powf(mu) * c).collect())
    } else {
        let n = problem.nabs();
        let c = sol.full_moment / n;
        let reg = c * ((problem.n as f64 + 0.5).abs() / n).powf(mu);
        (c, reg, r.iter().map(|&x| -bessel_i(mu, n * x) * cutoff(2.0 * n * x) * c * n).collect())
    };
    let high: Vec<f64> = sol.y.values.iter().zip(&low).map(|(a, b)| a - b).collect();
    let shell_norms = dyadic_shell_norms(&problem.grid, &high, delta_pp);
    let noise: Vec<f64> = sol.y.values.iter().map(|v| 1e-12 * v.abs()).collect();
    let floor = dyadic_shell_norms(&problem.grid, &noise, delta_pp);
    let high_norm_finite = shells_summable(&shell_norms, &floor);
    Ok(SplitSolution {
        y: sol.y,
        c_low,
        c_reg,
        y_low: Sampled { r: r.clone(), values: low },
        y_high: Sampled { r: r.clone(), values: high },
        delta_pp,
        shell_norms,
        high_norm_finite,
    })
}

/// ∫(r^{−δ}v)² dr/r over the full dyadic shells [2^{−k−1}R, 2^{−k}R] of the
/// grid, R = r_max, outermost first; trapezoid rule in t.
pub fn dyadic_shell_norms(grid: &LogGrid, v: &[f64], delta: f64) -> Vec<f64> {
    let g: Vec<f64> = grid.r.iter().zip(v).map(|(r, x)| (r.powf(-delta) * x).powi(2)).collect();
    let mut edge = grid.r.last().copied().unwrap_or(1.0) / 2.0;
    let mut shells = Vec::new();
    let mut cur = 0.0;
    for i in (1..grid.len()).rev() {
        cur += 0.5 * grid.h * (g[i] + g[i - 1]);
        if grid.r[i - 1] <= edge * (1.0 + 1e-12) {
            shells.push(cur);
            cur = 0.0;
            edge /= 2.0;
        }
    }
    shells
}

/// Shell sequences toward r = 0 that end in geometric decay, or vanish.
/// Shells at or below `floor` (the cancellation noise of y_≤ + y_>) count as zero.
fn shells_summable(s: &[f64], floor: &[f64]) -> bool {
    let s: Vec<f64> = s.iter().zip(floor).map(|(&x, &f)| if x <= f { 0.0 } else { x }).collect();
    let tail = &s[s.len().saturating_sub(6)..];
    tail.windows(2).all(|w| w[1] <= 0.9 * w[0] || w[1] == 0.0)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoefficientBound {
    /// |∫_0¹K_μ(|n|s)z ds/s|
    pub lhs: f64,
    /// C·|n|^{−δ″−2}·‖z‖
    pub rhs: f64,
    pub constant: f64,
    /// (∫_0¹(s^{−δ″−2}z)² ds/s)^{1/2}
    pub weighted_norm: f64,
    pub holds: bool,
}

/// C = (∫_0^∞K_μ²(s)s^{2δ″+4}ds/s)^{1/2}.
pub fn bound_constant(mu: f64, delta_pp: f64) -> Result<f64, EdgeError> {
    let a = 2.0 * delta_pp + 4.0 - 2.0 * mu;
    if a <= 0.0 {
        return Err(EdgeError::DivergentConstant { mu, delta_pp });
    }
    let e = 2.0 * delta_pp + 4.0;
    let s0: f64 = 1e-6;
    let g = |t: f64| {
        let s = t.exp();
        bessel_k(mu, s).powi(2) * (e * t).exp()
    };
    let far = |s: f64| bessel_k(mu, s).powi(2) * s.powf(e - 1.0);
    let body = integrate(g, s0.ln(), 20f64.ln(), 1e-14, 1e-12)?.value + integrate(far, 20.0, 80.0, 1e-16, 1e-12)?.value;
    // leading small-argument form of K_μ below s0
    let tail = if mu == 0.0 {
        let l = s0.ln();
        s0.powf(a) * (l * l / a - 2.0 * l / (a * a) + 2.0 / (a * a * a))
    } else {
        let g = gamma_fn(mu).map_err(|e| EdgeError::InvalidArgument(e.to_string()))?;
        (0.5 * g * 2f64.powf(mu)).powi(2) * s0.powf(a) / a
    };
    Ok((body + tail).sqrt())
}

/// Raw moment ∫_0¹K_μ(|n|s)z(s)ds/s by adaptive quadrature over the support.
pub fn k_moment(n: i64, mu: f64, rhs: &Rhs) -> Result<f64, EdgeError> {
    let nn = n.unsigned_abs() as f64;
    let t_lo = DEFAULT_R_MIN.ln();
    let (a, b) = rhs.t_support(t_lo);
    let g = |t: f64| {
        let r = t.exp();
        bessel_k(mu, nn * r) * rhs.eval(r)
    };
    let body = integrate(g, a, b, QUAD_TOL * 1e-2, 1e-12)?.value;
    let tail = if a <= t_lo { power_tail(g, t_lo, 1e-2)? } else { 0.0 };
    Ok(body + tail)
}

pub fn weighted_rhs_norm(rhs: &Rhs, delta_pp: f64) -> Result<f64, EdgeError> {
    let t_lo = DEFAULT_R_MIN.ln();
    let (a, b) = rhs.t_support(t_lo);
    let w = delta_pp + 2.0;
    let g = |t: f64| ((-w * t).exp() * rhs.eval(t.exp())).powi(2);
    let body = integrate(g, a, b, 1e-14, 1e-12)?.value;
    let tail = if a <= t_lo { power_tail(g, t_lo, 1e-2)? } else { 0.0 };
    Ok((body + tail).sqrt())
}

/// Cauchy–Schwarz bound |∫K_μ(|n|s)z ds/s| ≤ C|n|^{−δ″−2}‖z‖_{L²_{δ″+2}}.
pub fn coefficient_bound_check(problem: &ModeProblem, delta_pp: f64) -> Result<CoefficientBound, EdgeError> {
    if problem.n == 0 {
        return Err(EdgeError::InvalidArgument("the coefficient bound needs n ≠ 0".into()));
    }
    let constant = bound_constant(problem.mu, delta_pp)?;
    let weighted_norm = weighted_rhs_norm(&problem.rhs, delta_pp)?;
    let lhs = k_moment(problem.n, problem.mu, &problem.rhs)?.abs();
    let rhs = constant * problem.nabs().powf(-delta_pp - 2.0) * weighted_norm;
    Ok(CoefficientBound { lhs, rhs, constant, weighted_norm, holds: lhs <= rhs * (1.0 + 1e-12) })
}

/// Log-log slope of |c_low(n)| against n for a fixed right-hand side.
pub fn coefficient_decay_slope(mu: f64, rhs: &Rhs, ns: &[i64]) -> Result<f64, EdgeError> {
    let mut pts = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 {
            return Err(EdgeError::InvalidArgument("n = 0 in a decay regression".into()));
        }
        let c = k_moment(n, mu, rhs)?.abs() / n.unsigned_abs() as f64;
        pts.push(((n.unsigned_abs() as f64).ln(), c.ln()));
    }
    Ok(crate::g2::log_log_slope(&pts))
}

/// (d/dt)² and d/dt of f(e^t) by 5-point stencils with Richardson.
fn log_derivatives<F: Fn(f64) -> f64>(f: &F, t: f64) -> (f64, f64) {
    let h = 1e-3;
    let g = |s: f64| f(s.exp());
    let d1 = |h: f64| (g(t - 2.0 * h) - 8.0 * g(t - h) + 8.0 * g(t + h) - g(t + 2.0 * h)) / (12.0 * h);
    let d2 = |h: f64| {
        (-g(t + 2.0 * h) + 16.0 * g(t + h) - 30.0 * g(t) + 16.0 * g(t - h) - g(t - 2.0 * h)) / (12.0 * h * h)
    };
    ((16.0 * d1(h) - d1(2.0 * h)) / 15.0, (16.0 * d2(h) - d2(2.0 * h)) / 15.0)
}

/// One obstruction mode e^{inθ}(dθ∧K₀(|n|r)φ + (i|n|/n)K₁(|n|r)dr∧φ).
#[derive(Debug, Clone, Serialize)]
pub struct KernelMode {
    pub n: i64,
    pub k0: Vec<f64>,
    /// sign(n)·K₁(|n|r)
    pub k1_signed: Vec<f64>,
    /// max |K₀′(x) + K₁(x)|·x / max(1, xK₁(x))
    pub derivative_residual: f64,
    pub ode_residual_order0: f64,
    pub ode_residual_order1: f64,
    /// K₀(x)/(−log x) at x = 1e−6
    pub log_ratio: f64,
    /// x·K₁(x) at x = 1e−6
    pub inverse_ratio: f64,
}

impl KernelMode {
    pub fn max_residual(&self) -> f64 {
        self.derivative_residual.max(self.ode_residual_order0).max(self.ode_residual_order1)
    }
}

/// Real form of −½(mode₊₁ + mode₋₁): coefficients of cos θ·K₀ dθ∧φ and
/// sin θ·K₁ dr∧φ, and the leading r → 0 term.
#[derive(Debug, Clone, Serialize)]
pub struct NormalForm {
    pub cos_dtheta_k0: f64,
    pub sin_dr_k1: f64,
    /// leading term sin θ·c·r^{−1}dr∧φ_{2,1}
    pub leading_sin_coefficient: f64,
    pub leading_power: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub r: Vec<f64>,
    pub modes: Vec<KernelMode>,
    pub normal_form: NormalForm,
    pub tolerance: f64,
}

impl KernelReport {
    pub fn max_residual(&self) -> f64 {
        self.modes.iter().map(KernelMode::max_residual).fold(0.0, f64::max)
    }

    pub fn verified(&self) -> bool {
        self.max_residual() <= self.tolerance
    }
}

fn ode_residual<F: Fn(f64) -> f64>(f: &F, nu: f64, x: f64) -> f64 {
    let (_, d2) = log_derivatives(f, x.ln());
    let v = f(x);
    let pot = (x * x + nu * nu) * v;
    (d2 - pot).abs() / (v.abs() + d2.abs() + pot.abs())
}

pub fn kernel_modes(n_max: u32, grid: &LogGrid) -> Result<KernelReport, EdgeError> {
    if n_max < 1 {
        return Err(EdgeError::InvalidArgument("n_max must be at least 1".into()));
    }
    let mut modes = Vec::with_capacity(2 * n_max as usize);
    for n in (-(n_max as i64)..=n_max as i64).filter(|&n| n != 0) {
        let a = n.unsigned_abs() as f64;
        let sign = n.signum() as f64;
        let k0 = |x: f64| bessel_k(0.0, x);
        let k1 = |x: f64| bessel_k(1.0, x);
        let mut dres: f64 = 0.0;
        let mut o0: f64 = 0.0;
        let mut o1: f64 = 0.0;
        for &r in &grid.r {
            let x = a * r;
            let (d1, _) = log_derivatives(&k0, x.ln());
            let xk1 = x * k1(x);
            dres = dres.max((d1 + xk1).abs() / xk1.max(1.0));
            o0 = o0.max(ode_residual(&k0, 0.0, x));
            o1 = o1.max(ode_residual(&k1, 1.0, x));
        }
        let x0 = 1e-6;
        modes.push(KernelMode {
            n,
            k0: grid.r.iter().map(|&r| k0(a * r)).collect(),
            k1_signed: grid.r.iter().map(|&r| sign * k1(a * r)).collect(),
            derivative_residual: dres,
            ode_residual_order0: o0,
            ode_residual_order1: o1,
            log_ratio: k0(x0) / -x0.ln(),
            inverse_ratio: x0 * k1(x0),
        });
    }
    Ok(KernelReport { r: grid.r.clone(), modes, normal_form: leading_normal_form(), tolerance: KERNEL_TOL })
}

/// −½(mode₊₁ + mode₋₁) in real form.
pub fn leading_normal_form() -> NormalForm {
    use num_complex::Complex64;
    // Fourier coefficients c_{±1} of the dθ (K₀) and dr (K₁) parts
    let w = -0.5;
    let dtheta = [Complex64::new(w, 0.0), Complex64::new(w, 0.0)];
    let dr = [Complex64::new(0.0, w), Complex64::new(0.0, -w)];
    // c₊e^{iθ} + c₋e^{−iθ} = (c₊ + c₋)cos θ + i(c₊ − c₋)sin θ
    let cos = |c: [Complex64; 2]| (c[0] + c[1]).re;
    let sin = |c: [Complex64; 2]| (Complex64::i() * (c[0] - c[1])).re;
    let sin_dr = sin(dr);
    NormalForm {
        cos_dtheta_k0: cos(dtheta),
        sin_dr_k1: sin_dr,
        // K₁(r) ~ 1/r dominates K₀(r) ~ −log r
        leading_sin_coefficient: sin_dr,
        leading_power: -1,
    }
}

/// Which basis functions of ((r d/dr)² − (r² + μ̂))γ = 0 have divergent
/// (δ+2)-weighted shell norms at each end.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub order: f64,
    pub weight: f64,
    pub i_divergent_at_infinity: bool,
    pub k_divergent_at_zero: bool,
    pub i_shells_outward: Vec<f64>,
    pub k_shells_inward: Vec<f64>,
    pub no_kernel: bool,
}

fn shell_integral<F: Fn(f64) -> f64>(f: &F, w: f64, r0: f64, r1: f64) -> Result<f64, EdgeError> {
    let g = |t: f64| ((-w * t).exp() * f(t.exp())).powi(2);
    Ok(integrate(g, r0.ln(), r1.ln(), 0.0, 1e-10)?.value)
}

fn nondecreasing_tail(s: &[f64]) -> bool {
    let tail: Vec<f64> = s.iter().rev().take(4).rev().copied().collect();
    tail.len() >= 2 && tail.windows(2).all(|w| w[1] >= 0.999 * w[0])
}

pub fn no_decaying_kernel_report(mu_hat: f64, delta: f64, grid: &LogGrid) -> Result<DecayReport, EdgeError> {
    if mu_hat < 0.0 {
        return Err(EdgeError::InvalidArgument(format!("μ̂ = {mu_hat} must be ≥ 0")));
    }
    let (r_min, r_max) = (grid.r[0], *grid.r.last().expect("grid"));
    if !(r_min < 0.25 && r_max > 8.0) {
        return Err(EdgeError::InvalidArgument("grid must reach below 1/4 and above 8".into()));
    }
    let nu = mu_hat.sqrt();
    let w = delta + 2.0;
    let fi = |r: f64| bessel_i(nu, r);
    let fk = |r: f64| bessel_k(nu, r);
    let mut i_out = Vec::new();
    let mut r = 1.0;
    while 2.0 * r <= r_max {
        i_out.push(shell_integral(&fi, w, r, 2.0 * r)?);
        r *= 2.0;
    }
    let mut k_in = Vec::new();
    let mut r = 1.0;
    while 0.5 * r >= r_min {
        k_in.push(shell_integral(&fk, w, 0.5 * r, r)?);
        r *= 0.5;
    }
    let i_div = nondecreasing_tail(&i_out);
    let k_div = nondecreasing_tail(&k_in);
    Ok(DecayReport {
        order: nu,
        weight: w,
        i_divergent_at_infinity: i_div,
        k_divergent_at_zero: k_div,
        i_shells_outward: i_out,
        k_shells_inward: k_in,
        // a·I + b·K: growth at ∞ forces a = 0, then K's norm at 0 forces b = 0
        no_kernel: i_div && k_div,
    })
}

pub fn no_decaying_kernel_check(mu_hat: f64, delta: f64, grid: &LogGrid) -> Result<bool, EdgeError> {
    Ok(no_decaying_kernel_report(mu_hat, delta, grid)?.no_kernel)
}

/// [1e−8, 64] with 2048 points, for the two-sided decay check.
pub fn two_sided_grid() -> LogGrid {
    LogGrid::new(DEFAULT_R_MIN, 64.0, DEFAULT_POINTS).expect("default grid")
}
