//! Stenzel radial profile, cone and smoothing Kähler potentials on the
//! quadric Σ z_j² = ε, and a finite-difference Monge–Ampère check.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{integrate, QuadError};

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-3;
pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_RICHARDSON_TOL: f64 = 1e-2;
/// Constraint tolerance for quadric points, relative to 1 + |z|².
pub const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StenzelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("profile ODE residual {residual:e} exceeds {tol:e}; refine the grid")]
    GridTooCoarse { residual: f64, tol: f64 },
    #[error("the cone potential is singular at the origin")]
    OriginPoint,
    #[error("w = {w} lies outside the profile grid [0, {w_max}]")]
    OutOfProfileRange { w: f64, w_max: f64 },
    #[error("|z|² = {norm_sq} is below the vertex value |ε| = {eps_abs}")]
    BelowVertex { norm_sq: f64, eps_abs: f64 },
    #[error("chart coordinate |z| = {modulus:e} too close to the branch locus for step {h:e}")]
    BranchCut { modulus: f64, h: f64 },
    #[error("Richardson levels disagree by {disagreement:e}; reduce the step")]
    StepTooLarge { disagreement: f64 },
    #[error("point is off the quadric (residual {residual:e})")]
    OffQuadric { residual: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Solution of (f′ⁿ)′ = n sinhⁿ⁻¹ w, f(0) = f′(0) = 0 on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub n: u32,
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    pub fprime: Vec<f64>,
}

pub fn solve_profile(n: u32, w_max: f64, steps: usize) -> Result<RadialProfile, StenzelError> {
    solve_profile_with_tol(n, w_max, steps, DEFAULT_RESIDUAL_TOL)
}

pub fn solve_profile_with_tol(
    n: u32,
    w_max: f64,
    steps: usize,
    residual_tol: f64,
) -> Result<RadialProfile, StenzelError> {
    if n < 2 {
        return Err(StenzelError::InvalidArgument(format!("n = {n} must be at least 2")));
    }
    if !(w_max > 0.0 && w_max.is_finite()) {
        return Err(StenzelError::InvalidArgument(format!("w_max = {w_max} must be positive")));
    }
    if steps < 100 {
        return Err(StenzelError::InvalidArgument(format!("steps = {steps} must be at least 100")));
    }
    let nf = n as f64;
    let dw = w_max / steps as f64;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * dw).collect();
    let weight = |s: f64| s.sinh().powi(n as i32 - 1);

    let mut big_f = vec![0.0; steps + 1];
    let mut f = vec![0.0; steps + 1];
    for i in 0..steps {
        let (a, b) = (grid[i], grid[i + 1]);
        let fa = big_f[i];
        let inner = |s: f64| -> f64 {
            let q = integrate(weight, a, s, 0.0, 1e-14).map(|q| q.value).unwrap_or(f64::NAN);
            (nf * (fa + q)).powf(1.0 / nf)
        };
        big_f[i + 1] = fa + integrate(weight, a, b, 0.0, 1e-14)?.value;
        f[i + 1] = f[i] + integrate(inner, a, b, 0.0, 1e-13)?.value;
    }
    let fprime: Vec<f64> = big_f.iter().map(|&v| (nf * v).powf(1.0 / nf)).collect();
    let profile = RadialProfile { n, grid, f, fprime };
    let worst = profile.max_residual();
    if !(worst <= residual_tol) {
        return Err(StenzelError::GridTooCoarse { residual: worst, tol: residual_tol });
    }
    if profile.fprime.windows(2).any(|p| p[1] <= p[0]) {
        return Err(StenzelError::GridTooCoarse { residual: worst, tol: residual_tol });
    }
    Ok(profile)
}

impl RadialProfile {
    pub fn w_max(&self) -> f64 {
        *self.grid.last().expect("grid is nonempty")
    }

    fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Central-difference residuals of (f′ⁿ)′ − n sinhⁿ⁻¹ at interior nodes,
    /// scaled by n coshⁿ⁻¹ w (relative at large w, absolute near the vertex).
    pub fn residuals(&self) -> Vec<f64> {
        let n = self.n as i32;
        let h = self.spacing();
        (1..self.grid.len() - 1)
            .map(|i| {
                let d = (self.fprime[i + 1].powi(n) - self.fprime[i - 1].powi(n)) / (2.0 * h);
                let w = self.grid[i];
                let rhs = self.n as f64 * w.sinh().powi(n - 1);
                (d - rhs).abs() / (self.n as f64 * w.cosh().powi(n - 1))
            })
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().into_iter().fold(0.0, f64::max)
    }

    /// f(w) by monotone cubic Hermite interpolation with the exact slopes f′.
    pub fn f_at(&self, w: f64) -> Result<f64, StenzelError> {
        let w_max = self.w_max();
        if !(0.0..=w_max).contains(&w) {
            return Err(StenzelError::OutOfProfileRange { w, w_max });
        }
        let h = self.spacing();
        let i = ((w / h).floor() as usize).min(self.grid.len() - 2);
        let t = (w - self.grid[i]) / h;
        let (y0, y1) = (self.f[i], self.f[i + 1]);
        let (mut m0, mut m1) = (self.fprime[i], self.fprime[i + 1]);
        let delta = (y1 - y0) / h;
        if delta > 0.0 {
            // Fritsch–Carlson limiter; inactive for the exact slopes of a convex f
            let (a, b) = (m0 / delta, m1 / delta);
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                m0 = tau * a * delta;
                m1 = tau * b * delta;
            }
        }
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1)
    }
}

/// A point on C_ε = {Σ z_j² = ε} ⊂ ℂⁿ⁺¹.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadricPoint {
    pub z: Vec<Complex64>,
    pub eps: Complex64,
}

impl QuadricPoint {
    pub fn new(z: Vec<Complex64>, eps: Complex64) -> Result<Self, StenzelError> {
        if z.len() < 3 {
            return Err(StenzelError::InvalidArgument("need at least three coordinates".into()));
        }
        let p = QuadricPoint { z, eps };
        let residual = p.constraint_residual();
        if residual > CONSTRAINT_TOL * (1.0 + p.norm_sq()) {
            return Err(StenzelError::OffQuadric { residual });
        }
        Ok(p)
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.z)
    }

    pub fn constraint_residual(&self) -> f64 {
        (self.z.iter().map(|w| w * w).sum::<Complex64>() - self.eps).norm()
    }

    /// Real orthogonal action z ↦ Az (A given row-major, (n+1)²).
    pub fn rotate(&self, a: &[f64]) -> QuadricPoint {
        let m = self.z.len();
        let z = (0..m).map(|r| (0..m).map(|c| self.z[c] * a[r * m + c]).sum()).collect();
        QuadricPoint { z, eps: self.eps }
    }
}

fn norm_sq(z: &[Complex64]) -> f64 {
    z.iter().map(|w| w.norm_sqr()).sum()
}

/// A Kähler potential on C_ε, evaluated from the ambient coordinates.
pub trait Potential {
    fn eps(&self) -> Complex64;
    fn value(&self, z: &[Complex64]) -> Result<f64, StenzelError>;
}

fn cone_value(n: u32, r2: f64) -> f64 {
    let nf = n as f64;
    (nf / (nf - 1.0)).powf((nf + 1.0) / nf) * r2.powf((nf - 1.0) / nf)
}

/// (n/(n−1))^{(n+1)/n} (|z|²)^{(n−1)/n}.
pub fn cone_potential(n: u32, p: &QuadricPoint) -> Result<f64, StenzelError> {
    if n < 2 || p.z.len() != n as usize + 1 {
        return Err(StenzelError::InvalidArgument(format!("{} coordinates for n = {n}", p.z.len())));
    }
    if p.eps != Complex64::new(0.0, 0.0) {
        return Err(StenzelError::InvalidArgument("the cone potential needs ε = 0".into()));
    }
    let r2 = p.norm_sq();
    if r2 == 0.0 {
        return Err(StenzelError::OriginPoint);
    }
    Ok(cone_value(n, r2))
}

/// |ε|^{(n−1)/n} f(cosh⁻¹(|z|²/|ε|)).
pub fn smoothing_potential(
    eps: Complex64,
    p: &QuadricPoint,
    profile: &RadialProfile,
) -> Result<f64, StenzelError> {
    let n = profile.n;
    if p.z.len() != n as usize + 1 {
        return Err(StenzelError::InvalidArgument(format!("{} coordinates for n = {n}", p.z.len())));
    }
    smoothing_value(eps, &p.z, profile)
}

fn smoothing_value(eps: Complex64, z: &[Complex64], profile: &RadialProfile) -> Result<f64, StenzelError> {
    let e = eps.norm();
    if e == 0.0 {
        return Err(StenzelError::InvalidArgument("the smoothing potential needs ε ≠ 0".into()));
    }
    let r2 = norm_sq(z);
    let ratio = r2 / e;
    if ratio < 1.0 {
        // rounding on the zero section
        if ratio > 1.0 - 1e-12 {
            return Ok(0.0);
        }
        return Err(StenzelError::BelowVertex { norm_sq: r2, eps_abs: e });
    }
    let nf = profile.n as f64;
    Ok(e.powf((nf - 1.0) / nf) * profile.f_at(ratio.acosh())?)
}

#[derive(Debug, Clone, Copy)]
pub struct ConePotential {
    pub n: u32,
}

impl Potential for ConePotential {
    fn eps(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn value(&self, z: &[Complex64]) -> Result<f64, StenzelError> {
        let r2 = norm_sq(z);
        if r2 == 0.0 {
            return Err(StenzelError::OriginPoint);
        }
        Ok(cone_value(self.n, r2))
    }
}

#[derive(Debug, Clone)]
pub struct StenzelPotential {
    pub eps: Complex64,
    pub profile: RadialProfile,
}

impl Potential for StenzelPotential {
    fn eps(&self) -> Complex64 {
        self.eps
    }
    fn value(&self, z: &[Complex64]) -> Result<f64, StenzelError> {
        smoothing_value(self.eps, z, &self.profile)
    }
}

/// The flat potential |z|² restricted to C_ε; not Ricci-flat, used as a
/// negative control.
#[derive(Debug, Clone, Copy)]
pub struct FlatPotential {
    pub eps: Complex64,
}

impl Potential for FlatPotential {
    fn eps(&self) -> Complex64 {
        self.eps
    }
    fn value(&self, z: &[Complex64]) -> Result<f64, StenzelError> {
        Ok(norm_sq(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaOptions {
    pub h: f64,
    /// index of the coordinate solved for in the chart (0-based, n = 3)
    pub chart: usize,
    pub richardson_tol: f64,
}

impl Default for MaOptions {
    fn default() -> Self {
        MaOptions { h: DEFAULT_STEP, chart: 3, richardson_tol: DEFAULT_RICHARDSON_TOL }
    }
}

/// |det(H)·|z_c|² − 1| with H the complex Hessian in the chart solving for z_c.
pub fn monge_ampere_residual<P: Potential + ?Sized>(
    potential: &P,
    point: &QuadricPoint,
    h: f64,
) -> Result<f64, StenzelError> {
    monge_ampere_residual_with(potential, point, &MaOptions { h, ..MaOptions::default() })
}

pub fn monge_ampere_residual_with<P: Potential + ?Sized>(
    potential: &P,
    point: &QuadricPoint,
    opts: &MaOptions,
) -> Result<f64, StenzelError> {
    if point.z.len() != 4 || opts.chart > 3 {
        return Err(StenzelError::InvalidArgument("the Monge–Ampère check is wired for n = 3".into()));
    }
    if !(opts.h > 0.0) {
        return Err(StenzelError::InvalidArgument(format!("step {} must be positive", opts.h)));
    }
    let c = opts.chart;
    let zc = point.z[c];
    if zc.norm() < 10.0 * opts.h {
        return Err(StenzelError::BranchCut { modulus: zc.norm(), h: opts.h });
    }
    let free: Vec<usize> = (0..4).filter(|&j| j != c).collect();
    let eps = potential.eps();
    let chart_value = |w: &[Complex64; 3]| -> Result<f64, StenzelError> {
        let rest = eps - w.iter().map(|v| v * v).sum::<Complex64>();
        let root = rest.sqrt();
        // the branch nearest the base point's own z_c
        let solved = if (root - zc).norm() <= (root + zc).norm() { root } else { -root };
        let mut z = [Complex64::new(0.0, 0.0); 4];
        for (k, &j) in free.iter().enumerate() {
            z[j] = w[k];
        }
        z[c] = solved;
        potential.value(&z)
    };
    let base = [point.z[free[0]], point.z[free[1]], point.z[free[2]]];
    let hess = |h: f64| -> Result<Matrix3<Complex64>, StenzelError> {
        // real directions: 2j ↦ x_j, 2j+1 ↦ y_j
        let shift = |dir: usize, s: f64, w: &mut [Complex64; 3]| {
            let d = if dir % 2 == 0 { Complex64::new(s, 0.0) } else { Complex64::new(0.0, s) };
            w[dir / 2] += d;
        };
        let mut d2 = [[0.0; 6]; 6];
        for a in 0..6 {
            for b in a..6 {
                let mut acc = 0.0;
                for (sa, sb, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut w = base;
                    shift(a, sa * h, &mut w);
                    shift(b, sb * h, &mut w);
                    acc += sign * chart_value(&w)?;
                }
                d2[a][b] = acc / (4.0 * h * h);
                d2[b][a] = d2[a][b];
            }
        }
        Ok(Matrix3::from_fn(|j, k| {
            let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
            0.25 * Complex64::new(d2[xj][xk] + d2[yj][yk], d2[xj][yk] - d2[yj][xk])
        }))
    };
    let coarse = hess(opts.h)?;
    let fine = hess(0.5 * opts.h)?;
    let weight = zc.norm_sqr();
    let disagreement = ((coarse.determinant() - fine.determinant()) * weight).norm();
    if disagreement > opts.richardson_tol {
        return Err(StenzelError::StepTooLarge { disagreement });
    }
    let extrapolated = (fine * Complex64::new(4.0, 0.0) - coarse) / Complex64::new(3.0, 0.0);
    Ok((extrapolated.determinant() * weight - 1.0).norm())
}

/// Random points on C_ε (n = 3) with chart coordinate |z₄| ≥ `min_chart` and
/// cosh⁻¹(|z|²/|ε|) ≤ `max_w` when ε ≠ 0.
pub fn sample_chart_points(eps: Complex64, count: usize, seed: u64, min_chart: f64, max_w: f64) -> Vec<QuadricPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut g = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * 0.6;
        let w = [g(), g(), g()];
        let z4 = (eps - w.iter().map(|v| v * v).sum::<Complex64>()).sqrt();
        let z = vec![w[0], w[1], w[2], z4];
        let r2 = norm_sq(&z);
        if z4.norm() < min_chart || r2 < 0.2 {
            continue;
        }
        if eps.norm() > 0.0 && !((r2 / eps.norm()).acosh() <= max_w) {
            continue;
        }
        out.push(QuadricPoint { z, eps });
    }
    out
}
