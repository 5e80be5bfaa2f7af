//! Indicial roots of the Hodge Laplacian on a 6-dimensional Calabi–Yau cone
//! over a 5-dimensional link, from user-supplied link eigen-data.
//!
//! A homogeneous p-form is written γ = r^λ(r^{p−1}dr∧α + r^pβ) with
//! (α, β) ∈ Λ^{p−1}F ⊕ Λ^pF. Rates come either from the seven-type
//! decomposition or from the hat eigenvalues μ̂ through λ = −2 ± √μ̂; the two
//! routes are independent and are cross-checked in tests.
//!
//! Weights use the cone convention W_δ ~ r^δ; the cylinder-end weight is the
//! exponent of e^{δt}, matching the sign flip needed against Lockhart–McOwen.

pub mod real;

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use real::{parse_rational, Real, Surd, FLOAT_TOL};

pub const LINK_DIM: usize = 5;
/// Form degrees on the cone run over 0..=CONE_DIM.
pub const CONE_DIM: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("form degree {0} is outside 0..=6")]
    DegreeOutOfRange(usize),
    #[error("a critical rate lies on the open window endpoint {endpoint}")]
    CriticalEndpoint { endpoint: String },
    #[error("spectrum violates a required bound: {0}")]
    ConstraintViolation(String),
    #[error("window {0} is outside the range the catalog covers")]
    WindowOutOfRange(String),
    #[error("weight at {index} has δ > δ′")]
    WeightOrderViolation { index: String },
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A coclosed eigenform family φ_{p,j} with d*φ = 0 and Δφ = μφ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mode {
    pub p: usize,
    pub mu: Real,
    pub mult: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// applies to μ ≠ 0 only
    Nonzero,
    #[default]
    All,
}

/// Lower bound μ > bound (strict) or μ ≥ bound on the degree-p modes in scope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub p: usize,
    pub bound: Real,
    pub strict: bool,
    #[serde(default)]
    pub scope: Scope,
}

impl Constraint {
    pub fn admits(&self, mu: &Real) -> bool {
        if self.scope == Scope::Nonzero && mu.is_zero_tol() {
            return true;
        }
        match mu.cmp_tol(&self.bound) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal => !self.strict,
            std::cmp::Ordering::Less => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum")]
pub struct LinkSpectrum {
    pub betti: [u64; 6],
    pub coexact_modes: Vec<Mode>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    /// per degree: the listed modes are all modes with μ below this value
    #[serde(default, serialize_with = "ser_complete")]
    pub complete_below: BTreeMap<usize, Real>,
}

fn ser_complete<S: Serializer>(m: &BTreeMap<usize, Real>, s: S) -> Result<S::Ok, S::Error> {
    let keyed: BTreeMap<String, &Real> = m.iter().map(|(k, v)| (k.to_string(), v)).collect();
    keyed.serialize(s)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CompleteBelow {
    Uniform(Real),
    PerDegree(BTreeMap<String, Real>),
    List(Vec<Option<Real>>),
}

#[derive(Deserialize)]
struct RawSpectrum {
    betti: Vec<u64>,
    coexact_modes: Vec<Mode>,
    #[serde(default)]
    constraints: Vec<Constraint>,
    #[serde(default, deserialize_with = "de_complete")]
    complete_below: BTreeMap<usize, Real>,
}

fn de_complete<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, Real>, D::Error> {
    let raw = Option::<CompleteBelow>::deserialize(d)?;
    let mut out = BTreeMap::new();
    match raw {
        None => {}
        Some(CompleteBelow::Uniform(v)) => {
            for p in 0..=LINK_DIM {
                out.insert(p, v.clone());
            }
        }
        Some(CompleteBelow::PerDegree(m)) => {
            for (k, v) in m {
                let p: usize = k.parse().map_err(serde::de::Error::custom)?;
                out.insert(p, v);
            }
        }
        Some(CompleteBelow::List(l)) => {
            for (p, v) in l.into_iter().enumerate() {
                if let Some(v) = v {
                    out.insert(p, v);
                }
            }
        }
    }
    Ok(out)
}

impl TryFrom<RawSpectrum> for LinkSpectrum {
    type Error = SpectraError;

    fn try_from(r: RawSpectrum) -> Result<Self, SpectraError> {
        let betti: [u64; 6] = r
            .betti
            .as_slice()
            .try_into()
            .map_err(|_| SpectraError::InvalidSpectrum(format!("{} Betti numbers, expected 6", r.betti.len())))?;
        LinkSpectrum::new(betti, r.coexact_modes, r.constraints, r.complete_below)
    }
}

impl LinkSpectrum {
    pub fn new(
        betti: [u64; 6],
        coexact_modes: Vec<Mode>,
        constraints: Vec<Constraint>,
        complete_below: BTreeMap<usize, Real>,
    ) -> Result<Self, SpectraError> {
        let s = LinkSpectrum { betti, coexact_modes, constraints, complete_below };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, SpectraError> {
        let raw: RawSpectrum = serde_json::from_str(text).map_err(|e| SpectraError::InvalidSpectrum(e.to_string()))?;
        LinkSpectrum::try_from(raw)
    }

    pub fn validate(&self) -> Result<(), SpectraError> {
        let bad = |m: String| Err(SpectraError::InvalidSpectrum(m));
        let violated = |m: String| Err(SpectraError::ConstraintViolation(m));
        for p in 0..=LINK_DIM {
            if self.betti[p] != self.betti[LINK_DIM - p] {
                return violated(format!("Poincaré duality fails: h_{p} ≠ h_{}", LINK_DIM - p));
            }
        }
        for m in &self.coexact_modes {
            if m.p > LINK_DIM {
                return bad(format!("mode degree {} exceeds the link dimension", m.p));
            }
            if m.mult == 0 {
                return bad("mode multiplicity must be at least 1".into());
            }
            if m.mu.cmp_tol(&Real::int(0)) == std::cmp::Ordering::Less {
                return bad(format!("negative eigenvalue {}", m.mu));
            }
        }
        for p in 0..=LINK_DIM {
            let harmonic: u64 = self.harmonic(p).map(|m| m.mult).sum();
            if harmonic != self.betti[p] {
                return violated(format!("degree {p}: μ = 0 multiplicity {harmonic} ≠ h_{p} = {}", self.betti[p]));
            }
        }
        for c in &self.constraints {
            for m in self.modes(c.p) {
                if !c.admits(&m.mu) {
                    return violated(format!("μ = {} in degree {} violates its bound {}", m.mu, c.p, c.bound));
                }
            }
        }
        Ok(())
    }

    /// Modes of degree p (empty outside 0..=5).
    pub fn modes(&self, p: usize) -> impl Iterator<Item = &Mode> {
        self.coexact_modes.iter().filter(move |m| m.p == p)
    }

    pub fn harmonic(&self, p: usize) -> impl Iterator<Item = &Mode> {
        self.modes(p).filter(|m| m.mu.is_zero_tol())
    }

    pub fn nonzero(&self, p: usize) -> impl Iterator<Item = &Mode> {
        self.modes(p).filter(|m| !m.mu.is_zero_tol())
    }
}

fn degree_below(p: usize, k: usize) -> Option<usize> {
    p.checked_sub(k)
}

/// Real interval with per-end closedness.
#[derive(Debug, Clone)]
pub struct Window {
    pub lo: Real,
    pub hi: Real,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Window {
    pub fn open(lo: Real, hi: Real) -> Self {
        Window { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn closed(lo: Real, hi: Real) -> Self {
        Window { lo, hi, lo_closed: true, hi_closed: true }
    }

    /// "A:B" (open), or bracketed "[A:B]", "(A:B]", "[A:B)", "(A:B)".
    pub fn parse(text: &str) -> Result<Self, SpectraError> {
        let t = text.trim();
        let bad = || SpectraError::InvalidArgument(format!("window {text:?}"));
        let (lo_closed, rest) = match t.chars().next() {
            Some('[') => (true, &t[1..]),
            Some('(') => (false, &t[1..]),
            _ => (false, t),
        };
        let (hi_closed, body) = match rest.chars().last() {
            Some(']') => (true, &rest[..rest.len() - 1]),
            Some(')') => (false, &rest[..rest.len() - 1]),
            _ => (false, rest),
        };
        let (a, b) = body.split_once(':').ok_or_else(bad)?;
        let lo: Real = a.parse().map_err(|_| bad())?;
        let hi: Real = b.parse().map_err(|_| bad())?;
        if lo.cmp_tol(&hi) == std::cmp::Ordering::Greater {
            return Err(bad());
        }
        Ok(Window { lo, hi, lo_closed, hi_closed })
    }

    /// Membership; rates on an open end are errors.
    pub fn contains(&self, x: &Real) -> Result<bool, SpectraError> {
        use std::cmp::Ordering::*;
        let crit = |e: &Real| SpectraError::CriticalEndpoint { endpoint: e.to_string() };
        match x.cmp_tol(&self.lo) {
            Less => return Ok(false),
            Equal if !self.lo_closed => return Err(crit(&self.lo)),
            _ => {}
        }
        match x.cmp_tol(&self.hi) {
            Greater => Ok(false),
            Equal if !self.hi_closed => Err(crit(&self.hi)),
            _ => Ok(true),
        }
    }

    fn within(&self, lo: i64, lo_incl: bool, hi: i64, hi_incl: bool) -> bool {
        use std::cmp::Ordering::*;
        let lo_ok = match self.lo.cmp_tol(&Real::int(lo)) {
            Greater => true,
            Equal => lo_incl || !self.lo_closed,
            Less => false,
        };
        let hi_ok = match self.hi.cmp_tol(&Real::int(hi)) {
            Less => true,
            Equal => hi_incl || !self.hi_closed,
            Greater => false,
        };
        lo_ok && hi_ok
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}:{}{r}", self.lo, self.hi)
    }
}

/// Generator family of a critical rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GenType {
    /// seven-type decomposition, 1..=7
    T(u8),
    /// hat-eigenform family, 1..=4
    Hat(u8),
    /// harmonic 1-form families, 1..=4
    OneForm(u8),
    /// closed-and-coclosed 2-/3-form pair families, 1..=4
    Paired(u8),
    Function,
    Cylinder,
}

impl fmt::Display for GenType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenType::T(k) => write!(f, "T{k}"),
            GenType::Hat(k) => write!(f, "hat{k}"),
            GenType::OneForm(k) => write!(f, "one_form{k}"),
            GenType::Paired(k) => write!(f, "paired{k}"),
            GenType::Function => write!(f, "function"),
            GenType::Cylinder => write!(f, "cylinder"),
        }
    }
}

impl Serialize for GenType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalRate {
    pub lambda: Real,
    pub degree: usize,
    pub multiplicity: u64,
    pub gen_type: GenType,
    /// a log r solution accompanies r^λ (double root, μ̂ = 0)
    pub log_mode: bool,
}

impl CriticalRate {
    /// d(λ): the dimension of the homogeneous-plus-log solution space.
    pub fn dimension(&self) -> u64 {
        self.multiplicity * if self.log_mode { 2 } else { 1 }
    }
}

fn sort_rates(rates: &mut [CriticalRate]) {
    rates.sort_by(|a, b| a.lambda.to_f64().total_cmp(&b.lambda.to_f64()).then(a.gen_type.cmp(&b.gen_type)));
}

/// Rates with completeness information for the window.
#[derive(Debug, Clone, Serialize)]
pub struct Catalog {
    pub rates: Vec<CriticalRate>,
    /// every mode that could produce a rate in the window is within the
    /// supplied completeness bounds
    pub complete: bool,
}

/// Scalar couplings of the separated Laplacian on p-forms at rate λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacianCoefficients {
    /// (λ+p−2)(λ−p+6) on the α slot, absent for p = 0
    pub a1: Option<f64>,
    /// (λ+p)(λ−p+4) on the β slot, absent for p = 6
    pub a2: Option<f64>,
    /// coefficient of d_F*β in the α equation
    pub cross_alpha: Option<f64>,
    /// coefficient of d_Fα in the β equation
    pub cross_beta: Option<f64>,
}

pub fn laplacian_coefficients(p: usize, lambda: f64) -> Result<LaplacianCoefficients, SpectraError> {
    if p > CONE_DIM {
        return Err(SpectraError::DegreeOutOfRange(p));
    }
    let pf = p as f64;
    let has_alpha = p >= 1;
    let has_beta = p <= LINK_DIM;
    let both = has_alpha && has_beta;
    Ok(LaplacianCoefficients {
        a1: has_alpha.then(|| (lambda + pf - 2.0) * (lambda - pf + 6.0)),
        a2: has_beta.then(|| (lambda + pf) * (lambda - pf + 4.0)),
        cross_alpha: both.then_some(-2.0),
        cross_beta: both.then_some(-2.0),
    })
}

/// Diagonal shifts ((p−4)², (p−2)²) of the λ = −2 normal form.
pub fn normal_form_shifts(p: usize) -> Result<(i64, i64), SpectraError> {
    if p > CONE_DIM {
        return Err(SpectraError::DegreeOutOfRange(p));
    }
    let p = p as i64;
    Ok(((p - 4).pow(2), (p - 2).pow(2)))
}

/// Roots of (λ − center)² = half² + μ.
fn quadratic_roots(center: i64, half: i64, mu: &Real) -> Vec<Real> {
    let disc = mu.add_int(half * half);
    let s = disc.sqrt().expect("discriminant of a non-negative eigenvalue");
    if s.is_zero_tol() {
        vec![Real::int(center)]
    } else {
        vec![s.add_int(center), s.neg().add_int(center)]
    }
}

fn minus_two() -> Real {
    Real::int(-2)
}

/// All harmonic rates in degree p from the seven-type decomposition.
pub fn type_route_rates(spec: &LinkSpectrum, p: usize) -> Result<Vec<CriticalRate>, SpectraError> {
    if p > CONE_DIM {
        return Err(SpectraError::DegreeOutOfRange(p));
    }
    let pi = p as i64;
    let mut out = Vec::new();
    let mut push = |lambda: Real, mult: u64, t: u8| {
        let log_mode = lambda.eq_tol(&minus_two());
        out.push(CriticalRate { lambda, degree: p, multiplicity: mult, gen_type: GenType::T(t), log_mode });
    };
    if let Some(q) = degree_below(p, 2) {
        // T1: μ_{p−2} = (λ+p−2)(λ−p+6) ≠ 0
        for m in spec.nonzero(q) {
            for l in quadratic_roots(-2, pi - 4, &m.mu) {
                push(l, m.mult, 1);
            }
        }
    }
    if let Some(q) = degree_below(p, 1) {
        for m in spec.harmonic(q) {
            // T2: λ = 2 − p, λ ≠ −2
            if pi != 4 {
                push(Real::int(2 - pi), m.mult, 2);
            }
            // T3: λ = p − 6
            push(Real::int(pi - 6), m.mult, 3);
        }
        for m in spec.nonzero(q) {
            // T4: μ_{p−1} = (λ+p)(λ−p+6)
            for l in quadratic_roots(-3, pi - 3, &m.mu) {
                push(l, m.mult, 4);
            }
            // T5: μ_{p−1} = (λ+p−2)(λ−p+4), λ ≠ −2
            for l in quadratic_roots(-1, pi - 3, &m.mu) {
                if !l.eq_tol(&minus_two()) {
                    push(l, m.mult, 5);
                }
            }
        }
    }
    // T6: harmonic p-forms at λ = −p
    for m in spec.harmonic(p) {
        push(Real::int(-pi), m.mult, 6);
    }
    // T7: μ_p = (λ+p)(λ−p+4), λ ≠ −p
    for m in spec.modes(p) {
        for l in quadratic_roots(-2, pi - 2, &m.mu) {
            if !l.eq_tol(&Real::int(-pi)) {
                push(l, m.mult, 7);
            }
        }
    }
    Ok(out)
}

/// One hat eigenvalue with √μ̂ carried exactly.
#[derive(Debug, Clone, Serialize)]
pub struct HatEigenvalue {
    pub mu_hat: Real,
    pub sqrt_mu_hat: Real,
    pub multiplicity: u64,
    pub family: u8,
}

pub fn hat_eigenvalues(spec: &LinkSpectrum, p: usize) -> Result<Vec<HatEigenvalue>, SpectraError> {
    if p > CONE_DIM {
        return Err(SpectraError::DegreeOutOfRange(p));
    }
    let pi = p as i64;
    let mut out = Vec::new();
    let mut push = |sqrt_mu_hat: Real, multiplicity: u64, family: u8| {
        out.push(HatEigenvalue { mu_hat: sqrt_mu_hat.square(), sqrt_mu_hat, multiplicity, family });
    };
    let shifted = |mu: &Real, k: i64| mu.add_int(k * k).sqrt().expect("non-negative");
    if let Some(q) = degree_below(p, 2) {
        for m in spec.nonzero(q) {
            push(shifted(&m.mu, pi - 4), m.mult, 1);
        }
    }
    for m in spec.modes(p) {
        push(shifted(&m.mu, pi - 2), m.mult, 2);
    }
    if let Some(q) = degree_below(p, 1) {
        for m in spec.harmonic(q) {
            push(Real::int((pi - 4).abs()), m.mult, 3);
        }
        for m in spec.nonzero(q) {
            let root = shifted(&m.mu, pi - 3);
            push(root.add_int(-1).abs(), m.mult, 4);
            push(root.add_int(1), m.mult, 4);
        }
    }
    Ok(out)
}

/// Rates −2 ± √μ̂, with a single log-mode entry when μ̂ = 0.
pub fn hat_route_rates(spec: &LinkSpectrum, p: usize) -> Result<Vec<CriticalRate>, SpectraError> {
    let mut out = Vec::new();
    for h in hat_eigenvalues(spec, p)? {
        let rate = |lambda: Real, log_mode: bool| CriticalRate {
            lambda,
            degree: p,
            multiplicity: h.multiplicity,
            gen_type: GenType::Hat(h.family),
            log_mode,
        };
        if h.sqrt_mu_hat.is_zero_tol() {
            out.push(rate(minus_two(), true));
        } else {
            out.push(rate(h.sqrt_mu_hat.add_int(-2), false));
            out.push(rate(h.sqrt_mu_hat.neg().add_int(-2), false));
        }
    }
    Ok(out)
}

fn filter_window(rates: Vec<CriticalRate>, window: &Window) -> Result<Vec<CriticalRate>, SpectraError> {
    let mut out = Vec::new();
    for r in rates {
        if window.contains(&r.lambda)? {
            out.push(r);
        }
    }
    sort_rates(&mut out);
    Ok(out)
}

fn complete_for(spec: &LinkSpectrum, q: usize, mu_max: f64) -> bool {
    spec.complete_below.get(&q).is_some_and(|b| b.to_f64() > mu_max)
}

/// Seven-type harmonic rates of degree p inside an open window.
pub fn harmonic_rate_catalog(spec: &LinkSpectrum, p: usize, window: &Window) -> Result<Catalog, SpectraError> {
    let rates = filter_window(type_route_rates(spec, p)?, window)?;
    // largest eigenvalue whose rates can reach the window, per family
    let (lo, hi) = (window.lo.to_f64(), window.hi.to_f64());
    let pf = p as f64;
    let over = |a: f64, b: f64| ((lo + a) * (lo + b)).max((hi + a) * (hi + b));
    let mut complete = true;
    if let Some(q) = degree_below(p, 2) {
        complete &= complete_for(spec, q, over(pf - 2.0, 6.0 - pf));
    }
    if let Some(q) = degree_below(p, 1) {
        complete &= complete_for(spec, q, over(pf, 6.0 - pf).max(over(pf - 2.0, 4.0 - pf)));
    }
    if p <= LINK_DIM {
        complete &= complete_for(spec, p, over(pf, 4.0 - pf));
    }
    Ok(Catalog { rates, complete })
}

/// Bounds the 1-form and paired catalogs rely on: nonzero μ₀ > 5, μ₁ ≥ 8
/// for all modes, and h₁ = 0.
pub fn check_link_bounds(spec: &LinkSpectrum) -> Result<(), SpectraError> {
    for m in spec.nonzero(0) {
        if m.mu.cmp_tol(&Real::int(5)) != std::cmp::Ordering::Greater {
            return Err(SpectraError::ConstraintViolation(format!("nonzero μ₀ = {} must exceed 5", m.mu)));
        }
    }
    for m in spec.modes(1) {
        if m.mu.cmp_tol(&Real::int(8)) == std::cmp::Ordering::Less {
            return Err(SpectraError::ConstraintViolation(format!("μ₁ = {} is below 8", m.mu)));
        }
    }
    if spec.betti[1] != 0 {
        return Err(SpectraError::ConstraintViolation(format!("h₁ = {} must vanish", spec.betti[1])));
    }
    Ok(())
}

fn in_five_twelve(mu: &Real) -> bool {
    use std::cmp::Ordering::*;
    mu.cmp_tol(&Real::int(5)) == Greater && mu.cmp_tol(&Real::int(12)) != Greater
}

/// Harmonic homogeneous 1-forms with rate in a window inside [−3, 1].
pub fn one_form_catalog(spec: &LinkSpectrum, window: &Window) -> Result<Vec<CriticalRate>, SpectraError> {
    if !window.within(-3, true, 1, true) {
        return Err(SpectraError::WindowOutOfRange(window.to_string()));
    }
    check_link_bounds(spec)?;
    let rate = |lambda: Real, multiplicity: u64, k: u8| CriticalRate {
        lambda,
        degree: 1,
        multiplicity,
        gen_type: GenType::OneForm(k),
        log_mode: false,
    };
    let mut all = Vec::new();
    for m in spec.nonzero(0).filter(|m| in_five_twelve(&m.mu)) {
        all.push(rate(m.mu.add_int(4).sqrt().expect("positive").add_int(-3), m.mult, 1));
    }
    // d r² from the constants
    if spec.betti[0] > 0 {
        all.push(rate(Real::int(1), spec.betti[0], 2));
    }
    // the Reeb field dual, present once the Killing eigenvalue 8 occurs
    if spec.modes(1).any(|m| m.mu.eq_tol(&Real::int(8))) {
        all.push(rate(Real::int(1), 1, 3));
    }
    for m in spec.nonzero(0).filter(|m| m.mu.eq_tol(&Real::int(12))) {
        all.push(rate(Real::int(1), m.mult, 4));
    }
    filter_window(all, window)
}

/// Closed-and-coclosed homogeneous 2-/3-form pairs with rate in a window
/// inside (−2, 0].
pub fn paired_catalog(spec: &LinkSpectrum, window: &Window) -> Result<Vec<CriticalRate>, SpectraError> {
    if !window.within(-2, false, 0, true) {
        return Err(SpectraError::WindowOutOfRange(window.to_string()));
    }
    check_link_bounds(spec)?;
    let rate = |lambda: Real, multiplicity: u64, k: u8| CriticalRate {
        lambda,
        degree: 3,
        multiplicity,
        gen_type: GenType::Paired(k),
        log_mode: false,
    };
    let mut all: Vec<CriticalRate> = (1..=3).map(|k| rate(Real::int(0), 1, k)).collect();
    for m in spec.nonzero(0).filter(|m| in_five_twelve(&m.mu)) {
        all.push(rate(m.mu.add_int(4).sqrt().expect("positive").add_int(-4), m.mult, 4));
    }
    filter_window(all, window)
}

/// Claims about the function rates, checked against the actual roots.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    /// no rate in (−2n+2, 0)
    pub negative_gap: bool,
    /// no rate in (0, 1]
    pub unit_gap: bool,
    /// the threshold test: no nonzero μ ≤ 2n − 1
    pub unit_gap_predicted: bool,
    /// eigenvalues that break the unit gap
    pub offending: Vec<Real>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionRates {
    pub rates: Vec<CriticalRate>,
    pub gaps: GapReport,
}

/// Roots of μ = λ(λ + 2n − 2) for the function Laplacian on a cone of
/// complex dimension n.
pub fn function_rates(n: u32, modes: &[(Real, u64)], window: &Window) -> Result<FunctionRates, SpectraError> {
    if n < 2 {
        return Err(SpectraError::InvalidArgument(format!("complex dimension {n} must be at least 2")));
    }
    let k = n as i64 - 1;
    let mut all = Vec::new();
    for (mu, mult) in modes {
        if mu.cmp_tol(&Real::int(0)) == std::cmp::Ordering::Less {
            return Err(SpectraError::InvalidArgument(format!("negative eigenvalue {mu}")));
        }
        for lambda in quadratic_roots(-k, k, mu) {
            all.push(CriticalRate { lambda, degree: 0, multiplicity: *mult, gen_type: GenType::Function, log_mode: false });
        }
    }
    let neg = Window::open(Real::int(-2 * k), Real::int(0));
    let unit = Window { lo: Real::int(0), hi: Real::int(1), lo_closed: false, hi_closed: true };
    let strictly_inside = |w: &Window, l: &Real| {
        use std::cmp::Ordering::*;
        l.cmp_tol(&w.lo) == Greater
            && match l.cmp_tol(&w.hi) {
                Less => true,
                Equal => w.hi_closed,
                Greater => false,
            }
    };
    let negative_gap = !all.iter().any(|r| strictly_inside(&neg, &r.lambda));
    let unit_gap = !all.iter().any(|r| strictly_inside(&unit, &r.lambda));
    let threshold = Real::int(2 * k + 1);
    let offending: Vec<Real> = modes
        .iter()
        .filter(|(mu, _)| !mu.is_zero_tol() && mu.cmp_tol(&threshold) != std::cmp::Ordering::Greater)
        .map(|(mu, _)| mu.clone())
        .collect();
    let gaps = GapReport { negative_gap, unit_gap, unit_gap_predicted: offending.is_empty(), offending };
    Ok(FunctionRates { rates: filter_window(all, window)?, gaps })
}

/// Rates ±√μ on a cylindrical end; μ = 0 carries the t-linear solution.
pub fn cylinder_rates(modes: &[(Real, u64)], window: &Window) -> Result<Vec<CriticalRate>, SpectraError> {
    let mut all = Vec::new();
    for (mu, mult) in modes {
        let s = mu.sqrt().ok_or_else(|| SpectraError::InvalidArgument(format!("negative eigenvalue {mu}")))?;
        let rate = |lambda: Real, log_mode: bool| CriticalRate {
            lambda,
            degree: 0,
            multiplicity: *mult,
            gen_type: GenType::Cylinder,
            log_mode,
        };
        if s.is_zero_tol() {
            all.push(rate(Real::int(0), true));
        } else {
            all.push(rate(s.clone(), false));
            all.push(rate(s.neg(), false));
        }
    }
    filter_window(all, window)
}

/// Weights (δ₁, …, δ_N; δ_∞).
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub cone_weights: Vec<Real>,
    pub end_weight: Real,
}

impl WeightVector {
    /// "d1,d2,...;dinf": cone weights, then the end weight.
    pub fn parse(text: &str) -> Result<Self, SpectraError> {
        let bad = |m: &str| SpectraError::InvalidArgument(format!("weights {text:?}: {m}"));
        let (cones, end) = text.split_once(';').ok_or_else(|| bad("missing ';' before the end weight"))?;
        let cone_weights = cones
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<Real>().map_err(|e| bad(&e)))
            .collect::<Result<_, _>>()?;
        let end_weight = end.parse::<Real>().map_err(|e| bad(&e))?;
        Ok(WeightVector { cone_weights, end_weight })
    }
}

fn count_between(rates: &[CriticalRate], lo: &Real, hi: &Real, label: &str) -> Result<u64, SpectraError> {
    use std::cmp::Ordering::*;
    match lo.cmp_tol(hi) {
        Greater => return Err(SpectraError::WeightOrderViolation { index: label.to_string() }),
        Equal => {}
        Less => {}
    }
    let mut n = 0;
    for r in rates {
        for w in [lo, hi] {
            if r.lambda.eq_tol(w) {
                return Err(SpectraError::CriticalEndpoint { endpoint: format!("{label} = {w}") });
            }
        }
        if r.lambda.cmp_tol(lo) == Greater && r.lambda.cmp_tol(hi) == Less {
            n += r.dimension();
        }
    }
    Ok(n)
}

/// N(δ, δ′): critical rates strictly between the weights, counted with d(λ).
/// Equal weights at a point contribute nothing.
pub fn index_change(
    cone_catalogs: &[Vec<CriticalRate>],
    end_catalog: &[CriticalRate],
    delta: &WeightVector,
    delta_prime: &WeightVector,
) -> Result<u64, SpectraError> {
    let n = cone_catalogs.len();
    if delta.cone_weights.len() != n || delta_prime.cone_weights.len() != n {
        return Err(SpectraError::InvalidArgument(format!(
            "{n} cone catalogs against {} and {} weights",
            delta.cone_weights.len(),
            delta_prime.cone_weights.len()
        )));
    }
    let mut total = 0;
    for (i, cat) in cone_catalogs.iter().enumerate() {
        total += count_between(cat, &delta.cone_weights[i], &delta_prime.cone_weights[i], &format!("cone {}", i + 1))?;
    }
    total += count_between(end_catalog, &delta.end_weight, &delta_prime.end_weight, "end")?;
    Ok(total)
}

/// The index at a self-dual weight pair (−ν, ν): i = −N/2.
pub fn symmetric_index(n: u64) -> Ratio<i64> {
    Ratio::new(-(n as i64), 2)
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Dimension of degree-k harmonic polynomials in `vars` real variables.
pub fn harmonic_polynomial_dim(vars: u64, k: u64) -> u128 {
    let total = binomial(k + vars - 1, vars - 1);
    let lower = if k >= 2 { binomial(k - 2 + vars - 1, vars - 1) } else { 0 };
    total - lower
}

/// Round S⁵ function spectrum k(k+4) with multiplicities, k ≤ k_max.
pub fn s5_function_modes(k_max: u64) -> Vec<(Real, u64)> {
    (0..=k_max)
        .map(|k| (Real::int((k * (k + 4)) as i64), harmonic_polynomial_dim(6, k) as u64))
        .collect()
}

/// CSV with columns lambda, degree, mult, type, log_mode, lambda_exact.
pub fn rates_csv(rates: &[CriticalRate]) -> String {
    let mut s = String::from("lambda,degree,mult,type,log_mode,lambda_exact\n");
    for r in rates {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.lambda.to_f64(),
            r.degree,
            r.multiplicity,
            r.gen_type,
            r.log_mode,
            r.lambda
        ));
    }
    s
}
