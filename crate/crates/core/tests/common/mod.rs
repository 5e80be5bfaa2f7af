//! Shared oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

/// Second-order jet (value, d/dr, d²/dr²).
#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub fn var(r: f64) -> Self {
        Jet2 { v: r, d1: 1.0, d2: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Jet2 { v: c, d1: 0.0, d2: 0.0 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Jet2 { v: e, d1: e * self.d1, d2: e * (self.d2 + self.d1 * self.d1) }
    }

    pub fn recip(self) -> Self {
        let v = 1.0 / self.v;
        Jet2 { v, d1: -self.d1 * v * v, d2: (2.0 * self.d1 * self.d1 * v - self.d2) * v * v }
    }

    pub fn scale(self, c: f64) -> Self {
        Jet2 { v: c * self.v, d1: c * self.d1, d2: c * self.d2 }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v * o.v, d1: self.d1 * o.v + self.v * o.d1, d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2 }
    }
}

/// ψ(x) = e^{−1/x} for x > 0.
fn psi(x: Jet2) -> Jet2 {
    if x.v <= 0.0 {
        Jet2::constant(0.0)
    } else {
        x.recip().scale(-1.0).exp()
    }
}

/// Transition 1 → 0 on [lo, hi].
pub fn smooth_cut(r: Jet2, lo: f64, hi: f64) -> Jet2 {
    let s = (r - Jet2::constant(lo)).scale(1.0 / (hi - lo));
    let a = psi(Jet2::constant(1.0) - s);
    let b = psi(s);
    if b.v == 0.0 {
        return Jet2::constant(1.0);
    }
    if a.v == 0.0 {
        return Jet2::constant(0.0);
    }
    a * (a + b).recip()
}

/// y*(r) = r²(1−r)³χ(r) with χ falling from 1 to 0 on [0.4, 0.8].
pub fn manufactured(r: f64) -> Jet2 {
    let x = Jet2::var(r);
    let one_minus = Jet2::constant(1.0) - x;
    x * x * one_minus * one_minus * one_minus * smooth_cut(x, 0.4, 0.8)
}

/// z = ((r d/dr)² − (n²r² + μ²)) y* computed from the jet.
pub fn manufactured_rhs(n: i64, mu: f64, r: f64) -> f64 {
    let y = manufactured(r);
    r * y.d1 + r * r * y.d2 - ((n * n) as f64 * r * r + mu * mu) * y.v
}

fn monomials(vars: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(v: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == v - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(v, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(vars, k, &mut Vec::new(), &mut out);
    out
}

fn exact_rank(mut m: Vec<Vec<BigRational>>) -> usize {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(rank, piv);
        let p = m[rank][c].clone();
        for i in 0..rows {
            if i != rank && !m[i][c].is_zero() {
                let f = &m[i][c] / &p;
                for j in c..cols {
                    let t = &f * &m[rank][j];
                    m[i][j] -= t;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// dim ker(Δ: P_k → P_{k−2}) on ℝ⁶, by exact rank of the Laplacian matrix.
pub fn brute_harmonic_dim(k: usize) -> usize {
    let src = monomials(6, k);
    if k < 2 {
        return src.len();
    }
    let dst = monomials(6, k - 2);
    let index: BTreeMap<Vec<usize>, usize> = dst.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let mut mat = vec![vec![BigRational::zero(); src.len()]; dst.len()];
    for (j, m) in src.iter().enumerate() {
        for v in 0..6 {
            if m[v] >= 2 {
                let mut t = m.clone();
                t[v] -= 2;
                mat[index[&t]][j] += BigRational::from_integer(BigInt::from(m[v] * (m[v] - 1)));
            }
        }
    }
    src.len() - exact_rank(mat)
}
