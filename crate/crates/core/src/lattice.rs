//! Exact integer lattice arithmetic for the K3 matching problem.
//!
//! Coordinates of L = −E8 ⊕ −E8 ⊕ U³: indices 0..8 and 8..16 are the simple
//! roots of the two −E8 copies (Bourbaki node order), 16..22 are
//! B₁, C₁, B₂, C₂, B₃, C₃ with Bᵢ·Cᵢ = 1.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

pub const K3_RANK: usize = 22;

/// Bourbaki E8 Dynkin edges, 0-based: chain 1-3-4-5-6-7-8 with node 2 on node 4.
pub const E8_EDGES: [(usize, usize); 7] = [(0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (1, 3)];
/// Π̃ sits on Bourbaki node 1, an end of the long chain.
pub const PI_NODE: usize = 0;
/// Dynkin neighbor of [`PI_NODE`] (Bourbaki node 3).
pub const ADJACENT_NODE: usize = 2;

/// Moduli tried for UNSAT certificates.
pub const MAX_MODULUS: u64 = 64;
pub const DEFAULT_BOUND: u64 = 1000;
/// Largest residue table built per modulus.
const MAX_RESIDUE_TABLE: u64 = 1 << 21;
/// Largest number of outer enumeration steps.
const MAX_ENUMERATION: u128 = 1 << 34;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Gram matrix is not square and symmetric")]
    NotSymmetric,
    #[error("avoid vector {index} is orthogonal to the whole span")]
    UnavoidableHyperplane { index: usize },
    #[error("span has no vector of positive square")]
    NoPositiveDirection,
    #[error("{0}")]
    InvalidArgument(String),
}

fn big_json<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    match x.to_i64() {
        Some(v) => s.serialize_i64(v),
        None => s.serialize_str(&x.to_string()),
    }
}

fn big_vec_json<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        match x.to_i64() {
            Some(i) => seq.serialize_element(&i)?,
            None => seq.serialize_element(&x.to_string())?,
        }
    }
    seq.end()
}

fn big_mat_json<S: Serializer>(m: &[Vec<BigInt>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    #[derive(Serialize)]
    struct Row<'a>(#[serde(serialize_with = "big_vec_json")] &'a [BigInt]);
    let mut seq = s.serialize_seq(Some(m.len()))?;
    for row in m {
        seq.serialize_element(&Row(row))?;
    }
    seq.end()
}

fn rational_json<S: Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn rational_vec_json<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct LatticeVector {
    #[serde(serialize_with = "big_vec_json")]
    pub coords: Vec<BigInt>,
}

impl LatticeVector {
    pub fn new(coords: Vec<BigInt>) -> Self {
        LatticeVector { coords }
    }

    pub fn from_i64(coords: &[i64]) -> Self {
        LatticeVector { coords: coords.iter().map(|&c| BigInt::from(c)).collect() }
    }

    pub fn zero(rank: usize) -> Self {
        LatticeVector { coords: vec![BigInt::zero(); rank] }
    }

    pub fn unit(rank: usize, i: usize) -> Self {
        let mut v = Self::zero(rank);
        v.coords[i] = BigInt::one();
        v
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(Zero::is_zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        LatticeVector { coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        LatticeVector { coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        LatticeVector { coords: self.coords.iter().map(|a| a * c).collect() }
    }

    pub fn to_rational(&self) -> RationalVector {
        RationalVector { coords: self.coords.iter().map(|a| BigRational::from_integer(a.clone())).collect() }
    }

    /// Σ cᵢvᵢ.
    pub fn combination(vectors: &[LatticeVector], coeffs: &[BigInt]) -> Self {
        let rank = vectors.first().map_or(0, |v| v.len());
        let mut out = Self::zero(rank);
        for (v, c) in vectors.iter().zip(coeffs) {
            for (o, x) in out.coords.iter_mut().zip(&v.coords) {
                *o += c * x;
            }
        }
        out
    }
}

/// Rational vector for span and normalization computations, never mixed
/// into integer-mode results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RationalVector {
    #[serde(serialize_with = "rational_vec_json")]
    pub coords: Vec<BigRational>,
}

impl RationalVector {
    pub fn zero(rank: usize) -> Self {
        RationalVector { coords: vec![BigRational::zero(); rank] }
    }

    pub fn axpy(&mut self, a: &BigRational, x: &RationalVector) {
        for (s, v) in self.coords.iter_mut().zip(&x.coords) {
            *s += a * v;
        }
    }

    pub fn scale(&self, a: &BigRational) -> Self {
        RationalVector { coords: self.coords.iter().map(|v| v * a).collect() }
    }

    /// Integral when every coordinate has denominator 1.
    pub fn to_integer(&self) -> Option<LatticeVector> {
        self.coords.iter().all(|c| c.is_integer()).then(|| LatticeVector::new(self.coords.iter().map(|c| c.to_integer()).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GramLattice {
    pub rank: usize,
    #[serde(serialize_with = "big_mat_json")]
    pub gram: Vec<Vec<BigInt>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub null: usize,
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.null == 0 {
            write!(f, "({},{})", self.positive, self.negative)
        } else {
            write!(f, "({},{},{})", self.positive, self.negative, self.null)
        }
    }
}

impl GramLattice {
    pub fn new(gram: Vec<Vec<BigInt>>) -> Result<Self, LatticeError> {
        let rank = gram.len();
        if gram.iter().any(|row| row.len() != rank) {
            return Err(LatticeError::NotSymmetric);
        }
        for i in 0..rank {
            for j in 0..i {
                if gram[i][j] != gram[j][i] {
                    return Err(LatticeError::NotSymmetric);
                }
            }
        }
        Ok(GramLattice { rank, gram })
    }

    pub fn from_i64(gram: &[Vec<i64>]) -> Result<Self, LatticeError> {
        Self::new(gram.iter().map(|row| row.iter().map(|&x| BigInt::from(x)).collect()).collect())
    }

    /// Every diagonal entry even.
    pub fn is_even(&self) -> bool {
        (0..self.rank).all(|i| self.gram[i][i].is_even())
    }

    pub fn determinant(&self) -> BigInt {
        determinant(&self.gram)
    }

    pub fn signature(&self) -> Signature {
        let g: Vec<Vec<BigRational>> =
            self.gram.iter().map(|row| row.iter().map(|x| BigRational::from_integer(x.clone())).collect()).collect();
        let (diag, _) = congruence_diagonalize(&g);
        let positive = diag.iter().filter(|d| d.is_positive()).count();
        let negative = diag.iter().filter(|d| d.is_negative()).count();
        Signature { positive, negative, null: self.rank - positive - negative }
    }

    fn check(&self, v: usize) -> Result<(), LatticeError> {
        if v != self.rank {
            return Err(LatticeError::DimensionMismatch { expected: self.rank, found: v });
        }
        Ok(())
    }

    /// vᵀ·gram·w.
    pub fn pairing(&self, v: &LatticeVector, w: &LatticeVector) -> Result<BigInt, LatticeError> {
        self.check(v.len())?;
        self.check(w.len())?;
        let mut acc = BigInt::zero();
        for (i, vi) in v.coords.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            let mut row = BigInt::zero();
            for (g, wj) in self.gram[i].iter().zip(&w.coords) {
                if !g.is_zero() && !wj.is_zero() {
                    row += g * wj;
                }
            }
            acc += vi * row;
        }
        Ok(acc)
    }

    pub fn pairing_rational(&self, v: &RationalVector, w: &RationalVector) -> Result<BigRational, LatticeError> {
        self.check(v.coords.len())?;
        self.check(w.coords.len())?;
        let mut acc = BigRational::zero();
        for (i, vi) in v.coords.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (g, wj) in self.gram[i].iter().zip(&w.coords) {
                if !g.is_zero() && !wj.is_zero() {
                    acc += vi * wj * BigRational::from_integer(g.clone());
                }
            }
        }
        Ok(acc)
    }

    /// Gram matrix of a list of vectors.
    pub fn gram_of(&self, vectors: &[LatticeVector]) -> Result<Vec<Vec<BigInt>>, LatticeError> {
        vectors.iter().map(|v| vectors.iter().map(|w| self.pairing(v, w)).collect()).collect()
    }

    /// B = e_{16+2i}, i in 0..3.
    pub fn b(&self, i: usize) -> LatticeVector {
        LatticeVector::unit(self.rank, 16 + 2 * i)
    }

    /// C = e_{17+2i}, i in 0..3.
    pub fn c(&self, i: usize) -> LatticeVector {
        LatticeVector::unit(self.rank, 17 + 2 * i)
    }
}

/// Bareiss fraction-free determinant.
pub fn determinant(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Symmetric Gaussian elimination: returns (d, P) with Pᵀ·G·P = diag(d);
/// P is given by its columns.
pub fn congruence_diagonalize(g: &[Vec<BigRational>]) -> (Vec<BigRational>, Vec<Vec<BigRational>>) {
    let n = g.len();
    let mut a = g.to_vec();
    let mut p: Vec<Vec<BigRational>> =
        (0..n).map(|j| (0..n).map(|i| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect();
    // column ops on P are tracked as p[col][row]
    let add_col = |a: &mut Vec<Vec<BigRational>>, p: &mut Vec<Vec<BigRational>>, dst: usize, src: usize, c: &BigRational| {
        // basis change e_dst ← e_dst + c·e_src
        for i in 0..n {
            let v = &a[i][src] * c;
            a[i][dst] += v;
        }
        for j in 0..n {
            let v = &a[src][j] * c;
            a[dst][j] += v;
        }
        for i in 0..n {
            let v = &p[src][i] * c;
            p[dst][i] += v;
        }
    };
    for k in 0..n {
        if a[k][k].is_zero() {
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                a.swap(k, j);
                for row in a.iter_mut() {
                    row.swap(k, j);
                }
                p.swap(k, j);
            } else if let Some(j) = (k + 1..n).find(|&j| !a[k][j].is_zero()) {
                // (e_k + e_j)² = 2a_kj ≠ 0 when both diagonals vanish
                add_col(&mut a, &mut p, k, j, &BigRational::one());
            } else {
                continue;
            }
        }
        let pivot = a[k][k].clone();
        for j in k + 1..n {
            if !a[k][j].is_zero() {
                let c = -(&a[k][j] / &pivot);
                add_col(&mut a, &mut p, j, k, &c);
            }
        }
    }
    ((0..n).map(|i| a[i][i].clone()).collect(), p)
}

/// Standard E8 Cartan matrix (diagonal 2, −1 on Dynkin edges).
pub fn e8_cartan() -> Vec<Vec<i64>> {
    let mut m = vec![vec![0i64; 8]; 8];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 2;
    }
    for &(i, j) in &E8_EDGES {
        m[i][j] = -1;
        m[j][i] = -1;
    }
    m
}

/// L = 2(−E8) ⊕ 3U, with determinant and signature checked.
pub fn build_k3_lattice() -> GramLattice {
    let mut g = vec![vec![0i64; K3_RANK]; K3_RANK];
    let e8 = e8_cartan();
    for block in 0..2 {
        for i in 0..8 {
            for j in 0..8 {
                g[8 * block + i][8 * block + j] = -e8[i][j];
            }
        }
    }
    for u in 0..3 {
        let i = 16 + 2 * u;
        g[i][i + 1] = 1;
        g[i + 1][i] = 1;
    }
    let lattice = GramLattice::from_i64(&g).expect("symmetric by construction");
    debug_assert!(lattice.determinant().abs().is_one());
    debug_assert_eq!(lattice.signature(), Signature { positive: 3, negative: 19, null: 0 });
    lattice
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingRecord {
    pub labels: Vec<String>,
    #[serde(serialize_with = "big_mat_json")]
    pub source_gram: Vec<Vec<BigInt>>,
    pub images: Vec<LatticeVector>,
    pub verified: bool,
}

impl EmbeddingRecord {
    pub fn image(&self, label: &str) -> Option<&LatticeVector> {
        self.labels.iter().position(|l| l == label).map(|i| &self.images[i])
    }
}

pub const MATCHING_LABELS: [&str; 3] = ["pi", "kplus", "kminus"];

/// Π̃, −K_{Y₊} and −¼K_{Y₋} in L.
pub fn matching_embedding(l: &GramLattice) -> EmbeddingRecord {
    let pi = LatticeVector::unit(l.rank, PI_NODE);
    let u_sum = (0..3).fold(LatticeVector::zero(l.rank), |acc, i| acc.add(&l.b(i)).add(&l.c(i)));
    let kplus = LatticeVector::unit(l.rank, ADJACENT_NODE).add(&u_sum);
    let kminus = l.b(0).add(&l.c(0)).sub(&l.b(1)).sub(&l.c(1));
    let source_gram: Vec<Vec<BigInt>> =
        [[-2i64, 1, 0], [1, 4, 0], [0, 0, 4]].iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
    let images = vec![pi, kplus, kminus];
    let verified = l.gram_of(&images).map(|g| g == source_gram).unwrap_or(false);
    EmbeddingRecord { labels: MATCHING_LABELS.iter().map(|s| s.to_string()).collect(), source_gram, images, verified }
}

/// Column-style Hermite reduction: A·U = H with H in column echelon form.
#[derive(Debug, Clone)]
pub struct ColumnEchelon {
    pub h: Vec<Vec<BigInt>>,
    /// unimodular, columns = new basis
    pub u: Vec<Vec<BigInt>>,
    pub u_inv: Vec<Vec<BigInt>>,
    /// (row, column) of each pivot; pivot columns are 0..rank
    pub pivots: Vec<(usize, usize)>,
}

impl ColumnEchelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Columns rank.. of U: a saturated basis of ker A.
    pub fn kernel(&self) -> Vec<LatticeVector> {
        let k = self.u.len();
        (self.rank()..k).map(|j| LatticeVector::new((0..k).map(|i| self.u[i][j].clone()).collect())).collect()
    }
}

pub fn column_echelon(a: &[Vec<BigInt>], cols: usize) -> ColumnEchelon {
    let rows = a.len();
    let mut h = a.to_vec();
    let mut u: Vec<Vec<BigInt>> = (0..cols).map(|i| (0..cols).map(|j| BigInt::from((i == j) as i64)).collect()).collect();
    let mut u_inv = u.clone();
    let mut pivots = Vec::new();
    // c_j ← c_j − q·c_i
    let sub_col = |h: &mut Vec<Vec<BigInt>>, u: &mut Vec<Vec<BigInt>>, u_inv: &mut Vec<Vec<BigInt>>, j: usize, i: usize, q: &BigInt| {
        for row in h.iter_mut().chain(u.iter_mut()) {
            let v = &row[i] * q;
            row[j] -= v;
        }
        let rj = u_inv[j].clone();
        for (x, y) in u_inv[i].iter_mut().zip(&rj) {
            *x += q * y;
        }
    };
    let swap_col = |h: &mut Vec<Vec<BigInt>>, u: &mut Vec<Vec<BigInt>>, u_inv: &mut Vec<Vec<BigInt>>, i: usize, j: usize| {
        for row in h.iter_mut().chain(u.iter_mut()) {
            row.swap(i, j);
        }
        u_inv.swap(i, j);
    };
    let mut p = 0;
    for r in 0..rows {
        if p == cols {
            break;
        }
        loop {
            let nz: Vec<usize> = (p..cols).filter(|&j| !h[r][j].is_zero()).collect();
            if nz.is_empty() {
                break;
            }
            let m = *nz.iter().min_by_key(|&&j| h[r][j].abs()).unwrap();
            swap_col(&mut h, &mut u, &mut u_inv, p, m);
            if nz.len() == 1 {
                break;
            }
            for j in p + 1..cols {
                if !h[r][j].is_zero() {
                    let q = h[r][j].div_floor(&h[r][p]);
                    sub_col(&mut h, &mut u, &mut u_inv, j, p, &q);
                }
            }
        }
        if h[r][p].is_zero() {
            continue;
        }
        if h[r][p].is_negative() {
            for row in h.iter_mut().chain(u.iter_mut()) {
                row[p] = -&row[p];
            }
            for x in u_inv[p].iter_mut() {
                *x = -&*x;
            }
        }
        pivots.push((r, p));
        p += 1;
    }
    ColumnEchelon { h, u, u_inv, pivots }
}

/// Smith invariant factors of an integer matrix (nonzero ones, ascending).
pub fn invariant_factors(a: &[Vec<BigInt>], cols: usize) -> Vec<BigInt> {
    let mut m = a.to_vec();
    let rows = m.len();
    let mut out = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // pivot: smallest nonzero entry in the trailing block
        let Some((pi, pj)) = (t..rows)
            .flat_map(|i| (t..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| !m[i][j].is_zero())
            .min_by_key(|&(i, j)| m[i][j].abs())
        else {
            break;
        };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        let mut clean = true;
        for i in t + 1..rows {
            let q = m[i][t].div_floor(&m[t][t]);
            if !q.is_zero() {
                let rt = m[t].clone();
                for (x, y) in m[i].iter_mut().zip(&rt) {
                    *x -= &q * y;
                }
            }
            clean &= m[i][t].is_zero();
        }
        for j in t + 1..cols {
            let q = m[t][j].div_floor(&m[t][t]);
            if !q.is_zero() {
                for row in m.iter_mut() {
                    let v = &row[t] * &q;
                    row[j] -= v;
                }
            }
            clean &= m[t][j].is_zero();
        }
        if !clean {
            continue;
        }
        // divisibility: fold any non-multiple into row t and retry
        let d = m[t][t].clone();
        if let Some(i) = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !m[i][j].is_multiple_of(&d))) {
            let ri = m[i].clone();
            for (x, y) in m[t].iter_mut().zip(&ri) {
                *x += y;
            }
            continue;
        }
        out.push(d.abs());
        t += 1;
    }
    out
}

/// Saturated integer basis of {x ∈ L : x·v = 0 for all v}.
pub fn orthogonal_complement(l: &GramLattice, vectors: &[LatticeVector]) -> Result<Vec<LatticeVector>, LatticeError> {
    let mut rows = Vec::with_capacity(vectors.len());
    for v in vectors {
        l.check(v.len())?;
        rows.push((0..l.rank).map(|j| l.pairing(v, &LatticeVector::unit(l.rank, j))).collect::<Result<Vec<_>, _>>()?);
    }
    let basis = column_echelon(&rows, l.rank).kernel();
    debug_assert!(basis.iter().all(|b| vectors.iter().all(|v| l.pairing(b, v).map(|p| p.is_zero()).unwrap_or(false))));
    Ok(basis)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassQuery {
    pub span: Vec<LatticeVector>,
    #[serde(serialize_with = "big_json")]
    pub square: BigInt,
    pub dots: Vec<DotConstraint>,
    pub bound: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DotConstraint {
    pub vector: LatticeVector,
    #[serde(serialize_with = "big_json")]
    pub value: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModCertificate {
    pub modulus: u64,
    pub lhs_residues: Vec<u64>,
    pub rhs_residue: u64,
    /// "quadratic" or "linear:<constraint index>"
    pub form: String,
}

/// The search after substituting the integer solutions x = x₀ + N·t of the
/// dot constraints: Q(t) = tᵀMt + lᵀt + c.
#[derive(Debug, Clone, Serialize)]
pub struct Reduction {
    pub linear_feasible: bool,
    #[serde(serialize_with = "big_vec_json")]
    pub particular: Vec<BigInt>,
    pub directions: Vec<LatticeVector>,
    #[serde(serialize_with = "big_mat_json")]
    pub quadratic: Vec<Vec<BigInt>>,
    #[serde(serialize_with = "big_vec_json")]
    pub linear: Vec<BigInt>,
    #[serde(serialize_with = "big_json")]
    pub constant: BigInt,
    pub display: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub bound: u64,
    /// coefficient tuples, sorted
    pub solutions: Vec<LatticeVector>,
    pub certificate: Option<ModCertificate>,
    pub reduction: Reduction,
    /// true when no integer solution exists at any bound
    pub unsat: bool,
}

fn residue(x: &BigInt, m: u64) -> u64 {
    x.mod_floor(&BigInt::from(m)).to_u64().expect("residue below modulus")
}

fn format_form(q: &[Vec<BigInt>], l: &[BigInt], c: &BigInt) -> String {
    let mut terms: Vec<String> = Vec::new();
    let f = q.len();
    for i in 0..f {
        for j in i..f {
            let coef = if i == j { q[i][i].clone() } else { &q[i][j] * 2 };
            if !coef.is_zero() {
                terms.push(if i == j { format!("{coef}*t{}^2", i + 1) } else { format!("{coef}*t{}*t{}", i + 1, j + 1) });
            }
        }
    }
    for (i, li) in l.iter().enumerate() {
        if !li.is_zero() {
            terms.push(format!("{li}*t{}", i + 1));
        }
    }
    if !c.is_zero() || terms.is_empty() {
        terms.push(c.to_string());
    }
    terms.join(" + ").replace("+ -", "- ")
}

/// Exhaustive search for x ∈ Zᵏ, |xᵢ| ≤ bound, with (Σxᵢsᵢ)² = square and
/// (Σxᵢsᵢ)·w = value for each dot constraint, plus a modular UNSAT
/// certificate when one exists for some m ≤ [`MAX_MODULUS`].
pub fn constrained_class_search(l: &GramLattice, q: &ClassQuery) -> Result<SearchResult, LatticeError> {
    if q.bound < 1 {
        return Err(LatticeError::InvalidArgument("bound must be ≥ 1".into()));
    }
    let k = q.span.len();
    let g = l.gram_of(&q.span)?;
    let mut a = Vec::with_capacity(q.dots.len());
    for d in &q.dots {
        a.push(q.span.iter().map(|s| l.pairing(s, &d.vector)).collect::<Result<Vec<_>, _>>()?);
    }
    let d: Vec<BigInt> = q.dots.iter().map(|d| d.value.clone()).collect();

    // per-constraint gcd obstruction
    let mut certificate = None;
    for (i, row) in a.iter().enumerate() {
        let g_row = row.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        let m = (2..=MAX_MODULUS).find(|&m| {
            let mb = BigInt::from(m);
            g_row.is_multiple_of(&mb) && !d[i].is_multiple_of(&mb)
        });
        if let Some(m) = m {
            certificate = Some(ModCertificate { modulus: m, lhs_residues: vec![0], rhs_residue: residue(&d[i], m), form: format!("linear:{i}") });
            break;
        }
    }

    let ech = column_echelon(&a, k);
    let y0 = solve_echelon(&ech, &d);
    let directions = ech.kernel();
    let Some(y0) = y0 else {
        let reduction = Reduction {
            linear_feasible: false,
            particular: vec![],
            directions,
            quadratic: vec![],
            linear: vec![],
            constant: BigInt::zero(),
            display: "no integer solution of the dot constraints".into(),
        };
        return Ok(SearchResult { bound: q.bound, solutions: vec![], certificate, reduction, unsat: true });
    };
    let x0: Vec<BigInt> = (0..k).map(|i| (0..k).map(|j| &ech.u[i][j] * &y0[j]).sum()).collect();
    let x0v = LatticeVector::new(x0.clone());
    let gx = |v: &[BigInt], w: &[BigInt]| -> BigInt {
        let mut s = BigInt::zero();
        for i in 0..k {
            for j in 0..k {
                s += &v[i] * &g[i][j] * &w[j];
            }
        }
        s
    };
    let quad: Vec<Vec<BigInt>> = directions.iter().map(|u| directions.iter().map(|v| gx(&u.coords, &v.coords)).collect()).collect();
    let lin: Vec<BigInt> = directions.iter().map(|u| gx(&u.coords, &x0) * 2).collect();
    let constant = gx(&x0, &x0);
    let reduction = Reduction {
        linear_feasible: true,
        particular: x0.clone(),
        directions: directions.clone(),
        quadratic: quad.clone(),
        linear: lin.clone(),
        constant: constant.clone(),
        display: format!("{} = {}", format_form(&quad, &lin, &constant), q.square),
    };

    if certificate.is_none() {
        certificate = quadratic_certificate(&quad, &lin, &constant, &q.square);
    }

    let solutions = enumerate_reduced(&ech, &x0v, &directions, &quad, &lin, &constant, &q.square, q.bound)?;
    // direct re-verification against the original constraints
    for x in &solutions {
        let v = LatticeVector::combination(&q.span, &x.coords);
        debug_assert_eq!(l.pairing(&v, &v)?, q.square);
        debug_assert!(q.dots.iter().all(|c| l.pairing(&v, &c.vector).map(|p| p == c.value).unwrap_or(false)));
    }
    let unsat = certificate.is_some();
    Ok(SearchResult { bound: q.bound, solutions, certificate, reduction, unsat })
}

/// Particular solution y of H·y = d (free coordinates 0), if integral.
fn solve_echelon(ech: &ColumnEchelon, d: &[BigInt]) -> Option<Vec<BigInt>> {
    let k = ech.u.len();
    let mut y = vec![BigInt::zero(); k];
    let mut next = 0;
    for (r, row) in ech.h.iter().enumerate() {
        let acc: BigInt = (0..next).map(|j| &row[j] * &y[j]).sum();
        let rest = &d[r] - acc;
        if next < ech.rank() && ech.pivots[next].0 == r {
            let p = &row[next];
            if !rest.is_multiple_of(p) {
                return None;
            }
            y[next] = rest / p;
            next += 1;
        } else if !rest.is_zero() {
            return None;
        }
    }
    Some(y)
}

fn quadratic_certificate(q: &[Vec<BigInt>], l: &[BigInt], c: &BigInt, square: &BigInt) -> Option<ModCertificate> {
    let f = q.len() as u32;
    for m in 2..=MAX_MODULUS {
        if m.checked_pow(f).is_none_or(|size| size > MAX_RESIDUE_TABLE) {
            break;
        }
        let qm: Vec<Vec<u64>> = q.iter().map(|row| row.iter().map(|x| residue(x, m)).collect()).collect();
        let lm: Vec<u64> = l.iter().map(|x| residue(x, m)).collect();
        let cm = residue(c, m);
        let mut seen = vec![false; m as usize];
        let mut t = vec![0u64; f as usize];
        loop {
            let mut v = cm;
            for i in 0..t.len() {
                v += lm[i] * t[i] % m;
                for j in 0..t.len() {
                    v += qm[i][j] * t[i] % m * t[j] % m;
                }
            }
            seen[(v % m) as usize] = true;
            // odometer over (Z/m)^f
            let mut i = 0;
            while i < t.len() {
                t[i] += 1;
                if t[i] < m {
                    break;
                }
                t[i] = 0;
                i += 1;
            }
            if i == t.len() {
                break;
            }
        }
        let rhs = residue(square, m);
        if !seen[rhs as usize] {
            let lhs_residues = (0..m).filter(|&r| seen[r as usize]).collect();
            return Some(ModCertificate { modulus: m, lhs_residues, rhs_residue: rhs, form: "quadratic".into() });
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn enumerate_reduced(
    ech: &ColumnEchelon,
    x0: &LatticeVector,
    dirs: &[LatticeVector],
    quad: &[Vec<BigInt>],
    lin: &[BigInt],
    constant: &BigInt,
    square: &BigInt,
    bound: u64,
) -> Result<Vec<LatticeVector>, LatticeError> {
    let f = dirs.len();
    let k = x0.len();
    let b = BigInt::from(bound);
    let in_box = |x: &LatticeVector| x.coords.iter().all(|c| c.abs() <= b);
    let point = |t: &[BigInt]| LatticeVector::combination(dirs, t).add(x0);
    let mut out = BTreeSet::new();
    if f == 0 {
        let v = constant.clone();
        if &v == square && in_box(x0) {
            out.insert(x0.clone());
        }
        return Ok(out.into_iter().collect());
    }
    // t = (U⁻¹x)[rank..], so |t_j| ≤ Σᵢ|U⁻¹_{ji}|(bound + |x0ᵢ|)
    let rank = ech.rank();
    let t_box: Vec<BigInt> = (0..f)
        .map(|j| (0..k).map(|i| ech.u_inv[rank + j][i].abs() * (&b + x0.coords[i].abs())).sum())
        .collect();
    let outer: u128 = t_box[..f - 1].iter().map(|w| w.to_u128().map_or(u128::MAX, |w| 2 * w + 1)).fold(1u128, |a, w| a.saturating_mul(w));
    if outer > MAX_ENUMERATION {
        return Err(LatticeError::InvalidArgument(format!("enumeration space {outer} exceeds {MAX_ENUMERATION}")));
    }
    let last = f - 1;
    let alpha = &quad[last][last];
    let mut t: Vec<BigInt> = t_box[..last].iter().map(|w| -w).collect();
    t.push(BigInt::zero());
    loop {
        // α t_f² + β t_f + γ = 0
        let mut beta = lin[last].clone();
        let mut gamma = constant - square;
        for i in 0..last {
            beta += &quad[last][i] * &t[i] * 2;
            gamma += &lin[i] * &t[i];
            for j in 0..last {
                gamma += &quad[i][j] * &t[i] * &t[j];
            }
        }
        let mut candidates = Vec::new();
        if !alpha.is_zero() {
            let disc: BigInt = &beta * &beta - alpha * &gamma * 4;
            if !disc.is_negative() {
                let s = disc.sqrt();
                if &s * &s == disc {
                    for root in [-&beta + &s, -&beta - &s] {
                        let den = alpha * 2;
                        if root.is_multiple_of(&den) {
                            candidates.push(root / den);
                        }
                    }
                }
            }
        } else if !beta.is_zero() {
            if gamma.is_multiple_of(&beta) {
                candidates.push(-(&gamma / &beta));
            }
        } else if gamma.is_zero() {
            let w = &t_box[last];
            let mut v = -w.clone();
            while &v <= w {
                candidates.push(v.clone());
                v += 1;
            }
        }
        for c in candidates {
            t[last] = c;
            let x = point(&t);
            if in_box(&x) {
                out.insert(x);
            }
        }
        // odometer over the outer box
        let mut i = 0;
        while i < last {
            t[i] += 1;
            if t[i] <= t_box[i] {
                break;
            }
            t[i] = -t_box[i].clone();
            i += 1;
        }
        if i == last {
            break;
        }
    }
    Ok(out.into_iter().collect())
}

/// The two matching systems: C² = −2, C·(−K₊) = 0 and E² = 0, E·(−K₊) = 0,
/// E·(−¼K₋) = 2, both over span{Π̃, −K₊, −¼K₋}.
pub fn matching_queries(emb: &EmbeddingRecord, bound: u64) -> [ClassQuery; 2] {
    let kplus = emb.images[1].clone();
    let kminus = emb.images[2].clone();
    let c_class = ClassQuery {
        span: emb.images.clone(),
        square: BigInt::from(-2),
        dots: vec![DotConstraint { vector: kplus.clone(), value: BigInt::zero() }],
        bound,
    };
    let e_class = ClassQuery {
        span: emb.images.clone(),
        square: BigInt::zero(),
        dots: vec![
            DotConstraint { vector: kplus, value: BigInt::zero() },
            DotConstraint { vector: kminus, value: BigInt::from(2) },
        ],
        bound,
    };
    [c_class, e_class]
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericDirection {
    pub k: RationalVector,
    #[serde(serialize_with = "rational_json")]
    pub square: BigRational,
    /// k·k = 1 after exact rescaling
    pub normalized: bool,
    pub samples: usize,
    #[serde(serialize_with = "rational_vec_json")]
    pub avoid_pairings: Vec<BigRational>,
    /// avoid list was empty
    pub vacuous: bool,
}

fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let (n, d) = (q.numer(), q.denom());
    let (sn, sd) = (n.sqrt(), d.sqrt());
    (&sn * &sn == *n && &sd * &sd == *d).then(|| BigRational::new(sn, sd))
}

/// A vector k in span(basis) with k·k > 0 and k·C ≠ 0 for every C in `avoid`.
pub fn generic_direction(
    l: &GramLattice,
    basis: &[LatticeVector],
    avoid: &[LatticeVector],
    seed: u64,
) -> Result<GenericDirection, LatticeError> {
    for v in basis.iter().chain(avoid) {
        l.check(v.len())?;
    }
    for (index, c) in avoid.iter().enumerate() {
        let mut all_zero = true;
        for b in basis {
            all_zero &= l.pairing(b, c)?.is_zero();
        }
        if all_zero {
            return Err(LatticeError::UnavoidableHyperplane { index });
        }
    }
    let avoid_r: Vec<RationalVector> = avoid.iter().map(LatticeVector::to_rational).collect();
    let accept = |k: &RationalVector| -> Result<Option<Vec<BigRational>>, LatticeError> {
        if !l.pairing_rational(k, k)?.is_positive() {
            return Ok(None);
        }
        let p: Vec<BigRational> = avoid_r.iter().map(|c| l.pairing_rational(k, c)).collect::<Result<_, _>>()?;
        Ok(p.iter().all(|x| !x.is_zero()).then_some(p))
    };
    let finish = |k: RationalVector, pairings: Vec<BigRational>, samples: usize| -> Result<GenericDirection, LatticeError> {
        let square = l.pairing_rational(&k, &k)?;
        let (k, pairings, normalized, square) = match rational_sqrt(&square) {
            Some(s) => {
                let inv = s.recip();
                let pairings = pairings.iter().map(|p| p * &inv).collect();
                (k.scale(&inv), pairings, true, BigRational::one())
            }
            None => (k, pairings, false, square),
        };
        Ok(GenericDirection { k, square, normalized, samples, avoid_pairings: pairings, vacuous: avoid.is_empty() })
    };
    let mut samples = 0;
    for b in basis {
        samples += 1;
        let k = b.to_rational();
        if let Some(p) = accept(&k)? {
            return finish(k, p, samples);
        }
    }
    // a positive direction from the congruence diagonalization of the span
    let g: Vec<Vec<BigRational>> = l
        .gram_of(basis)?
        .into_iter()
        .map(|row| row.into_iter().map(BigRational::from_integer).collect())
        .collect();
    let (diag, p) = congruence_diagonalize(&g);
    let j = diag.iter().position(|d| d.is_positive()).ok_or(LatticeError::NoPositiveDirection)?;
    let to_l = |coeffs: &[BigRational]| {
        let mut k = RationalVector::zero(l.rank);
        for (c, b) in coeffs.iter().zip(basis) {
            if !c.is_zero() {
                k.axpy(c, &b.to_rational());
            }
        }
        k
    };
    let base = to_l(&p[j]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        samples += 1;
        let w: Vec<BigRational> = (0..basis.len()).map(|_| BigRational::from_integer(BigInt::from(rng.random_range(-3i64..=3)))).collect();
        let w = to_l(&w);
        let mut eps = BigRational::one();
        loop {
            let mut k = base.clone();
            k.axpy(&eps, &w);
            if l.pairing_rational(&k, &k)?.is_positive() {
                if let Some(p) = accept(&k)? {
                    return finish(k, p, samples);
                }
                break;
            }
            eps /= BigRational::from_integer(BigInt::from(2));
        }
    }
    Err(LatticeError::InvalidArgument("no admissible direction found after 10000 samples".into()))
}
