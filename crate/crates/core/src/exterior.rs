//! Constant-coefficient exterior algebra on ℝ⁷.
//!
//! A k-form is a dense vector over the increasing index tuples of length k in
//! lexicographic order; index sets are carried internally as 7-bit masks.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SMatrix};

pub const DIM: usize = 7;

pub type Mat7 = SMatrix<f64, 7, 7>;

struct Tables {
    /// masks of each degree in lexicographic tuple order
    basis: Vec<Vec<u8>>,
    /// position of a mask within its degree
    index: [usize; 128],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut basis = vec![Vec::new(); DIM + 1];
        fn rec(start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<u8>) {
            if cur.len() == k {
                out.push(cur.iter().fold(0u8, |m, &i| m | (1 << i)));
                return;
            }
            for i in start..DIM {
                cur.push(i);
                rec(i + 1, k, cur, out);
                cur.pop();
            }
        }
        for (k, b) in basis.iter_mut().enumerate() {
            rec(0, k, &mut Vec::new(), b);
        }
        let mut index = [usize::MAX; 128];
        for b in &basis {
            for (i, &m) in b.iter().enumerate() {
                index[m as usize] = i;
            }
        }
        Tables { basis, index }
    })
}

/// Masks of degree k in coefficient order.
pub fn basis(k: usize) -> &'static [u8] {
    &tables().basis[k]
}

/// Coefficient position of an index mask.
pub fn position(mask: u8) -> usize {
    tables().index[mask as usize]
}

/// Number of k-forms in the basis, C(7, k).
pub fn dim(k: usize) -> usize {
    basis(k).len()
}

/// Sorted 0-based indices of a mask.
pub fn indices(mask: u8) -> Vec<usize> {
    (0..DIM).filter(|i| mask & (1 << i) != 0).collect()
}

/// Mask of a list of 0-based indices (panics on repeats).
pub fn mask_of(idx: &[usize]) -> u8 {
    idx.iter().fold(0u8, |m, &i| {
        assert!(m & (1 << i) == 0, "repeated index");
        m | (1 << i)
    })
}

/// Sign of e^A ∧ e^B → ±e^{A∪B}, for disjoint masks.
pub fn wedge_sign(a: u8, b: u8) -> f64 {
    debug_assert_eq!(a & b, 0);
    // count pairs (i ∈ A, j ∈ B) with i > j
    let mut inv = 0u32;
    for j in indices(b) {
        inv += (a >> (j + 1)).count_ones();
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A constant-coefficient k-form on ℝ⁷.
#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl Form {
    pub fn zero(degree: usize) -> Self {
        Form { degree, coeffs: vec![0.0; dim(degree)] }
    }

    /// Basis element e^{i₁…i_k} from 1-based indices in any order.
    pub fn basis_element(one_based: &[usize]) -> Self {
        let zero_based: Vec<usize> = one_based.iter().map(|i| i - 1).collect();
        let mask = mask_of(&zero_based);
        let mut f = Form::zero(zero_based.len());
        // sign of the sorting permutation
        let mut inv = 0;
        for a in 0..zero_based.len() {
            for b in a + 1..zero_based.len() {
                if zero_based[a] > zero_based[b] {
                    inv += 1;
                }
            }
        }
        f.coeffs[position(mask)] = if inv % 2 == 0 { 1.0 } else { -1.0 };
        f
    }

    pub fn from_coeffs(degree: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), dim(degree), "coefficient count for degree {degree}");
        Form { degree, coeffs }
    }

    /// Coefficient on the basis element with the given mask.
    pub fn coeff(&self, mask: u8) -> f64 {
        self.coeffs[position(mask)]
    }

    /// Evaluation on an ordered tuple of 1-based basis vectors (antisymmetric
    /// extension of the stored coefficients).
    pub fn eval_indices(&self, one_based: &[usize]) -> f64 {
        assert_eq!(one_based.len(), self.degree);
        let zero_based: Vec<usize> = one_based.iter().map(|i| i - 1).collect();
        let mut mask = 0u8;
        for &i in &zero_based {
            if mask & (1 << i) != 0 {
                return 0.0;
            }
            mask |= 1 << i;
        }
        let e = Form::basis_element(one_based);
        // e carries the sorting sign at the same position
        self.coeff(mask) * e.coeff(mask)
    }

    pub fn scale(&self, c: f64) -> Self {
        Form { degree: self.degree, coeffs: self.coeffs.iter().map(|x| c * x).collect() }
    }

    pub fn add(&self, other: &Form) -> Self {
        assert_eq!(self.degree, other.degree);
        Form {
            degree: self.degree,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Form) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Euclidean norm of the coefficient vector (the norm of the identity metric).
    pub fn euclidean_norm(&self) -> f64 {
        self.coeffs.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn wedge(&self, other: &Form) -> Form {
        let k = self.degree + other.degree;
        assert!(k <= DIM, "wedge of degree {k} vanishes on R^7");
        let mut out = Form::zero(k);
        for (i, &a) in basis(self.degree).iter().enumerate() {
            let ca = self.coeffs[i];
            if ca == 0.0 {
                continue;
            }
            for (j, &b) in basis(other.degree).iter().enumerate() {
                let cb = other.coeffs[j];
                if cb == 0.0 || a & b != 0 {
                    continue;
                }
                out.coeffs[position(a | b)] += wedge_sign(a, b) * ca * cb;
            }
        }
        out
    }

    /// Interior product v ⌟ α.
    pub fn interior(&self, v: &[f64; DIM]) -> Form {
        assert!(self.degree >= 1);
        let mut out = Form::zero(self.degree - 1);
        for (i, &m) in basis(self.degree).iter().enumerate() {
            let c = self.coeffs[i];
            if c == 0.0 {
                continue;
            }
            for (pos, idx) in indices(m).into_iter().enumerate() {
                if v[idx] == 0.0 {
                    continue;
                }
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                out.coeffs[position(m & !(1 << idx))] += sign * v[idx] * c;
            }
        }
        out
    }

    /// Pullback A*α, (A*α)(v₁,…) = α(Av₁,…).
    pub fn pullback(&self, a: &Mat7) -> Form {
        let k = self.degree;
        let mut out = Form::zero(k);
        for (i, &mi) in basis(k).iter().enumerate() {
            let cols = indices(mi);
            let mut s = 0.0;
            for (j, &mj) in basis(k).iter().enumerate() {
                let c = self.coeffs[j];
                if c != 0.0 {
                    s += c * minor(a, &indices(mj), &cols);
                }
            }
            out.coeffs[i] = s;
        }
        out
    }

    /// The top-degree coefficient relative to e^{1…7}.
    pub fn top_coeff(&self) -> f64 {
        assert_eq!(self.degree, DIM);
        self.coeffs[0]
    }
}

/// Determinant of the submatrix of `m` on the given rows and columns.
pub fn minor(m: &Mat7, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    match k {
        0 => 1.0,
        1 => m[(rows[0], cols[0])],
        2 => m[(rows[0], cols[0])] * m[(rows[1], cols[1])] - m[(rows[0], cols[1])] * m[(rows[1], cols[0])],
        _ => DMatrix::from_fn(k, k, |r, c| m[(rows[r], cols[c])]).determinant(),
    }
}

/// k-th compound matrix: entry (I, J) is the minor on rows I, columns J.
pub fn compound(m: &Mat7, k: usize) -> DMatrix<f64> {
    let b = basis(k);
    DMatrix::from_fn(b.len(), b.len(), |i, j| minor(m, &indices(b[i]), &indices(b[j])))
}

/// Sign ε(I, Iᶜ) with e^I ∧ e^{Iᶜ} = ε e^{1…7}.
pub fn complement_sign(mask: u8) -> f64 {
    wedge_sign(mask, !mask & 0x7f)
}
