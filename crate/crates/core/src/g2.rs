//! Pointwise G₂ linear algebra on ℝ⁷.
//!
//! The bilinear form B(u, v)·e^{1…7} = (1/6)(u⌟φ)∧(v⌟φ)∧φ of a positive
//! 3-form equals g·vol, so g = B/det(B)^{1/9}. Orientation e^{1…7} is fixed;
//! forms whose B is not positive definite are rejected, never flipped.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::exterior::{self, complement_sign, compound, Form, Mat7, DIM};

/// Default central-difference step for the Θ linearization check.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Relative threshold below which det(B) counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum G2Error {
    #[error("3-form is degenerate or not positive (det B = {det:e})")]
    DegenerateForm { det: f64 },
    #[error("metric is not positive definite")]
    NonPositiveMetric,
}

macro_rules! form35 {
    ($name:ident, $deg:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub [f64; 35]);

        impl $name {
            pub const DEGREE: usize = $deg;

            pub fn zero() -> Self {
                $name([0.0; 35])
            }

            pub fn to_form(&self) -> Form {
                Form::from_coeffs($deg, self.0.to_vec())
            }

            pub fn from_form(f: &Form) -> Self {
                assert_eq!(f.degree, $deg);
                let mut c = [0.0; 35];
                c.copy_from_slice(&f.coeffs);
                $name(c)
            }

            pub fn scale(&self, s: f64) -> Self {
                let mut c = self.0;
                c.iter_mut().for_each(|x| *x *= s);
                $name(c)
            }

            pub fn add(&self, o: &Self) -> Self {
                let mut c = self.0;
                c.iter_mut().zip(o.0.iter()).for_each(|(x, y)| *x += y);
                $name(c)
            }

            pub fn sub(&self, o: &Self) -> Self {
                self.add(&o.scale(-1.0))
            }

            pub fn norm(&self) -> f64 {
                self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
            }

            pub fn pullback(&self, a: &Mat7) -> Self {
                Self::from_form(&self.to_form().pullback(a))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                self.0.as_slice().serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let v = Vec::<f64>::deserialize(d)?;
                if v.len() != 35 {
                    return Err(serde::de::Error::invalid_length(v.len(), &"35 coefficients"));
                }
                let mut c = [0.0; 35];
                c.copy_from_slice(&v);
                Ok($name(c))
            }
        }
    };
}

form35!(ThreeForm7, 3);
form35!(FourForm7, 4);

/// φ₀ = e¹²³ + e¹⁴⁵ + e¹⁶⁷ + e²⁴⁶ − e²⁵⁷ − e³⁴⁷ − e³⁵⁶.
pub fn phi0() -> ThreeForm7 {
    let terms: [([usize; 3], f64); 7] = [
        ([1, 2, 3], 1.0),
        ([1, 4, 5], 1.0),
        ([1, 6, 7], 1.0),
        ([2, 4, 6], 1.0),
        ([2, 5, 7], -1.0),
        ([3, 4, 7], -1.0),
        ([3, 5, 6], -1.0),
    ];
    let mut f = Form::zero(3);
    for (idx, s) in terms {
        f = f.add(&Form::basis_element(&idx).scale(s));
    }
    ThreeForm7::from_form(&f)
}

/// Metric induced by a positive 3-form, with its volume coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric7 {
    pub g: Mat7,
    pub vol: f64,
}

impl Metric7 {
    pub fn identity() -> Self {
        Metric7 { g: Mat7::identity(), vol: 1.0 }
    }

    /// Wraps an arbitrary symmetric matrix, vol = det(g)^{1/2}.
    pub fn from_matrix(g: Mat7) -> Result<Self, G2Error> {
        if g.cholesky().is_none() {
            return Err(G2Error::NonPositiveMetric);
        }
        Ok(Metric7 { g, vol: g.determinant().sqrt() })
    }

    fn inverse(&self) -> Result<Mat7, G2Error> {
        self.g.cholesky().map(|c| c.inverse()).ok_or(G2Error::NonPositiveMetric)
    }

    /// ⟨α, β⟩_g on forms of equal degree.
    pub fn inner(&self, a: &Form, b: &Form) -> Result<f64, G2Error> {
        assert_eq!(a.degree, b.degree);
        let raised = raise(&self.inverse()?, a);
        Ok(raised.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum())
    }
}

fn raise(ginv: &Mat7, a: &Form) -> Vec<f64> {
    let c = compound(ginv, a.degree);
    (c * DVector::from_column_slice(&a.coeffs)).iter().copied().collect()
}

fn unit(i: usize) -> [f64; DIM] {
    let mut v = [0.0; DIM];
    v[i] = 1.0;
    v
}

/// The matrix B of (1/6)(u⌟φ)∧(v⌟φ)∧φ relative to e^{1…7}.
pub fn bilinear_b(phi: &ThreeForm7) -> Mat7 {
    let f = phi.to_form();
    let contractions: Vec<Form> = (0..DIM).map(|i| f.interior(&unit(i))).collect();
    let mut b = Mat7::zeros();
    for i in 0..DIM {
        for j in i..DIM {
            let v = contractions[i].wedge(&contractions[j]).wedge(&f).top_coeff() / 6.0;
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

/// g_φ = B/det(B)^{1/9}, vol_φ = det(B)^{1/9}.
pub fn induced_metric(phi: &ThreeForm7) -> Result<Metric7, G2Error> {
    let b = bilinear_b(phi);
    let det = b.determinant();
    let scale = b.amax();
    if !(det > DEGENERACY_TOL * scale.powi(7)) || b.cholesky().is_none() {
        return Err(G2Error::DegenerateForm { det });
    }
    let vol = det.powf(1.0 / 9.0);
    Ok(Metric7 { g: b / vol, vol })
}

/// Hodge star for the given metric and orientation e^{1…7}.
pub fn hodge_star(metric: &Metric7, form: &Form) -> Result<Form, G2Error> {
    let ginv = metric.inverse()?;
    let raised = raise(&ginv, form);
    let root = metric.g.determinant().sqrt();
    let k = form.degree;
    let mut out = Form::zero(DIM - k);
    for (i, &m) in exterior::basis(k).iter().enumerate() {
        let comp = !m & 0x7f;
        out.coeffs[exterior::position(comp)] = root * complement_sign(m) * raised[i];
    }
    Ok(out)
}

/// Θ(φ) = ⋆_φ φ.
pub fn theta(phi: &ThreeForm7) -> Result<FourForm7, G2Error> {
    let m = induced_metric(phi)?;
    Ok(FourForm7::from_form(&hodge_star(&m, &phi.to_form())?))
}

/// Components of a 3-form in Ω³₁ ⊕ Ω³₇ ⊕ Ω³₂₇ for a given positive φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormDecomposition {
    pub pi1: ThreeForm7,
    pub pi7: ThreeForm7,
    pub pi27: ThreeForm7,
}

/// Precomputed projection data for one φ.
pub struct Projector {
    metric: Metric7,
    phi: Form,
    phi_sq: f64,
    gens: Vec<Form>,
    gram_inv: DMatrix<f64>,
}

impl Projector {
    pub fn new(phi: &ThreeForm7) -> Result<Self, G2Error> {
        let metric = induced_metric(phi)?;
        let f = phi.to_form();
        let psi = hodge_star(&metric, &f)?;
        let gens: Vec<Form> = (0..DIM).map(|a| psi.interior(&unit(a))).collect();
        let mut gram = DMatrix::zeros(DIM, DIM);
        for a in 0..DIM {
            for b in 0..DIM {
                gram[(a, b)] = metric.inner(&gens[a], &gens[b])?;
            }
        }
        let gram_inv = gram.try_inverse().ok_or(G2Error::DegenerateForm { det: 0.0 })?;
        let phi_sq = metric.inner(&f, &f)?;
        Ok(Projector { metric, phi: f, phi_sq, gens, gram_inv })
    }

    pub fn metric(&self) -> &Metric7 {
        &self.metric
    }

    pub fn decompose(&self, gamma: &ThreeForm7) -> Result<FormDecomposition, G2Error> {
        let g = gamma.to_form();
        let pi1 = self.phi.scale(self.metric.inner(&g, &self.phi)? / self.phi_sq);
        let rhs = DVector::from_iterator(
            DIM,
            self.gens.iter().map(|x| self.metric.inner(x, &g)).collect::<Result<Vec<_>, _>>()?,
        );
        let c = &self.gram_inv * rhs;
        let mut pi7 = Form::zero(3);
        for (a, x) in self.gens.iter().enumerate() {
            pi7 = pi7.add(&x.scale(c[a]));
        }
        let pi27 = g.sub(&pi1).sub(&pi7);
        Ok(FormDecomposition {
            pi1: ThreeForm7::from_form(&pi1),
            pi7: ThreeForm7::from_form(&pi7),
            pi27: ThreeForm7::from_form(&pi27),
        })
    }

    /// 35×35 matrices of π₁, π₇, π₂₇ acting on coefficient vectors.
    pub fn matrices(&self) -> Result<[DMatrix<f64>; 3], G2Error> {
        let mut mats = [DMatrix::zeros(35, 35), DMatrix::zeros(35, 35), DMatrix::zeros(35, 35)];
        for j in 0..35 {
            let mut e = ThreeForm7::zero();
            e.0[j] = 1.0;
            let d = self.decompose(&e)?;
            for (m, p) in mats.iter_mut().zip([d.pi1, d.pi7, d.pi27]) {
                m.set_column(j, &DVector::from_column_slice(&p.0));
            }
        }
        Ok(mats)
    }
}

/// Decomposition of γ relative to the positive form φ.
pub fn project_3form(phi: &ThreeForm7, gamma: &ThreeForm7) -> Result<FormDecomposition, G2Error> {
    Projector::new(phi)?.decompose(gamma)
}

/// Numerical rank by singular values above `tol`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
}

/// Candidate derivative of Θ at φ₀ along γ: (4/3)⋆π₁γ + ⋆π₇γ − ⋆π₂₇γ.
pub fn linearization_candidate(gamma: &ThreeForm7) -> Result<FourForm7, G2Error> {
    linear_map(gamma, 4.0 / 3.0)
}

fn linear_map(gamma: &ThreeForm7, c1: f64) -> Result<FourForm7, G2Error> {
    let p = Projector::new(&phi0())?;
    let d = p.decompose(gamma)?;
    let id = Metric7::identity();
    let s = |f: &ThreeForm7| hodge_star(&id, &f.to_form());
    let out = s(&d.pi1)?.scale(c1).add(&s(&d.pi7)?).sub(&s(&d.pi27)?);
    Ok(FourForm7::from_form(&out))
}

/// Central difference [Θ(φ₀ + hγ) − Θ(φ₀ − hγ)]/(2h).
pub fn central_difference(gamma: &ThreeForm7, h: f64) -> Result<FourForm7, G2Error> {
    let p = phi0();
    let plus = theta(&p.add(&gamma.scale(h)))?;
    let minus = theta(&p.sub(&gamma.scale(h)))?;
    Ok(plus.sub(&minus).scale(0.5 / h))
}

/// ‖central difference − candidate linear map‖ (Euclidean coefficients).
pub fn linearization_residual(gamma: &ThreeForm7, h: f64) -> Result<f64, G2Error> {
    Ok(central_difference(gamma, h)?.sub(&linearization_candidate(gamma)?).norm())
}

/// Residuals of the two readings of the π₁ coefficient: with the factor 4/3
/// on ⋆π₁γ and with it dropped. The first is the convention that matches.
pub fn convention_residuals(gamma: &ThreeForm7, h: f64) -> Result<(f64, f64), G2Error> {
    let d = central_difference(gamma, h)?;
    Ok((d.sub(&linear_map(gamma, 4.0 / 3.0)?).norm(), d.sub(&linear_map(gamma, 1.0)?).norm()))
}

/// Least-squares slope of log(residual) against log(h).
pub fn convergence_order(gamma: &ThreeForm7, steps: &[f64]) -> Result<f64, G2Error> {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .map(|&h| linearization_residual(gamma, h).map(|r| (h.ln(), r.ln())))
        .collect::<Result<_, _>>()?;
    Ok(log_log_slope(&pts))
}

pub(crate) fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Random 3-form with unit Euclidean norm.
pub fn random_unit_form<R: Rng>(rng: &mut R) -> ThreeForm7 {
    let mut c = [0.0; 35];
    for x in c.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    let f = ThreeForm7(c);
    f.scale(1.0 / f.norm())
}

/// Infinitesimal action of X ∈ gl(7) on 3-forms:
/// (X·φ)(v₁, v₂, v₃) = φ(Xv₁, v₂, v₃) + φ(v₁, Xv₂, v₃) + φ(v₁, v₂, Xv₃).
pub fn derivation(x: &Mat7, phi: &ThreeForm7) -> ThreeForm7 {
    let f = phi.to_form();
    let mut out = ThreeForm7::zero();
    for (pos, &m) in exterior::basis(3).iter().enumerate() {
        let idx: Vec<usize> = exterior::indices(m).iter().map(|i| i + 1).collect();
        let mut s = 0.0;
        for slot in 0..3 {
            for j in 0..DIM {
                let xji = x[(j, idx[slot] - 1)];
                if xji != 0.0 {
                    let mut args = idx.clone();
                    args[slot] = j + 1;
                    s += xji * f.eval_indices(&args);
                }
            }
        }
        out.0[pos] = s;
    }
    out
}

/// Basis of g₂ = {X ∈ so(7) : X·φ₀ = 0}, as antisymmetric matrices.
pub fn g2_algebra_basis() -> Vec<Mat7> {
    let p = phi0();
    let mut gens = Vec::new();
    for a in 0..DIM {
        for b in a + 1..DIM {
            let mut e = Mat7::zeros();
            e[(a, b)] = 1.0;
            e[(b, a)] = -1.0;
            gens.push(e);
        }
    }
    let map = DMatrix::from_fn(35, gens.len(), |i, j| derivation(&gens[j], &p).0[i]);
    // null vectors of mᵀm; the kernel is 14-dimensional
    let eig = (map.transpose() * &map).symmetric_eigen();
    (0..gens.len())
        .filter(|&i| eig.eigenvalues[i].abs() < 1e-10)
        .map(|i| {
            let v = eig.eigenvectors.column(i);
            gens.iter().zip(v.iter()).fold(Mat7::zeros(), |acc, (g, c)| acc + g * *c)
        })
        .collect()
}

/// exp of a random element of g₂ with Gaussian coefficients of size `scale`.
pub fn random_g2_rotation<R: Rng>(rng: &mut R, scale: f64) -> Mat7 {
    let basis = g2_algebra_basis();
    let mut x = Mat7::zeros();
    for b in &basis {
        let c: f64 = rng.sample(StandardNormal);
        x += b * (c * scale);
    }
    x.exp()
}
