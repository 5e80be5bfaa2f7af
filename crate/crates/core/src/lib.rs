//! Computable layer of a singular twisted-connected-sum construction:
//! constant-coefficient G₂ algebra, Calabi–Yau cone and Stenzel potentials,
//! indicial-root catalogs and index-change arithmetic on the nodal cone,
//! Bessel-kernel edge solvers and K3 lattice matching arithmetic.

pub mod edge;
pub mod exterior;
pub mod g2;
pub mod lattice;
pub mod quadrature;
pub mod special;
pub mod stenzel;
pub mod spectra;
