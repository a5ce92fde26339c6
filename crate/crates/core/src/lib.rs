//! Sharp Gaussian heat kernel bounds for anisotropic fourth-order operators
//! `H = d11(alpha d11) + 2 d12(beta d12) + d22(gamma d22)` in the plane.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`], [`symbol`]: coefficient fields, the symbol `A(x, xi)`, the shape
//!   ratio `Q`, the constants `k` and `sigma`, good-class tests and `theta`.
//! * [`algebra`]: the polar symbol, `S`, `Gamma` and `p` with identity checks.
//! * [`finsler`]: dual norms, grid distances and admissibility certificates.
//! * [`operator`], [`evolve`], [`fourier`], [`forms`], [`diagnostics`]: discrete
//!   operators, semigroup evolution, exact constant-coefficient kernels and
//!   quadratic forms.
//! * [`bound`]: verification of the Gaussian upper bound and sharpness probes.
//! * [`presets`]: the named coefficient fields.

pub mod algebra;
pub mod bound;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod evolve;
pub mod field;
pub mod finsler;
pub mod forms;
pub mod fourier;
pub mod grid;
pub mod operator;
pub mod optimize;
pub mod presets;
pub mod smoothing;
pub mod symbol;

pub use domain::{BoundaryKind, Domain2D};
pub use error::{Error, Result};
pub use field::{Coefs, CoefficientField, Profile};
pub use grid::{GridFunction, RealGrid};
