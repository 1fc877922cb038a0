// Comparisons like `!(x > 0.0)` are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cone;
pub mod error;
pub mod expr;
pub mod extended;
pub mod figures;
pub mod gamma;
pub mod greens;
pub mod ode;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use gamma::{GammaMethod, GammaOptions, GammaResult, Weight, WeightKind};
pub use greens::{GreensKernel, KernelForm};
pub use problem::{BoundaryKind, Interval, Potential, PotentialKind};
