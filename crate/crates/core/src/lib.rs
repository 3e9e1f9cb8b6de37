//! Spectral Galerkin simulation of stochastic convective
//! Brinkman–Forchheimer flow on the periodic torus, with Wiener and
//! compensated Poisson forcing, plus the numerical checks that go with it.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod integrator;
pub mod io;
pub mod mollify;
pub mod noise;
pub mod operators;
pub mod rng;
pub mod stats;
pub mod transform;

pub use basis::{build_basis, BasisIndex, Mode, WaveVector};
pub use error::*;
pub use field::{PhysicalField, SpectralField, VectorSpectrum};
pub use operators::{Dealias, OperatorConfig, Operators};
