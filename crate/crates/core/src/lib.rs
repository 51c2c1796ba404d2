//! Detection of weakly discontinuous solutions of the 1D wave equation.
//!
//! The pipeline evaluates the exact d'Alembert solution of a Cauchy problem
//! on a uniform space-time grid, applies Gaussian-derivative wavelet
//! transforms at dyadic scales, locates modulus maxima, chains them into
//! ridges and scale chains, estimates Lipschitz exponents from the decay of
//! maxima across scales, and checks that the ridges follow the
//! characteristics of the PDE.
//!
//! Modules, bottom-up:
//!
//! - [`grid`]: uniform grids, sampled signals/fields, initial data, dump format
//! - [`solver`]: d'Alembert evaluation of the Cauchy problem
//! - [`wavelets`]: Gaussian kernel family and sampled kernels
//! - [`cwt`]: convolution, multiscale derivative transforms, gradient fields
//! - [`wtmm`]: modulus maxima, scale chains and ridges
//! - [`lipschitz`]: exponent regression and classification
//! - [`characteristics`]: characteristic roots, ridge line fits, verification
//! - [`pipeline`]: configuration and the end-to-end commands behind the CLI

// `!(x > 0.0)` style guards are kept so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod cwt;
pub mod error;
pub mod exec;
pub mod grid;
pub mod lipschitz;
pub mod pipeline;
pub mod solver;
pub mod table;
pub mod wavelets;
pub mod wtmm;

pub use error::{Error, Result};
