//! Product-integration solver for nonlinear Fredholm equations of the second
//! kind with weakly singular kernels, posed in L¹(\[a, b\]):
//!
//! ```text
//! φ(s) = ∫_a^b H(s,t) L(s,t) N(φ(t)) dt − y(s)
//! ```
//!
//! The unknown is projected onto piecewise constants (cell means) and the
//! singular factor `H` is integrated exactly against a piecewise-linear
//! interpolant of the smooth factor `L`. The resulting finite system
//! `A N(C) − C = Y` is solved by Newton's method.

pub mod analysis;
pub mod assembly;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod quad;
pub mod solver;

pub use assembly::{assemble, assemble_with, weight, AssemblyOptions, DiscreteSystem, ProblemSpec, Provenance};
pub use error::{Error, Result};
pub use grid::{cell_means, w1_oscillation, w2_modulus, CellVector, Function1D, Integrable1D, PiecewiseConstant, UniformGrid};
pub use kernel::{interp_l, CustomSingular, Moments, Nonlinearity, SingularFactor, SmoothFactor};
pub use quad::singular_quad;
pub use solver::{jacobian, newton_solve, solve_linear, GuessFunction, InitialGuess, NewtonConfig, NewtonReport};
