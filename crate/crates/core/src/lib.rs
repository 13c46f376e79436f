//! Numerical laboratory for weighted decay and localized smoothing of
//! Zakharov–Kuznetsov (2D) and Korteweg–de Vries (1D) solutions.
//!
//! The crate is layered bottom-up:
//!
//! * [`spectral`] periodic grids, real fields, FFT multipliers and the exact
//!   linear flows;
//! * [`jet`] truncated Taylor arithmetic used for every analytic derivative;
//! * [`weights`] the cutoff family, polynomial/exponential weights and
//!   truncated weights;
//! * [`psido`] quantization of symbols, composition and commutator
//!   expansions, interpolation checks;
//! * [`evolve`] ground states and the nonlinear pseudo-spectral integrators;
//! * [`diagnostics`] weighted half-space norms, smoothing integrals and the
//!   weighted energy identity.

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod evolve;
pub mod jet;
pub mod psido;
pub mod quadrature;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use spectral::{make_grid, ComplexField, Field, Grid, Model, MultiIndex};
