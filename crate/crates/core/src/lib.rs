//! Numerical laboratory for the parabolic-elliptic chemotaxis system with
//! space-time logistic source on truncated periodic boxes,
//!
//! ```text
//! du/dt = Lap(u) - chi div(u grad v) + u (a(x,t) - b(x,t) u)
//!     0 = Lap(v) - lambda v + mu u
//! ```
//!
//! The crate is organised around the questions one asks of this system:
//!
//! * [`model`] — coefficients, parameters, hypothesis checks and every
//!   closed-form constant (persistence rectangle, sup bounds).
//! * [`elliptic`] — the pseudo-spectral Helmholtz solve for `v` and its
//!   gradient on the periodic box.
//! * [`evolve`] — positivity-preserving Strang-split time stepping and
//!   trajectory bookkeeping.
//! * [`oracles`] — closed-form comparison envelopes, pointwise lower bounds,
//!   spreading speeds and the box principal eigenvalue.
//! * [`entire`] — construction of strictly positive entire solutions
//!   (steady state, time-periodic orbit, pullback limit) and certification
//!   of their bounds.
//! * [`analysis`] — measured side of the theory: ratio dynamics, decay-rate
//!   fits, contraction factors, front speeds and chi-perturbation studies.

pub mod analysis;
pub mod elliptic;
pub mod entire;
pub mod error;
pub mod evolve;
pub mod field;
pub mod model;
pub mod oracles;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{Grid, ScalarField, VectorField};
pub use model::{CoefficientField, Dim, HypothesisReport, Params};
