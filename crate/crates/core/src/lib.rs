//! Numerical bifurcation analysis of the coupled twin spin-maser equations.
//!
//! The reduced system in `(A, B, Pz)` carries all of the dynamics studied
//! here: its equilibria and their stability boundaries ([`analytic`]),
//! periodic orbits and their continuation ([`cycles`]), attractor
//! classification and the parameter-plane diagram ([`classify`]), the
//! harmonic-balance description of the supercritical Hopf branch
//! ([`perturb`]), and the lift of reduced solutions back to the two cell
//! polarizations ([`correspond`]).

// `!(x > 0.0)` guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod classify;
pub mod correspond;
pub mod cycles;
pub mod error;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod perturb;
pub mod stats;

pub use error::{
    AnalyticError, ClassifyError, CycleError, IntegrateError, ParamError, PerturbError,
};
pub use model::{FullParams, FullState, Params, ReducedState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
