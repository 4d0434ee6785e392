//! Perturbations of the steady viscous circulatory flow around an infinite
//! cylinder: closed-form background, second-order finite-difference
//! discretization of the axisymmetric compressible Navier-Stokes
//! perturbation system, RK4 time stepping, and the weighted energy
//! functionals used to measure stability.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod background;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod operators;
pub mod mms;
pub mod quadrature;
pub mod reduce;
pub mod timestepper;

pub use background::{BackgroundField, FlowParams};
pub use dynamics::{Bump, ComponentMask, RhsMode, State, Tendency};
pub use error::{Error, Result};
pub use operators::{Field, Grid, GridSpec, ZBoundary};
pub use timestepper::{Problem, Run, StepControl};
