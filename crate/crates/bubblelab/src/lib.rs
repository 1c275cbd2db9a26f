//! Numerical layer for boundary-critical variational problems: model bubble
//! profiles, weighted moments, Fermi-jet energy quotients, curvature estimators,
//! reduced multi-bubble potentials, and fast-diffusion bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod energy;
pub mod error;
pub mod estimators;
pub mod fit;
pub mod fixtures;
pub mod geometry;
pub mod moments;
pub mod nodes;
pub mod ode;
pub mod poly;
pub mod profiles;
pub mod quadrature;
pub mod reduced;
pub mod special;

pub use error::{Error, Result};
