//! Homogeneous optimal transport maps between convex cones.
//!
//! A homogeneous transport potential on the cone over a link `P` is
//! recovered from a convex function `v` on `P` that minimizes the energy
//! `-log I(u) + J(v)^(-1/(n+1+alpha))`, where `u` is the Legendre dual of
//! `v`. The crate provides the geometry of the links, the discrete energy
//! and its first variation, a projected descent solver for both the
//! strongly oblique and the partially oblique (split target) cases, the lift
//! to the cone, and independent reference solutions used for validation.

pub mod convex_func;
pub mod convex_geom;
pub mod densities;
pub mod energy;
pub mod homogenization;
pub mod error;
pub mod laguerre;
pub mod mesh;
pub mod minimizer;
pub mod numeric;
pub mod oracle;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
