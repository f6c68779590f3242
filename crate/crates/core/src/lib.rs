//! Normalized ground states of `-Δu = λu + |u|^{2*-2}u + μ|u|^{q-2}u`,
//! `|u|₂ = a`, in the radial setting: constants and thresholds, fiber-map
//! geometry, bubble estimates, shooting and descent solvers, and radial
//! time propagation.

pub mod bubbles;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod fem;
pub mod fiber;
pub mod ground_state;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod radial_ode;
pub mod sampling;

pub use constants::{ProblemParams, Regime, Threshold};
pub use error::{Error, Result};
pub use radial::{ProfileNorms, RadialGrid, RadialProfile};
