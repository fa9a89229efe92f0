//! Numerical toolkit for rough evolution equations with a discrete delay,
//!
//! ```text
//! dy_t = (A y_t + F(y_t)) dt + G(y_t, y_{t-r}) d𝐗̄_t,   y = φ on [-r, 0],
//! ```
//!
//! driven by a delayed rough path `𝐗̄ = (X, 𝕏, 𝕏(-r))` with Hölder exponent in
//! `(1/3, 1/2]`, posed on the Sobolev scale of the one-dimensional torus.

pub mod controlled;
pub mod driver;
pub mod nonlinearity;
pub mod semigroup;
pub mod error;
pub mod scale;
pub mod sewing;
pub mod solver;

pub use error::{Error, Result};
