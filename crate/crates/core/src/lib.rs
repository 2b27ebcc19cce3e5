//! Solvers for Wasserstein distributionally robust chance-constrained
//! programs (DRCCPs).
//!
//! * [`model`]: instances, validation, JSON files and built-in fixtures.
//! * [`subsolver`]: conic subproblems and a binary branch and bound.
//! * [`risk`]: VaR/CVaR and the worst-case chance-constraint checks.
//! * [`elliptical`]: Gaussian special functions, the `η_q*` safety factor and
//!   the closed forms of the elliptical exactness conditions.
//! * [`approx`]: lower-level programs of ALSO-X, ALSO-X# and its weak variant,
//!   and the CVaR approximation.
//! * [`driver`]: the bisection over the objective bound, exact baselines and
//!   instance diagnostics.
//! * [`bench`]: synthetic generators, out-of-sample evaluation, radius tuning
//!   and improvement metrics.

pub mod approx;
pub mod bench;
pub mod driver;
pub mod elliptical;
pub mod error;
pub mod model;
pub mod risk;
pub mod subsolver;

pub use error::{DrccpError, Result};
