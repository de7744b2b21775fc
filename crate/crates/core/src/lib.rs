//! Simulation and verification toolkit for a Tikhonov-regularized inertial
//! primal-dual dynamical system on convex-concave bilinear saddle point
//! problems.
//!
//! The crate integrates the system with an adaptive Dormand-Prince pair,
//! monitors the energy functions that certify its convergence regimes,
//! checks the parameter assumptions behind each regime, estimates empirical
//! convergence rates, and computes the minimal-norm saddle point through the
//! Tikhonov approximation curve.

pub mod diagnostics;
pub mod dynamics;
pub mod integrator;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod scenario;
pub mod tikhonov;

pub use dynamics::{DynamicsParams, ScalingSpec, SimState};
pub use integrator::{IntegratorConfig, Trajectory};
pub use linalg::{Matrix, Vector};
pub use problem::{SaddlePoint, SaddleProblem};
pub use rng::SeededRng;
