//! Numerical laboratory for the generalized Dean–Kawasaki equation on the
//! periodic torus.
//!
//! The crate simulates
//!
//! ```text
//! dρ = Δφ(ρ) dt − ∇·ν(ρ) dt − √ε ∇·(σ(ρ) dξ^ε) + (ε/2) ∇·(F1 σ̇(ρ)² ∇ρ + σ̇(ρ)σ(ρ) F2) dt
//! ```
//!
//! with a spectrally truncated noise ξ^ε, couples each path to the exactly
//! integrated linearized Langevin equation around the constant zero-noise
//! limit, and provides Monte-Carlo harnesses for the fluctuation estimates
//! (coupling error, moment scaling, lower-bound tail probabilities).
//!
//! Module map:
//!
//! * [`noise`]: trigonometric noise basis, structure sums F1/F2/F3, increments.
//! * [`coefficients`]: the (φ, ν, σ) triple, assumption validator, smoothing.
//! * [`solver`]: conservative Euler–Maruyama finite-difference scheme.
//! * [`ou`]: per-mode exponential integrator for the Langevin equation.
//! * [`analysis`]: DFT, negative Sobolev norms, space-time norms.
//! * [`experiments`]: scaling schedules, rate bound, CLT/moment/lower-bound sweeps.
//! * [`report`]: CSV/JSON reports and the binary trajectory container.

pub mod analysis;
pub mod coefficients;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod noise;
pub mod ou;
pub mod quad;
pub mod report;
pub mod rng;
pub mod solver;
pub mod stats;

pub use analysis::{NormSpec, SpectralField, Tau};
pub use coefficients::{Coefficients, Exponents, SmoothedCoefficients};
pub use error::{Error, Result};
pub use grid::{Grid, GridField};
pub use noise::{ModeIncrements, NoiseModel};
pub use ou::OuModeSystem;
pub use rng::IncrementStream;
pub use solver::{NonnegPolicy, PathState, Rho0Spec, SolverConfig, Trajectory};
