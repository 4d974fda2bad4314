//! Two-stage stochastic minimax problems under sample average approximation.
//!
//! The crate solves `min_{x₁} max_{y₁} F₁(x₁, y₁) + (1/N) Σᵢ ψ₂(x₁, y₁, ξⁱ)`,
//! where each `ψ₂` is the value of a strongly-convex-strongly-concave
//! second-stage saddle problem. Second stages are solved through their KKT
//! system by a semi-smooth Newton method ([`second_stage`]); the first stage
//! runs an inexact parallel proximal gradient descent-ascent loop
//! ([`ippgda`]) on the multiplier-based gradient estimates.

// `!(a > b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod ippgda;
pub mod linalg;
pub mod plot;
pub mod problem;
pub mod rng;
pub mod second_stage;

pub use config::{LambdaMode, NewtonSettings, SolverConfig};
pub use error::{Error, Result};
pub use ippgda::{run_ippgda, IppgdaTrace, RunStatus, TraceRecord};
pub use linalg::DenseMatrix;
pub use problem::{Dimensions, ProblemInstance, SaaProblem, Scenario};
pub use second_stage::{KktPoint, NewtonReport};
