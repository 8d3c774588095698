//! Trajectory optimization with dual collision-avoidance certificates.
//!
//! The library turns non-differentiable clearance conditions between a
//! controlled object and convex obstacles into smooth algebraic constraints
//! on dual multipliers, embeds them in discrete-time optimal control
//! problems, and solves those with an in-repo constrained NLP solver seeded
//! by grid-search warm starts. Independent brute-force geometric oracles
//! audit every solution.
//!
//! Module map:
//! - [`geometry`]: conic set representations, cones and duals, rigid-body
//!   poses, support functions.
//! - [`oracle`]: brute-force distance / penetration / signed distance used
//!   as ground truth, never inside the NLP.
//! - [`certificates`]: dual-multiplier residuals for distance, penetration
//!   and signed-distance bounds, plus certificate recovery.
//! - [`models`]: quadcopter and kinematic-bicycle dynamics with analytic
//!   Jacobians.
//! - [`transcription`]: builds the flat NLPs from a scenario.
//! - [`solver`]: augmented-Lagrangian / barrier NLP solver with sparse
//!   banded linear algebra.
//! - [`warmstart`]: grid search and motion-primitive search initial guesses.

pub mod certificates;
pub mod geometry;
pub mod models;
mod numerics;
pub mod oracle;
pub mod solver;
pub mod transcription;
pub mod warmstart;
