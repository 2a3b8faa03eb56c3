//! Open-loop control synthesis for stochastic discrete-time linear systems
//! under signal temporal logic (STL) constraints.
//!
//! The pipeline turns a chance constraint on the STL robustness of the closed
//! trajectory into an expectation constraint via a concentration-of-measure
//! bound, then solves a data-driven distributionally robust program over a
//! Wasserstein ambiguity ball around the empirical disturbance distribution.
//!
//! Module map:
//! - [`stl`]: formulas, parsing, Boolean/quantitative/smoothed semantics
//! - [`linsys`]: linear dynamics and trajectory maps
//! - [`lipschitz`]: robustness Lipschitz constants with respect to the disturbance
//! - [`probability`]: disturbance models, concentration functions, Wasserstein metric
//! - [`solver`]: box-constrained inner maximization and augmented-Lagrangian outer solves
//! - [`programs`]: the nominal / expectation-constrained / distributionally robust programs
//! - [`scenario`]: scenario files and the built-in case study

pub mod linsys;
pub mod lipschitz;
pub mod probability;
pub mod programs;
pub mod scenario;
pub mod solver;
pub mod stl;

#[cfg(any(test, feature = "testing"))]
pub mod testing;
