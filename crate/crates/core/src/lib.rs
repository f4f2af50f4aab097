//! Invariant-domain-preserving graph discretizations of hyperbolic systems.
//!
//! The pipeline for one forward-Euler substep is: low-order update with a
//! guaranteed-maximum-speed graph viscosity, a high-order flux from a reduced
//! viscosity, and convex limiting of the difference against quasiconcave
//! bounds. SSP Runge-Kutta methods combine such substeps.

pub mod driver;
pub mod error;
pub mod exact;
pub mod graph;
pub mod high_order;
pub mod limiting;
pub mod low_order;
pub mod mesh;
pub mod solver;
pub mod state;
pub mod systems;
pub mod time_integration;
