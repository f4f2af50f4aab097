//! Hyperbolic system models.
//!
//! A model is a set of pure functions of the state: flux, a guaranteed upper
//! bound on the maximum wave speed of the 1D Riemann problem in direction
//! `n`, source, entropy pairs and the admissible set. Models are shared
//! read-only across worker threads.

mod constraints;
mod euler;
mod scalar;
mod shallow_water;

pub use constraints::{ConstraintFunctional, ConstraintKind, Strategy};
pub use euler::Euler;
pub use scalar::{Burgers, LinearAdvection};
pub use shallow_water::ShallowWater;

use crate::error::DomainError;
use crate::state::{Flux, State, Vector};

/// `η(U)`, its flux `q(U)` and the gradient `∇η(U)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub eta: f64,
    pub flux: Vector,
    pub gradient: State,
}

pub trait SystemModel: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    fn components(&self) -> usize;

    fn dim(&self) -> usize;

    fn component_names(&self) -> Vec<&'static str>;

    fn flux(&self, u: &State) -> Result<Flux, DomainError>;

    /// Upper bound on the Riemann fan speed for `(ul, ur)` along the unit
    /// vector `n`. Never negative, never an error.
    fn lambda_max(&self, n: &Vector, ul: &State, ur: &State) -> f64;

    fn has_source(&self) -> bool {
        false
    }

    /// Source at vertex `vertex` and time `t`.
    fn source(&self, _u: &State, _vertex: usize, _t: f64) -> State {
        State::ZERO
    }

    /// Largest source substep keeping `U + τ S(U)` admissible.
    fn tau0(&self) -> f64 {
        f64::INFINITY
    }

    fn admissible(&self, u: &State) -> bool;

    fn entropy_names(&self) -> &'static [&'static str];

    fn entropy(&self, which: usize, u: &State) -> Result<EntropyValue, DomainError>;

    /// Ordered constraint list for convex limiting.
    fn constraints(&self) -> Vec<ConstraintFunctional>;

    /// Scalar component watched by the smoothness and greedy viscosities.
    fn tracked_component(&self) -> usize {
        0
    }

    /// Specific internal energy, for models that have one.
    fn internal_energy(&self, _u: &State) -> Option<f64> {
        None
    }
}

/// Unit vector and length of `c`.
pub fn unit(c: &Vector) -> (Vector, f64) {
    let len = crate::state::norm(c);
    if len > 0.0 {
        ([c[0] / len, c[1] / len], len)
    } else {
        ([1.0, 0.0], 0.0)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Second difference of `η` along a random segment, scaled by the
    /// magnitude of the values involved.
    pub fn convexity_defect(model: &dyn SystemModel, a: &State, b: &State) -> f64 {
        let mid = 0.5 * (*a + *b);
        let ea = model.entropy(0, a).unwrap().eta;
        let eb = model.entropy(0, b).unwrap().eta;
        let em = model.entropy(0, &mid).unwrap().eta;
        let scale = ea.abs().max(eb.abs()).max(em.abs()).max(1.0);
        (0.5 * (ea + eb) - em) / scale
    }

    /// Finite-difference check of the entropy gradient.
    pub fn gradient_error(model: &dyn SystemModel, u: &State) -> f64 {
        let e = model.entropy(0, u).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..model.components() {
            let h = 1e-6 * u[k].abs().max(1.0);
            let mut up = *u;
            let mut dn = *u;
            up[k] += h;
            dn[k] -= h;
            let fd = (model.entropy(0, &up).unwrap().eta - model.entropy(0, &dn).unwrap().eta) / (2.0 * h);
            worst = worst.max((fd - e.gradient[k]).abs() / fd.abs().max(1.0));
        }
        worst
    }
}
