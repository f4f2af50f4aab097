//! Quasiconcave constraint functionals `Ψ(U) ≥ Ψ^min`.
//!
//! Each functional carries the search strategy used by the limiter:
//! affine functionals are solved in closed form, rational ones are
//! multiplied through by the density to get a quadratic along the search
//! line, and the specific entropy is turned into the concave function
//! `ε(U) - R(ρ) Ψ^min`.

use crate::state::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Linear,
    Quadratic,
    Concave,
    Generic,
}

#[derive(Debug, Clone, Copy)]
pub enum ConstraintKind {
    /// `Ψ = U_k`.
    ComponentMin(usize),
    /// `Ψ = -U_k`.
    ComponentMax(usize),
    /// `Ψ = ε(U) = E - |m|²/(2ρ)`.
    InternalEnergyMin { dim: usize },
    /// `Ψ = ε(U) / R(ρ)` with `R(ρ) = ρ^γ / (1-bρ)^{γ-1}`.
    SpecificEntropyMin { dim: usize, gamma: f64, covolume: f64 },
    /// `Ψ = -|q|² / (2h)`, an upper bound on the kinetic energy.
    KineticEnergyMax { dim: usize },
    /// Any quasiconcave functional; `None` outside its domain.
    Generic(fn(&State) -> Option<f64>),
}

#[derive(Debug, Clone)]
pub struct ConstraintFunctional {
    pub name: String,
    pub kind: ConstraintKind,
}

fn momentum_sq(u: &State, dim: usize) -> f64 {
    (1..=dim).map(|a| u[a] * u[a]).sum()
}

fn momentum_dot(u: &State, p: &State, dim: usize) -> f64 {
    (1..=dim).map(|a| u[a] * p[a]).sum()
}

impl ConstraintFunctional {
    pub fn new(name: impl Into<String>, kind: ConstraintKind) -> Self {
        ConstraintFunctional { name: name.into(), kind }
    }

    pub fn component_min(name: &str, k: usize) -> Self {
        Self::new(name, ConstraintKind::ComponentMin(k))
    }

    pub fn component_max(name: &str, k: usize) -> Self {
        Self::new(name, ConstraintKind::ComponentMax(k))
    }

    pub fn internal_energy_min(name: &str, dim: usize) -> Self {
        Self::new(name, ConstraintKind::InternalEnergyMin { dim })
    }

    pub fn specific_entropy_min(name: &str, dim: usize, gamma: f64, covolume: f64) -> Self {
        Self::new(name, ConstraintKind::SpecificEntropyMin { dim, gamma, covolume })
    }

    pub fn kinetic_energy_max(name: &str, dim: usize) -> Self {
        Self::new(name, ConstraintKind::KineticEnergyMax { dim })
    }

    pub fn strategy(&self) -> Strategy {
        match self.kind {
            ConstraintKind::ComponentMin(_) | ConstraintKind::ComponentMax(_) => Strategy::Linear,
            ConstraintKind::InternalEnergyMin { .. } | ConstraintKind::KineticEnergyMax { .. } => Strategy::Quadratic,
            ConstraintKind::SpecificEntropyMin { .. } => Strategy::Concave,
            ConstraintKind::Generic(_) => Strategy::Generic,
        }
    }

    /// Whether `Ψ` is defined at `u` (positive density where divided by).
    pub fn in_domain(&self, u: &State) -> bool {
        match self.kind {
            ConstraintKind::ComponentMin(_) | ConstraintKind::ComponentMax(_) => u.is_finite(),
            ConstraintKind::InternalEnergyMin { .. } | ConstraintKind::KineticEnergyMax { .. } => u[0] > 0.0,
            ConstraintKind::SpecificEntropyMin { covolume, .. } => u[0] > 0.0 && 1.0 - covolume * u[0] > 0.0,
            ConstraintKind::Generic(f) => f(u).is_some(),
        }
    }

    /// `Ψ(U)`, or `None` outside the functional's domain.
    pub fn evaluate(&self, u: &State) -> Option<f64> {
        if !self.in_domain(u) {
            return None;
        }
        Some(match self.kind {
            ConstraintKind::ComponentMin(k) => u[k],
            ConstraintKind::ComponentMax(k) => -u[k],
            ConstraintKind::InternalEnergyMin { dim } => u[dim + 1] - 0.5 * momentum_sq(u, dim) / u[0],
            ConstraintKind::SpecificEntropyMin { dim, gamma, covolume } => {
                let eps = u[dim + 1] - 0.5 * momentum_sq(u, dim) / u[0];
                eps / entropy_scale(u[0], gamma, covolume)
            }
            ConstraintKind::KineticEnergyMax { dim } => -0.5 * momentum_sq(u, dim) / u[0],
            ConstraintKind::Generic(f) => f(u)?,
        })
    }

    /// Weights `w` with `Ψ(U) = w · U` for affine functionals.
    pub fn linear_weights(&self) -> Option<State> {
        let mut w = State::ZERO;
        match self.kind {
            ConstraintKind::ComponentMin(k) => w[k] = 1.0,
            ConstraintKind::ComponentMax(k) => w[k] = -1.0,
            _ => return None,
        }
        Some(w)
    }

    /// Coefficients `(a, b, c)` with `ρ (Ψ - Ψ^min)` along `u + ℓ p` equal to
    /// `a ℓ² + b ℓ + c`.
    pub fn quadratic(&self, u: &State, p: &State, bound: f64) -> Option<[f64; 3]> {
        match self.kind {
            ConstraintKind::InternalEnergyMin { dim } => {
                let e = dim + 1;
                Some([
                    p[0] * p[e] - 0.5 * momentum_sq(p, dim),
                    u[0] * p[e] + u[e] * p[0] - momentum_dot(u, p, dim) - bound * p[0],
                    u[0] * u[e] - 0.5 * momentum_sq(u, dim) - bound * u[0],
                ])
            }
            ConstraintKind::KineticEnergyMax { dim } => Some([
                -0.5 * momentum_sq(p, dim),
                -momentum_dot(u, p, dim) - bound * p[0],
                -0.5 * momentum_sq(u, dim) - bound * u[0],
            ]),
            _ => None,
        }
    }

    /// Concave surrogate `g(U) = ε(U) - R(ρ) Ψ^min` and its derivative along
    /// `p`. Same sign as `Ψ - Ψ^min` wherever the density is positive.
    pub fn concave(&self, u: &State, p: &State, bound: f64) -> Option<(f64, f64)> {
        let ConstraintKind::SpecificEntropyMin { dim, gamma, covolume } = self.kind else {
            return None;
        };
        if !self.in_domain(u) {
            return None;
        }
        let e = dim + 1;
        let rho = u[0];
        let m2 = momentum_sq(u, dim);
        let eps = u[e] - 0.5 * m2 / rho;
        let d_eps = p[e] - momentum_dot(u, p, dim) / rho + 0.5 * m2 * p[0] / (rho * rho);
        let r = entropy_scale(rho, gamma, covolume);
        let x = 1.0 - covolume * rho;
        let dr = r * (gamma / rho + covolume * (gamma - 1.0) / x);
        Some((eps - r * bound, d_eps - dr * p[0] * bound))
    }

    /// The function whose sign the limiter tracks: `Ψ - Ψ^min` in the
    /// transformed form matching [`Strategy`]. `None` outside the domain.
    pub fn margin(&self, u: &State, bound: f64) -> Option<f64> {
        match self.strategy() {
            Strategy::Linear | Strategy::Generic => self.evaluate(u).map(|v| v - bound),
            Strategy::Quadratic => {
                if !self.in_domain(u) {
                    return None;
                }
                self.quadratic(u, &State::ZERO, bound).map(|q| q[2])
            }
            Strategy::Concave => self.concave(u, &State::ZERO, bound).map(|g| g.0),
        }
    }

    /// `(Ψ(U) - Ψ^min) / max(|Ψ^min|, 1)`; `-∞` outside the domain.
    pub fn slack(&self, u: &State, bound: f64) -> f64 {
        match self.evaluate(u) {
            Some(v) => (v - bound) / bound.abs().max(1.0),
            None => f64::NEG_INFINITY,
        }
    }
}

pub(crate) fn entropy_scale(rho: f64, gamma: f64, covolume: f64) -> f64 {
    rho.powf(gamma) / (1.0 - covolume * rho).powf(gamma - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{Euler, ShallowWater, SystemModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_values() {
        let euler = Euler::new(1, 1.4);
        let list = euler.constraints();
        let names: Vec<_> = list.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["rho_min", "rho_max", "internal_energy_min", "specific_entropy_min"]);
        let u = State::from_slice(&[0.3, 0.1, 1.0]);
        assert!((list[0].margin(&u, 0.1).unwrap() - 0.2).abs() < 1e-15);
        let rest = State::from_slice(&[1.0, 0.0, 2.5]);
        assert_eq!(list[2].evaluate(&rest), Some(2.5));
        assert_eq!(list[3].evaluate(&rest), Some(2.5));
        let sw = ShallowWater::new(1, 9.81);
        assert_eq!(sw.constraints().len(), 2);
    }

    #[test]
    fn quadratic_coefficients_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for c in [ConstraintFunctional::internal_energy_min("e", 2), ConstraintFunctional::kinetic_energy_max("k", 2)] {
            for _ in 0..200 {
                let u = State::from_slice(&[rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(2.0..4.0)]);
                let p = State::from_slice(&[rng.gen_range(-0.4..0.4), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                let bound = rng.gen_range(-1.0..1.0);
                let [a, b, cc] = c.quadratic(&u, &p, bound).unwrap();
                for l in [0.0, 0.3, 1.0] {
                    let w = u + l * p;
                    let direct = w[0] * (c.evaluate(&w).unwrap() - bound);
                    assert!((direct - (a * l * l + b * l + cc)).abs() < 1e-12 * (1.0 + direct.abs()));
                }
            }
        }
    }

    #[test]
    fn concave_form_agrees_in_sign_with_direct_form() {
        let euler = Euler::new(1, 1.4);
        let c = &euler.constraints()[3];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 1000 {
            let ul = euler.conserved(rng.gen_range(0.2..2.0), [rng.gen_range(-1.0..1.0), 0.0], rng.gen_range(0.2..2.0));
            let p = State::from_slice(&[rng.gen_range(-0.1..0.1), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
            let l: f64 = rng.gen_range(0.0..1.0);
            let w = ul + l * p;
            let bound = rng.gen_range(0.1..2.0);
            let Some(direct) = c.evaluate(&w) else { continue };
            let (g, dg) = c.concave(&w, &p, bound).unwrap();
            if (direct - bound).abs() > 1e-12 {
                assert_eq!(g > 0.0, direct > bound);
            }
            let h = 1e-7;
            let (gp, _) = c.concave(&(w + h * p), &p, bound).unwrap();
            let (gm, _) = c.concave(&(w - h * p), &p, bound).unwrap();
            assert!(((gp - gm) / (2.0 * h) - dg).abs() < 1e-5 * (1.0 + dg.abs()));
            checked += 1;
        }
    }

    #[test]
    fn functionals_are_quasiconcave() {
        let euler = Euler::new(2, 1.4).with_covolume(0.1);
        let sw = ShallowWater::new(2, 9.81);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (model, constraints) in [(&euler as &dyn SystemModel, euler.constraints()), (&sw, sw.constraints())] {
            for _ in 0..1000 {
                let count = rng.gen_range(2..=5);
                let states: Vec<State> = (0..count)
                    .map(|_| {
                        if model.name() == "euler" {
                            euler.conserved(rng.gen_range(0.1..3.0), [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], rng.gen_range(0.1..3.0))
                        } else {
                            State::from_slice(&[rng.gen_range(0.1..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                        }
                    })
                    .collect();
                let mut weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..1.0)).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                let mix = states.iter().zip(&weights).fold(State::ZERO, |acc, (u, w)| acc + *w * *u);
                for c in &constraints {
                    let lowest = states.iter().map(|u| c.evaluate(u).unwrap()).fold(f64::INFINITY, f64::min);
                    let value = c.evaluate(&mix).unwrap();
                    assert!(value >= lowest - 1e-12 * lowest.abs().max(1.0), "{}", c.name);
                }
            }
        }
    }
}
