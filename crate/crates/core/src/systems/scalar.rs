use serde::{Deserialize, Serialize};

use super::{ConstraintFunctional, EntropyValue, SystemModel};
use crate::error::DomainError;
use crate::state::{Flux, State, Vector};

/// `∂_t u + ∇·(a u) = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearAdvection {
    pub dim: usize,
    pub velocity: Vector,
}

impl LinearAdvection {
    pub fn new(dim: usize, velocity: Vector) -> Self {
        LinearAdvection { dim, velocity }
    }
}

fn scalar_constraints() -> Vec<ConstraintFunctional> {
    vec![ConstraintFunctional::component_min("u_min", 0), ConstraintFunctional::component_max("u_max", 0)]
}

impl SystemModel for LinearAdvection {
    fn name(&self) -> &'static str {
        "advection"
    }

    fn components(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn component_names(&self) -> Vec<&'static str> {
        vec!["u"]
    }

    fn flux(&self, u: &State) -> Result<Flux, DomainError> {
        let mut f = Flux::default();
        f.0[0] = [self.velocity[0] * u[0], self.velocity[1] * u[0]];
        Ok(f)
    }

    fn lambda_max(&self, n: &Vector, _ul: &State, _ur: &State) -> f64 {
        (self.velocity[0] * n[0] + self.velocity[1] * n[1]).abs()
    }

    fn admissible(&self, u: &State) -> bool {
        u[0].is_finite()
    }

    fn entropy_names(&self) -> &'static [&'static str] {
        &["square"]
    }

    fn entropy(&self, _which: usize, u: &State) -> Result<EntropyValue, DomainError> {
        let eta = 0.5 * u[0] * u[0];
        Ok(EntropyValue {
            eta,
            flux: [self.velocity[0] * eta, self.velocity[1] * eta],
            gradient: State::scalar(u[0]),
        })
    }

    fn constraints(&self) -> Vec<ConstraintFunctional> {
        scalar_constraints()
    }
}

/// `∂_t u + ∇·(½ u² w) = 0` for a fixed direction `w`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Burgers {
    pub dim: usize,
    pub direction: Vector,
}

impl Burgers {
    pub fn new(dim: usize) -> Self {
        let direction = if dim == 1 { [1.0, 0.0] } else { [1.0, 1.0] };
        Burgers { dim, direction }
    }
}

impl SystemModel for Burgers {
    fn name(&self) -> &'static str {
        "burgers"
    }

    fn components(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn component_names(&self) -> Vec<&'static str> {
        vec!["u"]
    }

    fn flux(&self, u: &State) -> Result<Flux, DomainError> {
        let half = 0.5 * u[0] * u[0];
        let mut f = Flux::default();
        f.0[0] = [self.direction[0] * half, self.direction[1] * half];
        Ok(f)
    }

    fn lambda_max(&self, n: &Vector, ul: &State, ur: &State) -> f64 {
        let wn = (self.direction[0] * n[0] + self.direction[1] * n[1]).abs();
        ul[0].abs().max(ur[0].abs()) * wn
    }

    fn admissible(&self, u: &State) -> bool {
        u[0].is_finite()
    }

    fn entropy_names(&self) -> &'static [&'static str] {
        &["square"]
    }

    fn entropy(&self, _which: usize, u: &State) -> Result<EntropyValue, DomainError> {
        let cube = u[0] * u[0] * u[0] / 3.0;
        Ok(EntropyValue {
            eta: 0.5 * u[0] * u[0],
            flux: [self.direction[0] * cube, self.direction[1] * cube],
            gradient: State::scalar(u[0]),
        })
    }

    fn constraints(&self) -> Vec<ConstraintFunctional> {
        scalar_constraints()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::burgers_riemann;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn burgers_flux_and_entropy() {
        let b = Burgers::new(1);
        assert_eq!(b.flux(&State::scalar(3.0)).unwrap().0[0][0], 4.5);
        let e = b.entropy(0, &State::scalar(2.0)).unwrap();
        assert_eq!(e.eta, 2.0);
        assert!((e.flux[0] - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_speeds() {
        let a = LinearAdvection::new(2, [1.0, -2.0]);
        assert_eq!(a.lambda_max(&[0.0, 1.0], &State::scalar(5.0), &State::scalar(-1.0)), 2.0);
        let b = Burgers::new(1);
        assert_eq!(b.lambda_max(&[1.0, 0.0], &State::scalar(-3.0), &State::scalar(1.0)), 3.0);
    }

    /// Average of the exact fan over `[-1/2, 1/2]` at time `t` equals
    /// `½(uL+uR) - t (f(uR) - f(uL))`.
    #[test]
    fn riemann_fan_average_matches_bar_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let ul: f64 = rng.gen_range(-2.0..2.0);
            let ur: f64 = rng.gen_range(-2.0..2.0);
            let lam = ul.abs().max(ur.abs()).max(1e-3);
            let t = rng.gen_range(0.05..1.0) / (2.0 * lam);
            let breaks: Vec<f64> = crate::exact::burgers_fan_edges(ul, ur).iter().map(|xi| xi * t).collect();
            let avg = crate::exact::fan_average(|x| burgers_riemann(ul, ur, x / t), -0.5, 0.5, &breaks);
            let bar = 0.5 * (ul + ur) - t * (0.5 * ur * ur - 0.5 * ul * ul);
            assert!((avg - bar).abs() < 1e-8, "{ul} {ur} {avg} {bar}");
        }
    }
}
