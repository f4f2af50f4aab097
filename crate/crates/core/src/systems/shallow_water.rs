use super::{ConstraintFunctional, EntropyValue, SystemModel};
use crate::error::DomainError;
use crate::state::{Flux, State, Vector};

const DRY_REGULARIZATION: f64 = 1e-14;

/// Saint-Venant equations with bathymetry and Manning friction.
///
/// State `(h, q)`. The bottom elevation `z` enters through its gradient at
/// each vertex; the source is `(0, -g h ∇z - g n² h^{-γ} q |v|)`.
#[derive(Debug, Clone)]
pub struct ShallowWater {
    pub dim: usize,
    pub gravity: f64,
    pub manning: f64,
    pub friction_exponent: f64,
    pub bottom_gradient: Vec<Vector>,
    pub tau0: f64,
}

impl ShallowWater {
    pub fn new(dim: usize, gravity: f64) -> Self {
        ShallowWater {
            dim,
            gravity,
            manning: 0.0,
            friction_exponent: 4.0 / 3.0,
            bottom_gradient: Vec::new(),
            tau0: f64::INFINITY,
        }
    }

    pub fn with_friction(mut self, manning: f64, exponent: f64) -> Self {
        self.manning = manning;
        self.friction_exponent = exponent;
        self
    }

    pub fn with_bottom_gradient(mut self, gradient: Vec<Vector>) -> Self {
        self.bottom_gradient = gradient;
        self
    }

    fn velocity(&self, u: &State) -> Vector {
        [u[1] / u[0], if self.dim == 2 { u[2] / u[0] } else { 0.0 }]
    }

    fn momentum(&self, u: &State) -> Vector {
        [u[1], if self.dim == 2 { u[2] } else { 0.0 }]
    }

    pub fn kinetic_energy(&self, u: &State) -> f64 {
        let q = self.momentum(u);
        0.5 * (q[0] * q[0] + q[1] * q[1]) / u[0]
    }
}

impl SystemModel for ShallowWater {
    fn name(&self) -> &'static str {
        "shallow_water"
    }

    fn components(&self) -> usize {
        self.dim + 1
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn component_names(&self) -> Vec<&'static str> {
        if self.dim == 1 {
            vec!["h", "q_x"]
        } else {
            vec!["h", "q_x", "q_y"]
        }
    }

    fn flux(&self, u: &State) -> Result<Flux, DomainError> {
        if !(u[0] > 0.0) {
            return Err(DomainError::new("shallow_water", format!("water height {}", u[0])));
        }
        let v = self.velocity(u);
        let q = self.momentum(u);
        let p = 0.5 * self.gravity * u[0] * u[0];
        let mut f = Flux::default();
        f.0[0] = q;
        for a in 0..self.dim {
            for b in 0..self.dim {
                f.0[1 + a][b] = q[a] * v[b] + if a == b { p } else { 0.0 };
            }
        }
        Ok(f)
    }

    fn lambda_max(&self, n: &Vector, ul: &State, ur: &State) -> f64 {
        let g = self.gravity;
        let vel = |u: &State| {
            if u[0] > 0.0 {
                let v = self.velocity(u);
                v[0] * n[0] + v[1] * n[1]
            } else {
                0.0
            }
        };
        let (hl, hr) = (ul[0].max(0.0), ur[0].max(0.0));
        let (vl, vr) = (vel(ul), vel(ur));
        let (cl, cr) = ((g * hl).sqrt(), (g * hr).sqrt());
        let crude = 2.0 * (vl.abs() + cl).max(vr.abs() + cr);
        if !(hl > 0.0 && hr > 0.0) || !crude.is_finite() {
            return if crude.is_finite() { crude } else { f64::MAX };
        }
        // Two-rarefaction height, an upper bound of the exact middle height.
        let root = (0.5 * (cl + cr) - 0.25 * (vr - vl)).max(0.0);
        let h_star = root * root / g;
        let left = if h_star > hl {
            vl - (0.5 * g * h_star * (h_star + hl) / hl).sqrt()
        } else {
            vl - cl
        };
        let right = if h_star > hr {
            vr + (0.5 * g * h_star * (h_star + hr) / hr).sqrt()
        } else {
            vr + cr
        };
        let lambda = left.abs().max(right.abs()).max(vl.abs()).max(vr.abs());
        if lambda.is_finite() {
            lambda
        } else {
            crude
        }
    }

    fn has_source(&self) -> bool {
        self.manning > 0.0 || !self.bottom_gradient.is_empty()
    }

    fn source(&self, u: &State, vertex: usize, _t: f64) -> State {
        let mut s = State::ZERO;
        let h = u[0].max(0.0);
        let g = self.gravity;
        if let Some(grad) = self.bottom_gradient.get(vertex) {
            for a in 0..self.dim {
                s[1 + a] -= g * h * grad[a];
            }
        }
        if self.manning > 0.0 && h > 0.0 {
            let q = self.momentum(u);
            let speed = (q[0] * q[0] + q[1] * q[1]).sqrt() / h;
            let hp = h.powf(self.friction_exponent + 1.0);
            let regular = hp / (hp + DRY_REGULARIZATION);
            let coefficient = g * self.manning * self.manning * h.powf(-self.friction_exponent) * speed * regular;
            if coefficient.is_finite() {
                for a in 0..self.dim {
                    s[1 + a] -= coefficient * q[a];
                }
            }
        }
        s
    }

    fn tau0(&self) -> f64 {
        self.tau0
    }

    fn admissible(&self, u: &State) -> bool {
        u.is_finite() && u[0] > 0.0
    }

    fn entropy_names(&self) -> &'static [&'static str] {
        &["energy"]
    }

    fn entropy(&self, _which: usize, u: &State) -> Result<EntropyValue, DomainError> {
        if !(u[0] > 0.0) {
            return Err(DomainError::new("shallow_water", format!("water height {}", u[0])));
        }
        let g = self.gravity;
        let h = u[0];
        let v = self.velocity(u);
        let v2 = v[0] * v[0] + v[1] * v[1];
        let eta = 0.5 * h * v2 + 0.5 * g * h * h;
        let w = 0.5 * h * v2 + g * h * h;
        let mut gradient = State::ZERO;
        gradient[0] = -0.5 * v2 + g * h;
        for a in 0..self.dim {
            gradient[1 + a] = v[a];
        }
        Ok(EntropyValue { eta, flux: [v[0] * w, v[1] * w], gradient })
    }

    fn constraints(&self) -> Vec<ConstraintFunctional> {
        vec![
            ConstraintFunctional::component_min("h_min", 0),
            ConstraintFunctional::kinetic_energy_max("kinetic_max", self.dim),
        ]
    }
}
