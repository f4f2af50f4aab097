use super::{ConstraintFunctional, EntropyValue, SystemModel};
use crate::error::DomainError;
use crate::state::{Flux, State, Vector};

/// Compressible Euler equations, state `(ρ, m, E)`, with the covolume
/// equation of state `p (1 - bρ) = (γ - 1) ρ e`.
#[derive(Debug, Clone)]
pub struct Euler {
    pub dim: usize,
    pub gamma: f64,
    pub covolume: f64,
}

/// Primitive quantities of an admissible Euler state.
#[derive(Debug, Clone, Copy)]
pub struct Primitive {
    pub rho: f64,
    pub velocity: Vector,
    pub pressure: f64,
    /// Specific internal energy `e`.
    pub energy: f64,
    pub sound: f64,
}

impl Euler {
    pub fn new(dim: usize, gamma: f64) -> Self {
        Euler { dim, gamma, covolume: 0.0 }
    }

    pub fn with_covolume(mut self, b: f64) -> Self {
        self.covolume = b;
        self
    }

    fn energy_index(&self) -> usize {
        self.dim + 1
    }

    pub fn momentum(&self, u: &State) -> Vector {
        [u[1], if self.dim == 2 { u[2] } else { 0.0 }]
    }

    /// `ε(U) = E - |m|² / (2ρ)`, the internal energy per unit volume.
    pub fn internal_energy_density(&self, u: &State) -> f64 {
        let m = self.momentum(u);
        u[self.energy_index()] - 0.5 * (m[0] * m[0] + m[1] * m[1]) / u[0]
    }

    pub fn primitive(&self, u: &State) -> Result<Primitive, DomainError> {
        let rho = u[0];
        if !(rho > 0.0) || !(1.0 - self.covolume * rho > 0.0) {
            return Err(DomainError::new("euler", format!("density {rho}")));
        }
        let eps = self.internal_energy_density(u);
        if !(eps > 0.0) {
            return Err(DomainError::new("euler", format!("internal energy {eps}")));
        }
        let m = self.momentum(u);
        let x = 1.0 - self.covolume * rho;
        let pressure = (self.gamma - 1.0) * eps / x;
        Ok(Primitive {
            rho,
            velocity: [m[0] / rho, m[1] / rho],
            pressure,
            energy: eps / rho,
            sound: (self.gamma * pressure / (rho * x)).sqrt(),
        })
    }

    /// Conserved state from density, velocity and pressure.
    pub fn conserved(&self, rho: f64, velocity: Vector, pressure: f64) -> State {
        let x = 1.0 - self.covolume * rho;
        let eps = pressure * x / (self.gamma - 1.0);
        let kinetic = 0.5 * rho * (velocity[0] * velocity[0] + velocity[1] * velocity[1]);
        let mut u = State::ZERO;
        u[0] = rho;
        u[1] = rho * velocity[0];
        if self.dim == 2 {
            u[2] = rho * velocity[1];
        }
        u[self.energy_index()] = eps + kinetic;
        u
    }

    /// `R(ρ) = ρ^γ / (1 - bρ)^{γ-1}`, so that `ε / R(ρ)` is the exponential of
    /// the specific entropy up to constants.
    pub fn entropy_scale(&self, rho: f64) -> f64 {
        rho.powf(self.gamma) / (1.0 - self.covolume * rho).powf(self.gamma - 1.0)
    }

    pub fn entropy_scale_derivative(&self, rho: f64) -> f64 {
        let x = 1.0 - self.covolume * rho;
        self.entropy_scale(rho) * (self.gamma / rho + self.covolume * (self.gamma - 1.0) / x)
    }

    /// Wave curve `f_K(p)` and its derivative for one side.
    fn wave_curve(&self, w: &Primitive, p: f64) -> (f64, f64) {
        let g = self.gamma;
        let x = 1.0 - self.covolume * w.rho;
        if p > w.pressure {
            let a = 2.0 * x / ((g + 1.0) * w.rho);
            let b = (g - 1.0) / (g + 1.0) * w.pressure;
            let root = (a / (p + b)).sqrt();
            ((p - w.pressure) * root, root * (1.0 - 0.5 * (p - w.pressure) / (p + b)))
        } else {
            let z = (g - 1.0) / (2.0 * g);
            let ratio = p / w.pressure;
            let scale = 2.0 * w.sound * x / (g - 1.0);
            (scale * (ratio.powf(z) - 1.0), scale * z * ratio.powf(z - 1.0) / w.pressure)
        }
    }

    /// An upper bound of the exact middle pressure.
    fn middle_pressure_bound(&self, left: &Primitive, right: &Primitive, dv: f64) -> f64 {
        let g = self.gamma;
        let z = (g - 1.0) / (2.0 * g);
        let (xl, xr) = (1.0 - self.covolume * left.rho, 1.0 - self.covolume * right.rho);
        let numerator = (left.sound * xl + right.sound * xr - 0.5 * (g - 1.0) * dv).max(0.0);
        let denominator = left.sound * xl * left.pressure.powf(-z) + right.sound * xr * right.pressure.powf(-z);
        let two_rarefaction = (numerator / denominator).powf(1.0 / z);
        if g <= 5.0 / 3.0 {
            return two_rarefaction;
        }
        // The pressure function is increasing and concave: Newton steps stay
        // below the root and secant steps above it.
        let phi = |p: f64| {
            let (fl, dl) = self.wave_curve(left, p);
            let (fr, dr) = self.wave_curve(right, p);
            (fl + fr + dv, dl + dr)
        };
        let mut lo = two_rarefaction;
        let (mut f_lo, mut d_lo) = phi(lo);
        if !(f_lo < 0.0) {
            return lo;
        }
        let mut hi = lo.max(left.pressure).max(right.pressure);
        let mut f_hi = phi(hi).0;
        for _ in 0..200 {
            if f_hi >= 0.0 {
                break;
            }
            hi *= 2.0;
            f_hi = phi(hi).0;
        }
        if !(f_hi >= 0.0) {
            return f64::INFINITY;
        }
        for _ in 0..4 {
            let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            let f_secant = phi(secant).0;
            if f_secant >= 0.0 && secant < hi {
                (hi, f_hi) = (secant, f_secant);
            }
            let newton = lo - f_lo / d_lo;
            if newton > lo && newton < hi {
                let (f, d) = phi(newton);
                if f < 0.0 {
                    (lo, f_lo, d_lo) = (newton, f, d);
                }
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        hi
    }

    fn crude_speed(&self, n: &Vector, states: [&State; 2]) -> f64 {
        let mut worst: f64 = 0.0;
        for u in states {
            let rho = u[0].max(f64::MIN_POSITIVE);
            let m = self.momentum(u);
            let vn = ((m[0] * n[0] + m[1] * n[1]) / rho).abs();
            let x = (1.0 - self.covolume * rho).max(f64::MIN_POSITIVE);
            let p = ((self.gamma - 1.0) * self.internal_energy_density(u) / x).max(0.0);
            worst = worst.max(vn + (self.gamma * p / (rho * x)).sqrt());
        }
        let crude = 2.0 * worst;
        if crude.is_finite() {
            crude
        } else {
            f64::MAX
        }
    }
}

impl SystemModel for Euler {
    fn name(&self) -> &'static str {
        "euler"
    }

    fn components(&self) -> usize {
        self.dim + 2
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn component_names(&self) -> Vec<&'static str> {
        if self.dim == 1 {
            vec!["rho", "m_x", "E"]
        } else {
            vec!["rho", "m_x", "m_y", "E"]
        }
    }

    fn flux(&self, u: &State) -> Result<Flux, DomainError> {
        let w = self.primitive(u)?;
        let m = self.momentum(u);
        let e_total = u[self.energy_index()];
        let mut f = Flux::default();
        f.0[0] = m;
        for a in 0..self.dim {
            for b in 0..self.dim {
                f.0[1 + a][b] = m[a] * w.velocity[b] + if a == b { w.pressure } else { 0.0 };
            }
        }
        let h = e_total + w.pressure;
        f.0[self.energy_index()] = [w.velocity[0] * h, w.velocity[1] * h];
        Ok(f)
    }

    /// Fan-edge speeds from an upper bound of the middle pressure: the
    /// two-rarefaction estimate for `1 < γ ≤ 5/3`, and a secant bracket of
    /// the pressure function above that.
    fn lambda_max(&self, n: &Vector, ul: &State, ur: &State) -> f64 {
        let (Ok(left), Ok(right)) = (self.primitive(ul), self.primitive(ur)) else {
            return self.crude_speed(n, [ul, ur]);
        };
        let g = self.gamma;
        let vl = left.velocity[0] * n[0] + left.velocity[1] * n[1];
        let vr = right.velocity[0] * n[0] + right.velocity[1] * n[1];
        let (xl, xr) = (1.0 - self.covolume * left.rho, 1.0 - self.covolume * right.rho);
        let p_star = self.middle_pressure_bound(&left, &right, vr - vl);
        let shock_speed = |w: &Primitive, x: f64| {
            let a = 2.0 * x / ((g + 1.0) * w.rho);
            let bb = (g - 1.0) / (g + 1.0) * w.pressure;
            ((p_star + bb) / a).sqrt() / w.rho
        };
        let lambda_left = if p_star > left.pressure { vl - shock_speed(&left, xl) } else { vl - left.sound };
        let lambda_right = if p_star > right.pressure { vr + shock_speed(&right, xr) } else { vr + right.sound };
        let lambda = lambda_left.abs().max(lambda_right.abs()).max(vl.abs()).max(vr.abs());
        if lambda.is_finite() {
            lambda
        } else {
            self.crude_speed(n, [ul, ur])
        }
    }

    fn admissible(&self, u: &State) -> bool {
        u.is_finite() && self.primitive(u).is_ok()
    }

    fn entropy_names(&self) -> &'static [&'static str] {
        &["log"]
    }

    /// `η = -ρ s` with `s = ln e / (γ-1) + ln(1/ρ - b)`.
    fn entropy(&self, _which: usize, u: &State) -> Result<EntropyValue, DomainError> {
        let w = self.primitive(u)?;
        let g = self.gamma;
        let x = 1.0 - self.covolume * w.rho;
        let s = w.energy.ln() / (g - 1.0) + (x / w.rho).ln();
        let eta = -w.rho * s;
        let inv = 1.0 / ((g - 1.0) * w.energy);
        let v2 = w.velocity[0] * w.velocity[0] + w.velocity[1] * w.velocity[1];
        let mut gradient = State::ZERO;
        gradient[0] = -(s - (w.energy - 0.5 * v2) * inv - 1.0 / x);
        for a in 0..self.dim {
            gradient[1 + a] = w.velocity[a] * inv;
        }
        gradient[self.energy_index()] = -inv;
        Ok(EntropyValue { eta, flux: [eta * w.velocity[0], eta * w.velocity[1]], gradient })
    }

    fn constraints(&self) -> Vec<ConstraintFunctional> {
        vec![
            ConstraintFunctional::component_min("rho_min", 0),
            ConstraintFunctional::component_max("rho_max", 0),
            ConstraintFunctional::internal_energy_min("internal_energy_min", self.dim),
            ConstraintFunctional::specific_entropy_min("specific_entropy_min", self.dim, self.gamma, self.covolume),
        ]
    }

    fn internal_energy(&self, u: &State) -> Option<f64> {
        Some(self.internal_energy_density(u) / u[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::EulerRiemann;
    use crate::systems::testing::{convexity_defect, gradient_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn resting_gas_flux() {
        let e = Euler::new(1, 1.4);
        let u = State::from_slice(&[1.0, 0.0, 2.5]);
        let f = e.flux(&u).unwrap();
        assert_eq!(f.0[0][0], 0.0);
        assert!((f.0[1][0] - 1.0).abs() < 1e-15);
        assert_eq!(f.0[2][0], 0.0);
        assert!(e.flux(&State::from_slice(&[-1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn log_entropy_vanishes_at_unit_state() {
        let e = Euler::new(1, 1.4);
        // ρ = 1, e = 1
        let u = State::from_slice(&[1.0, 0.0, 1.0]);
        assert!(e.entropy(0, &u).unwrap().eta.abs() < 1e-15);
        assert!(e.entropy(0, &State::from_slice(&[1.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn equal_states_give_sound_speed() {
        let e = Euler::new(2, 1.4);
        let u = e.conserved(0.7, [0.3, -0.2], 1.3);
        let w = e.primitive(&u).unwrap();
        let n = [0.6, 0.8];
        let expected = (w.velocity[0] * n[0] + w.velocity[1] * n[1]).abs() + w.sound;
        let lambda = e.lambda_max(&n, &u, &u);
        assert!((lambda - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn sod_bound_dominates_exact_speed() {
        let e = Euler::new(1, 1.4);
        let l = e.conserved(1.0, [0.0, 0.0], 1.0);
        let r = e.conserved(0.125, [0.0, 0.0], 0.1);
        let exact = EulerRiemann::solve(1.4, 0.0, [1.0, 0.0, 1.0], [0.125, 0.0, 0.1]).unwrap();
        assert!(e.lambda_max(&[1.0, 0.0], &l, &r) >= exact.max_speed());
    }

    #[test]
    fn covolume_states_round_trip() {
        let e = Euler::new(1, 1.4).with_covolume(0.1);
        let u = e.conserved(2.0, [1.5, 0.0], 3.0);
        let w = e.primitive(&u).unwrap();
        assert!((w.pressure - 3.0).abs() < 1e-13);
        assert!((w.velocity[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn entropy_is_convex_with_exact_gradient() {
        for b in [0.0, 0.2] {
            let e = Euler::new(2, 1.4).with_covolume(b);
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            for _ in 0..500 {
                let mut draw = || {
                    e.conserved(rng.gen_range(0.1..2.0), [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], rng.gen_range(0.1..3.0))
                };
                let (a, c) = (draw(), draw());
                assert!(convexity_defect(&e, &a, &c) >= -1e-8);
                assert!(gradient_error(&e, &a) < 1e-5);
            }
        }
    }
}
