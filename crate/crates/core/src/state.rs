//! Conserved-state storage.
//!
//! Every supported system has at most [`MAX_COMPONENTS`] conserved variables
//! (2D Euler: density, two momenta, total energy), so a state is a fixed-size
//! array padded with zeros. Linear combinations keep the padding at zero.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

pub const MAX_COMPONENTS: usize = 4;
pub const MAX_DIM: usize = 2;

/// One conserved state `U ∈ R^m`, stored padded to [`MAX_COMPONENTS`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State(pub [f64; MAX_COMPONENTS]);

/// Physical flux `f(U)`: one row per component, one column per space direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Flux(pub [[f64; MAX_DIM]; MAX_COMPONENTS]);

pub type Vector = [f64; MAX_DIM];

impl State {
    pub const ZERO: State = State([0.0; MAX_COMPONENTS]);

    pub fn from_slice(values: &[f64]) -> Self {
        assert!(values.len() <= MAX_COMPONENTS, "too many components");
        let mut s = [0.0; MAX_COMPONENTS];
        s[..values.len()].copy_from_slice(values);
        State(s)
    }

    pub fn scalar(u: f64) -> Self {
        State([u, 0.0, 0.0, 0.0])
    }

    pub fn dot(&self, other: &State) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

impl Index<usize> for State {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for State {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}

impl Add for State {
    type Output = State;
    fn add(mut self, rhs: State) -> State {
        self += rhs;
        self
    }
}

impl AddAssign for State {
    fn add_assign(&mut self, rhs: State) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for State {
    type Output = State;
    fn sub(mut self, rhs: State) -> State {
        self -= rhs;
        self
    }
}

impl SubAssign for State {
    fn sub_assign(&mut self, rhs: State) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State(self.0.map(|v| -v))
    }
}

impl Mul<State> for f64 {
    type Output = State;
    fn mul(self, u: State) -> State {
        State(u.0.map(|v| self * v))
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, a: f64) -> State {
        a * self
    }
}

impl Flux {
    /// Contract the flux with a vector: `f(U) · c`, a state.
    pub fn dot(&self, c: &Vector) -> State {
        let mut out = State::ZERO;
        for (k, row) in self.0.iter().enumerate() {
            out.0[k] = row[0] * c[0] + row[1] * c[1];
        }
        out
    }
}

impl Add for Flux {
    type Output = Flux;
    fn add(mut self, rhs: Flux) -> Flux {
        for (row, other) in self.0.iter_mut().zip(rhs.0) {
            row[0] += other[0];
            row[1] += other[1];
        }
        self
    }
}

impl Sub for Flux {
    type Output = Flux;
    fn sub(mut self, rhs: Flux) -> Flux {
        for (row, other) in self.0.iter_mut().zip(rhs.0) {
            row[0] -= other[0];
            row[1] -= other[1];
        }
        self
    }
}

pub fn norm(c: &Vector) -> f64 {
    (c[0] * c[0] + c[1] * c[1]).sqrt()
}

/// Per-vertex conserved states at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    components: usize,
    values: Vec<State>,
}

impl StateField {
    pub fn new(components: usize, values: Vec<State>) -> Self {
        assert!((1..=MAX_COMPONENTS).contains(&components));
        StateField { components, values }
    }

    pub fn constant(components: usize, n: usize, u: State) -> Self {
        StateField::new(components, vec![u; n])
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[State] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [State] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<State> {
        self.values
    }

    /// `Σ_i m_i U_i`, summed sequentially so the result is reproducible.
    pub fn total(&self, masses: &[f64]) -> State {
        self.values
            .iter()
            .zip(masses)
            .fold(State::ZERO, |acc, (u, m)| acc + *m * *u)
    }

    /// `Σ_i m_i |U_i|` componentwise; the scale used for relative drift.
    pub fn total_abs(&self, masses: &[f64]) -> State {
        let mut out = State::ZERO;
        for (u, m) in self.values.iter().zip(masses) {
            for k in 0..MAX_COMPONENTS {
                out.0[k] += m * u.0[k].abs();
            }
        }
        out
    }

    pub fn component_min_max(&self, k: usize) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
            (lo.min(u.0[k]), hi.max(u.0[k]))
        })
    }

    /// Convex/linear combination `Σ_k w_k field_k`.
    pub fn combine(terms: &[(f64, &StateField)]) -> StateField {
        let (_, first) = terms[0];
        let mut values = vec![State::ZERO; first.len()];
        for (w, field) in terms {
            debug_assert_eq!(field.len(), values.len());
            for (out, u) in values.iter_mut().zip(field.values()) {
                *out += *w * *u;
            }
        }
        StateField::new(first.components, values)
    }
}

impl Index<usize> for StateField {
    type Output = State;
    fn index(&self, i: usize) -> &State {
        &self.values[i]
    }
}

impl IndexMut<usize> for StateField {
    fn index_mut(&mut self, i: usize) -> &mut State {
        &mut self.values[i]
    }
}
