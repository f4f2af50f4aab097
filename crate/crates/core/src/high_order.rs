//! High-order graph viscosities and fluxes.
//!
//! Every method returns a viscosity `0 ≤ d^H_ij ≤ d^L_ij` on the CSR pattern
//! (diagonal `-Σ_{j≠i} d^H_ij`). The fluxes built from it are exactly
//! skew-symmetric, so the limiter can blend them with the low-order ones.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::graph::{ConnectivityGraph, ConsistentMass};
use crate::low_order::{algebraic_fluxes, flux_update, par_rows};
use crate::state::{Flux, State, StateField};
use crate::systems::{EntropyValue, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighOrderMethod {
    Smoothness,
    Greedy,
    Commutator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMode {
    Lumped,
    Consistent,
    ApproximateInverse,
}

/// Regularization of the smoothness and entropy denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonGuard {
    /// `ε = 1e-8`.
    Relative,
    /// `ε = (m_i / |D|)^{3/d}`.
    MeshScaled,
}

pub const RELATIVE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighOrderConfig {
    pub method: HighOrderMethod,
    pub alpha0: f64,
    pub q: f64,
    pub guard: EpsilonGuard,
    pub mass: MassMode,
    pub gap_bounds: GapBounds,
    /// Defaults to the model's tracked component.
    pub tracked: Option<usize>,
    pub entropy: usize,
}

impl Default for HighOrderConfig {
    fn default() -> Self {
        HighOrderConfig {
            method: HighOrderMethod::Smoothness,
            alpha0: 0.5,
            q: 4.0,
            guard: EpsilonGuard::Relative,
            mass: MassMode::Lumped,
            gap_bounds: GapBounds::Hull,
            tracked: None,
            entropy: 0,
        }
    }
}

impl HighOrderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.alpha0) {
            return Err(format!("high_order.alpha0 = {} is outside [0, 1)", self.alpha0));
        }
        if !(self.q >= 1.0) {
            return Err(format!("high_order.q = {} is below 1", self.q));
        }
        Ok(())
    }

    /// Lipschitz constant of the clipped `ψ`.
    pub fn psi_lipschitz(&self) -> f64 {
        self.q / (1.0 - self.alpha0)
    }
}

/// `ψ(α) = ((α - α0) / (1 - α0))^q`, zero below `α0`.
pub fn psi(alpha: f64, alpha0: f64, q: f64) -> f64 {
    let x = ((alpha - alpha0) / (1.0 - alpha0)).clamp(0.0, 1.0);
    x.powf(q)
}

fn guard_scale(graph: &ConnectivityGraph, i: usize, guard: EpsilonGuard) -> f64 {
    match guard {
        EpsilonGuard::Relative => RELATIVE_EPSILON,
        EpsilonGuard::MeshScaled => (graph.mass(i) / graph.total_mass()).powf(3.0 / graph.dim() as f64),
    }
}

/// `α_i = |Σ β_ij (g_j - g_i)| / max(Σ β_ij |g_j - g_i|, ε_i)`.
pub fn smoothness_alpha(graph: &ConnectivityGraph, g: &[f64], guard: EpsilonGuard) -> Vec<f64> {
    par_rows(graph.n_vertices(), |i| {
        let mut signed = 0.0;
        let mut total = 0.0;
        let mut peak: f64 = 0.0;
        for k in graph.row(i) {
            let j = graph.column(k);
            peak = peak.max(g[j].abs());
            let diff = g[j] - g[i];
            signed += graph.beta(k) * diff;
            total += graph.beta(k).abs() * diff.abs();
        }
        let denominator = total.max(guard_scale(graph, i, guard) * peak);
        if denominator > 0.0 {
            (signed.abs() / denominator).clamp(0.0, 1.0)
        } else {
            0.0
        }
    })
}

/// `d^H_ij = d^L_ij max(ψ_i, ψ_j)` with the diagonal reset to minus the
/// row sum.
pub fn blend_viscosity(graph: &ConnectivityGraph, dl: &[f64], psi: &[f64]) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = par_rows(graph.n_vertices(), |i| {
        let mut row: Vec<f64> = graph
            .row(i)
            .map(|k| {
                let j = graph.column(k);
                if j == i {
                    0.0
                } else {
                    dl[k] * psi[i].max(psi[j])
                }
            })
            .collect();
        let off: f64 = row.iter().sum();
        row[graph.diagonal(i) - graph.row(i).start] = -off;
        row
    });
    rows.into_iter().flatten().collect()
}

pub fn dh_smoothness(graph: &ConnectivityGraph, dl: &[f64], alpha: &[f64], alpha0: f64, q: f64) -> Vec<f64> {
    let weights: Vec<f64> = alpha.iter().map(|&a| psi(a, alpha0, q)).collect();
    blend_viscosity(graph, dl, &weights)
}

/// Which states define `U_i^min` and `U_i^max`.
///
/// The gap estimates bound `U_i - U_j` by `U_i - U_i^min` for neighbors
/// below `U_i`. That holds when the extrema also run over the neighbor
/// values, but not for bar-state extrema alone: a neighbor can lie outside
/// the range of the bar states of `i` (the upwind bar state of linear
/// advection is `U_i` itself, never the downstream value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapBounds {
    /// Extrema of the bar states `Ū_ij`, `j ∈ I(i)`.
    BarStates,
    /// Extrema of the bar states and of the neighbor values `U_j`.
    Hull,
}

/// Per-vertex quantities of the gap estimates for one scalar component.
#[derive(Debug, Clone)]
pub struct GapQuantities {
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub gamma_plus: Vec<f64>,
    pub gamma_minus: Vec<f64>,
    pub u_max: Vec<f64>,
    pub u_min: Vec<f64>,
}

pub fn gap_quantities(
    graph: &ConnectivityGraph,
    u: &StateField,
    bar: &[State],
    dl: &[f64],
    dt: f64,
    component: usize,
    bounds: GapBounds,
) -> GapQuantities {
    let rows = par_rows(graph.n_vertices(), |i| {
        let ui = u[i][component];
        let scale = 2.0 * dt / graph.mass(i);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut plus, mut minus) = (0.0, 0.0);
        for k in graph.row(i) {
            lo = lo.min(bar[k][component]);
            hi = hi.max(bar[k][component]);
            let uj = u[graph.column(k)][component];
            if bounds == GapBounds::Hull {
                lo = lo.min(uj);
                hi = hi.max(uj);
            }
            if uj > ui {
                plus += dl[k];
            } else if uj < ui {
                minus += dl[k];
            }
        }
        let theta = if hi > lo { ((ui - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        let gamma = -scale * dl[graph.diagonal(i)];
        (theta, gamma, scale * plus, scale * minus, hi, lo)
    });
    let mut gaps = GapQuantities {
        theta: Vec::with_capacity(rows.len()),
        gamma: Vec::with_capacity(rows.len()),
        gamma_plus: Vec::with_capacity(rows.len()),
        gamma_minus: Vec::with_capacity(rows.len()),
        u_max: Vec::with_capacity(rows.len()),
        u_min: Vec::with_capacity(rows.len()),
    };
    for (theta, gamma, plus, minus, hi, lo) in rows {
        gaps.theta.push(theta);
        gaps.gamma.push(gamma);
        gaps.gamma_plus.push(plus);
        gaps.gamma_minus.push(minus);
        gaps.u_max.push(hi);
        gaps.u_min.push(lo);
    }
    gaps
}

/// `ψ_i = max(1 - 2(1-γ) min((1-θ)/(γ⁻θ), θ/(γ⁺(1-θ))), 0)`, and 1 when `θ`
/// sits at either end of the gap.
pub fn psi_greedy(gaps: &GapQuantities) -> Vec<f64> {
    (0..gaps.theta.len())
        .map(|i| {
            let theta = gaps.theta[i];
            if theta <= 0.0 || theta >= 1.0 {
                return 1.0;
            }
            let room = 1.0 - gaps.gamma[i];
            if room <= 0.0 {
                return 1.0;
            }
            let down = if gaps.gamma_minus[i] > 0.0 {
                (1.0 - theta) / (gaps.gamma_minus[i] * theta)
            } else {
                f64::INFINITY
            };
            let up = if gaps.gamma_plus[i] > 0.0 {
                theta / (gaps.gamma_plus[i] * (1.0 - theta))
            } else {
                f64::INFINITY
            };
            (1.0 - 2.0 * room * down.min(up)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Largest violation of the two gap-estimate inequalities by `next`, using
/// the `ψ` values that built the viscosity. Positive means violated.
pub fn gap_lemma_defect(gaps: &GapQuantities, psi: &[f64], next: &StateField, component: usize) -> f64 {
    (0..gaps.theta.len())
        .map(|i| {
            let (hi, lo) = (gaps.u_max[i], gaps.u_min[i]);
            let (theta, gamma) = (gaps.theta[i], gaps.gamma[i]);
            let width = hi - lo;
            let upper = hi - width * ((1.0 - theta) * (1.0 - gamma) - theta * (1.0 - psi[i]) * 0.5 * gaps.gamma_minus[i]);
            let lower = lo + width * (theta * (1.0 - gamma) - (1.0 - theta) * (1.0 - psi[i]) * 0.5 * gaps.gamma_plus[i]);
            let v = next[i][component];
            (v - upper).max(lower - v) / hi.abs().max(lo.abs()).max(1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn entropy_flux_contraction(gradient: &State, f: &Flux) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (k, row) in f.0.iter().enumerate() {
        out[0] += gradient[k] * row[0];
        out[1] += gradient[k] * row[1];
    }
    out
}

/// Entropy-commutator viscosity
/// `d^H_ij = min(d^L_ij, max(|N_i|/Δη_i, |N_j|/Δη_j))` with
/// `N_i = Σ_j (q(U_j) - ∇η(U_i)ᵀ f(U_j)) · c_ij`.
pub fn dh_commutator(
    graph: &ConnectivityGraph,
    u: &StateField,
    fluxes: &[Flux],
    dl: &[f64],
    model: &dyn SystemModel,
    which: usize,
    guard: EpsilonGuard,
) -> Result<Vec<f64>, SolverError> {
    let entropy: Vec<EntropyValue> = par_rows(u.len(), |i| model.entropy(which, &u[i]))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let ratio = par_rows(graph.n_vertices(), |i| {
        let mut residual = 0.0;
        let (mut lo, mut hi, mut peak) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for k in graph.row(i) {
            let j = graph.column(k);
            let c = graph.c(k);
            let q = entropy[j].flux;
            let w = entropy_flux_contraction(&entropy[i].gradient, &fluxes[j]);
            residual += (q[0] - w[0]) * c[0] + (q[1] - w[1]) * c[1];
            lo = lo.min(entropy[j].eta);
            hi = hi.max(entropy[j].eta);
            peak = peak.max(entropy[j].eta.abs());
        }
        let spread = (0.5 * (hi - lo)).max(guard_scale(graph, i, guard) * peak);
        if residual == 0.0 {
            0.0
        } else if spread > 0.0 {
            residual.abs() / spread
        } else {
            f64::INFINITY
        }
    });
    let rows: Vec<Vec<f64>> = par_rows(graph.n_vertices(), |i| {
        let mut row: Vec<f64> = graph
            .row(i)
            .map(|k| {
                let j = graph.column(k);
                if j == i {
                    0.0
                } else {
                    dl[k].min(ratio[i].max(ratio[j]))
                }
            })
            .collect();
        let off: f64 = row.iter().sum();
        row[graph.diagonal(i) - graph.row(i).start] = -off;
        row
    });
    Ok(rows.into_iter().flatten().collect())
}

/// How the time derivative is coupled across vertices.
#[derive(Debug, Clone, Copy)]
pub enum MassOperator<'a> {
    Lumped,
    Consistent(&'a ConsistentMass),
    ApproximateInverse(&'a ConsistentMass),
}

pub const MASS_SOLVE_TOLERANCE: f64 = 1e-12;
pub const MASS_SOLVE_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone)]
pub struct HighOrderStep {
    pub flux: Vec<State>,
    pub next: StateField,
}

fn mass_apply(graph: &ConnectivityGraph, mass: &ConsistentMass, x: &[f64]) -> Vec<f64> {
    par_rows(graph.n_vertices(), |i| graph.row(i).map(|k| mass.entry(k) * x[graph.column(k)]).sum())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients for `M x = b`, preconditioned by the lumped mass.
pub fn solve_consistent_mass(graph: &ConnectivityGraph, mass: &ConsistentMass, b: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = b.len();
    let target = MASS_SOLVE_TOLERANCE * dot(b, b).sqrt();
    let lumped = graph.masses();
    let mut x: Vec<f64> = (0..n).map(|i| b[i] / lumped[i]).collect();
    let mx = mass_apply(graph, mass, &x);
    let mut r: Vec<f64> = (0..n).map(|i| b[i] - mx[i]).collect();
    let mut norm = dot(&r, &r).sqrt();
    if norm <= target {
        return Ok(x);
    }
    let mut z: Vec<f64> = (0..n).map(|i| r[i] / lumped[i]).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..MASS_SOLVE_MAX_ITERATIONS {
        let mp = mass_apply(graph, mass, &p);
        let step = rz / dot(&p, &mp);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * mp[i];
        }
        norm = dot(&r, &r).sqrt();
        if norm <= target {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / lumped[i];
        }
        let rz_next = dot(&r, &z);
        let ratio = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + ratio * p[i];
        }
    }
    Err(SolverError::MassSolve { residual: norm, iterations: MASS_SOLVE_MAX_ITERATIONS })
}

/// High-order fluxes and the update they produce.
///
/// With a consistent mass the update solves
/// `Σ_j m_ij (U^H_j - U_j)/dt + Σ_j F_ij = m_i S_i` and the returned fluxes
/// add `m_ij (ΔU_j - ΔU_i)/dt` to the lumped ones, which gives the same
/// update through the lumped-mass flux form.
pub fn high_order_flux(
    graph: &ConnectivityGraph,
    u: &StateField,
    fluxes: &[Flux],
    sources: &[State],
    dh: &[f64],
    mass: MassOperator,
    dt: f64,
) -> Result<HighOrderStep, SolverError> {
    let mut flux = algebraic_fluxes(graph, u, fluxes, dh);
    let coupling = match mass {
        MassOperator::Lumped => None,
        MassOperator::Consistent(m) | MassOperator::ApproximateInverse(m) => Some(m),
    };
    if let Some(m) = coupling {
        let n = graph.n_vertices();
        let rhs: Vec<State> = par_rows(n, |i| {
            graph.mass(i) * sources[i] - graph.row(i).fold(State::ZERO, |acc, k| acc + flux[k])
        });
        // Per-vertex rate whose differences feed the mass correction.
        let mut rate = vec![State::ZERO; n];
        for c in 0..u.components() {
            let b: Vec<f64> = rhs.iter().map(|r| r[c]).collect();
            let x = match mass {
                MassOperator::Consistent(_) => solve_consistent_mass(graph, m, &b)?,
                _ => (0..n).map(|i| b[i] / graph.mass(i)).collect(),
            };
            for i in 0..n {
                rate[i][c] = x[i];
            }
        }
        let corrected: Vec<Vec<State>> = par_rows(n, |i| {
            graph
                .row(i)
                .map(|k| {
                    let j = graph.column(k);
                    if j == i {
                        flux[k]
                    } else {
                        flux[k] + m.entry(k) * (rate[j] - rate[i])
                    }
                })
                .collect()
        });
        flux = corrected.into_iter().flatten().collect();
    }
    let next = flux_update(graph, u, &flux, sources, dt);
    Ok(HighOrderStep { flux, next })
}
