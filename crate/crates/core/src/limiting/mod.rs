//! Convex limiting of the high-order update.
//!
//! The low-order update satisfies `Ψ^l(U^L_i) ≥ Ψ_i^{l,min}` for every
//! constraint. The limiter writes `U^H_i = Σ_j λ_j (U^L_i + P_ij)` and picks
//! symmetric `ℓ_ij ∈ [0, 1]` so that every `U^L_i + ℓ_ij P_ij`, and hence
//! their convex combination, stays in each constraint's upper contour set.

mod line_search;

pub use line_search::{bisection, line_search_linear, line_search_quadratic, newton_secant, SecantResult, StartsOutside};

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::graph::ConnectivityGraph;
use crate::low_order::par_rows;
use crate::state::{State, StateField};
use crate::systems::{ConstraintFunctional, Strategy};

/// Worst slack accepted by [`check_limited`].
pub const SLACK_TOLERANCE: f64 = 1e-10;

/// Largest violation of a bound at the low-order state treated as rounding.
const START_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimiterConfig {
    /// Constraint names, in limiting order; empty selects the model's list.
    pub constraints: Vec<String>,
    pub relax: bool,
    /// Exponent of the relaxation threshold `(m_i/|D|)^{δ/d}`.
    pub delta: f64,
    pub tol: f64,
    pub kmax: usize,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        LimiterConfig { constraints: Vec::new(), relax: false, delta: 1.5, tol: 1e-10, kmax: 20 }
    }
}

impl LimiterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta > 0.0 && self.delta < 2.0) {
            return Err(format!("limiter.delta = {} is outside (0, 2)", self.delta));
        }
        if !(self.tol > 0.0) {
            return Err(format!("limiter.tol = {} must be positive", self.tol));
        }
        Ok(())
    }

    /// The model's constraints filtered and ordered by name.
    pub fn select(&self, available: Vec<ConstraintFunctional>) -> Result<Vec<ConstraintFunctional>, String> {
        if self.constraints.is_empty() {
            return Ok(available);
        }
        self.constraints
            .iter()
            .map(|name| {
                available.iter().find(|c| &c.name == name).cloned().ok_or_else(|| {
                    let names: Vec<&str> = available.iter().map(|c| c.name.as_str()).collect();
                    format!("unknown constraint `{name}`, expected one of {names:?}")
                })
            })
            .collect()
    }
}

/// `Ψ_i^{l,min}` for each constraint `l` and vertex `i`.
#[derive(Debug, Clone)]
pub struct BoundSet {
    pub bounds: Vec<Vec<f64>>,
    pub relaxed: bool,
}

/// `Ψ_i^min = min(Ψ(U_i), Ψ(U_i + 2 dt S_i), min_j Ψ(Ū_ij))`.
pub fn compute_bounds(
    graph: &ConnectivityGraph,
    u: &StateField,
    bar: &[State],
    sources: &[State],
    dt: f64,
    constraints: &[ConstraintFunctional],
) -> Result<BoundSet, SolverError> {
    let mut bounds = Vec::with_capacity(constraints.len());
    for c in constraints {
        let row = par_rows(graph.n_vertices(), |i| {
            let outside = |what: &str| SolverError::InvariantViolation {
                vertex: i,
                what: format!("constraint `{}` undefined at the {what}", c.name),
            };
            let mut lo = c.evaluate(&u[i]).ok_or_else(|| outside("old state"))?;
            let pushed = u[i] + 2.0 * dt * sources[i];
            lo = lo.min(c.evaluate(&pushed).ok_or_else(|| outside("source-pushed state"))?);
            for k in graph.row(i) {
                lo = lo.min(c.evaluate(&bar[k]).ok_or_else(|| outside("bar state"))?);
            }
            Ok(lo)
        });
        bounds.push(row.into_iter().collect::<Result<Vec<f64>, SolverError>>()?);
    }
    Ok(BoundSet { bounds, relaxed: false })
}

/// Loosen the bounds by the averaged second difference of `Ψ^min`, never
/// by more than the fraction `r_i = (m_i/|D|)^{δ/d}` of its magnitude.
pub fn relax_bounds(graph: &ConnectivityGraph, set: &BoundSet, delta: f64) -> BoundSet {
    let total = graph.total_mass();
    let dim = graph.dim() as f64;
    let bounds = set
        .bounds
        .iter()
        .map(|psi| {
            let second = par_rows(graph.n_vertices(), |i| {
                let (mut num, mut den) = (0.0, 0.0);
                for k in graph.row(i) {
                    let j = graph.column(k);
                    if j != i {
                        num += graph.beta(k) * (psi[j] - psi[i]);
                        den += graph.beta(k);
                    }
                }
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            });
            par_rows(graph.n_vertices(), |i| {
                let mut avg = 0.0;
                for k in graph.row(i) {
                    let j = graph.column(k);
                    if j != i {
                        avg += 0.5 * second[i] + 0.5 * second[j];
                    }
                }
                avg /= 2.0 * graph.degree(i) as f64;
                let r = (graph.mass(i) / total).powf(delta / dim);
                let floor = (1.0 - psi[i].signum() * r) * psi[i];
                floor.max(psi[i] - avg.abs()).min(psi[i])
            })
        })
        .collect();
    BoundSet { bounds, relaxed: true }
}

/// `A_ij = dt (F^L_ij - F^H_ij)` and the convex weights `λ = 1/(card I(i) - 1)`.
#[derive(Debug, Clone)]
pub struct CorrectionMatrix {
    pub a: Vec<State>,
    pub lambda: Vec<f64>,
}

impl CorrectionMatrix {
    /// `P_ij = A_ij / (m_i λ_i)`.
    pub fn direction(&self, graph: &ConnectivityGraph, i: usize, k: usize) -> State {
        (1.0 / (graph.mass(i) * self.lambda[i])) * self.a[k]
    }
}

pub fn compute_corrections(graph: &ConnectivityGraph, low: &[State], high: &[State], dt: f64) -> CorrectionMatrix {
    let a = (0..graph.n_entries())
        .map(|k| if graph.transpose(k) == k { State::ZERO } else { dt * (low[k] - high[k]) })
        .collect();
    let lambda = (0..graph.n_vertices()).map(|i| 1.0 / (graph.degree(i).max(2) - 1) as f64).collect();
    CorrectionMatrix { a, lambda }
}

/// Limited update and the symmetric limiter on the CSR pattern (the
/// diagonal entries are 1 and carry no correction).
#[derive(Debug, Clone)]
pub struct LimitedStep {
    pub next: StateField,
    pub ell: Vec<f64>,
}

impl LimitedStep {
    /// Minimum and mean of `ℓ_ij` over off-diagonal entries.
    pub fn ell_stats(&self, graph: &ConnectivityGraph) -> (f64, f64) {
        let (mut lo, mut sum, mut count) = (1.0f64, 0.0, 0usize);
        for i in 0..graph.n_vertices() {
            for k in graph.row(i) {
                if graph.column(k) != i {
                    lo = lo.min(self.ell[k]);
                    sum += self.ell[k];
                    count += 1;
                }
            }
        }
        (lo, if count > 0 { sum / count as f64 } else { 1.0 })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchSettings {
    pub tol: f64,
    pub kmax: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings { tol: 1e-10, kmax: 20 }
    }
}

/// Largest `ℓ ≤ lmax` keeping `u + ℓ p` feasible for one constraint, given
/// that `u` is feasible.
fn search(c: &ConstraintFunctional, u: &State, p: &State, bound: f64, lmax: f64, settings: SearchSettings) -> Result<f64, f64> {
    if lmax <= 0.0 {
        return Ok(0.0);
    }
    match c.strategy() {
        Strategy::Linear => Ok(line_search_linear(&c.linear_weights().unwrap(), u, p, bound, lmax)),
        Strategy::Quadratic => {
            let coeffs = c.quadratic(u, p, bound).ok_or(f64::NAN)?;
            let ell = line_search_quadratic(coeffs, lmax).map_err(|e| e.0)?;
            #[cfg(debug_assertions)]
            {
                let [a, b, q] = coeffs;
                let scale = 1e-12 * (a.abs() + b.abs() + q.abs());
                for s in 0..=100 {
                    let l = ell * s as f64 / 100.0;
                    debug_assert!((a * l + b) * l + q >= -scale, "quadratic search left the admissible set at ℓ = {l}");
                }
            }
            Ok(ell)
        }
        Strategy::Concave => {
            let g = |l: f64| c.concave(&(*u + l * *p), p, bound);
            let (g0, _) = g(0.0).ok_or(f64::NAN)?;
            if g0 <= 0.0 {
                return if g0 < 0.0 { Err(g0) } else { Ok(0.0) };
            }
            // Shrink the bracket into the functional's domain.
            let mut right = lmax;
            let mut halvings = 0;
            while g(right).is_none() && halvings < 64 {
                right *= 0.5;
                halvings += 1;
            }
            match g(right) {
                Some((gr, _)) if gr >= 0.0 => Ok(right),
                Some(_) => {
                    let res = newton_secant(|l| g(l).unwrap_or((f64::NEG_INFINITY, -1.0)), right, settings.tol, settings.kmax);
                    Ok(res.ell)
                }
                None => Ok(0.0),
            }
        }
        Strategy::Generic => {
            let ok = |l: f64| c.evaluate(&(*u + l * *p)).is_some_and(|v| v >= bound);
            Ok(bisection(ok, lmax, settings.tol))
        }
    }
}

/// Convex limiting in two passes: per-vertex limiters `ℓ^i_j`, then
/// `ℓ_ij = min(ℓ^i_j, ℓ^j_i)` and `U_i = U^L_i + Σ_j ℓ_ij A_ij / m_i`.
pub fn limit_step(
    graph: &ConnectivityGraph,
    low: &StateField,
    high: &StateField,
    corrections: &CorrectionMatrix,
    bounds: &BoundSet,
    constraints: &[ConstraintFunctional],
    settings: SearchSettings,
) -> Result<LimitedStep, SolverError> {
    let rows = par_rows(graph.n_vertices(), |i| -> Result<Vec<f64>, SolverError> {
        let ul = low[i];
        let mut full = 1.0;
        for (l, c) in constraints.iter().enumerate() {
            let bound = bounds.bounds[l][i];
            let slack = c.slack(&ul, bound);
            if slack < -START_TOLERANCE {
                return Err(SolverError::LineSearch { vertex: i, constraint: c.name.clone(), value: slack });
            }
            if c.margin(&ul, bound).is_none_or(|m| m < 0.0) {
                full = 0.0;
            }
        }
        let to_high = high[i] - ul;
        let fail = |c: &ConstraintFunctional, value: f64| SolverError::LineSearch { vertex: i, constraint: c.name.clone(), value };
        for (l, c) in constraints.iter().enumerate() {
            let bound = bounds.bounds[l][i];
            if !c.margin(&(ul + full * to_high), bound).is_some_and(|m| m >= 0.0) {
                full = search(c, &ul, &to_high, bound, full, settings).map_err(|v| fail(c, v))?;
            }
        }
        graph
            .row(i)
            .map(|k| {
                if graph.column(k) == i {
                    return Ok(1.0);
                }
                let p = corrections.direction(graph, i, k);
                let mut ell = full;
                for (l, c) in constraints.iter().enumerate() {
                    let bound = bounds.bounds[l][i];
                    if !c.margin(&(ul + ell * p), bound).is_some_and(|m| m >= 0.0) {
                        ell = search(c, &ul, &p, bound, ell, settings).map_err(|v| fail(c, v))?;
                    }
                }
                Ok(ell)
            })
            .collect()
    });
    let one_sided: Vec<f64> = rows.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect();
    let ell: Vec<f64> = (0..graph.n_entries()).map(|k| one_sided[k].min(one_sided[graph.transpose(k)])).collect();
    let values = par_rows(graph.n_vertices(), |i| {
        let total = graph.row(i).fold(State::ZERO, |acc, k| acc + ell[k] * corrections.a[k]);
        low[i] + (1.0 / graph.mass(i)) * total
    });
    Ok(LimitedStep { next: StateField::new(low.components(), values), ell })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub name: String,
    pub worst_slack: f64,
    pub worst_vertex: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub constraints: Vec<ConstraintReport>,
}

impl LimitReport {
    pub fn passed(&self) -> bool {
        self.constraints.iter().all(|c| c.worst_slack >= -SLACK_TOLERANCE)
    }

    pub fn worst(&self) -> f64 {
        self.constraints.iter().map(|c| c.worst_slack).fold(f64::INFINITY, f64::min)
    }
}

/// Worst slack `(Ψ - Ψ^min)/max(|Ψ^min|, 1)` of each constraint.
pub fn check_limited(u: &StateField, bounds: &BoundSet, constraints: &[ConstraintFunctional]) -> LimitReport {
    let constraints = constraints
        .iter()
        .enumerate()
        .map(|(l, c)| {
            let (worst_vertex, worst_slack) = (0..u.len())
                .map(|i| (i, c.slack(&u[i], bounds.bounds[l][i])))
                .fold((0, f64::INFINITY), |best, x| if x.1 < best.1 { x } else { best });
            ConstraintReport { name: c.name.clone(), worst_slack, worst_vertex }
        })
        .collect();
    LimitReport { constraints }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cg_p1_graph, build_fv_graph};
    use crate::high_order::{high_order_flux, MassOperator};
    use crate::low_order::{low_order_update, max_dt, LowOrderWorkspace};
    use crate::mesh::{MeshDescriptor, Topology};
    use crate::systems::{Euler, LinearAdvection, SystemModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> ConnectivityGraph {
        build_fv_graph(&MeshDescriptor::interval(n, 0.0, 1.0, Topology::Periodic)).unwrap()
    }

    struct Pipeline {
        low: StateField,
        high: StateField,
        corrections: CorrectionMatrix,
        bounds: BoundSet,
        constraints: Vec<ConstraintFunctional>,
    }

    fn pipeline(graph: &ConnectivityGraph, u: &StateField, model: &dyn SystemModel, cfl: f64) -> Pipeline {
        let w = LowOrderWorkspace::new(graph, u, model, 0.0).unwrap();
        let dt = max_dt(graph, &w.d, model, cfl).unwrap();
        let low = low_order_update(graph, u, &w, dt, model).unwrap();
        let zero = vec![0.0; graph.n_entries()];
        let high = high_order_flux(graph, u, &w.fluxes, &w.sources, &zero, MassOperator::Lumped, dt).unwrap();
        let constraints = model.constraints();
        let bounds = compute_bounds(graph, u, &w.bar, &w.sources, dt, &constraints).unwrap();
        let corrections = compute_corrections(graph, &low.flux, &high.flux, dt);
        Pipeline { low: low.next, high: high.next, corrections, bounds, constraints }
    }

    #[test]
    fn constant_field_bounds() {
        let g = line(8);
        let model = Euler::new(1, 1.4);
        let state = model.conserved(1.0, [0.5, 0.0], 1.0);
        let u = StateField::constant(3, 8, state);
        let w = LowOrderWorkspace::new(&g, &u, &model, 0.0).unwrap();
        let bounds = compute_bounds(&g, &u, &w.bar, &w.sources, 0.01, &model.constraints()).unwrap();
        for (l, c) in model.constraints().iter().enumerate() {
            let exact = c.evaluate(&state).unwrap();
            assert!(bounds.bounds[l].iter().all(|b| (b - exact).abs() <= 1e-14 * exact.abs().max(1.0)));
        }
        let relaxed = relax_bounds(&g, &bounds, 1.5);
        for l in 0..bounds.bounds.len() {
            for i in 0..8 {
                assert!((relaxed.bounds[l][i] - bounds.bounds[l][i]).abs() <= 1e-14 * bounds.bounds[l][i].abs());
            }
        }
    }

    #[test]
    fn relaxation_never_crosses_zero() {
        let g = line(16);
        let psi: Vec<f64> = (0..16).map(|i| 0.05 + ((i * 7) % 5) as f64).collect();
        let relaxed = relax_bounds(&g, &BoundSet { bounds: vec![psi.clone()], relaxed: false }, 1.5);
        let r = (1.0f64 / 16.0).powf(1.5);
        for i in 0..16 {
            assert!(relaxed.bounds[0][i] <= psi[i]);
            assert!(relaxed.bounds[0][i] >= (1.0 - r) * psi[i] - 1e-15);
        }
    }

    #[test]
    fn corrections_are_antisymmetric_and_reconstruct_high_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = line(32);
        let model = Euler::new(1, 1.4);
        let u = StateField::new(
            3,
            (0..32).map(|_| model.conserved(rng.gen_range(0.5..1.5), [rng.gen_range(-0.5..0.5), 0.0], rng.gen_range(0.5..1.5))).collect(),
        );
        let p = pipeline(&g, &u, &model, 0.5);
        for k in 0..g.n_entries() {
            assert_eq!(p.corrections.a[k], -p.corrections.a[g.transpose(k)]);
        }
        let lambda_sum: f64 = (0..g.degree(3) - 1).map(|_| p.corrections.lambda[3]).sum();
        assert!((lambda_sum - 1.0).abs() < 1e-15);
        let all = vec![1.0; g.n_entries()];
        let none = vec![0.0; g.n_entries()];
        for (ell, target) in [(&all, &p.high), (&none, &p.low)] {
            for i in 0..32 {
                let total = g.row(i).fold(State::ZERO, |acc, k| acc + ell[k] * p.corrections.a[k]);
                let v = p.low[i] + (1.0 / g.mass(i)) * total;
                assert!((v - target[i]).max_abs() <= 1e-12 * target[i].max_abs());
            }
        }
    }

    #[test]
    fn limiter_respects_bounds_and_conserves() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = Euler::new(1, 1.4);
        let g = line(100);
        for _ in 0..20 {
            let u = StateField::new(
                3,
                (0..100)
                    .map(|_| model.conserved(rng.gen_range(0.1..2.0), [rng.gen_range(-2.0..2.0), 0.0], rng.gen_range(0.1..2.0)))
                    .collect(),
            );
            let p = pipeline(&g, &u, &model, 0.9);
            let step = limit_step(&g, &p.low, &p.high, &p.corrections, &p.bounds, &p.constraints, SearchSettings::default()).unwrap();
            let report = check_limited(&step.next, &p.bounds, &p.constraints);
            assert!(report.passed(), "{report:?}");
            assert!(step.next.values().iter().all(|s| model.admissible(s)));
            let (a, b) = (step.next.total(g.masses()), p.high.total(g.masses()));
            let scale = u.total_abs(g.masses());
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() <= 1e-12 * scale[c]);
            }
            for k in 0..g.n_entries() {
                assert_eq!(step.ell[k], step.ell[g.transpose(k)]);
                assert!((0.0..=1.0).contains(&step.ell[k]));
            }
        }
    }

    #[test]
    fn limiter_trivial_cases() {
        let g = line(20);
        let model = LinearAdvection::new(1, [1.0, 0.0]);
        let smooth = StateField::new(1, (0..20).map(|i| State::scalar(1.0 + 1e-3 * i as f64)).collect());
        let p = pipeline(&g, &smooth, &model, 0.5);
        let zero = CorrectionMatrix { a: vec![State::ZERO; g.n_entries()], lambda: p.corrections.lambda.clone() };
        let step = limit_step(&g, &p.low, &p.low, &zero, &p.bounds, &p.constraints, SearchSettings::default()).unwrap();
        assert_eq!(step.next, p.low);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rough = StateField::new(1, (0..20).map(|_| State::scalar(rng.gen_range(0.0..1.0))).collect());
        let p = pipeline(&g, &rough, &model, 0.5);
        let step = limit_step(&g, &p.low, &p.high, &p.corrections, &p.bounds, &p.constraints, SearchSettings::default()).unwrap();
        assert!(check_limited(&step.next, &p.bounds, &p.constraints).passed());
        // Central differences overshoot on rough data, so some edge is limited.
        assert!(step.ell_stats(&g).0 < 1.0);
        assert!(check_limited(&p.high, &p.bounds, &p.constraints).worst() < 0.0);
    }

    #[test]
    fn already_admissible_high_order_is_kept() {
        let mesh = MeshDescriptor::triangles(6, 6, [0.0, 0.0], [1.0, 1.0], Topology::Periodic, 0.0, 0);
        let g = build_cg_p1_graph(&mesh).unwrap();
        let model = LinearAdvection::new(2, [1.0, 0.5]);
        let u = StateField::constant(1, g.n_vertices(), State::scalar(0.3));
        let p = pipeline(&g, &u, &model, 0.5);
        let step = limit_step(&g, &p.low, &p.high, &p.corrections, &p.bounds, &p.constraints, SearchSettings::default()).unwrap();
        assert!(step.ell.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn infeasible_start_is_reported() {
        let g = line(4);
        let model = LinearAdvection::new(1, [1.0, 0.0]);
        let u = StateField::constant(1, 4, State::scalar(0.5));
        let bounds = BoundSet { bounds: vec![vec![0.9; 4], vec![-1.0; 4]], relaxed: false };
        let c = CorrectionMatrix { a: vec![State::ZERO; g.n_entries()], lambda: vec![0.5; 4] };
        let err = limit_step(&g, &u, &u, &c, &bounds, &model.constraints(), SearchSettings::default()).unwrap_err();
        assert!(matches!(err, SolverError::LineSearch { vertex: 0, .. }));
    }

    #[test]
    fn selection_by_name() {
        let model = Euler::new(1, 1.4);
        let cfg = LimiterConfig { constraints: vec!["internal_energy_min".into(), "rho_min".into()], ..Default::default() };
        let chosen = cfg.select(model.constraints()).unwrap();
        assert_eq!(chosen[0].name, "internal_energy_min");
        let bad = LimiterConfig { constraints: vec!["nope".into()], ..Default::default() };
        assert!(bad.select(model.constraints()).is_err());
    }
}
