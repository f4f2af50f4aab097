//! Low-order graph-viscosity update.
//!
//! All per-entry arrays are aligned with the graph's CSR layout. The
//! diagonal entry of `d` holds `d_ii = -Σ_{j≠i} d_ij`, the diagonal bar state
//! is `U_i` itself.

use rayon::prelude::*;

use crate::error::SolverError;
use crate::graph::ConnectivityGraph;
use crate::state::{norm, Flux, State, StateField};
use crate::systems::{unit, EntropyValue, SystemModel};

/// Minimum number of rows handed to one worker.
pub const MIN_ROWS_PER_TASK: usize = 256;

/// Relative floor on the viscosity, keeping bar states defined where the
/// wave speed vanishes.
pub const VISCOSITY_FLOOR: f64 = 1e-14;

/// Evaluate `f(i)` for every vertex in parallel, in order.
pub fn par_rows<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().with_min_len(MIN_ROWS_PER_TASK).map(f).collect()
}

pub fn physical_fluxes(model: &dyn SystemModel, u: &StateField) -> Result<Vec<Flux>, SolverError> {
    par_rows(u.len(), |i| model.flux(&u[i]).map_err(SolverError::from)).into_iter().collect()
}

/// Low-order viscosity, aligned with the CSR entries.
pub fn compute_dl(graph: &ConnectivityGraph, u: &StateField, model: &dyn SystemModel) -> Vec<f64> {
    let n = graph.n_vertices();
    // Upper-triangle values, including the symmetric max of both directions.
    let rows: Vec<Vec<f64>> = par_rows(n, |i| {
        graph
            .row(i)
            .map(|k| {
                let j = graph.column(k);
                if j <= i {
                    return 0.0;
                }
                let (dir, len) = unit(graph.c(k));
                if len == 0.0 {
                    return 0.0;
                }
                let back = [-dir[0], -dir[1]];
                let lij = model.lambda_max(&dir, &u[i], &u[j]);
                let lji = model.lambda_max(&back, &u[j], &u[i]);
                lij.max(lji) * len
            })
            .collect()
    });
    let mut d: Vec<f64> = rows.into_iter().flatten().collect();
    let peak = d.iter().copied().fold(0.0, f64::max);
    let floor = (VISCOSITY_FLOOR * peak).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for k in graph.row(i) {
            let j = graph.column(k);
            if j > i && norm(graph.c(k)) > 0.0 {
                d[k] = d[k].max(floor);
                d[graph.transpose(k)] = d[k];
            }
        }
    }
    let diag: Vec<f64> = par_rows(n, |i| -graph.row(i).filter(|&k| graph.column(k) != i).map(|k| d[k]).sum::<f64>());
    for (i, v) in diag.into_iter().enumerate() {
        d[graph.diagonal(i)] = v;
    }
    d
}

/// `Ū_ij = ½(U_i + U_j) - (f(U_j) - f(U_i)) c_ij / (2 d_ij)`.
pub fn compute_bar_states(graph: &ConnectivityGraph, u: &StateField, fluxes: &[Flux], d: &[f64]) -> Vec<State> {
    par_rows(graph.n_vertices(), |i| {
        graph
            .row(i)
            .map(|k| {
                let j = graph.column(k);
                let mean = 0.5 * (u[i] + u[j]);
                if j == i || d[k] <= 0.0 {
                    return if j == i { u[i] } else { mean };
                }
                mean - (0.5 / d[k]) * (fluxes[j] - fluxes[i]).dot(graph.c(k))
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Largest step of the local invariance theorem, times `cfl`.
pub fn max_dt(graph: &ConnectivityGraph, d: &[f64], model: &dyn SystemModel, cfl: f64) -> Result<f64, SolverError> {
    let tau0 = model.tau0();
    if !(tau0 > 0.0) {
        return Err(SolverError::ZeroTau0);
    }
    let viscous = (0..graph.n_vertices())
        .map(|i| {
            let dii = d[graph.diagonal(i)];
            if dii < 0.0 {
                graph.mass(i) / (-4.0 * dii)
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    Ok(cfl * viscous.min(0.5 * tau0))
}

/// Fails with the worst vertex if `dt` breaks `1 + 4 dt d_ii / m_i ≥ 0` or
/// `2 dt ≤ τ0`.
pub fn check_cfl(graph: &ConnectivityGraph, d: &[f64], model: &dyn SystemModel, dt: f64) -> Result<(), SolverError> {
    let tau0 = model.tau0();
    let slack = 1e-12;
    let mut worst = (usize::MAX, f64::INFINITY);
    for i in 0..graph.n_vertices() {
        let dii = d[graph.diagonal(i)];
        let limit = if dii < 0.0 { graph.mass(i) / (-4.0 * dii) } else { f64::INFINITY };
        if limit < worst.1 {
            worst = (i, limit);
        }
    }
    let limit = worst.1.min(0.5 * tau0);
    if dt > limit * (1.0 + slack) {
        return Err(SolverError::Cfl { vertex: worst.0.min(graph.n_vertices().saturating_sub(1)), dt, dt_max: limit });
    }
    Ok(())
}

pub fn sources(model: &dyn SystemModel, u: &StateField, t: f64) -> Vec<State> {
    if !model.has_source() {
        return vec![State::ZERO; u.len()];
    }
    par_rows(u.len(), |i| model.source(&u[i], i, t))
}

/// Per-vertex data of one low-order substep.
#[derive(Debug, Clone)]
pub struct LowOrderWorkspace {
    pub d: Vec<f64>,
    pub bar: Vec<State>,
    pub fluxes: Vec<Flux>,
    pub sources: Vec<State>,
}

impl LowOrderWorkspace {
    pub fn new(graph: &ConnectivityGraph, u: &StateField, model: &dyn SystemModel, t: f64) -> Result<Self, SolverError> {
        let fluxes = physical_fluxes(model, u)?;
        let d = compute_dl(graph, u, model);
        let bar = compute_bar_states(graph, u, &fluxes, &d);
        Ok(LowOrderWorkspace { d, bar, fluxes, sources: sources(model, u, t) })
    }
}

/// `F_ij = (f(U_i) + f(U_j)) c_ij - d_ij (U_j - U_i)` for a given viscosity.
pub fn algebraic_fluxes(graph: &ConnectivityGraph, u: &StateField, fluxes: &[Flux], d: &[f64]) -> Vec<State> {
    par_rows(graph.n_vertices(), |i| {
        graph
            .row(i)
            .map(|k| {
                let j = graph.column(k);
                let central = (fluxes[i] + fluxes[j]).dot(graph.c(k));
                if j == i {
                    central
                } else {
                    central - d[k] * (u[j] - u[i])
                }
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// `U_i - dt/m_i Σ_j F_ij + dt S_i`.
pub fn flux_update(graph: &ConnectivityGraph, u: &StateField, flux: &[State], sources: &[State], dt: f64) -> StateField {
    let values = par_rows(graph.n_vertices(), |i| {
        let total = graph.row(i).fold(State::ZERO, |acc, k| acc + flux[k]);
        u[i] - (dt / graph.mass(i)) * total + dt * sources[i]
    });
    StateField::new(u.components(), values)
}

#[derive(Debug, Clone)]
pub struct LowOrderStep {
    pub next: StateField,
    pub flux: Vec<State>,
}

pub fn low_order_update(
    graph: &ConnectivityGraph,
    u: &StateField,
    work: &LowOrderWorkspace,
    dt: f64,
    model: &dyn SystemModel,
) -> Result<LowOrderStep, SolverError> {
    check_cfl(graph, &work.d, model, dt)?;
    let flux = algebraic_fluxes(graph, u, &work.fluxes, &work.d);
    let next = flux_update(graph, u, &flux, &work.sources, dt);
    Ok(LowOrderStep { next, flux })
}

/// The same update written as a convex combination of `U_i`, the bar states
/// and `U_i + 2 dt S(U_i)`.
pub fn convex_form_update(graph: &ConnectivityGraph, u: &StateField, work: &LowOrderWorkspace, dt: f64) -> StateField {
    let values = par_rows(graph.n_vertices(), |i| {
        let m = graph.mass(i);
        let dii = work.d[graph.diagonal(i)];
        let mut hyperbolic = (1.0 + 4.0 * dt * dii / m) * u[i];
        for k in graph.row(i) {
            if graph.column(k) != i {
                hyperbolic += (4.0 * dt * work.d[k] / m) * work.bar[k];
            }
        }
        0.5 * hyperbolic + 0.5 * (u[i] + 2.0 * dt * work.sources[i])
    });
    StateField::new(u.components(), values)
}

/// Largest relative gap between the flux form and the convex form.
pub fn convex_form_defect(a: &StateField, b: &StateField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (*x - *y).max_abs() / x.max_abs().max(y.max_abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Left side minus right side of the local discrete entropy inequality.
pub fn entropy_inequality_residual(
    graph: &ConnectivityGraph,
    u: &StateField,
    u_next: &StateField,
    work: &LowOrderWorkspace,
    dt: f64,
    model: &dyn SystemModel,
    which: usize,
) -> Result<Vec<f64>, SolverError> {
    let old: Vec<EntropyValue> =
        par_rows(u.len(), |i| model.entropy(which, &u[i])).into_iter().collect::<Result<_, _>>()?;
    let new: Vec<EntropyValue> =
        par_rows(u.len(), |i| model.entropy(which, &u_next[i])).into_iter().collect::<Result<_, _>>()?;
    Ok(par_rows(graph.n_vertices(), |i| {
        let m = graph.mass(i);
        let mut r = m / dt * (new[i].eta - old[i].eta);
        for k in graph.row(i) {
            let j = graph.column(k);
            let c = graph.c(k);
            r += old[j].flux[0] * c[0] + old[j].flux[1] * c[1];
            if j != i {
                r -= work.d[k] * (old[j].eta - old[i].eta);
            }
        }
        r - m * work.sources[i].dot(&new[i].gradient)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cg_p1_graph, build_fv_graph};
    use crate::mesh::{MeshDescriptor, Topology};
    use crate::systems::{Burgers, Euler, LinearAdvection, ShallowWater};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn periodic_line(n: usize) -> ConnectivityGraph {
        build_fv_graph(&MeshDescriptor::interval(n, 0.0, 1.0, Topology::Periodic)).unwrap()
    }

    fn scalar_field(values: Vec<f64>) -> StateField {
        StateField::new(1, values.into_iter().map(State::scalar).collect())
    }

    #[test]
    fn advection_viscosity_and_time_step() {
        let g = periodic_line(10);
        let model = LinearAdvection::new(1, [1.0, 0.0]);
        let u = scalar_field((0..10).map(|i| i as f64).collect());
        let d = compute_dl(&g, &u, &model);
        for i in 0..10 {
            for k in g.row(i) {
                let expect = if g.column(k) == i { -1.0 } else { 0.5 };
                assert_eq!(d[k], expect);
            }
        }
        let dt = max_dt(&g, &d, &model, 0.5).unwrap();
        assert!((dt - 0.5 * 0.1 / 4.0).abs() < 1e-16);
    }

    #[test]
    fn coincident_burgers_states() {
        let g = periodic_line(6);
        let u = scalar_field(vec![2.0; 6]);
        let d = compute_dl(&g, &u, &Burgers::new(1));
        assert!(g.row(2).filter(|&k| g.column(k) != 2).all(|k| d[k] == 1.0));
        let zero = scalar_field(vec![0.0; 6]);
        let d = compute_dl(&g, &zero, &Burgers::new(1));
        let flux = physical_fluxes(&Burgers::new(1), &zero).unwrap();
        let bar = compute_bar_states(&g, &zero, &flux, &d);
        assert!(g.row(2).filter(|&k| g.column(k) != 2).all(|k| d[k] > 0.0));
        assert!(bar.iter().all(|b| b[0] == 0.0));
    }

    #[test]
    fn upwind_bar_state_for_advection() {
        let g = periodic_line(8);
        let model = LinearAdvection::new(1, [2.0, 0.0]);
        let u = scalar_field((0..8).map(|i| (i * i) as f64).collect());
        let w = LowOrderWorkspace::new(&g, &u, &model, 0.0).unwrap();
        let k = g.find(3, 4).unwrap();
        assert_eq!(w.bar[k][0], u[3][0]);
        assert_eq!(w.bar[k], w.bar[g.transpose(k)]);
    }

    #[test]
    fn tau0_zero_is_an_error() {
        let g = periodic_line(4);
        let mut model = ShallowWater::new(1, 9.81);
        model.tau0 = 0.0;
        assert!(matches!(max_dt(&g, &vec![0.0; g.n_entries()], &model, 1.0), Err(SolverError::ZeroTau0)));
    }

    #[test]
    fn cfl_violation_names_a_vertex() {
        let g = periodic_line(10);
        let model = LinearAdvection::new(1, [1.0, 0.0]);
        let u = scalar_field(vec![1.0; 10]);
        let w = LowOrderWorkspace::new(&g, &u, &model, 0.0).unwrap();
        let err = low_order_update(&g, &u, &w, 1.0, &model).unwrap_err();
        assert!(matches!(err, SolverError::Cfl { .. }));
    }

    #[test]
    fn constant_field_is_steady() {
        let mesh = MeshDescriptor::triangles(6, 6, [0.0, 0.0], [1.0, 1.0], Topology::Periodic, 0.2, 1);
        let g = build_cg_p1_graph(&mesh).unwrap();
        let model = Euler::new(2, 1.4);
        let u = StateField::constant(4, g.n_vertices(), model.conserved(1.0, [0.3, -0.1], 2.0));
        let w = LowOrderWorkspace::new(&g, &u, &model, 0.0).unwrap();
        let dt = max_dt(&g, &w.d, &model, 1.0).unwrap();
        let step = low_order_update(&g, &u, &w, dt, &model).unwrap();
        assert!(convex_form_defect(&step.next, &u) < 1e-13);
        let r = entropy_inequality_residual(&g, &u, &step.next, &w, dt, &model, 0).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn random_scalar_steps_stay_within_bar_state_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = periodic_line(64);
        let model = Burgers::new(1);
        for _ in 0..20 {
            let u = scalar_field((0..64).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let total = u.total(g.masses())[0];
            let w = LowOrderWorkspace::new(&g, &u, &model, 0.0).unwrap();
            let dt = max_dt(&g, &w.d, &model, 1.0).unwrap();
            let step = low_order_update(&g, &u, &w, dt, &model).unwrap();
            assert!(convex_form_defect(&step.next, &convex_form_update(&g, &u, &w, dt)) < 1e-12);
            assert!((step.next.total(g.masses())[0] - total).abs() < 1e-13 * u.total_abs(g.masses())[0]);
            for i in 0..64 {
                let (lo, hi) = g.row(i).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                    (lo.min(w.bar[k][0]), hi.max(w.bar[k][0]))
                });
                assert!(step.next[i][0] >= lo - 1e-14 && step.next[i][0] <= hi + 1e-14);
                for k in g.row(i) {
                    assert_eq!(step.flux[k][0], -step.flux[g.transpose(k)][0]);
                }
            }
            let r = entropy_inequality_residual(&g, &u, &step.next, &w, dt, &model, 0).unwrap();
            assert!(r.iter().all(|v| *v <= 1e-10));
        }
    }

    #[test]
    fn euler_bar_states_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = Euler::new(1, 1.4);
        let g = periodic_line(2 * 500);
        let u = StateField::new(
            3,
            (0..1000)
                .map(|_| model.conserved(rng.gen_range(0.01..5.0), [rng.gen_range(-5.0..5.0), 0.0], rng.gen_range(0.01..5.0)))
                .collect(),
        );
        let w = LowOrderWorkspace::new(&g, &u, &model, 0.0).unwrap();
        assert!(w.bar.iter().all(|b| model.admissible(b)));
        let sw = ShallowWater::new(1, 9.81);
        let h = StateField::new(
            2,
            (0..1000).map(|_| {
                let h: f64 = rng.gen_range(0.01..5.0);
                State::from_slice(&[h, h * rng.gen_range(-5.0..5.0)])
            }).collect(),
        );
        let w = LowOrderWorkspace::new(&g, &h, &sw, 0.0).unwrap();
        assert!(w.bar.iter().all(|b| sw.admissible(b)));
    }
}
