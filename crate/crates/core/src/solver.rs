//! The forward-Euler substep (low order, high order, limiting) and the
//! time-step control around the SSP driver.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::graph::{ConnectivityGraph, ConsistentMass};
use crate::high_order::{
    blend_viscosity, dh_commutator, dh_smoothness, gap_quantities, high_order_flux, psi_greedy, smoothness_alpha,
    HighOrderConfig, HighOrderMethod, MassMode, MassOperator,
};
use crate::limiting::{
    check_limited, compute_bounds, compute_corrections, limit_step, relax_bounds, LimitReport, LimiterConfig,
    SearchSettings,
};
use crate::low_order::{check_cfl, compute_dl, low_order_update, max_dt, LowOrderWorkspace};
use crate::state::StateField;
use crate::systems::{ConstraintFunctional, SystemModel};
use crate::time_integration::{ssp_step, AlphaBetaTableau, Substep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    LowOrder,
    /// High order without limiting (diagnostic only).
    HighOrder,
    Limited,
}

/// Diagnostics of one forward-Euler substep.
#[derive(Debug, Clone)]
pub struct SubstepRecord {
    pub t: f64,
    pub tau: f64,
    pub ell_min: f64,
    pub ell_mean: f64,
    pub report: Option<LimitReport>,
}

/// Halvings of `dt` tried after a stage breaks the CFL condition.
const CFL_RETRIES: usize = 8;

pub struct Solver<'a> {
    pub graph: &'a ConnectivityGraph,
    pub model: &'a dyn SystemModel,
    pub mass: Option<&'a ConsistentMass>,
    pub scheme: Scheme,
    pub high: HighOrderConfig,
    pub limiter: LimiterConfig,
    pub constraints: Vec<ConstraintFunctional>,
    /// Fail a substep whose limited state misses a bound, and a stage with an
    /// inadmissible state.
    pub strict: bool,
    pub log: Vec<SubstepRecord>,
}

impl<'a> Solver<'a> {
    pub fn new(graph: &'a ConnectivityGraph, model: &'a dyn SystemModel, scheme: Scheme) -> Self {
        Solver {
            graph,
            model,
            mass: None,
            scheme,
            high: HighOrderConfig::default(),
            limiter: LimiterConfig::default(),
            constraints: model.constraints(),
            strict: false,
            log: Vec::new(),
        }
    }

    /// `cfl · c_os · dt_max(U)`.
    pub fn stable_dt(&self, u: &StateField, cfl: f64, tableau: &AlphaBetaTableau) -> Result<f64, SolverError> {
        let d = compute_dl(self.graph, u, self.model);
        Ok(tableau.c_os() * max_dt(self.graph, &d, self.model, cfl)?)
    }

    fn mass_operator(&self) -> Result<MassOperator<'a>, SolverError> {
        Ok(match self.high.mass {
            MassMode::Lumped => MassOperator::Lumped,
            MassMode::Consistent => MassOperator::Consistent(self.mass.ok_or(SolverError::MissingMass)?),
            MassMode::ApproximateInverse => MassOperator::ApproximateInverse(self.mass.ok_or(SolverError::MissingMass)?),
        })
    }

    fn high_viscosity(&self, u: &StateField, work: &LowOrderWorkspace, tau: f64) -> Result<Vec<f64>, SolverError> {
        let tracked = self.high.tracked.unwrap_or_else(|| self.model.tracked_component());
        Ok(match self.high.method {
            HighOrderMethod::Smoothness => {
                let g: Vec<f64> = u.values().iter().map(|s| s[tracked]).collect();
                let alpha = smoothness_alpha(self.graph, &g, self.high.guard);
                dh_smoothness(self.graph, &work.d, &alpha, self.high.alpha0, self.high.q)
            }
            HighOrderMethod::Greedy => {
                let gaps = gap_quantities(self.graph, u, &work.bar, &work.d, tau, tracked, self.high.gap_bounds);
                blend_viscosity(self.graph, &work.d, &psi_greedy(&gaps))
            }
            HighOrderMethod::Commutator => {
                dh_commutator(self.graph, u, &work.fluxes, &work.d, self.model, self.high.entropy, self.high.guard)?
            }
        })
    }

    /// One step of size at most `dt` (shortened on a CFL violation).
    /// Returns the new state and the step actually taken.
    pub fn step(&mut self, u: &StateField, t: f64, dt: f64, tableau: &AlphaBetaTableau) -> Result<(StateField, f64), SolverError> {
        let mut dt = dt;
        let mut attempt = 0;
        loop {
            let mark = self.log.len();
            match ssp_step(self, u, t, dt, tableau) {
                Ok(next) => return Ok((next, dt)),
                Err(SolverError::Cfl { .. }) if attempt < CFL_RETRIES => {
                    self.log.truncate(mark);
                    dt *= 0.5;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

impl Substep for Solver<'_> {
    fn substep(&mut self, w: &StateField, t: f64, tau: f64) -> Result<StateField, SolverError> {
        let graph = self.graph;
        let work = LowOrderWorkspace::new(graph, w, self.model, t)?;
        check_cfl(graph, &work.d, self.model, tau)?;
        let low = low_order_update(graph, w, &work, tau, self.model)?;
        if self.scheme == Scheme::LowOrder {
            self.log.push(SubstepRecord { t, tau, ell_min: 0.0, ell_mean: 0.0, report: None });
            return Ok(low.next);
        }
        let dh = self.high_viscosity(w, &work, tau)?;
        let high = high_order_flux(graph, w, &work.fluxes, &work.sources, &dh, self.mass_operator()?, tau)?;
        if self.scheme == Scheme::HighOrder {
            self.log.push(SubstepRecord { t, tau, ell_min: 1.0, ell_mean: 1.0, report: None });
            return Ok(high.next);
        }
        let mut bounds = compute_bounds(graph, w, &work.bar, &work.sources, tau, &self.constraints)?;
        if self.limiter.relax {
            bounds = relax_bounds(graph, &bounds, self.limiter.delta);
        }
        let corrections = compute_corrections(graph, &low.flux, &high.flux, tau);
        let settings = SearchSettings { tol: self.limiter.tol, kmax: self.limiter.kmax };
        let limited = limit_step(graph, &low.next, &high.next, &corrections, &bounds, &self.constraints, settings)?;
        let report = check_limited(&limited.next, &bounds, &self.constraints);
        if self.strict && !report.passed() {
            let worst = report.constraints.iter().min_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack)).unwrap();
            return Err(SolverError::InvariantViolation {
                vertex: worst.worst_vertex,
                what: format!("limited state misses `{}` by slack {:e}", worst.name, worst.worst_slack),
            });
        }
        let (ell_min, ell_mean) = limited.ell_stats(graph);
        self.log.push(SubstepRecord { t, tau, ell_min, ell_mean, report: Some(report) });
        Ok(limited.next)
    }

    fn stage_done(&mut self, _stage: usize, w: &StateField) -> Result<(), SolverError> {
        if !self.strict {
            return Ok(());
        }
        match w.values().iter().position(|s| !self.model.admissible(s)) {
            Some(vertex) => Err(SolverError::InvariantViolation { vertex, what: "inadmissible stage state".into() }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cg_consistent_mass, build_cg_p1_graph, build_fv_graph};
    use crate::mesh::{MeshDescriptor, Topology};
    use crate::state::State;
    use crate::systems::{Euler, LinearAdvection};
    use crate::time_integration::SspMethod;

    fn sod(n: usize) -> (ConnectivityGraph, Euler, StateField) {
        let g = build_fv_graph(&MeshDescriptor::interval(n, 0.0, 1.0, Topology::CompactSupport)).unwrap();
        let model = Euler::new(1, 1.4);
        let u = StateField::new(
            3,
            g.positions()
                .iter()
                .map(|x| if x[0] < 0.5 { model.conserved(1.0, [0.0; 2], 1.0) } else { model.conserved(0.125, [0.0; 2], 0.1) })
                .collect(),
        );
        (g, model, u)
    }

    #[test]
    fn limited_sod_steps_stay_admissible() {
        let (g, model, mut u) = sod(100);
        let mut solver = Solver::new(&g, &model, Scheme::Limited);
        solver.strict = true;
        let tableau = SspMethod::Ssp33.tableau();
        let mut t = 0.0;
        for _ in 0..40 {
            let dt = solver.stable_dt(&u, 0.9, &tableau).unwrap();
            let (next, taken) = solver.step(&u, t, dt, &tableau).unwrap();
            u = next;
            t += taken;
        }
        assert!(solver.log.iter().all(|r| r.report.as_ref().unwrap().passed()));
        assert!(solver.log.iter().any(|r| r.ell_min < 1.0));
    }

    #[test]
    fn every_method_runs_on_each_discretization() {
        let mesh = MeshDescriptor::interval(40, 0.0, 1.0, Topology::Periodic);
        let cg = build_cg_p1_graph(&mesh).unwrap();
        let mass = build_cg_consistent_mass(&mesh, &cg).unwrap();
        let fv = build_fv_graph(&mesh).unwrap();
        let model = LinearAdvection::new(1, [1.0, 0.0]);
        for graph in [&cg, &fv] {
            let u = StateField::new(1, graph.positions().iter().map(|x| State::scalar((6.28 * x[0]).sin())).collect());
            for method in [HighOrderMethod::Smoothness, HighOrderMethod::Greedy, HighOrderMethod::Commutator] {
                for mode in [MassMode::Lumped, MassMode::Consistent, MassMode::ApproximateInverse] {
                    let mut solver = Solver::new(graph, &model, Scheme::Limited);
                    solver.high.method = method;
                    solver.high.mass = mode;
                    if std::ptr::eq(graph, &cg) {
                        solver.mass = Some(&mass);
                    }
                    let tableau = SspMethod::Ssp22.tableau();
                    let dt = solver.stable_dt(&u, 0.5, &tableau).unwrap();
                    let res = solver.step(&u, 0.0, dt, &tableau);
                    if mode != MassMode::Lumped && solver.mass.is_none() {
                        assert!(matches!(res, Err(SolverError::Stage { .. })));
                    } else {
                        let (next, _) = res.unwrap();
                        let drift = next.total(graph.masses())[0] - u.total(graph.masses())[0];
                        assert!(drift.abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn oversized_step_is_retried() {
        let (g, model, u) = sod(50);
        let mut solver = Solver::new(&g, &model, Scheme::LowOrder);
        let tableau = SspMethod::Fe.tableau();
        let dt = solver.stable_dt(&u, 1.0, &tableau).unwrap();
        let (_, taken) = solver.step(&u, 0.0, 3.0 * dt, &tableau).unwrap();
        assert!(taken <= dt * (1.0 + 1e-12));
    }
}
