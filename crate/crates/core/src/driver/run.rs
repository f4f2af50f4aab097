//! Building a discretized problem from a config and integrating it.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::error::SolverError;
use crate::graph::{build_cg_consistent_mass, build_cg_p1_graph, build_fv_graph, ConnectivityGraph, ConsistentMass};
use crate::high_order::MassMode;
use crate::limiting::LimiterConfig;
use crate::mesh::{MeshDescriptor, Topology};
use crate::solver::{Scheme, Solver};
use crate::state::StateField;
use crate::systems::ConstraintFunctional;

use super::config::{ConfigError, DiscretizationKind, ElementChoice, OutputFormat, RunConfig};
use super::output::{write_snapshot_csv, write_snapshot_vtk, write_summary, DiagnosticsWriter, StepRecord, Summary};
use super::presets::{instantiate, sample_field, Problem};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step {step} (t = {t}): {source}")]
    Solver {
        step: usize,
        t: f64,
        #[source]
        source: SolverError,
        /// Last good state, kept for the failure dump.
        state: Box<StateField>,
    },
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    /// Process exit code: 1 for a failed run, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver { .. } => 1,
            RunError::Config(_) | RunError::Io(_) => 2,
        }
    }
}

/// Mesh, graph, model and initial data for one config.
pub struct Setup {
    pub config: RunConfig,
    pub mesh: MeshDescriptor,
    pub graph: ConnectivityGraph,
    pub mass: Option<ConsistentMass>,
    pub problem: Problem,
    pub constraints: Vec<ConstraintFunctional>,
}

impl Setup {
    pub fn new(config: &RunConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let preset = super::presets::find(&config.problem).expect("validated");
        let m = &config.mesh;
        let periodic = m.periodic.unwrap_or(preset.periodic);
        let topology = if periodic { Topology::Periodic } else { Topology::CompactSupport };
        let lower = m.lower.unwrap_or(preset.lower);
        let upper = m.upper.unwrap_or(preset.upper);
        let mesh_error = |e: crate::error::MeshError| ConfigError::invalid("mesh", e.to_string());
        let mesh = match preset.dim {
            1 => MeshDescriptor::interval_perturbed(m.cells, lower[0], upper[0], topology, m.jitter, config.seed),
            _ => {
                let ny = m.cells_y.unwrap_or(m.cells);
                let elements = m.elements.unwrap_or(match config.discretization {
                    DiscretizationKind::Fv => ElementChoice::Quads,
                    DiscretizationKind::CgP1 => ElementChoice::Triangles,
                });
                match elements {
                    ElementChoice::Quads if m.jitter > 0.0 => {
                        return Err(ConfigError::invalid("mesh.jitter", "quad grids are not perturbed"));
                    }
                    ElementChoice::Quads => MeshDescriptor::cartesian_quads(m.cells, ny, lower, upper, topology),
                    ElementChoice::Triangles => {
                        MeshDescriptor::triangles(m.cells, ny, lower, upper, topology, m.jitter, config.seed)
                    }
                }
            }
        };
        let (graph, mass) = match config.discretization {
            DiscretizationKind::Fv => (build_fv_graph(&mesh).map_err(mesh_error)?, None),
            DiscretizationKind::CgP1 => {
                let graph = build_cg_p1_graph(&mesh).map_err(mesh_error)?;
                let mass = build_cg_consistent_mass(&mesh, &graph).map_err(mesh_error)?;
                (graph, Some(mass))
            }
        };
        if config.high_order.mass != MassMode::Lumped && mass.is_none() {
            return Err(ConfigError::invalid("high_order.mass", "a consistent mass matrix needs the cg_p1 discretization"));
        }
        let problem = instantiate(config, &graph)?;
        let limiter = if config.limiter.constraints.is_empty() {
            LimiterConfig {
                constraints: preset.constraints.iter().map(|s| s.to_string()).collect(),
                ..config.limiter.clone()
            }
        } else {
            config.limiter.clone()
        };
        let constraints =
            limiter.select(problem.model.constraints()).map_err(|e| ConfigError::invalid("limiter.constraints", e))?;
        if let Some(k) = config.high_order.tracked {
            if k >= problem.model.components() {
                return Err(ConfigError::invalid("high_order.tracked", format!("component {k} does not exist")));
            }
        }
        if config.high_order.entropy >= problem.model.entropy_names().len() {
            return Err(ConfigError::invalid(
                "high_order.entropy",
                format!("expected one of {:?} by index", problem.model.entropy_names()),
            ));
        }
        Ok(Setup { config: config.clone(), mesh, graph, mass, problem, constraints })
    }

    pub fn initial_state(&self) -> StateField {
        let model = self.problem.model.as_ref();
        sample_field(&self.mesh, &self.graph, self.config.discretization, model.components(), |x| {
            Some(self.problem.initial(x))
        })
        .expect("initial data are defined everywhere")
    }

    /// Exact solution sampled like the discrete field, if known at `t`.
    pub fn exact_state(&self, t: f64) -> Option<StateField> {
        if !self.problem.has_exact() {
            return None;
        }
        let model = self.problem.model.as_ref();
        sample_field(&self.mesh, &self.graph, self.config.discretization, model.components(), |x| {
            self.problem.exact(x, t)
        })
    }

    pub fn t_final(&self) -> f64 {
        self.config.time.t_final.unwrap_or(self.problem.preset.t_final)
    }

    pub fn solver(&self) -> Solver<'_> {
        let mut solver = Solver::new(&self.graph, self.problem.model.as_ref(), self.config.scheme);
        solver.mass = self.mass.as_ref();
        solver.high = self.config.high_order.clone();
        solver.limiter = self.config.limiter.clone();
        solver.constraints = self.constraints.clone();
        solver.strict = self.config.strict;
        solver
    }

    /// Integrate to the final time, calling `observe` after every step.
    pub fn integrate(
        &self,
        mut observe: impl FnMut(&StepRecord, &StateField) -> io::Result<()>,
    ) -> Result<Integration, RunError> {
        let tableau = self.config.time.ssp.tableau();
        let t_final = self.t_final();
        let model = self.problem.model.as_ref();
        let mut solver = self.solver();
        let mut u = self.initial_state();
        let mut t = 0.0;
        let mut steps = 0;
        let mut ell_min: Option<f64> = None;
        let mut worst = vec![f64::INFINITY; self.constraints.len()];
        while t_final - t > 1e-12 * t_final.max(1.0) && steps < self.config.time.max_steps {
            let fail = |source: SolverError, u: &StateField| RunError::Solver {
                step: steps + 1,
                t,
                source,
                state: Box::new(u.clone()),
            };
            let dt = solver.stable_dt(&u, self.config.time.cfl, &tableau).map_err(|e| fail(e, &u))?;
            let dt = dt.min(t_final - t);
            let (next, taken) = solver.step(&u, t, dt, &tableau).map_err(|e| fail(e, &u))?;
            if let Some(vertex) = next.values().iter().position(|s| !model.admissible(s)) {
                return Err(fail(SolverError::InvariantViolation { vertex, what: "inadmissible state".into() }, &u));
            }
            steps += 1;
            t += taken;
            u = next;
            let record = aggregate(steps, t, taken, &solver, self.constraints.len());
            solver.log.clear();
            if self.config.scheme == Scheme::Limited {
                ell_min = Some(ell_min.map_or(record.ell_min, |m: f64| m.min(record.ell_min)));
            }
            for (w, s) in worst.iter_mut().zip(&record.worst_slack) {
                *w = w.min(*s);
            }
            observe(&record, &u)?;
        }
        Ok(Integration { state: u, t, steps, ell_min, worst_slack: worst })
    }
}

fn aggregate(step: usize, t: f64, dt: f64, solver: &Solver<'_>, constraints: usize) -> StepRecord {
    let log = &solver.log;
    let mut worst = vec![f64::INFINITY; constraints];
    for r in log {
        if let Some(report) = &r.report {
            for (w, c) in worst.iter_mut().zip(&report.constraints) {
                *w = w.min(c.worst_slack);
            }
        }
    }
    let n = log.len().max(1) as f64;
    StepRecord {
        step,
        t,
        dt,
        substeps: log.len(),
        ell_min: log.iter().map(|r| r.ell_min).fold(f64::INFINITY, f64::min),
        ell_mean: log.iter().map(|r| r.ell_mean).sum::<f64>() / n,
        worst_slack: worst,
    }
}

#[derive(Debug, Clone)]
pub struct Integration {
    pub state: StateField,
    pub t: f64,
    pub steps: usize,
    pub ell_min: Option<f64>,
    pub worst_slack: Vec<f64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub state: StateField,
}

struct Extremes {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Extremes {
    fn of(u: &StateField) -> Self {
        let (min, max) = (0..u.components()).map(|k| u.component_min_max(k)).unzip();
        Extremes { min, max }
    }

    fn include(&mut self, u: &StateField) {
        for k in 0..u.components() {
            let (lo, hi) = u.component_min_max(k);
            self.min[k] = self.min[k].min(lo);
            self.max[k] = self.max[k].max(hi);
        }
    }
}

/// Lay out the output directory; all file writing goes through here.
struct Writer<'a> {
    setup: &'a Setup,
    dir: Option<PathBuf>,
    diagnostics: Option<DiagnosticsWriter>,
}

impl Writer<'_> {
    fn snapshot(&self, name: &str, u: &StateField) -> io::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let model = self.setup.problem.model.as_ref();
        let names = model.component_names();
        let positions = self.setup.graph.positions();
        for format in &self.setup.config.output.formats {
            match format {
                OutputFormat::Csv => {
                    let mut out = BufWriter::new(File::create(dir.join(format!("{name}.csv")))?);
                    write_snapshot_csv(&mut out, model.dim(), positions, &names, u)?;
                }
                OutputFormat::Vtk if model.dim() == 2 => {
                    let mut out = BufWriter::new(File::create(dir.join(format!("{name}.vtk")))?);
                    write_snapshot_vtk(&mut out, positions, &names, u)?;
                }
                OutputFormat::Vtk => {}
            }
        }
        Ok(())
    }

    fn summary(&self, summary: &Summary) -> io::Result<()> {
        match &self.dir {
            Some(dir) => write_summary(&dir.join("summary.json"), summary),
            None => Ok(()),
        }
    }
}

/// Run a config: snapshots, diagnostics CSV and a JSON summary. On a solver
/// failure the last good state and the summary are still written.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let start = Instant::now();
    let setup = Setup::new(config)?;
    let dir = config.output.dir.clone();
    if let Some(d) = &dir {
        fs::create_dir_all(d)?;
    }
    let constraint_names: Vec<String> = setup.constraints.iter().map(|c| c.name.clone()).collect();
    let diagnostics = match &dir {
        Some(d) => Some(DiagnosticsWriter::create(&d.join("diagnostics.csv"), &constraint_names)?),
        None => None,
    };
    let mut writer = Writer { setup: &setup, dir, diagnostics };
    let initial = setup.initial_state();
    let masses = setup.graph.masses();
    let mass_initial = initial.total(masses);
    let scale = initial.total_abs(masses);
    let mut extremes = Extremes::of(&initial);
    writer.snapshot("snapshot_000000", &initial)?;

    let cadence = config.output.cadence;
    let integration = setup.integrate(|record, u| {
        extremes.include(u);
        if let Some(d) = writer.diagnostics.as_mut() {
            d.record(record)?;
        }
        if cadence > 0 && record.step % cadence == 0 {
            writer.snapshot(&format!("snapshot_{:06}", record.step), u)?;
        }
        Ok(())
    });
    if let Some(d) = writer.diagnostics.take() {
        d.finish()?;
    }

    let model = setup.problem.model.as_ref();
    let components = model.components();
    let summary_for = |u: &StateField, steps: usize, t: f64, ell_min, worst: &[f64], error: Option<String>| {
        let mass_final = u.total(masses);
        let final_scale = u.total_abs(masses);
        let last = Extremes::of(u);
        Summary {
            problem: config.problem.clone(),
            scheme: format!("{:?}", config.scheme),
            discretization: format!("{:?}", config.discretization),
            vertices: setup.graph.n_vertices(),
            steps,
            time: t,
            wall_time_s: start.elapsed().as_secs_f64(),
            components: model.component_names().iter().map(|s| s.to_string()).collect(),
            mass_initial: (0..components).map(|k| mass_initial[k]).collect(),
            mass_final: (0..components).map(|k| mass_final[k]).collect(),
            mass_drift_relative: (0..components)
                .map(|k| {
                    let s = scale[k].max(final_scale[k]);
                    if s > 0.0 { (mass_final[k] - mass_initial[k]).abs() / s } else { 0.0 }
                })
                .collect(),
            min: last.min,
            max: last.max,
            run_min: extremes.min.clone(),
            run_max: extremes.max.clone(),
            ell_min,
            worst_slack: constraint_names.iter().cloned().zip(worst.iter().copied()).collect::<BTreeMap<_, _>>(),
            error,
        }
    };
    match integration {
        Ok(done) => {
            let summary = summary_for(&done.state, done.steps, done.t, done.ell_min, &done.worst_slack, None);
            if cadence == 0 || done.steps % cadence != 0 {
                writer.snapshot(&format!("snapshot_{:06}", done.steps), &done.state)?;
            }
            writer.summary(&summary)?;
            Ok(RunOutcome { summary, state: done.state })
        }
        Err(RunError::Solver { step, t, source, state }) => {
            let summary = summary_for(&state, step - 1, t, None, &[], Some(source.to_string()));
            writer.snapshot(&format!("failure_{step:06}"), &state)?;
            writer.summary(&summary)?;
            Err(RunError::Solver { step, t, source, state })
        }
        Err(e) => Err(e),
    }
}

/// Read and run a config file; relative output directories are resolved
/// against the config's location.
pub fn run_file(path: &Path) -> Result<RunOutcome, RunError> {
    let mut config = RunConfig::load(path)?;
    if let Some(dir) = &config.output.dir {
        if dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.output.dir = Some(base.join(dir));
        }
    }
    run(&config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(problem: &str, cells: usize) -> RunConfig {
        let mut cfg = RunConfig { problem: problem.into(), ..RunConfig::default() };
        cfg.mesh.cells = cells;
        cfg
    }

    #[test]
    fn constant_state_is_preserved() {
        for disc in [DiscretizationKind::Fv, DiscretizationKind::CgP1] {
            let mut cfg = config("constant", 50);
            cfg.discretization = disc;
            cfg.time.t_final = Some(0.2);
            let out = run(&cfg).unwrap();
            let setup = Setup::new(&cfg).unwrap();
            let u0 = setup.initial_state();
            for (a, b) in out.state.values().iter().zip(u0.values()) {
                assert!((*a - *b).max_abs() <= 1e-13);
            }
            assert!(out.summary.steps > 0);
        }
    }

    #[test]
    fn sourceless_mass_drift_is_rounding() {
        for problem in ["advection_sine", "burgers_sine", "sod", "dam_break"] {
            let mut cfg = config(problem, 100);
            cfg.mesh.periodic = Some(true);
            cfg.strict = true;
            let out = run(&cfg).unwrap();
            assert!(out.summary.mass_drift_relative.iter().all(|d| *d <= 1e-12), "{problem}: {:?}", out.summary);
            assert!(out.summary.worst_slack.values().all(|s| *s >= -1e-10));
        }
    }

    #[test]
    fn writes_files_and_a_summary() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config("radial_sod", 16);
        cfg.output.dir = Some(dir.path().to_path_buf());
        cfg.output.cadence = 5;
        cfg.output.formats = vec![OutputFormat::Csv, OutputFormat::Vtk];
        cfg.time.t_final = Some(0.05);
        let out = run(&cfg).unwrap();
        assert!(out.summary.min[0] > 0.0);
        for name in ["summary.json", "diagnostics.csv", "snapshot_000000.csv", "snapshot_000000.vtk"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let last = format!("snapshot_{:06}.csv", out.summary.steps);
        let text = fs::read_to_string(dir.path().join(last)).unwrap();
        assert!(text.starts_with("x,y,rho,m_x,m_y,E\n"));
        assert_eq!(text.lines().count(), 16 * 16 + 1);
        let diag = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(diag.lines().count(), out.summary.steps + 1);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let mut first = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = config("sod", 64);
            cfg.mesh.jitter = 0.2;
            cfg.seed = 11;
            cfg.time.t_final = Some(0.05);
            cfg.output.dir = Some(dir.path().to_path_buf());
            let out = run(&cfg).unwrap();
            let bytes = fs::read(dir.path().join(format!("snapshot_{:06}.csv", out.summary.steps))).unwrap();
            first.push(bytes);
        }
        assert_eq!(first[0], first[1]);
    }

    #[test]
    fn consistent_mass_needs_cg() {
        let mut cfg = config("advection_sine", 20);
        cfg.high_order.mass = MassMode::Consistent;
        assert!(matches!(Setup::new(&cfg), Err(ConfigError::Invalid { .. })));
        cfg.discretization = DiscretizationKind::CgP1;
        assert!(Setup::new(&cfg).is_ok());
    }
}
