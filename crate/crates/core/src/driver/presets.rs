//! Problem presets: model, initial data and, where known, the exact solution.

use std::f64::consts::PI;

use crate::exact::{burgers_riemann, EulerRiemann, ShallowWaterRiemann, GAUSS_NODES, GAUSS_WEIGHTS};
use crate::graph::ConnectivityGraph;
use crate::mesh::{ElementKind, MeshDescriptor};
use crate::state::{State, StateField, Vector};
use crate::systems::{Burgers, Euler, LinearAdvection, ShallowWater, SystemModel};

use super::config::{ConfigError, DiscretizationKind, RunConfig};

#[derive(Debug, Clone, Copy)]
pub struct ProblemPreset {
    pub name: &'static str,
    pub summary: &'static str,
    pub dim: usize,
    pub lower: Vector,
    pub upper: Vector,
    pub periodic: bool,
    pub t_final: f64,
    pub has_exact: bool,
    pub has_source: bool,
    /// Limiting constraints in order, used when the config lists none.
    pub constraints: &'static [&'static str],
}

const SCALAR: &[&str] = &["u_min", "u_max"];
const EULER: &[&str] = &["rho_min", "rho_max", "internal_energy_min", "specific_entropy_min"];
const WATER: &[&str] = &["h_min", "kinetic_max"];

const SOD_LEFT: [f64; 3] = [1.0, 0.0, 1.0];
const SOD_RIGHT: [f64; 3] = [0.125, 0.0, 0.1];
const DAM_LEFT: [f64; 2] = [2.0, 0.0];
const DAM_RIGHT: [f64; 2] = [1.0, 0.0];

static PRESETS: &[ProblemPreset] = &[
    ProblemPreset {
        name: "advection_sine",
        summary: "periodic linear advection of sin(2πx)",
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        periodic: true,
        t_final: 1.0,
        has_exact: true,
        has_source: false,
        constraints: SCALAR,
    },
    ProblemPreset {
        name: "advection_sine_2d",
        summary: "periodic linear advection of sin(2πx) sin(2πy) along (1, 1)",
        dim: 2,
        lower: [0.0, 0.0],
        upper: [1.0, 1.0],
        periodic: true,
        t_final: 1.0,
        has_exact: true,
        has_source: false,
        constraints: SCALAR,
    },
    ProblemPreset {
        name: "burgers_step",
        summary: "Burgers shock from u = 1 | 0 at x = 0.5",
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        periodic: false,
        t_final: 0.25,
        has_exact: true,
        has_source: false,
        constraints: SCALAR,
    },
    ProblemPreset {
        name: "burgers_sine",
        summary: "periodic Burgers from sin(2πx), exact by characteristics before breaking at t = 1/(2π)",
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        periodic: true,
        t_final: 0.1,
        has_exact: true,
        has_source: false,
        constraints: SCALAR,
    },
    ProblemPreset {
        name: "sod",
        summary: "Sod shock tube on [0, 1]",
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        periodic: false,
        t_final: 0.2,
        has_exact: true,
        has_source: false,
        constraints: EULER,
    },
    ProblemPreset {
        name: "radial_sod",
        summary: "cylindrical Sod explosion, Sod states inside and outside r = 0.5",
        dim: 2,
        lower: [-1.0, -1.0],
        upper: [1.0, 1.0],
        periodic: false,
        t_final: 0.2,
        has_exact: false,
        has_source: false,
        constraints: EULER,
    },
    ProblemPreset {
        name: "dam_break",
        summary: "wet dam break h = 2 | 1 at x = 5 on [0, 10]",
        dim: 1,
        lower: [0.0, 0.0],
        upper: [10.0, 0.0],
        periodic: false,
        t_final: 0.5,
        has_exact: true,
        has_source: false,
        constraints: WATER,
    },
    ProblemPreset {
        name: "lake_at_rest",
        summary: "still water over a Gaussian bump with Manning friction (the scheme is not well balanced)",
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        periodic: false,
        t_final: 0.5,
        has_exact: true,
        has_source: true,
        constraints: WATER,
    },
    ProblemPreset {
        name: "constant",
        summary: "uniform moving gas on a torus",
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        periodic: true,
        t_final: 0.5,
        has_exact: true,
        has_source: false,
        constraints: EULER,
    },
];

pub fn all() -> &'static [ProblemPreset] {
    PRESETS
}

pub fn find(name: &str) -> Option<&'static ProblemPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

type InitialFn = Box<dyn Fn(&Vector) -> State + Send + Sync>;
type ExactFn = Box<dyn Fn(&Vector, f64) -> Option<State> + Send + Sync>;

/// A preset instantiated on a graph.
pub struct Problem {
    pub preset: &'static ProblemPreset,
    pub model: Box<dyn SystemModel>,
    initial: InitialFn,
    exact: Option<ExactFn>,
}

impl Problem {
    pub fn initial(&self, x: &Vector) -> State {
        (self.initial)(x)
    }

    pub fn exact(&self, x: &Vector, t: f64) -> Option<State> {
        self.exact.as_ref().and_then(|f| f(x, t))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }
}

fn bump(x: f64) -> (f64, f64) {
    let s = (x - 0.5) / 0.1;
    let z = 0.2 * (-s * s).exp();
    (z, -2.0 * s / 0.1 * z)
}

/// Sample of a characteristic solution `u = u0(x - u t)` for a periodic
/// Burgers profile with `|u0| ≤ 1` before breaking.
fn burgers_characteristic(x: f64, t: f64, u0: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (x - t - 1e-12, x + t + 1e-12);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid + t * u0(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    u0(0.5 * (lo + hi))
}

pub fn instantiate(cfg: &RunConfig, graph: &ConnectivityGraph) -> Result<Problem, ConfigError> {
    let preset = find(&cfg.problem).ok_or_else(|| ConfigError::invalid("problem", "unknown preset"))?;
    let sys = &cfg.system;
    let gamma = sys.gamma.unwrap_or(1.4);
    let covolume = sys.covolume.unwrap_or(0.0);
    let gravity = sys.gravity.unwrap_or(9.81);
    if !(gamma > 1.0) {
        return Err(ConfigError::invalid("system.gamma", format!("{gamma} must exceed 1")));
    }
    if !(0.0..1.0).contains(&covolume) {
        return Err(ConfigError::invalid("system.covolume", format!("{covolume} is outside [0, 1)")));
    }
    if !(gravity > 0.0) {
        return Err(ConfigError::invalid("system.gravity", format!("{gravity} must be positive")));
    }
    let lower = cfg.mesh.lower.unwrap_or(preset.lower);
    let upper = cfg.mesh.upper.unwrap_or(preset.upper);
    let centre = [0.5 * (lower[0] + upper[0]), 0.5 * (lower[1] + upper[1])];
    let period = [upper[0] - lower[0], upper[1] - lower[1]];

    let problem = |model: Box<dyn SystemModel>, initial: InitialFn, exact: Option<ExactFn>| Problem {
        preset,
        model,
        initial,
        exact,
    };
    Ok(match preset.name {
        "advection_sine" | "advection_sine_2d" => {
            let dim = preset.dim;
            let v = sys.velocity.unwrap_or(if dim == 1 { [1.0, 0.0] } else { [1.0, 1.0] });
            let profile = move |x: &Vector| {
                let sx = (2.0 * PI * (x[0] - lower[0]) / period[0]).sin();
                if dim == 1 {
                    sx
                } else {
                    sx * (2.0 * PI * (x[1] - lower[1]) / period[1]).sin()
                }
            };
            problem(
                Box::new(LinearAdvection::new(dim, v)),
                Box::new(move |x| State::scalar(profile(x))),
                Some(Box::new(move |x, t| Some(State::scalar(profile(&[x[0] - v[0] * t, x[1] - v[1] * t]))))),
            )
        }
        "burgers_step" => {
            let x0 = centre[0];
            problem(
                Box::new(Burgers::new(1)),
                Box::new(move |x| State::scalar(if x[0] < x0 { 1.0 } else { 0.0 })),
                Some(Box::new(move |x, t| {
                    let u = if t > 0.0 { burgers_riemann(1.0, 0.0, (x[0] - x0) / t) } else if x[0] < x0 { 1.0 } else { 0.0 };
                    Some(State::scalar(u))
                })),
            )
        }
        "burgers_sine" => {
            let u0 = move |x: f64| (2.0 * PI * (x - lower[0]) / period[0]).sin();
            let breaking = period[0] / (2.0 * PI);
            problem(
                Box::new(Burgers::new(1)),
                Box::new(move |x| State::scalar(u0(x[0]))),
                Some(Box::new(move |x, t| (t < breaking).then(|| State::scalar(burgers_characteristic(x[0], t, u0))))),
            )
        }
        "sod" => {
            let model = Euler::new(1, gamma).with_covolume(covolume);
            let x0 = centre[0];
            let riemann = EulerRiemann::solve(gamma, covolume, SOD_LEFT, SOD_RIGHT)
                .map_err(|e| ConfigError::invalid("system", e))?;
            let m = model.clone();
            let to_state = move |w: [f64; 3]| m.conserved(w[0], [w[1], 0.0], w[2]);
            let init = to_state.clone();
            problem(
                Box::new(model),
                Box::new(move |x| init(if x[0] < x0 { SOD_LEFT } else { SOD_RIGHT })),
                Some(Box::new(move |x, t| {
                    if t == 0.0 {
                        return Some(to_state(if x[0] < x0 { SOD_LEFT } else { SOD_RIGHT }));
                    }
                    riemann.sample((x[0] - x0) / t).map(&to_state)
                })),
            )
        }
        "radial_sod" => {
            let model = Euler::new(2, gamma).with_covolume(covolume);
            let m = model.clone();
            problem(
                Box::new(model),
                Box::new(move |x| {
                    let r = ((x[0] - centre[0]).powi(2) + (x[1] - centre[1]).powi(2)).sqrt();
                    let w = if r < 0.5 { SOD_LEFT } else { SOD_RIGHT };
                    m.conserved(w[0], [0.0, 0.0], w[2])
                }),
                None,
            )
        }
        "dam_break" => {
            let x0 = centre[0];
            let riemann = ShallowWaterRiemann::solve(gravity, DAM_LEFT[0], DAM_LEFT[1], DAM_RIGHT[0], DAM_RIGHT[1])
                .map_err(|e| ConfigError::invalid("system", e))?;
            let to_state = |w: [f64; 2]| State::from_slice(&[w[0], w[0] * w[1]]);
            problem(
                Box::new(ShallowWater::new(1, gravity)),
                Box::new(move |x| to_state(if x[0] < x0 { DAM_LEFT } else { DAM_RIGHT })),
                Some(Box::new(move |x, t| {
                    if t == 0.0 {
                        return Some(to_state(if x[0] < x0 { DAM_LEFT } else { DAM_RIGHT }));
                    }
                    Some(to_state(riemann.sample((x[0] - x0) / t)))
                })),
            )
        }
        "lake_at_rest" => {
            let manning = sys.manning.unwrap_or(0.03);
            let exponent = sys.friction_exponent.unwrap_or(4.0 / 3.0);
            let scaled = move |x: f64| bump((x - lower[0]) / period[0]);
            let gradient = graph.positions().iter().map(|x| [scaled(x[0]).1 / period[0], 0.0]).collect();
            let model = ShallowWater::new(1, gravity).with_friction(manning, exponent).with_bottom_gradient(gradient);
            let rest = move |x: &Vector| State::from_slice(&[1.0 - scaled(x[0]).0, 0.0]);
            problem(Box::new(model), Box::new(rest), Some(Box::new(move |x, _| Some(rest(x)))))
        }
        "constant" => {
            let model = Euler::new(1, gamma).with_covolume(covolume);
            let u = model.conserved(1.0, [0.3, 0.0], 1.0);
            problem(Box::new(model), Box::new(move |_| u), Some(Box::new(move |_, _| Some(u))))
        }
        other => unreachable!("preset table and instantiate disagree on `{other}`"),
    })
}

/// Values a function induces on the graph: cell averages (finite volumes)
/// or nodal values (continuous P1). `None` when `f` is undefined somewhere.
pub fn sample_field(
    mesh: &MeshDescriptor,
    graph: &ConnectivityGraph,
    discretization: DiscretizationKind,
    components: usize,
    f: impl Fn(&Vector) -> Option<State>,
) -> Option<StateField> {
    let values = match discretization {
        DiscretizationKind::CgP1 => graph.positions().iter().map(&f).collect::<Option<Vec<_>>>()?,
        DiscretizationKind::Fv => (0..mesh.elements.len()).map(|e| cell_average(mesh, e, &f)).collect::<Option<Vec<_>>>()?,
    };
    Some(StateField::new(components, values))
}

/// Tensor Gauss average over an interval or an axis-aligned quad.
fn cell_average(mesh: &MeshDescriptor, element: usize, f: &impl Fn(&Vector) -> Option<State>) -> Option<State> {
    let x = mesh.element_coordinates(element);
    let (lo, hi) = x.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let map = |k: usize, s: f64| 0.5 * (lo[k] + hi[k]) + 0.5 * (hi[k] - lo[k]) * s;
    let mut total = State::ZERO;
    if mesh.kind == ElementKind::Interval {
        for (s, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            total = total + 0.5 * w * f(&mesh.wrap([map(0, *s), 0.0]))?;
        }
    } else {
        for (s, ws) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            for (r, wr) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                total = total + 0.25 * ws * wr * f(&mesh.wrap([map(0, *s), map(1, *r)]))?;
            }
        }
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cg_p1_graph, build_fv_graph};
    use crate::mesh::Topology;

    fn setup(name: &str) -> (RunConfig, MeshDescriptor, ConnectivityGraph) {
        let cfg = RunConfig { problem: name.into(), ..RunConfig::default() };
        let p = find(name).unwrap();
        let topology = if p.periodic { Topology::Periodic } else { Topology::CompactSupport };
        let mesh = if p.dim == 1 {
            MeshDescriptor::interval(40, p.lower[0], p.upper[0], topology)
        } else {
            MeshDescriptor::cartesian_quads(12, 12, p.lower, p.upper, topology)
        };
        let graph = build_fv_graph(&mesh).unwrap();
        (cfg, mesh, graph)
    }

    #[test]
    fn every_preset_has_admissible_initial_data() {
        for p in all() {
            let (cfg, mesh, graph) = setup(p.name);
            let problem = instantiate(&cfg, &graph).unwrap();
            let model = problem.model.as_ref();
            assert_eq!(model.has_source(), p.has_source, "{}", p.name);
            assert_eq!(problem.has_exact(), p.has_exact, "{}", p.name);
            let u = sample_field(&mesh, &graph, DiscretizationKind::Fv, model.components(), |x| Some(problem.initial(x)))
                .unwrap();
            assert!(u.values().iter().all(|s| model.admissible(s)), "{}", p.name);
            let names: Vec<String> = model.constraints().into_iter().map(|c| c.name).collect();
            assert!(p.constraints.iter().all(|c| names.iter().any(|n| n == c)), "{}", p.name);
            if let Some(e) = problem.exact(&[0.3, 0.3], 0.0) {
                assert!((e - problem.initial(&[0.3, 0.3])).max_abs() < 1e-14, "{}", p.name);
            }
        }
    }

    #[test]
    fn burgers_characteristics_solve_the_implicit_relation() {
        let (cfg, _, graph) = setup("burgers_sine");
        let problem = instantiate(&cfg, &graph).unwrap();
        let t = 0.12;
        for k in 0..50 {
            let x = k as f64 / 50.0;
            let u = problem.exact(&[x, 0.0], t).unwrap()[0];
            assert!((u - (2.0 * PI * (x - u * t)).sin()).abs() < 1e-12);
        }
        assert!(problem.exact(&[0.5, 0.0], 0.2).is_none());
    }

    #[test]
    fn cell_averages_integrate_polynomials() {
        let mesh = MeshDescriptor::interval(10, 0.0, 1.0, Topology::CompactSupport);
        let graph = build_fv_graph(&mesh).unwrap();
        let u = sample_field(&mesh, &graph, DiscretizationKind::Fv, 1, |x| Some(State::scalar(x[0] * x[0]))).unwrap();
        // Mean of x² over [0.1, 0.2].
        assert!((u[1][0] - (0.008 - 0.001) / 0.3).abs() < 1e-14);
        let cg = build_cg_p1_graph(&mesh).unwrap();
        let v = sample_field(&mesh, &cg, DiscretizationKind::CgP1, 1, |x| Some(State::scalar(x[0]))).unwrap();
        assert_eq!(v.len(), 11);
        assert!((v[10][0] - 1.0).abs() < 1e-15);
    }
}
