//! Error tables against exact solutions under uniform refinement.

use std::fmt;
use std::io::{self, Write};

use super::config::{ConfigError, RunConfig};
use super::run::{RunError, Setup};

#[derive(Debug, Clone, PartialEq)]
pub struct LevelError {
    pub cells: usize,
    pub steps: usize,
    /// `Σ m_i |e_i| / |D|` of the first component.
    pub l1: f64,
    pub linf: f64,
    /// Rates against the previous level; `None` on the coarsest.
    pub l1_rate: Option<f64>,
    pub linf_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub problem: String,
    pub component: String,
    pub levels: Vec<LevelError>,
}

impl ConvergenceTable {
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "cells,steps,l1,linf,l1_rate,linf_rate")?;
        let rate = |r: Option<f64>| r.map(|r| r.to_string()).unwrap_or_default();
        for l in &self.levels {
            writeln!(out, "{},{},{},{},{},{}", l.cells, l.steps, l.l1, l.linf, rate(l.l1_rate), rate(l.linf_rate))?;
        }
        Ok(())
    }

    /// Smallest successive L1 rate.
    pub fn min_l1_rate(&self) -> Option<f64> {
        self.levels.iter().filter_map(|l| l.l1_rate).reduce(f64::min)
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({}):", self.problem, self.component)?;
        writeln!(f, "{:>8} {:>7} {:>12} {:>7} {:>12} {:>7}", "cells", "steps", "L1", "rate", "Linf", "rate")?;
        let rate = |r: Option<f64>| r.map(|r| format!("{r:7.3}")).unwrap_or_else(|| format!("{:>7}", "-"));
        for l in &self.levels {
            writeln!(
                f,
                "{:>8} {:>7} {:>12.4e} {} {:>12.4e} {}",
                l.cells,
                l.steps,
                l.l1,
                rate(l.l1_rate),
                l.linf,
                rate(l.linf_rate)
            )?;
        }
        Ok(())
    }
}

/// Run `levels` levels, doubling the cell count (both directions in 2D)
/// from the config's mesh.
pub fn convergence(config: &RunConfig, levels: usize) -> Result<ConvergenceTable, RunError> {
    let mut rows: Vec<LevelError> = Vec::with_capacity(levels);
    let mut component = String::new();
    for level in 0..levels {
        let mut cfg = config.clone();
        cfg.output.dir = None;
        cfg.mesh.cells = config.mesh.cells << level;
        cfg.mesh.cells_y = config.mesh.cells_y.map(|n| n << level);
        let setup = Setup::new(&cfg)?;
        component = setup.problem.model.component_names()[0].to_string();
        let done = setup.integrate(|_, _| Ok(()))?;
        let exact = setup.exact_state(done.t).ok_or_else(|| {
            ConfigError::invalid("problem", format!("`{}` has no exact solution at t = {}", cfg.problem, done.t))
        })?;
        let masses = setup.graph.masses();
        let (mut l1, mut linf) = (0.0, 0.0f64);
        for i in 0..masses.len() {
            let e = (done.state[i][0] - exact[i][0]).abs();
            l1 += masses[i] * e;
            linf = linf.max(e);
        }
        l1 /= setup.graph.total_mass();
        let rate = |fine: f64, coarse: f64| (coarse / fine).log2();
        let previous = rows.last();
        rows.push(LevelError {
            cells: cfg.mesh.cells,
            steps: done.steps,
            l1,
            linf,
            l1_rate: previous.map(|p| rate(l1, p.l1)),
            linf_rate: previous.map(|p| rate(linf, p.linf)),
        });
    }
    Ok(ConvergenceTable { problem: config.problem.clone(), component, levels: rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Scheme;

    #[test]
    fn low_order_advection_converges() {
        let mut cfg = RunConfig { problem: "advection_sine".into(), scheme: Scheme::LowOrder, ..RunConfig::default() };
        cfg.mesh.cells = 25;
        cfg.time.t_final = Some(0.25);
        let table = convergence(&cfg, 3).unwrap();
        assert_eq!(table.levels.len(), 3);
        assert!(table.levels.windows(2).all(|w| w[1].l1 < w[0].l1));
        assert!(table.min_l1_rate().unwrap() > 0.5, "{table}");
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    }

    #[test]
    fn presets_without_exact_solution_are_rejected() {
        let mut cfg = RunConfig { problem: "radial_sod".into(), ..RunConfig::default() };
        cfg.mesh.cells = 8;
        cfg.time.t_final = Some(0.01);
        assert!(matches!(convergence(&cfg, 1), Err(RunError::Config(_))));
    }
}
