//! Snapshot, diagnostics and summary writers.
//!
//! Numbers are printed with the shortest round-trip representation, so the
//! same run reproduces the files byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::state::{StateField, Vector};

/// `x[,y],comp0,comp1,...`, one row per vertex.
pub fn write_snapshot_csv(
    out: &mut impl Write,
    dim: usize,
    positions: &[Vector],
    names: &[&str],
    u: &StateField,
) -> io::Result<()> {
    let axes = if dim == 1 { "x" } else { "x,y" };
    writeln!(out, "{axes},{}", names.join(","))?;
    for (x, s) in positions.iter().zip(u.values()) {
        write!(out, "{}", x[0])?;
        if dim == 2 {
            write!(out, ",{}", x[1])?;
        }
        for k in 0..u.components() {
            write!(out, ",{}", s[k])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Legacy ASCII VTK polydata: one point per vertex with the components as
/// point scalars.
pub fn write_snapshot_vtk(out: &mut impl Write, positions: &[Vector], names: &[&str], u: &StateField) -> io::Result<()> {
    let n = positions.len();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "hyperlim snapshot")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET POLYDATA")?;
    writeln!(out, "POINTS {n} double")?;
    for x in positions {
        writeln!(out, "{} {} 0", x[0], x[1])?;
    }
    writeln!(out, "VERTICES {n} {}", 2 * n)?;
    for i in 0..n {
        writeln!(out, "1 {i}")?;
    }
    writeln!(out, "POINT_DATA {n}")?;
    for (k, name) in names.iter().enumerate() {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for s in u.values() {
            writeln!(out, "{}", s[k])?;
        }
    }
    Ok(())
}

/// Aggregate of the substeps of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub substeps: usize,
    pub ell_min: f64,
    pub ell_mean: f64,
    /// Worst constraint slack over the substeps, in constraint order.
    pub worst_slack: Vec<f64>,
}

pub struct DiagnosticsWriter {
    out: BufWriter<File>,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path, constraints: &[String]) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        write!(out, "step,t,dt,substeps,ell_min,ell_mean")?;
        for name in constraints {
            write!(out, ",slack_{name}")?;
        }
        writeln!(out)?;
        Ok(DiagnosticsWriter { out })
    }

    pub fn record(&mut self, r: &StepRecord) -> io::Result<()> {
        write!(self.out, "{},{},{},{},{},{}", r.step, r.t, r.dt, r.substeps, r.ell_min, r.ell_mean)?;
        for s in &r.worst_slack {
            write!(self.out, ",{s}")?;
        }
        writeln!(self.out)
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub problem: String,
    pub scheme: String,
    pub discretization: String,
    pub vertices: usize,
    pub steps: usize,
    pub time: f64,
    pub wall_time_s: f64,
    pub components: Vec<String>,
    pub mass_initial: Vec<f64>,
    pub mass_final: Vec<f64>,
    /// `|Σm U(final) - Σm U(initial)|` over the larger of `Σm |U|` at
    /// both ends, per component.
    pub mass_drift_relative: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Extremes over every step of the run.
    pub run_min: Vec<f64>,
    pub run_max: Vec<f64>,
    pub ell_min: Option<f64>,
    pub worst_slack: BTreeMap<String, f64>,
    pub error: Option<String>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, summary).map_err(io::Error::other)?;
    writeln!(out)?;
    out.flush()
}
