//! Connectivity graph of the degrees of freedom.
//!
//! Storage is CSR: row `i` holds the sorted stencil `I(i)` (including `i`),
//! and every entry `k = (i, j)` knows the index of its transpose `(j, i)`.
//! Per-entry data (`c_ij`, `β_ij`, consistent mass) is aligned with the CSR
//! pattern so kernels iterate rows without lookups.
//!
//! Boundary rows on a compact-support box get `c_ii = -Σ_{j≠i} c_ij`. This
//! keeps zero row sums, and the diagonal flux `2 f(U_i) c_ii` is the
//! transmissive boundary flux of the cell. On a torus `c_ii = 0`.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::ops::Range;

use rayon::prelude::*;

use crate::error::MeshError;
use crate::mesh::{signed_measure, ElementKind, MeshDescriptor, Topology};
use crate::state::{norm, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    FiniteVolume,
    ContinuousP1,
}

#[derive(Debug, Clone)]
pub struct ConnectivityGraph {
    dim: usize,
    discretization: Discretization,
    topology: Topology,
    offsets: Vec<usize>,
    columns: Vec<usize>,
    transpose: Vec<usize>,
    diagonal: Vec<usize>,
    c: Vec<Vector>,
    beta: Vec<f64>,
    masses: Vec<f64>,
    positions: Vec<Vector>,
}

impl ConnectivityGraph {
    /// Build a graph from raw directed contributions `(i, j, c_ij)`.
    ///
    /// Duplicate entries are summed, the pattern is symmetrized, `c` is made
    /// exactly skew-symmetric and the diagonal is set as described in the
    /// module docs. `β` starts as the all-ones choice.
    pub fn assemble(
        dim: usize,
        discretization: Discretization,
        topology: Topology,
        masses: Vec<f64>,
        positions: Vec<Vector>,
        contributions: impl IntoIterator<Item = (usize, usize, Vector)>,
    ) -> Result<Self, MeshError> {
        let n = masses.len();
        if positions.len() != n {
            return Err(MeshError::Invalid("positions and masses differ in length".into()));
        }
        if let Some(i) = masses.iter().position(|&m| !(m > 0.0)) {
            return Err(MeshError::DegenerateCell { cell: i, measure: masses[i] });
        }
        let mut entries: BTreeMap<(usize, usize), Vector> = BTreeMap::new();
        for i in 0..n {
            entries.insert((i, i), [0.0; 2]);
        }
        for (i, j, c) in contributions {
            if i >= n || j >= n {
                return Err(MeshError::Invalid(format!("edge ({i}, {j}) out of range")));
            }
            for key in [(i, j), (j, i)] {
                entries.entry(key).or_insert([0.0; 2]);
            }
            let slot = entries.get_mut(&(i, j)).unwrap();
            slot[0] += c[0];
            slot[1] += c[1];
        }

        let mut offsets = vec![0usize; n + 1];
        let mut columns = Vec::with_capacity(entries.len());
        let mut raw = Vec::with_capacity(entries.len());
        for (&(i, j), c) in &entries {
            offsets[i + 1] += 1;
            columns.push(j);
            raw.push(*c);
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut graph = ConnectivityGraph {
            dim,
            discretization,
            topology,
            transpose: vec![0; columns.len()],
            diagonal: vec![0; n],
            beta: vec![1.0; columns.len()],
            offsets,
            columns,
            c: raw,
            masses,
            positions,
        };
        for i in 0..n {
            for k in graph.row(i) {
                let j = graph.columns[k];
                graph.transpose[k] = graph.find(j, i).expect("pattern is symmetric");
                if i == j {
                    graph.diagonal[i] = k;
                    graph.beta[k] = 0.0;
                }
            }
        }
        graph.symmetrize_c();
        Ok(graph)
    }

    fn symmetrize_c(&mut self) {
        for k in 0..self.columns.len() {
            let t = self.transpose[k];
            if k < t {
                let half = [0.5 * (self.c[k][0] - self.c[t][0]), 0.5 * (self.c[k][1] - self.c[t][1])];
                self.c[k] = half;
                self.c[t] = [-half[0], -half[1]];
            }
        }
        for i in 0..self.n_vertices() {
            let d = self.diagonal[i];
            let mut sum = [0.0; 2];
            if self.topology == Topology::CompactSupport {
                for k in self.row(i) {
                    if k != d {
                        sum[0] -= self.c[k][0];
                        sum[1] -= self.c[k][1];
                    }
                }
            }
            self.c[d] = sum;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn n_vertices(&self) -> usize {
        self.masses.len()
    }

    pub fn n_entries(&self) -> usize {
        self.columns.len()
    }

    /// CSR entry range of row `i`.
    pub fn row(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Sorted stencil `I(i)`, including `i`.
    pub fn stencil(&self, i: usize) -> &[usize] {
        &self.columns[self.row(i)]
    }

    /// `card I(i)`.
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_vertices()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn column(&self, k: usize) -> usize {
        self.columns[k]
    }

    pub fn transpose(&self, k: usize) -> usize {
        self.transpose[k]
    }

    pub fn diagonal(&self, i: usize) -> usize {
        self.diagonal[i]
    }

    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row(i);
        let start = range.start;
        self.columns[range].binary_search(&j).ok().map(|p| start + p)
    }

    pub fn c(&self, k: usize) -> &Vector {
        &self.c[k]
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.beta[k]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn positions(&self) -> &[Vector] {
        &self.positions
    }

    /// `|D| = Σ m_i`.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Replace the linearity weights. They must be symmetric and nonnegative.
    pub fn with_beta(mut self, beta: Vec<f64>) -> Result<Self, MeshError> {
        if beta.len() != self.n_entries() {
            return Err(MeshError::Invalid("beta length does not match the graph".into()));
        }
        for k in 0..beta.len() {
            if !(beta[k] >= 0.0) || beta[k] != beta[self.transpose[k]] {
                return Err(MeshError::Invalid(format!("beta entry {k} is negative or asymmetric")));
            }
        }
        self.beta = beta;
        Ok(self)
    }

    /// Largest `|Σ_j c_ij| / Σ_j ‖c_ij‖` over all rows.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.n_vertices())
            .map(|i| {
                let mut s = [0.0; 2];
                let mut scale = 0.0;
                for k in self.row(i) {
                    s[0] += self.c[k][0];
                    s[1] += self.c[k][1];
                    scale += norm(&self.c[k]);
                }
                if scale > 0.0 {
                    norm(&s) / scale
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    /// Debug dump: one row per directed entry, and one row per vertex.
    pub fn write_csv(&self, edges: &mut impl Write, vertices: &mut impl Write) -> io::Result<()> {
        if self.dim == 1 {
            writeln!(edges, "i,j,c_x,beta")?;
            writeln!(vertices, "i,m,x")?;
        } else {
            writeln!(edges, "i,j,c_x,c_y,beta")?;
            writeln!(vertices, "i,m,x,y")?;
        }
        for i in 0..self.n_vertices() {
            for k in self.row(i) {
                let c = self.c[k];
                if self.dim == 1 {
                    writeln!(edges, "{i},{},{:e},{:e}", self.columns[k], c[0], self.beta[k])?;
                } else {
                    writeln!(edges, "{i},{},{:e},{:e},{:e}", self.columns[k], c[0], c[1], self.beta[k])?;
                }
            }
            let x = self.positions[i];
            if self.dim == 1 {
                writeln!(vertices, "{i},{:e},{:e}", self.masses[i], x[0])?;
            } else {
                writeln!(vertices, "{i},{:e},{:e},{:e}", self.masses[i], x[0], x[1])?;
            }
        }
        Ok(())
    }
}

fn measure_floor(mesh: &MeshDescriptor) -> f64 {
    let p = mesh.period();
    let scale = if mesh.dim == 1 { p[0].abs() } else { (p[0] * p[1]).abs() };
    1e-14 * scale.max(f64::MIN_POSITIVE)
}

/// Finite-volume graph: `m_i = |K_i|`, `c_ij = ½ |Γ_ij| n_ij`.
pub fn build_fv_graph(mesh: &MeshDescriptor) -> Result<ConnectivityGraph, MeshError> {
    mesh.validate()?;
    if mesh.kind == ElementKind::Triangle {
        return Err(MeshError::Invalid("finite volumes need interval or quad cells".into()));
    }
    let floor = measure_floor(mesh);
    let cells = mesh.elements.len();

    // Per cell: measure, centroid, and faces as (sorted node key, |Γ| n outward).
    type Faces = Vec<((usize, usize), Vector)>;
    let local: Vec<Result<(f64, Vector, Faces), MeshError>> = (0..cells)
        .into_par_iter()
        .map(|e| {
            let ids = &mesh.elements[e];
            let x = mesh.element_coordinates(e);
            let signed = signed_measure(mesh.kind, &x);
            let measure = signed.abs();
            if mesh.kind == ElementKind::Interval && signed <= 0.0 || measure <= floor {
                return Err(MeshError::DegenerateCell { cell: e, measure: signed });
            }
            let k = x.len() as f64;
            let centroid = [x.iter().map(|p| p[0]).sum::<f64>() / k, x.iter().map(|p| p[1]).sum::<f64>() / k];
            let faces = match mesh.kind {
                ElementKind::Interval => vec![((ids[0], ids[0]), [-1.0, 0.0]), ((ids[1], ids[1]), [1.0, 0.0])],
                _ => {
                    let orient = signed.signum();
                    (0..ids.len())
                        .map(|a| {
                            let b = (a + 1) % ids.len();
                            let t = [x[b][0] - x[a][0], x[b][1] - x[a][1]];
                            let key = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                            (key, [orient * t[1], -orient * t[0]])
                        })
                        .collect()
                }
            };
            Ok((measure, centroid, faces))
        })
        .collect();

    let mut masses = Vec::with_capacity(cells);
    let mut positions = Vec::with_capacity(cells);
    let mut by_face: BTreeMap<(usize, usize), Vec<(usize, Vector)>> = BTreeMap::new();
    for (e, item) in local.into_iter().enumerate() {
        let (measure, centroid, faces) = item?;
        masses.push(measure);
        positions.push(mesh.wrap(centroid));
        for (key, area_normal) in faces {
            by_face.entry(key).or_default().push((e, area_normal));
        }
    }
    let mut contributions = Vec::new();
    for (key, sides) in by_face {
        match sides.as_slice() {
            [_] => {}
            [(a, na), (b, nb)] => {
                contributions.push((*a, *b, [0.5 * na[0], 0.5 * na[1]]));
                contributions.push((*b, *a, [0.5 * nb[0], 0.5 * nb[1]]));
            }
            _ => {
                return Err(MeshError::Invalid(format!(
                    "face {key:?} shared by {} cells (mesh too coarse for its topology?)",
                    sides.len()
                )))
            }
        }
    }
    ConnectivityGraph::assemble(
        mesh.dim,
        Discretization::FiniteVolume,
        mesh.topology,
        masses,
        positions,
        contributions,
    )
}

/// Element-local P1 data: node ids, shape-function gradients, and measure.
struct P1Element {
    ids: Vec<usize>,
    grads: Vec<Vector>,
    measure: f64,
}

fn p1_elements(mesh: &MeshDescriptor) -> Result<Vec<P1Element>, MeshError> {
    mesh.validate()?;
    if mesh.kind == ElementKind::Quad {
        return Err(MeshError::Invalid("continuous P1 needs interval or triangle elements".into()));
    }
    let floor = measure_floor(mesh);
    (0..mesh.elements.len())
        .into_par_iter()
        .map(|e| {
            let ids = mesh.elements[e].clone();
            let x = mesh.element_coordinates(e);
            let jac = signed_measure(mesh.kind, &x);
            if jac < 0.0 {
                return Err(MeshError::InvertedElement { element: e, jacobian: jac });
            }
            if jac <= floor {
                return Err(MeshError::DegenerateCell { cell: e, measure: jac });
            }
            let grads = match mesh.kind {
                ElementKind::Interval => vec![[-1.0 / jac, 0.0], [1.0 / jac, 0.0]],
                _ => {
                    let s = 1.0 / (2.0 * jac);
                    vec![
                        [(x[1][1] - x[2][1]) * s, (x[2][0] - x[1][0]) * s],
                        [(x[2][1] - x[0][1]) * s, (x[0][0] - x[2][0]) * s],
                        [(x[0][1] - x[1][1]) * s, (x[1][0] - x[0][0]) * s],
                    ]
                }
            };
            Ok(P1Element { ids, grads, measure: jac })
        })
        .collect()
}

/// `∫ φ_a` and `∫ φ_a φ_b` for P1 on a simplex of the given measure.
fn p1_mass_local(kind: ElementKind, measure: f64, same: bool) -> (f64, f64) {
    match kind {
        ElementKind::Interval => (measure / 2.0, if same { measure / 3.0 } else { measure / 6.0 }),
        _ => (measure / 3.0, if same { measure / 6.0 } else { measure / 12.0 }),
    }
}

/// Continuous P1 graph: `c_ij = ∫ φ_i ∇φ_j`, `m_i = ∫ φ_i`.
pub fn build_cg_p1_graph(mesh: &MeshDescriptor) -> Result<ConnectivityGraph, MeshError> {
    let elements = p1_elements(mesh)?;
    let mut masses = vec![0.0; mesh.nodes.len()];
    let mut contributions = Vec::with_capacity(elements.len() * 9);
    for el in &elements {
        let (lumped, _) = p1_mass_local(mesh.kind, el.measure, true);
        for &i in &el.ids {
            masses[i] += lumped;
            for (&j, g) in el.ids.iter().zip(&el.grads) {
                contributions.push((i, j, [lumped * g[0], lumped * g[1]]));
            }
        }
    }
    ConnectivityGraph::assemble(
        mesh.dim,
        Discretization::ContinuousP1,
        mesh.topology,
        masses,
        mesh.nodes.clone(),
        contributions,
    )
}

/// Consistent P1 mass matrix, stored on the graph's CSR pattern.
#[derive(Debug, Clone)]
pub struct ConsistentMass {
    values: Vec<f64>,
}

impl ConsistentMass {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn entry(&self, k: usize) -> f64 {
        self.values[k]
    }
}

fn scatter_on_graph(
    graph: &ConnectivityGraph,
    elements: &[P1Element],
    local: impl Fn(&P1Element, usize, usize) -> f64,
) -> Result<Vec<f64>, MeshError> {
    let mut values = vec![0.0; graph.n_entries()];
    for el in elements {
        for (a, &i) in el.ids.iter().enumerate() {
            for (b, &j) in el.ids.iter().enumerate() {
                let k = graph
                    .find(i, j)
                    .ok_or_else(|| MeshError::Invalid(format!("graph lacks entry ({i}, {j})")))?;
                values[k] += local(el, a, b);
            }
        }
    }
    for k in 0..values.len() {
        let t = graph.transpose(k);
        if k < t {
            let avg = 0.5 * (values[k] + values[t]);
            values[k] = avg;
            values[t] = avg;
        }
    }
    Ok(values)
}

pub fn build_cg_consistent_mass(mesh: &MeshDescriptor, graph: &ConnectivityGraph) -> Result<ConsistentMass, MeshError> {
    if graph.discretization() != Discretization::ContinuousP1 || graph.n_vertices() != mesh.nodes.len() {
        return Err(MeshError::Invalid("consistent mass needs the P1 graph of this mesh".into()));
    }
    let elements = p1_elements(mesh)?;
    let kind = mesh.kind;
    let values = scatter_on_graph(graph, &elements, |el, a, b| p1_mass_local(kind, el.measure, a == b).1)?;
    Ok(ConsistentMass { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaChoice {
    /// `β_ij = 1` on every off-diagonal entry.
    Ones,
    /// `|∫ ∇φ_i · ∇φ_j|` (continuous P1 only).
    Stiffness,
}

/// Linearity weights: the raw signed values and the nonnegative weights the
/// algorithms use. The diagonal is zero in both.
#[derive(Debug, Clone)]
pub struct BetaWeights {
    pub signed: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn build_beta_weights(
    graph: &ConnectivityGraph,
    mesh: &MeshDescriptor,
    choice: BetaChoice,
) -> Result<BetaWeights, MeshError> {
    let signed = match choice {
        BetaChoice::Ones => (0..graph.n_entries()).map(|_| 1.0).collect(),
        BetaChoice::Stiffness => {
            if graph.discretization() != Discretization::ContinuousP1 {
                return Err(MeshError::Invalid("stiffness weights need a continuous P1 graph".into()));
            }
            let elements = p1_elements(mesh)?;
            scatter_on_graph(graph, &elements, |el, a, b| {
                el.measure * (el.grads[a][0] * el.grads[b][0] + el.grads[a][1] * el.grads[b][1])
            })?
        }
    };
    let mut signed: Vec<f64> = signed;
    for i in 0..graph.n_vertices() {
        signed[graph.diagonal(i)] = 0.0;
    }
    let weights = signed.iter().map(|b| b.abs()).collect();
    Ok(BetaWeights { signed, weights })
}
