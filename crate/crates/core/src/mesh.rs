//! Mesh descriptors for 1D intervals, axis-aligned quads and P1 triangles.
//!
//! A mesh is a list of nodes plus a list of elements (node index lists). On a
//! periodic box, element geometry is recovered with the minimum-image
//! convention relative to the element's first node, so elements must be small
//! compared with the period.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MeshError;
use crate::state::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// The box is a torus.
    Periodic,
    /// Cauchy box: the solution is assumed constant near the boundary.
    CompactSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Interval,
    Quad,
    Triangle,
}

impl ElementKind {
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Interval => 2,
            ElementKind::Quad => 4,
            ElementKind::Triangle => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeshDescriptor {
    pub dim: usize,
    pub topology: Topology,
    pub kind: ElementKind,
    pub nodes: Vec<Vector>,
    pub elements: Vec<Vec<usize>>,
    /// Lower and upper corner of the bounding box (the period on a torus).
    pub lower: Vector,
    pub upper: Vector,
}

impl MeshDescriptor {
    /// Uniform interval mesh of `cells` cells on `[a, b]`.
    pub fn interval(cells: usize, a: f64, b: f64, topology: Topology) -> Self {
        Self::interval_perturbed(cells, a, b, topology, 0.0, 0)
    }

    /// Interval mesh with interior nodes moved by up to `jitter * h`.
    pub fn interval_perturbed(
        cells: usize,
        a: f64,
        b: f64,
        topology: Topology,
        jitter: f64,
        seed: u64,
    ) -> Self {
        let h = (b - a) / cells as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let node_count = match topology {
            Topology::Periodic => cells,
            Topology::CompactSupport => cells + 1,
        };
        let nodes = (0..node_count)
            .map(|i| {
                let movable = topology == Topology::Periodic || (i > 0 && i < cells);
                let shift = if movable && jitter > 0.0 {
                    rng.gen_range(-jitter..jitter) * h
                } else {
                    0.0
                };
                [a + i as f64 * h + shift, 0.0]
            })
            .collect();
        let elements = (0..cells).map(|e| vec![e, (e + 1) % node_count]).collect();
        MeshDescriptor {
            dim: 1,
            topology,
            kind: ElementKind::Interval,
            nodes,
            elements,
            lower: [a, 0.0],
            upper: [b, 0.0],
        }
    }

    fn grid_nodes(nx: usize, ny: usize, lower: Vector, upper: Vector, topology: Topology) -> (usize, usize, Vec<Vector>) {
        let (px, py) = match topology {
            Topology::Periodic => (nx, ny),
            Topology::CompactSupport => (nx + 1, ny + 1),
        };
        let hx = (upper[0] - lower[0]) / nx as f64;
        let hy = (upper[1] - lower[1]) / ny as f64;
        let mut nodes = Vec::with_capacity(px * py);
        for j in 0..py {
            for i in 0..px {
                nodes.push([lower[0] + i as f64 * hx, lower[1] + j as f64 * hy]);
            }
        }
        (px, py, nodes)
    }

    /// Axis-aligned `nx × ny` quad grid (finite volumes).
    pub fn cartesian_quads(nx: usize, ny: usize, lower: Vector, upper: Vector, topology: Topology) -> Self {
        let (px, py, nodes) = Self::grid_nodes(nx, ny, lower, upper, topology);
        let id = |i: usize, j: usize| (j % py) * px + (i % px);
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        MeshDescriptor { dim: 2, topology, kind: ElementKind::Quad, nodes, elements, lower, upper }
    }

    /// Structured triangulation of an `nx × ny` grid, each square split along
    /// an alternating diagonal; movable nodes are jittered by up to
    /// `jitter * min(hx, hy)`.
    pub fn triangles(
        nx: usize,
        ny: usize,
        lower: Vector,
        upper: Vector,
        topology: Topology,
        jitter: f64,
        seed: u64,
    ) -> Self {
        let (px, py, mut nodes) = Self::grid_nodes(nx, ny, lower, upper, topology);
        if jitter > 0.0 {
            let h = ((upper[0] - lower[0]) / nx as f64).min((upper[1] - lower[1]) / ny as f64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for j in 0..py {
                for i in 0..px {
                    let interior = topology == Topology::Periodic || (i > 0 && i < nx && j > 0 && j < ny);
                    let dx = rng.gen_range(-jitter..jitter) * h;
                    let dy = rng.gen_range(-jitter..jitter) * h;
                    if interior {
                        let node = &mut nodes[j * px + i];
                        node[0] += dx;
                        node[1] += dy;
                    }
                }
            }
        }
        let id = |i: usize, j: usize| (j % py) * px + (i % px);
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    elements.push(vec![a, b, c]);
                    elements.push(vec![a, c, d]);
                } else {
                    elements.push(vec![a, b, d]);
                    elements.push(vec![b, c, d]);
                }
            }
        }
        MeshDescriptor { dim: 2, topology, kind: ElementKind::Triangle, nodes, elements, lower, upper }
    }

    pub fn period(&self) -> Vector {
        [self.upper[0] - self.lower[0], self.upper[1] - self.lower[1]]
    }

    /// Displacement `to - from`, wrapped to the minimum image on a torus.
    pub fn displacement(&self, from: &Vector, to: &Vector) -> Vector {
        let mut d = [to[0] - from[0], to[1] - from[1]];
        if self.topology == Topology::Periodic {
            let period = self.period();
            for k in 0..self.dim {
                if period[k] > 0.0 {
                    d[k] -= period[k] * (d[k] / period[k]).round();
                }
            }
        }
        d
    }

    /// Node coordinates of an element, unwrapped around its first node.
    pub fn element_coordinates(&self, element: usize) -> Vec<Vector> {
        let ids = &self.elements[element];
        let origin = self.nodes[ids[0]];
        ids.iter()
            .map(|&n| {
                let d = self.displacement(&origin, &self.nodes[n]);
                [origin[0] + d[0], origin[1] + d[1]]
            })
            .collect()
    }

    /// Wrap a point back into the box on a torus.
    pub fn wrap(&self, x: Vector) -> Vector {
        if self.topology != Topology::Periodic {
            return x;
        }
        let period = self.period();
        let mut out = x;
        for k in 0..self.dim {
            if period[k] > 0.0 {
                out[k] = self.lower[k] + (x[k] - self.lower[k]).rem_euclid(period[k]);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.dim != 1 && self.dim != 2 {
            return Err(MeshError::Invalid(format!("dimension {} not supported", self.dim)));
        }
        let expected_dim = match self.kind {
            ElementKind::Interval => 1,
            ElementKind::Quad | ElementKind::Triangle => 2,
        };
        if expected_dim != self.dim {
            return Err(MeshError::Invalid(format!("{:?} elements in dimension {}", self.kind, self.dim)));
        }
        if self.elements.is_empty() {
            return Err(MeshError::Invalid("mesh has no elements".into()));
        }
        for (e, ids) in self.elements.iter().enumerate() {
            if ids.len() != self.kind.node_count() {
                return Err(MeshError::Invalid(format!("element {e} has {} nodes", ids.len())));
            }
            if let Some(&bad) = ids.iter().find(|&&n| n >= self.nodes.len()) {
                return Err(MeshError::Invalid(format!("element {e} references missing node {bad}")));
            }
        }
        Ok(())
    }
}

/// Signed measure (length or area) of an element from unwrapped coordinates.
pub fn signed_measure(kind: ElementKind, x: &[Vector]) -> f64 {
    match kind {
        ElementKind::Interval => x[1][0] - x[0][0],
        ElementKind::Triangle => {
            0.5 * ((x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]))
        }
        ElementKind::Quad => {
            let mut twice = 0.0;
            for a in 0..4 {
                let b = (a + 1) % 4;
                twice += x[a][0] * x[b][1] - x[b][0] * x[a][1];
            }
            0.5 * twice
        }
    }
}
