use std::collections::HashMap;

use crate::{Error, Result};

/// Structured triangulation of the unit square.
///
/// Each of the `n × n` squares is cut along the diagonal from its lower-left
/// to its upper-right corner, giving `2n²` right triangles. The diagonal
/// direction is the same everywhere, so the mesh on `2n` subdivisions is the
/// uniform red refinement of the mesh on `n`.
#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    edge_boundary: Vec<bool>,
}

/// Local edge `k` of a cell joins local vertices `EDGE_VERTICES[k]`.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!(
                "mesh needs at least 2 subdivisions per side, got {n}"
            )));
        }
        let h = 1.0 / n as f64;
        let np = n + 1;
        let vid = |i: usize, j: usize| j * np + i;
        let mut vertices = Vec::with_capacity(np * np);
        let mut boundary = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = vid(i, j);
                let v10 = vid(i + 1, j);
                let v11 = vid(i + 1, j + 1);
                let v01 = vid(i, j + 1);
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for c in &cells {
            let mut ce = [0; 3];
            for (k, ev) in EDGE_VERTICES.iter().enumerate() {
                let a = c[ev[0]];
                let b = c[ev[1]];
                let key = (a.min(b), a.max(b));
                let id = *edge_map.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                ce[k] = id;
            }
            cell_edges.push(ce);
        }
        let edge_boundary = edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (vertices[a], vertices[b]);
                (pa[0] == pb[0] && (pa[0] == 0.0 || pa[0] == 1.0))
                    || (pa[1] == pb[1] && (pa[1] == 0.0 || pa[1] == 1.0))
            })
            .collect();

        Ok(Self {
            n,
            vertices,
            cells,
            boundary,
            edges,
            cell_edges,
            edge_boundary,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn boundary_markers(&self) -> &[bool] {
        &self.boundary
    }

    pub fn edge_on_boundary(&self, e: usize) -> bool {
        self.edge_boundary[e]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cells[c].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
    }

    /// Gradients of the three barycentric coordinates on cell `c`.
    pub fn barycentric_gradients(&self, c: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.cells[c].map(|v| self.vertices[v]);
        let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ]
    }

    /// Physical coordinates of a point given by barycentric coordinates.
    pub fn map_point(&self, c: usize, lambda: [f64; 3]) -> [f64; 2] {
        let v = self.cells[c].map(|i| self.vertices[i]);
        [
            lambda[0] * v[0][0] + lambda[1] * v[1][0] + lambda[2] * v[2][0],
            lambda[0] * v[0][1] + lambda[1] * v[1][1] + lambda[2] * v[2][1],
        ]
    }

    /// Cell containing `(x, y)` (points outside are clamped onto the square)
    /// and the barycentric coordinates of the point in that cell.
    pub fn locate(&self, x: f64, y: f64) -> (usize, [f64; 3]) {
        let n = self.n as f64;
        let sx = (x.clamp(0.0, 1.0) * n).min(n);
        let sy = (y.clamp(0.0, 1.0) * n).min(n);
        let i = (sx.floor() as usize).min(self.n - 1);
        let j = (sy.floor() as usize).min(self.n - 1);
        let xi = sx - i as f64;
        let eta = sy - j as f64;
        let base = 2 * (j * self.n + i);
        if xi >= eta {
            (base, [1.0 - xi, xi - eta, eta])
        } else {
            (base + 1, [1.0 - eta, xi, eta - xi])
        }
    }
}
