//! Continuous Lagrange spaces on the structured mesh: piecewise-quadratic
//! velocity with zero trace, piecewise-linear pressure multiplier and
//! piecewise-linear temperature.

use std::sync::Arc;

use super::mesh::Mesh;

/// Values of the six local P2 shape functions at barycentric point `l`.
/// Local nodes are the three vertices followed by the midpoints of edges
/// (0,1), (1,2), (2,0).
#[inline]
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Physical gradients of the six local P2 shape functions.
#[inline]
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let f = 4.0 * l[i] - 1.0;
        out[i] = [f * g[i][0], f * g[i][1]];
    }
    for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        out[3 + k] = [
            4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
            4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
        ];
    }
    out
}

/// Piecewise-quadratic vector fields vanishing on the boundary.
///
/// Velocity coefficients are ordered `[u_x(node 0), u_y(node 0), u_x(node 1), …]`
/// over the free (interior) P2 nodes.
#[derive(Debug, Clone)]
pub struct VelocitySpace {
    mesh: Arc<Mesh>,
    node_coords: Vec<[f64; 2]>,
    node_boundary: Vec<bool>,
    free_index: Vec<Option<usize>>,
    n_free: usize,
}

impl VelocitySpace {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let nv = mesh.n_vertices();
        let mut node_coords: Vec<[f64; 2]> = mesh.vertices().to_vec();
        let mut node_boundary: Vec<bool> = mesh.boundary_markers().to_vec();
        for (e, &[a, b]) in mesh.edges().iter().enumerate() {
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            node_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            node_boundary.push(mesh.edge_on_boundary(e));
        }
        let mut n_free = 0;
        let free_index = node_boundary
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    n_free += 1;
                    Some(n_free - 1)
                }
            })
            .collect();
        debug_assert_eq!(node_coords.len(), nv + mesh.n_edges());
        Self {
            mesh,
            node_coords,
            node_boundary,
            free_index,
            n_free,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }

    pub fn node_on_boundary(&self, node: usize) -> bool {
        self.node_boundary[node]
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    /// Number of velocity coefficients (two per free node).
    pub fn n_dofs(&self) -> usize {
        2 * self.n_free
    }

    /// Global P2 node indices of cell `c`.
    pub fn cell_nodes(&self, c: usize) -> [usize; 6] {
        let v = self.mesh.cells()[c];
        let e = self.mesh.cell_edges()[c];
        let nv = self.mesh.n_vertices();
        [v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]]
    }

    /// Velocity dof indices of cell `c` for `[x-components…, y-components…]`
    /// of the six local nodes; `None` for boundary nodes.
    pub fn cell_dofs(&self, c: usize) -> [Option<usize>; 12] {
        let nodes = self.cell_nodes(c);
        let mut out = [None; 12];
        for (k, &nd) in nodes.iter().enumerate() {
            if let Some(f) = self.free_index[nd] {
                out[k] = Some(2 * f);
                out[6 + k] = Some(2 * f + 1);
            }
        }
        out
    }

    /// Local coefficients `[u_x; 6], [u_y; 6]` of a global coefficient vector.
    pub fn local_coeffs(&self, coeffs: &[f64], c: usize) -> ([f64; 6], [f64; 6]) {
        let mut ux = [0.0; 6];
        let mut uy = [0.0; 6];
        for (k, nd) in self.cell_nodes(c).into_iter().enumerate() {
            if let Some(f) = self.free_index[nd] {
                ux[k] = coeffs[2 * f];
                uy[k] = coeffs[2 * f + 1];
            }
        }
        (ux, uy)
    }

    /// Nodal interpolant of `u` (boundary values are dropped).
    pub fn interpolate(&self, u: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        for (nd, p) in self.node_coords.iter().enumerate() {
            if let Some(f) = self.free_index[nd] {
                let v = u(p[0], p[1]);
                out[2 * f] = v[0];
                out[2 * f + 1] = v[1];
            }
        }
        out
    }

    /// Value and gradient `[[∂x u, ∂y u], [∂x v, ∂y v]]` at barycentric `l` of cell `c`.
    pub fn eval(&self, coeffs: &[f64], c: usize, l: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
        let (ux, uy) = self.local_coeffs(coeffs, c);
        let g = self.mesh.barycentric_gradients(c);
        eval_local(&ux, &uy, l, &g)
    }

    /// Value at an arbitrary point of the square.
    pub fn eval_at(&self, coeffs: &[f64], x: f64, y: f64) -> [f64; 2] {
        let (c, l) = self.mesh.locate(x, y);
        self.eval(coeffs, c, l).0
    }
}

#[inline]
pub(crate) fn eval_local(
    ux: &[f64; 6],
    uy: &[f64; 6],
    l: [f64; 3],
    g: &[[f64; 2]; 3],
) -> ([f64; 2], [[f64; 2]; 2]) {
    let phi = p2_values(l);
    let dphi = p2_gradients(l, g);
    let mut val = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for k in 0..6 {
        val[0] += ux[k] * phi[k];
        val[1] += uy[k] * phi[k];
        grad[0][0] += ux[k] * dphi[k][0];
        grad[0][1] += ux[k] * dphi[k][1];
        grad[1][0] += uy[k] * dphi[k][0];
        grad[1][1] += uy[k] * dphi[k][1];
    }
    (val, grad)
}

/// Piecewise-linear scalar fields on the mesh vertices.
///
/// Temperatures are stored as full nodal vectors over all vertices; the
/// fluctuation part vanishes at boundary vertices and the interior map
/// enumerates the unknowns of the Dirichlet problem.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    mesh: Arc<Mesh>,
    interior_index: Vec<Option<usize>>,
    interior_nodes: Vec<usize>,
}

impl ScalarSpace {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mut interior_nodes = Vec::new();
        let interior_index = mesh
            .boundary_markers()
            .iter()
            .enumerate()
            .map(|(v, &b)| {
                if b {
                    None
                } else {
                    interior_nodes.push(v);
                    Some(interior_nodes.len() - 1)
                }
            })
            .collect();
        Self {
            mesh,
            interior_index,
            interior_nodes,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_index[v]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.mesh.vertices().iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Zeroes the boundary entries of a nodal vector.
    pub fn mask_boundary(&self, v: &mut [f64]) {
        for (x, &b) in v.iter_mut().zip(self.mesh.boundary_markers()) {
            if b {
                *x = 0.0;
            }
        }
    }

    pub fn eval(&self, nodal: &[f64], c: usize, l: [f64; 3]) -> f64 {
        let v = self.mesh.cells()[c];
        l[0] * nodal[v[0]] + l[1] * nodal[v[1]] + l[2] * nodal[v[2]]
    }

    /// Constant gradient of a P1 field on cell `c`.
    pub fn gradient(&self, nodal: &[f64], c: usize) -> [f64; 2] {
        let v = self.mesh.cells()[c];
        let g = self.mesh.barycentric_gradients(c);
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += nodal[v[k]] * g[k][0];
            out[1] += nodal[v[k]] * g[k][1];
        }
        out
    }

    pub fn eval_at(&self, nodal: &[f64], x: f64, y: f64) -> f64 {
        let (c, l) = self.mesh.locate(x, y);
        self.eval(nodal, c, l)
    }
}
