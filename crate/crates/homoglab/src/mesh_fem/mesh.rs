//! Uniform tensor-product meshes of bilinear quadrilaterals and nodal fields
//! on them.
//!
//! Domain meshes are non-periodic; cell meshes on the unit cell identify
//! opposite faces. Element (e1, e2) covers [e1 h1, (e1+1) h1] x [e2 h2,
//! (e2+1) h2] and its corners are numbered counter-clockwise from the lower
//! left. All quadrature is 2x2 Gauss per element.

use std::sync::Arc;

use crate::algebra::{KahanSum, Vec2};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

/// Local Gauss abscissa offset: 1/2 - 1/(2 sqrt(3)) on the unit reference square.
const GAUSS_OFFSET: f64 = 0.211_324_865_405_187_1;

/// Local coordinates of the four Gauss points on [0,1]^2.
pub const GAUSS_LOCAL: [[f64; 2]; 4] = [
    [GAUSS_OFFSET, GAUSS_OFFSET],
    [1.0 - GAUSS_OFFSET, GAUSS_OFFSET],
    [1.0 - GAUSS_OFFSET, 1.0 - GAUSS_OFFSET],
    [GAUSS_OFFSET, 1.0 - GAUSS_OFFSET],
];

#[derive(Debug)]
struct MeshData {
    domain: DomainSpec,
    subdivisions: (usize, usize),
    periodic: bool,
}

/// Uniform structured mesh; cheap to clone and share.
#[derive(Debug, Clone)]
pub struct Mesh(Arc<MeshData>);

/// Build a uniform mesh of the given domain. With `periodic` set, opposite
/// faces are identified (used for the unit-cell problems).
pub fn build_mesh(domain: &DomainSpec, subdivisions: (usize, usize), periodic: bool) -> Result<Mesh> {
    if domain.dim() != 2 {
        return Err(Error::Parameter("meshes are two-dimensional".into()));
    }
    if subdivisions.0 < 2 || subdivisions.1 < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 subdivisions per axis, got {subdivisions:?}"
        )));
    }
    Ok(Mesh(Arc::new(MeshData {
        domain: *domain,
        subdivisions,
        periodic,
    })))
}

/// A boundary node together with its position and counter-clockwise
/// arclength coordinate (starting at the origin corner).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    pub node: usize,
    pub arclength: f64,
    pub position: Vec2,
}

impl Mesh {
    pub fn domain(&self) -> &DomainSpec {
        &self.0.domain
    }

    pub fn subdivisions(&self) -> (usize, usize) {
        self.0.subdivisions
    }

    pub fn periodic(&self) -> bool {
        self.0.periodic
    }

    pub fn spacing(&self) -> Vec2 {
        let (m1, m2) = self.0.subdivisions;
        [
            self.0.domain.extent(0) / m1 as f64,
            self.0.domain.extent(1) / m2 as f64,
        ]
    }

    pub fn n_elements(&self) -> usize {
        self.0.subdivisions.0 * self.0.subdivisions.1
    }

    /// Number of nodes, i.e. periodic equivalence classes on periodic meshes.
    pub fn n_nodes(&self) -> usize {
        let (m1, m2) = self.0.subdivisions;
        if self.0.periodic {
            m1 * m2
        } else {
            (m1 + 1) * (m2 + 1)
        }
    }

    /// Node id for lattice coordinates, reducing modulo the period on
    /// periodic meshes.
    pub fn node_id(&self, i: usize, j: usize) -> usize {
        let (m1, m2) = self.0.subdivisions;
        if self.0.periodic {
            (j % m2) * m1 + (i % m1)
        } else {
            debug_assert!(i <= m1 && j <= m2);
            j * (m1 + 1) + i
        }
    }

    /// Lattice coordinates of a node id (canonical representative).
    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        let (m1, _) = self.0.subdivisions;
        if self.0.periodic {
            (node % m1, node / m1)
        } else {
            (node % (m1 + 1), node / (m1 + 1))
        }
    }

    pub fn node_position(&self, node: usize) -> Vec2 {
        let (i, j) = self.node_coords(node);
        let h = self.spacing();
        [i as f64 * h[0], j as f64 * h[1]]
    }

    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        let (m1, _) = self.0.subdivisions;
        (e % m1, e / m1)
    }

    pub fn element_id(&self, e1: usize, e2: usize) -> usize {
        e2 * self.0.subdivisions.0 + e1
    }

    /// Corner node ids, counter-clockwise from the lower-left corner.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (e1, e2) = self.element_coords(e);
        [
            self.node_id(e1, e2),
            self.node_id(e1 + 1, e2),
            self.node_id(e1 + 1, e2 + 1),
            self.node_id(e1, e2 + 1),
        ]
    }

    pub fn element_origin(&self, e: usize) -> Vec2 {
        let (e1, e2) = self.element_coords(e);
        let h = self.spacing();
        [e1 as f64 * h[0], e2 as f64 * h[1]]
    }

    pub fn element_barycenter(&self, e: usize) -> Vec2 {
        let o = self.element_origin(e);
        let h = self.spacing();
        [o[0] + 0.5 * h[0], o[1] + 0.5 * h[1]]
    }

    /// Global position of Gauss point `g` of element `e`.
    pub fn gauss_position(&self, e: usize, g: usize) -> Vec2 {
        let o = self.element_origin(e);
        let h = self.spacing();
        [
            o[0] + GAUSS_LOCAL[g][0] * h[0],
            o[1] + GAUSS_LOCAL[g][1] * h[1],
        ]
    }

    /// Quadrature weight of one Gauss point (all four are equal).
    pub fn gauss_weight(&self) -> f64 {
        let h = self.spacing();
        0.25 * h[0] * h[1]
    }

    /// Shape function values at a local point, corner order as in
    /// [`element_nodes`](Self::element_nodes).
    pub fn shape_values(local: Vec2) -> [f64; 4] {
        let [s, t] = local;
        [
            (1.0 - s) * (1.0 - t),
            s * (1.0 - t),
            s * t,
            (1.0 - s) * t,
        ]
    }

    /// Global-coordinate shape gradients at a local point.
    pub fn shape_gradients(&self, local: Vec2) -> [Vec2; 4] {
        let [s, t] = local;
        let h = self.spacing();
        [
            [-(1.0 - t) / h[0], -(1.0 - s) / h[1]],
            [(1.0 - t) / h[0], -s / h[1]],
            [t / h[0], s / h[1]],
            [-t / h[0], (1.0 - s) / h[1]],
        ]
    }

    /// Element containing `p` and the local coordinates of `p` in it.
    /// Points on element edges go to the higher element except on the far
    /// domain faces, which clamp back inside.
    pub fn locate(&self, p: Vec2) -> (usize, Vec2) {
        let (m1, m2) = self.0.subdivisions;
        let h = self.spacing();
        let t1 = p[0] / h[0];
        let t2 = p[1] / h[1];
        let e1 = (t1.floor() as i64).clamp(0, m1 as i64 - 1) as usize;
        let e2 = (t2.floor() as i64).clamp(0, m2 as i64 - 1) as usize;
        (self.element_id(e1, e2), [t1 - e1 as f64, t2 - e2 as f64])
    }

    /// Ids of boundary nodes (non-periodic meshes), in no particular order.
    pub fn boundary_node_ids(&self) -> Vec<usize> {
        assert!(!self.0.periodic, "periodic meshes have no boundary");
        self.boundary_nodes().iter().map(|b| b.node).collect()
    }

    /// Boundary nodes ordered counter-clockwise starting at the origin,
    /// each corner listed once.
    pub fn boundary_nodes(&self) -> Vec<BoundaryNode> {
        assert!(!self.0.periodic, "periodic meshes have no boundary");
        let (m1, m2) = self.0.subdivisions;
        let h = self.spacing();
        let l1 = self.0.domain.extent(0);
        let l2 = self.0.domain.extent(1);
        let mut out = Vec::with_capacity(2 * (m1 + m2));
        for i in 0..m1 {
            out.push((self.node_id(i, 0), i as f64 * h[0]));
        }
        for j in 0..m2 {
            out.push((self.node_id(m1, j), l1 + j as f64 * h[1]));
        }
        for i in (1..=m1).rev() {
            out.push((self.node_id(i, m2), l1 + l2 + (l1 - i as f64 * h[0])));
        }
        for j in (1..=m2).rev() {
            out.push((self.node_id(0, j), 2.0 * l1 + l2 + (l2 - j as f64 * h[1])));
        }
        out.into_iter()
            .map(|(node, arclength)| BoundaryNode {
                node,
                arclength,
                position: self.node_position(node),
            })
            .collect()
    }

    /// Node ids reachable through adjacent elements, self included, sorted.
    pub fn node_stencil(&self, node: usize) -> Vec<usize> {
        let (i, j) = self.node_coords(node);
        let (m1, m2) = self.0.subdivisions;
        let mut out = Vec::with_capacity(9);
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if self.0.periodic {
                    let ii = ii.rem_euclid(m1 as i64) as usize;
                    let jj = jj.rem_euclid(m2 as i64) as usize;
                    out.push(self.node_id(ii, jj));
                } else if ii >= 0 && ii <= m1 as i64 && jj >= 0 && jj <= m2 as i64 {
                    out.push(self.node_id(ii as usize, jj as usize));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// True when two meshes are the same object or structurally identical.
    pub fn same_layout(&self, other: &Mesh) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.domain == other.0.domain
                && self.0.subdivisions == other.0.subdivisions
                && self.0.periodic == other.0.periodic)
    }
}

/// Nodal scalar field on a mesh (one value per node class).
#[derive(Debug, Clone)]
pub struct GridFunction {
    mesh: Mesh,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(mesh: Mesh) -> Self {
        let n = mesh.n_nodes();
        Self { mesh, values: vec![0.0; n] }
    }

    pub fn from_values(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::Input(format!(
                "value count {} does not match node count {}",
                values.len(),
                mesh.n_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("grid function contains non-finite values".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn(mesh: Mesh, f: impl Fn(Vec2) -> f64) -> Result<Self> {
        let values = (0..mesh.n_nodes())
            .map(|n| f(mesh.node_position(n)))
            .collect();
        Self::from_values(mesh, values)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> GridFunction {
        GridFunction {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        if !self.mesh.same_layout(&other.mesh) {
            return Err(Error::Input("grid functions live on different meshes".into()));
        }
        Ok(GridFunction {
            mesh: self.mesh.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Bilinear interpolation at a point of the closed domain.
    pub fn eval(&self, p: Vec2) -> f64 {
        let (e, local) = self.mesh.locate(p);
        let shapes = Mesh::shape_values(local);
        let nodes = self.mesh.element_nodes(e);
        (0..4).map(|a| shapes[a] * self.values[nodes[a]]).sum()
    }

    /// Evaluation after reflecting `p` into the closed domain across the
    /// rectangle faces (single reflection per axis).
    pub fn eval_mirror(&self, p: Vec2) -> f64 {
        self.eval(self.mirror_point(p))
    }

    fn mirror_point(&self, p: Vec2) -> Vec2 {
        let mut q = p;
        for a in 0..2 {
            let l = self.mesh.domain().extent(a);
            if q[a] < 0.0 {
                q[a] = -q[a];
            } else if q[a] > l {
                q[a] = 2.0 * l - q[a];
            }
        }
        q
    }

    /// Interpolation on periodic meshes with wrap-around; `p` in lattice
    /// units of the cell.
    pub fn eval_periodic(&self, p: Vec2) -> f64 {
        debug_assert!(self.mesh.periodic());
        let (m1, m2) = self.mesh.subdivisions();
        let h = self.mesh.spacing();
        let t1 = p[0] / h[0];
        let t2 = p[1] / h[1];
        let i = t1.floor() as i64;
        let j = t2.floor() as i64;
        let s = t1 - i as f64;
        let t = t2 - j as f64;
        let i = i.rem_euclid(m1 as i64) as usize;
        let j = j.rem_euclid(m2 as i64) as usize;
        let shapes = Mesh::shape_values([s, t]);
        let nodes = [
            self.mesh.node_id(i, j),
            self.mesh.node_id(i + 1, j),
            self.mesh.node_id(i + 1, j + 1),
            self.mesh.node_id(i, j + 1),
        ];
        (0..4).map(|a| shapes[a] * self.values[nodes[a]]).sum()
    }

    /// Gradient of the periodic interpolant at `p`.
    pub fn grad_periodic(&self, p: Vec2) -> Vec2 {
        debug_assert!(self.mesh.periodic());
        let (m1, m2) = self.mesh.subdivisions();
        let h = self.mesh.spacing();
        let t1 = p[0] / h[0];
        let t2 = p[1] / h[1];
        let i = t1.floor() as i64;
        let j = t2.floor() as i64;
        let s = t1 - i as f64;
        let t = t2 - j as f64;
        let i = i.rem_euclid(m1 as i64) as usize;
        let j = j.rem_euclid(m2 as i64) as usize;
        let grads = self.mesh.shape_gradients([s, t]);
        let nodes = [
            self.mesh.node_id(i, j),
            self.mesh.node_id(i + 1, j),
            self.mesh.node_id(i + 1, j + 1),
            self.mesh.node_id(i, j + 1),
        ];
        let mut out = [0.0; 2];
        for a in 0..4 {
            out[0] += grads[a][0] * self.values[nodes[a]];
            out[1] += grads[a][1] * self.values[nodes[a]];
        }
        out
    }

    /// Trapezoid-rule integral over the mesh (exact pairing of nodal data
    /// with element corner weights; compensated summation).
    pub fn integral_trapezoid(&self) -> f64 {
        let w = self.mesh.gauss_weight(); // h1 h2 / 4, same corner weight
        let mut acc = KahanSum::new();
        for e in 0..self.mesh.n_elements() {
            for n in self.mesh.element_nodes(e) {
                acc.add(w * self.values[n]);
            }
        }
        acc.value()
    }

    /// Trapezoid-rule L2 norm.
    pub fn l2_trapezoid(&self) -> f64 {
        let w = self.mesh.gauss_weight();
        let mut acc = KahanSum::new();
        for e in 0..self.mesh.n_elements() {
            for n in self.mesh.element_nodes(e) {
                acc.add(w * self.values[n] * self.values[n]);
            }
        }
        acc.value().max(0.0).sqrt()
    }

    /// Arithmetic mean of the node-class values.
    pub fn mean(&self) -> f64 {
        let mut acc = KahanSum::new();
        for &v in &self.values {
            acc.add(v);
        }
        acc.value() / self.values.len() as f64
    }
}

/// Vector-valued samples at the 2x2 Gauss points of every element,
/// element-major layout.
#[derive(Debug, Clone)]
pub struct GaussVecField {
    mesh: Mesh,
    data: Vec<Vec2>,
}

impl GaussVecField {
    pub fn new(mesh: Mesh, data: Vec<Vec2>) -> Result<Self> {
        if data.len() != 4 * mesh.n_elements() {
            return Err(Error::Input(format!(
                "expected {} gauss samples, got {}",
                4 * mesh.n_elements(),
                data.len()
            )));
        }
        Ok(Self { mesh, data })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn at(&self, e: usize, g: usize) -> Vec2 {
        self.data[e * 4 + g]
    }

    pub fn data(&self) -> &[Vec2] {
        &self.data
    }
}

/// Per-element Gauss-point gradients of a nodal field.
pub fn gradient_at_gauss(u: &GridFunction) -> GaussVecField {
    let mesh = u.mesh().clone();
    let mut data = Vec::with_capacity(4 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        for local in GAUSS_LOCAL {
            let grads = mesh.shape_gradients(local);
            let mut g = [0.0; 2];
            for a in 0..4 {
                g[0] += grads[a][0] * u.values()[nodes[a]];
                g[1] += grads[a][1] * u.values()[nodes[a]];
            }
            data.push(g);
        }
    }
    GaussVecField { mesh, data }
}

/// Recovered nodal gradient: each node averages the mean Gauss gradient of
/// its adjacent elements (second-order accurate on uniform meshes).
pub fn nodal_gradient(u: &GridFunction) -> [GridFunction; 2] {
    let mesh = u.mesh().clone();
    let n = mesh.n_nodes();
    let mut acc = vec![[0.0f64; 2]; n];
    let mut count = vec![0u32; n];
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        // mean of the four Gauss gradients = gradient at the element center
        let grads = mesh.shape_gradients([0.5, 0.5]);
        let mut g = [0.0; 2];
        for a in 0..4 {
            g[0] += grads[a][0] * u.values()[nodes[a]];
            g[1] += grads[a][1] * u.values()[nodes[a]];
        }
        for &node in &nodes {
            acc[node][0] += g[0];
            acc[node][1] += g[1];
            count[node] += 1;
        }
    }
    let dx = (0..n).map(|i| acc[i][0] / count[i] as f64).collect();
    let dy = (0..n).map(|i| acc[i][1] / count[i] as f64).collect();
    [
        GridFunction { mesh: mesh.clone(), values: dx },
        GridFunction { mesh, values: dy },
    ]
}
