//! Sparse assembly of bilinear-element stiffness, mass and load, and
//! Dirichlet elimination.

use crate::algebra::{Mat2, Vec2};
use crate::error::{Error, Result};
use crate::mesh_fem::mesh::{Mesh, GAUSS_LOCAL};

/// Probe directions for the pointwise ellipticity certificate.
const ELLIPTICITY_PROBES: [Vec2; 4] = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]];

/// Compressed-row sparse matrix with a fixed structured-grid pattern.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Empty matrix with the node-stencil sparsity pattern of the mesh.
    fn with_mesh_pattern(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for node in 0..n {
            for c in mesh.node_stencil(node) {
                col_idx.push(c as u32);
            }
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn entry_position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi]
            .binary_search(&(col as u32))
            .ok()
            .map(|k| lo + k)
    }

    pub fn add_to(&mut self, row: usize, col: usize, v: f64) {
        let pos = self
            .entry_position(row, col)
            .expect("entry outside the mesh sparsity pattern");
        self.values[pos] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entry_position(row, col)
            .map(|p| self.values[p])
            .unwrap_or(0.0)
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for row in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[row] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.values[self.row_ptr[row]..self.row_ptr[row + 1]]
            .iter()
            .sum()
    }

    /// Largest asymmetry |A_ij - A_ji| over the pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.col_idx[k] as usize;
                if col > row {
                    worst = worst.max((self.values[k] - self.get(col, row)).abs());
                }
            }
        }
        worst
    }

    fn zero_row_except_diag(&mut self, row: usize) {
        for k in self.row_ptr[row]..self.row_ptr[row + 1] {
            self.values[k] = if self.col_idx[k] as usize == row { 1.0 } else { 0.0 };
        }
    }
}

/// Constraint handling attached to an assembled system.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// No constraint applied yet.
    None,
    /// Dirichlet values already eliminated symmetrically.
    Dirichlet,
    /// Singular periodic system: solve in the complement of constants.
    ZeroMean,
}

/// Sparse system K u = b with its mesh and constraint bookkeeping.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraint: Constraint,
    mesh: Mesh,
    symmetric_hint: bool,
}

impl LinearSystem {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn symmetric_hint(&self) -> bool {
        self.symmetric_hint
    }

    pub fn set_rhs(&mut self, rhs: Vec<f64>) -> Result<()> {
        if rhs.len() != self.matrix.n() {
            return Err(Error::Input("rhs length does not match system size".into()));
        }
        self.rhs = rhs;
        Ok(())
    }

    /// Mark the system as singular-with-constant-kernel; the solver then
    /// projects the right-hand side and the returned vector onto zero mean.
    pub fn with_zero_mean(mut self) -> Self {
        self.constraint = Constraint::ZeroMean;
        self
    }
}

/// Assemble the stiffness matrix of the form  integral (A grad u) . grad v
/// with the coefficient sampled at the 2x2 Gauss points.
///
/// The declared ellipticity constant is certified pointwise at every Gauss
/// point over a fixed probe set; a failure aborts the assembly.
pub fn assemble_stiffness(
    mesh: &Mesh,
    coeff: &dyn Fn(Vec2) -> Mat2,
    ellipticity: f64,
) -> Result<LinearSystem> {
    if !(ellipticity > 0.0) {
        return Err(Error::Coefficient(format!(
            "ellipticity constant must be positive, got {ellipticity}"
        )));
    }
    let mut matrix = CsrMatrix::with_mesh_pattern(mesh);
    let w = mesh.gauss_weight();
    let mut asym = 0.0f64;
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        for (g, local) in GAUSS_LOCAL.iter().enumerate() {
            let x = mesh.gauss_position(e, g);
            let a = coeff(x);
            for probe in ELLIPTICITY_PROBES {
                let q = a.quad_form(probe);
                let n2 = probe[0] * probe[0] + probe[1] * probe[1];
                if q < ellipticity * n2 - 1e-12 * (1.0 + ellipticity) * n2 {
                    return Err(Error::Coefficient(format!(
                        "ellipticity violated at gauss point ({:.6}, {:.6}): \
                         A xi.xi = {q:.6e} < c |xi|^2 = {:.6e}",
                        x[0],
                        x[1],
                        ellipticity * n2
                    )));
                }
            }
            asym = asym.max((a.0[0][1] - a.0[1][0]).abs());
            let grads = mesh.shape_gradients(*local);
            for b in 0..4 {
                let flux = a.mul_vec(grads[b]);
                for r in 0..4 {
                    let v = w * (flux[0] * grads[r][0] + flux[1] * grads[r][1]);
                    matrix.add_to(nodes[r], nodes[b], v);
                }
            }
        }
    }
    let n = matrix.n();
    Ok(LinearSystem {
        matrix,
        rhs: vec![0.0; n],
        constraint: Constraint::None,
        mesh: mesh.clone(),
        symmetric_hint: asym <= 1e-14,
    })
}

/// Consistent mass matrix (2x2 Gauss is exact for bilinear products).
pub fn assemble_mass(mesh: &Mesh) -> LinearSystem {
    let mut matrix = CsrMatrix::with_mesh_pattern(mesh);
    let w = mesh.gauss_weight();
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        for local in GAUSS_LOCAL {
            let shapes = Mesh::shape_values(local);
            for b in 0..4 {
                for r in 0..4 {
                    matrix.add_to(nodes[r], nodes[b], w * shapes[b] * shapes[r]);
                }
            }
        }
    }
    let n = matrix.n();
    LinearSystem {
        matrix,
        rhs: vec![0.0; n],
        constraint: Constraint::None,
        mesh: mesh.clone(),
        symmetric_hint: true,
    }
}

/// Consistent load vector of a scalar source sampled at Gauss points.
pub fn assemble_load(mesh: &Mesh, f: &dyn Fn(Vec2) -> f64) -> Vec<f64> {
    let mut rhs = vec![0.0; mesh.n_nodes()];
    let w = mesh.gauss_weight();
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        for (g, local) in GAUSS_LOCAL.iter().enumerate() {
            let fx = f(mesh.gauss_position(e, g));
            let shapes = Mesh::shape_values(*local);
            for r in 0..4 {
                rhs[nodes[r]] += w * fx * shapes[r];
            }
        }
    }
    rhs
}

/// Load vector of a gradient source:  b_r = - integral (F . grad phi_r),
/// used for the cell problems whose data is A(y) e_i.
pub fn assemble_gradient_load(mesh: &Mesh, flux: &dyn Fn(Vec2) -> Vec2) -> Vec<f64> {
    let mut rhs = vec![0.0; mesh.n_nodes()];
    let w = mesh.gauss_weight();
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        for (g, local) in GAUSS_LOCAL.iter().enumerate() {
            let fx = flux(mesh.gauss_position(e, g));
            let grads = mesh.shape_gradients(*local);
            for r in 0..4 {
                rhs[nodes[r]] -= w * (fx[0] * grads[r][0] + fx[1] * grads[r][1]);
            }
        }
    }
    rhs
}

/// Eliminate Dirichlet values symmetrically: the boundary unknowns are
/// pinned, the right-hand side is corrected, and interior-interior couplings
/// are untouched.
///
/// `trace` must provide a value for every boundary node.
pub fn apply_dirichlet(system: &LinearSystem, trace: &[(usize, f64)]) -> Result<LinearSystem> {
    let mesh = system.mesh.clone();
    if mesh.periodic() {
        return Err(Error::Input("periodic meshes take no Dirichlet data".into()));
    }
    let n = system.matrix.n();
    let mut fixed = vec![false; n];
    let mut value = vec![0.0; n];
    for &(node, g) in trace {
        if node >= n {
            return Err(Error::Input(format!("trace node {node} out of range")));
        }
        fixed[node] = true;
        value[node] = g;
    }
    for b in mesh.boundary_node_ids() {
        if !fixed[b] {
            return Err(Error::Input(format!("boundary node {b} has no trace value")));
        }
    }

    let mut matrix = system.matrix.clone();
    let mut rhs = system.rhs.clone();
    for row in 0..n {
        if fixed[row] {
            continue;
        }
        for k in matrix.row_ptr[row]..matrix.row_ptr[row + 1] {
            let col = matrix.col_idx[k] as usize;
            if fixed[col] {
                rhs[row] -= matrix.values[k] * value[col];
                matrix.values[k] = 0.0;
            }
        }
    }
    for row in 0..n {
        if fixed[row] {
            matrix.zero_row_except_diag(row);
            rhs[row] = value[row];
        }
    }
    Ok(LinearSystem {
        matrix,
        rhs,
        constraint: Constraint::Dirichlet,
        mesh,
        symmetric_hint: system.symmetric_hint,
    })
}

/// Nodal trace of a boundary-data function, ready for [`apply_dirichlet`].
pub fn boundary_trace(mesh: &Mesh, g: &dyn Fn(Vec2) -> f64) -> Vec<(usize, f64)> {
    mesh.boundary_nodes()
        .iter()
        .map(|b| (b.node, g(b.position)))
        .collect()
}

/// L2 projection onto zero mean for right-hand sides of periodic systems.
pub fn project_zero_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}
