//! Discrete unfolding, per-cell averaging, scale splitting through the tent
//! kernel, the first-order corrector expansion, and the face-periodicity
//! defect diagnostic.
//!
//! Everything here assumes lattice-aligned meshes (the element size divides
//! the cell size), which turns the unfolding operator into a pure
//! reindexing of nodal values: the operator identities then hold at machine
//! precision instead of up to interpolation error.

use crate::algebra::{KahanSum, Vec2};
use crate::cell::CellFunction;
use crate::error::{Error, Result};
use crate::geometry::{classify_cells, LatticeMap};
use crate::mesh_fem::{
    gradient_at_gauss, nodal_gradient, GaussVecField, GridFunction, Mesh, GAUSS_LOCAL,
};

/// One-dimensional tent: 1 - |t| on [-1, 1], zero outside.
pub fn tent_kernel_1d(t: f64) -> f64 {
    let a = t.abs();
    if a >= 1.0 {
        0.0
    } else {
        1.0 - a
    }
}

/// The multilinear tent kernel H(z) = (1 - |z1|)(1 - |z2|) on [-1,1]^2.
pub fn tent_kernel(z: Vec2) -> f64 {
    tent_kernel_1d(z[0]) * tent_kernel_1d(z[1])
}

/// Defect |sum_xi H(z - xi) - 1| of the kernel's partition of unity at `z`.
pub fn tent_partition_defect(z: Vec2) -> f64 {
    let mut sum = 0.0;
    let base = [z[0].floor() as i64, z[1].floor() as i64];
    for dj in -1..=1 {
        for di in -1..=1 {
            let xi = [(base[0] + di) as f64, (base[1] + dj) as f64];
            sum += tent_kernel([z[0] - xi[0], z[1] - xi[1]]);
        }
    }
    (sum - 1.0).abs()
}

/// Sample counts per axis of one unfolded cell block.
#[derive(Debug, Clone, Copy)]
struct CellSampling {
    /// Elements of the domain mesh per cell and axis.
    per_cell: [usize; 2],
}

fn check_alignment(mesh: &Mesh, lattice: &LatticeMap) -> Result<CellSampling> {
    if mesh.periodic() {
        return Err(Error::Alignment("unfolding expects a domain mesh".into()));
    }
    if mesh.domain() != lattice.domain() {
        return Err(Error::Alignment(
            "mesh and lattice describe different domains".into(),
        ));
    }
    let h = mesh.spacing();
    let eps = lattice.eps();
    let mut per_cell = [0usize; 2];
    for a in 0..2 {
        let ratio = eps / h[a];
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio {
            return Err(Error::Alignment(format!(
                "cell size {eps} is not an integer multiple of the element size {}",
                h[a]
            )));
        }
        per_cell[a] = m as usize;
    }
    Ok(CellSampling { per_cell })
}

/// The unfolded image of a nodal field: for every interior cell, the block
/// of nodal values read in cell coordinates. Blocks over the remainder
/// region are identically zero and are not stored.
#[derive(Debug, Clone)]
pub struct UnfoldedField {
    lattice: LatticeMap,
    per_cell: [usize; 2],
    /// blocks[cell][j2 * (m1+1) + j1], cell in lattice flat order.
    blocks: Vec<Vec<f64>>,
}

/// Unfold a nodal field over the lattice (pure reindexing).
pub fn unfold(phi: &GridFunction, lattice: &LatticeMap) -> Result<UnfoldedField> {
    let mesh = phi.mesh();
    let sampling = check_alignment(mesh, lattice)?;
    let [m1, m2] = sampling.per_cell;
    let mut blocks = Vec::with_capacity(lattice.n_interior());
    for xi in lattice.interior_cells() {
        let base = [xi[0] as usize * m1, xi[1] as usize * m2];
        let mut block = Vec::with_capacity((m1 + 1) * (m2 + 1));
        for j2 in 0..=m2 {
            for j1 in 0..=m1 {
                block.push(phi.values()[mesh.node_id(base[0] + j1, base[1] + j2)]);
            }
        }
        blocks.push(block);
    }
    Ok(UnfoldedField {
        lattice: lattice.clone(),
        per_cell: sampling.per_cell,
        blocks,
    })
}

/// Trapezoid integral of one block over the unit cell.
fn block_trapezoid(block: &[f64], per_cell: [usize; 2], f: impl Fn(f64) -> f64) -> f64 {
    let [m1, m2] = per_cell;
    let w = 0.25 / (m1 as f64 * m2 as f64);
    let mut acc = KahanSum::new();
    let stride = m1 + 1;
    for e2 in 0..m2 {
        for e1 in 0..m1 {
            let c = [
                block[e2 * stride + e1],
                block[e2 * stride + e1 + 1],
                block[(e2 + 1) * stride + e1 + 1],
                block[(e2 + 1) * stride + e1],
            ];
            for v in c {
                acc.add(w * f(v));
            }
        }
    }
    acc.value()
}

impl UnfoldedField {
    pub fn lattice(&self) -> &LatticeMap {
        &self.lattice
    }

    pub fn samples_per_axis(&self) -> [usize; 2] {
        [self.per_cell[0] + 1, self.per_cell[1] + 1]
    }

    pub fn block(&self, xi: [i64; 2]) -> &[f64] {
        &self.blocks[self.lattice.flat_index(xi)]
    }

    /// Discrete integral over Omega x Y (trapezoid in y, cells weighted by
    /// their measure; the remainder contributes zero).
    pub fn integral(&self) -> f64 {
        let cell_measure = self.lattice.eps() * self.lattice.eps();
        let mut acc = KahanSum::new();
        for b in &self.blocks {
            acc.add(cell_measure * block_trapezoid(b, self.per_cell, |v| v));
        }
        acc.value()
    }

    /// Discrete L2 norm over the covered region times Y.
    pub fn l2(&self) -> f64 {
        let cell_measure = self.lattice.eps() * self.lattice.eps();
        let mut acc = KahanSum::new();
        for b in &self.blocks {
            acc.add(cell_measure * block_trapezoid(b, self.per_cell, |v| v * v));
        }
        acc.value().max(0.0).sqrt()
    }
}

/// Trapezoid L2 norm of a nodal field over the covered region, evaluated
/// element by element (the independent side of the unfolding isometry).
pub fn covered_l2(phi: &GridFunction, lattice: &LatticeMap) -> Result<f64> {
    let mesh = phi.mesh();
    let sampling = check_alignment(mesh, lattice)?;
    let [mc1, mc2] = sampling.per_cell;
    let w = mesh.gauss_weight();
    let mut acc = KahanSum::new();
    for e in 0..mesh.n_elements() {
        let (e1, e2) = mesh.element_coords(e);
        let xi = [(e1 / mc1) as i64, (e2 / mc2) as i64];
        if !lattice.is_interior(xi) {
            continue;
        }
        for n in mesh.element_nodes(e) {
            let v = phi.values()[n];
            acc.add(w * v * v);
        }
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// Per-cell constants (the local average of a field over each interior cell).
#[derive(Debug, Clone)]
pub struct CellAverages {
    lattice: LatticeMap,
    values: Vec<f64>,
}

impl CellAverages {
    pub fn lattice(&self) -> &LatticeMap {
        &self.lattice
    }

    pub fn value(&self, xi: [i64; 2]) -> f64 {
        self.values[self.lattice.flat_index(xi)]
    }

    /// Piecewise-constant evaluation; zero over the remainder region.
    pub fn eval(&self, x: Vec2) -> f64 {
        let xi = self.lattice.cell_of(x);
        if self.lattice.is_interior(xi) {
            self.value(xi)
        } else {
            0.0
        }
    }
}

/// Local average of a nodal field: trapezoid mean of each unfolded block.
pub fn local_average(phi: &GridFunction, lattice: &LatticeMap) -> Result<CellAverages> {
    let unfolded = unfold(phi, lattice)?;
    let values = unfolded
        .blocks
        .iter()
        .map(|b| block_trapezoid(b, unfolded.per_cell, |v| v))
        .collect();
    Ok(CellAverages { lattice: lattice.clone(), values })
}

/// Local average of a pointwise-evaluable field by per-cell 2x2 Gauss
/// quadrature (exact for cellwise-affine data; samples stay strictly inside
/// each cell, so piecewise-constant inputs average to themselves).
pub fn local_average_analytic(f: &dyn Fn(Vec2) -> f64, lattice: &LatticeMap) -> CellAverages {
    let eps = lattice.eps();
    let values = lattice
        .interior_cells()
        .map(|xi| {
            let o = lattice.cell_origin(xi);
            GAUSS_LOCAL
                .iter()
                .map(|loc| 0.25 * f([o[0] + eps * loc[0], o[1] + eps * loc[1]]))
                .sum()
        })
        .collect();
    CellAverages { lattice: lattice.clone(), values }
}

/// Input of the scale-splitting operator.
pub enum FieldSource<'a> {
    /// Field evaluable anywhere (averages over outside cells evaluate it
    /// there directly).
    Analytic(&'a dyn Fn(Vec2) -> f64),
    /// Nodal field; cell averages outside the domain use mirror reflection
    /// of the nodal data across the rectangle faces.
    Grid(&'a GridFunction),
}

/// The scale-splitting interpolant: cell averages placed at the lattice
/// corners and interpolated by the tent kernel. The average table extends
/// one cell beyond the domain so every point of the closed domain has a
/// full stencil.
#[derive(Debug, Clone)]
pub struct ScaleSplit {
    eps: f64,
    /// Averages for xi in [0, n1) x [0, n2) of the extended index box.
    n1: usize,
    n2: usize,
    avg: Vec<f64>,
}

/// Build the scale-splitting interpolant of a field over the lattice.
pub fn scale_split(source: FieldSource<'_>, lattice: &LatticeMap) -> Result<ScaleSplit> {
    let eps = lattice.eps();
    // extended table: indices 0 ..= counts+1 per axis
    let n1 = lattice.counts()[0] + 2;
    let n2 = lattice.counts()[1] + 2;
    let mut avg = vec![0.0; n1 * n2];
    match source {
        FieldSource::Analytic(f) => {
            for j in 0..n2 {
                for i in 0..n1 {
                    let o = [eps * i as f64, eps * j as f64];
                    avg[j * n1 + i] = GAUSS_LOCAL
                        .iter()
                        .map(|loc| 0.25 * f([o[0] + eps * loc[0], o[1] + eps * loc[1]]))
                        .sum();
                }
            }
        }
        FieldSource::Grid(phi) => {
            let mesh = phi.mesh();
            let sampling = check_alignment(mesh, lattice)?;
            let [mc1, mc2] = sampling.per_cell;
            let (s1, s2) = mesh.subdivisions();
            // integer reflection keeps samples exactly on mesh nodes
            let reflect = |k: i64, n: i64| -> usize {
                let r = if k < 0 { -k } else if k > n { 2 * n - k } else { k };
                debug_assert!((0..=n).contains(&r), "reflection out of range: {k} vs {n}");
                r as usize
            };
            let w = 0.25 / (mc1 as f64 * mc2 as f64);
            for j in 0..n2 {
                for i in 0..n1 {
                    let base = [(i * mc1) as i64, (j * mc2) as i64];
                    let mut acc = KahanSum::new();
                    for e2 in 0..mc2 {
                        for e1 in 0..mc1 {
                            for (c1, c2) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                                let k1 = reflect(base[0] + (e1 + c1) as i64, s1 as i64);
                                let k2 = reflect(base[1] + (e2 + c2) as i64, s2 as i64);
                                acc.add(w * phi.values()[mesh.node_id(k1, k2)]);
                            }
                        }
                    }
                    avg[j * n1 + i] = acc.value();
                }
            }
        }
    }
    Ok(ScaleSplit { eps, n1, n2, avg })
}

impl ScaleSplit {
    /// Cell average used at lattice corner `xi` (for the direct-summation
    /// oracle); `None` outside the extended table.
    pub fn average_at(&self, xi: [i64; 2]) -> Option<f64> {
        if xi[0] < 0 || xi[1] < 0 || xi[0] >= self.n1 as i64 || xi[1] >= self.n2 as i64 {
            None
        } else {
            Some(self.avg[xi[1] as usize * self.n1 + xi[0] as usize])
        }
    }

    fn locate(&self, x: Vec2) -> ([usize; 2], Vec2) {
        let t1 = x[0] / self.eps;
        let t2 = x[1] / self.eps;
        let i = (t1.floor() as i64).clamp(0, self.n1 as i64 - 2) as usize;
        let j = (t2.floor() as i64).clamp(0, self.n2 as i64 - 2) as usize;
        ([i, j], [t1 - i as f64, t2 - j as f64])
    }

    /// Value of the multilinear interpolant at `x` in the closed domain.
    pub fn eval(&self, x: Vec2) -> f64 {
        let ([i, j], [s, t]) = self.locate(x);
        let a00 = self.avg[j * self.n1 + i];
        let a10 = self.avg[j * self.n1 + i + 1];
        let a01 = self.avg[(j + 1) * self.n1 + i];
        let a11 = self.avg[(j + 1) * self.n1 + i + 1];
        (1.0 - s) * (1.0 - t) * a00 + s * (1.0 - t) * a10 + (1.0 - s) * t * a01 + s * t * a11
    }

    /// Gradient of the interpolant (piecewise multilinear, evaluated away
    /// from lattice lines in practice).
    pub fn grad(&self, x: Vec2) -> Vec2 {
        let ([i, j], [s, t]) = self.locate(x);
        let a00 = self.avg[j * self.n1 + i];
        let a10 = self.avg[j * self.n1 + i + 1];
        let a01 = self.avg[(j + 1) * self.n1 + i];
        let a11 = self.avg[(j + 1) * self.n1 + i + 1];
        [
            ((1.0 - t) * (a10 - a00) + t * (a11 - a01)) / self.eps,
            ((1.0 - s) * (a01 - a00) + s * (a11 - a10)) / self.eps,
        ]
    }

    /// Sample the interpolant at the nodes of a mesh.
    pub fn to_grid(&self, mesh: &Mesh) -> Result<GridFunction> {
        GridFunction::from_fn(mesh.clone(), |p| self.eval(p))
    }
}

/// First-order corrector expansion of a macroscopic field: the nodal value
/// field  Phi + eps sum_i Q(dPhi/dx_i) chi_i(./eps)  and the Gauss-point
/// gradient comparison object  grad Phi + sum_i Q(dPhi/dx_i) grad_y
/// chi_i(./eps).
pub fn corrector_expansion(
    phi: &GridFunction,
    correctors: &[CellFunction; 2],
    eps: f64,
) -> Result<(GridFunction, GaussVecField)> {
    let mesh = phi.mesh().clone();
    if !correctors[0].mesh().same_layout(correctors[1].mesh()) {
        return Err(Error::Input("correctors live on different cell meshes".into()));
    }
    let lattice = classify_cells(mesh.domain(), eps)?;
    check_alignment(&mesh, &lattice)?;
    let grads = nodal_gradient(phi);
    let q = [
        scale_split(FieldSource::Grid(&grads[0]), &lattice)?,
        scale_split(FieldSource::Grid(&grads[1]), &lattice)?,
    ];

    let mut values = Vec::with_capacity(mesh.n_nodes());
    for n in 0..mesh.n_nodes() {
        let x = mesh.node_position(n);
        let y = [x[0] / eps, x[1] / eps];
        let mut v = phi.values()[n];
        for i in 0..2 {
            v += eps * q[i].eval(x) * correctors[i].value_at(y);
        }
        values.push(v);
    }
    let value_field = GridFunction::from_values(mesh.clone(), values)?;

    let grad_phi = gradient_at_gauss(phi);
    let mut data = Vec::with_capacity(4 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        for g in 0..4 {
            let x = mesh.gauss_position(e, g);
            let y = [x[0] / eps, x[1] / eps];
            let mut v = grad_phi.at(e, g);
            for i in 0..2 {
                let qv = q[i].eval(x);
                let cg = correctors[i].grad_at(y);
                v[0] += qv * cg[0];
                v[1] += qv * cg[1];
            }
            data.push(v);
        }
    }
    let grad_field = GaussVecField::new(mesh, data)?;
    Ok((value_field, grad_field))
}

/// L2 norm, per axis, of the jump phi(eps([x/eps] + y' + e_i)) -
/// phi(eps([x/eps] + y')) over face samples y' and cells whose e_i-neighbor
/// is also interior. Measures how far the field is from eps-periodicity.
pub fn periodicity_defect(phi: &GridFunction, lattice: &LatticeMap) -> Result<[f64; 2]> {
    let mesh = phi.mesh();
    let sampling = check_alignment(mesh, lattice)?;
    let [mc1, mc2] = sampling.per_cell;
    let cell_measure = lattice.eps() * lattice.eps();
    let mut out = [0.0; 2];
    for axis in 0..2 {
        let mut acc = KahanSum::new();
        for xi in lattice.interior_cells() {
            let neighbor = if axis == 0 { [xi[0] + 1, xi[1]] } else { [xi[0], xi[1] + 1] };
            if !lattice.is_interior(neighbor) {
                continue;
            }
            let base = [xi[0] as usize * mc1, xi[1] as usize * mc2];
            // 1d trapezoid over the transverse face coordinate
            let m_face = if axis == 0 { mc2 } else { mc1 };
            for k in 0..=m_face {
                let (near, far) = if axis == 0 {
                    (
                        mesh.node_id(base[0], base[1] + k),
                        mesh.node_id(base[0] + mc1, base[1] + k),
                    )
                } else {
                    (
                        mesh.node_id(base[0] + k, base[1]),
                        mesh.node_id(base[0] + k, base[1] + mc2),
                    )
                };
                let jump = phi.values()[far] - phi.values()[near];
                let w = if k == 0 || k == m_face { 0.5 } else { 1.0 } / m_face as f64;
                acc.add(cell_measure * w * jump * jump);
            }
        }
        out[axis] = acc.value().max(0.0).sqrt();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{solve_corrector, CoefficientField};
    use crate::geometry::DomainSpec;
    use crate::mesh_fem::build_mesh;
    use crate::norms::{weighted_norm, NormKind};
    use crate::rng::SplitMix64;
    use std::f64::consts::PI;

    fn aligned_setup(inv_eps: usize, m: usize) -> (Mesh, LatticeMap) {
        let domain = DomainSpec::unit_square();
        let mesh = build_mesh(&domain, (inv_eps * m, inv_eps * m), false).unwrap();
        let lattice = classify_cells(&domain, 1.0 / inv_eps as f64).unwrap();
        (mesh, lattice)
    }

    #[test]
    fn tent_kernel_partition_of_unity() {
        let mut rng = SplitMix64::new(2024);
        for _ in 0..1000 {
            let z = [rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)];
            assert!(tent_partition_defect(z) <= 1e-12, "defect at {z:?}");
        }
    }

    #[test]
    fn unfold_of_constant_and_coordinate() {
        let (mesh, lattice) = aligned_setup(4, 4);
        let one = GridFunction::from_fn(mesh.clone(), |_| 1.0).unwrap();
        let unf = unfold(&one, &lattice).unwrap();
        for xi in lattice.interior_cells() {
            assert!(unf.block(xi).iter().all(|&v| v == 1.0));
        }

        // phi = x1 on cell (0,0) reads eps * y1 at the sample nodes
        let x1 = GridFunction::from_fn(mesh, |p| p[0]).unwrap();
        let unf = unfold(&x1, &lattice).unwrap();
        let block = unf.block([0, 0]);
        let eps = lattice.eps();
        for j2 in 0..=4usize {
            for j1 in 0..=4usize {
                let expect = eps * j1 as f64 / 4.0;
                assert!((block[j2 * 5 + j1] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unfold_rejects_misaligned_mesh() {
        let domain = DomainSpec::unit_square();
        let mesh = build_mesh(&domain, (10, 10), false).unwrap();
        let lattice = classify_cells(&domain, 0.25).unwrap();
        assert!(unfold(&GridFunction::zeros(mesh), &lattice).is_err());
    }

    #[test]
    fn integration_formula_on_exact_cover() {
        // with 1/eps integer the discrete integral of phi equals the
        // discrete integral of its unfolding, for random nodal fields
        let (mesh, lattice) = aligned_setup(8, 8);
        let mut rng = SplitMix64::new(4);
        for _ in 0..10 {
            let phi = GridFunction::from_values(
                mesh.clone(),
                (0..mesh.n_nodes()).map(|_| rng.uniform(-2.0, 2.0)).collect(),
            )
            .unwrap();
            let lhs = phi.integral_trapezoid();
            let rhs = unfold(&phi, &lattice).unwrap().integral();
            assert!((lhs - rhs).abs() <= 1e-12, "Def1 gap {}", lhs - rhs);
        }
    }

    #[test]
    fn unfolding_isometry_on_covered_region() {
        let (mesh, lattice) = aligned_setup(4, 8);
        let mut rng = SplitMix64::new(6);
        let phi = GridFunction::from_values(
            mesh.clone(),
            (0..mesh.n_nodes()).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap();
        let a = unfold(&phi, &lattice).unwrap().l2();
        let b = covered_l2(&phi, &lattice).unwrap();
        assert!((a - b).abs() <= 1e-13, "isometry gap {}", a - b);
    }

    #[test]
    fn local_average_examples() {
        let (mesh, lattice) = aligned_setup(4, 4);
        let c = GridFunction::from_fn(mesh.clone(), |_| 7.5).unwrap();
        let avg = local_average(&c, &lattice).unwrap();
        for xi in lattice.interior_cells() {
            assert_eq!(avg.value(xi), 7.5);
        }

        // mean of an affine over a cell is its midpoint value
        let x1 = GridFunction::from_fn(mesh, |p| p[0]).unwrap();
        let avg = local_average(&x1, &lattice).unwrap();
        let eps = lattice.eps();
        for xi in lattice.interior_cells() {
            let expect = eps * xi[0] as f64 + 0.5 * eps;
            assert!((avg.value(xi) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn local_average_idempotent() {
        let (mesh, lattice) = aligned_setup(4, 4);
        let mut rng = SplitMix64::new(8);
        let phi = GridFunction::from_values(
            mesh.clone(),
            (0..mesh.n_nodes()).map(|_| rng.uniform(0.0, 1.0)).collect(),
        )
        .unwrap();
        let avg = local_average(&phi, &lattice).unwrap();
        let again = local_average_analytic(&|x| avg.eval(x), &lattice);
        for xi in lattice.interior_cells() {
            assert_eq!(avg.value(xi), again.value(xi));
        }
    }

    #[test]
    fn scale_split_reproduces_constants() {
        let (_, lattice) = aligned_setup(8, 4);
        let q = scale_split(FieldSource::Analytic(&|_| 3.25), &lattice).unwrap();
        let mut rng = SplitMix64::new(10);
        for _ in 0..200 {
            let x = [rng.next_f64(), rng.next_f64()];
            assert!((q.eval(x) - 3.25).abs() <= 1e-13);
        }
    }

    #[test]
    fn scale_split_shifts_affine() {
        // Q(x1) = x1 + eps/2 everywhere, including at domain boundary nodes
        let (mesh, lattice) = aligned_setup(8, 4);
        let eps = lattice.eps();
        let q = scale_split(FieldSource::Analytic(&|p| p[0]), &lattice).unwrap();
        for n in 0..mesh.n_nodes() {
            let x = mesh.node_position(n);
            assert!(
                (q.eval(x) - (x[0] + 0.5 * eps)).abs() <= 1e-13,
                "node at {x:?}"
            );
        }
    }

    #[test]
    fn scale_split_matches_direct_kernel_sum() {
        let (mesh, lattice) = aligned_setup(4, 8);
        let phi = GridFunction::from_fn(mesh, |p| (PI * p[0]).sin() * (2.0 * PI * p[1]).cos()).unwrap();
        let q = scale_split(FieldSource::Grid(&phi), &lattice).unwrap();
        let eps = lattice.eps();
        let mut rng = SplitMix64::new(12);
        for _ in 0..100 {
            let x = [rng.next_f64(), rng.next_f64()];
            // direct summation over the active lattice corners
            let base = [(x[0] / eps).floor() as i64, (x[1] / eps).floor() as i64];
            let mut direct = 0.0;
            for dj in -1..=2 {
                for di in -1..=2 {
                    let xi = [base[0] + di, base[1] + dj];
                    if let Some(m) = q.average_at(xi) {
                        direct += m
                            * tent_kernel([
                                x[0] / eps - xi[0] as f64,
                                x[1] / eps - xi[1] as f64,
                            ]);
                    }
                }
            }
            assert!((q.eval(x) - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn expansion_with_trivial_correctors_returns_macroscopic_field() {
        let (mesh, _) = aligned_setup(4, 8);
        let cell = build_mesh(&DomainSpec::unit_square(), (16, 16), true).unwrap();
        let a = CoefficientField::identity();
        let chi = [
            solve_corrector(&a, 0, &cell).unwrap(),
            solve_corrector(&a, 1, &cell).unwrap(),
        ];
        let phi = GridFunction::from_fn(mesh, |p| (PI * p[0]).sin() * p[1]).unwrap();
        let (value, grad) = corrector_expansion(&phi, &chi, 0.25).unwrap();
        for (a, b) in value.values().iter().zip(phi.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let plain = gradient_at_gauss(&phi);
        for e in 0..phi.mesh().n_elements() {
            for g in 0..4 {
                let d0 = grad.at(e, g)[0] - plain.at(e, g)[0];
                let d1 = grad.at(e, g)[1] - plain.at(e, g)[1];
                assert!(d0.abs() <= 1e-12 && d1.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn expansion_of_constant_is_constant() {
        let (mesh, _) = aligned_setup(4, 4);
        let cell = build_mesh(&DomainSpec::unit_square(), (32, 32), true).unwrap();
        let a = CoefficientField::layered();
        let chi = [
            solve_corrector(&a, 0, &cell).unwrap(),
            solve_corrector(&a, 1, &cell).unwrap(),
        ];
        let phi = GridFunction::from_fn(mesh, |_| 4.0).unwrap();
        let (value, _) = corrector_expansion(&phi, &chi, 0.25).unwrap();
        assert!(value.values().iter().all(|v| (v - 4.0).abs() <= 1e-12));
    }

    #[test]
    fn expansion_gradient_matches_direct_evaluation_for_affine_macro() {
        // layered coefficient, Phi = x1: Q(dPhi/dx1) = 1 so the gradient
        // field is e1 + grad_y chi_1(x / eps) pointwise
        let (mesh, _) = aligned_setup(8, 8);
        let cell = build_mesh(&DomainSpec::unit_square(), (64, 64), true).unwrap();
        let a = CoefficientField::layered();
        let chi = [
            solve_corrector(&a, 0, &cell).unwrap(),
            solve_corrector(&a, 1, &cell).unwrap(),
        ];
        let eps = 0.125;
        let phi = GridFunction::from_fn(mesh.clone(), |p| p[0]).unwrap();
        let (_, grad) = corrector_expansion(&phi, &chi, eps).unwrap();
        let mut rng = SplitMix64::new(14);
        for _ in 0..100 {
            let e = (rng.next_f64() * mesh.n_elements() as f64) as usize;
            let g = (rng.next_f64() * 4.0) as usize;
            let x = mesh.gauss_position(e, g);
            let cg = chi[0].grad_at([x[0] / eps, x[1] / eps]);
            let expect = [1.0 + cg[0], cg[1]];
            let got = grad.at(e, g);
            assert!(
                (got[0] - expect[0]).abs() <= 1e-10 && (got[1] - expect[1]).abs() <= 1e-10,
                "at {x:?}: {got:?} vs {expect:?}"
            );
        }
    }

    #[test]
    fn periodicity_defect_of_periodic_field_vanishes() {
        let (mesh, lattice) = aligned_setup(8, 8);
        let eps = lattice.eps();
        let phi = GridFunction::from_fn(mesh, |p| (2.0 * PI * p[0] / eps).sin()).unwrap();
        let defect = periodicity_defect(&phi, &lattice).unwrap();
        assert!(defect[0] <= 1e-12, "axis-1 defect {:.3e}", defect[0]);
    }

    #[test]
    fn periodicity_defect_of_affine_is_eps_slope() {
        let (mesh, lattice) = aligned_setup(4, 4);
        let b = [1.75, -0.5];
        let phi = GridFunction::from_fn(mesh, |p| b[0] * p[0] + b[1] * p[1]).unwrap();
        let defect = periodicity_defect(&phi, &lattice).unwrap();
        let eps = lattice.eps();
        // pairs per axis: 3 x 4 cells, each contributing measure eps^2
        let measure = 12.0 * eps * eps;
        for axis in 0..2 {
            let expect = eps * b[axis].abs() * measure.sqrt();
            assert!(
                (defect[axis] - expect).abs() <= 1e-12,
                "axis {axis}: {} vs {expect}",
                defect[axis]
            );
        }
    }

    #[test]
    fn periodicity_defect_scales_linearly_in_eps() {
        let mut ratios = Vec::new();
        for inv_eps in [8usize, 16, 32] {
            let (mesh, lattice) = aligned_setup(inv_eps, 16);
            let phi =
                GridFunction::from_fn(mesh, |p| (PI * p[0]).sin() * (PI * p[1]).sin()).unwrap();
            let defect = periodicity_defect(&phi, &lattice).unwrap();
            let total = (defect[0] * defect[0] + defect[1] * defect[1]).sqrt();
            ratios.push(total * inv_eps as f64);
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi / lo <= 1.3, "defect/eps ratios {ratios:?}");
    }

    #[test]
    fn unfold_minus_average_controlled_by_gradient() {
        // Poincare-Wirtinger echo: || T(phi) - M(phi) || <= eps C || grad phi ||
        let mut ratios = Vec::new();
        for inv_eps in [4usize, 8, 16] {
            let (mesh, lattice) = aligned_setup(inv_eps, 8);
            let phi =
                GridFunction::from_fn(mesh, |p| (PI * p[0]).sin() * (2.0 * PI * p[1]).cos())
                    .unwrap();
            let unfolded = unfold(&phi, &lattice).unwrap();
            let avg = local_average(&phi, &lattice).unwrap();
            let cell_measure = lattice.eps() * lattice.eps();
            let mut acc = KahanSum::new();
            for xi in lattice.interior_cells() {
                let c = avg.value(xi);
                let block = unfolded.block(xi);
                acc.add(
                    cell_measure
                        * block_trapezoid(block, unfolded.per_cell, |v| (v - c) * (v - c)),
                );
            }
            let diff = acc.value().sqrt();
            let grad = weighted_norm(&phi, 0, NormKind::Gradient).unwrap();
            ratios.push(diff / (lattice.eps() * grad));
        }
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi < 1.0, "PW constant too large: {ratios:?}");
        assert!(hi / lo < 1.5, "PW ratio unstable: {ratios:?}");
    }

    #[test]
    fn scale_split_gradient_stability_on_white_noise() {
        // || grad Q(phi) || <= C / eps || phi ||, monitored on noise fields
        let mut ratios = Vec::new();
        for inv_eps in [4usize, 8, 16] {
            let (mesh, lattice) = aligned_setup(inv_eps, 8);
            let mut rng = SplitMix64::new(16);
            let phi = GridFunction::from_values(
                mesh.clone(),
                (0..mesh.n_nodes()).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            )
            .unwrap();
            let q = scale_split(FieldSource::Grid(&phi), &lattice).unwrap();
            let w = mesh.gauss_weight();
            let mut acc = 0.0;
            for e in 0..mesh.n_elements() {
                for g in 0..4 {
                    let gr = q.grad(mesh.gauss_position(e, g));
                    acc += w * (gr[0] * gr[0] + gr[1] * gr[1]);
                }
            }
            let grad_q = acc.sqrt();
            let l2 = weighted_norm(&phi, 0, NormKind::Value).unwrap();
            ratios.push(grad_q * lattice.eps() / l2);
        }
        assert!(ratios.iter().all(|r| *r < 10.0), "QL2 ratios {ratios:?}");
    }

    #[test]
    fn scale_split_approximation_order() {
        // || phi - Q(phi) || <= C eps || grad phi || for smooth phi
        let f = |p: Vec2| (PI * p[0]).sin() * (PI * p[1]).sin();
        let mut ratios = Vec::new();
        for inv_eps in [4usize, 8, 16] {
            let (mesh, lattice) = aligned_setup(inv_eps, 8);
            let phi = GridFunction::from_fn(mesh.clone(), f).unwrap();
            let q = scale_split(FieldSource::Analytic(&f), &lattice).unwrap();
            let qgrid = q.to_grid(&mesh).unwrap();
            let err = weighted_norm(&phi.sub(&qgrid).unwrap(), 0, NormKind::Value).unwrap();
            let grad = weighted_norm(&phi, 0, NormKind::Gradient).unwrap();
            ratios.push(err / (lattice.eps() * grad));
        }
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi < 2.0 && hi / lo < 2.0, "approximation ratios {ratios:?}");
    }

    #[test]
    fn rho_weighted_scale_split_stability() {
        // || rho (Q(phi) - phi) || <= C eps || phi ||_rho for smooth phi
        let f = |p: Vec2| (2.0 + p[0]).ln() * (1.0 + p[1] * p[1]);
        let mut ratios = Vec::new();
        for inv_eps in [4usize, 8, 16] {
            let (mesh, lattice) = aligned_setup(inv_eps, 8);
            let phi = GridFunction::from_fn(mesh.clone(), f).unwrap();
            let q = scale_split(FieldSource::Analytic(&f), &lattice).unwrap();
            let qgrid = q.to_grid(&mesh).unwrap();
            let diff = qgrid.sub(&phi).unwrap();
            let num = weighted_norm(&diff, 1, NormKind::Value).unwrap();
            let den = lattice.eps() * crate::norms::rho_norm(&phi).unwrap();
            ratios.push(num / den);
        }
        assert!(ratios.iter().all(|r| *r < 2.0), "RAP ratios {ratios:?}");
    }
}
