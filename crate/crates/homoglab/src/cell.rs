//! Periodic coefficients on the unit cell, corrector and adjoint-corrector
//! problems, the homogenized tensor, and the classical 1d closed form used
//! as an independent oracle.
//!
//! The corrector chi_i is the periodic zero-mean solution of
//!     integral_Y A(y) grad(chi_i + y_i) . grad psi = 0   for all periodic psi,
//! the adjoint corrector solves the same problem with the coefficient
//! transposed, and the homogenized tensor is
//!     A_ij = integral_Y (A (e_j + grad chi_j)) . (e_i + grad chi_i).

use std::fmt;
use std::path::Path;

use crate::algebra::{fract_unit, KahanSum, Mat2, Vec2};
use crate::error::{Error, Result};
use crate::mesh_fem::{
    assemble_gradient_load, assemble_stiffness, gradient_at_gauss, solve, GridFunction, Mesh,
    SolveInfo, SolverConfig, GAUSS_LOCAL,
};

/// Default cell-mesh resolution per axis.
pub const DEFAULT_CELL_GRID: usize = 128;

/// Cell problems are solved much tighter than the default FEM tolerance so
/// that tensor identities (transpose duality) survive at 1e-10.
const CELL_SOLVER_TOL: f64 = 1e-13;

/// Piecewise-constant matrix coefficient on an n_sub x n_sub raster of the
/// unit cell, row-major from the lower-left subsquare.
#[derive(Debug, Clone)]
pub struct Raster {
    n_sub: usize,
    mats: Vec<Mat2>,
}

impl Raster {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n_sub: usize = lines
            .next()
            .ok_or_else(|| Error::Input("empty raster file".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Input(format!("bad raster header: {e}")))?;
        if n_sub == 0 {
            return Err(Error::Input("raster needs at least one subsquare".into()));
        }
        let mut mats = Vec::with_capacity(n_sub * n_sub);
        for line in lines {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Input(format!("bad raster entry: {e}")))?;
            if vals.len() != 4 {
                return Err(Error::Input(format!(
                    "raster lines carry four entries (a11 a12 a21 a22), got {}",
                    vals.len()
                )));
            }
            mats.push(Mat2([[vals[0], vals[1]], [vals[2], vals[3]]]));
        }
        if mats.len() != n_sub * n_sub {
            return Err(Error::Input(format!(
                "expected {} raster lines, got {}",
                n_sub * n_sub,
                mats.len()
            )));
        }
        Ok(Self { n_sub, mats })
    }

    /// Subsquare index along one axis; points on raster edges take the
    /// lower-left subsquare.
    fn axis_index(&self, t: f64) -> usize {
        let k = (t * self.n_sub as f64).ceil() as i64 - 1;
        k.clamp(0, self.n_sub as i64 - 1) as usize
    }

    fn eval(&self, y: Vec2) -> Mat2 {
        let i = self.axis_index(y[0]);
        let j = self.axis_index(y[1]);
        self.mats[j * self.n_sub + i]
    }

    fn min_sym_eigenvalue(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| m.sym_min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    fn max_abs(&self) -> f64 {
        self.mats.iter().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    fn is_symmetric(&self) -> bool {
        self.mats
            .iter()
            .all(|m| (m.0[0][1] - m.0[1][0]).abs() <= 1e-14 * (1.0 + m.max_abs()))
    }
}

/// The built-in coefficient families plus user rasters.
#[derive(Debug, Clone)]
pub enum CoeffFamily {
    Identity,
    IsotropicSin,
    Layered,
    ConstantNonsymmetric,
    SkewPerturbed,
    Raster(Raster),
}

impl CoeffFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            CoeffFamily::Identity => "identity",
            CoeffFamily::IsotropicSin => "isotropic-sin",
            CoeffFamily::Layered => "layered",
            CoeffFamily::ConstantNonsymmetric => "constant-nonsymmetric",
            CoeffFamily::SkewPerturbed => "skew-perturbed",
            CoeffFamily::Raster(_) => "raster",
        }
    }
}

/// Periodic matrix coefficient A(y) on the unit cell with its certified
/// ellipticity constant.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    family: CoeffFamily,
    ellipticity: f64,
    linf_bound: f64,
    symmetric: bool,
    transposed: bool,
}

impl fmt::Display for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family.tag(), if self.transposed { " (transposed)" } else { "" })
    }
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

impl CoefficientField {
    pub fn identity() -> Self {
        Self {
            family: CoeffFamily::Identity,
            ellipticity: 1.0,
            linf_bound: 1.0,
            symmetric: true,
            transposed: false,
        }
    }

    /// a(y) I with a(y) = 2 + sin(2 pi y1) sin(2 pi y2), range [1, 3].
    pub fn isotropic_sin() -> Self {
        Self {
            family: CoeffFamily::IsotropicSin,
            ellipticity: 0.9,
            linf_bound: 3.0,
            symmetric: true,
            transposed: false,
        }
    }

    /// a(y1) I with a(y1) = 2 + cos(2 pi y1); homogenizes to diag(sqrt 3, 2).
    pub fn layered() -> Self {
        Self {
            family: CoeffFamily::Layered,
            ellipticity: 0.9,
            linf_bound: 3.0,
            symmetric: true,
            transposed: false,
        }
    }

    /// The constant matrix [[2, 0.5], [-0.5, 2]].
    pub fn constant_nonsymmetric() -> Self {
        Self {
            family: CoeffFamily::ConstantNonsymmetric,
            ellipticity: 1.5,
            linf_bound: 2.0,
            symmetric: false,
            transposed: false,
        }
    }

    /// 2 I + sin(2 pi y1) J with J the unit skew matrix; the skew part drops
    /// out of every quadratic form, so the ellipticity constant is 2.
    pub fn skew_perturbed() -> Self {
        Self {
            family: CoeffFamily::SkewPerturbed,
            ellipticity: 1.5,
            linf_bound: 3.0,
            symmetric: false,
            transposed: false,
        }
    }

    pub fn from_raster(raster: Raster) -> Result<Self> {
        let c = raster.min_sym_eigenvalue();
        if !(c > 0.0) {
            return Err(Error::Coefficient(format!(
                "raster is not elliptic: min symmetric eigenvalue {c:.3e}"
            )));
        }
        let linf = raster.max_abs();
        let symmetric = raster.is_symmetric();
        Ok(Self {
            family: CoeffFamily::Raster(raster),
            // keep a whisker below the exact minimum so the Gauss-point
            // certificate is not tripped by rounding
            ellipticity: c * (1.0 - 1e-12),
            linf_bound: linf,
            symmetric,
            transposed: false,
        })
    }

    pub fn from_raster_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_raster(Raster::parse(&text)?)
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "identity" => Ok(Self::identity()),
            "isotropic-sin" => Ok(Self::isotropic_sin()),
            "layered" => Ok(Self::layered()),
            "constant-nonsymmetric" => Ok(Self::constant_nonsymmetric()),
            "skew-perturbed" => Ok(Self::skew_perturbed()),
            other => Err(Error::Config(format!(
                "unknown coefficient family '{other}' \
                 (expected identity | isotropic-sin | layered | constant-nonsymmetric | \
                 skew-perturbed | raster)"
            ))),
        }
    }

    pub fn family_tag(&self) -> &'static str {
        self.family.tag()
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn linf_bound(&self) -> f64 {
        self.linf_bound
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// The coefficient with A(y) replaced by its transpose.
    pub fn transposed(&self) -> Self {
        let mut out = self.clone();
        out.transposed = !out.transposed;
        out
    }

    /// Evaluate A(y) for y in the closed unit cell.
    pub fn eval(&self, y: Vec2) -> Mat2 {
        let m = match &self.family {
            CoeffFamily::Identity => Mat2::IDENTITY,
            CoeffFamily::IsotropicSin => {
                Mat2::scaled_identity(2.0 + (TWO_PI * y[0]).sin() * (TWO_PI * y[1]).sin())
            }
            CoeffFamily::Layered => Mat2::scaled_identity(2.0 + (TWO_PI * y[0]).cos()),
            CoeffFamily::ConstantNonsymmetric => Mat2([[2.0, 0.5], [-0.5, 2.0]]),
            CoeffFamily::SkewPerturbed => {
                let b = (TWO_PI * y[0]).sin();
                Mat2([[2.0, b], [-b, 2.0]])
            }
            CoeffFamily::Raster(r) => r.eval(y),
        };
        if self.transposed {
            m.transpose()
        } else {
            m
        }
    }

    /// Evaluator of the oscillating coefficient A_eps(x) = A({x / eps}).
    pub fn oscillating(&self, eps: f64) -> Result<impl Fn(Vec2) -> Mat2 + '_> {
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
        }
        Ok(move |x: Vec2| self.eval([fract_unit(x[0] / eps), fract_unit(x[1] / eps)]))
    }
}

/// Zero-mean periodic cell solution (a corrector or adjoint corrector).
#[derive(Debug, Clone)]
pub struct CellFunction {
    values: GridFunction,
    pub solve_info: SolveInfo,
}

impl CellFunction {
    pub fn grid(&self) -> &GridFunction {
        &self.values
    }

    pub fn mesh(&self) -> &Mesh {
        self.values.mesh()
    }

    /// Periodic bilinear interpolation at any y (wraps around the cell).
    pub fn value_at(&self, y: Vec2) -> f64 {
        self.values.eval_periodic(y)
    }

    /// Gradient of the periodic interpolant at any y.
    pub fn grad_at(&self, y: Vec2) -> Vec2 {
        self.values.grad_periodic(y)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn cell_solver_config() -> SolverConfig {
    SolverConfig {
        tol: CELL_SOLVER_TOL,
        max_iterations: 200_000,
        ..Default::default()
    }
}

/// Solve the corrector problem for coordinate direction `axis` on a periodic
/// cell mesh.
pub fn solve_corrector(coeff: &CoefficientField, axis: usize, cell_mesh: &Mesh) -> Result<CellFunction> {
    if axis >= 2 {
        return Err(Error::Parameter(format!("axis must be 0 or 1, got {axis}")));
    }
    if !cell_mesh.periodic() {
        return Err(Error::Input("correctors live on a periodic cell mesh".into()));
    }
    let mut system = assemble_stiffness(cell_mesh, &|y| coeff.eval(y), coeff.ellipticity())?;
    let e_i: Vec2 = if axis == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
    system.rhs = assemble_gradient_load(cell_mesh, &|y| coeff.eval(y).mul_vec(e_i));
    let system = system.with_zero_mean();
    let (values, solve_info) = solve(&system, &cell_solver_config())?;
    debug_assert!(values.mean().abs() <= 1e-12);
    Ok(CellFunction { values, solve_info })
}

/// Adjoint corrector: the corrector of the transposed coefficient.
pub fn solve_adjoint_corrector(
    coeff: &CoefficientField,
    axis: usize,
    cell_mesh: &Mesh,
) -> Result<CellFunction> {
    solve_corrector(&coeff.transposed(), axis, cell_mesh)
}

/// The homogenized matrix.
#[derive(Debug, Clone, Copy)]
pub struct HomogenizedTensor(pub Mat2);

impl HomogenizedTensor {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.0 .0[i][j]
    }

    pub fn as_mat(&self) -> Mat2 {
        self.0
    }
}

/// Gauss quadrature of the tensor integrand from a coefficient and its two
/// correctors (solved on the same cell mesh).
pub fn homogenized_tensor(
    coeff: &CoefficientField,
    correctors: &[CellFunction; 2],
) -> Result<HomogenizedTensor> {
    let mesh = correctors[0].mesh().clone();
    if !mesh.same_layout(correctors[1].mesh()) {
        return Err(Error::Input("correctors live on different cell meshes".into()));
    }
    let grads = [
        gradient_at_gauss(correctors[0].grid()),
        gradient_at_gauss(correctors[1].grid()),
    ];
    let w = mesh.gauss_weight();
    let mut acc = [[KahanSum::new(); 2]; 2];
    for e in 0..mesh.n_elements() {
        for (g, _) in GAUSS_LOCAL.iter().enumerate() {
            let y = mesh.gauss_position(e, g);
            let a = coeff.eval(y);
            let dirs = [
                {
                    let gr = grads[0].at(e, g);
                    [1.0 + gr[0], gr[1]]
                },
                {
                    let gr = grads[1].at(e, g);
                    [gr[0], 1.0 + gr[1]]
                },
            ];
            for j in 0..2 {
                let flux = a.mul_vec(dirs[j]);
                for i in 0..2 {
                    acc[i][j].add(w * (flux[0] * dirs[i][0] + flux[1] * dirs[i][1]));
                }
            }
        }
    }
    let mat = Mat2([
        [acc[0][0].value(), acc[0][1].value()],
        [acc[1][0].value(), acc[1][1].value()],
    ]);
    // discrete ellipticity inheritance
    for probe in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]] {
        let n2 = probe[0] * probe[0] + probe[1] * probe[1];
        if mat.quad_form(probe) < coeff.ellipticity() * n2 * (1.0 - 1e-10) {
            return Err(Error::Coefficient(format!(
                "homogenized tensor lost ellipticity along ({}, {})",
                probe[0], probe[1]
            )));
        }
    }
    if coeff.is_symmetric() {
        let gap = (mat.0[0][1] - mat.0[1][0]).abs();
        if gap > 1e-10 {
            return Err(Error::Coefficient(format!(
                "homogenized tensor of a symmetric coefficient is asymmetric by {gap:.3e}"
            )));
        }
    }
    Ok(HomogenizedTensor(mat))
}

/// Convenience: solve both correctors and form the tensor.
pub fn homogenize(coeff: &CoefficientField, cell_mesh: &Mesh) -> Result<([CellFunction; 2], HomogenizedTensor)> {
    let chi = [
        solve_corrector(coeff, 0, cell_mesh)?,
        solve_corrector(coeff, 1, cell_mesh)?,
    ];
    let tensor = homogenized_tensor(coeff, &chi)?;
    Ok((chi, tensor))
}

/// Classical 1d homogenization closed form: the effective coefficient of a
/// scalar periodic a(t) is the harmonic mean, and chi'(t) = abar/a(t) - 1.
///
/// Returns the harmonic mean (by composite 5-point Gauss quadrature of 1/a)
/// and the profile chi' sampled at the midpoints (k + 1/2)/grid. Used only
/// as an independent oracle against the cell solver.
pub fn corrector_1d_closed_form(
    a: &dyn Fn(f64) -> f64,
    grid: usize,
) -> Result<(f64, Vec<f64>)> {
    if grid == 0 {
        return Err(Error::Parameter("grid must be positive".into()));
    }
    // Gauss-Legendre 5 nodes on [0,1]
    const NODES: [f64; 5] = [
        0.046_910_077_030_668_05,
        0.230_765_344_947_158_45,
        0.5,
        0.769_234_655_052_841_5,
        0.953_089_922_969_331_9,
    ];
    const WEIGHTS: [f64; 5] = [
        0.118_463_442_528_094_54,
        0.239_314_335_249_683_23,
        0.284_444_444_444_444_43,
        0.239_314_335_249_683_23,
        0.118_463_442_528_094_54,
    ];
    let panels = grid.max(512);
    let hp = 1.0 / panels as f64;
    let mut acc = KahanSum::new();
    for p in 0..panels {
        for (node, weight) in NODES.iter().zip(WEIGHTS) {
            let t = (p as f64 + node) * hp;
            let at = a(t);
            if !(at > 0.0) {
                return Err(Error::Coefficient(format!(
                    "1d profile must be positive, a({t}) = {at}"
                )));
            }
            acc.add(weight * hp / at);
        }
    }
    let harmonic_mean = 1.0 / acc.value();
    let chi_prime = (0..grid)
        .map(|k| {
            let t = (k as f64 + 0.5) / grid as f64;
            harmonic_mean / a(t) - 1.0
        })
        .collect();
    Ok((harmonic_mean, chi_prime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::mesh_fem::build_mesh;
    use crate::rng::SplitMix64;

    fn cell_mesh(n: usize) -> Mesh {
        build_mesh(&DomainSpec::unit_square(), (n, n), true).unwrap()
    }

    #[test]
    fn identity_corrector_vanishes() {
        let mesh = cell_mesh(32);
        let a = CoefficientField::identity();
        for axis in 0..2 {
            let chi = solve_corrector(&a, axis, &mesh).unwrap();
            assert!(chi.max_abs() <= 1e-12, "chi_{axis} = {:.3e}", chi.max_abs());
        }
    }

    #[test]
    fn constant_coefficient_corrector_vanishes() {
        let mesh = cell_mesh(16);
        let a = CoefficientField::constant_nonsymmetric();
        for axis in 0..2 {
            let chi = solve_corrector(&a, axis, &mesh).unwrap();
            assert!(chi.max_abs() <= 1e-12);
        }
        // and the tensor is the matrix itself, exactly a quadrature of a constant
        let (_, tensor) = homogenize(&a, &mesh).unwrap();
        let gap = tensor.as_mat().sub(&a.eval([0.3, 0.7])).max_abs();
        assert!(gap <= 1e-12, "constant tensor gap {gap:.3e}");
    }

    #[test]
    fn layered_corrector_matches_1d_closed_form() {
        let mesh = cell_mesh(128);
        let a = CoefficientField::layered();
        let profile = |t: f64| 2.0 + (TWO_PI * t).cos();
        let (abar, _) = corrector_1d_closed_form(&profile, 128).unwrap();

        // chi_2 vanishes
        let chi2 = solve_corrector(&a, 1, &mesh).unwrap();
        assert!(chi2.max_abs() <= 1e-12);

        // d chi_1 / d y1 = abar / a(y1) - 1 in L2; the bilinear x-derivative
        // is sampled on the element centerline where it is second-order
        let chi1 = solve_corrector(&a, 0, &mesh).unwrap();
        let grads = gradient_at_gauss(chi1.grid());
        let area = mesh.gauss_weight() * 4.0;
        let mut err2 = 0.0;
        for e in 0..mesh.n_elements() {
            let c = mesh.element_barycenter(e);
            let exact = abar / profile(c[0]) - 1.0;
            let diff = chi1.grid().grad_periodic(c)[0] - exact;
            err2 += area * diff * diff;
            for g in 0..4 {
                // the transverse derivative vanishes
                assert!(grads.at(e, g)[1].abs() < 1e-10);
            }
        }
        assert!(err2.sqrt() <= 1e-3, "profile L2 error {:.3e}", err2.sqrt());
    }

    #[test]
    fn layered_tensor_hits_harmonic_and_arithmetic_means() {
        let mesh = cell_mesh(128);
        let a = CoefficientField::layered();
        let (_, tensor) = homogenize(&a, &mesh).unwrap();
        let sqrt3 = 3.0f64.sqrt();
        assert!((tensor.entry(0, 0) - sqrt3).abs() / sqrt3 <= 2e-3);
        assert!((tensor.entry(1, 1) - 2.0).abs() <= 1e-6);
        assert!(tensor.entry(0, 1).abs() <= 1e-10);
        assert!(tensor.entry(1, 0).abs() <= 1e-10);
    }

    #[test]
    fn identity_tensor_is_identity() {
        let mesh = cell_mesh(32);
        let (chi, tensor) = homogenize(&CoefficientField::identity(), &mesh).unwrap();
        assert!(chi[0].max_abs() <= 1e-12);
        let gap = tensor.as_mat().sub(&Mat2::IDENTITY).max_abs();
        assert!(gap <= 1e-12);
    }

    #[test]
    fn adjoint_equals_corrector_for_symmetric() {
        let mesh = cell_mesh(64);
        let a = CoefficientField::isotropic_sin();
        for axis in 0..2 {
            let chi = solve_corrector(&a, axis, &mesh).unwrap();
            let chibar = solve_adjoint_corrector(&a, axis, &mesh).unwrap();
            let gap = chi
                .grid()
                .values()
                .iter()
                .zip(chibar.grid().values())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(gap <= 1e-10, "axis {axis}: gap {gap:.3e}");
        }
    }

    #[test]
    fn adjoint_is_corrector_of_transpose_by_construction() {
        let mesh = cell_mesh(32);
        let a = CoefficientField::skew_perturbed();
        let via_adjoint = solve_adjoint_corrector(&a, 0, &mesh).unwrap();
        let via_transpose = solve_corrector(&a.transposed(), 0, &mesh).unwrap();
        assert_eq!(via_adjoint.grid().values(), via_transpose.grid().values());
    }

    #[test]
    fn transpose_duality_of_tensors() {
        let mesh = cell_mesh(64);
        let a = CoefficientField::skew_perturbed();
        let (_, t_a) = homogenize(&a, &mesh).unwrap();
        let (_, t_at) = homogenize(&a.transposed(), &mesh).unwrap();
        let gap = t_at.as_mat().sub(&t_a.as_mat().transpose()).max_abs();
        assert!(gap <= 1e-10, "duality gap {gap:.3e}");
    }

    #[test]
    fn corrector_rejects_bad_inputs() {
        let a = CoefficientField::identity();
        let domain_mesh = build_mesh(&DomainSpec::unit_square(), (8, 8), false).unwrap();
        assert!(solve_corrector(&a, 0, &domain_mesh).is_err());
        let cell = cell_mesh(8);
        assert!(solve_corrector(&a, 2, &cell).is_err());

        // tensor from correctors on different meshes is refused
        let chi_a = solve_corrector(&a, 0, &cell_mesh(8)).unwrap();
        let chi_b = solve_corrector(&a, 1, &cell_mesh(16)).unwrap();
        assert!(homogenized_tensor(&a, &[chi_a, chi_b]).is_err());
    }

    #[test]
    fn correctors_have_zero_mean() {
        let mesh = cell_mesh(64);
        let a = CoefficientField::isotropic_sin();
        let chi = solve_corrector(&a, 0, &mesh).unwrap();
        assert!(chi.grid().mean().abs() <= 1e-12);
        // trapezoid quadrature mean over the cell agrees
        assert!(chi.grid().integral_trapezoid().abs() <= 1e-12);
    }

    #[test]
    fn tensor_converges_under_cell_refinement() {
        let a = CoefficientField::isotropic_sin();
        let t32 = homogenize(&a, &cell_mesh(32)).unwrap().1;
        let t64 = homogenize(&a, &cell_mesh(64)).unwrap().1;
        let t128 = homogenize(&a, &cell_mesh(128)).unwrap().1;
        let d1 = t32.as_mat().sub(&t64.as_mat()).max_abs();
        let d2 = t64.as_mat().sub(&t128.as_mat()).max_abs();
        assert!(d1 >= 3.0 * d2, "refinement dropped only {d1:.3e} -> {d2:.3e}");
    }

    #[test]
    fn closed_form_1d_examples() {
        // constant profile
        let (abar, chi) = corrector_1d_closed_form(&|_| 4.0, 64).unwrap();
        assert!((abar - 4.0).abs() < 1e-13);
        assert!(chi.iter().all(|v| v.abs() < 1e-13));

        // 2 + cos is the sqrt(alpha^2 - beta^2) family
        let (abar, _) = corrector_1d_closed_form(&|t| 2.0 + (TWO_PI * t).cos(), 64).unwrap();
        assert!((abar - 3.0f64.sqrt()).abs() < 1e-12);

        // two-phase harmonic mean 2 / (1 + 1/3)
        let (abar, _) =
            corrector_1d_closed_form(&|t| if t < 0.5 { 1.0 } else { 3.0 }, 64).unwrap();
        assert!((abar - 1.5).abs() < 1e-12);

        // positivity enforced
        assert!(corrector_1d_closed_form(&|t| t - 0.5, 64).is_err());
    }

    #[test]
    fn oscillating_coefficient_evaluation() {
        let a = CoefficientField::constant_nonsymmetric();
        let f = a.oscillating(0.25).unwrap();
        let gap = f([0.3, 0.9]).sub(&a.eval([0.0, 0.0])).max_abs();
        assert!(gap <= 1e-15, "constant family should be eps-independent");

        let a = CoefficientField::isotropic_sin();
        let eps = 1.0 / 8.0;
        let f = a.oscillating(eps).unwrap();
        // x = eps (xi + y0) maps exactly to A(y0)
        let y0 = [0.375, 0.8125];
        let x = [eps * (3.0 + y0[0]), eps * (5.0 + y0[1])];
        assert!(f(x).sub(&a.eval(y0)).max_abs() <= 1e-12);

        // eps-periodicity at random points
        let mut rng = SplitMix64::new(77);
        for _ in 0..1000 {
            let x = [rng.uniform(0.0, 0.875), rng.uniform(0.0, 1.0)];
            let shifted = [x[0] + eps, x[1]];
            assert!(f(shifted).sub(&f(x)).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn oscillating_rejects_bad_eps() {
        let a = CoefficientField::identity();
        assert!(a.oscillating(0.0).is_err());
        assert!(a.oscillating(-1.0).is_err());
    }

    #[test]
    fn raster_parse_and_conventions() {
        let text = "2\n1 0 0 1\n2 0 0 2\n3 0 0 3\n4 0 0 4\n";
        let raster = Raster::parse(text).unwrap();
        let a = CoefficientField::from_raster(raster).unwrap();
        assert!(a.is_symmetric());
        // row-major from lower-left: (0,0) -> 1, (1,0) -> 2, (0,1) -> 3, (1,1) -> 4
        assert_eq!(a.eval([0.2, 0.2]).0[0][0], 1.0);
        assert_eq!(a.eval([0.7, 0.2]).0[0][0], 2.0);
        assert_eq!(a.eval([0.2, 0.7]).0[0][0], 3.0);
        assert_eq!(a.eval([0.7, 0.7]).0[0][0], 4.0);
        // points on a raster edge take the lower-left subsquare
        assert_eq!(a.eval([0.5, 0.2]).0[0][0], 1.0);
        assert_eq!(a.eval([0.5, 0.5]).0[0][0], 1.0);
        assert_eq!(a.eval([0.2, 0.5]).0[0][0], 1.0);
    }

    #[test]
    fn raster_rejects_indefinite_subsquare() {
        let text = "1\n1 5 5 1\n";
        let raster = Raster::parse(text).unwrap();
        assert!(CoefficientField::from_raster(raster).is_err());
    }

    #[test]
    fn raster_rejects_malformed_input() {
        assert!(Raster::parse("").is_err());
        assert!(Raster::parse("2\n1 0 0 1\n").is_err());
        assert!(Raster::parse("1\n1 0 0\n").is_err());
        assert!(Raster::parse("1\n1 0 0 x\n").is_err());
    }

    #[test]
    fn elliptic_raster_solves_cell_problem() {
        // checkerboard 1 / 3
        let text = "2\n1 0 0 1\n3 0 0 3\n3 0 0 3\n1 0 0 1\n";
        let a = CoefficientField::from_raster(Raster::parse(text).unwrap()).unwrap();
        let mesh = cell_mesh(64);
        let (_, tensor) = homogenize(&a, &mesh).unwrap();
        // checkerboard effective coefficient is the geometric mean sqrt(3)
        let sqrt3 = 3.0f64.sqrt();
        assert!(
            (tensor.entry(0, 0) - sqrt3).abs() / sqrt3 < 0.05,
            "checkerboard tensor {:.4} vs sqrt(3)",
            tensor.entry(0, 0)
        );
    }
}
