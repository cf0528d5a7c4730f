//! Norms and inequality audits: plain and boundary-distance-weighted L2/H1
//! norms, trace norms, the Gagliardo fractional boundary norm, the harmonic
//! lift and its L2 norm as an equivalent negative-order boundary norm, and
//! the Hardy / boundary-layer ratio checks.
//!
//! Inequality constants are never asserted exactly; they are monitored
//! ratios with fixed acceptance caps.

use crate::algebra::KahanSum;
use crate::cell::HomogenizedTensor;
use crate::error::{Error, Result};
use crate::geometry::{boundary_layer_mask, LayerMask};
use crate::mesh_fem::{
    apply_dirichlet, assemble_stiffness, gradient_at_gauss, solve, GaussVecField, GridFunction,
    Mesh, SolveInfo, SolverConfig, GAUSS_LOCAL,
};

/// Which square is integrated by [`weighted_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Value,
    Gradient,
}

/// Gauss-quadrature value of ( integral rho^{2p} |u|^2 )^{1/2} (or the
/// gradient version). The boundary distance is evaluated at Gauss points,
/// where it is strictly positive, so negative powers stay finite for fields
/// in the corresponding weighted space.
pub fn weighted_norm(u: &GridFunction, weight_power: i32, kind: NormKind) -> Result<f64> {
    weighted_norm_masked(u, weight_power, kind, None)
}

/// Same as [`weighted_norm`] restricted to the elements of a layer mask.
pub fn weighted_norm_masked(
    u: &GridFunction,
    weight_power: i32,
    kind: NormKind,
    mask: Option<&LayerMask>,
) -> Result<f64> {
    if !(-2..=1).contains(&weight_power) {
        return Err(Error::Parameter(format!(
            "weight power must lie in -2..=1, got {weight_power}"
        )));
    }
    let mesh = u.mesh().clone();
    let domain = *mesh.domain();
    let w = mesh.gauss_weight();
    let grads = match kind {
        NormKind::Gradient => Some(gradient_at_gauss(u)),
        NormKind::Value => None,
    };
    let mut acc = KahanSum::new();
    for e in 0..mesh.n_elements() {
        if let Some(m) = mask {
            if !m.element_in_layer[e] {
                continue;
            }
        }
        for (g, _) in GAUSS_LOCAL.iter().enumerate() {
            let x = mesh.gauss_position(e, g);
            let rho = domain.rho_unchecked(x);
            let weight = rho.powi(2 * weight_power);
            let sq = match (&grads, kind) {
                (Some(gr), NormKind::Gradient) => {
                    let v = gr.at(e, g);
                    v[0] * v[0] + v[1] * v[1]
                }
                _ => {
                    let v = u.eval(x);
                    v * v
                }
            };
            acc.add(w * weight * sq);
        }
    }
    let out = acc.value().max(0.0).sqrt();
    if !out.is_finite() {
        return Err(Error::Input(
            "weighted norm is not finite; the field is not in this weighted space".into(),
        ));
    }
    Ok(out)
}

/// || u ||_rho = || u ||_L2 + || rho grad u ||_L2.
pub fn rho_norm(u: &GridFunction) -> Result<f64> {
    Ok(weighted_norm(u, 0, NormKind::Value)? + weighted_norm(u, 1, NormKind::Gradient)?)
}

/// Hardy ratios of a field vanishing on the boundary:
/// r1 = ||psi/rho|| / ||grad psi|| and r2 = ||psi/rho^2|| / ||grad psi / rho||.
/// Zero fields report 0 by convention.
pub fn hardy_check(psi: &GridFunction) -> Result<(f64, f64)> {
    let mesh = psi.mesh();
    let scale = psi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // absorb evaluation roundoff of fields like sin(pi x) at x = 1
    let tol = 1e-12 * (1.0 + scale);
    for &b in &mesh.boundary_node_ids() {
        if psi.values()[b].abs() > tol {
            return Err(Error::Precondition(format!(
                "hardy_check needs a boundary-vanishing field; node {b} has {}",
                psi.values()[b]
            )));
        }
    }
    let ratio = |num: f64, den: f64| if num == 0.0 && den == 0.0 { 0.0 } else { num / den };
    let r1 = ratio(
        weighted_norm(psi, -1, NormKind::Value)?,
        weighted_norm(psi, 0, NormKind::Gradient)?,
    );
    let r2 = ratio(
        weighted_norm(psi, -2, NormKind::Value)?,
        weighted_norm(psi, -1, NormKind::Gradient)?,
    );
    Ok((r1, r2))
}

/// Trapezoid-rule L2 norm of the nodal values along the four edges.
pub fn boundary_trace_l2(u: &GridFunction) -> f64 {
    let mesh = u.mesh();
    let boundary = mesh.boundary_nodes();
    let b = boundary.len();
    let perimeter = mesh.domain().perimeter();
    let mut acc = KahanSum::new();
    for k in 0..b {
        let next = (k + 1) % b;
        let len = if next == 0 {
            perimeter - boundary[k].arclength
        } else {
            boundary[next].arclength - boundary[k].arclength
        };
        let va = u.values()[boundary[k].node];
        let vb = u.values()[boundary[next].node];
        acc.add(0.5 * len * (va * va + vb * vb));
    }
    acc.value().max(0.0).sqrt()
}

/// Both boundary-layer trace constants for the strip of width `gamma`:
/// c1 for  ||u||_{L2(bdry)} <= c1 gamma^{-1/2} (||u||_{layer} + gamma ||grad u||_{layer})
/// c2 for  ||u||_{layer}    <= c2 (gamma^{1/2} ||u||_{bdry} + gamma ||grad u||_{layer}).
pub fn layer_trace_constants(u: &GridFunction, gamma: f64) -> Result<(f64, f64)> {
    let mask = boundary_layer_mask(u.mesh(), gamma)?;
    let trace = boundary_trace_l2(u);
    let layer_l2 = weighted_norm_masked(u, 0, NormKind::Value, Some(&mask))?;
    let layer_grad = weighted_norm_masked(u, 0, NormKind::Gradient, Some(&mask))?;
    let ratio = |num: f64, den: f64| if num == 0.0 && den == 0.0 { 0.0 } else { num / den };
    let c1 = ratio(trace * gamma.sqrt(), layer_l2 + gamma * layer_grad);
    let c2 = ratio(layer_l2, gamma.sqrt() * trace + gamma * layer_grad);
    Ok((c1, c2))
}

/// Discrete Gagliardo H^{1/2} norm of samples at `B` equispaced arclength
/// points of the closed boundary curve:
///   ||g||^2 = ||g||^2_{L2} + sum_{i != j} |g_i - g_j|^2 / d(s_i,s_j)^2 (ds)^2
/// with d the periodic arclength distance.
pub fn gagliardo_h12(samples: &[f64], perimeter: f64) -> Result<f64> {
    let (l2_sq, semi_sq) = gagliardo_parts(samples, perimeter)?;
    Ok((l2_sq + semi_sq).sqrt())
}

/// The seminorm part alone (translation invariant).
pub fn gagliardo_seminorm(samples: &[f64], perimeter: f64) -> Result<f64> {
    let (_, semi_sq) = gagliardo_parts(samples, perimeter)?;
    Ok(semi_sq.sqrt())
}

fn gagliardo_parts(samples: &[f64], perimeter: f64) -> Result<(f64, f64)> {
    let b = samples.len();
    if b < 8 {
        return Err(Error::Parameter(format!(
            "gagliardo_h12 needs at least 8 boundary samples, got {b}"
        )));
    }
    if !(perimeter > 0.0) {
        return Err(Error::Parameter("perimeter must be positive".into()));
    }
    let ds = perimeter / b as f64;
    let l2_sq: f64 = samples.iter().map(|g| g * g * ds).sum();
    let mut semi = KahanSum::new();
    for i in 0..b {
        for j in (i + 1)..b {
            let s = ds * (j - i) as f64;
            let d = s.min(perimeter - s);
            let diff = samples[i] - samples[j];
            semi.add(diff * diff / (d * d));
        }
    }
    Ok((l2_sq, 2.0 * semi.value() * ds * ds))
}

/// Harmonic lift: solve div(A grad u) = 0 with the constant homogenized
/// tensor and the given Dirichlet trace.
pub fn lift_boundary(
    trace: &[(usize, f64)],
    tensor: &HomogenizedTensor,
    mesh: &Mesh,
) -> Result<(GridFunction, SolveInfo)> {
    let mat = tensor.as_mat();
    let c = mat.sym_min_eigenvalue();
    if !(c > 0.0) {
        return Err(Error::Coefficient(
            "homogenized tensor is not elliptic; cannot lift".into(),
        ));
    }
    let system = assemble_stiffness(mesh, &|_| mat, c * (1.0 - 1e-12))?;
    let system = apply_dirichlet(&system, trace)?;
    solve(&system, &SolverConfig::default())
}

/// Equivalent negative-order boundary norm: the L2 norm of the harmonic
/// lift of g.
pub fn hminus12_proxy(
    trace: &[(usize, f64)],
    tensor: &HomogenizedTensor,
    mesh: &Mesh,
) -> Result<f64> {
    let (lift, _) = lift_boundary(trace, tensor, mesh)?;
    weighted_norm(&lift, 0, NormKind::Value)
}

/// L2 distance between a nodal field and a pointwise reference (the
/// workhorse of manufactured-solution checks). Uses a 3x3 Gauss rule per
/// element: the 2x2 points are blind to interpolation errors with symmetric
/// bulges (x^2 - y^2 being the canonical case).
pub fn l2_error_against(u: &GridFunction, reference: &dyn Fn(crate::algebra::Vec2) -> f64) -> f64 {
    const NODES: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
    const WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let mesh = u.mesh();
    let h = mesh.spacing();
    let jac = h[0] * h[1];
    let mut acc = KahanSum::new();
    for e in 0..mesh.n_elements() {
        let o = mesh.element_origin(e);
        for (i, ni) in NODES.iter().enumerate() {
            for (j, nj) in NODES.iter().enumerate() {
                let x = [o[0] + ni * h[0], o[1] + nj * h[1]];
                let d = u.eval(x) - reference(x);
                acc.add(jac * WEIGHTS[i] * WEIGHTS[j] * d * d);
            }
        }
    }
    acc.value().max(0.0).sqrt()
}

/// || rho (grad u - v) ||_L2 with v given at the Gauss points of u's mesh.
pub fn rho_weighted_h1_error(u: &GridFunction, v: &GaussVecField) -> Result<f64> {
    let mesh = u.mesh().clone();
    if !mesh.same_layout(v.mesh()) {
        return Err(Error::Input(
            "gauss field does not match the quadrature layout of the grid function".into(),
        ));
    }
    let domain = *mesh.domain();
    let grads = gradient_at_gauss(u);
    let w = mesh.gauss_weight();
    let mut acc = KahanSum::new();
    for e in 0..mesh.n_elements() {
        for g in 0..4 {
            let x = mesh.gauss_position(e, g);
            let rho = domain.rho_unchecked(x);
            let gu = grads.at(e, g);
            let gv = v.at(e, g);
            let dx = gu[0] - gv[0];
            let dy = gu[1] - gv[1];
            acc.add(w * rho * rho * (dx * dx + dy * dy));
        }
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// All the named norms of one field, with quadrature metadata.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub l2: f64,
    pub h1_seminorm: f64,
    /// ||u||_L2 + ||rho grad u||.
    pub rho_norm: f64,
    /// ||grad u / rho||.
    pub inv_rho_h1: f64,
    /// ||u / rho||.
    pub value_over_rho: f64,
    /// ||u / rho^2||.
    pub value_over_rho2: f64,
    pub boundary_l2: f64,
    pub gagliardo_h12: f64,
    /// Present when a homogenized tensor was supplied for the lift.
    pub hminus12_proxy: Option<f64>,
    pub mesh_subdivisions: (usize, usize),
    pub boundary_panels: usize,
}

impl NormReport {
    pub fn compute(u: &GridFunction, tensor: Option<&HomogenizedTensor>) -> Result<NormReport> {
        let mesh = u.mesh();
        let boundary = mesh.boundary_nodes();
        let perimeter = mesh.domain().perimeter();
        // the fractional norm wants equispaced arclength samples, which the
        // boundary nodes are not on anisotropic meshes; resample the trace
        let b = boundary.len();
        let domain = *mesh.domain();
        let samples: Vec<f64> = (0..b)
            .map(|i| u.eval(domain.boundary_point(perimeter * i as f64 / b as f64)))
            .collect();
        let trace: Vec<(usize, f64)> = boundary
            .iter()
            .map(|b| (b.node, u.values()[b.node]))
            .collect();
        let proxy = match tensor {
            Some(t) => Some(hminus12_proxy(&trace, t, mesh)?),
            None => None,
        };
        let report = NormReport {
            l2: weighted_norm(u, 0, NormKind::Value)?,
            h1_seminorm: weighted_norm(u, 0, NormKind::Gradient)?,
            rho_norm: rho_norm(u)?,
            inv_rho_h1: weighted_norm(u, -1, NormKind::Gradient)?,
            value_over_rho: weighted_norm(u, -1, NormKind::Value)?,
            value_over_rho2: weighted_norm(u, -2, NormKind::Value)?,
            boundary_l2: boundary_trace_l2(u),
            gagliardo_h12: gagliardo_h12(&samples, perimeter)?,
            hminus12_proxy: proxy,
            mesh_subdivisions: mesh.subdivisions(),
            boundary_panels: samples.len(),
        };
        Ok(report)
    }
}
