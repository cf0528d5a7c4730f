//! End-to-end convergence studies: solve the oscillating and homogenized
//! problems on lattice-aligned meshes, build the corrector expansion, and
//! fit error rates against eps.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::algebra::Vec2;
use crate::cell::{homogenize, solve_corrector, CellFunction, CoefficientField, HomogenizedTensor};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::mesh_fem::{
    apply_dirichlet, assemble_load, assemble_stiffness, build_mesh, gradient_at_gauss, solve,
    GaussVecField, GridFunction, Mesh, SolverConfig,
};
use crate::norms::{
    gagliardo_h12, hminus12_proxy, rho_norm, rho_weighted_h1_error, weighted_norm, NormKind,
};
use crate::unfolding::corrector_expansion;

use super::boundary::BoundaryData;
use super::config::{BoundarySelector, ExperimentConfig, SourceSelector, StudyKind};
use super::report::{fit_rate, ConvergenceReport, ReportRow};

/// Cell-problem results shared by every row of a study.
///
/// Two corrector resolutions coexist on purpose. The homogenized tensor is
/// formed at `cell_grid`, where it is accurate to O(1/N^2). The corrector
/// expansion instead uses correctors solved at the per-cell resolution `m`
/// of the aligned domain meshes: on such meshes the discrete oscillating
/// solution carries exactly the m-resolution discrete corrector, so the
/// matched pair is what makes the rho-weighted gradient error decay with
/// eps instead of flooring at the O(1/m) resolution mismatch.
pub struct CellContext {
    pub coeff: CoefficientField,
    pub correctors: [CellFunction; 2],
    pub tensor: HomogenizedTensor,
    pub expansion_correctors: [CellFunction; 2],
}

impl CellContext {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let coeff = coefficient_from_config(cfg)?;
        let cell_mesh = build_mesh(
            &DomainSpec::unit_square(),
            (cfg.cell_grid, cfg.cell_grid),
            true,
        )?;
        let (correctors, tensor) = homogenize(&coeff, &cell_mesh)?;
        let matched_mesh = build_mesh(&DomainSpec::unit_square(), (cfg.m, cfg.m), true)?;
        let expansion_correctors = [
            solve_corrector(&coeff, 0, &matched_mesh)?,
            solve_corrector(&coeff, 1, &matched_mesh)?,
        ];
        Ok(Self { coeff, correctors, tensor, expansion_correctors })
    }
}

pub fn coefficient_from_config(cfg: &ExperimentConfig) -> Result<CoefficientField> {
    if cfg.coeff == "raster" {
        let path = cfg.raster.as_ref().ok_or_else(|| {
            Error::Config("coeff = raster needs a raster file path".into())
        })?;
        CoefficientField::from_raster_file(path)
    } else {
        CoefficientField::from_tag(&cfg.coeff)
    }
}

fn source_value(sel: SourceSelector, p: Vec2) -> f64 {
    use std::f64::consts::PI;
    match sel {
        SourceSelector::Zero => 0.0,
        SourceSelector::One => 1.0,
        SourceSelector::Manufactured => 2.0 * PI * PI * (PI * p[0]).sin() * (PI * p[1]).sin(),
    }
}

fn kind_checks(cfg: &ExperimentConfig, kind: StudyKind) -> Result<()> {
    match kind {
        StudyKind::Th3 => {
            if cfg.g == BoundarySelector::Oscillating {
                return Err(Error::Config(
                    "th3 studies use a fixed boundary datum; pick th65 for the oscillating family"
                        .into(),
                ));
            }
        }
        StudyKind::Th1 => {
            if cfg.f != SourceSelector::Zero {
                return Err(Error::Config("th1 studies are source-free (f = zero)".into()));
            }
            if cfg.g == BoundarySelector::Oscillating {
                return Err(Error::Config(
                    "th1 studies use a fixed boundary datum; pick th65 for the oscillating family"
                        .into(),
                ));
            }
        }
        StudyKind::Th65 => {
            if cfg.f != SourceSelector::Zero {
                return Err(Error::Config("th65 studies are source-free (f = zero)".into()));
            }
            if cfg.g != BoundarySelector::Oscillating {
                return Err(Error::Config("th65 studies need g = oscillating".into()));
            }
            if !(cfg.beta > 0.0) {
                return Err(Error::Config(format!(
                    "the oscillating family needs beta > 0, got {}",
                    cfg.beta
                )));
            }
        }
    }
    Ok(())
}

fn domain_of(cfg: &ExperimentConfig) -> Result<DomainSpec> {
    DomainSpec::rectangle(cfg.l1, cfg.l2)
}

fn aligned_mesh(cfg: &ExperimentConfig, domain: &DomainSpec, eps: f64) -> Result<Mesh> {
    let mut subdivisions = [0usize; 2];
    for a in 0..2 {
        let cells = domain.extent(a) / eps;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return Err(Error::Alignment(format!(
                "extent {} is not an integer multiple of eps {eps}",
                domain.extent(a)
            )));
        }
        subdivisions[a] = cells.round() as usize * cfg.m;
    }
    build_mesh(domain, (subdivisions[0], subdivisions[1]), false)
}

/// Everything a single-eps run produces.
struct SolveOutputs {
    phi_eps: GridFunction,
    phi_hom: GridFunction,
    /// Lift of the base datum; only solved when it differs from `phi_hom`.
    phi_base: Option<GridFunction>,
    expansion_value: GridFunction,
    expansion_grad: GaussVecField,
    iters_eps: usize,
    iters_hom: usize,
}

fn solve_row(
    ctx: &CellContext,
    cfg: &ExperimentConfig,
    kind: StudyKind,
    eps: f64,
) -> Result<SolveOutputs> {
    let domain = domain_of(cfg)?;
    let mesh = aligned_mesh(cfg, &domain, eps)?;
    let solver = SolverConfig {
        tol: cfg.tol,
        max_iterations: cfg.max_iterations,
        ..Default::default()
    };

    let datum = BoundaryData::at_eps(cfg, &domain, eps)?;
    let trace = datum.trace_on(&mesh);
    let load = assemble_load(&mesh, &|p| source_value(cfg.f, p));

    // oscillating problem
    let a_eps = ctx.coeff.oscillating(eps)?;
    let mut system = assemble_stiffness(&mesh, &a_eps, ctx.coeff.ellipticity())?;
    system.set_rhs(load.clone())?;
    let system = apply_dirichlet(&system, &trace)?;
    let (phi_eps, info_eps) = solve(&system, &solver).map_err(|e| match e {
        Error::SolverDiverged { residual, iterations } => Error::Study(format!(
            "oscillating solve at eps = {eps} diverged: residual {residual:.3e} after {iterations} iterations"
        )),
        other => other,
    })?;

    // homogenized problem with the same source and datum
    let hom_mat = ctx.tensor.as_mat();
    let hom_ell = hom_mat.sym_min_eigenvalue() * (1.0 - 1e-12);
    let mut system = assemble_stiffness(&mesh, &|_| hom_mat, hom_ell)?;
    system.set_rhs(load)?;
    let system = apply_dirichlet(&system, &trace)?;
    let (phi_hom, info_hom) = solve(&system, &solver).map_err(|e| match e {
        Error::SolverDiverged { residual, iterations } => Error::Study(format!(
            "homogenized solve at eps = {eps} diverged: residual {residual:.3e} after {iterations} iterations"
        )),
        other => other,
    })?;

    // the oscillating study compares against the lift of the base datum
    // (source-free by construction, so the fresh zero rhs is the right one)
    let phi_base = if kind == StudyKind::Th65 {
        let base_trace = BoundaryData::base(cfg, &domain).trace_on(&mesh);
        let system = assemble_stiffness(&mesh, &|_| hom_mat, hom_ell)?;
        let system = apply_dirichlet(&system, &base_trace)?;
        let (phi_base, _) = solve(&system, &solver).map_err(|e| match e {
            Error::SolverDiverged { residual, iterations } => Error::Study(format!(
                "base lift at eps = {eps} diverged: residual {residual:.3e} after {iterations} iterations"
            )),
            other => other,
        })?;
        Some(phi_base)
    } else {
        None
    };

    let (expansion_value, expansion_grad) =
        corrector_expansion(&phi_hom, &ctx.expansion_correctors, eps)?;

    Ok(SolveOutputs {
        phi_eps,
        phi_hom,
        phi_base,
        expansion_value,
        expansion_grad,
        iters_eps: info_eps.iterations,
        iters_hom: info_hom.iterations,
    })
}

/// One row of a study at a given eps, with a context built on the fly.
pub fn run_single(cfg: &ExperimentConfig, kind: StudyKind, eps: f64) -> Result<ReportRow> {
    let ctx = CellContext::build(cfg)?;
    run_single_with(&ctx, cfg, kind, eps)
}

/// One row of a study reusing an already-built cell context.
pub fn run_single_with(
    ctx: &CellContext,
    cfg: &ExperimentConfig,
    kind: StudyKind,
    eps: f64,
) -> Result<ReportRow> {
    kind_checks(cfg, kind)?;
    let start = Instant::now();
    let domain = domain_of(cfg)?;
    let out = solve_row(ctx, cfg, kind, eps)?;

    let reference = out.phi_base.as_ref().unwrap_or(&out.phi_hom);
    let l2_err = weighted_norm(&out.phi_eps.sub(reference)?, 0, NormKind::Value)?;
    let h1rho_err = rho_weighted_h1_error(&out.phi_eps, &out.expansion_grad)?;
    let consistency = expansion_consistency_l2(&out.expansion_value, &out.expansion_grad)?;

    let datum = BoundaryData::at_eps(cfg, &domain, eps)?;
    let samples = datum.sample_arclength(&domain, cfg.h12_samples);
    let h12_g = gagliardo_h12(&samples, domain.perimeter())?;

    let lift_mesh = build_mesh(&domain, (cfg.lift_grid, cfg.lift_grid), false)?;
    let lift_trace = datum.trace_on(&lift_mesh);
    let hm12 = hminus12_proxy(&lift_trace, &ctx.tensor, &lift_mesh)?;

    let (rho_norm_eps, bound_ratio) = if kind == StudyKind::Th1 {
        let rho = rho_norm(&out.phi_eps)?;
        let denom = eps.sqrt() * h12_g + hm12;
        (Some(rho), Some(rho / denom))
    } else {
        (None, None)
    };
    let hypothesis = (kind == StudyKind::Th65).then(|| eps.sqrt() * h12_g);

    Ok(ReportRow {
        eps,
        // aligned meshes have h = eps / m on both axes
        h: eps / cfg.m as f64,
        l2_err,
        h1rho_err,
        h12_g,
        hm12_proxy: hm12,
        iters_eps: out.iters_eps,
        iters_hom: out.iters_hom,
        seconds: start.elapsed().as_secs_f64(),
        rho_norm_eps,
        bound_ratio,
        hypothesis,
        expansion_consistency: Some(consistency),
    })
}

/// Run a full study: one row per eps (decreasing) and fitted slopes.
pub fn run_study(cfg: &ExperimentConfig, kind: StudyKind) -> Result<ConvergenceReport> {
    cfg.validate()?;
    kind_checks(cfg, kind)?;
    if cfg.eps_list.len() < 3 {
        return Err(Error::Study(format!(
            "a study needs at least 3 eps values, got {}",
            cfg.eps_list.len()
        )));
    }
    let mut eps_list = cfg.eps_list.clone();
    eps_list.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let ctx = CellContext::build(cfg)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in &eps_list {
        rows.push(run_single_with(&ctx, cfg, kind, eps)?);
    }

    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let mut slopes = BTreeMap::new();
    slopes.insert(
        "l2".to_string(),
        fit_rate(&eps, &rows.iter().map(|r| r.l2_err).collect::<Vec<_>>())?,
    );
    slopes.insert(
        "h1rho".to_string(),
        fit_rate(&eps, &rows.iter().map(|r| r.h1rho_err).collect::<Vec<_>>())?,
    );
    if kind == StudyKind::Th1 {
        let normalized: Vec<f64> = rows.iter().map(|r| r.l2_err / r.h12_g).collect();
        slopes.insert("l2_over_h12".to_string(), fit_rate(&eps, &normalized)?);
    }
    let hypothesis_decreasing = (kind == StudyKind::Th65).then(|| {
        rows.windows(2)
            .all(|w| w[1].hypothesis.unwrap() < w[0].hypothesis.unwrap())
    });

    Ok(ConvergenceReport {
        study: kind,
        config: cfg.clone(),
        rows,
        slopes,
        hypothesis_decreasing,
    })
}

/// Source-free study against the harmonic lift (fixed datum).
pub fn run_th1_study(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_study(cfg, StudyKind::Th1)
}

/// Oscillating boundary-data study.
pub fn run_oscillating_study(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_study(cfg, StudyKind::Th65)
}

/// Monitored consistency of the corrector expansion: L2 distance between
/// the element gradients of the nodal value field and the Gauss-point
/// gradient comparison object. Shrinks with the element size at fixed eps.
pub fn expansion_consistency_l2(value: &GridFunction, grad: &GaussVecField) -> Result<f64> {
    let mesh = value.mesh().clone();
    if !mesh.same_layout(grad.mesh()) {
        return Err(Error::Input("value and gradient fields live on different meshes".into()));
    }
    let direct = gradient_at_gauss(value);
    let w = mesh.gauss_weight();
    let mut acc = 0.0;
    for e in 0..mesh.n_elements() {
        for g in 0..4 {
            let a = direct.at(e, g);
            let b = grad.at(e, g);
            acc += w * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
        }
    }
    Ok(acc.sqrt())
}
