//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with its measured quantities (run with `-- --nocapture` to see them).
//!
//! Timed criteria take a shared lock so wall-clock budgets are measured
//! without contention from sibling tests.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::Instant;

use homoglab::cell::{corrector_1d_closed_form, homogenize, CoefficientField};
use homoglab::experiments::{
    emit_report, fit_rate, run_study, BoundarySelector, ExperimentConfig, FitOutcome,
    SourceSelector, StudyKind,
};
use homoglab::geometry::{classify_cells, DomainSpec};
use homoglab::mesh_fem::{
    apply_dirichlet, assemble_load, assemble_stiffness, boundary_trace, build_mesh, solve,
    GridFunction, SolverConfig,
};
use homoglab::norms::{hardy_check, l2_error_against, layer_trace_constants};
use homoglab::ops_check::unfolding_suite;
use homoglab::unfolding::periodicity_defect;

static SERIAL: Mutex<()> = Mutex::new(());

fn criterion(number: usize, name: &str, body: impl FnOnce() -> String) {
    let guard = SERIAL.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
    let outcome = catch_unwind(AssertUnwindSafe(body));
    drop(guard);
    match outcome {
        Ok(detail) => println!("PASS criterion {number:02} {name}: {detail}"),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            println!("FAIL criterion {number:02} {name}: {msg}");
            resume_unwind(payload);
        }
    }
}

fn slope_of(outcome: Option<FitOutcome>, column: &str) -> f64 {
    match outcome {
        Some(FitOutcome::Fit { slope, .. }) => slope,
        other => panic!("no usable slope for {column}: {other:?}"),
    }
}

#[test]
fn criterion_01_identity_coefficient() {
    criterion(1, "identity coefficient", || {
        let start = Instant::now();
        let mesh = build_mesh(&DomainSpec::unit_square(), (64, 64), true).unwrap();
        let coeff = CoefficientField::identity();
        let (chi, tensor) = homogenize(&coeff, &mesh).unwrap();
        let chi_max = chi[0].max_abs().max(chi[1].max_abs());
        let gap = tensor
            .as_mat()
            .sub(&homoglab::algebra::Mat2::IDENTITY)
            .max_abs();
        let elapsed = start.elapsed().as_secs_f64();
        assert!(chi_max <= 1e-10, "corrector sup-norm {chi_max:.3e}");
        assert!(gap <= 1e-10, "tensor gap {gap:.3e}");
        assert!(elapsed < 5.0, "runtime {elapsed:.2} s exceeds 5 s");
        format!("max|chi| = {chi_max:.2e}, max|A - I| = {gap:.2e} ({elapsed:.2} s)")
    });
}

#[test]
fn criterion_02_layered_oracle() {
    criterion(2, "layered oracle", || {
        let start = Instant::now();
        // independent oracle: high-order quadrature of the harmonic mean,
        // cross-checked against the closed form sqrt(alpha^2 - beta^2)
        let profile = |t: f64| 2.0 + (2.0 * std::f64::consts::PI * t).cos();
        let (abar, _) = corrector_1d_closed_form(&profile, 128).unwrap();
        assert!(
            (abar - 3.0f64.sqrt()).abs() <= 1e-12,
            "oracle self-check failed: {abar}"
        );

        let mesh = build_mesh(&DomainSpec::unit_square(), (128, 128), true).unwrap();
        let (_, tensor) = homogenize(&CoefficientField::layered(), &mesh).unwrap();
        let rel11 = (tensor.entry(0, 0) - abar).abs() / abar;
        let abs22 = (tensor.entry(1, 1) - 2.0).abs();
        let elapsed = start.elapsed().as_secs_f64();
        assert!(rel11 <= 2e-3, "harmonic-mean entry off by {rel11:.3e} relative");
        assert!(abs22 <= 1e-6, "arithmetic-mean entry off by {abs22:.3e}");
        assert!(elapsed < 30.0, "runtime {elapsed:.2} s exceeds 30 s");
        format!(
            "A11 = {:.8} vs {abar:.8} (rel {rel11:.1e}), A22 = {:.10} ({elapsed:.2} s)",
            tensor.entry(0, 0),
            tensor.entry(1, 1)
        )
    });
}

#[test]
fn criterion_03_transpose_duality() {
    criterion(3, "transpose duality", || {
        let mesh = build_mesh(&DomainSpec::unit_square(), (128, 128), true).unwrap();
        let coeff = CoefficientField::skew_perturbed();
        let (_, t_a) = homogenize(&coeff, &mesh).unwrap();
        let (_, t_at) = homogenize(&coeff.transposed(), &mesh).unwrap();
        let gap = t_at.as_mat().sub(&t_a.as_mat().transpose()).max_abs();
        assert!(gap <= 1e-8, "duality gap {gap:.3e}");
        format!("max|A(A^T) - A(A)^T| = {gap:.2e}")
    });
}

#[test]
fn criterion_04_fem_order() {
    criterion(4, "manufactured FEM order", || {
        let start = Instant::now();
        let pi = std::f64::consts::PI;
        let exact = move |p: [f64; 2]| (pi * p[0]).sin() * (pi * p[1]).sin();
        let mut hs = Vec::new();
        let mut errors = Vec::new();
        for n in [16usize, 32, 64, 128] {
            let mesh = build_mesh(&DomainSpec::unit_square(), (n, n), false).unwrap();
            let mut system = assemble_stiffness(&mesh, &|_| homoglab::algebra::Mat2::IDENTITY, 1.0).unwrap();
            system
                .set_rhs(assemble_load(&mesh, &|p| {
                    2.0 * pi * pi * (pi * p[0]).sin() * (pi * p[1]).sin()
                }))
                .unwrap();
            let system = apply_dirichlet(&system, &boundary_trace(&mesh, &|_| 0.0)).unwrap();
            let (u, _) = solve(&system, &SolverConfig::default()).unwrap();
            hs.push(1.0 / n as f64);
            errors.push(l2_error_against(&u, &exact));
        }
        let slope = slope_of(Some(fit_rate(&hs, &errors).unwrap()), "L2 vs h");
        let elapsed = start.elapsed().as_secs_f64();
        assert!(
            (slope - 2.0).abs() <= 0.1,
            "L2 slope {slope:.3} not within 2.0 +- 0.1 (errors {errors:?})"
        );
        assert!(elapsed < 60.0, "runtime {elapsed:.2} s exceeds 1 min");
        format!("L2 slope {slope:.3} over meshes 16..128 ({elapsed:.1} s)")
    });
}

#[test]
fn criterion_05_exact_operator_identities() {
    criterion(5, "exact operator identities", || {
        let start = Instant::now();
        let results = unfolding_suite(1e-12).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
        assert!(elapsed < 10.0, "runtime {elapsed:.2} s exceeds 10 s");
        format!("{} identities at 1e-12 ({elapsed:.2} s)", results.len())
    });
}

#[test]
fn criterion_06_th3_smooth_data() {
    criterion(6, "smooth-data error rates", || {
        let start = Instant::now();
        let cfg = ExperimentConfig {
            coeff: "isotropic-sin".into(),
            f: SourceSelector::One,
            g: BoundarySelector::Smooth,
            ..Default::default()
        };
        let report = run_study(&cfg, StudyKind::Th3).unwrap();
        let l2 = slope_of(report.slope("l2"), "l2");
        let h1rho = slope_of(report.slope("h1rho"), "h1rho");
        let elapsed = start.elapsed().as_secs_f64();
        assert!(l2 >= 0.85, "L2 slope {l2:.3} below 0.85");
        assert!(h1rho >= 0.85, "rho-weighted slope {h1rho:.3} below 0.85");
        assert!(elapsed <= 900.0, "runtime {elapsed:.0} s exceeds 15 min");
        format!("L2 slope {l2:.3}, rho-weighted H1 slope {h1rho:.3} ({elapsed:.0} s)")
    });
}

#[test]
fn criterion_07_th3_rough_data() {
    criterion(7, "rough-data error rates", || {
        let start = Instant::now();
        let cfg = ExperimentConfig {
            coeff: "isotropic-sin".into(),
            f: SourceSelector::Zero,
            g: BoundarySelector::RoughFourier,
            alpha: 1.1,
            k_max: 64,
            ..Default::default()
        };
        let report = run_study(&cfg, StudyKind::Th3).unwrap();
        let l2 = slope_of(report.slope("l2"), "l2");
        let h1rho = slope_of(report.slope("h1rho"), "h1rho");
        let elapsed = start.elapsed().as_secs_f64();
        assert!(l2 >= 0.45, "L2 slope {l2:.3} below 0.45");
        assert!(h1rho >= 0.45, "rho-weighted slope {h1rho:.3} below 0.45");
        assert!(elapsed <= 900.0, "runtime {elapsed:.0} s exceeds 15 min");
        format!("L2 slope {l2:.3}, rho-weighted H1 slope {h1rho:.3} ({elapsed:.0} s)")
    });
}

#[test]
fn criterion_08_th1_source_free() {
    criterion(8, "source-free rates and rho-norm bound", || {
        let cfg = ExperimentConfig {
            coeff: "layered".into(),
            f: SourceSelector::Zero,
            g: BoundarySelector::Smooth,
            ..Default::default()
        };
        let report = run_study(&cfg, StudyKind::Th1).unwrap();
        let slope = slope_of(report.slope("l2_over_h12"), "l2_over_h12");
        let worst_ratio = report
            .rows
            .iter()
            .map(|r| r.bound_ratio.unwrap())
            .fold(0.0f64, f64::max);
        assert!(slope >= 0.45, "normalized L2 slope {slope:.3} below 0.45");
        assert!(
            worst_ratio <= 10.0,
            "rho-norm bound ratio {worst_ratio:.3} not bounded by a single constant"
        );
        format!("normalized L2 slope {slope:.3}, bound ratio <= {worst_ratio:.2}")
    });
}

#[test]
fn criterion_09_th65_oscillating_data() {
    criterion(9, "oscillating boundary data", || {
        let cfg = ExperimentConfig {
            coeff: "layered".into(),
            f: SourceSelector::Zero,
            g: BoundarySelector::Oscillating,
            beta: 0.25,
            ..Default::default()
        };
        let report = run_study(&cfg, StudyKind::Th65).unwrap();
        assert_eq!(
            report.hypothesis_decreasing,
            Some(true),
            "eps^(1/2) ||g_eps|| is not strictly decreasing"
        );
        let l2 = slope_of(report.slope("l2"), "l2");
        assert!(l2 >= 0.2, "L2 slope {l2:.3} below 0.2");
        let hyp: Vec<f64> = report.rows.iter().map(|r| r.hypothesis.unwrap()).collect();
        format!("L2 slope {l2:.3}, hypothesis {:.3} -> {:.3}", hyp[0], hyp[hyp.len() - 1])
    });
}

#[test]
fn criterion_10_inequality_audits() {
    criterion(10, "inequality audits", || {
        let pi = std::f64::consts::PI;
        // Hardy ratios on two meshes
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        for n in [64usize, 128] {
            let mesh = build_mesh(&DomainSpec::unit_square(), (n, n), false).unwrap();
            let psi =
                GridFunction::from_fn(mesh.clone(), |p| (pi * p[0]).sin() * (pi * p[1]).sin())
                    .unwrap();
            let (a, _) = hardy_check(&psi).unwrap();
            let domain = *mesh.domain();
            let rho2 =
                GridFunction::from_fn(mesh, |p| domain.rho_unchecked(p).powi(2)).unwrap();
            let (_, b) = hardy_check(&rho2).unwrap();
            r1.push(a);
            r2.push(b);
        }
        for (name, pair) in [("r1", &r1), ("r2", &r2)] {
            assert!(pair.iter().all(|v| *v <= 10.0), "hardy {name} above 10: {pair:?}");
            let drift = (pair[0] - pair[1]).abs() / pair[1];
            assert!(drift < 0.10, "hardy {name} drift {drift:.3} above 10%");
        }

        // layer-trace constants across gamma and mesh refinement
        let mut per_mesh = Vec::new();
        for n in [128usize, 256] {
            let mesh = build_mesh(&DomainSpec::unit_square(), (n, n), false).unwrap();
            let u = GridFunction::from_fn(mesh, |p| (pi * p[0]).sin() * (2.0 * pi * p[1]).sin())
                .unwrap();
            let mut constants = Vec::new();
            for gamma in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
                let (c1, c2) = layer_trace_constants(&u, gamma).unwrap();
                assert!(c1 <= 10.0 && c2 <= 10.0, "layer constants c1 {c1:.2} c2 {c2:.2}");
                constants.push((c1, c2));
            }
            per_mesh.push(constants);
        }
        for k in 0..per_mesh[0].len() {
            let (a1, a2) = per_mesh[0][k];
            let (b1, b2) = per_mesh[1][k];
            for (a, b) in [(a1, b1), (a2, b2)] {
                if a.max(b) > 1e-12 {
                    let drift = (a - b).abs() / b.max(a);
                    assert!(drift < 0.10, "layer constant drift {drift:.3} above 10%");
                }
            }
        }

        // periodicity defect scales like eps within a factor 1.3
        let mut ratios = Vec::new();
        for inv_eps in [8usize, 16, 32] {
            let domain = DomainSpec::unit_square();
            let mesh = build_mesh(&domain, (inv_eps * 16, inv_eps * 16), false).unwrap();
            let lattice = classify_cells(&domain, 1.0 / inv_eps as f64).unwrap();
            let phi =
                GridFunction::from_fn(mesh, |p| (pi * p[0]).sin() * (pi * p[1]).sin()).unwrap();
            let defect = periodicity_defect(&phi, &lattice).unwrap();
            let total = (defect[0] * defect[0] + defect[1] * defect[1]).sqrt();
            ratios.push(total * inv_eps as f64);
        }
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo <= 1.3, "defect/eps ratios spread {ratios:?}");

        format!(
            "hardy r1 {:.2}/r2 {:.2}, layer constants <= 10, defect ratios within {:.3}",
            r1[1],
            r2[1],
            hi / lo
        )
    });
}

#[test]
fn criterion_11_deterministic_reports() {
    criterion(11, "byte-identical serial reports", || {
        let cfg = ExperimentConfig {
            coeff: "layered".into(),
            f: SourceSelector::Zero,
            g: BoundarySelector::Smooth,
            eps_list: vec![1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0],
            m: 8,
            cell_grid: 64,
            lift_grid: 64,
            h12_samples: 128,
            ..Default::default()
        };
        let dir = std::env::temp_dir().join("homoglab_acceptance_determinism");
        std::fs::create_dir_all(&dir).unwrap();
        let mut bytes = Vec::new();
        for run in 0..2 {
            let report = run_study(&cfg, StudyKind::Th1).unwrap();
            let path = dir.join(format!("run{run}.csv"));
            emit_report(&report, &path).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(bytes[0], bytes[1], "serial re-run changed the CSV bytes");
        format!("two serial runs produced {} identical bytes", bytes[0].len())
    });
}
