//! Command-line front end: cell problems, single solves, rate studies and
//! operator self-checks.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 solver failure,
//! 3 self-check failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use homoglab::cell::{homogenize, CoefficientField};
use homoglab::error::Error;
use homoglab::experiments::{
    emit_report, run_single, run_study, BoundarySelector, ConvergenceReport, ExperimentConfig,
    FitOutcome, ReportRow, SourceSelector, StudyKind, CSV_HEADER,
};
use homoglab::geometry::DomainSpec;
use homoglab::mesh_fem::build_mesh;
use homoglab::ops_check::run_suite;

#[derive(Parser)]
#[command(name = "homoglab", version, about = "periodic homogenization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problems and write the homogenized tensor as JSON.
    Cell {
        /// Coefficient family tag.
        #[arg(long)]
        coeff: String,
        /// Raster file (with --coeff raster).
        #[arg(long)]
        raster: Option<PathBuf>,
        /// Cell-mesh resolution per axis.
        #[arg(long, default_value_t = 128)]
        cell_grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one eps and write a single-row CSV.
    Solve {
        #[arg(long)]
        coeff: String,
        #[arg(long)]
        raster: Option<PathBuf>,
        #[arg(long)]
        eps: String,
        /// Elements per cell and axis.
        #[arg(long, default_value_t = 16)]
        m: usize,
        /// Source selector: zero | one | manufactured.
        #[arg(long, default_value = "zero")]
        f: String,
        /// Boundary selector: smooth | affine | rough-fourier | oscillating.
        #[arg(long, default_value = "smooth")]
        g: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a convergence study from a config file.
    Study {
        /// th3 | th1 | th65.
        kind: String,
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.csv / report.json; falls back to the
        /// config's out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an operator self-check suite.
    OpsCheck {
        /// unfolding | norms | geometry.
        #[arg(long)]
        suite: String,
        /// Tolerance for the exact discrete identities.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

#[derive(Serialize)]
struct TensorJson {
    n: usize,
    entries: [[f64; 2]; 2],
    cell_grid: usize,
    family: String,
}

fn parse_eps(s: &str) -> Result<f64, Error> {
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|e| Error::Config(format!("bad eps: {e}")))?;
        let d: f64 = den.trim().parse().map_err(|e| Error::Config(format!("bad eps: {e}")))?;
        Ok(n / d)
    } else {
        s.parse().map_err(|e| Error::Config(format!("bad eps: {e}")))
    }
}

fn coefficient(coeff: &str, raster: &Option<PathBuf>) -> Result<CoefficientField, Error> {
    if coeff == "raster" {
        let path = raster
            .as_ref()
            .ok_or_else(|| Error::Config("--coeff raster needs --raster FILE".into()))?;
        CoefficientField::from_raster_file(path)
    } else {
        CoefficientField::from_tag(coeff)
    }
}

fn cmd_cell(coeff: &str, raster: &Option<PathBuf>, cell_grid: usize, out: &PathBuf) -> Result<(), Error> {
    let field = coefficient(coeff, raster)?;
    let mesh = build_mesh(&DomainSpec::unit_square(), (cell_grid, cell_grid), true)?;
    let (_, tensor) = homogenize(&field, &mesh)?;
    let json = TensorJson {
        n: 2,
        entries: [
            [tensor.entry(0, 0), tensor.entry(0, 1)],
            [tensor.entry(1, 0), tensor.entry(1, 1)],
        ],
        cell_grid,
        family: field.family_tag().to_string(),
    };
    let text = serde_json::to_string_pretty(&json)
        .map_err(|e| Error::Study(format!("tensor serialization failed: {e}")))?;
    std::fs::write(out, text + "\n")?;
    println!(
        "tensor [[{:.12}, {:.12}], [{:.12}, {:.12}]] written to {}",
        tensor.entry(0, 0),
        tensor.entry(0, 1),
        tensor.entry(1, 0),
        tensor.entry(1, 1),
        out.display()
    );
    Ok(())
}

fn row_csv(row: &ReportRow) -> String {
    use homoglab::experiments::format_float as ff;
    format!(
        "{CSV_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
        ff(row.eps),
        ff(row.h),
        ff(row.l2_err),
        ff(row.h1rho_err),
        ff(row.h12_g),
        ff(row.hm12_proxy),
        row.iters_eps,
        row.iters_hom,
        ff(0.0),
    )
}

fn cmd_solve(
    coeff: &str,
    raster: &Option<PathBuf>,
    eps: &str,
    m: usize,
    f: &str,
    g: &str,
    out: &PathBuf,
) -> Result<(), Error> {
    let eps = parse_eps(eps)?;
    let cfg = ExperimentConfig {
        coeff: coeff.to_string(),
        raster: raster.clone(),
        eps_list: vec![eps],
        m,
        f: SourceSelector::parse(f)?,
        g: BoundarySelector::parse(g)?,
        ..Default::default()
    };
    cfg.validate()?;
    let kind = if cfg.g == BoundarySelector::Oscillating {
        StudyKind::Th65
    } else {
        StudyKind::Th3
    };
    let row = run_single(&cfg, kind, eps)?;
    std::fs::write(out, row_csv(&row))?;
    println!(
        "eps {:.6}: l2_err {:.6e}, h1rho_err {:.6e} ({} + {} iterations, {:.1} s)",
        row.eps, row.l2_err, row.h1rho_err, row.iters_eps, row.iters_hom, row.seconds
    );
    Ok(())
}

fn print_slopes(report: &ConvergenceReport) {
    for (name, outcome) in &report.slopes {
        match outcome {
            FitOutcome::Floor => println!("slope {name}: floor (errors at solver tolerance)"),
            FitOutcome::Fit { slope, max_log_residual, points_used, excluded } => println!(
                "slope {name}: {slope:.4} (max log-residual {max_log_residual:.2e}, \
                 {points_used} points, {excluded} excluded)"
            ),
        }
    }
    if let Some(dec) = report.hypothesis_decreasing {
        println!(
            "hypothesis eps^(1/2) ||g_eps||: {}",
            if dec { "strictly decreasing" } else { "NOT decreasing" }
        );
    }
}

fn cmd_study(kind: &str, config: &PathBuf, out: &Option<PathBuf>) -> Result<(), Error> {
    let kind = StudyKind::parse(kind)?;
    let text = std::fs::read_to_string(config)?;
    let cfg = ExperimentConfig::parse(&text)?;
    let out = out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))?;
    let report = run_study(&cfg, kind)?;
    std::fs::create_dir_all(&out)?;
    let csv_path = out.join("report.csv");
    emit_report(&report, &csv_path)?;
    for row in &report.rows {
        println!(
            "eps {:.6}: l2_err {:.6e}, h1rho_err {:.6e} ({:.1} s)",
            row.eps, row.l2_err, row.h1rho_err, row.seconds
        );
    }
    print_slopes(&report);
    println!("report written to {}", csv_path.display());
    Ok(())
}

fn cmd_ops_check(suite: &str, tol: f64) -> Result<bool, Error> {
    let results = run_suite(suite, tol)?;
    let mut all_ok = true;
    for r in &results {
        println!("{} {} {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail);
        all_ok &= r.passed;
    }
    Ok(all_ok)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::SolverDiverged { .. } => 2,
        Error::Study(msg) if msg.contains("diverged") => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; keep usage problems at exit 1
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Cell { coeff, raster, cell_grid, out } => {
            cmd_cell(coeff, raster, *cell_grid, out).map(|()| true)
        }
        Command::Solve { coeff, raster, eps, m, f, g, out } => {
            cmd_solve(coeff, raster, eps, *m, f, g, out).map(|()| true)
        }
        Command::Study { kind, config, out } => cmd_study(kind, config, out).map(|()| true),
        Command::OpsCheck { suite, tol } => cmd_ops_check(suite, *tol),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
