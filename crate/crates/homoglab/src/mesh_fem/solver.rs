//! Diagonally preconditioned Krylov solvers: conjugate gradients for
//! symmetric systems, BiCGStab for the non-symmetric ones.
//!
//! Systems flagged zero-mean (periodic cell problems) are solved in the
//! complement of constants: the right-hand side is projected and the
//! returned vector has its mean re-projected to zero.

use crate::error::{Error, Result};
use crate::mesh_fem::assembly::{project_zero_mean, Constraint, LinearSystem};
use crate::mesh_fem::mesh::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Pick from the symmetry of the assembled system.
    Auto,
    ConjugateGradient,
    BiCgStab,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Relative residual tolerance |r| / |b|.
    pub tol: f64,
    pub max_iterations: usize,
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50_000,
            method: SolverMethod::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Parameter(format!(
                "solver tolerance must lie in (0,1), got {}",
                self.tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve the system and wrap the unknowns as a grid function on its mesh.
pub fn solve(system: &LinearSystem, config: &SolverConfig) -> Result<(GridFunction, SolveInfo)> {
    config.validate()?;
    let zero_mean = system.constraint == Constraint::ZeroMean;
    let mut b = system.rhs.clone();
    if zero_mean {
        project_zero_mean(&mut b);
    }

    let symmetric = system.symmetric_hint();
    let use_cg = match config.method {
        SolverMethod::Auto => symmetric,
        SolverMethod::ConjugateGradient => true,
        SolverMethod::BiCgStab => false,
    };

    let (mut x, info) = if use_cg {
        cg(system, &b, config, |_| {})?
    } else {
        bicgstab(system, &b, config)?
    };
    if zero_mean {
        project_zero_mean(&mut x);
    }
    Ok((GridFunction::from_values(system.mesh().clone(), x)?, info))
}

/// Jacobi preconditioner application.
fn apply_jacobi(inv_diag: &[f64], r: &[f64], z: &mut [f64]) {
    for i in 0..r.len() {
        z[i] = inv_diag[i] * r[i];
    }
}

fn inverse_diagonal(system: &LinearSystem) -> Result<Vec<f64>> {
    system
        .matrix
        .diagonal()
        .into_iter()
        .map(|d| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::Input(format!("non-positive diagonal entry {d}")))
            }
        })
        .collect()
}

/// Preconditioned conjugate gradients. The callback sees every iterate; the
/// public path passes a no-op.
pub(crate) fn cg(
    system: &LinearSystem,
    b: &[f64],
    config: &SolverConfig,
    mut on_iterate: impl FnMut(&[f64]),
) -> Result<(Vec<f64>, SolveInfo)> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveInfo { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag = inverse_diagonal(system)?;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    apply_jacobi(&inv_diag, &r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=config.max_iterations {
        system.matrix.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::SolverDiverged {
                residual: norm(&r) / b_norm,
                iterations: it,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        on_iterate(&x);
        let rel = norm(&r) / b_norm;
        if rel <= config.tol {
            return Ok((x, SolveInfo { iterations: it, relative_residual: rel }));
        }
        apply_jacobi(&inv_diag, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDiverged {
        residual: norm(&r) / b_norm,
        iterations: config.max_iterations,
    })
}

/// Preconditioned BiCGStab (transpose-free).
fn bicgstab(
    system: &LinearSystem,
    b: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveInfo)> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveInfo { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag = inverse_diagonal(system)?;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_shadow = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    for it in 1..=config.max_iterations {
        let rho_new = dot(&r_shadow, &r);
        if rho_new.abs() < f64::MIN_POSITIVE * 1e10 {
            return Err(Error::SolverDiverged {
                residual: norm(&r) / b_norm,
                iterations: it,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply_jacobi(&inv_diag, &p, &mut p_hat);
        system.matrix.mul_vec(&p_hat, &mut v);
        alpha = rho / dot(&r_shadow, &v);
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        if norm(&s) / b_norm <= config.tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            let rel = norm(&s) / b_norm;
            return Ok((x, SolveInfo { iterations: it, relative_residual: rel }));
        }
        apply_jacobi(&inv_diag, &s, &mut s_hat);
        system.matrix.mul_vec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::SolverDiverged {
                residual: norm(&s) / b_norm,
                iterations: it,
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm(&r) / b_norm;
        if rel <= config.tol {
            return Ok((x, SolveInfo { iterations: it, relative_residual: rel }));
        }
        if omega == 0.0 {
            return Err(Error::SolverDiverged { residual: rel, iterations: it });
        }
    }
    Err(Error::SolverDiverged {
        residual: norm(&r) / b_norm,
        iterations: config.max_iterations,
    })
}
