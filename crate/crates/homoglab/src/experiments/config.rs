//! Study configuration: typed fields, defaults, and the flat `key = value`
//! config-file format (unknown keys are errors).

use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};

/// Volume source selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceSelector {
    Zero,
    One,
    /// 2 pi^2 sin(pi x1) sin(pi x2), the manufactured load of the unit square.
    Manufactured,
}

impl SourceSelector {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "one" => Ok(Self::One),
            "manufactured" => Ok(Self::Manufactured),
            other => Err(Error::Config(format!(
                "unknown source selector '{other}' (zero | one | manufactured)"
            ))),
        }
    }
}

/// Boundary-data selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySelector {
    /// Trace of x1^2 - x2^2.
    Smooth,
    /// Trace of x2.
    Affine,
    /// Fourier sum with k^(-alpha) decay, k = 1..k_max.
    RoughFourier,
    /// Smooth base plus an eps-dependent oscillation of amplitude eps^beta.
    Oscillating,
}

impl BoundarySelector {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Self::Smooth),
            "affine" => Ok(Self::Affine),
            "rough-fourier" => Ok(Self::RoughFourier),
            "oscillating" => Ok(Self::Oscillating),
            other => Err(Error::Config(format!(
                "unknown boundary selector '{other}' \
                 (smooth | affine | rough-fourier | oscillating)"
            ))),
        }
    }
}

/// Which theorem a study exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    /// Error against the homogenized solution with a volume source.
    Th3,
    /// Source-free oscillating problem against the harmonic lift.
    Th1,
    /// Oscillating boundary-data family.
    Th65,
}

impl StudyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "th3" => Ok(Self::Th3),
            "th1" => Ok(Self::Th1),
            "th65" => Ok(Self::Th65),
            other => Err(Error::Config(format!("unknown study '{other}' (th3 | th1 | th65)"))),
        }
    }
}

/// Everything a study run needs. Config files use exactly these field names.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    /// Coefficient family tag.
    pub coeff: String,
    /// Raster file, only with `coeff = raster`.
    pub raster: Option<PathBuf>,
    pub l1: f64,
    pub l2: f64,
    /// Dyadic fractions of min(l1, l2), decreasing.
    pub eps_list: Vec<f64>,
    /// Elements per cell and axis.
    pub m: usize,
    /// Cell-mesh resolution per axis.
    pub cell_grid: usize,
    pub f: SourceSelector,
    pub g: BoundarySelector,
    /// Fourier decay exponent of the rough family.
    pub alpha: f64,
    /// Number of Fourier modes of the rough family.
    pub k_max: usize,
    /// Oscillation amplitude exponent of the oscillating family.
    pub beta: f64,
    /// Oscillation amplitude prefactor (0 degenerates to the base data).
    pub amplitude: f64,
    pub tol: f64,
    pub max_iterations: usize,
    /// Resolution of the fixed lifting mesh behind the negative-norm proxy.
    pub lift_grid: usize,
    /// Boundary sample count for the fractional boundary norm.
    pub h12_samples: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            coeff: "isotropic-sin".into(),
            raster: None,
            l1: 1.0,
            l2: 1.0,
            eps_list: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            m: 16,
            cell_grid: 128,
            f: SourceSelector::Zero,
            g: BoundarySelector::Smooth,
            alpha: 1.1,
            k_max: 64,
            beta: 0.25,
            amplitude: 1.0,
            tol: 1e-10,
            max_iterations: 50_000,
            lift_grid: 256,
            h12_samples: 512,
            out_dir: None,
        }
    }
}

fn parse_eps_token(tok: &str) -> Result<f64> {
    let tok = tok.trim();
    if let Some((num, den)) = tok.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|e| Error::Config(format!("bad eps '{tok}': {e}")))?;
        let d: f64 = den.trim().parse().map_err(|e| Error::Config(format!("bad eps '{tok}': {e}")))?;
        if d == 0.0 {
            return Err(Error::Config(format!("bad eps '{tok}': zero denominator")));
        }
        Ok(n / d)
    } else {
        tok.parse().map_err(|e| Error::Config(format!("bad eps '{tok}': {e}")))
    }
}

impl ExperimentConfig {
    /// Parse the flat `key = value` format. Lines starting with `#` and
    /// blank lines are ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |e: &dyn std::fmt::Display| {
                Error::Config(format!("line {}: bad value for '{key}': {e}", lineno + 1))
            };
            match key {
                "coeff" => cfg.coeff = value.to_string(),
                "raster" => cfg.raster = Some(PathBuf::from(value)),
                "l1" => cfg.l1 = value.parse().map_err(|e| bad(&e))?,
                "l2" => cfg.l2 = value.parse().map_err(|e| bad(&e))?,
                "eps_list" => {
                    cfg.eps_list = value
                        .split(',')
                        .map(parse_eps_token)
                        .collect::<Result<Vec<_>>>()?;
                }
                "m" => cfg.m = value.parse().map_err(|e| bad(&e))?,
                "cell_grid" => cfg.cell_grid = value.parse().map_err(|e| bad(&e))?,
                "f" => cfg.f = SourceSelector::parse(value)?,
                "g" => cfg.g = BoundarySelector::parse(value)?,
                "alpha" => cfg.alpha = value.parse().map_err(|e| bad(&e))?,
                "k_max" => cfg.k_max = value.parse().map_err(|e| bad(&e))?,
                "beta" => cfg.beta = value.parse().map_err(|e| bad(&e))?,
                "amplitude" => cfg.amplitude = value.parse().map_err(|e| bad(&e))?,
                "tol" => cfg.tol = value.parse().map_err(|e| bad(&e))?,
                "max_iterations" => cfg.max_iterations = value.parse().map_err(|e| bad(&e))?,
                "lift_grid" => cfg.lift_grid = value.parse().map_err(|e| bad(&e))?,
                "h12_samples" => cfg.h12_samples = value.parse().map_err(|e| bad(&e))?,
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1)))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l1 > 0.0 && self.l2 > 0.0) {
            return Err(Error::Config("domain extents must be positive".into()));
        }
        if self.eps_list.is_empty() {
            return Err(Error::Config("eps_list must not be empty".into()));
        }
        let min_extent = self.l1.min(self.l2);
        for &eps in &self.eps_list {
            if !(eps > 0.0 && eps < min_extent) {
                return Err(Error::Config(format!("eps {eps} outside (0, min extent)")));
            }
            let ratio = min_extent / eps;
            let log2 = ratio.log2();
            if (log2 - log2.round()).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "eps {eps} is not a dyadic fraction of the min extent {min_extent}"
                )));
            }
        }
        if self.m < 8 {
            return Err(Error::Config(format!("m must be at least 8, got {}", self.m)));
        }
        if self.cell_grid < 64 {
            return Err(Error::Config(format!(
                "cell_grid must be at least 64, got {}",
                self.cell_grid
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0,1), got {}", self.tol)));
        }
        if self.lift_grid < 8 || self.h12_samples < 8 {
            return Err(Error::Config("lift_grid and h12_samples must be at least 8".into()));
        }
        Ok(())
    }

    /// A small config for unit-scale smoke runs (looser floors do not apply
    /// to the validated public entry points).
    #[cfg(test)]
    pub(crate) fn small_for_tests() -> Self {
        Self {
            coeff: "layered".into(),
            eps_list: vec![1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0],
            m: 8,
            cell_grid: 64,
            lift_grid: 64,
            h12_samples: 128,
            ..Default::default()
        }
    }
}
