//! Boundary-data families: fixed traces, rough Fourier sums, and the
//! eps-indexed oscillating family whose fractional norm is allowed to blow
//! up while eps^{1/2} ||g_eps|| tends to zero.

use std::f64::consts::PI;

use crate::algebra::Vec2;
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

use super::config::{BoundarySelector, ExperimentConfig};

/// Point on the boundary at counter-clockwise arclength `s` from the origin.
pub fn arclength_to_point(domain: &DomainSpec, s: f64) -> Vec2 {
    domain.boundary_point(s)
}

/// One concrete boundary datum: evaluable at any boundary point given both
/// its arclength coordinate and position.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    selector: BoundarySelector,
    alpha: f64,
    k_max: usize,
    /// Oscillation (amplitude prefactor, eps^beta, integer cycle count);
    /// absent for the fixed families or when this instance is the base datum.
    oscillation: Option<(f64, usize)>,
    perimeter: f64,
}

impl BoundaryData {
    /// The eps-independent base datum of the config.
    pub fn base(cfg: &ExperimentConfig, domain: &DomainSpec) -> BoundaryData {
        BoundaryData {
            selector: match cfg.g {
                // the oscillating family rides on the smooth base
                BoundarySelector::Oscillating => BoundarySelector::Smooth,
                other => other,
            },
            alpha: cfg.alpha,
            k_max: cfg.k_max,
            oscillation: None,
            perimeter: domain.perimeter(),
        }
    }

    /// The datum used at scale `eps`: the base unless the config selects the
    /// oscillating family, in which case the eps-oscillation is added with
    /// its frequency snapped to an integer number of periods per perimeter.
    pub fn at_eps(cfg: &ExperimentConfig, domain: &DomainSpec, eps: f64) -> Result<BoundaryData> {
        let mut data = Self::base(cfg, domain);
        if cfg.g == BoundarySelector::Oscillating {
            if !(eps > 0.0) {
                return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
            }
            let cycles = (1.0 / eps).round().max(1.0) as usize;
            data.oscillation = Some((cfg.amplitude * eps.powf(cfg.beta), cycles));
        }
        Ok(data)
    }

    /// Evaluate at a boundary point given its arclength and position.
    pub fn eval(&self, s: f64, p: Vec2) -> f64 {
        let base = match self.selector {
            BoundarySelector::Smooth => p[0] * p[0] - p[1] * p[1],
            BoundarySelector::Affine => p[1],
            BoundarySelector::RoughFourier => (1..=self.k_max)
                .map(|k| {
                    (k as f64).powf(-self.alpha)
                        * (2.0 * PI * k as f64 * s / self.perimeter).sin()
                })
                .sum(),
            BoundarySelector::Oscillating => unreachable!("oscillating rides on a base selector"),
        };
        match self.oscillation {
            Some((amp, cycles)) => {
                base + amp * (2.0 * PI * cycles as f64 * s / self.perimeter).sin()
            }
            None => base,
        }
    }

    /// Samples at `b` equispaced arclength points (the fractional-norm grid).
    pub fn sample_arclength(&self, domain: &DomainSpec, b: usize) -> Vec<f64> {
        let perimeter = domain.perimeter();
        (0..b)
            .map(|i| {
                let s = perimeter * i as f64 / b as f64;
                self.eval(s, arclength_to_point(domain, s))
            })
            .collect()
    }

    /// Nodal trace on a mesh of the domain.
    pub fn trace_on(&self, mesh: &crate::mesh_fem::Mesh) -> Vec<(usize, f64)> {
        mesh.boundary_nodes()
            .iter()
            .map(|bn| (bn.node, self.eval(bn.arclength, bn.position)))
            .collect()
    }
}
