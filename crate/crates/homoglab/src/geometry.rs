//! Rectangle domains, boundary distance, eps-lattice bookkeeping, boundary
//! layers and the boundary cutoff construction.
//!
//! The domain is an axis-aligned rectangle (0,L1)x(0,L2) (or an interval in
//! dimension one), so the distance to the boundary has a closed form and the
//! convexity assumption behind the harmonic-lift estimates holds for free.

use crate::algebra::Vec2;
use crate::error::{Error, Result};
use crate::mesh_fem::{GridFunction, Mesh};

/// Relative slack used when comparing cell index bounds against L/eps.
/// It absorbs floating-point division noise and nothing more: a cell is
/// counted interior only if it is inside up to that slack.
const CELL_CLASSIFY_RTOL: f64 = 1e-12;

/// Axis-aligned rectangle (0,L1)x(0,L2), or the interval (0,L1) when the
/// dimension is one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    extents: [f64; 2],
    dim: usize,
}

impl DomainSpec {
    pub fn rectangle(l1: f64, l2: f64) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0) || !l1.is_finite() || !l2.is_finite() {
            return Err(Error::Parameter(format!(
                "rectangle extents must be positive finite, got ({l1}, {l2})"
            )));
        }
        Ok(Self { extents: [l1, l2], dim: 2 })
    }

    pub fn interval(l1: f64) -> Result<Self> {
        if !(l1 > 0.0) || !l1.is_finite() {
            return Err(Error::Parameter(format!(
                "interval extent must be positive finite, got {l1}"
            )));
        }
        Ok(Self { extents: [l1, 0.0], dim: 1 })
    }

    pub fn unit_square() -> Self {
        Self { extents: [1.0, 1.0], dim: 2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Extent along `axis`; panics if the axis does not exist in this dimension.
    pub fn extent(&self, axis: usize) -> f64 {
        assert!(axis < self.dim, "axis {axis} out of range for dim {}", self.dim);
        self.extents[axis]
    }

    pub fn min_extent(&self) -> f64 {
        (0..self.dim).map(|a| self.extents[a]).fold(f64::INFINITY, f64::min)
    }

    /// Lebesgue measure of the domain (length in 1d, area in 2d).
    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|a| self.extents[a]).product()
    }

    pub fn perimeter(&self) -> f64 {
        assert_eq!(self.dim, 2, "perimeter is a 2d notion");
        2.0 * (self.extents[0] + self.extents[1])
    }

    pub fn contains_closure(&self, p: Vec2) -> bool {
        (0..self.dim).all(|a| p[a] >= 0.0 && p[a] <= self.extents[a])
    }

    /// Distance from `p` to the boundary; for the rectangle this is the
    /// minimum of the face distances.
    pub fn distance_to_boundary(&self, p: Vec2) -> Result<f64> {
        if !self.contains_closure(p) {
            return Err(Error::OutsideDomain(p[0], p[1]));
        }
        Ok(self.rho_unchecked(p))
    }

    /// Same as [`distance_to_boundary`](Self::distance_to_boundary) without
    /// the containment check; used on quadrature points that are inside by
    /// construction.
    pub fn rho_unchecked(&self, p: Vec2) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..self.dim {
            d = d.min(p[a]).min(self.extents[a] - p[a]);
        }
        d
    }

    /// rho_eps(x) = min(1, rho(x)/eps), the clipped distance in [0,1].
    pub fn clipped_distance(&self, p: Vec2, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
        }
        let rho = self.distance_to_boundary(p)?;
        Ok((rho / eps).min(1.0))
    }

    /// Point on the boundary at counter-clockwise arclength `s` from the
    /// origin corner (wraps around the perimeter).
    pub fn boundary_point(&self, s: f64) -> Vec2 {
        assert_eq!(self.dim, 2, "boundary arclength is a 2d notion");
        let l1 = self.extents[0];
        let l2 = self.extents[1];
        let mut s = s.rem_euclid(self.perimeter());
        if s < l1 {
            return [s, 0.0];
        }
        s -= l1;
        if s < l2 {
            return [l1, s];
        }
        s -= l2;
        if s < l1 {
            return [l1 - s, l2];
        }
        s -= l1;
        [0.0, l2 - s]
    }
}

/// The eps-lattice of a rectangle: which cells eps*(xi + Y) lie inside the
/// domain, the covered region they union to, and the leftover boundary strip.
///
/// For a rectangle anchored at the origin the interior index set is a full
/// box [0,counts_1) x [0,counts_2), so the cell mask is stored implicitly.
#[derive(Debug, Clone)]
pub struct LatticeMap {
    domain: DomainSpec,
    eps: f64,
    counts: [usize; 2],
}

/// Classify the eps-cells of the lattice against the domain.
pub fn classify_cells(domain: &DomainSpec, eps: f64) -> Result<LatticeMap> {
    if !(eps > 0.0 && eps < domain.min_extent()) {
        return Err(Error::Parameter(format!(
            "need 0 < eps < min extent, got eps = {eps}"
        )));
    }
    let mut counts = [1usize; 2];
    for a in 0..domain.dim() {
        let ratio = domain.extent(a) / eps;
        counts[a] = (ratio * (1.0 + CELL_CLASSIFY_RTOL)).floor() as usize;
    }
    Ok(LatticeMap { domain: *domain, eps, counts })
}

impl LatticeMap {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Interior cell counts per axis (second entry is 1 in dimension one).
    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn n_interior(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_interior(&self, xi: [i64; 2]) -> bool {
        (0..self.domain.dim()).all(|a| xi[a] >= 0 && (xi[a] as usize) < self.counts[a])
            && (self.domain.dim() == 2 || xi[1] == 0)
    }

    /// Row-major iteration over the interior index set.
    pub fn interior_cells(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        let [c1, c2] = self.counts;
        (0..c2).flat_map(move |j| (0..c1).map(move |i| [i as i64, j as i64]))
    }

    /// Flat row-major index of an interior cell.
    pub fn flat_index(&self, xi: [i64; 2]) -> usize {
        debug_assert!(self.is_interior(xi));
        xi[1] as usize * self.counts[0] + xi[0] as usize
    }

    /// Lattice cell containing `p` (half-open convention [x] with {x} in Y).
    pub fn cell_of(&self, p: Vec2) -> [i64; 2] {
        [
            (p[0] / self.eps).floor() as i64,
            if self.domain.dim() == 2 { (p[1] / self.eps).floor() as i64 } else { 0 },
        ]
    }

    pub fn cell_origin(&self, xi: [i64; 2]) -> Vec2 {
        [self.eps * xi[0] as f64, self.eps * xi[1] as f64]
    }

    /// Measure of the covered region (union of interior cells).
    pub fn covered_measure(&self) -> f64 {
        let cell = self.eps.powi(self.domain.dim() as i32);
        self.n_interior() as f64 * cell
    }

    /// Measure of the remainder strip Lambda = Omega minus the covered region.
    pub fn remainder_measure(&self) -> f64 {
        self.domain.measure() - self.covered_measure()
    }

    /// True when the lattice tiles the domain exactly (no remainder strip).
    pub fn covers_exactly(&self) -> bool {
        (0..self.domain.dim())
            .all(|a| (self.counts[a] as f64 * self.eps - self.domain.extent(a)).abs()
                <= CELL_CLASSIFY_RTOL * self.domain.extent(a))
    }
}

/// Element/node membership flags for the boundary layer of width `gamma`.
///
/// An element belongs to the layer iff its barycenter satisfies rho < gamma;
/// a node belongs iff rho(node) < gamma.
#[derive(Debug, Clone)]
pub struct LayerMask {
    pub gamma: f64,
    pub element_in_layer: Vec<bool>,
    pub node_in_layer: Vec<bool>,
}

pub fn boundary_layer_mask(mesh: &Mesh, gamma: f64) -> Result<LayerMask> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    let domain = mesh.domain();
    let element_in_layer = (0..mesh.n_elements())
        .map(|e| domain.rho_unchecked(mesh.element_barycenter(e)) < gamma)
        .collect();
    let node_in_layer = (0..mesh.n_nodes())
        .map(|n| domain.rho_unchecked(mesh.node_position(n)) < gamma)
        .collect();
    Ok(LayerMask { gamma, element_in_layer, node_in_layer })
}

/// Multiply a field vanishing on the boundary by the cutoff
/// (rho(x) - 6 sqrt(n) eps)^+ / rho(x), which kills it on the strip of width
/// 6 sqrt(n) eps and leaves it untouched well inside.
pub fn cutoff_multiplier(phi: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let mesh = phi.mesh();
    if mesh.periodic() {
        return Err(Error::Input("cutoff_multiplier expects a domain mesh".into()));
    }
    let scale = phi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * (1.0 + scale);
    for &n in mesh.boundary_node_ids().iter() {
        if phi.values()[n].abs() > tol {
            return Err(Error::Precondition(format!(
                "field must vanish on the boundary; node {n} has value {}",
                phi.values()[n]
            )));
        }
    }
    let domain = mesh.domain();
    let width = 6.0 * (domain.dim() as f64).sqrt() * eps;
    let values = (0..mesh.n_nodes())
        .map(|n| {
            let rho = domain.rho_unchecked(mesh.node_position(n));
            if rho <= width {
                0.0
            } else {
                (rho - width) / rho * phi.values()[n]
            }
        })
        .collect();
    GridFunction::from_values(mesh.clone(), values)
}
