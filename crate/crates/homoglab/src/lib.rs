//! A numerical laboratory for periodic homogenization with non-homogeneous
//! Dirichlet data on rectangles: cell problems and homogenized tensors,
//! oscillating and homogenized Dirichlet solves, the unfolding / averaging /
//! scale-splitting operators with their exact discrete identities, weighted
//! norms and inequality audits, and convergence-rate studies.

pub mod algebra;
pub mod cell;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod mesh_fem;
pub mod norms;
pub mod ops_check;
pub mod rng;
pub mod unfolding;

pub use error::{Error, Result};
