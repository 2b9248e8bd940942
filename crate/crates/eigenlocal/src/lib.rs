//! Spectral geometry toolkit for localized low-frequency Laplacian
//! eigenfunctions on composite planar domains.
//!
//! The pipeline builds a two-room domain with a reflection-symmetric room
//! joined to a second room through an aperture of height `h`, triangulates
//! it, assembles P1 stiffness/mass matrices for the Neumann (or Dirichlet)
//! eigenproblem `K u = lambda M u`, solves for the low end of the spectrum,
//! classifies modes by reflection parity, measures how much mass escapes the
//! symmetric room, and fits the decay of that leakage against the aperture
//! size as a power law.

pub mod error;
pub mod geometry;
pub mod mesh;
pub mod sparse;
pub mod fem;
pub mod eigensolver;
pub mod symmetry;
pub mod localization;
pub mod sweep;
pub mod render;
pub mod cli;

mod delaunay;

pub use error::{Error, Result};
pub use geometry::{DomainFamily, DomainSpec, Point2, PolygonRegion, ReflectionLine};
pub use mesh::{Mesh, RegionTag};
pub use sparse::SparseSymMatrix;
pub use eigensolver::EigenBasis;
pub use localization::LocalizationReport;
pub use sweep::{PowerLawFit, SweepResult};
