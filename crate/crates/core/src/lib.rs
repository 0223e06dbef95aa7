//! Linear Stokes and Navier–Stokes machinery on a periodic-in-tangent half space.

pub mod besov;
pub mod config;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod helmholtz;
pub mod io;
pub mod kernels;
pub mod ops;
pub mod oracle;
pub mod picard;
pub mod quadrature;
pub mod scenario;
pub mod spectral;
pub mod stokes;

pub use error::{Error, Result};
pub use field::{ScalarField, SymTensorField, Trajectory, VectorField};
pub use grid::{HalfSpaceGrid, TimeGrid};

/// The guide in `book/`, compiled so its snippets run as doc-tests.
#[doc(hidden)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    pub mod grids {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    pub mod kernels {}
    #[doc = include_str!("../../../book/src/helmholtz.md")]
    pub mod helmholtz {}
    #[doc = include_str!("../../../book/src/stokes.md")]
    pub mod stokes {}
    #[doc = include_str!("../../../book/src/besov.md")]
    pub mod besov {}
    #[doc = include_str!("../../../book/src/picard.md")]
    pub mod picard {}
    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
}
