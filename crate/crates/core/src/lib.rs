//! Geometric invariants of asymptotically Euclidean initial data sets and
//! asymptotic foliations by surfaces of constant (spacetime) mean curvature.
//!
//! The crate evaluates analytic initial data families `(g, K)` in asymptotic
//! Cartesian coordinates, computes pointwise curvature quantities and
//! constraint densities, integrates ADM-type charges (energy, linear momentum,
//! mass, centers of mass, angular momenta) over coordinate spheres with
//! radius-ladder extrapolation, and solves for individual CMC / STCMC /
//! constant-expansion leaves with a spectral Newton method, sweeping the leaf
//! parameter to build asymptotic foliations and center-of-mass series.
//!
//! Entry points:
//! - [`idata::DataFamily`] — the analytic families and their evaluation,
//! - [`charges::charge_ladder`] — charge integrals and extrapolated limits,
//! - [`foliation::sweep`] — foliations and barycenter series,
//! - [`surfaces::surface_geometry`] — geometry of a single sphere graph.
//!
//! The companion guide under `book/` walks through the concepts chapter by
//! chapter; its code snippets are compiled and run as doc-tests via the
//! [`book`] module.

pub mod charges;
pub mod curvature;
pub mod diff;
pub mod error;
pub mod fit;
pub mod foliation;
pub mod idata;
pub mod report;
pub mod sphere;
pub mod surfaces;
pub mod tensor;
pub mod verify;

pub use error::Error;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// The narrative guide, compiled as doc-tests.
///
/// Each chapter of `book/` is included verbatim so that `cargo test --doc`
/// runs every code snippet the guide shows. A snippet that drifts out of sync
/// with the library fails the build.
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/initial-data.md")]
    pub mod initial_data {}
    #[doc = include_str!("../../../book/src/curvature.md")]
    pub mod curvature {}
    #[doc = include_str!("../../../book/src/charges.md")]
    pub mod charges {}
    #[doc = include_str!("../../../book/src/surfaces.md")]
    pub mod surfaces {}
    #[doc = include_str!("../../../book/src/foliations.md")]
    pub mod foliations {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
