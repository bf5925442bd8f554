//! Flat surfaces with conical singularities: construction from polygon
//! gluings, Delaunay triangulations and metric invariants, Veech's area form,
//! the five cone-point surgeries, and the combinatorics of the codimension-1
//! strata of the moduli spaces of flat tori.

pub mod angles;
pub mod chyp;
pub mod delaunay;
pub mod isometry;
pub mod metrics;
pub mod strata;
pub mod surface;
pub mod surgery;
pub mod veech;

pub use angles::{AngleDatum, LeafLabel, RationalAngle};
pub use surface::{FlatSurface, C64};

/// Errors are split by cause; the CLI maps them onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input: bad syntax, missing fields, inconsistent indices.
    #[error("input error: {0}")]
    Input(String),
    /// Well-formed input violating a mathematical precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Numerical breakdown: degenerate triangles, non-terminating loops.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) => 2,
            Error::Precondition(_) => 3,
            Error::Degenerate(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/surfaces.md")]
    mod surfaces {}
    #[doc = include_str!("../../../book/src/delaunay.md")]
    mod delaunay {}
    #[doc = include_str!("../../../book/src/area-form.md")]
    mod area_form {}
    #[doc = include_str!("../../../book/src/surgeries.md")]
    mod surgeries {}
    #[doc = include_str!("../../../book/src/strata.md")]
    mod strata {}
    #[doc = include_str!("../../../book/src/complex-hyperbolic.md")]
    mod complex_hyperbolic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
