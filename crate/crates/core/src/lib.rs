//! Numerical core for a Stein-type universal Sobolev extension operator.
//!
//! The crate implements the classical extension construction on special
//! Lipschitz domains (epigraphs of Lipschitz functions) and on minimally
//! smooth domains (uniform Lipschitz patch descriptions), together with the
//! estimation machinery needed to exercise it numerically:
//!
//! * [`geometry`]: domain descriptors, rotations, ball coverings, regular
//!   coverings of patch families, and covering-cardinality diagnostics.
//! * [`regdist`]: a regularized distance built from a Whitney cube
//!   decomposition of the exterior, smooth with controlled derivative growth.
//! * [`kernel`]: a compactly supported weight on `[1, Λ]` with unit mass and a
//!   prescribed number of vanishing moments.
//! * [`calculus`]: chain-rule term enumeration for compositions
//!   `f(x̄, y + λh(x))`, finite differences, and a cone-supported mollifier.
//! * [`extension`]: the pointwise extension operator on special Lipschitz
//!   domains, its rotated variant, and the glued operator on minimally smooth
//!   domains via a partition of unity.
//! * [`morrey`]: generalized Morrey and Sobolev norm estimation on grids, a
//!   weighted Hardy-type inequality checker, and a slowly converging series
//!   bound used by the norm analysis.
//! * [`grid`]: uniformly sampled scalar fields with validity masks and
//!   stencil derivatives.
//!
//! All operations are deterministic: randomness is always drawn from caller
//! seeded generators, parallel reductions are order independent, and floating
//! point work has no data races.

pub mod analytic;
pub mod calculus;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod grid;
pub mod index;
pub mod kernel;
pub mod morrey;
pub mod quad;
pub mod regdist;

pub use error::{Error, Result};

pub mod prelude {
    //! Convenience re-exports of the most used types.
    pub use crate::analytic::{Gaussian, Polynomial, RadialPower, Sinusoid, SmoothFn};
    pub use crate::error::{Error, Result};
    pub use crate::extension::{ExtensionContext, GeneralExtension, PartitionOfUnity};
    pub use crate::geometry::{
        Ball, BallCover, LipschitzGraph, MinimallySmoothDomain, Point, Rotation,
        SpecialLipschitzDomain,
    };
    pub use crate::grid::{GridBox, GridField};
    pub use crate::index::MultiIndex;
    pub use crate::kernel::MomentKernel;
    pub use crate::morrey::{MorreySpec, NormEstimate, PhiFunction, Shape};
    pub use crate::regdist::{DistanceConstants, RegularizedDistance};
}
