//! Numerical companion for Fourier extension operators over rectangular
//! pieces of elliptic surfaces and the degenerate model surfaces
//! `g_β(ξ) = Σ |ξ_i|^{β_i}`.
//!
//! * [`exponents`]: exact `(1/p, 1/q)` arithmetic, scaling regimes and the
//!   predicted sidelength exponents.
//! * [`surface`]: surfaces with analytic derivatives, ellipticity deficits,
//!   parabolic rescaling, slicing and dicing.
//! * [`extension`]: midpoint-rule evaluation of the extension operator and
//!   strong / restricted-weak-type quotients.
//! * [`extremizers`]: Knapp caps, Perron-tree translations, the randomized
//!   Kakeya field and the Schwartz train.
//! * [`beta`]: heights, boundedness conditions, region boundaries and dyadic
//!   block sums for `g_β`.
//! * [`harness`]: sweep plans, exponent fits and reproducible configs.

pub mod beta;
pub mod error;
pub mod exponents;
pub mod extension;
pub mod extremizers;
pub mod harness;
pub mod rational;
pub mod surface;

pub use error::{Error, Result};
pub use exponents::{ExponentPair, ScalingRegime};
pub use rational::Rat;
pub use surface::{Sidelengths, Surface};
