//! Transformation theory of the Heun equation and the kernels of its
//! integral relations.
//!
//! The crate builds, as exact symbolic records, the group of 192
//! substitutions that preserve the form of the Heun equation (8
//! homotopic × 24 Möbius generators), the matching transformations for
//! integral-relation kernels, the Lambe-Ward and Erdélyi kernel
//! catalogs, and their confluent-Heun limits.  Every construction is
//! certified numerically: local solutions through operator residuals,
//! kernels through the residual of [M_x − M_y]G = 0, transformations by
//! applying them to Frobenius solutions.
//!
//! Layers, from the bottom up:
//!
//! * [`numerics`] — complex bivariate 2-jets; derivatives without symbolic calculus.
//! * [`specialfn`] — ₂F₁, Φ, Ψ and their local solution sets, generic over jets.
//! * [`heun_ops`] — the operators M_x, M̄_y, Frobenius solutions, concomitants.
//! * [`symbolic`] — exact rational-function algebra for group records.
//! * [`transform_group`] — the 192-element group and the 16-element confluent group.
//! * [`kernel_engine`] — kernel expression trees, residuals, samplers, equivalences.
//! * [`kernel_catalog`] — the concrete kernel families and their confluence limits.
//! * [`verify`] — reproducible verification suites and reports.

pub mod error;
pub mod heun_ops;
pub mod kernel_catalog;
pub mod kernel_engine;
pub mod numerics;
pub mod specialfn;
pub mod symbolic;
pub mod transform_group;
pub mod verify;

pub use error::{Error, Result};
pub use heun_ops::{CheParams, HeunParams};
pub use numerics::{Jet2, C64};
pub use specialfn::{ConfParams, HypParams};
