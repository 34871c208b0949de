//! Numerical laboratory for Ricci flow on rotationally symmetric
//! asymptotically Euclidean manifolds.
//!
//! The metric under study is g = phi^2 dr^2 + psi^2 g_(S^(n-1)) on R^n,
//! discretized on a stretched radial grid.  The crate provides the
//! geometry layer (curvature, distance, volume, weighted norms, ADM mass),
//! the rotationally symmetric Ricci flow integrator with its monitor
//! suite, Perelman's mu-functional on a fixed profile, heat-kernel
//! probes (Li-Yau, Harnack, decay), and gradient-soliton residuals.
//!
//! Conventions used throughout:
//! - s denotes arclength from the center, ds = phi dr;
//! - K_rad = -psi_ss / psi and K_sph = (1 - psi_s^2) / psi^2 are the
//!   sectional curvatures of planes containing / orthogonal to the
//!   radial direction;
//! - the curvature-norm convention is |Rm|^2 = 2(n-1) K_rad^2
//!   + (n-1)(n-2) K_sph^2.

pub mod banded;
pub mod chart;
pub mod curvature;
pub mod entropy;
pub mod fit;
pub mod flow;
pub mod grid;
pub mod heat;
pub mod mass;
pub mod measure;
pub mod noncollapse;
pub mod profile;
pub mod quad;
pub mod soliton;
pub mod stencil;
pub mod weighted;

pub use grid::{Mapping, RadialGrid};
pub use profile::{MetricProfile, ProfileError};
