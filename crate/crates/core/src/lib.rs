//! Geometry of finite reflection groups and Monte Carlo simulation of the
//! Brownian motion reflected into a Weyl chamber.
//!
//! The crate is organized in four layers:
//!
//! * [`rootsys`] — construction and algebra of reduced root systems: the
//!   reflections, simple/positive systems, Gram matrix and its inverse, and
//!   the dual basis spanning the chamber.
//! * [`weyl`] — the reflection group itself: enumeration, projection onto the
//!   fundamental chamber (descent and brute-force routes), root orbits, and
//!   the normal-vector decomposition of the chamber's inward field.
//! * [`sim`] — path-level simulation: Brownian paths, their chamber
//!   projections, occupation-time estimators for the pushing process and
//!   one-dimensional local times, and skew constructions.
//! * [`analysis`] — ensemble statistics, convergence sweeps and the
//!   two-sample Kolmogorov–Smirnov machinery used by the verification suites.

pub mod analysis;
pub mod rootsys;
pub mod sim;
pub mod weyl;

pub use analysis::{ks_critical_5pct, ks_two_sample, StatReport};
pub use rootsys::{reflect, GramData, RootSystem, RootSystemError, RootSystemSpec};
pub use sim::{PathConfig, PushingEstimate, ReflectedPath, SimError, SkewConfig};
pub use weyl::{ChamberProjection, GroupElement, OrbitInfo, WeylError, WeylGroup};

/// Absolute tolerance for identities that hold exactly in the algebra
/// (root coordinates are small integers or surds, so accumulated rounding
/// stays far below this).
pub const ALGEBRA_TOL: f64 = 1e-10;

/// Tolerance for quantities assembled through longer floating-point chains
/// (group products, projection reconstruction).
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
