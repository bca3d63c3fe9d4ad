//! Local Maxwellians of the free-transport equation, the boundary conditions
//! they survive, and the symmetry classes of the domains that admit them.
//!
//! The library is organized around one pipeline:
//!
//! 1. [`geometry`] describes a domain (built-in shape or implicit surface from
//!    the [`surface`] expression DSL) and samples its boundary with normals.
//! 2. [`constraint`] turns a boundary condition (bounce-back or specular
//!    reflection) into a linear system over the Maxwellian parameter vector
//!    and extracts its nullspace by SVD rank detection.
//! 3. [`classify`] reads the nullspace structure back as a geometric symmetry
//!    class (half-space, slab, disk, cylinder, sphere, helical surface, ...).
//! 4. [`maxwellian`] evaluates the candidate densities and checks the
//!    transport PDE analytically; [`flows`] traces the symmetry generators and
//!    [`transport`] provides an independent particle-simulation oracle.
//!
//! The `eqkit` binary in this crate exposes the pipeline as CLI subcommands;
//! see [`cli`].

pub mod classify;
pub mod cli;
pub mod config;
pub mod constraint;
pub mod flows;
pub mod geometry;
pub mod maxwellian;
pub mod report;
pub mod skew;
pub mod surface;
pub mod transport;

pub use classify::{classify, SymmetryCase, SymmetryClass};
pub use constraint::{assemble, AdmissibleFamily, BcKind, ConstraintSystem};
pub use geometry::{BoundarySample, Domain, Shape};
pub use maxwellian::MaxwellianParams;
pub use skew::Skew;
pub use surface::SurfaceExpr;
