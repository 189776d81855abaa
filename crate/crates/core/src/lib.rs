//! Discrete Koenigs nets and discrete isothermic nets on finite windows of Z^m.
//!
//! The crate is organised bottom-up:
//!
//! * [`geom`]: points, Minkowski vectors, diagonal intersections, cross-ratios
//!   and rank-based incidence predicates.
//! * [`qnet`]: lattice windows, quad and hexahedron enumeration, Q-net checks.
//! * [`koenigs`]: the diagonal one-form, the vertex function nu, dual nets,
//!   Moutard lifts and the projective characterizations.
//! * [`isothermic`]: circular Koenigs nets, factorized cross-ratios, the
//!   discrete metric, Christoffel transforms and light-cone lifts.
//! * [`generate`]: seeded random generators for all of the above.

// `!(r <= tol)` is used on purpose so that NaN residuals fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod generate;
pub mod geom;
pub mod isothermic;
pub mod koenigs;
pub mod qnet;

pub use error::{Error, Result, Site};
pub use geom::{MinkowskiVec, PlanarQuad, Point, Tolerances};
pub use qnet::{EdgeLabelling, Lattice, Parity, QNet, VertexScalar};
