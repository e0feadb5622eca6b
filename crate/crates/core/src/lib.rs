//! Riemannian descent methods with checkable convergence certificates, and an
//! accelerated scheme that lifts any such method.

// `!(a < b)` comparisons are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceleration;
pub mod descent;
pub mod error;
pub mod geometry;
pub mod objectives;

pub use error::{Error, Result};
pub use geometry::{DomainSpec, GeometryError, Manifold, Point, Tangent};
pub use objectives::{KnownSolution, Objective, ObjectiveMetadata};
