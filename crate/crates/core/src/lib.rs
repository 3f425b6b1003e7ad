//! Constrained gradient flow for the prescribed Gaussian curvature problem on
//! closed triangulated surfaces with conical singularities.
//!
//! The pipeline is: build a [`geometry::ConicalMesh`], derive its
//! [`geometry::BackgroundMetric`] (uniformizing it to constant curvature when
//! needed, see [`uniformize`]), assemble [`operators::OperatorPair`], seed an
//! initial conformal factor on the constraint hypersurface and integrate the
//! projected Sobolev gradient flow in [`flow`].

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod field;
pub mod flow;
pub mod functionals;
pub mod generators;
pub mod geometry;
pub mod linalg;
pub mod meshio;
pub mod operators;
pub mod pipeline;
pub mod uniformize;

pub use error::{Error, Result};
pub use field::ScalarField;
