//! Derivative-free optimization over manifolds cut out by triangular systems
//! of polynomial equations.
//!
//! The pipeline: parse polynomials with exact rational coefficients
//! ([`poly`]), validate the triangular structure and split the variables into
//! retained and eliminated sets ([`triangular`]), move on the reduced
//! manifold with tangent projections and lift back to the full one
//! ([`geometry`], [`geodesics`]), and minimize with probabilistic descent
//! ([`descent`]). [`cli`] wraps it all for batch use.

pub mod cli;
pub mod descent;
pub mod geodesics;
pub mod geometry;
pub mod poly;
pub mod triangular;
