//! Numerical verification of warped product geometry and conformal warped
//! product submersions in coordinate charts.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`); the aliases below fix `f64`, with `*32` variants for `f32`.

pub mod connection;
pub mod cws;
pub mod error;
pub mod geometry;
pub mod residual;
pub mod scalar;
pub mod scenarios;
pub mod submersion;
pub mod testfields;
pub mod verify;
pub mod warped;

pub use connection::{christoffel, covariant_derivative, lie_bracket, ChristoffelAt};
pub use cws::{CompatibilityReport, ConformalWarpedSubmersion, Item2Variant};
pub use error::{GeometryError, Result};
pub use geometry::{ChartManifold, DiffEngine, Domain, Point, ScalarField, Scheme, TangentVector, VectorField};
pub use residual::{Residual, ResidualReport};
pub use scalar::Real;
pub use submersion::{DilationEstimate, SmoothMap, SplitFrame, SubmersionContext};
pub use warped::{Factor, WarpedProduct};

pub type Manifold = ChartManifold<f64>;
pub type Manifold32 = ChartManifold<f32>;
pub type Engine = DiffEngine<f64>;
pub type Engine32 = DiffEngine<f32>;
pub type Field = VectorField<f64>;
pub type Field32 = VectorField<f32>;
pub type Scalar = ScalarField<f64>;
pub type Scalar32 = ScalarField<f32>;
pub type Map = SmoothMap<f64>;
pub type Map32 = SmoothMap<f32>;
pub type Submersion = SubmersionContext<f64>;
pub type Submersion32 = SubmersionContext<f32>;
pub type Warped = WarpedProduct<f64>;
pub type Warped32 = WarpedProduct<f32>;
pub type Cws = ConformalWarpedSubmersion<f64>;
pub type Cws32 = ConformalWarpedSubmersion<f32>;
