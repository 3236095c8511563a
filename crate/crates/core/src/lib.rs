//! Apple and lemon spindle-torus Radon transforms.
//!
//! The crate covers the forward transforms over the full seven-parameter
//! family and the translated three-parameter family, an exact discrete
//! adjoint, Landweber reconstruction, closed-form microlocal quantities
//! (phase derivatives, left projections, Jacobian determinants) with
//! finite-difference oracles, artifact prediction and a numerical
//! wavefront-set detector.
//!
//! Geometry, transforms, phantoms, microlocal closed forms and
//! reconstruction are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for callers that do not care.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod io;
pub mod microlocal;
pub mod oracle;
pub mod phantoms;
pub mod recon;
pub mod scalar;
pub mod transforms;
pub mod verify;
pub mod wavefront;

pub use error::{Error, Result};
pub use geometry::{
    grad_psi, in_parameter_set_y, parametrize_surface, psi, psi_expanded, rotation_matrix,
    scalar_fields, singular_points, LocalFrame, QuadratureSpec, RegionPredicate, SurfaceKind,
    SurfacePoint, SurfaceQuadrature, TorusParams,
};
pub use phantoms::{Component, ComponentKind, PhantomSpec, Region};
pub use scalar::{Mat3, Real, Vec3};
pub use transforms::{
    adjoint_project, apple_transform, forward_project, lemon_transform, restricted_transform,
    DataGrid, GridSpec, ProjectionParams, RestrictedParams, ScalarField, SystemMatrix, VoxelGrid,
};

pub type TorusParams64 = TorusParams<f64>;
pub type TorusParams32 = TorusParams<f32>;
pub type RestrictedParams64 = RestrictedParams<f64>;
pub type RestrictedParams32 = RestrictedParams<f32>;
pub type VoxelGrid64 = VoxelGrid<f64>;
pub type VoxelGrid32 = VoxelGrid<f32>;
pub type GridSpec64 = GridSpec<f64>;
pub type GridSpec32 = GridSpec<f32>;
pub type DataGrid64 = DataGrid<f64>;
pub type DataGrid32 = DataGrid<f32>;
pub type PhantomSpec64 = PhantomSpec<f64>;
pub type PhantomSpec32 = PhantomSpec<f32>;
