//! Sub/supersolution barriers, monotone iteration and Picard fixed points
//! for singular p-Laplacian systems with convection terms
//!
//! ```text
//!     −Δ_p u = f(x, u, v, ∇u, ∇v),   −Δ_q v = g(x, u, v, ∇u, ∇v)   in Ω,
//!     u = v = 0 on ∂Ω,
//! ```
//!
//! discretized with P1 finite elements on structured meshes of an interval
//! or a rectangle. All numerical code is generic over [`Real`]; the aliases
//! below fix the scalar to `f64` or `f32`.

// `!(x > 0)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auxiliary;
pub mod banded;
pub mod barriers;
pub mod eigen;
pub mod error;
pub mod fixedpoint;
pub mod hypotheses;
pub mod io;
pub mod mesh;
pub mod plap;
pub mod real;

pub use error::{Error, Result};
pub use mesh::{build_mesh, Domain, DomainKind};
pub use real::Real;

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type Field64 = mesh::ScalarField<f64>;
pub type Field32 = mesh::ScalarField<f32>;
pub type EigenPair64 = eigen::EigenPair<f64>;
pub type BarrierPair64 = barriers::BarrierPair<f64>;
pub type BarrierPair32 = barriers::BarrierPair<f32>;
pub type Spec64 = hypotheses::NonlinearitySpec<f64>;
pub type SolutionReport64 = fixedpoint::SolutionReport<f64>;
