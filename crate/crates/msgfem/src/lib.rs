//! Multiscale spectral generalized finite elements (MS-GFEM) for scalar
//! diffusion `-div(a grad u) = f` on rectangles with circular inclusions.
//!
//! The pipeline runs mesh → coefficient → cover and partition of unity →
//! local hat extensions and particular solutions → spectral bases →
//! global Galerkin solve. Everything is generic over [`Scalar`]; the
//! `*64` aliases fix the scalar to `f64`.

pub mod error;
pub mod linalg;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub mod fem;
pub mod geometry;
pub mod local;
pub mod pou;
pub mod spectral;
pub mod global;

pub type Domain64 = geometry::Domain<f64>;
pub type Mesh64 = geometry::Mesh<f64>;
pub type InclusionSet64 = geometry::InclusionSet<f64>;
pub type CoefficientField64 = geometry::CoefficientField<f64>;
pub type RegionIndex64 = geometry::RegionIndex<f64>;
pub type Operator64 = fem::Operator<f64>;
pub type NodalField64 = fem::NodalField<f64>;
pub type BoundaryConditions64 = fem::BoundaryConditions<f64>;
pub type Cover64 = pou::Cover<f64>;
pub type PartitionOfUnity64 = pou::PartitionOfUnity<f64>;
pub type LocalSpace64 = local::LocalSpace<f64>;
pub type SpectralMatrices64 = spectral::SpectralMatrices<f64>;
pub type SpectralBasisSet64 = spectral::SpectralBasisSet<f64>;
pub type GlobalBasis64 = global::GlobalBasis<f64>;
pub type GlobalSolution64 = global::GlobalSolution<f64>;
pub type PatchData64 = global::PatchData<f64>;
