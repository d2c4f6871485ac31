//! Funk-Radon transforms over the hyperplanes tangent to a cam, their exact inversion on
//! hypersurfaces, and validators for the admissibility conditions.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases below fix `f64`.

pub mod conditions;
pub mod digest;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod inversion;
pub mod linalg;
pub mod scalar;
pub mod slicing;
pub mod sphere;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Cam64 = geometry::Cam<f64>;
pub type CamPoint64 = geometry::CamPoint<f64>;
pub type Hypersurface64 = geometry::Hypersurface<f64>;
pub type ParamBox64 = geometry::ParamBox<f64>;
pub type AffineMap64 = geometry::AffineMap<f64>;
pub type ScalarField64 = transform::ScalarField<f64>;
pub type Sinogram64 = transform::Sinogram<f64>;
pub type SampledSurface64 = slicing::SampledSurface<f64>;
pub type SliceSet64 = slicing::SliceSet<f64>;
pub type CamGrid64 = sphere::CamGrid<f64>;
