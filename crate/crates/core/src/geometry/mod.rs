//! Cams, hypersurfaces and the generating function Φ.

mod affine;
mod cam;
mod surface;

pub use affine::{affine_pushforward, AffineMap, MetricTransport};
pub use cam::{cam_measure_density, phi, phi_prime, Cam, CamPoint, CamVariant, LevelForm};
pub use surface::{
    finite_difference_partials, grad_x_phi_cotangent_norm, second_partials_or_fd, Chart, ConformalFactor,
    Hypersurface, LocalGeometry, Metric, MetricField, ParamBox, QuadraticGraph, StereographicPatch,
    TransformedChart,
};
#[allow(unused_imports)]
pub(crate) use surface::{cotangent_norm, induced_metric};
