use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

use super::cam::Cam;
use super::surface::{Hypersurface, Metric, TransformedChart};

/// Invertible affine map `x ↦ Lx + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap<T> {
    linear: Mat<T>,
    translation: Vec<T>,
    inverse_linear: Mat<T>,
}

impl<T: Real> AffineMap<T> {
    pub fn new(linear: Mat<T>, translation: Vec<T>) -> Result<Self> {
        if !linear.is_square() || linear.rows() != translation.len() {
            return Err(Error::Config("affine map dimensions do not match".into()));
        }
        let inverse_linear = linear.inverse().ok_or(Error::SingularAffineMap)?;
        Ok(Self { linear, translation, inverse_linear })
    }

    pub fn identity(d: usize) -> Self {
        Self { linear: Mat::identity(d), translation: vec![T::zero(); d], inverse_linear: Mat::identity(d) }
    }

    pub fn scaling(d: usize, s: T) -> Result<Self> {
        Self::new(Mat::identity(d).scale(s), vec![T::zero(); d])
    }

    pub fn translation(offset: Vec<T>) -> Self {
        let d = offset.len();
        Self { linear: Mat::identity(d), translation: offset, inverse_linear: Mat::identity(d) }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn linear(&self) -> &Mat<T> {
        &self.linear
    }

    pub fn translation_part(&self) -> &[T] {
        &self.translation
    }

    pub fn is_identity(&self) -> bool {
        self.linear == Mat::identity(self.dim()) && self.translation.iter().all(|&v| v == T::zero())
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_into(x, &mut out);
        out
    }

    #[inline]
    pub fn apply_into(&self, x: &[T], out: &mut [T]) {
        self.linear.mul_vec_into(x, out);
        for (o, &b) in out.iter_mut().zip(&self.translation) {
            *o = *o + b;
        }
    }

    pub fn inverse(&self) -> Self {
        let b = self.inverse_linear.mul_vec(&self.translation).into_iter().map(|v| -v).collect();
        Self { linear: self.inverse_linear.clone(), translation: b, inverse_linear: self.linear.clone() }
    }

    pub fn descriptor(&self) -> Value {
        json!({
            "linear": self.linear.to_rows().into_iter().map(|r| r.into_iter().map(Real::as_f64).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "translation": self.translation.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        })
    }
}

/// How the metric of the surface follows an affine map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MetricTransport {
    /// Keep the original metric on the parameter domain (the map is an isometry onto its image).
    #[default]
    Pullback,
    /// Use the metric induced by the image surface in the ambient space.
    Induced,
}

/// Push the cam and the surface forward by `T(x) = Lx + b`.
///
/// The cam transforms as `e' = T(e)`, `A' = L⁻ᵀ A L⁻¹`, with the parametrizing frame carried
/// along (`B' = LB`, or `C' = L⁻ᵀC` for the point cam) so cam nodes correspond one to one.
/// The identity map returns the inputs unchanged.
pub fn affine_pushforward<T: Real>(
    cam: &Cam<T>,
    surface: &Hypersurface<T>,
    map: &AffineMap<T>,
    transport: MetricTransport,
) -> Result<(Cam<T>, Hypersurface<T>)> {
    if map.dim() != cam.ambient_dim() || map.dim() != surface.ambient_dim() {
        return Err(Error::Config(format!(
            "affine map acts on R^{} but the geometry lives in R^{}",
            map.dim(),
            cam.ambient_dim()
        )));
    }
    if map.is_identity() {
        return Ok((cam.clone(), surface.clone()));
    }
    let center = map.apply(cam.center());
    let new_cam = if cam.is_point() {
        Cam::point_with_frame(center, map.inverse_linear.transpose().matmul(cam.conormal_frame()))
    } else {
        Cam::with_frame(center, map.linear().matmul(cam.frame()))?
    };
    let chart = Arc::new(TransformedChart::new(surface.chart().clone(), map.clone()));
    let metric = match transport {
        MetricTransport::Pullback => Metric::Transported(Arc::new(surface.clone())),
        MetricTransport::Induced => Metric::Induced,
    };
    Ok((new_cam, Hypersurface::from_arc(chart, metric)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{phi, StereographicPatch};

    fn sample_map() -> AffineMap<f64> {
        let l = Mat::from_rows(&[vec![1.2, 0.3, -0.1], vec![0.0, 0.9, 0.2], vec![0.1, -0.2, 1.1]]);
        AffineMap::new(l, vec![0.3, -0.2, 0.5]).unwrap()
    }

    fn sample_cam() -> Cam<f64> {
        let a = Mat::from_rows(&[vec![9.0, 1.0, 0.0], vec![1.0, 12.0, 0.5], vec![0.0, 0.5, 10.0]]);
        Cam::ellipsoid(vec![0.05, -0.02, 0.01], a).unwrap()
    }

    #[test]
    fn identity_is_a_no_op() {
        let cam = sample_cam();
        let s = Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.4).unwrap());
        let (c2, s2) = affine_pushforward(&cam, &s, &AffineMap::identity(3), MetricTransport::Pullback).unwrap();
        assert_eq!(c2.matrix(), cam.matrix());
        assert_eq!(c2.center(), cam.center());
        assert_eq!(s2.point(&[0.1, 0.2]), s.point(&[0.1, 0.2]));
    }

    #[test]
    fn round_trip_restores_cam() {
        let cam = sample_cam();
        let s = Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.4).unwrap());
        let t = sample_map();
        let (c1, s1) = affine_pushforward(&cam, &s, &t, MetricTransport::Pullback).unwrap();
        let (c2, _) = affine_pushforward(&c1, &s1, &t.inverse(), MetricTransport::Pullback).unwrap();
        assert!(c2.matrix().sub(cam.matrix()).frobenius() < 1e-12);
        for (a, b) in c2.center().iter().zip(cam.center()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_scaling_divides_matrix() {
        let cam = sample_cam();
        let s = Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.4).unwrap());
        let (c, _) = affine_pushforward(&cam, &s, &AffineMap::scaling(3, 2.0).unwrap(), MetricTransport::Induced).unwrap();
        assert!(c.matrix().sub(&cam.matrix().scale(0.25)).frobenius() < 1e-12);
    }

    #[test]
    fn phi_is_invariant_along_transported_frame() {
        let cam = sample_cam();
        let s = Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.4).unwrap());
        let t = sample_map();
        let (c1, s1) = affine_pushforward(&cam, &s, &t, MetricTransport::Pullback).unwrap();
        let u = [0.1, -0.15];
        let w = [0.36, 0.48, 0.8];
        let before = phi(&s.point(&u), &cam, &cam.point_at(&w));
        let after = phi(&s1.point(&u), &c1, &c1.point_at(&w));
        assert!((before - after).abs() < 1e-12);
        assert_eq!(s1.metric(&u), s.metric(&u));
        let point = Cam::point(vec![0.0; 3]);
        let (p1, s2) = affine_pushforward(&point, &s, &t, MetricTransport::Pullback).unwrap();
        let before = phi(&s.point(&u), &point, &point.point_at(&w));
        let after = phi(&s2.point(&u), &p1, &p1.point_at(&w));
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn singular_map_rejected() {
        let l = Mat::from_rows(&[vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert!(matches!(AffineMap::new(l, vec![0.0; 3]), Err(Error::SingularAffineMap)));
    }
}
