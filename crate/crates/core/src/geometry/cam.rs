use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{dot, Real};

/// Whether the cam is a genuine ellipsoid or the degenerate one-point cam.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CamVariant {
    Ellipsoid,
    Point,
}

/// The cam Σ = {q = 1} with `q(σ) = ⟨A(σ−e), σ−e⟩`.
///
/// Points on Σ are parametrized by the unit sphere through the frame `B`:
/// `σ(ω) = e + Bω` with `B Bᵀ = A⁻¹` (principal root `A^{-1/2}` unless the cam was
/// produced by an affine pushforward). For the point cam the parameter sphere is the
/// direction sphere and the frame `C` carries conormals, `Φ(x, ω) = ⟨x−e, Cω⟩`.
#[derive(Clone, Debug)]
pub struct Cam<T> {
    center: Vec<T>,
    variant: CamVariant,
    matrix: Mat<T>,
    frame: Mat<T>,
    conormal: Mat<T>,
    offset: T,
    density: T,
}

/// A parametrized point of the cam.
#[derive(Clone, Debug, PartialEq)]
pub struct CamPoint<T> {
    pub omega: Vec<T>,
    /// `σ(ω)`; `None` for the point cam.
    pub sigma: Option<Vec<T>>,
    /// `∇q(σ) = 2A(σ−e)` (ellipsoid) or the conormal `Cω` (point cam).
    pub normal: Vec<T>,
    /// Density of dΣ relative to the S^n volume element.
    pub density: T,
}

/// The affine level function `x ↦ ⟨x, normal⟩ − constant` of one cam point.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelForm<T> {
    pub normal: Vec<T>,
    pub constant: T,
}

impl<T: Real> LevelForm<T> {
    #[inline]
    pub fn value(&self, x: &[T]) -> T {
        dot(x, &self.normal) - self.constant
    }
}

impl<T: Real> Cam<T> {
    /// Ellipsoid cam with center `e` and SPD matrix `A`.
    pub fn ellipsoid(center: Vec<T>, matrix: Mat<T>) -> Result<Self> {
        let d = center.len();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::InvalidCam(format!(
                "matrix is {}x{} but the center has dimension {d}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_symmetric() {
            return Err(Error::InvalidCam("matrix A is not symmetric".into()));
        }
        let (vals, _) = matrix.symmetric_eigen();
        if vals[0] <= T::zero() || !vals[0].is_finite() {
            return Err(Error::InvalidCam(format!("matrix A is not positive definite (λ_min = {})", vals[0])));
        }
        let frame = matrix.symmetric_function(|l| T::one() / l.sqrt());
        Self::from_parts(center, matrix, frame)
    }

    /// Round cam of the given radius.
    pub fn sphere(center: Vec<T>, radius: T) -> Result<Self> {
        if radius <= T::zero() {
            return Err(Error::InvalidCam(format!("radius must be positive, got {radius}")));
        }
        let d = center.len();
        let a = T::one() / (radius * radius);
        Self::ellipsoid(center, Mat::from_diag(&vec![a; d]))
    }

    /// Degenerate one-point cam at `center`.
    pub fn point(center: Vec<T>) -> Self {
        let d = center.len();
        Self {
            center,
            variant: CamVariant::Point,
            matrix: Mat::identity(d),
            frame: Mat::identity(d),
            conormal: Mat::identity(d),
            offset: T::zero(),
            density: T::one(),
        }
    }

    /// Ellipsoid cam from an explicit frame `B`, `σ(ω) = e + Bω`.
    pub(crate) fn with_frame(center: Vec<T>, frame: Mat<T>) -> Result<Self> {
        let bbt = frame.matmul(&frame.transpose());
        let matrix = bbt.inverse().ok_or_else(|| Error::InvalidCam("singular cam frame".into()))?.symmetrized();
        Self::from_parts(center, matrix, frame)
    }

    pub(crate) fn point_with_frame(center: Vec<T>, conormal: Mat<T>) -> Self {
        let mut cam = Self::point(center);
        cam.frame = conormal.clone();
        cam.conormal = conormal;
        cam
    }

    fn from_parts(center: Vec<T>, matrix: Mat<T>, frame: Mat<T>) -> Result<Self> {
        let inv = frame.inverse().ok_or_else(|| Error::InvalidCam("singular cam frame".into()))?;
        let two = T::lit(2.0);
        let conormal = inv.transpose().scale(two);
        let density = frame.det().abs() / two;
        // r = 2 − 2q(e) with q(e) = 0
        Ok(Self { center, variant: CamVariant::Ellipsoid, matrix, frame, conormal, offset: two, density })
    }

    pub fn variant(&self) -> CamVariant {
        self.variant
    }

    pub fn is_point(&self) -> bool {
        self.variant == CamVariant::Point
    }

    /// Ambient dimension n + 1.
    pub fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn frame(&self) -> &Mat<T> {
        &self.frame
    }

    /// Matrix `N` with `∇q(σ(ω)) = Nω` (ellipsoid) or the conormal frame (point cam).
    pub fn conormal_frame(&self) -> &Mat<T> {
        &self.conormal
    }

    /// The constant `r` in `Φ′ = ⟨x−e, ∇q(σ)⟩ − r` (2 for ellipsoids, 0 for the point cam).
    pub fn offset(&self) -> T {
        self.offset
    }

    /// `q(σ) = ⟨A(σ−e), σ−e⟩`.
    pub fn q(&self, sigma: &[T]) -> T {
        let d: Vec<T> = sigma.iter().zip(&self.center).map(|(&s, &e)| s - e).collect();
        dot(&d, &self.matrix.mul_vec(&d))
    }

    /// `∇q(σ) = 2A(σ−e)`.
    pub fn grad_q(&self, sigma: &[T]) -> Vec<T> {
        let d: Vec<T> = sigma.iter().zip(&self.center).map(|(&s, &e)| s - e).collect();
        self.matrix.mul_vec(&d).into_iter().map(|v| v + v).collect()
    }

    /// `∇²q = 2A`.
    pub fn hessian_q(&self) -> Mat<T> {
        self.matrix.scale(T::lit(2.0))
    }

    /// `σ(ω) = e + Bω`.
    pub fn sigma(&self, omega: &[T]) -> Vec<T> {
        self.frame.mul_vec(omega).into_iter().zip(&self.center).map(|(b, &e)| b + e).collect()
    }

    /// Parametrized cam point for a unit vector ω.
    pub fn point_at(&self, omega: &[T]) -> CamPoint<T> {
        match self.variant {
            CamVariant::Ellipsoid => {
                let sigma = self.sigma(omega);
                let normal = self.grad_q(&sigma);
                CamPoint { omega: omega.to_vec(), sigma: Some(sigma), normal, density: self.density }
            }
            CamVariant::Point => CamPoint {
                omega: omega.to_vec(),
                sigma: None,
                normal: self.conormal.mul_vec(omega),
                density: self.density,
            },
        }
    }

    /// The level form of Φ′(·, σ(ω)): `⟨x, Nω⟩ − (⟨e, Nω⟩ + r)`.
    pub fn level_form(&self, omega: &[T]) -> LevelForm<T> {
        let normal = self.conormal.mul_vec(omega);
        let constant = dot(&self.center, &normal) + self.offset;
        LevelForm { normal, constant }
    }

    /// `y = Nᵀ(x − e)`, so that `Φ′(x, σ(ω)) = ⟨y, ω⟩ − r`.
    pub fn dual_point(&self, x: &[T]) -> Vec<T> {
        let d: Vec<T> = x.iter().zip(&self.center).map(|(&a, &e)| a - e).collect();
        self.conormal.tr_mul_vec(&d)
    }

    /// A direction ω whose level set Φ′ = 0 passes through `x`, at position `angle` on the
    /// latitude circle `⟨y, ω⟩ = r` around `y/|y|`. None when `x` is on or inside the cam.
    pub fn omega_through(&self, x: &[T], angle: T) -> Option<Vec<T>> {
        let y = self.dual_point(x);
        let len = crate::scalar::norm(&y);
        let c = self.offset / len;
        if !(c < T::one()) {
            return None;
        }
        let s = (T::one() - c * c).sqrt();
        let f = crate::linalg::frame_with_axis(&y);
        let d = y.len();
        Some(
            (0..d)
                .map(|i| c * f[(i, d - 1)] + s * (angle.cos() * f[(i, 0)] + angle.sin() * f[(i, 1)]))
                .collect(),
        )
    }

    /// Density of dΣ = dV/dq against the S^n element: `|det B|/2`; 1 for the point cam.
    pub fn measure_density(&self) -> T {
        self.density
    }

    /// Coordinates in which the ellipsoid is the unit sphere, `B⁻¹(x − e)`.
    /// For the point cam this is `x − e`.
    pub fn normalized_coordinates(&self, x: &[T]) -> Vec<T> {
        let d: Vec<T> = x.iter().zip(&self.center).map(|(&a, &e)| a - e).collect();
        match self.variant {
            CamVariant::Ellipsoid => self.conormal.tr_mul_vec(&d).into_iter().map(|v| v / T::lit(2.0)).collect(),
            CamVariant::Point => d,
        }
    }

    /// Linear part of [`Cam::normalized_coordinates`] applied to a vector.
    pub fn normalized_vector(&self, v: &[T]) -> Vec<T> {
        match self.variant {
            CamVariant::Ellipsoid => self.conormal.tr_mul_vec(v).into_iter().map(|c| c / T::lit(2.0)).collect(),
            CamVariant::Point => v.to_vec(),
        }
    }

    /// Structured description used for configuration hashing.
    pub fn descriptor(&self) -> serde_json::Value {
        let rows = |m: &Mat<T>| -> Vec<Vec<f64>> {
            m.to_rows().into_iter().map(|r| r.into_iter().map(Real::as_f64).collect()).collect()
        };
        json!({
            "variant": match self.variant { CamVariant::Ellipsoid => "ellipsoid", CamVariant::Point => "point" },
            "center": self.center.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            "matrix": rows(&self.matrix),
            "frame": rows(&self.frame),
        })
    }
}

/// Φ(x, σ) = ⟨x − σ, ∇q(σ)⟩ (ellipsoid) or ⟨x − e, ω⟩ with conormal frame (point cam).
pub fn phi<T: Real>(x: &[T], cam: &Cam<T>, p: &CamPoint<T>) -> T {
    match (&p.sigma, cam.variant()) {
        (Some(sigma), CamVariant::Ellipsoid) => {
            x.iter().zip(sigma).zip(&p.normal).fold(T::zero(), |acc, ((&xi, &si), &ni)| acc + (xi - si) * ni)
        }
        _ => x.iter().zip(cam.center()).zip(&p.normal).fold(T::zero(), |acc, ((&xi, &ei), &ni)| acc + (xi - ei) * ni),
    }
}

/// Φ′(x, σ) = ⟨x − e, ∇q(σ)⟩ − r, linear in σ. Rejected for the point cam.
pub fn phi_prime<T: Real>(x: &[T], cam: &Cam<T>, p: &CamPoint<T>) -> Result<T> {
    if cam.is_point() {
        return Err(Error::PointCamUnsupported);
    }
    let v = x.iter().zip(cam.center()).zip(&p.normal).fold(T::zero(), |acc, ((&xi, &ei), &ni)| acc + (xi - ei) * ni);
    Ok(v - cam.offset())
}

/// Density of dΣ with respect to the S^n volume element at ω.
pub fn cam_measure_density<T: Real>(p: &CamPoint<T>) -> T {
    p.density
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn phi_on_symmetric_axis() {
        let cam = Cam::sphere(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        let p = cam.point_at(&[0.0, 0.0, 1.0]);
        assert_eq!(p.sigma.as_deref(), Some(&[0.0, 0.0, 1.0][..]));
        assert_eq!(phi(&[0.0, 0.0, 2.0], &cam, &p), 2.0);
        assert_eq!(phi_prime(&[0.0, 0.0, 2.0], &cam, &p).unwrap(), 2.0);
        assert_eq!(phi(p.sigma.as_ref().unwrap(), &cam, &p), 0.0);
    }

    #[test]
    fn phi_prime_at_center_is_minus_r() {
        let a = Mat::from_rows(&[vec![3.0, 0.5, 0.0], vec![0.5, 2.0, 0.1], vec![0.0, 0.1, 1.5]]);
        let cam = Cam::ellipsoid(vec![0.2, -0.1, 0.3], a).unwrap();
        for w in [[1.0, 0.0, 0.0], [0.3, 0.4, -0.5], [-0.2, 0.9, 0.1]] {
            let p = cam.point_at(&unit(&w));
            let v = phi_prime(&[0.2, -0.1, 0.3], &cam, &p).unwrap();
            assert!((v + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn point_cam_rejects_phi_prime() {
        let cam = Cam::<f64>::point(vec![0.0; 3]);
        let p = cam.point_at(&[0.0, 1.0, 0.0]);
        assert!(matches!(phi_prime(&[1.0, 2.0, 3.0], &cam, &p), Err(Error::PointCamUnsupported)));
        assert_eq!(p.normal, vec![0.0, 1.0, 0.0]);
        assert!(p.sigma.is_none());
        assert_eq!(phi(&[1.0, 2.0, 3.0], &cam, &p), 2.0);
    }

    #[test]
    fn construction_checks() {
        let not_sym = Mat::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]);
        assert!(Cam::ellipsoid(vec![0.0, 0.0], not_sym).is_err());
        let indefinite = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(Cam::ellipsoid(vec![0.0, 0.0], indefinite).is_err());
        assert!(Cam::sphere(vec![0.0, 0.0], -1.0).is_err());
        let wrong_dim = Mat::<f64>::identity(3);
        assert!(Cam::ellipsoid(vec![0.0, 0.0], wrong_dim).is_err());
    }

    #[test]
    fn densities_from_leray_computation() {
        let unit_cam = Cam::sphere(vec![0.0f64; 3], 1.0).unwrap();
        assert!((unit_cam.measure_density() - 0.5).abs() < 1e-15);
        let cam = Cam::ellipsoid(vec![0.0f64; 3], Mat::from_diag(&[4.0, 4.0, 4.0])).unwrap();
        assert!((cam.measure_density() - 1.0 / 16.0).abs() < 1e-15);
        let p = cam.point_at(&[0.0, 1.0, 0.0]);
        assert_eq!(cam_measure_density(&p), cam.measure_density());
    }

    #[test]
    fn level_form_matches_phi() {
        let a = Mat::from_rows(&[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, 0.2], vec![0.0, 0.2, 5.0]]);
        let cam = Cam::ellipsoid(vec![0.1, 0.2, -0.3], a).unwrap();
        let w = unit(&[0.2, -0.7, 0.4]);
        let p = cam.point_at(&w);
        let x = [0.5, 1.0, 2.0];
        let lf = cam.level_form(&w);
        assert!((lf.value(&x) - phi(&x, &cam, &p)).abs() < 1e-12);
        let y = cam.dual_point(&x);
        let via_dual = dot(&y, &w) - cam.offset();
        assert!((via_dual - phi(&x, &cam, &p)).abs() < 1e-12);
    }

    #[test]
    fn generic_over_f32() {
        let cam = Cam::<f32>::sphere(vec![0.0, 0.0, 0.0], 0.5).unwrap();
        let p = cam.point_at(&[0.6, 0.0, 0.8]);
        let s = p.sigma.clone().unwrap();
        assert!((cam.q(&s) - 1.0).abs() < 1e-5);
        assert!((phi(&[0.0, 0.0, 0.0], &cam, &p) + 2.0).abs() < 1e-5);
    }
}
