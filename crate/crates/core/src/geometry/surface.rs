use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, small_det, small_inverse};
use crate::scalar::Real;

use super::affine::AffineMap;
use super::cam::CamPoint;

/// Axis-aligned parameter box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> ParamBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn cube(n: usize, half_width: T) -> Self {
        Self { lo: vec![-half_width; n], hi: vec![half_width; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    /// Largest side length.
    pub fn size(&self) -> T {
        (0..self.dim()).fold(T::zero(), |m, a| m.max(self.width(a)))
    }

    pub fn contains(&self, u: &[T]) -> bool {
        u.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    pub fn center(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| (l + h) * half).collect()
    }

    /// Euclidean distance from `u` to the complement of the box (0 outside).
    pub fn inner_distance(&self, u: &[T]) -> T {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .fold(T::infinity(), |m, (&v, (&l, &h))| m.min(v - l).min(h - v))
            .max(T::zero())
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo: Vec<T> = self.lo.iter().zip(&other.lo).map(|(&a, &b)| a.max(b)).collect();
        let hi: Vec<T> = self.hi.iter().zip(&other.hi).map(|(&a, &b)| a.min(b)).collect();
        lo.iter().zip(&hi).all(|(l, h)| l < h).then_some(Self { lo, hi })
    }
}

/// A coordinate chart `u ∈ U ⊂ Rⁿ ↦ x(u) ∈ Rⁿ⁺¹` of a hypersurface.
pub trait Chart<T: Real>: Send + Sync + fmt::Debug {
    /// Parameter dimension n.
    fn dim(&self) -> usize;

    fn domain(&self) -> ParamBox<T>;

    fn point(&self, u: &[T], x: &mut [T]);

    /// Row-major Jacobian: `jac[i * (n+1) + k] = ∂x_k/∂u_i`.
    fn partials(&self, u: &[T], jac: &mut [T]);

    /// Second partials `out[(i * n + j) * (n+1) + k] = ∂²x_k/∂u_i∂u_j`, if available.
    fn second_partials(&self, _u: &[T], _out: &mut [T]) -> bool {
        false
    }

    fn descriptor(&self) -> Value;
}

/// Central finite-difference Jacobian with step `1e-5 · size(U)`.
pub fn finite_difference_partials<T: Real>(chart: &dyn Chart<T>, u: &[T], jac: &mut [T]) {
    let n = chart.dim();
    let d = n + 1;
    let h = T::lit(1e-5) * chart.domain().size();
    let mut up = u.to_vec();
    let mut xp = vec![T::zero(); d];
    let mut xm = vec![T::zero(); d];
    for i in 0..n {
        up[i] = u[i] + h;
        chart.point(&up, &mut xp);
        up[i] = u[i] - h;
        chart.point(&up, &mut xm);
        up[i] = u[i];
        for k in 0..d {
            jac[i * d + k] = (xp[k] - xm[k]) / (h + h);
        }
    }
}

/// Second partials: analytic if the chart provides them, otherwise central differences of the
/// analytic Jacobian.
pub fn second_partials_or_fd<T: Real>(chart: &dyn Chart<T>, u: &[T], out: &mut [T]) {
    if chart.second_partials(u, out) {
        return;
    }
    let n = chart.dim();
    let d = n + 1;
    let h = T::lit(1e-5) * chart.domain().size();
    let mut up = u.to_vec();
    let mut jp = vec![T::zero(); n * d];
    let mut jm = vec![T::zero(); n * d];
    for j in 0..n {
        up[j] = u[j] + h;
        chart.partials(&up, &mut jp);
        up[j] = u[j] - h;
        chart.partials(&up, &mut jm);
        up[j] = u[j];
        for i in 0..n {
            for k in 0..d {
                out[(i * n + j) * d + k] = (jp[i * d + k] - jm[i * d + k]) / (h + h);
            }
        }
    }
}

/// Smooth positive function on U used as a conformal factor λ.
#[derive(Clone)]
pub struct ConformalFactor<T> {
    func: Arc<dyn Fn(&[T]) -> T + Send + Sync>,
    descriptor: Value,
}

impl<T: Real> ConformalFactor<T> {
    pub fn new(func: impl Fn(&[T]) -> T + Send + Sync + 'static, descriptor: Value) -> Self {
        Self { func: Arc::new(func), descriptor }
    }

    pub fn constant(c: T) -> Self {
        Self::new(move |_| c, json!({ "constant": c.as_f64() }))
    }

    #[inline]
    pub fn eval(&self, u: &[T]) -> T {
        (self.func)(u)
    }

    pub fn descriptor(&self) -> &Value {
        &self.descriptor
    }
}

impl<T> fmt::Debug for ConformalFactor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConformalFactor").field("descriptor", &self.descriptor).finish()
    }
}

/// User-supplied Riemannian metric in chart coordinates.
pub trait MetricField<T: Real>: Send + Sync + fmt::Debug {
    /// Row-major `n × n` metric matrix at `u`.
    fn metric(&self, u: &[T], g: &mut [T]);

    fn descriptor(&self) -> Value;
}

/// Source of the Riemannian metric on U.
#[derive(Clone, Debug)]
pub enum Metric<T: Real> {
    /// `g_ij = ⟨∂_i x, ∂_j x⟩`.
    Induced,
    /// `λ(u) · g_induced`.
    Conformal(ConformalFactor<T>),
    /// Metric of another surface sharing the same parameter domain.
    Transported(Arc<Hypersurface<T>>),
    Custom(Arc<dyn MetricField<T>>),
}

/// A hypersurface given by a chart and a metric on its parameter domain.
#[derive(Clone, Debug)]
pub struct Hypersurface<T: Real> {
    chart: Arc<dyn Chart<T>>,
    metric: Metric<T>,
}

/// Pointwise geometric data of a hypersurface.
#[derive(Clone, Debug)]
pub struct LocalGeometry<T> {
    pub x: Vec<T>,
    pub jac: Vec<T>,
    pub g: Vec<T>,
    pub g_inv: Vec<T>,
    pub sqrt_det_g: T,
}

impl<T: Real> Hypersurface<T> {
    pub fn new(chart: impl Chart<T> + 'static) -> Self {
        Self { chart: Arc::new(chart), metric: Metric::Induced }
    }

    pub fn from_arc(chart: Arc<dyn Chart<T>>, metric: Metric<T>) -> Self {
        Self { chart, metric }
    }

    pub fn with_metric(mut self, metric: Metric<T>) -> Self {
        self.metric = metric;
        self
    }

    pub fn chart(&self) -> &Arc<dyn Chart<T>> {
        &self.chart
    }

    pub fn metric_kind(&self) -> &Metric<T> {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.chart.dim() + 1
    }

    pub fn domain(&self) -> ParamBox<T> {
        self.chart.domain()
    }

    pub fn point(&self, u: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.ambient_dim()];
        self.chart.point(u, &mut x);
        x
    }

    #[inline]
    pub fn point_into(&self, u: &[T], x: &mut [T]) {
        self.chart.point(u, x);
    }

    pub fn partials(&self, u: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut j = vec![T::zero(); n * (n + 1)];
        self.chart.partials(u, &mut j);
        j
    }

    #[inline]
    pub fn partials_into(&self, u: &[T], jac: &mut [T]) {
        self.chart.partials(u, jac);
    }

    /// Metric at `u` given this chart's Jacobian there.
    pub fn metric_with_jacobian(&self, u: &[T], jac: &[T], g: &mut [T]) {
        let n = self.dim();
        match &self.metric {
            Metric::Induced => induced_metric(jac, n, g),
            Metric::Conformal(lambda) => {
                induced_metric(jac, n, g);
                let l = lambda.eval(u);
                g.iter_mut().for_each(|v| *v = *v * l);
            }
            Metric::Transported(other) => other.metric_into(u, g),
            Metric::Custom(field) => field.metric(u, g),
        }
    }

    pub fn metric_into(&self, u: &[T], g: &mut [T]) {
        let n = self.dim();
        match &self.metric {
            Metric::Transported(other) => other.metric_into(u, g),
            Metric::Custom(field) => field.metric(u, g),
            _ => {
                let mut jac = vec![T::zero(); n * (n + 1)];
                self.chart.partials(u, &mut jac);
                self.metric_with_jacobian(u, &jac, g);
            }
        }
    }

    pub fn metric(&self, u: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut g = vec![T::zero(); n * n];
        self.metric_into(u, &mut g);
        g
    }

    pub fn conformal_factor(&self) -> Option<&ConformalFactor<T>> {
        match &self.metric {
            Metric::Conformal(l) => Some(l),
            _ => None,
        }
    }

    /// Point, Jacobian, metric and its inverse at `u`. Fails where `g` is not positive definite
    /// or the Jacobian drops rank.
    pub fn local(&self, u: &[T]) -> Result<LocalGeometry<T>> {
        let n = self.dim();
        let x = self.point(u);
        let jac = self.partials(u);
        let mut gram = vec![T::zero(); n * n];
        induced_metric(&jac, n, &mut gram);
        let gram_scale = gram.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if !is_positive_definite(&gram, n)
            || small_det(&gram, n) <= gram_scale.powi(n as i32) * T::tol(1e-24)
        {
            return Err(Error::InvalidSurface(format!(
                "chart Jacobian is rank deficient at u = {:?}",
                u.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
            )));
        }
        let mut g = vec![T::zero(); n * n];
        self.metric_with_jacobian(u, &jac, &mut g);
        let mut g_inv = vec![T::zero(); n * n];
        if !is_positive_definite(&g, n) || !small_inverse(&g, n, &mut g_inv) {
            return Err(Error::InvalidSurface(format!(
                "metric is not positive definite at u = {:?}",
                u.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
            )));
        }
        let sqrt_det_g = small_det(&g, n).sqrt();
        Ok(LocalGeometry { x, jac, g, g_inv, sqrt_det_g })
    }

    pub fn descriptor(&self) -> Value {
        let metric = match &self.metric {
            Metric::Induced => json!("induced"),
            Metric::Conformal(l) => json!({ "conformal": l.descriptor().clone() }),
            Metric::Transported(s) => json!({ "transported": s.descriptor() }),
            Metric::Custom(f) => json!({ "custom": f.descriptor() }),
        };
        json!({ "chart": self.chart.descriptor(), "metric": metric })
    }
}

#[inline]
pub(crate) fn induced_metric<T: Real>(jac: &[T], n: usize, g: &mut [T]) {
    let d = n + 1;
    for i in 0..n {
        for j in i..n {
            let mut s = T::zero();
            for k in 0..d {
                s = s + jac[i * d + k] * jac[j * d + k];
            }
            g[i * n + j] = s;
            g[j * n + i] = s;
        }
    }
}

/// `|∇_x Φ(·, σ)|_g`: the g-norm of the covector `v_i = ⟨∂_i x, ∇q(σ)⟩` on the tangent space.
pub fn grad_x_phi_cotangent_norm<T: Real>(surface: &Hypersurface<T>, u: &[T], p: &CamPoint<T>) -> Result<T> {
    let n = surface.dim();
    let local = surface.local(u)?;
    Ok(cotangent_norm(&local.jac, &local.g_inv, &p.normal, n))
}

#[inline]
pub(crate) fn cotangent_norm<T: Real>(jac: &[T], g_inv: &[T], normal: &[T], n: usize) -> T {
    let d = n + 1;
    let mut v = [T::zero(); 4];
    for i in 0..n {
        v[i] = (0..d).fold(T::zero(), |acc, k| acc + jac[i * d + k] * normal[k]);
    }
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            s = s + v[i] * g_inv[i * n + j] * v[j];
        }
    }
    s.max(T::zero()).sqrt()
}

/// Patch of the ellipsoid `Σ ((x_k − c_k)/a_k)² = 1` around its north pole, parametrized
/// by inverse stereographic projection from the south pole on the box `[-w, w]ⁿ`:
/// `x = c + a ⊙ (2u, 1 − |u|²)/(1 + |u|²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StereographicPatch<T> {
    semi_axes: Vec<T>,
    center: Vec<T>,
    half_width: T,
}

impl<T: Real> StereographicPatch<T> {
    pub fn ellipsoid(semi_axes: Vec<T>, center: Vec<T>, half_width: T) -> Result<Self> {
        let d = semi_axes.len();
        if !(3..=4).contains(&d) || center.len() != d {
            return Err(Error::InvalidSurface(format!(
                "ellipsoid patch needs matching semi-axes and center in dimension 3 or 4, got {d} and {}",
                center.len()
            )));
        }
        if semi_axes.iter().any(|&a| a <= T::zero()) || half_width <= T::zero() {
            return Err(Error::InvalidSurface("semi-axes and half width must be positive".into()));
        }
        let n = T::count(d - 1);
        if half_width * half_width * n >= T::one() {
            return Err(Error::InvalidSurface("patch must stay in the open upper half".into()));
        }
        Ok(Self { semi_axes, center, half_width })
    }

    /// Patch of the origin-centered sphere of the given radius inscribed in the cap
    /// `{x_{n+1} ≥ height}`.
    pub fn spherical_cap(n: usize, radius: T, height: T) -> Result<Self> {
        if radius <= T::zero() || height < T::zero() || height >= radius {
            return Err(Error::InvalidSurface(format!("need 0 <= height < radius, got {height} and {radius}")));
        }
        let r_cap = ((radius - height) / (radius + height)).sqrt();
        let half_width = r_cap / T::count(n).sqrt();
        Self::ellipsoid(vec![radius; n + 1], vec![T::zero(); n + 1], half_width)
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }
}

impl<T: Real> Chart<T> for StereographicPatch<T> {
    fn dim(&self) -> usize {
        self.semi_axes.len() - 1
    }

    fn domain(&self) -> ParamBox<T> {
        ParamBox::cube(self.dim(), self.half_width)
    }

    #[inline]
    fn point(&self, u: &[T], x: &mut [T]) {
        let n = self.dim();
        let r2 = u.iter().fold(T::zero(), |acc, &v| acc + v * v);
        let s = T::one() / (T::one() + r2);
        for k in 0..n {
            x[k] = self.center[k] + self.semi_axes[k] * (u[k] + u[k]) * s;
        }
        x[n] = self.center[n] + self.semi_axes[n] * (T::one() - r2) * s;
    }

    #[inline]
    fn partials(&self, u: &[T], jac: &mut [T]) {
        let n = self.dim();
        let d = n + 1;
        let two = T::lit(2.0);
        let r2 = u.iter().fold(T::zero(), |acc, &v| acc + v * v);
        let s = T::one() / (T::one() + r2);
        let s2 = s * s;
        for i in 0..n {
            for k in 0..n {
                let delta = if i == k { s } else { T::zero() };
                jac[i * d + k] = self.semi_axes[k] * two * (delta - two * u[k] * u[i] * s2);
            }
            jac[i * d + n] = -self.semi_axes[n] * two * two * u[i] * s2;
        }
    }

    fn descriptor(&self) -> Value {
        json!({
            "kind": "stereographic_patch",
            "semi_axes": self.semi_axes.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            "center": self.center.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            "half_width": self.half_width.as_f64(),
        })
    }
}

/// Graph `x = (u, h + ½ Σ κ_i u_i²)` over `[-w, w]ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGraph<T> {
    height: T,
    curvatures: Vec<T>,
    half_width: T,
}

impl<T: Real> QuadraticGraph<T> {
    pub fn new(height: T, curvatures: Vec<T>, half_width: T) -> Result<Self> {
        if !(2..=3).contains(&curvatures.len()) || half_width <= T::zero() {
            return Err(Error::InvalidSurface("graph needs n in {2, 3} and a positive half width".into()));
        }
        Ok(Self { height, curvatures, half_width })
    }
}

impl<T: Real> Chart<T> for QuadraticGraph<T> {
    fn dim(&self) -> usize {
        self.curvatures.len()
    }

    fn domain(&self) -> ParamBox<T> {
        ParamBox::cube(self.dim(), self.half_width)
    }

    fn point(&self, u: &[T], x: &mut [T]) {
        let n = self.dim();
        let half = T::lit(0.5);
        x[..n].copy_from_slice(&u[..n]);
        x[n] = self.height + u.iter().zip(&self.curvatures).fold(T::zero(), |acc, (&v, &k)| acc + half * k * v * v);
    }

    fn partials(&self, u: &[T], jac: &mut [T]) {
        let n = self.dim();
        let d = n + 1;
        jac.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..n {
            jac[i * d + i] = T::one();
            jac[i * d + n] = self.curvatures[i] * u[i];
        }
    }

    fn second_partials(&self, _u: &[T], out: &mut [T]) -> bool {
        let n = self.dim();
        let d = n + 1;
        out.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..n {
            out[(i * n + i) * d + n] = self.curvatures[i];
        }
        true
    }

    fn descriptor(&self) -> Value {
        json!({
            "kind": "quadratic_graph",
            "height": self.height.as_f64(),
            "curvatures": self.curvatures.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            "half_width": self.half_width.as_f64(),
        })
    }
}

/// Chart composed with an affine map of the ambient space.
#[derive(Clone, Debug)]
pub struct TransformedChart<T: Real> {
    inner: Arc<dyn Chart<T>>,
    map: AffineMap<T>,
}

impl<T: Real> TransformedChart<T> {
    pub fn new(inner: Arc<dyn Chart<T>>, map: AffineMap<T>) -> Self {
        Self { inner, map }
    }
}

impl<T: Real> Chart<T> for TransformedChart<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn domain(&self) -> ParamBox<T> {
        self.inner.domain()
    }

    fn point(&self, u: &[T], x: &mut [T]) {
        let mut y = [T::zero(); 4];
        let d = self.dim() + 1;
        self.inner.point(u, &mut y[..d]);
        self.map.apply_into(&y[..d], x);
    }

    fn partials(&self, u: &[T], jac: &mut [T]) {
        let n = self.dim();
        let d = n + 1;
        let mut inner = [T::zero(); 12];
        self.inner.partials(u, &mut inner[..n * d]);
        for i in 0..n {
            self.map.linear().mul_vec_into(&inner[i * d..(i + 1) * d], &mut jac[i * d..(i + 1) * d]);
        }
    }

    fn descriptor(&self) -> Value {
        json!({ "kind": "affine_image", "inner": self.inner.descriptor(), "map": self.map.descriptor() })
    }
}
