//! Regularized singular integrals over the cam, the normalizer Δₙ, and the reconstruction
//! formulas for even and odd n.

mod extrapolate;
mod surrogate;

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cotangent_norm, Cam, Hypersurface, ParamBox};
use crate::scalar::{dot, factorial, norm, sphere_volume, Real};
use crate::slicing::{default_cam_slice_cells, slice_on_cam};
use crate::transform::{geometry_hash, ScalarField, Sinogram};

pub use extrapolate::{extrapolate, neville_at_zero, Extrapolation, RegularizationSchedule};
pub use surrogate::{surrogate_delta, surrogate_finite_part, surrogate_integral};

/// Which reconstruction formula applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Finite part of `∫ M dΣ/Φⁿ` (real part of the regularized integral).
    Even,
    /// `δ^{(n−1)}(Φ)` pairing (imaginary part).
    Odd,
}

impl Branch {
    pub fn for_dim(n: usize) -> Self {
        if n % 2 == 0 {
            Branch::Even
        } else {
            Branch::Odd
        }
    }
}

/// The sinogram reduced to its nonzero terms `w_k · density · M(σ_k)` with their nodes.
#[derive(Clone, Debug)]
pub struct Backprojector<'a, T: Real> {
    cam: &'a Cam<T>,
    n: usize,
    nodes: Vec<T>,
    coeffs: Vec<T>,
    spacing: T,
}

impl<'a, T: Real> Backprojector<'a, T> {
    pub fn new(sino: &Sinogram<T>, cam: &'a Cam<T>) -> Result<Self> {
        let n = sino.n();
        if cam.ambient_dim() != n + 1 {
            return Err(Error::Config(format!("sinogram is for n = {n} but the cam lives in R^{}", cam.ambient_dim())));
        }
        let density = cam.measure_density();
        let mut nodes = Vec::new();
        let mut coeffs = Vec::new();
        for k in 0..sino.len() {
            let v = sino.values()[k];
            if v != T::zero() {
                nodes.extend_from_slice(sino.node(k));
                coeffs.push(sino.weights()[k] * density * v);
            }
        }
        Ok(Self { cam, n, nodes, coeffs, spacing: sino.spacing() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Regularization unit at x: the angular grid step converted to Φ units,
    /// `√(|y|² − r²) · spacing` with `y = Nᵀ(x − e)`.
    pub fn step_at(&self, x: &[T]) -> T {
        let y = self.cam.dual_point(x);
        let r = self.cam.offset();
        let ny = norm(&y);
        (ny * ny - r * r).max(T::zero()).sqrt() * self.spacing
    }

    /// `I(ε) = Σ_k w_k · density · M_k · (Φ(x, σ_k) − iε)^{−n}` for each ε.
    pub fn integrals(&self, x: &[T], eps: &[T]) -> Vec<Complex<T>> {
        let y = self.cam.dual_point(x);
        let r = self.cam.offset();
        let d = self.n + 1;
        let e2: Vec<T> = eps.iter().map(|&e| e * e).collect();
        let mut acc = vec![Complex::new(T::zero(), T::zero()); eps.len()];
        for (k, &c) in self.coeffs.iter().enumerate() {
            let phi = dot(&y, &self.nodes[k * d..(k + 1) * d]) - r;
            for (j, &e) in eps.iter().enumerate() {
                // (Φ − iε)^{−1} = (Φ + iε)/(Φ² + ε²)
                let m = T::one() / (phi * phi + e2[j]);
                let inv = Complex::new(phi * m, e * m);
                let mut z = inv;
                for _ in 1..self.n {
                    z = z * inv;
                }
                acc[j] = acc[j] + z * c;
            }
        }
        acc
    }
}

/// `I(ε)` for one ε.
pub fn sokhotski_integral<T: Real>(sino: &Sinogram<T>, cam: &Cam<T>, x: &[T], eps: T) -> Result<Complex<T>> {
    Ok(Backprojector::new(sino, cam)?.integrals(x, &[eps])[0])
}

fn check_branch(n: usize, want: Branch) -> Result<()> {
    if Branch::for_dim(n) != want {
        return Err(Error::Precondition(format!("the {want:?} branch does not apply to n = {n}")));
    }
    Ok(())
}

/// Finite part `½(∫M/(Φ−i0)ⁿ + ∫M/(Φ+i0)ⁿ) = lim Re I(ε)` (even n).
pub fn finite_part<T: Real>(
    sino: &Sinogram<T>,
    cam: &Cam<T>,
    x: &[T],
    schedule: &RegularizationSchedule,
) -> Result<Extrapolation<T>> {
    check_branch(sino.n(), Branch::Even)?;
    let bp = Backprojector::new(sino, cam)?;
    Ok(pairing(&bp, x, schedule, Branch::Even))
}

/// `⟨δ^{(n−1)}(Φ), M⟩ = (−1)^{n−1} ((n−1)!/π) lim Im I(ε)` (odd n).
pub fn delta_pairing<T: Real>(
    sino: &Sinogram<T>,
    cam: &Cam<T>,
    x: &[T],
    schedule: &RegularizationSchedule,
) -> Result<Extrapolation<T>> {
    check_branch(sino.n(), Branch::Odd)?;
    let bp = Backprojector::new(sino, cam)?;
    Ok(pairing(&bp, x, schedule, Branch::Odd))
}

fn pairing<T: Real>(bp: &Backprojector<'_, T>, x: &[T], schedule: &RegularizationSchedule, branch: Branch) -> Extrapolation<T> {
    let eps = schedule.epsilons(bp.step_at(x));
    let values = bp.integrals(x, &eps);
    let samples: Vec<T> = match branch {
        Branch::Even => values.iter().map(|z| z.re).collect(),
        Branch::Odd => {
            let c = T::lit(surrogate::delta_coefficient(bp.n()));
            values.iter().map(|z| c * z.im).collect()
        }
    };
    extrapolate(&eps, &samples)
}

/// `Δₙ(x) = (1/|S^{n−1}|) ∫_{Z(x)} |∇_xΦ|_g^{−n} dΣ/d_σΦ` at the surface point with parameter u.
pub fn normalizer<T: Real>(u: &[T], cam: &Cam<T>, surface: &Hypersurface<T>, cells: &[usize]) -> Result<T> {
    let n = surface.dim();
    let local = surface.local(u)?;
    let slice = slice_on_cam(&local.x, cam, cells)?;
    let conormal = cam.conormal_frame();
    let mut normal = vec![T::zero(); n + 1];
    let mut sum = T::zero();
    for i in 0..slice.len() {
        conormal.mul_vec_into(slice.point(i), &mut normal);
        let cn = cotangent_norm(&local.jac, &local.g_inv, &normal, n);
        sum = sum + slice.weights[i] / cn.powi(n as i32);
    }
    Ok(sum / sphere_volume::<T>(n - 1))
}

/// Constant multiplying the extrapolated pairing: `(n−1)!/(jⁿ Δ)` (even) or `1/(2 j^{n−1} Δ)`
/// (odd), with `j = 2πi`, before division by Δ.
pub fn reconstruction_constant<T: Real>(n: usize) -> T {
    let two_pi = T::PI() + T::PI();
    match Branch::for_dim(n) {
        Branch::Even => {
            let sign = if (n / 2) % 2 == 0 { T::one() } else { -T::one() };
            factorial::<T>(n - 1) * sign / two_pi.powi(n as i32)
        }
        Branch::Odd => {
            let sign = if ((n - 1) / 2) % 2 == 0 { T::one() } else { -T::one() };
            sign / ((T::one() + T::one()) * two_pi.powi(n as i32 - 1))
        }
    }
}

/// Inversion settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub schedule: RegularizationSchedule,
    /// Angular cells for the cam slices that feed Δₙ.
    pub cam_slice_cells: Vec<usize>,
}

impl InversionOptions {
    pub fn for_dim(n: usize) -> Self {
        Self { schedule: RegularizationSchedule::default(), cam_slice_cells: default_cam_slice_cells(n) }
    }
}

/// Reconstruction at one point, with diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct PointReconstruction<T> {
    pub value: T,
    pub branch: Branch,
    pub pairing: Extrapolation<T>,
    pub normalizer: T,
    pub step: T,
}

/// Reconstruction from one sinogram on one geometry.
pub struct Reconstructor<'a, T: Real> {
    backprojector: Backprojector<'a, T>,
    cam: &'a Cam<T>,
    surface: &'a Hypersurface<T>,
    options: InversionOptions,
    hash: String,
}

impl<'a, T: Real> Reconstructor<'a, T> {
    /// Fails if the sinogram was generated for a different geometry. Without an explicit hash the
    /// expected value is recomputed from the cam, the surface and the sinogram's grids.
    pub fn new(
        sino: &Sinogram<T>,
        cam: &'a Cam<T>,
        surface: &'a Hypersurface<T>,
        expected_hash: Option<&str>,
        options: InversionOptions,
    ) -> Result<Self> {
        options.schedule.validate()?;
        let expected = match expected_hash {
            Some(h) => h.to_string(),
            None => geometry_hash(cam, surface, &sino.meta.grids.cam, &sino.meta.grids.surface),
        };
        sino.check_hash(&expected)?;
        if surface.dim() != sino.n() {
            return Err(Error::Config("surface dimension does not match the sinogram".into()));
        }
        Ok(Self { backprojector: Backprojector::new(sino, cam)?, cam, surface, options, hash: expected })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn options(&self) -> &InversionOptions {
        &self.options
    }

    pub fn point(&self, u: &[T]) -> Result<PointReconstruction<T>> {
        let n = self.surface.dim();
        if !self.surface.domain().contains(u) {
            return Err(Error::Precondition("evaluation point outside the chart domain".into()));
        }
        let x = self.surface.point(u);
        let branch = Branch::for_dim(n);
        let step = self.backprojector.step_at(&x);
        let pairing = pairing(&self.backprojector, &x, &self.options.schedule, branch);
        let normalizer = normalizer(u, self.cam, self.surface, &self.options.cam_slice_cells)?;
        let value = reconstruction_constant::<T>(n) * pairing.value / normalizer;
        Ok(PointReconstruction { value, branch, pairing, normalizer, step })
    }

    pub fn grid(&self, points: &[Vec<T>], truth: Option<&ScalarField<T>>) -> Result<ReconstructionReport> {
        let results: Vec<PointReconstruction<T>> =
            points.par_iter().map(|u| self.point(u)).collect::<Result<Vec<_>>>()?;
        let n = self.surface.dim();
        let mut records = Vec::with_capacity(points.len());
        for (u, r) in points.iter().zip(&results) {
            let x = self.surface.point(u);
            let weight = self.surface.local(u)?.sqrt_det_g.as_f64();
            records.push(PointRecord {
                u: u.iter().map(|v| v.as_f64()).collect(),
                x: x.iter().map(|v| v.as_f64()).collect(),
                value: r.value.as_f64(),
                truth: truth.map(|f| f.eval(u).as_f64()),
                in_support: truth.map(|f| f.in_support(u)),
                residual: (reconstruction_constant::<T>(n) * r.pairing.residual / r.normalizer).abs().as_f64(),
                diverging: r.pairing.diverging,
                normalizer: r.normalizer.as_f64(),
                step: r.step.as_f64(),
                weight,
            });
        }
        let metrics = truth.map(|_| ErrorMetrics::from_records(&records));
        let diverging_points = records.iter().filter(|r| r.diverging).count();
        Ok(ReconstructionReport {
            n,
            branch: Branch::for_dim(n),
            geometry_hash: self.hash.clone(),
            config_hash: None,
            schedule: self.options.schedule,
            points: records,
            metrics,
            diverging_points,
            conditions: None,
        })
    }
}

/// Reconstruction at one parameter point.
pub fn reconstruct<T: Real>(
    sino: &Sinogram<T>,
    cam: &Cam<T>,
    surface: &Hypersurface<T>,
    u: &[T],
    options: &InversionOptions,
) -> Result<PointReconstruction<T>> {
    Reconstructor::new(sino, cam, surface, None, options.clone())?.point(u)
}

/// Reconstruction over a list of parameter points with error metrics against `truth`.
pub fn reconstruct_grid<T: Real>(
    sino: &Sinogram<T>,
    cam: &Cam<T>,
    surface: &Hypersurface<T>,
    points: &[Vec<T>],
    truth: Option<&ScalarField<T>>,
    options: &InversionOptions,
) -> Result<ReconstructionReport> {
    Reconstructor::new(sino, cam, surface, None, options.clone())?.grid(points, truth)
}

/// Cell-centred tensor grid with `per_axis` points per axis over a box.
pub fn box_points<T: Real>(region: &ParamBox<T>, per_axis: usize) -> Vec<Vec<T>> {
    let n = region.dim();
    let total = per_axis.pow(n as u32);
    let half = T::lit(0.5);
    (0..total)
        .map(|mut k| {
            let mut u = vec![T::zero(); n];
            for a in (0..n).rev() {
                let i = k % per_axis;
                k /= per_axis;
                u[a] = region.lo[a] + (T::count(i) + half) * region.width(a) / T::count(per_axis);
            }
            u
        })
        .collect()
}

/// Points of [`box_points`] over the support hull of `field` that lie in its support.
pub fn support_points<T: Real>(field: &ScalarField<T>, per_axis: usize) -> Vec<Vec<T>> {
    match field.support_hull() {
        Some(hull) => box_points(&hull, per_axis).into_iter().filter(|u| field.in_support(u)).collect(),
        None => Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
    pub truth: Option<f64>,
    pub in_support: Option<bool>,
    /// Extrapolation residual in units of f.
    pub residual: f64,
    pub diverging: bool,
    pub normalizer: f64,
    pub step: f64,
    /// `√det g` at the point, the L² weight.
    pub weight: f64,
}

/// Errors relative to `max |f|` over the support points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub linf_rel: f64,
    pub l2_rel: f64,
    pub max_abs_error: f64,
    pub truth_max: f64,
    /// Least-squares constant c with reconstruction ≈ c · truth.
    pub calibration: f64,
    pub support_points: usize,
}

impl ErrorMetrics {
    pub fn from_records(records: &[PointRecord]) -> Self {
        let mut max_abs: f64 = 0.0;
        let mut truth_max: f64 = 0.0;
        let (mut e2, mut t2, mut rt, mut count) = (0.0, 0.0, 0.0, 0usize);
        for r in records.iter().filter(|r| r.in_support.unwrap_or(false)) {
            let t = r.truth.unwrap_or(0.0);
            let err = r.value - t;
            max_abs = max_abs.max(err.abs());
            truth_max = truth_max.max(t.abs());
            e2 += r.weight * err * err;
            t2 += r.weight * t * t;
            rt += r.weight * r.value * t;
            count += 1;
        }
        let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
        Self {
            linf_rel: rel(max_abs, truth_max),
            l2_rel: rel(e2.sqrt(), t2.sqrt()),
            max_abs_error: max_abs,
            truth_max,
            calibration: if t2 > 0.0 { rt / t2 } else { 1.0 },
            support_points: count,
        }
    }
}

/// Reconstructed field with diagnostics and (optionally) error metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub n: usize,
    pub branch: Branch,
    pub geometry_hash: String,
    pub config_hash: Option<String>,
    pub schedule: RegularizationSchedule,
    pub points: Vec<PointRecord>,
    pub metrics: Option<ErrorMetrics>,
    pub diverging_points: usize,
    pub conditions: Option<serde_json::Value>,
}

impl ReconstructionReport {
    /// `u1,…,un,f_rec[,f_true,abs_err]` per point.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let with_truth = self.points.iter().any(|p| p.truth.is_some());
        if let Some(h) = &self.config_hash {
            writeln!(out, "# config_hash={h}")?;
        }
        writeln!(out, "# geometry_hash={}", self.geometry_hash)?;
        let mut header: Vec<String> = (0..self.n).map(|i| format!("u{}", i + 1)).collect();
        header.push("f_rec".into());
        if with_truth {
            header.push("f_true".into());
            header.push("abs_err".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let mut row: Vec<String> = p.u.iter().map(|v| format!("{v:e}")).collect();
            row.push(format!("{:e}", p.value));
            if let Some(t) = p.truth {
                row.push(format!("{t:e}"));
                row.push(format!("{:e}", (p.value - t).abs()));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn max_relative_residual(&self) -> f64 {
        let scale = self.points.iter().fold(0.0f64, |m, p| m.max(p.value.abs())).max(f64::MIN_POSITIVE);
        self.points.iter().fold(0.0f64, |m, p| m.max(p.residual)) / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_for_two_and_three() {
        let pi = std::f64::consts::PI;
        assert!((reconstruction_constant::<f64>(2) + 1.0 / (4.0 * pi * pi)).abs() < 1e-15);
        assert!((reconstruction_constant::<f64>(3) + 1.0 / (8.0 * pi * pi)).abs() < 1e-15);
    }

    #[test]
    fn surrogate_finite_part_recovers_minus_two() {
        let s = RegularizationSchedule::default();
        let ex = surrogate_finite_part(|_| 1.0, 2, -1.0, 1.0, &s, 0.004);
        assert!((ex.value + 2.0).abs() < 1e-6, "{}", ex.value);
    }

    #[test]
    fn surrogate_delta_prime() {
        let s = RegularizationSchedule::default();
        let ex = surrogate_delta(|t| t, 2, -1.0, 1.0, &s, 0.004);
        assert!((ex.value + 1.0).abs() < 1e-6, "{}", ex.value);
    }

    #[test]
    fn box_points_are_cell_centred() {
        let b = ParamBox::new(vec![0.0, 0.0], vec![1.0, 2.0]);
        let pts = box_points(&b, 2);
        assert_eq!(pts, vec![vec![0.25, 0.5], vec![0.25, 1.5], vec![0.75, 0.5], vec![0.75, 1.5]]);
    }
}
