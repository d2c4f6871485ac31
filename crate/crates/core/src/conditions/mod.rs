//! Numerical validators for the admissibility conditions (E), (I), (II) and (III).
//!
//! A pass means that no violation was found at the configured sampling resolution.

mod sampling;

use std::fmt;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cam, Hypersurface, ParamBox};
use crate::inversion::{extrapolate, RegularizationSchedule};
use crate::linalg::{frame_with_axis, Mat};
use crate::scalar::{norm, Real};
use crate::slicing::slice_on_cam;

pub use sampling::halton;
use sampling::{boundary_lattice, compass_minimize, halton_pairs, halton_points, unit_directions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    E,
    I,
    II,
    III,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::E => "E",
            Condition::I => "I",
            Condition::II => "II",
            Condition::III => "III",
        };
        write!(f, "({s})")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Indeterminate => "indeterminate",
        })
    }
}

/// Offending sample behind the reported value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub params: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    pub omega: Option<Vec<f64>>,
    pub value: f64,
    /// Every parameter of the witness lies on the boundary of the chart domain.
    pub on_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub status: Status,
    /// Measured extreme value (minimum distance, determinant, angle; median |Q_n|).
    pub value: f64,
    pub threshold: f64,
    /// Signed distance of `value` from the threshold, positive on the passing side.
    pub margin: f64,
    /// How much local refinement moved the sampled extreme.
    pub resolution: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
}

/// Sample budgets and tolerances of the validators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionSampling {
    pub pairs: usize,
    /// Lattice points per axis whose boundary points are paired exhaustively.
    pub boundary_lattice: usize,
    pub tangent_points: usize,
    pub incidence_points: usize,
    pub directions: usize,
    /// Worst samples refined by compass search.
    pub refine: usize,
    /// Margins at or below this count as violations of (E).
    pub e_tol: f64,
    pub det_tol: f64,
    pub angle_tol: f64,
    pub qn_pairs: usize,
    pub qn_tol: f64,
    pub qn_schedule: RegularizationSchedule,
    pub qn_cells: Option<Vec<usize>>,
}

impl Default for ConditionSampling {
    fn default() -> Self {
        Self {
            pairs: 10_000,
            boundary_lattice: 17,
            tangent_points: 1024,
            incidence_points: 256,
            directions: 64,
            refine: 8,
            e_tol: 1e-8,
            det_tol: 1e-6,
            angle_tol: 1e-6,
            qn_pairs: 24,
            qn_tol: 1e-3,
            qn_schedule: RegularizationSchedule { eps0: 6.0, step: 1.0, levels: 4 },
            qn_cells: None,
        }
    }
}

impl ConditionSampling {
    /// Smaller budgets for quick checks.
    pub fn quick() -> Self {
        Self { pairs: 2000, tangent_points: 256, incidence_points: 64, qn_pairs: 20, ..Self::default() }
    }

    pub fn qn_cells(&self, n: usize) -> Vec<usize> {
        self.qn_cells.clone().unwrap_or_else(|| if n == 2 { vec![32, 1024] } else { vec![64, 96, 384] })
    }
}

/// Chart and cam evaluated in f64 at f64 parameters.
struct Probe<'a, T: Real> {
    surface: &'a Hypersurface<T>,
    cam: &'a Cam<T>,
    n: usize,
    domain: ParamBox<T>,
}

fn to_t<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&a| T::lit(a)).collect()
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|a| a.as_f64()).collect()
}

fn norm64(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Norm of the exterior product `|a ∧ b|`.
fn wedge_norm(a: &[f64], b: &[f64]) -> f64 {
    let (aa, bb, ab) = (dot64(a, a), dot64(b, b), dot64(a, b));
    (aa * bb - ab * ab).max(0.0).sqrt()
}

impl<'a, T: Real> Probe<'a, T> {
    fn new(surface: &'a Hypersurface<T>, cam: &'a Cam<T>) -> Result<Self> {
        if surface.ambient_dim() != cam.ambient_dim() {
            return Err(Error::Config("surface and cam live in different dimensions".into()));
        }
        Ok(Self { surface, cam, n: surface.dim(), domain: surface.domain() })
    }

    fn x(&self, u: &[f64]) -> Vec<T> {
        self.surface.point(&to_t(u))
    }

    fn z(&self, u: &[f64]) -> Vec<f64> {
        to_f64(&self.cam.normalized_coordinates(&self.x(u)))
    }

    fn dual(&self, u: &[f64]) -> Vec<f64> {
        to_f64(&self.cam.dual_point(&self.x(u)))
    }

    fn bounds(&self, copies: usize) -> (Vec<f64>, Vec<f64>) {
        let lo = to_f64(&self.domain.lo);
        let hi = to_f64(&self.domain.hi);
        (lo.repeat(copies), hi.repeat(copies))
    }

    fn on_boundary(&self, u: &[f64]) -> bool {
        self.domain.inner_distance(&to_t(u)).as_f64() <= 1e-9 * self.domain.size().as_f64()
    }

    /// Distance from the cam center to the line through `x(u)` and `x(v)`, in normalized units.
    fn chord_distance(&self, u: &[f64], v: &[f64]) -> f64 {
        let (a, b) = (self.z(u), self.z(v));
        let d: Vec<f64> = b.iter().zip(&a).map(|(p, q)| p - q).collect();
        let dd = dot64(&d, &d);
        if dd < 1e-24 * (1.0 + dot64(&a, &a)) {
            return f64::INFINITY;
        }
        wedge_norm(&a, &d) / dd.sqrt()
    }

    /// Smallest distance from the cam center to a line in the tangent plane at `x(u)`:
    /// `√(|z|² − |P_T z|²)` with `P_T` the projection onto the normalized tangent space.
    fn tangent_distance(&self, u: &[f64]) -> f64 {
        let n = self.n;
        let d = n + 1;
        let ut = to_t::<T>(u);
        let z = to_f64(&self.cam.normalized_coordinates(&self.surface.point(&ut)));
        let jac = self.surface.partials(&ut);
        let cols: Vec<Vec<f64>> = (0..n).map(|i| to_f64(&self.cam.normalized_vector(&jac[i * d..(i + 1) * d]))).collect();
        let mut gram = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] = dot64(&cols[i], &cols[j]);
            }
        }
        let rhs: Vec<f64> = cols.iter().map(|c| dot64(c, &z)).collect();
        match gram.solve(&rhs) {
            Some(c) => (dot64(&z, &z) - dot64(&c, &rhs)).max(0.0).sqrt(),
            None => 0.0,
        }
    }
}

fn report(
    condition: Condition,
    value: f64,
    threshold: f64,
    margin: f64,
    resolution: f64,
    fail_below: f64,
    witness: Option<Witness>,
    samples: usize,
) -> ConditionReport {
    let status = if margin <= fail_below {
        Status::Fail
    } else if margin <= resolution {
        Status::Indeterminate
    } else {
        Status::Pass
    };
    let witness = match status {
        Status::Pass => witness.filter(|_| false),
        _ => witness,
    };
    ConditionReport { condition, status, value, threshold, margin, resolution, witness, samples }
}

fn argsort_smallest(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn pairs_with_boundary<T: Real>(domain: &ParamBox<T>, s: &ConditionSampling, offset: u64) -> Vec<Vec<f64>> {
    let mut pairs = halton_pairs(domain, s.pairs, offset);
    let bnd = boundary_lattice(domain, s.boundary_lattice);
    for i in 0..bnd.len() {
        for j in i + 1..bnd.len() {
            let mut v = bnd[i].clone();
            v.extend_from_slice(&bnd[j]);
            pairs.push(v);
        }
    }
    pairs
}

/// Condition (E): no line meeting X twice or tangent to X touches the cam. Distances are
/// measured from the cam center in coordinates where the cam is the unit ball (the point cam
/// is a ball of radius 0).
pub fn check_e<T: Real>(surface: &Hypersurface<T>, cam: &Cam<T>, s: &ConditionSampling) -> Result<ConditionReport> {
    let probe = Probe::new(surface, cam)?;
    let n = probe.n;
    let threshold = if cam.is_point() { 0.0 } else { 1.0 };
    let pairs = pairs_with_boundary(&probe.domain, s, 0);
    let chord_vals: Vec<f64> = pairs.par_iter().map(|v| probe.chord_distance(&v[..n], &v[n..])).collect();
    let mut points = halton_points(&probe.domain, s.tangent_points, 0);
    points.extend(boundary_lattice(&probe.domain, s.boundary_lattice));
    let tangent_vals: Vec<f64> = points.par_iter().map(|u| probe.tangent_distance(u)).collect();
    let sampled = chord_vals.iter().chain(&tangent_vals).cloned().fold(f64::INFINITY, f64::min);

    let (lo2, hi2) = probe.bounds(2);
    let chord_refined: Vec<(Vec<f64>, f64)> = argsort_smallest(&chord_vals, s.refine)
        .into_par_iter()
        .map(|i| {
            compass_minimize(|v| probe.chord_distance(&v[..n], &v[n..]), &pairs[i], &lo2, &hi2, 0.05, 1e-12, 20_000)
        })
        .collect();
    let (lo1, hi1) = probe.bounds(1);
    let tangent_refined: Vec<(Vec<f64>, f64)> = argsort_smallest(&tangent_vals, s.refine)
        .into_par_iter()
        .map(|i| compass_minimize(|u| probe.tangent_distance(u), &points[i], &lo1, &hi1, 0.05, 1e-12, 20_000))
        .collect();

    let best_chord = chord_refined.iter().min_by(|a, b| a.1.total_cmp(&b.1)).cloned();
    let best_tangent = tangent_refined.iter().min_by(|a, b| a.1.total_cmp(&b.1)).cloned();
    let chord_min = best_chord.as_ref().map_or(f64::INFINITY, |c| c.1);
    let tangent_min = best_tangent.as_ref().map_or(f64::INFINITY, |c| c.1);
    let value = chord_min.min(tangent_min).min(sampled);
    let witness = if chord_min <= tangent_min {
        best_chord.map(|(v, d)| {
            let (u, w) = (v[..n].to_vec(), v[n..].to_vec());
            Witness {
                points: vec![to_f64(&probe.x(&u)), to_f64(&probe.x(&w))],
                on_boundary: probe.on_boundary(&u) && probe.on_boundary(&w),
                params: vec![u, w],
                omega: None,
                value: d,
            }
        })
    } else {
        best_tangent.map(|(u, d)| Witness {
            points: vec![to_f64(&probe.x(&u))],
            on_boundary: probe.on_boundary(&u),
            params: vec![u],
            omega: None,
            value: d,
        })
    };
    let margin = value - threshold;
    let resolution = (sampled - value).max(0.0);
    Ok(report(Condition::E, value, threshold, margin, resolution, s.e_tol, witness, chord_vals.len() + tangent_vals.len()))
}

/// Points of `Z(x)` in ω: the latitude sphere `⟨y, ω⟩ = r` sampled in `count` directions.
fn incidence_omegas(y: &[f64], r: f64, count: usize) -> Vec<Vec<f64>> {
    let d = y.len();
    let ny = norm64(y);
    let frame = frame_with_axis(y);
    let (c, s) = (r / ny, (1.0 - (r / ny).powi(2)).max(0.0).sqrt());
    unit_directions(d - 1, count)
        .into_iter()
        .map(|dir| {
            let mut local = vec![0.0; d];
            for k in 0..d - 1 {
                local[k] = s * dir[k];
            }
            local[d - 1] = c;
            frame.mul_vec(&local)
        })
        .collect()
}

fn require_outside<T: Real>(cam: &Cam<T>, y: &[f64], u: &[f64]) -> Result<()> {
    let r = cam.offset().as_f64();
    if !(norm64(y) > r * (1.0 + 1e-9)) || norm64(y) == 0.0 {
        return Err(Error::Precondition(format!("surface point at u = {u:?} lies on or inside the cam")));
    }
    Ok(())
}

/// Row-normalized `|det J|` of the incidence Jacobian at `(x(u), σ(ω))`, with the tangent
/// coordinates of Σ taken orthonormal at ω.
fn scaled_jacobian_det<T: Real>(probe: &Probe<'_, T>, u: &[f64], omega: &[f64]) -> f64 {
    let n = probe.n;
    let d = n + 1;
    let ut = to_t::<T>(u);
    let jac = to_f64(&probe.surface.partials(&ut));
    let y = probe.dual(u);
    let cn = probe.cam.conormal_frame();
    let nmat = Mat::from_row_major(d, d, to_f64(cn.as_slice()));
    let tangent = frame_with_axis(omega);
    let n_omega = nmat.mul_vec(omega);
    let n_t: Vec<Vec<f64>> = (0..n).map(|j| nmat.mul_vec(&tangent.column(j))).collect();
    let mut m = Mat::<f64>::zeros(d, d);
    for i in 0..n {
        let row = &jac[i * d..(i + 1) * d];
        m[(i, 0)] = dot64(row, &n_omega);
        for j in 0..n {
            m[(i, j + 1)] = dot64(row, &n_t[j]);
        }
    }
    for j in 0..n {
        m[(n, j + 1)] = dot64(&y, &tangent.column(j));
    }
    for i in 0..d {
        let rn = norm64(m.row(i));
        if rn == 0.0 {
            return 0.0;
        }
        for j in 0..d {
            m[(i, j)] /= rn;
        }
    }
    m.det().abs()
}

/// Condition (I) through the local diffeomorphism criterion `det J_{ξ,τ} ≠ 0` on sampled
/// incidence pairs.
pub fn check_i<T: Real>(surface: &Hypersurface<T>, cam: &Cam<T>, s: &ConditionSampling) -> Result<ConditionReport> {
    let probe = Probe::new(surface, cam)?;
    let r = cam.offset().as_f64();
    let mut points = halton_points(&probe.domain, s.incidence_points, 0);
    points.extend(boundary_lattice(&probe.domain, 2));
    for u in &points {
        require_outside(cam, &probe.dual(u), u)?;
    }
    let per_point = (s.directions / 4).max(8);
    let probe = &probe;
    let samples: Vec<(usize, Vec<f64>, f64)> = points
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, u)| {
            incidence_omegas(&probe.dual(u), r, per_point).into_iter().map(move |w| {
                let v = scaled_jacobian_det(probe, u, &w);
                (i, w, v)
            })
        })
        .collect();
    let (i, w, value) = samples
        .iter()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .cloned()
        .ok_or_else(|| Error::Config("no incidence samples".into()))?;
    let witness = Witness {
        params: vec![points[i].clone()],
        points: vec![to_f64(&probe.x(&points[i]))],
        on_boundary: probe.on_boundary(&points[i]),
        omega: Some(w),
        value,
    };
    Ok(report(Condition::I, value, s.det_tol, value - s.det_tol, 0.0, 0.0, Some(witness), samples.len()))
}

/// Best common incident σ of a pair. Returns the scale-free score
/// `|a ∧ b| / (|b| |y₂ − y₁|)` with `a, b` the σ-differentials, the angle between them, and ω.
fn conjugacy(y1: &[f64], y2: &[f64], r: f64, samples: usize) -> Option<(f64, f64, Vec<f64>)> {
    let d = y1.len();
    let delta: Vec<f64> = y2.iter().zip(y1).map(|(a, b)| a - b).collect();
    let nd = norm64(&delta);
    if nd < 1e-12 * (1.0 + norm64(y1)) {
        return None;
    }
    let (a11, a22, a12) = (dot64(y1, y1), dot64(y2, y2), dot64(y1, y2));
    let gram = a11 * a22 - a12 * a12;
    let angle_of = |w: &[f64]| -> (f64, f64) {
        let a: Vec<f64> = y1.iter().zip(w).map(|(p, q)| p - r * q).collect();
        let b: Vec<f64> = y2.iter().zip(w).map(|(p, q)| p - r * q).collect();
        let wedge = wedge_norm(&a, &b);
        let (na, nb) = (norm64(&a), norm64(&b));
        let sin = if na * nb > 0.0 { (wedge / (na * nb)).min(1.0) } else { 0.0 };
        (wedge / (nb.max(f64::MIN_POSITIVE) * nd), sin.asin())
    };
    if gram <= 1e-14 * a11 * a22 {
        // y₂ ∥ y₁: a common σ exists only when r = 0, and then every σ ⊥ y₁ is conjugate.
        if r != 0.0 {
            return None;
        }
        let w = frame_with_axis(y1).column(0);
        let (score, angle) = angle_of(&w);
        return Some((score, angle, w));
    }
    let alpha = r * (a22 - a12) / gram;
    let beta = r * (a11 - a12) / gram;
    let v: Vec<f64> = y1.iter().zip(y2).map(|(p, q)| alpha * p + beta * q).collect();
    let rest = 1.0 - dot64(&v, &v);
    if rest < 0.0 {
        return None;
    }
    let basis = orthonormal_complement(&[y1.to_vec(), y2.to_vec()], d);
    let dirs = unit_directions(basis.len(), samples);
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for dir in dirs {
        let mut w = v.clone();
        for (c, b) in dir.iter().zip(&basis) {
            for k in 0..d {
                w[k] += rest.sqrt() * c * b[k];
            }
        }
        let (score, angle) = angle_of(&w);
        if best.as_ref().map_or(true, |b| score < b.0) {
            best = Some((score, angle, w));
        }
    }
    best
}

fn orthonormal_complement(span: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in span {
        let mut w = v.clone();
        for b in &basis {
            let p = dot64(&w, b);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let nw = norm64(&w);
        if nw > 1e-12 {
            basis.push(w.into_iter().map(|x| x / nw).collect());
        }
    }
    let k = basis.len();
    for e in 0..d {
        let mut w = vec![0.0; d];
        w[e] = 1.0;
        for b in &basis {
            let p = dot64(&w, b);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let nw = norm64(&w);
        if nw > 1e-6 {
            basis.push(w.into_iter().map(|x| x / nw).collect());
        }
    }
    basis.split_off(k)
}

/// Condition (II): no pair x ≠ y with a common incident σ and parallel σ-differentials.
pub fn check_conjugate<T: Real>(surface: &Hypersurface<T>, cam: &Cam<T>, s: &ConditionSampling) -> Result<ConditionReport> {
    let probe = Probe::new(surface, cam)?;
    let n = probe.n;
    let r = cam.offset().as_f64();
    let circle = if n == 2 { 2 } else { s.directions };
    let pairs = pairs_with_boundary(&probe.domain, s, 101);
    let score_of = |v: &[f64]| -> f64 {
        conjugacy(&probe.dual(&v[..n]), &probe.dual(&v[n..]), r, circle).map_or(f64::INFINITY, |c| c.0)
    };
    let scores: Vec<f64> = pairs.par_iter().map(|v| score_of(v)).collect();
    let (lo2, hi2) = probe.bounds(2);
    let refined: Vec<(Vec<f64>, f64)> = argsort_smallest(&scores, s.refine)
        .into_par_iter()
        .map(|i| compass_minimize(&score_of, &pairs[i], &lo2, &hi2, 0.05, 1e-12, 20_000))
        .collect();
    let Some((v, score)) = refined.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
        let value = f64::INFINITY;
        return Ok(report(Condition::II, value, s.angle_tol, value, 0.0, 0.0, None, scores.len()));
    };
    let (u, w) = (v[..n].to_vec(), v[n..].to_vec());
    let (_, angle, omega) = conjugacy(&probe.dual(&u), &probe.dual(&w), r, circle).expect("refined pair is incident");
    let witness = Witness {
        points: vec![to_f64(&probe.x(&u)), to_f64(&probe.x(&w))],
        on_boundary: probe.on_boundary(&u) && probe.on_boundary(&w),
        params: vec![u, w],
        omega: Some(omega),
        value: angle,
    };
    Ok(report(Condition::II, score, s.angle_tol, score - s.angle_tol, 0.0, 0.0, Some(witness), scores.len()))
}

/// Regularized `Q_n(x, y; ε)` at one ε level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnLevel {
    pub eps: f64,
    /// `Re iⁿ Q_n(ε)` divided by `∫ |(Φ(x,·) − iε)^{−n}| dΣ/d_σΦ(y,·)`.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnValue {
    pub value: f64,
    pub residual: f64,
    pub levels: Vec<QnLevel>,
}

fn re_i_pow(n: usize, z: Complex<f64>) -> f64 {
    match n % 4 {
        0 => z.re,
        1 => -z.im,
        2 => -z.re,
        _ => z.im,
    }
}

/// Normalized `Re iⁿ Q_n(x, y; ε)` for each ε, evaluated over `slice_on_cam(y)`.
pub fn q_n_regularized<T: Real>(
    ux: &[T],
    uy: &[T],
    cam: &Cam<T>,
    surface: &Hypersurface<T>,
    eps: &[f64],
    cells: &[usize],
) -> Result<Vec<QnLevel>> {
    let n = surface.dim();
    let (x, y) = (surface.point(ux), surface.point(uy));
    let sep: Vec<T> = x.iter().zip(&y).map(|(&a, &b)| a - b).collect();
    if norm(&sep) <= T::tol(1e-12) * (T::one() + norm(&x)) {
        return Err(Error::Precondition("Q_n needs x != y".into()));
    }
    let slice = slice_on_cam(&y, cam, cells)?;
    let yx = to_f64(&cam.dual_point(&x));
    let r = cam.offset().as_f64();
    let phis: Vec<f64> = (0..slice.len()).map(|i| dot64(&yx, &to_f64(slice.point(i))) - r).collect();
    let weights = to_f64(&slice.weights);
    Ok(eps
        .iter()
        .map(|&e| {
            let mut acc = Complex::new(0.0, 0.0);
            let mut abs = 0.0;
            for (&phi, &w) in phis.iter().zip(&weights) {
                let z = Complex::new(phi, -e).powi(-(n as i32));
                acc += z * w;
                abs += z.norm() * w;
            }
            QnLevel { eps: e, normalized: re_i_pow(n, acc) / abs }
        })
        .collect())
}

/// Φ-units of one slice step on `Z(y)` for the kernel at x.
pub fn q_n_step<T: Real>(ux: &[T], cam: &Cam<T>, surface: &Hypersurface<T>, cells: &[usize]) -> f64 {
    let yx = cam.dual_point(&surface.point(ux));
    norm(&yx).as_f64() * std::f64::consts::TAU / *cells.last().unwrap_or(&1) as f64
}

/// Condition (III) at one pair: extrapolated normalized `Re iⁿ Q_n(x, y)`.
pub fn q_n_check<T: Real>(
    ux: &[T],
    uy: &[T],
    cam: &Cam<T>,
    surface: &Hypersurface<T>,
    schedule: &RegularizationSchedule,
    cells: &[usize],
) -> Result<QnValue> {
    schedule.validate()?;
    let eps = schedule.epsilons(q_n_step(ux, cam, surface, cells));
    let levels = q_n_regularized(ux, uy, cam, surface, &eps, cells)?;
    let vals: Vec<f64> = levels.iter().map(|l| l.normalized).collect();
    let ex = extrapolate(&eps, &vals);
    Ok(QnValue { value: ex.value, residual: ex.residual, levels })
}

/// Condition (III) over sampled pairs: the median of the normalized |Re iⁿ Q_n| must stay
/// below the tolerance.
pub fn check_q_n<T: Real>(surface: &Hypersurface<T>, cam: &Cam<T>, s: &ConditionSampling) -> Result<ConditionReport> {
    let probe = Probe::new(surface, cam)?;
    let n = probe.n;
    let cells = s.qn_cells(n);
    let size = probe.domain.size().as_f64();
    let pairs: Vec<Vec<f64>> = halton_pairs(&probe.domain, 4 * s.qn_pairs, 211)
        .into_iter()
        .filter(|v| norm64(&v[..n].iter().zip(&v[n..]).map(|(a, b)| a - b).collect::<Vec<_>>()) > 0.1 * size)
        .take(s.qn_pairs)
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|v| {
            q_n_check(&to_t::<T>(&v[..n]), &to_t::<T>(&v[n..]), cam, surface, &s.qn_schedule, &cells).map(|q| q.value.abs())
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Config("no separated pairs for the Q_n check".into()));
    }
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let worst = argsort_smallest(&values.iter().map(|v| -v).collect::<Vec<_>>(), 1)[0];
    let (u, w) = (pairs[worst][..n].to_vec(), pairs[worst][n..].to_vec());
    let witness = Witness {
        points: vec![to_f64(&probe.x(&u)), to_f64(&probe.x(&w))],
        on_boundary: probe.on_boundary(&u) && probe.on_boundary(&w),
        params: vec![u, w],
        omega: None,
        value: values[worst],
    };
    Ok(report(Condition::III, median, s.qn_tol, s.qn_tol - median, 0.0, 0.0, Some(witness), values.len()))
}

/// All four validators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub reports: Vec<ConditionReport>,
    /// False when (E) passes but a conjugate pair was found, which points at a discretization
    /// problem rather than at the geometry.
    pub consistent: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.status == Status::Pass)
    }

    pub fn get(&self, c: Condition) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.condition == c)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<6} {:<14} {:>14} {:>12} {:>14}\n", "cond", "status", "value", "threshold", "margin");
        for r in &self.reports {
            out.push_str(&format!(
                "{:<6} {:<14} {:>14.6e} {:>12.3e} {:>14.6e}\n",
                r.condition.to_string(),
                r.status.to_string(),
                r.value,
                r.threshold,
                r.margin
            ));
        }
        if !self.consistent {
            out.push_str("warning: (E) passed but a conjugate pair was found\n");
        }
        out
    }
}

/// Runs (E), (I), (II) and (III). A point cam skips nothing: (E) uses a ball of radius 0.
pub fn validate<T: Real>(surface: &Hypersurface<T>, cam: &Cam<T>, s: &ConditionSampling) -> Result<ValidationReport> {
    let e = check_e(surface, cam, s)?;
    let i = check_i(surface, cam, s)?;
    let ii = check_conjugate(surface, cam, s)?;
    let iii = check_q_n(surface, cam, s)?;
    let consistent = !(e.status == Status::Pass && ii.status == Status::Fail);
    Ok(ValidationReport { reports: vec![e, i, ii, iii], consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{QuadraticGraph, StereographicPatch};

    fn cap() -> Hypersurface<f64> {
        Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.4).unwrap())
    }

    #[test]
    fn default_cap_margin_matches_chord_argument() {
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        let r = check_e(&cap(), &cam, &ConditionSampling::quick()).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert!((r.margin - (0.4 / 0.3 - 1.0)).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn large_cam_fails_on_a_boundary_chord() {
        let cam = Cam::sphere(vec![0.0; 3], 0.5).unwrap();
        let r = check_e(&cap(), &cam, &ConditionSampling::quick()).unwrap();
        assert_eq!(r.status, Status::Fail);
        let w = r.witness.unwrap();
        assert!(w.on_boundary && w.params.len() == 2);
    }

    #[test]
    fn collinear_pair_with_point_cam_fails() {
        let bowl = Hypersurface::new(QuadraticGraph::new(-1.0, vec![4.0, 4.0], 0.8).unwrap());
        let cam = Cam::point(vec![0.0; 3]);
        let s = ConditionSampling::quick();
        assert_eq!(check_e(&bowl, &cam, &s).unwrap().status, Status::Fail);
        let c = check_conjugate(&bowl, &cam, &s).unwrap();
        assert_eq!(c.status, Status::Fail, "{c:?}");
    }

    #[test]
    fn jacobian_on_the_default_cap() {
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        let r = check_i(&cap(), &cam, &ConditionSampling::quick()).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert!(r.value > 1e-3, "{r:?}");
    }

    #[test]
    fn surface_on_the_cam_is_rejected() {
        let cam = Cam::sphere(vec![0.0; 3], 1.0).unwrap();
        assert!(matches!(check_i(&cap(), &cam, &ConditionSampling::quick()), Err(Error::Precondition(_))));
    }

    #[test]
    fn no_conjugates_on_the_default_cap() {
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        let r = check_conjugate(&cap(), &cam, &ConditionSampling::quick()).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");
    }

    #[test]
    fn q_n_vanishes_on_the_default_cap() {
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        let s = ConditionSampling { qn_pairs: 6, ..ConditionSampling::quick() };
        let r = check_q_n(&cap(), &cam, &s).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");
    }
}
