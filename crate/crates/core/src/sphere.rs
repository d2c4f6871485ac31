//! Quadrature on the unit spheres S^2 and S^3 and their angle charts.
//!
//! Angle charts put the polar axis along the last ambient coordinate:
//!
//! * S^2: `(θ, φ) ↦ (sinθ cosφ, sinθ sinφ, cosθ)`, volume element `sinθ`.
//! * S^3: `(χ, θ, φ) ↦ (sinχ sinθ cosφ, sinχ sinθ sinφ, sinχ cosθ, cosχ)`,
//!   volume element `sin²χ sinθ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n > 0);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let half = (n + 1) / 2;
    let nf = T::count(n);
    for i in 0..half {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (T::PI() * (T::count(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != T::zero() { d } else { dp };
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::count(k);
        let p2 = ((kf + kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::count(n);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Gauss rule for `∫_0^π g(χ) sin²χ dχ` (Chebyshev of the second kind in `cos χ`).
/// Nodes are uniform in χ.
pub fn chebyshev_u_angles<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let step = T::PI() / T::count(n + 1);
    (1..=n)
        .map(|i| {
            let chi = step * T::count(i);
            let s = chi.sin();
            (chi, step * s * s)
        })
        .unzip()
}

/// Maps angle coordinates to a point on S^n (`angles.len() == n`, `out.len() == n + 1`).
#[inline]
pub fn angles_to_point<T: Real>(angles: &[T], out: &mut [T]) {
    match angles.len() {
        2 => {
            let (st, ct) = angles[0].sin_cos();
            let (sp, cp) = angles[1].sin_cos();
            out[0] = st * cp;
            out[1] = st * sp;
            out[2] = ct;
        }
        3 => {
            let (sc, cc) = angles[0].sin_cos();
            let (st, ct) = angles[1].sin_cos();
            let (sp, cp) = angles[2].sin_cos();
            out[0] = sc * st * cp;
            out[1] = sc * st * sp;
            out[2] = sc * ct;
            out[3] = cc;
        }
        k => panic!("angle chart of S^{k} not supported"),
    }
}

/// Partial derivatives of the angle chart: `out[j * (n+1) + k] = ∂ω_k/∂angle_j`.
#[inline]
pub fn angle_partials<T: Real>(angles: &[T], out: &mut [T]) {
    match angles.len() {
        2 => {
            let (st, ct) = angles[0].sin_cos();
            let (sp, cp) = angles[1].sin_cos();
            out[..3].copy_from_slice(&[ct * cp, ct * sp, -st]);
            out[3..6].copy_from_slice(&[-st * sp, st * cp, T::zero()]);
        }
        3 => {
            let (sc, cc) = angles[0].sin_cos();
            let (st, ct) = angles[1].sin_cos();
            let (sp, cp) = angles[2].sin_cos();
            out[..4].copy_from_slice(&[cc * st * cp, cc * st * sp, cc * ct, -sc]);
            out[4..8].copy_from_slice(&[sc * ct * cp, sc * ct * sp, -sc * st, T::zero()]);
            out[8..12].copy_from_slice(&[-sc * st * sp, sc * st * cp, T::zero(), T::zero()]);
        }
        k => panic!("angle chart of S^{k} not supported"),
    }
}

/// Density of the S^n volume element in angle coordinates.
#[inline]
pub fn angle_volume_element<T: Real>(angles: &[T]) -> T {
    match angles.len() {
        2 => angles[0].sin().abs(),
        3 => {
            let s = angles[0].sin();
            s * s * angles[1].sin().abs()
        }
        k => panic!("angle chart of S^{k} not supported"),
    }
}

/// Parameter box of the angle chart: polar angles in `[0, π]`, azimuth periodic in `[0, 2π)`.
pub fn angle_box<T: Real>(n: usize) -> (Vec<T>, Vec<T>, Vec<bool>) {
    let two_pi = T::PI() + T::PI();
    let mut lo = vec![T::zero(); n];
    let mut hi = vec![T::PI(); n];
    let mut periodic = vec![false; n];
    hi[n - 1] = two_pi;
    periodic[n - 1] = true;
    lo[n - 1] = T::zero();
    (lo, hi, periodic)
}

/// Product quadrature grid on S^n used to sample sinograms.
#[derive(Clone, Debug)]
pub struct CamGrid<T> {
    n: usize,
    shape: Vec<usize>,
    nodes: Vec<T>,
    weights: Vec<T>,
    angles: Vec<T>,
    spacing: T,
}

/// Resolution of a [`CamGrid`]: `[polar, azimuth]` for S^2 and `[chi, theta, phi]` for S^3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CamGridSpec(pub Vec<usize>);

impl<T: Real> CamGrid<T> {
    /// Gauss–Legendre in `cos θ` times uniform azimuth (S^2); Chebyshev-U in `cos χ`
    /// times Gauss–Legendre in `cos θ` times uniform azimuth (S^3). Row-major over the
    /// listed angles, azimuth fastest.
    pub fn product(n: usize, shape: &[usize]) -> Result<Self> {
        if shape.len() != n || shape.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!("cam grid shape {shape:?} does not match n = {n}")));
        }
        let two_pi = T::PI() + T::PI();
        let polar_gl = |m: usize| -> (Vec<T>, Vec<T>) {
            let (z, w) = gauss_legendre::<T>(m);
            // θ = arccos(-z) ascends from the north pole.
            (z.iter().map(|&zi| (-zi).acos()).collect(), w)
        };
        let azimuth = |m: usize| -> Vec<T> { (0..m).map(|j| two_pi * T::count(j) / T::count(m)).collect() };
        let mut axes: Vec<(Vec<T>, Vec<T>)> = Vec::new();
        match n {
            2 => {
                axes.push(polar_gl(shape[0]));
                let phi = azimuth(shape[1]);
                let w = vec![two_pi / T::count(shape[1]); shape[1]];
                axes.push((phi, w));
            }
            3 => {
                axes.push(chebyshev_u_angles(shape[0]));
                axes.push(polar_gl(shape[1]));
                let phi = azimuth(shape[2]);
                let w = vec![two_pi / T::count(shape[2]); shape[2]];
                axes.push((phi, w));
            }
            _ => return Err(Error::UnsupportedDimension(n)),
        }
        let total: usize = shape.iter().product();
        let d = n + 1;
        let mut nodes = vec![T::zero(); total * d];
        let mut weights = vec![T::zero(); total];
        let mut angles = vec![T::zero(); total * n];
        let mut idx = vec![0usize; n];
        for k in 0..total {
            let mut rem = k;
            for a in (0..n).rev() {
                idx[a] = rem % shape[a];
                rem /= shape[a];
            }
            let mut w = T::one();
            for a in 0..n {
                angles[k * n + a] = axes[a].0[idx[a]];
                w = w * axes[a].1[idx[a]];
            }
            angles_to_point(&angles[k * n..(k + 1) * n], &mut nodes[k * d..(k + 1) * d]);
            weights[k] = w;
        }
        let mut spacing = two_pi / T::count(shape[n - 1]);
        for axis in axes.iter().take(n - 1) {
            let a = &axis.0;
            for pair in a.windows(2) {
                spacing = spacing.max(pair[1] - pair[0]);
            }
        }
        Ok(Self { n, shape: shape.to_vec(), nodes, weights, angles, spacing })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[T] {
        let d = self.n + 1;
        &self.nodes[k * d..(k + 1) * d]
    }

    pub fn angles(&self, k: usize) -> &[T] {
        &self.angles[k * self.n..(k + 1) * self.n]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Largest angular gap between neighbouring nodes along any grid axis.
    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn nodes_flat(&self) -> &[T] {
        &self.nodes
    }
}
