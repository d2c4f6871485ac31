//! One-dimensional model of the regularized kernels, `∫_a^b w(t) (t − iε)^{−n} dt`.

use num_complex::Complex64;

use super::extrapolate::{extrapolate, Extrapolation, RegularizationSchedule};
use crate::scalar::factorial;
use crate::sphere::gauss_legendre;

/// `∫_a^b w(t) (t − iε)^{−n} dt` by composite 8-point Gauss–Legendre on panels of width ≤ ε/4.
pub fn surrogate_integral(w: impl Fn(f64) -> f64, n: usize, eps: f64, a: f64, b: f64) -> Complex64 {
    let (nodes, weights) = gauss_legendre::<f64>(8);
    let panels = (((b - a) / (eps / 4.0)).ceil() as usize).max(1);
    let width = (b - a) / panels as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (z, wq) in nodes.iter().zip(&weights) {
            let t = mid + 0.5 * width * z;
            let k = Complex64::new(t, -eps).powi(-(n as i32));
            sum += k * (w(t) * wq * 0.5 * width);
        }
    }
    sum
}

/// Finite part `Re ∫ w (t − i0)^{−n}` extrapolated over the schedule with unit `h`.
pub fn surrogate_finite_part(
    w: impl Fn(f64) -> f64,
    n: usize,
    a: f64,
    b: f64,
    schedule: &RegularizationSchedule,
    h: f64,
) -> Extrapolation<f64> {
    let eps = schedule.epsilons(h);
    let vals: Vec<f64> = eps.iter().map(|&e| surrogate_integral(&w, n, e, a, b).re).collect();
    extrapolate(&eps, &vals)
}

/// `⟨δ^{(n−1)}, w⟩ = (−1)^{n−1} ((n−1)!/π) Im ∫ w (t − i0)^{−n}`, extrapolated.
pub fn surrogate_delta(
    w: impl Fn(f64) -> f64,
    n: usize,
    a: f64,
    b: f64,
    schedule: &RegularizationSchedule,
    h: f64,
) -> Extrapolation<f64> {
    let c = delta_coefficient(n);
    let eps = schedule.epsilons(h);
    let vals: Vec<f64> = eps.iter().map(|&e| c * surrogate_integral(&w, n, e, a, b).im).collect();
    extrapolate(&eps, &vals)
}

pub(crate) fn delta_coefficient(n: usize) -> f64 {
    let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
    sign * factorial::<f64>(n - 1) / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_matches_closed_form() {
        // ∫_{-1}^{1} (t − iε)^{−2} dt = −2/(1 + ε²).
        for eps in [0.1, 0.02] {
            let v = surrogate_integral(|_| 1.0, 2, eps, -1.0, 1.0);
            assert!((v.re + 2.0 / (1.0 + eps * eps)).abs() < 1e-12, "{v}");
            assert!(v.im.abs() < 1e-12);
        }
    }
}
