//! Deterministic sample sets and a bounded compass search used by the validators.

use crate::geometry::ParamBox;
use crate::scalar::Real;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let (mut f, mut r) = (inv, 0.0);
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Point `index` of the Halton sequence in `[0,1)^dim` (index 0 is skipped).
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence limited to {} dimensions", PRIMES.len());
    (0..dim).map(|k| radical_inverse(index + 1, PRIMES[k])).collect()
}

pub(crate) fn to_box<T: Real>(unit: &[f64], region: &ParamBox<T>) -> Vec<f64> {
    unit.iter()
        .enumerate()
        .map(|(a, &t)| region.lo[a].as_f64() + t * region.width(a).as_f64())
        .collect()
}

/// Halton pairs in U × U, flattened as `[u, u′]`.
pub(crate) fn halton_pairs<T: Real>(region: &ParamBox<T>, count: usize, offset: u64) -> Vec<Vec<f64>> {
    let n = region.dim();
    (0..count as u64)
        .map(|i| {
            let h = halton(i + offset, 2 * n);
            let mut v = to_box(&h[..n], region);
            v.extend(to_box(&h[n..], region));
            v
        })
        .collect()
}

pub(crate) fn halton_points<T: Real>(region: &ParamBox<T>, count: usize, offset: u64) -> Vec<Vec<f64>> {
    (0..count as u64).map(|i| to_box(&halton(i + offset, region.dim()), region)).collect()
}

/// Points of the `k^n` lattice (endpoints included) that lie on the boundary of the box.
pub(crate) fn boundary_lattice<T: Real>(region: &ParamBox<T>, k: usize) -> Vec<Vec<f64>> {
    let n = region.dim();
    let k = k.max(2);
    let mut out = Vec::new();
    for flat in 0..k.pow(n as u32) {
        let mut idx = flat;
        let mut u = vec![0.0; n];
        let mut on_edge = false;
        for a in 0..n {
            let i = idx % k;
            idx /= k;
            on_edge |= i == 0 || i == k - 1;
            u[a] = region.lo[a].as_f64() + region.width(a).as_f64() * i as f64 / (k - 1) as f64;
        }
        if on_edge {
            out.push(u);
        }
    }
    out
}

/// `count` roughly uniform unit vectors in R^m for m = 2 (equal angles) or 3 (Fibonacci).
pub(crate) fn unit_directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    let tau = std::f64::consts::TAU;
    match m {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count).map(|i| {
            let t = tau * i as f64 / count as f64;
            vec![t.cos(), t.sin()]
        }).collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
    }
}

/// Compass search for a minimum of `f` inside `[lo, hi]`, starting at `x0` with step `step`
/// (per coordinate, relative to the box width) and halving down to `min_step`.
pub(crate) fn compass_minimize(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    step: f64,
    min_step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let m = x0.len();
    let mut x = x0.to_vec();
    let mut best = f(&x);
    let mut s = step;
    let mut evals = 1;
    let mut trial = x.clone();
    while s > min_step && evals < max_evals {
        let mut improved = false;
        for k in 0..m {
            for sign in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[k] = (x[k] + sign * s * (hi[k] - lo[k])).clamp(lo[k], hi[k]);
                if trial[k] == x[k] {
                    continue;
                }
                let v = f(&trial);
                evals += 1;
                if v < best {
                    best = v;
                    x.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            s *= 0.5;
        }
    }
    (x, best)
}
