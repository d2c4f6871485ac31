use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// ε levels `ε_k = (eps0 − k·step)·h`, `k = 0..levels`, in units of the grid step `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationSchedule {
    pub eps0: f64,
    pub step: f64,
    pub levels: usize,
}

impl Default for RegularizationSchedule {
    fn default() -> Self {
        Self { eps0: 5.0, step: 1.0, levels: 4 }
    }
}

impl RegularizationSchedule {
    pub fn new(eps0: f64, step: f64, levels: usize) -> Result<Self> {
        let s = Self { eps0, step, levels };
        s.validate()?;
        Ok(s)
    }

    /// Smallest multiple of h in the schedule.
    pub fn min_multiple(&self) -> f64 {
        self.eps0 - (self.levels as f64 - 1.0) * self.step
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidSchedule(format!("need at least 2 levels, got {}", self.levels)));
        }
        if !(self.step > 0.0) || !self.eps0.is_finite() {
            return Err(Error::InvalidSchedule("ε levels must be strictly decreasing".into()));
        }
        if self.min_multiple() < 2.0 - 1e-12 {
            return Err(Error::InvalidSchedule(format!(
                "smallest level {}h is below 2h and cannot be resolved by the grid",
                self.min_multiple()
            )));
        }
        Ok(())
    }

    pub fn multiples(&self) -> Vec<f64> {
        (0..self.levels).map(|k| self.eps0 - k as f64 * self.step).collect()
    }

    pub fn epsilons<T: Real>(&self, h: T) -> Vec<T> {
        self.multiples().into_iter().map(|m| T::lit(m) * h).collect()
    }
}

/// Polynomial extrapolation of level values to ε = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation<T> {
    pub value: T,
    /// |P(all levels) − P(all but the smallest ε)| at ε = 0.
    pub residual: T,
    pub diverging: bool,
    pub eps: Vec<T>,
    pub samples: Vec<T>,
}

/// Value at 0 of the interpolating polynomial through `(xs, ys)` (Neville).
pub fn neville_at_zero<T: Real>(xs: &[T], ys: &[T]) -> T {
    let mut p = ys.to_vec();
    let m = xs.len();
    for level in 1..m {
        for i in 0..m - level {
            let (a, b) = (xs[i], xs[i + level]);
            p[i] = (b * p[i] - a * p[i + 1]) / (b - a);
        }
    }
    p[0]
}

/// Extrapolates `values[k]` sampled at `eps[k]` (ordered from largest ε) to ε → 0 with the
/// polynomial through all levels. The successive extrapolants through the leading `j` levels
/// give the residual sequence; a sequence that more than doubles at every step, ending above a
/// relative floor, flags divergence.
pub fn extrapolate<T: Real>(eps: &[T], values: &[T]) -> Extrapolation<T> {
    assert_eq!(eps.len(), values.len());
    assert!(!eps.is_empty());
    let m = eps.len();
    let partial: Vec<T> = (1..=m).map(|j| neville_at_zero(&eps[..j], &values[..j])).collect();
    let value = partial[m - 1];
    let residual = if m >= 2 { (partial[m - 1] - partial[m - 2]).abs() } else { T::zero() };
    let scale = values.iter().fold(T::zero(), |s, v| s.max(v.abs())).max(value.abs());
    let steps: Vec<T> = partial.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let growing = steps.len() >= 2 && steps.windows(2).all(|w| w[1] > w[0] + w[0]);
    let diverging = growing && residual > T::lit(1e-3) * scale;
    Extrapolation { value, residual, diverging, eps: eps.to_vec(), samples: values.to_vec() }
}
