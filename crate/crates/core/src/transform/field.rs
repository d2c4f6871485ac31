use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::geometry::ParamBox;
use crate::scalar::Real;

/// Differentiability class of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Smoothness {
    Finite(u32),
    Infinite,
}

impl Smoothness {
    /// Whether this class covers the reconstruction hypotheses for dimension n
    /// (`C^{n−1}` for odd n, `C^{n−1+ε}` for even n).
    pub fn admits(self, n: usize) -> bool {
        match self {
            Smoothness::Infinite => true,
            Smoothness::Finite(k) => {
                let need = (n - 1) as u32;
                if n % 2 == 0 {
                    k > need
                } else {
                    k >= need
                }
            }
        }
    }
}

/// A function on the parameter domain of X, vanishing outside a union of boxes.
#[derive(Clone)]
pub struct ScalarField<T> {
    eval: Arc<dyn Fn(&[T]) -> T + Send + Sync>,
    support: Vec<ParamBox<T>>,
    smoothness: Smoothness,
    descriptor: Value,
}

impl<T: Real> ScalarField<T> {
    pub fn new(
        eval: impl Fn(&[T]) -> T + Send + Sync + 'static,
        support: Vec<ParamBox<T>>,
        smoothness: Smoothness,
        descriptor: Value,
    ) -> Self {
        Self { eval: Arc::new(eval), support, smoothness, descriptor }
    }

    pub fn zero() -> Self {
        Self::new(|_| T::zero(), Vec::new(), Smoothness::Infinite, json!("zero"))
    }

    #[inline]
    pub fn eval(&self, u: &[T]) -> T {
        (self.eval)(u)
    }

    pub fn support(&self) -> &[ParamBox<T>] {
        &self.support
    }

    /// Smallest box containing every support box; `None` for the zero field.
    pub fn support_hull(&self) -> Option<ParamBox<T>> {
        let first = self.support.first()?;
        let mut hull = first.clone();
        for b in &self.support[1..] {
            for a in 0..hull.dim() {
                hull.lo[a] = hull.lo[a].min(b.lo[a]);
                hull.hi[a] = hull.hi[a].max(b.hi[a]);
            }
        }
        Some(hull)
    }

    pub fn in_support(&self, u: &[T]) -> bool {
        self.support.iter().any(|b| b.contains(u))
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn descriptor(&self) -> &Value {
        &self.descriptor
    }

    /// `a·f + b·h`.
    pub fn combine(a: T, f: &Self, b: T, h: &Self) -> Self {
        let (fe, he) = (f.eval.clone(), h.eval.clone());
        let mut support = f.support.clone();
        support.extend(h.support.iter().cloned());
        Self::new(
            move |u| a * fe(u) + b * he(u),
            support,
            f.smoothness.min(h.smoothness),
            json!({ "combine": [a.as_f64(), f.descriptor, b.as_f64(), h.descriptor] }),
        )
    }

    /// Pointwise product with a smooth function (same support).
    pub fn multiplied(&self, g: impl Fn(&[T]) -> T + Send + Sync + 'static, tag: Value) -> Self {
        let fe = self.eval.clone();
        Self::new(
            move |u| fe(u) * g(u),
            self.support.clone(),
            self.smoothness,
            json!({ "product": [self.descriptor, tag] }),
        )
    }
}

impl<T> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField").field("descriptor", &self.descriptor).field("smoothness", &self.smoothness).finish()
    }
}
