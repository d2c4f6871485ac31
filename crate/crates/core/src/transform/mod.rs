//! Forward transform `M_Φ f(σ)`: Leray slice integrals, sinograms and a Monte-Carlo oracle.

mod field;
mod sinogram;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Cam, CamPoint, Hypersurface, ParamBox};
use crate::linalg::small_det;
use crate::scalar::{dot, norm, Real};
use crate::slicing::{slice_on_x, surface_level_constant, CellRange, SampledSurface};
use crate::sphere::CamGrid;

pub use field::{ScalarField, Smoothness};
pub use sinogram::{geometry_descriptor, geometry_hash, GridsMeta, Sinogram, SinogramMeta, FORMAT_VERSION};

/// Forward evaluator for one field on one sampled geometry.
pub struct Projector<'a, T: Real> {
    sampled: &'a SampledSurface<T>,
    cam: &'a Cam<T>,
    field: &'a ScalarField<T>,
    region: Option<ParamBox<T>>,
    ball: Option<(Vec<T>, T)>,
}

/// One forward value with slice diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardValue<T> {
    pub value: T,
    pub nodes: usize,
    pub touches_boundary: bool,
    /// The hyperplane was shown to miss the support without slicing.
    pub pruned: bool,
}

impl<'a, T: Real> Projector<'a, T> {
    pub fn new(sampled: &'a SampledSurface<T>, cam: &'a Cam<T>, field: &'a ScalarField<T>) -> Self {
        let domain = sampled.surface().domain();
        let region = field.support_hull().and_then(|h| h.intersect(&domain));
        let ball = region.as_ref().map(|r| {
            let range: CellRange = sampled.covering_range(r);
            sampled.bounding_ball(&range)
        });
        Self { sampled, cam, field, region, ball }
    }

    pub fn value(&self, p: &CamPoint<T>) -> Result<ForwardValue<T>> {
        let zero = ForwardValue { value: T::zero(), nodes: 0, touches_boundary: false, pruned: true };
        let (Some(region), Some((center, radius))) = (&self.region, &self.ball) else {
            return Ok(zero);
        };
        let constant = surface_level_constant(self.cam, p);
        if (dot(center, &p.normal) - constant).abs() > norm(&p.normal) * *radius {
            return Ok(zero);
        }
        let slice = slice_on_x(self.sampled, self.cam, p, Some(region))?;
        let value = slice.integrate(|u| self.field.eval(u));
        Ok(ForwardValue { value, nodes: slice.len(), touches_boundary: slice.touches_boundary, pruned: false })
    }
}

/// `M_Φ f(σ)` as the Leray integral of f over `Z(σ)`.
pub fn forward<T: Real>(field: &ScalarField<T>, p: &CamPoint<T>, cam: &Cam<T>, sampled: &SampledSurface<T>) -> Result<T> {
    Ok(Projector::new(sampled, cam, field).value(p)?.value)
}

/// A sinogram with projection diagnostics.
#[derive(Clone, Debug)]
pub struct Projection<T> {
    pub sinogram: Sinogram<T>,
    pub boundary_touches: usize,
    pub pruned: usize,
}

/// Forward transform at every node of the cam grid, in node order.
pub fn project<T: Real>(
    field: &ScalarField<T>,
    cam: &Cam<T>,
    sampled: &SampledSurface<T>,
    grid: &CamGrid<T>,
) -> Result<Sinogram<T>> {
    Ok(project_detailed(field, cam, sampled, grid)?.sinogram)
}

pub fn project_detailed<T: Real>(
    field: &ScalarField<T>,
    cam: &Cam<T>,
    sampled: &SampledSurface<T>,
    grid: &CamGrid<T>,
) -> Result<Projection<T>> {
    if grid.dim() + 1 != cam.ambient_dim() || sampled.surface().ambient_dim() != cam.ambient_dim() {
        return Err(Error::Config("cam grid, cam and surface dimensions disagree".into()));
    }
    let projector = Projector::new(sampled, cam, field);
    let results: Vec<ForwardValue<T>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let p = cam.point_at(grid.node(k));
            projector.value(&p).map_err(|e| Error::Projection {
                index: k,
                omega: grid.node(k).iter().map(|v| v.as_f64()).collect(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = SinogramMeta::new(cam, sampled.surface(), grid.shape(), sampled.grid().cells());
    let boundary_touches = results.iter().filter(|r| r.touches_boundary).count();
    let pruned = results.iter().filter(|r| r.pruned).count();
    let sinogram = Sinogram::new(meta, grid, results.into_iter().map(|r| r.value).collect())?;
    Ok(Projection { sinogram, boundary_touches, pruned })
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub hits: usize,
}

/// `(1/2ε) ∫_{|Φ(x(u),σ)| ≤ ε} f √det g du` by uniform sampling of the support box.
pub fn thin_slab_oracle<T: Real>(
    field: &ScalarField<T>,
    p: &CamPoint<T>,
    cam: &Cam<T>,
    surface: &Hypersurface<T>,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    if !(eps > 0.0) || samples == 0 {
        return Err(Error::Config("thin-slab oracle needs ε > 0 and at least one sample".into()));
    }
    let Some(region) = field.support_hull().and_then(|h| h.intersect(&surface.domain())) else {
        return Ok(OracleEstimate { value: 0.0, stderr: 0.0, samples, hits: 0 });
    };
    let n = surface.dim();
    let d = n + 1;
    let volume: f64 = (0..n).map(|a| region.width(a).as_f64()).product();
    let constant = surface_level_constant(cam, p);
    let scale = volume / (2.0 * eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![T::zero(); n];
    let mut x = vec![T::zero(); d];
    let mut jac = vec![T::zero(); n * d];
    let mut g = vec![T::zero(); n * n];
    let (mut sum, mut sum_sq, mut hits) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..samples {
        for a in 0..n {
            let t: f64 = rng.gen();
            u[a] = region.lo[a] + T::lit(t) * region.width(a);
        }
        surface.point_into(&u, &mut x);
        let phi = (dot(&x, &p.normal) - constant).as_f64();
        if phi.abs() > eps {
            continue;
        }
        hits += 1;
        surface.partials_into(&u, &mut jac);
        surface.metric_with_jacobian(&u, &jac, &mut g);
        let v = (field.eval(&u) * small_det(&g, n).sqrt()).as_f64() * scale;
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
    Ok(OracleEstimate { value: mean, stderr: (var / m).sqrt(), samples, hits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StereographicPatch;
    use serde_json::json;

    fn setup() -> (Cam<f64>, SampledSurface<f64>) {
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        let s = Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.4).unwrap());
        (cam, SampledSurface::new(s, &[96, 96]).unwrap())
    }

    fn bump(c: [f64; 2], w: f64) -> ScalarField<f64> {
        ScalarField::new(
            move |u: &[f64]| {
                let t = ((u[0] - c[0]).powi(2) + (u[1] - c[1]).powi(2)) / (w * w);
                if t < 1.0 {
                    (1.0 - 1.0 / (1.0 - t)).exp()
                } else {
                    0.0
                }
            },
            vec![ParamBox::new(vec![c[0] - w, c[1] - w], vec![c[0] + w, c[1] + w])],
            Smoothness::Infinite,
            json!({"bump": [c[0], c[1], w]}),
        )
    }

    #[test]
    fn zero_field_projects_to_zero() {
        let (cam, sampled) = setup();
        let grid = CamGrid::product(2, &[8, 16]).unwrap();
        let sino = project(&ScalarField::zero(), &cam, &sampled, &grid).unwrap();
        assert!(sino.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_agrees_with_thin_slab() {
        let (cam, sampled) = setup();
        let f = bump([0.05, 0.0], 0.3);
        let w = [0.95f64, 0.1, 0.3];
        let nrm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        let p = cam.point_at(&[w[0] / nrm, w[1] / nrm, w[2] / nrm]);
        let v = forward(&f, &p, &cam, &sampled).unwrap();
        let est = thin_slab_oracle(&f, &p, &cam, sampled.surface(), 1e-3, 200_000, 7).unwrap();
        assert!(v > 0.0);
        assert!((v - est.value).abs() <= (0.02 * v).max(4.0 * est.stderr), "{v} vs {est:?}");
    }

    #[test]
    fn linearity() {
        let (cam, sampled) = setup();
        let f = bump([0.05, 0.0], 0.25);
        let h = bump([-0.1, 0.1], 0.2);
        let fh = ScalarField::combine(2.0, &f, -0.5, &h);
        let grid = CamGrid::product(2, &[6, 12]).unwrap();
        let a = project(&f, &cam, &sampled, &grid).unwrap();
        let b = project(&h, &cam, &sampled, &grid).unwrap();
        let c = project(&fh, &cam, &sampled, &grid).unwrap();
        for k in 0..grid.len() {
            let expect = 2.0 * a.values()[k] - 0.5 * b.values()[k];
            assert!((c.values()[k] - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn sinogram_json_round_trip() {
        let (cam, sampled) = setup();
        let f = bump([0.05, 0.0], 0.25);
        let grid = CamGrid::product(2, &[4, 8]).unwrap();
        let s = project(&f, &cam, &sampled, &grid).unwrap();
        let back = Sinogram::<f64>::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back.values(), s.values());
        assert_eq!(back.meta, s.meta);
        assert!(back.check_hash(&s.meta.hash).is_ok());
        assert!(matches!(back.check_hash("deadbeef"), Err(Error::HashMismatch { .. })));
    }
}
