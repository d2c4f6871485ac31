//! Level sets `Z(σ) ⊂ X` and `Z(x) ⊂ Σ` with Gelfand–Leray quadrature weights.

mod extract;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Cam, CamPoint, Hypersurface, ParamBox};
use crate::linalg::{frame_with_axis, small_det, Mat};
use crate::scalar::{dot, norm, Real};
use crate::sphere::{angle_box, angle_partials, angle_volume_element, angles_to_point};

pub use extract::{extract, CellRange, ExtractOptions, Extracted, LevelFunction, LevelGrid};

/// Which space a slice lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceAmbient {
    Surface,
    Cam,
}

/// A discretized level set with one Leray weight per quadrature node.
#[derive(Clone, Debug)]
pub struct SliceSet<T> {
    pub ambient: SliceAmbient,
    /// The generating parameter: ω of the cam point, or the point x.
    pub source: Vec<T>,
    pub param_dim: usize,
    /// Node parameters (chart parameters on X, angles on Σ), flat.
    pub params: Vec<T>,
    /// Node positions in the ambient space of the slice (ω ∈ Sⁿ for cam slices; empty on X).
    pub points: Vec<T>,
    pub weights: Vec<T>,
    pub touches_boundary: bool,
    pub closed: bool,
    pub components: usize,
}

impl<T: Real> SliceSet<T> {
    fn from_extracted(ambient: SliceAmbient, source: Vec<T>, param_dim: usize, ex: Extracted<T>) -> Self {
        Self {
            ambient,
            source,
            param_dim,
            params: ex.params,
            points: Vec::new(),
            weights: ex.weights,
            touches_boundary: ex.touches_boundary,
            closed: ex.closed,
            components: ex.components,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn param(&self, i: usize) -> &[T] {
        &self.params[i * self.param_dim..(i + 1) * self.param_dim]
    }

    /// Ambient position of node `i` (cam slices only).
    pub fn point(&self, i: usize) -> &[T] {
        let d = self.points.len() / self.len().max(1);
        &self.points[i * d..(i + 1) * d]
    }

    /// Leray integral of the constant 1.
    pub fn mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// `Σ wᵢ f(paramᵢ)`.
    pub fn integrate(&self, f: impl Fn(&[T]) -> T) -> T {
        self.weights.iter().enumerate().fold(T::zero(), |acc, (i, &w)| acc + w * f(self.param(i)))
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let k = self.param_dim;
        let d = if self.points.is_empty() { 0 } else { self.points.len() / self.len() };
        let mut header: Vec<String> = (0..k).map(|i| format!("u{}", i + 1)).collect();
        header.extend((0..d).map(|i| format!("p{}", i + 1)));
        header.push("weight".into());
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.param(i).iter().map(|v| format!("{:e}", v.as_f64())).collect();
            if d > 0 {
                row.extend(self.point(i).iter().map(|v| format!("{:e}", v.as_f64())));
            }
            row.push(format!("{:e}", self.weights[i].as_f64()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// A hypersurface with its parameter grid and the chart evaluated at all grid vertices.
#[derive(Clone, Debug)]
pub struct SampledSurface<T: Real> {
    surface: Hypersurface<T>,
    grid: LevelGrid<T>,
    points: Vec<T>,
}

impl<T: Real> SampledSurface<T> {
    /// Samples the chart on a uniform grid with `cells` cells per axis. Fails if the metric is
    /// not positive definite or the chart drops rank at any grid vertex.
    pub fn new(surface: Hypersurface<T>, cells: &[usize]) -> Result<Self> {
        let n = surface.dim();
        if cells.len() != n || cells.iter().any(|&c| c == 0) {
            return Err(Error::Config(format!("surface grid {cells:?} does not match n = {n}")));
        }
        let dom = surface.domain();
        let grid = LevelGrid::new(&dom.lo, &dom.hi, cells, &vec![false; n]);
        let count = grid.vertex_count();
        let d = n + 1;
        let mut points = vec![T::zero(); count * d];
        let mut idx = vec![0usize; n];
        let mut u = vec![T::zero(); n];
        for v in 0..count {
            grid.vertex_index(v, &mut idx);
            for a in 0..n {
                u[a] = grid.coord(a, idx[a]);
            }
            let local = surface.local(&u)?;
            points[v * d..(v + 1) * d].copy_from_slice(&local.x);
        }
        Ok(Self { surface, grid, points })
    }

    pub fn surface(&self) -> &Hypersurface<T> {
        &self.surface
    }

    pub fn grid(&self) -> &LevelGrid<T> {
        &self.grid
    }

    pub fn vertex_point(&self, flat: usize) -> &[T] {
        let d = self.surface.ambient_dim();
        &self.points[flat * d..(flat + 1) * d]
    }

    /// Grid step (largest over axes).
    pub fn step(&self) -> T {
        self.grid.step().iter().fold(T::zero(), |m, &s| m.max(s))
    }

    /// Ball containing the surface over a cell range: center and radius, padded by the largest
    /// vertex spacing so the chart between vertices is covered.
    pub fn bounding_ball(&self, range: &CellRange) -> (Vec<T>, T) {
        let n = self.surface.dim();
        let d = n + 1;
        let mut lo = vec![T::infinity(); d];
        let mut hi = vec![T::neg_infinity(); d];
        let mut spacing = T::zero();
        self.for_each_vertex(range, |flat, idx| {
            let x = self.vertex_point(flat);
            for k in 0..d {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
            let mut nb = idx.to_vec();
            for a in 0..n {
                if nb[a] < self.grid.cells()[a] {
                    nb[a] += 1;
                    let y = self.vertex_point(self.grid.vertex_flat(&nb));
                    let gap = norm(&x.iter().zip(y).map(|(&p, &q)| p - q).collect::<Vec<_>>());
                    spacing = spacing.max(gap);
                    nb[a] -= 1;
                }
            }
        });
        let half = T::lit(0.5);
        let center: Vec<T> = lo.iter().zip(&hi).map(|(&l, &h)| (l + h) * half).collect();
        let mut radius = T::zero();
        self.for_each_vertex(range, |flat, _| {
            let x = self.vertex_point(flat);
            let r = norm(&x.iter().zip(&center).map(|(&p, &c)| p - c).collect::<Vec<_>>());
            radius = radius.max(r);
        });
        (center, radius + spacing)
    }

    fn for_each_vertex(&self, range: &CellRange, mut f: impl FnMut(usize, &[usize])) {
        let n = self.surface.dim();
        let mut idx = range.lo.clone();
        loop {
            f(self.grid.vertex_flat(&idx), &idx);
            let mut a = n;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= range.hi[a] {
                    break;
                }
                idx[a] = range.lo[a];
            }
        }
    }

    /// Cell range covering a parameter box, padded by one cell.
    pub fn covering_range(&self, region: &ParamBox<T>) -> CellRange {
        self.grid.covering_range(&region.lo, &region.hi, 1)
    }
}

struct SurfaceLevel<'a, T: Real> {
    surface: &'a Hypersurface<T>,
    normal: &'a [T],
    constant: T,
}

impl<T: Real> LevelFunction<T> for SurfaceLevel<'_, T> {
    fn value(&self, u: &[T]) -> T {
        let mut x = [T::zero(); 4];
        let d = u.len() + 1;
        self.surface.point_into(u, &mut x[..d]);
        dot(&x[..d], self.normal) - self.constant
    }

    fn value_grad(&self, u: &[T], grad: &mut [T]) -> T {
        let n = u.len();
        let d = n + 1;
        let mut jac = [T::zero(); 12];
        self.surface.partials_into(u, &mut jac[..n * d]);
        for i in 0..n {
            grad[i] = dot(&jac[i * d..(i + 1) * d], self.normal);
        }
        self.value(u)
    }

    fn density(&self, u: &[T]) -> T {
        let mut g = [T::zero(); 9];
        let n = u.len();
        self.surface.metric_into(u, &mut g[..n * n]);
        small_det(&g[..n * n], n).sqrt()
    }

    fn value_grad_density(&self, u: &[T], grad: &mut [T]) -> (T, T) {
        let n = u.len();
        let d = n + 1;
        let mut jac = [T::zero(); 12];
        self.surface.partials_into(u, &mut jac[..n * d]);
        for i in 0..n {
            grad[i] = dot(&jac[i * d..(i + 1) * d], self.normal);
        }
        let mut g = [T::zero(); 9];
        self.surface.metric_with_jacobian(u, &jac[..n * d], &mut g[..n * n]);
        (self.value(u), small_det(&g[..n * n], n).sqrt())
    }
}

/// The level function `φ_σ(u) = Φ(x(u), σ)` as the affine form `⟨x, normal⟩ − constant`.
pub fn surface_level_constant<T: Real>(cam: &Cam<T>, p: &CamPoint<T>) -> T {
    match &p.sigma {
        Some(sigma) => dot(sigma, &p.normal),
        None => dot(cam.center(), &p.normal),
    }
}

/// `Z(σ) ⊂ X` for one cam point, optionally restricted to the cells covering `region`.
pub fn slice_on_x<T: Real>(
    sampled: &SampledSurface<T>,
    cam: &Cam<T>,
    p: &CamPoint<T>,
    region: Option<&ParamBox<T>>,
) -> Result<SliceSet<T>> {
    let constant = surface_level_constant(cam, p);
    slice_on_x_with(sampled, &p.normal, constant, region, p.omega.clone())
}

pub(crate) fn slice_on_x_with<T: Real>(
    sampled: &SampledSurface<T>,
    normal: &[T],
    constant: T,
    region: Option<&ParamBox<T>>,
    source: Vec<T>,
) -> Result<SliceSet<T>> {
    let n = sampled.surface.dim();
    let range = match region {
        Some(r) => sampled.covering_range(r),
        None => sampled.grid.full_range(),
    };
    let level = SurfaceLevel { surface: &sampled.surface, normal, constant };
    let opts = ExtractOptions { node_tol: T::tol(1e-10), grad_floor: norm(normal) * T::tol(1e-10) };
    let ex = extract(&sampled.grid, &range, |flat| dot(sampled.vertex_point(flat), normal) - constant, &level, opts)?;
    Ok(SliceSet::from_extracted(SliceAmbient::Surface, source, n, ex))
}

struct CamLevel<T> {
    y_local: Vec<T>,
    offset: T,
    density: T,
}

impl<T: Real> LevelFunction<T> for CamLevel<T> {
    fn value(&self, a: &[T]) -> T {
        let mut w = [T::zero(); 4];
        let d = a.len() + 1;
        angles_to_point(a, &mut w[..d]);
        dot(&w[..d], &self.y_local) - self.offset
    }

    fn value_grad(&self, a: &[T], grad: &mut [T]) -> T {
        let n = a.len();
        let d = n + 1;
        let mut part = [T::zero(); 12];
        angle_partials(a, &mut part[..n * d]);
        for j in 0..n {
            grad[j] = dot(&part[j * d..(j + 1) * d], &self.y_local);
        }
        self.value(a)
    }

    fn density(&self, a: &[T]) -> T {
        self.density * angle_volume_element(a)
    }
}

/// Default angular resolution of cam slices: cells per angle axis.
pub fn default_cam_slice_cells(n: usize) -> Vec<usize> {
    match n {
        2 => vec![64, 256],
        _ => vec![48, 48, 96],
    }
}

/// `Z(x) ⊂ Σ`, sliced in spherical angles whose polar axis is `y = Nᵀ(x − e)`, so that the
/// level set is a latitude sphere of the angle chart. Nodes carry `ω` and the weight
/// `(cam density · sphere element) / |∇ψ_x|`.
pub fn slice_on_cam<T: Real>(x: &[T], cam: &Cam<T>, cells: &[usize]) -> Result<SliceSet<T>> {
    let d = cam.ambient_dim();
    let n = d - 1;
    if x.len() != d || cells.len() != n {
        return Err(Error::Config(format!("cam slice grid {cells:?} does not match n = {n}")));
    }
    let y = cam.dual_point(x);
    let ny = norm(&y);
    let r = cam.offset();
    if !(ny > r * (T::one() + T::tol(1e-9))) || ny == T::zero() {
        return Err(Error::Precondition(format!(
            "x = {:?} lies on or inside the cam",
            x.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
        )));
    }
    let frame: Mat<T> = frame_with_axis(&y);
    let y_local = frame.tr_mul_vec(&y);
    let level = CamLevel { y_local, offset: r, density: cam.measure_density() };
    let (lo, hi, periodic) = angle_box::<T>(n);
    let poles: Vec<bool> = periodic.iter().map(|&p| !p).collect();
    let grid = LevelGrid::new(&lo, &hi, cells, &periodic).with_collapsed_faces(&poles);
    let opts = ExtractOptions { node_tol: T::tol(1e-10), grad_floor: ny * T::tol(1e-10) };
    let vertex_value = |flat: usize| {
        let mut idx = [0usize; 3];
        grid.vertex_index(flat, &mut idx[..n]);
        let a: [T; 3] = std::array::from_fn(|k| if k < n { grid.coord(k, idx[k]) } else { T::zero() });
        level.value(&a[..n])
    };
    let ex = extract(&grid, &grid.full_range(), vertex_value, &level, opts)?;
    if !ex.closed || ex.components != 1 {
        return Err(Error::OpenSlice(format!(
            "{} component(s), closed = {}; refine the cam slice grid",
            ex.components, ex.closed
        )));
    }
    let mut set = SliceSet::from_extracted(SliceAmbient::Cam, x.to_vec(), n, ex);
    let mut points = vec![T::zero(); set.len() * d];
    let mut w = vec![T::zero(); d];
    for i in 0..set.len() {
        angles_to_point(set.param(i), &mut w);
        frame.mul_vec_into(&w, &mut points[i * d..(i + 1) * d]);
    }
    set.points = points;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StereographicPatch;
    use crate::scalar::sphere_volume;

    fn unit_sphere_patch() -> SampledSurface<f64> {
        let s = Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.0).unwrap());
        SampledSurface::new(s, &[64, 64]).unwrap()
    }

    #[test]
    fn funk_equator_mass() {
        let cam = Cam::point(vec![0.0; 3]);
        let s = slice_on_cam(&[0.0, 0.0, 1.0], &cam, &[32, 64]).unwrap();
        assert!((s.mass() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(s.closed);
        for i in 0..s.len() {
            assert!(s.point(i)[2].abs() < 1e-12);
        }
    }

    #[test]
    fn cam_slice_mass_closed_form() {
        // Sphere cam radius ρ, |x| = 1: ψ = (2/ρ)(⟨x,ω⟩ − ρ), density ρ³/2;
        // mass = (ρ³/2) · 2π sinθ₀ / ((2/ρ) sinθ₀) = πρ⁴/2 for every x.
        let rho: f64 = 0.3;
        let cam = Cam::sphere(vec![0.0; 3], rho).unwrap();
        for x in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, -0.28, 0.96]] {
            let s = slice_on_cam(&x, &cam, &[32, 64]).unwrap();
            let expect = std::f64::consts::PI * rho.powi(4) / 2.0;
            assert!((s.mass() - expect).abs() < 1e-12 * expect.max(1.0), "{} vs {expect}", s.mass());
            for i in 0..s.len() {
                let w = s.point(i);
                let sigma = cam.sigma(w);
                let p = cam.point_at(w);
                assert!(crate::geometry::phi(&x, &cam, &p).abs() < 1e-9);
                assert!((cam.q(&sigma) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cam_slice_rejects_points_inside() {
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        assert!(matches!(slice_on_cam(&[0.0, 0.1, 0.1], &cam, &[16, 32]), Err(Error::Precondition(_))));
    }

    #[test]
    fn three_dimensional_cam_slice() {
        let cam = Cam::point(vec![0.0; 4]);
        let s = slice_on_cam(&[0.0, 0.0, 0.0, 1.0], &cam, &[24, 24, 48]).unwrap();
        let expect = sphere_volume::<f64>(2);
        assert!((s.mass() - expect).abs() < 2e-3 * expect, "{}", s.mass());
    }

    #[test]
    fn surface_slice_empty_for_missing_plane() {
        let s = Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.4).unwrap());
        let sampled = SampledSurface::new(s, &[32, 32]).unwrap();
        let cam = Cam::point(vec![0.0; 3]);
        let p = cam.point_at(&[0.0, 0.0, 1.0]);
        let slice = slice_on_x(&sampled, &cam, &p, None).unwrap();
        assert!(slice.is_empty());
        assert_eq!(slice.mass(), 0.0);
    }

    #[test]
    fn great_circle_on_unit_sphere() {
        // Plane x₃ = 0.5 with unit conormal: slice is a circle of radius √0.75; Leray mass = length.
        let sampled = unit_sphere_patch();
        let normal = [0.0, 0.0, 1.0];
        let slice = slice_on_x_with(&sampled, &normal, 0.5, None, vec![]).unwrap();
        let expect = 2.0 * std::f64::consts::PI * 0.75f64.sqrt() / 0.75f64.sqrt();
        // |∇_X x₃| = √(1 − x₃²) = √0.75, so the mass is 2π r / √0.75 = 2π.
        assert!((slice.mass() - expect).abs() < 1e-4 * expect, "{}", slice.mass());
        assert!(!slice.touches_boundary);
    }

    #[test]
    fn csv_dump_has_header() {
        let cam = Cam::point(vec![0.0; 3]);
        let s = slice_on_cam(&[0.0, 0.0, 1.0], &cam, &[16, 32]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("u1,u2,p1,p2,p3,weight"));
        assert_eq!(text.lines().count(), s.len() + 1);
    }
}
