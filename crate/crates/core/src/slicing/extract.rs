//! Zero-level-set extraction on tensor grids: marching squares in 2D, marching tetrahedra
//! (Kuhn split of each cube) in 3D. Periodic axes wrap.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smooth level function on a parameter box, with the density of the measure it is sliced against.
pub trait LevelFunction<T: Real>: Sync {
    fn value(&self, u: &[T]) -> T;

    /// Value and Euclidean gradient in parameter coordinates.
    fn value_grad(&self, u: &[T], grad: &mut [T]) -> T;

    /// Density of the ambient measure in parameter coordinates.
    fn density(&self, u: &[T]) -> T;

    /// Value, gradient and density in one pass.
    fn value_grad_density(&self, u: &[T], grad: &mut [T]) -> (T, T) {
        let v = self.value_grad(u, grad);
        (v, self.density(u))
    }
}

/// Uniform tensor grid of cells over a box.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelGrid<T> {
    lo: Vec<T>,
    step: Vec<T>,
    cells: Vec<usize>,
    periodic: Vec<bool>,
    collapsed: Vec<bool>,
}

/// Half-open range of cell indices `[lo, hi)` per axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellRange {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl<T: Real> LevelGrid<T> {
    pub fn new(lo: &[T], hi: &[T], cells: &[usize], periodic: &[bool]) -> Self {
        let step = lo.iter().zip(hi).zip(cells).map(|((&l, &h), &c)| (h - l) / T::count(c)).collect();
        let collapsed = vec![false; cells.len()];
        Self { lo: lo.to_vec(), step, cells: cells.to_vec(), periodic: periodic.to_vec(), collapsed }
    }

    /// Marks axes whose end faces are degenerate (poles of an angle chart). Mesh sides lying
    /// on such faces are ignored by the closure test and do not count as boundary contact.
    pub fn with_collapsed_faces(mut self, axes: &[bool]) -> Self {
        self.collapsed = axes.to_vec();
        self
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn step(&self) -> &[T] {
        &self.step
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    /// Vertices per axis (periodic axes do not repeat the wrapped vertex).
    pub fn vertex_shape(&self) -> Vec<usize> {
        self.cells.iter().zip(&self.periodic).map(|(&c, &p)| if p { c } else { c + 1 }).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_shape().iter().product()
    }

    /// Flat index of a (possibly wrapped) vertex multi-index.
    #[inline]
    pub fn vertex_flat(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for a in 0..self.dim() {
            let (count, i) = if self.periodic[a] {
                (self.cells[a], idx[a] % self.cells[a])
            } else {
                (self.cells[a] + 1, idx[a])
            };
            flat = flat * count + i;
        }
        flat
    }

    /// Vertex multi-index of a flat index.
    #[inline]
    pub fn vertex_index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            let count = if self.periodic[a] { self.cells[a] } else { self.cells[a] + 1 };
            out[a] = flat % count;
            flat /= count;
        }
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> T {
        self.lo[axis] + T::count(i) * self.step[axis]
    }

    pub fn full_range(&self) -> CellRange {
        CellRange { lo: vec![0; self.dim()], hi: self.cells.clone() }
    }

    /// Cell range covering `[lo, hi]`, padded by `pad` cells and clipped to the grid.
    pub fn covering_range(&self, lo: &[T], hi: &[T], pad: usize) -> CellRange {
        let mut r = CellRange { lo: vec![0; self.dim()], hi: vec![0; self.dim()] };
        for a in 0..self.dim() {
            let fl = ((lo[a] - self.lo[a]) / self.step[a]).floor().to_isize().unwrap_or(0) - pad as isize;
            let fh = ((hi[a] - self.lo[a]) / self.step[a]).ceil().to_isize().unwrap_or(0) + pad as isize;
            r.lo[a] = fl.clamp(0, self.cells[a] as isize) as usize;
            r.hi[a] = fh.clamp(0, self.cells[a] as isize) as usize;
        }
        r
    }

    fn cell_size(&self) -> T {
        self.step.iter().fold(T::zero(), |m, &s| m.max(s))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExtractOptions<T> {
    /// Tolerance on node placement, relative to the cell size.
    pub node_tol: T,
    /// Gradient norms at or below this are treated as degenerate.
    pub grad_floor: T,
}

impl<T: Real> Default for ExtractOptions<T> {
    fn default() -> Self {
        Self { node_tol: T::tol(1e-10), grad_floor: T::zero() }
    }
}

/// Raw extraction result: quadrature nodes in parameter space with Leray weights.
#[derive(Clone, Debug, Default)]
pub struct Extracted<T> {
    pub params: Vec<T>,
    pub weights: Vec<T>,
    pub touches_boundary: bool,
    pub closed: bool,
    pub components: usize,
}

type EdgeKey = (usize, usize);

struct Crossing<T> {
    point: [T; 3],
    key: EdgeKey,
    boundary: bool,
    pole: bool,
}

struct Local<'a, T, F> {
    grid: &'a LevelGrid<T>,
    range: &'a CellRange,
    vshape: Vec<usize>,
    values: Vec<T>,
    func: &'a F,
    opts: ExtractOptions<T>,
    tol_dist: T,
}

impl<'a, T: Real, F: LevelFunction<T>> Local<'a, T, F> {
    #[inline]
    fn local_flat(&self, l: &[usize; 3]) -> usize {
        let mut flat = 0;
        for a in 0..self.grid.dim() {
            flat = flat * self.vshape[a] + l[a];
        }
        flat
    }

    #[inline]
    fn global(&self, l: &[usize; 3]) -> [usize; 3] {
        let mut g = [0; 3];
        for a in 0..self.grid.dim() {
            g[a] = self.range.lo[a] + l[a];
        }
        g
    }

    #[inline]
    fn coords(&self, g: &[usize; 3]) -> [T; 3] {
        let mut u = [T::zero(); 3];
        for a in 0..self.grid.dim() {
            u[a] = self.grid.coord(a, g[a]);
        }
        u
    }

    fn crossing(&self, la: &[usize; 3], lb: &[usize; 3]) -> Crossing<T> {
        let k = self.grid.dim();
        let va = self.values[self.local_flat(la)];
        let vb = self.values[self.local_flat(lb)];
        let (ga, gb) = (self.global(la), self.global(lb));
        let (ua, ub) = (self.coords(&ga), self.coords(&gb));
        let fa_key = self.grid.vertex_flat(&ga[..k]);
        let fb_key = self.grid.vertex_flat(&gb[..k]);
        let key = if fa_key < fb_key { (fa_key, fb_key) } else { (fb_key, fa_key) };
        let on_face = |a: usize| {
            !self.grid.periodic[a] && ga[a] == gb[a] && (ga[a] == 0 || ga[a] == self.grid.cells[a])
        };
        let boundary = (0..k).any(|a| on_face(a) && !self.grid.collapsed[a]);
        let pole = (0..k).any(|a| on_face(a) && self.grid.collapsed[a]);
        let t = self.refine_edge(&ua, &ub, va, vb);
        let mut point = [T::zero(); 3];
        for a in 0..k {
            point[a] = ua[a] + t * (ub[a] - ua[a]);
        }
        Crossing { point, key, boundary, pole }
    }

    /// Illinois iteration for the crossing parameter along the edge.
    fn refine_edge(&self, ua: &[T; 3], ub: &[T; 3], va: T, vb: T) -> T {
        let k = self.grid.dim();
        let (mut a, mut fa, mut b, mut fb) = (T::zero(), va, T::one(), vb);
        let mut t = a - fa * (b - a) / (fb - fa);
        let stop = self.opts.node_tol * (va.abs() + vb.abs());
        let mut u = [T::zero(); 3];
        let mut side = 0i8;
        for _ in 0..12 {
            for i in 0..k {
                u[i] = ua[i] + t * (ub[i] - ua[i]);
            }
            let ft = self.func.value(&u[..k]);
            if ft.abs() <= stop || b - a <= self.opts.node_tol {
                break;
            }
            if (ft >= T::zero()) == (fa >= T::zero()) {
                a = t;
                fa = ft;
                if side == -1 {
                    fb = fb * T::lit(0.5);
                }
                side = -1;
            } else {
                b = t;
                fb = ft;
                if side == 1 {
                    fa = fa * T::lit(0.5);
                }
                side = 1;
            }
            t = a - fa * (b - a) / (fb - fa);
        }
        t.max(T::zero()).min(T::one())
    }

    /// Newton projection onto the zero set, then the Leray weight of an element of the given size.
    fn weighted_node(&self, mut u: [T; 3], size: T) -> Result<([T; 3], T)> {
        let k = self.grid.dim();
        let mut g = [T::zero(); 3];
        for _ in 0..16 {
            let v = self.func.value_grad(&u[..k], &mut g[..k]);
            let gg = g[..k].iter().fold(T::zero(), |acc, &x| acc + x * x);
            let gn = gg.sqrt();
            if !(gn > self.opts.grad_floor) || !gn.is_finite() {
                return Err(degenerate(&u[..k]));
            }
            let s = v / gg;
            for i in 0..k {
                u[i] = u[i] - s * g[i];
            }
            if (s * gn).abs() <= self.tol_dist {
                break;
            }
        }
        let (_, density) = self.func.value_grad_density(&u[..k], &mut g[..k]);
        let gn = g[..k].iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
        if !(gn > self.opts.grad_floor) {
            return Err(degenerate(&u[..k]));
        }
        Ok((u, density / gn * size))
    }
}

fn degenerate<T: Real>(u: &[T]) -> Error {
    Error::DegenerateSlice { at: u.iter().map(|v| v.as_f64()).collect() }
}

/// Segment table for marching squares. Corners: 0=(0,0), 1=(1,0), 2=(1,1), 3=(0,1);
/// edges: 0 = c0c1, 1 = c1c2, 2 = c3c2, 3 = c0c3.
const EDGE_CORNERS: [(usize, usize); 4] = [(0, 1), (1, 2), (3, 2), (0, 3)];

fn square_segments(case: usize, center_positive: bool) -> &'static [(usize, usize)] {
    match case {
        1 | 14 => &[(3, 0)],
        2 | 13 => &[(0, 1)],
        3 | 12 => &[(3, 1)],
        4 | 11 => &[(1, 2)],
        6 | 9 => &[(0, 2)],
        7 | 8 => &[(3, 2)],
        5 if center_positive => &[(0, 1), (2, 3)],
        5 => &[(3, 0), (1, 2)],
        10 if center_positive => &[(3, 0), (1, 2)],
        10 => &[(0, 1), (2, 3)],
        _ => &[],
    }
}

/// Extracts the zero set of `func` over `range`, using `vertex_value(flat)` at grid vertices.
pub fn extract<T: Real, F: LevelFunction<T>>(
    grid: &LevelGrid<T>,
    range: &CellRange,
    vertex_value: impl Fn(usize) -> T,
    func: &F,
    opts: ExtractOptions<T>,
) -> Result<Extracted<T>> {
    let k = grid.dim();
    if !(2..=3).contains(&k) {
        return Err(Error::UnsupportedDimension(k));
    }
    if (0..k).any(|a| range.hi[a] <= range.lo[a]) {
        return Ok(Extracted { closed: true, ..Default::default() });
    }
    let vshape: Vec<usize> = (0..k).map(|a| range.hi[a] - range.lo[a] + 1).collect();
    let total: usize = vshape.iter().product();
    let mut values = Vec::with_capacity(total);
    let (mut any_pos, mut any_neg) = (false, false);
    let mut l = [0usize; 3];
    for _ in 0..total {
        let mut g = [0usize; 3];
        for a in 0..k {
            g[a] = range.lo[a] + l[a];
        }
        let v = vertex_value(grid.vertex_flat(&g[..k]));
        if v >= T::zero() {
            any_pos = true;
        } else {
            any_neg = true;
        }
        values.push(v);
        for a in (0..k).rev() {
            l[a] += 1;
            if l[a] < vshape[a] {
                break;
            }
            l[a] = 0;
        }
    }
    if !(any_pos && any_neg) {
        return Ok(Extracted { closed: true, ..Default::default() });
    }
    let tol_dist = opts.node_tol * grid.cell_size();
    let local = Local { grid, range, vshape, values, func, opts, tol_dist };
    if k == 2 {
        march_squares(&local)
    } else {
        march_tetrahedra(&local)
    }
}

fn march_squares<T: Real, F: LevelFunction<T>>(loc: &Local<'_, T, F>) -> Result<Extracted<T>> {
    let (ni, nj) = (loc.vshape[0] - 1, loc.vshape[1] - 1);
    let mut out = Extracted::default();
    let mut keys: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    let mut boundary = false;
    for i in 0..ni {
        for j in 0..nj {
            let corners = [[i, j, 0], [i + 1, j, 0], [i + 1, j + 1, 0], [i, j + 1, 0]];
            let vals: [T; 4] = std::array::from_fn(|c| loc.values[loc.local_flat(&corners[c])]);
            let case = (0..4).fold(0usize, |acc, c| acc | (usize::from(vals[c] >= T::zero()) << c));
            if case == 0 || case == 15 {
                continue;
            }
            let center = (vals[0] + vals[1] + vals[2] + vals[3]) * T::lit(0.25);
            for &(ea, eb) in square_segments(case, center >= T::zero()) {
                let (a0, a1) = EDGE_CORNERS[ea];
                let (b0, b1) = EDGE_CORNERS[eb];
                let ca = loc.crossing(&corners[a0], &corners[a1]);
                let cb = loc.crossing(&corners[b0], &corners[b1]);
                boundary |= ca.boundary || cb.boundary;
                keys.push((ca.key, cb.key));
                let len = ((ca.point[0] - cb.point[0]).powi(2) + (ca.point[1] - cb.point[1]).powi(2)).sqrt();
                if len == T::zero() {
                    continue;
                }
                let half = T::lit(0.5);
                let mid = [(ca.point[0] + cb.point[0]) * half, (ca.point[1] + cb.point[1]) * half, T::zero()];
                let (u, w) = loc.weighted_node(mid, len)?;
                out.params.extend_from_slice(&u[..2]);
                out.weights.push(w);
            }
        }
    }
    out.touches_boundary = boundary;
    let (closed, components) = topology(keys.iter().map(|&(a, b)| [a, b]), false);
    out.closed = closed;
    out.components = components;
    Ok(out)
}

/// Kuhn split of the unit cube into 6 tetrahedra sharing the main diagonal. Corner bits: x=1, y=2, z=4.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn march_tetrahedra<T: Real, F: LevelFunction<T>>(loc: &Local<'_, T, F>) -> Result<Extracted<T>> {
    let n = [loc.vshape[0] - 1, loc.vshape[1] - 1, loc.vshape[2] - 1];
    let mut out = Extracted::default();
    let mut tris: Vec<([EdgeKey; 3], [bool; 3])> = Vec::new();
    let mut boundary = false;
    for i in 0..n[0] {
        for j in 0..n[1] {
            for kk in 0..n[2] {
                let corners: [[usize; 3]; 8] =
                    std::array::from_fn(|b| [i + (b & 1), j + ((b >> 1) & 1), kk + ((b >> 2) & 1)]);
                let vals: [T; 8] = std::array::from_fn(|b| loc.values[loc.local_flat(&corners[b])]);
                let pos = vals.iter().filter(|&&v| v >= T::zero()).count();
                if pos == 0 || pos == 8 {
                    continue;
                }
                for tet in &KUHN {
                    let (p, m): (Vec<usize>, Vec<usize>) = tet.iter().partition(|&&c| vals[c] >= T::zero());
                    let polys: Vec<Vec<(usize, usize)>> = match (p.len(), m.len()) {
                        (1, 3) => vec![vec![(p[0], m[0]), (p[0], m[1]), (p[0], m[2])]],
                        (3, 1) => vec![vec![(m[0], p[0]), (m[0], p[1]), (m[0], p[2])]],
                        (2, 2) => {
                            vec![vec![(p[0], m[0]), (p[0], m[1]), (p[1], m[1]), (p[1], m[0])]]
                        }
                        _ => continue,
                    };
                    for poly in polys {
                        let cs: Vec<Crossing<T>> =
                            poly.iter().map(|&(a, b)| loc.crossing(&corners[a], &corners[b])).collect();
                        let fan: &[[usize; 3]] = if cs.len() == 3 { &[[0, 1, 2]] } else { &[[0, 1, 2], [0, 2, 3]] };
                        for t in fan {
                            let (a, b, c) = (&cs[t[0]], &cs[t[1]], &cs[t[2]]);
                            boundary |= (a.boundary && b.boundary) || (b.boundary && c.boundary) || (a.boundary && c.boundary);
                            tris.push(([a.key, b.key, c.key], [a.pole, b.pole, c.pole]));
                            let area = triangle_area(&a.point, &b.point, &c.point);
                            if area == T::zero() {
                                continue;
                            }
                            let third = T::one() / T::lit(3.0);
                            let centroid: [T; 3] = std::array::from_fn(|d| (a.point[d] + b.point[d] + c.point[d]) * third);
                            let (u, w) = loc.weighted_node(centroid, area)?;
                            out.params.extend_from_slice(&u);
                            out.weights.push(w);
                        }
                    }
                }
            }
        }
    }
    out.touches_boundary = boundary;
    let edges = tris.iter().flat_map(|(t, p)| {
        [(0, 1), (1, 2), (0, 2)].into_iter().filter(|&(i, j)| !(p[i] && p[j])).map(|(i, j)| [t[i], t[j]])
    });
    let (closed, components) = topology(edges, true);
    out.closed = closed;
    out.components = components;
    Ok(out)
}

fn triangle_area<T: Real>(a: &[T; 3], b: &[T; 3], c: &[T; 3]) -> T {
    let u: [T; 3] = std::array::from_fn(|i| b[i] - a[i]);
    let v: [T; 3] = std::array::from_fn(|i| c[i] - a[i]);
    let x = u[1] * v[2] - u[2] * v[1];
    let y = u[2] * v[0] - u[0] * v[2];
    let z = u[0] * v[1] - u[1] * v[0];
    (x * x + y * y + z * z).sqrt() * T::lit(0.5)
}

/// Closure and connected components of a mesh given as edges between crossing keys.
///
/// For a polyline the edges are segments and closure means every crossing is shared by two
/// segments. For a triangle mesh the edges are triangle sides (each given by its two crossing
/// keys) and closure means every side is shared by two triangles.
fn topology<I>(edges: I, mesh: bool) -> (bool, usize)
where
    I: Iterator<Item = [EdgeKey; 2]>,
{
    let mut ids: HashMap<EdgeKey, usize> = HashMap::new();
    let mut parent: Vec<usize> = Vec::new();
    let mut node_count: Vec<usize> = Vec::new();
    let mut side_count: HashMap<(usize, usize), usize> = HashMap::new();
    let mut id = |key: EdgeKey, parent: &mut Vec<usize>, node_count: &mut Vec<usize>| -> usize {
        *ids.entry(key).or_insert_with(|| {
            parent.push(parent.len());
            node_count.push(0);
            parent.len() - 1
        })
    };
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for [a, b] in edges {
        let ia = id(a, &mut parent, &mut node_count);
        let ib = id(b, &mut parent, &mut node_count);
        node_count[ia] += 1;
        node_count[ib] += 1;
        let side = if ia < ib { (ia, ib) } else { (ib, ia) };
        *side_count.entry(side).or_insert(0) += 1;
        let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    if parent.is_empty() {
        return (true, 0);
    }
    let closed = if mesh {
        side_count.values().all(|&c| c == 2)
    } else {
        node_count.iter().all(|&c| c == 2)
    };
    let mut roots: Vec<usize> = (0..parent.len()).map(|x| find(&mut parent, x)).collect();
    roots.sort_unstable();
    roots.dedup();
    (closed, roots.len())
}
