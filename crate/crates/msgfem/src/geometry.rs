//! Rectangular domains, circular inclusions, structured quadrilateral meshes,
//! piecewise-constant coefficients and rectangular region index sets.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Point<T> = [T; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain<T> {
    pub width: T,
    pub height: T,
}

impl<T: Scalar> Domain<T> {
    pub fn new(width: T, height: T) -> Result<Self> {
        if !(width > T::zero() && height > T::zero()) {
            return Err(Error::Validation(format!("domain must have positive size, got {width}x{height}")));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> T {
        self.width * self.height
    }

    pub fn rect(&self) -> Rect<T> {
        Rect::new(T::zero(), T::zero(), self.width, self.height)
    }

    /// Rectangle of the given size centered in the domain.
    pub fn centered(&self, width: T, height: T) -> Rect<T> {
        let half = T::lit(0.5);
        let cx = self.width * half;
        let cy = self.height * half;
        Rect::new(cx - width * half, cy - height * half, cx + width * half, cy + height * half)
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> T {
        self.x1 - self.x0
    }

    pub fn height(&self) -> T {
        self.y1 - self.y0
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        self.x1 > self.x0 && self.y1 > self.y0
    }

    /// True when `other` lies in the open interior of `self`.
    pub fn strictly_contains(&self, other: &Rect<T>) -> bool {
        other.x0 > self.x0 && other.x1 < self.x1 && other.y0 > self.y0 && other.y1 < self.y1
    }

    pub fn contains_rect(&self, other: &Rect<T>) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn contains_point(&self, p: Point<T>) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle<T> {
    pub center: Point<T>,
    pub radius: T,
}

impl<T: Scalar> Circle<T> {
    pub fn contains(&self, p: Point<T>) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy < self.radius * self.radius
    }

    pub fn area(&self) -> T {
        T::from_f64(std::f64::consts::PI).unwrap() * self.radius * self.radius
    }
}

/// Circles on a regular `rows × cols` grid, one per cell, with seeded radius jitter.
#[derive(Clone, Debug, PartialEq)]
pub struct InclusionSet<T> {
    pub circles: Vec<Circle<T>>,
    pub rows: usize,
    pub cols: usize,
    pub base_radius: T,
    pub variation: T,
    pub seed: u64,
    pub domain: Domain<T>,
}

pub fn generate_inclusions<T: Scalar>(
    domain: Domain<T>,
    grid: (usize, usize),
    base_radius: T,
    variation: T,
    seed: u64,
) -> Result<InclusionSet<T>> {
    let (rows, cols) = grid;
    if rows == 0 || cols == 0 {
        return Err(Error::Geometry("inclusion grid needs at least one row and column".into()));
    }
    if !(base_radius > T::zero()) || variation < T::zero() || variation >= T::one() {
        return Err(Error::Geometry(format!(
            "invalid radius {base_radius} or variation {variation}"
        )));
    }
    let px = domain.width / T::from_usize_lossy(cols);
    let py = domain.height / T::from_usize_lossy(rows);
    let half_pitch = px.min(py) * T::lit(0.5);
    if !(base_radius * (T::one() + variation) < half_pitch) {
        return Err(Error::Geometry(format!(
            "radius {base_radius} with variation {variation} does not fit half pitch {half_pitch}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut circles = Vec::with_capacity(rows * cols);
    let half = T::lit(0.5);
    for r in 0..rows {
        for c in 0..cols {
            let u01: f64 = rng.random();
            let u = variation * T::lit(2.0 * u01 - 1.0);
            circles.push(Circle {
                center: [(T::from_usize_lossy(c) + half) * px, (T::from_usize_lossy(r) + half) * py],
                radius: base_radius * (T::one() + u),
            });
        }
    }
    let set = InclusionSet { circles, rows, cols, base_radius, variation, seed, domain };
    if !(set.min_gap() > T::zero()) {
        return Err(Error::Geometry("generated inclusions overlap".into()));
    }
    Ok(set)
}

impl<T: Scalar> InclusionSet<T> {
    pub fn pitch(&self) -> (T, T) {
        (
            self.domain.width / T::from_usize_lossy(self.cols),
            self.domain.height / T::from_usize_lossy(self.rows),
        )
    }

    /// Smallest distance between two circles, or between a circle and ∂Ω.
    pub fn min_gap(&self) -> T {
        let mut gap = T::infinity();
        for (i, a) in self.circles.iter().enumerate() {
            let wall = a.center[0]
                .min(self.domain.width - a.center[0])
                .min(a.center[1])
                .min(self.domain.height - a.center[1])
                - a.radius;
            gap = gap.min(wall);
            for b in &self.circles[i + 1..] {
                let dx = a.center[0] - b.center[0];
                let dy = a.center[1] - b.center[1];
                gap = gap.min((dx * dx + dy * dy).sqrt() - a.radius - b.radius);
            }
        }
        gap
    }

    /// The circle owning the grid cell that contains `p`.
    pub fn circle_near(&self, p: Point<T>) -> &Circle<T> {
        let (px, py) = self.pitch();
        let c = (p[0] / px).floor().to_usize().unwrap_or(0).min(self.cols - 1);
        let r = (p[1] / py).floor().to_usize().unwrap_or(0).min(self.rows - 1);
        &self.circles[r * self.cols + c]
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        self.circle_near(p).contains(p)
    }

    pub fn total_area(&self) -> T {
        self.circles.iter().map(|c| c.area()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementOrder {
    Linear,
    Quadratic,
}

impl ElementOrder {
    pub fn from_degree(p: usize) -> Result<Self> {
        match p {
            1 => Ok(Self::Linear),
            2 => Ok(Self::Quadratic),
            _ => Err(Error::Validation(format!("element order must be 1 or 2, got {p}"))),
        }
    }

    pub fn degree(self) -> usize {
        match self {
            Self::Linear => 1,
            Self::Quadratic => 2,
        }
    }

    pub fn nodes_per_element(self) -> usize {
        match self {
            Self::Linear => 4,
            Self::Quadratic => 9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];
}

/// Local lattice offsets of element nodes: corners counterclockwise, then
/// midsides (bottom, right, top, left), then the center.
pub(crate) const NODE_OFFSETS_Q2: [(usize, usize); 9] =
    [(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)];
pub(crate) const NODE_OFFSETS_Q1: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Structured quadrilateral mesh of a rectangle.
///
/// Nodes live on a `(p·nx+1) × (p·ny+1)` lattice numbered x-major
/// (`id = i·(p·ny+1) + j`). When built with inclusion fitting, nodes inside
/// each inclusion's square block are moved so that a ring of element edges
/// follows the circle; block edges and the block midlines stay straight.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    domain: Domain<T>,
    nx: usize,
    ny: usize,
    order: ElementOrder,
    nodes: Vec<Point<T>>,
    connectivity: Vec<usize>,
    distorted: Vec<bool>,
    fitted: bool,
}

pub fn build_mesh<T: Scalar>(domain: Domain<T>, nx: usize, ny: usize, order: ElementOrder) -> Result<Mesh<T>> {
    MeshBuilder::new(domain, nx, ny).order(order).build()
}

pub struct MeshBuilder<'a, T> {
    domain: Domain<T>,
    nx: usize,
    ny: usize,
    order: ElementOrder,
    fit: Option<&'a InclusionSet<T>>,
    align: Vec<Rect<T>>,
}

impl<'a, T: Scalar> MeshBuilder<'a, T> {
    pub fn new(domain: Domain<T>, nx: usize, ny: usize) -> Self {
        Self { domain, nx, ny, order: ElementOrder::Linear, fit: None, align: Vec::new() }
    }

    pub fn order(mut self, order: ElementOrder) -> Self {
        self.order = order;
        self
    }

    /// Bend element rings onto the inclusion circles.
    pub fn fit_to(mut self, inclusions: &'a InclusionSet<T>) -> Self {
        self.fit = Some(inclusions);
        self
    }

    /// Require these rectangles to lie on straight mesh lines.
    pub fn align_to(mut self, rects: &[Rect<T>]) -> Self {
        self.align.extend_from_slice(rects);
        self
    }

    pub fn build(self) -> Result<Mesh<T>> {
        let (nx, ny) = (self.nx, self.ny);
        if nx == 0 || ny == 0 {
            return Err(Error::Validation(format!("mesh needs nx, ny >= 1, got {nx}x{ny}")));
        }
        let p = self.order.degree();
        let (lx, ly) = (p * nx + 1, p * ny + 1);
        let mut nodes = Vec::with_capacity(lx * ly);
        for i in 0..lx {
            for j in 0..ly {
                nodes.push(lattice_point(&self.domain, p * nx, p * ny, i, j));
            }
        }
        let npe = self.order.nodes_per_element();
        let mut connectivity = Vec::with_capacity(nx * ny * npe);
        for ex in 0..nx {
            for ey in 0..ny {
                let (i0, j0) = (p * ex, p * ey);
                match self.order {
                    ElementOrder::Linear => {
                        for &(a, b) in &NODE_OFFSETS_Q1 {
                            connectivity.push((i0 + a) * ly + j0 + b);
                        }
                    }
                    ElementOrder::Quadratic => {
                        for &(a, b) in &NODE_OFFSETS_Q2 {
                            connectivity.push((i0 + a) * ly + j0 + b);
                        }
                    }
                }
            }
        }
        let mut mesh = Mesh {
            domain: self.domain,
            nx,
            ny,
            order: self.order,
            nodes,
            connectivity,
            distorted: vec![false; nx * ny],
            fitted: false,
        };
        if let Some(inc) = self.fit {
            mesh.fit_inclusions(inc)?;
        }
        for r in &self.align {
            mesh.lattice_rect(r)?;
        }
        Ok(mesh)
    }
}

fn lattice_point<T: Scalar>(domain: &Domain<T>, nlx: usize, nly: usize, i: usize, j: usize) -> Point<T> {
    [
        domain.width * T::from_usize_lossy(i) / T::from_usize_lossy(nlx),
        domain.height * T::from_usize_lossy(j) / T::from_usize_lossy(nly),
    ]
}

/// Lattice index bounds (inclusive) of an aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeRect {
    pub i0: usize,
    pub j0: usize,
    pub i1: usize,
    pub j1: usize,
}

impl<T: Scalar> Mesh<T> {
    pub fn domain(&self) -> Domain<T> {
        self.domain
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn order(&self) -> ElementOrder {
        self.order
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn nodes(&self) -> &[Point<T>] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> Point<T> {
        self.nodes[n]
    }

    pub fn nodes_per_element(&self) -> usize {
        self.order.nodes_per_element()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let npe = self.nodes_per_element();
        &self.connectivity[e * npe..(e + 1) * npe]
    }

    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        ex * self.ny + ey
    }

    pub fn element_cell(&self, e: usize) -> (usize, usize) {
        (e / self.ny, e % self.ny)
    }

    /// Whether any node of the element was moved by inclusion fitting.
    pub fn is_distorted(&self, e: usize) -> bool {
        self.distorted[e]
    }

    pub fn element_coords(&self, e: usize) -> Vec<Point<T>> {
        self.element(e).iter().map(|&n| self.nodes[n]).collect()
    }

    /// Average of the four corner nodes.
    pub fn centroid(&self, e: usize) -> Point<T> {
        let el = self.element(e);
        let q = T::lit(0.25);
        let mut c = [T::zero(); 2];
        for &n in &el[..4] {
            c[0] += self.nodes[n][0];
            c[1] += self.nodes[n][1];
        }
        [c[0] * q, c[1] * q]
    }

    /// Lattice dimensions `(p·nx+1, p·ny+1)`.
    pub fn lattice_dims(&self) -> (usize, usize) {
        let p = self.order.degree();
        (p * self.nx + 1, p * self.ny + 1)
    }

    pub fn lattice_node(&self, i: usize, j: usize) -> usize {
        i * self.lattice_dims().1 + j
    }

    pub fn lattice_coords(&self, n: usize) -> (usize, usize) {
        let ly = self.lattice_dims().1;
        (n / ly, n % ly)
    }

    /// Undistorted position of a lattice node.
    pub fn grid_point(&self, i: usize, j: usize) -> Point<T> {
        let (lx, ly) = self.lattice_dims();
        lattice_point(&self.domain, lx - 1, ly - 1, i, j)
    }

    pub fn element_size(&self) -> (T, T) {
        (
            self.domain.width / T::from_usize_lossy(self.nx),
            self.domain.height / T::from_usize_lossy(self.ny),
        )
    }

    /// Boundary nodes of one side of ∂Ω, ordered counterclockwise around the domain.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        let (lx, ly) = self.lattice_dims();
        match side {
            Side::Bottom => (0..lx).map(|i| self.lattice_node(i, 0)).collect(),
            Side::Right => (0..ly).map(|j| self.lattice_node(lx - 1, j)).collect(),
            Side::Top => (0..lx).rev().map(|i| self.lattice_node(i, ly - 1)).collect(),
            Side::Left => (0..ly).rev().map(|j| self.lattice_node(0, j)).collect(),
        }
    }

    /// Sides of ∂Ω the node lies on.
    pub fn node_sides(&self, n: usize) -> impl Iterator<Item = Side> {
        let (lx, ly) = self.lattice_dims();
        let (i, j) = self.lattice_coords(n);
        let mut sides = Vec::with_capacity(2);
        if i == 0 {
            sides.push(Side::Left);
        }
        if i + 1 == lx {
            sides.push(Side::Right);
        }
        if j == 0 {
            sides.push(Side::Bottom);
        }
        if j + 1 == ly {
            sides.push(Side::Top);
        }
        sides.into_iter()
    }

    pub fn on_domain_boundary(&self, n: usize) -> bool {
        self.node_sides(n).next().is_some()
    }

    /// Boundary edges of one side as (element, lattice nodes along the edge, ordered).
    pub fn side_edges(&self, side: Side) -> Vec<(usize, Vec<usize>)> {
        let p = self.order.degree();
        let (lx, ly) = self.lattice_dims();
        let mut edges = Vec::new();
        match side {
            Side::Bottom | Side::Top => {
                let (ey, j) = if side == Side::Bottom { (0, 0) } else { (self.ny - 1, ly - 1) };
                for ex in 0..self.nx {
                    let nodes = (0..=p).map(|a| self.lattice_node(p * ex + a, j)).collect();
                    edges.push((self.element_index(ex, ey), nodes));
                }
            }
            Side::Left | Side::Right => {
                let (ex, i) = if side == Side::Left { (0, 0) } else { (self.nx - 1, lx - 1) };
                for ey in 0..self.ny {
                    let nodes = (0..=p).map(|b| self.lattice_node(i, p * ey + b)).collect();
                    edges.push((self.element_index(ex, ey), nodes));
                }
            }
        }
        edges
    }

    /// Converts an aligned rectangle to lattice indices. Every edge of the
    /// rectangle must be a grid line whose nodes were not moved off it.
    pub fn lattice_rect(&self, r: &Rect<T>) -> Result<LatticeRect> {
        let (lx, ly) = self.lattice_dims();
        let tol = T::lit(1e-9) * (self.domain.width + self.domain.height);
        let snap = |v: T, extent: T, n: usize, what: &str| -> Result<usize> {
            let t = v / extent * T::from_usize_lossy(n - 1);
            let k = t.round();
            let back = extent * k / T::from_usize_lossy(n - 1);
            if k < T::zero() || k > T::from_usize_lossy(n - 1) || (back - v).abs() > tol {
                return Err(Error::Alignment(format!("{what} = {v} is not on a mesh line")));
            }
            Ok(k.to_usize().unwrap())
        };
        if !r.is_valid() {
            return Err(Error::Alignment(format!("rectangle {r:?} is empty")));
        }
        let p = self.order.degree();
        let lr = LatticeRect {
            i0: snap(r.x0, self.domain.width, lx, "x0")?,
            j0: snap(r.y0, self.domain.height, ly, "y0")?,
            i1: snap(r.x1, self.domain.width, lx, "x1")?,
            j1: snap(r.y1, self.domain.height, ly, "y1")?,
        };
        if [lr.i0, lr.j0, lr.i1, lr.j1].iter().any(|v| v % p != 0) {
            return Err(Error::Alignment(format!("rectangle {r:?} cuts through elements")));
        }
        // Straightness: nodes on vertical edges keep x, on horizontal edges keep y.
        for j in lr.j0..=lr.j1 {
            for i in [lr.i0, lr.i1] {
                if self.nodes[self.lattice_node(i, j)][0] != self.grid_point(i, j)[0] {
                    return Err(Error::Alignment(format!("edge x = {} is bent by inclusion fitting", r.x0)));
                }
            }
        }
        for i in lr.i0..=lr.i1 {
            for j in [lr.j0, lr.j1] {
                if self.nodes[self.lattice_node(i, j)][1] != self.grid_point(i, j)[1] {
                    return Err(Error::Alignment(format!("edge y = {} is bent by inclusion fitting", r.y0)));
                }
            }
        }
        Ok(lr)
    }

    fn fit_inclusions(&mut self, inc: &InclusionSet<T>) -> Result<()> {
        let (hx, hy) = self.element_size();
        let scale = hx.max(hy);
        let tol = T::lit(1e-9);
        if ((hx - hy) / scale).abs() > tol {
            return Err(Error::Alignment("inclusion fitting needs square elements".into()));
        }
        let h = hx;
        let p = self.order.degree();
        let hl = h / T::from_usize_lossy(p);
        let (px, py) = inc.pitch();
        let a = px.min(py) * T::lit(0.5);
        let kb_f = a / h;
        let kb = kb_f.round();
        if (kb - kb_f).abs() > tol * kb_f.max(T::one()) || kb < T::lit(2.0) {
            return Err(Error::Alignment(format!(
                "inclusion block half-size {a} is not a multiple (>= 2) of element size {h}"
            )));
        }
        let kbu = kb.to_usize().unwrap();
        let (lx, ly) = self.lattice_dims();
        let mut moved = vec![false; self.nodes.len()];
        for circle in &inc.circles {
            let ci_f = circle.center[0] / h;
            let cj_f = circle.center[1] / h;
            let (ci, cj) = (ci_f.round(), cj_f.round());
            if (ci - ci_f).abs() > tol * ci_f.max(T::one()) || (cj - cj_f).abs() > tol * cj_f.max(T::one()) {
                return Err(Error::Alignment(format!("inclusion center {:?} is not a mesh node", circle.center)));
            }
            let kr = (circle.radius / h).round().max(T::one()).min(kb - T::one());
            let sr = kr * h;
            let r = circle.radius;
            let ci = ci.to_usize().unwrap() * p;
            let cj = cj.to_usize().unwrap() * p;
            let span = kbu * p;
            if ci < span || cj < span || ci + span >= lx || cj + span >= ly {
                return Err(Error::Alignment("inclusion block leaves the domain".into()));
            }
            let c = self.grid_point(ci, cj);
            for i in (ci - span)..=(ci + span) {
                for j in (cj - span)..=(cj + span) {
                    let du = T::from_usize_lossy(i) - T::from_usize_lossy(ci);
                    let dv = T::from_usize_lossy(j) - T::from_usize_lossy(cj);
                    let (u, v) = (du * hl, dv * hl);
                    let s = u.abs().max(v.abs());
                    if s == T::zero() || s >= a {
                        continue;
                    }
                    let d = [u / s, v / s];
                    let dl = (d[0] * d[0] + d[1] * d[1]).sqrt();
                    let dn = [d[0] / dl, d[1] / dl];
                    let off = if s <= sr {
                        let w = s / sr;
                        let f = s * r / sr;
                        [
                            f * ((T::one() - w) * d[0] + w * dn[0]),
                            f * ((T::one() - w) * d[1] + w * dn[1]),
                        ]
                    } else {
                        let t = (s - sr) / (a - sr);
                        [
                            (T::one() - t) * r * dn[0] + t * a * d[0],
                            (T::one() - t) * r * dn[1] + t * a * d[1],
                        ]
                    };
                    // Midline nodes move along the midline only.
                    let target = [
                        if du == T::zero() { c[0] } else { c[0] + off[0] },
                        if dv == T::zero() { c[1] } else { c[1] + off[1] },
                    ];
                    let n = self.lattice_node(i, j);
                    if target != self.nodes[n] {
                        self.nodes[n] = target;
                        moved[n] = true;
                    }
                }
            }
        }
        for e in 0..self.n_elements() {
            let npe = self.nodes_per_element();
            self.distorted[e] = self.connectivity[e * npe..(e + 1) * npe].iter().any(|&n| moved[n]);
        }
        self.fitted = true;
        let worst = crate::fem::min_jacobian(self);
        if !(worst > T::zero()) {
            return Err(Error::Geometry(format!("inclusion fitting produced a folded element (min det J = {worst})")));
        }
        Ok(())
    }
}

/// Piecewise-constant isotropic conductivity, one value per element.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    values: Vec<T>,
    inclusion: Vec<bool>,
    a_matrix: T,
    a_inclusion: T,
}

pub fn assign_coefficients<T: Scalar>(
    mesh: &Mesh<T>,
    inclusions: &InclusionSet<T>,
    a_matrix: T,
    a_inclusion: T,
) -> Result<CoefficientField<T>> {
    if !(a_matrix > T::zero() && a_inclusion > T::zero()) {
        return Err(Error::Validation(format!(
            "conductivities must be positive, got {a_matrix} and {a_inclusion}"
        )));
    }
    let inclusion: Vec<bool> = (0..mesh.n_elements()).map(|e| inclusions.contains(mesh.centroid(e))).collect();
    let values = inclusion.iter().map(|&inc| if inc { a_inclusion } else { a_matrix }).collect();
    Ok(CoefficientField { values, inclusion, a_matrix, a_inclusion })
}

impl<T: Scalar> CoefficientField<T> {
    pub fn uniform(mesh: &Mesh<T>, a: T) -> Result<Self> {
        if !(a > T::zero()) {
            return Err(Error::Validation(format!("conductivity must be positive, got {a}")));
        }
        let n = mesh.n_elements();
        Ok(Self { values: vec![a; n], inclusion: vec![false; n], a_matrix: a, a_inclusion: a })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, e: usize) -> T {
        self.values[e]
    }

    pub fn is_inclusion(&self, e: usize) -> bool {
        self.inclusion[e]
    }

    pub fn a_matrix(&self) -> T {
        self.a_matrix
    }

    pub fn a_inclusion(&self) -> T {
        self.a_inclusion
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same partition, every value multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * c).collect(),
            inclusion: self.inclusion.clone(),
            a_matrix: self.a_matrix * c,
            a_inclusion: self.a_inclusion * c,
        }
    }

    /// Lower and upper bounds of the field.
    pub fn bounds(&self) -> (T, T) {
        (self.a_matrix.min(self.a_inclusion), self.a_matrix.max(self.a_inclusion))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionShape<T> {
    Rect(Rect<T>),
    /// `outer` minus the open interior of `hole`.
    Annulus { outer: Rect<T>, hole: Rect<T> },
}

impl<T: Scalar> RegionShape<T> {
    pub fn outer(&self) -> Rect<T> {
        match self {
            Self::Rect(r) => *r,
            Self::Annulus { outer, .. } => *outer,
        }
    }

    pub fn hole(&self) -> Option<Rect<T>> {
        match self {
            Self::Rect(_) => None,
            Self::Annulus { hole, .. } => Some(*hole),
        }
    }

    pub fn area(&self) -> T {
        match self {
            Self::Rect(r) => r.area(),
            Self::Annulus { outer, hole } => outer.area() - hole.area(),
        }
    }
}

/// Identity of a region on a given mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegionTag {
    pub outer: LatticeRect,
    pub hole: Option<LatticeRect>,
    pub mesh_nodes: usize,
}

const ABSENT: u32 = u32::MAX;

/// Element and node sets of an aligned rectangle or rectangular annulus.
#[derive(Clone, Debug)]
pub struct RegionIndex<T> {
    shape: RegionShape<T>,
    tag: RegionTag,
    elements: Vec<usize>,
    nodes: Vec<usize>,
    local: Vec<u32>,
    loops: Vec<Vec<usize>>,
    boundary: Vec<usize>,
}

pub fn region_index<T: Scalar>(mesh: &Mesh<T>, shape: RegionShape<T>) -> Result<RegionIndex<T>> {
    let outer = mesh.lattice_rect(&shape.outer())?;
    let hole = match shape.hole() {
        Some(h) => {
            let lh = mesh.lattice_rect(&h)?;
            if !(lh.i0 > outer.i0 && lh.i1 < outer.i1 && lh.j0 > outer.j0 && lh.j1 < outer.j1) {
                return Err(Error::Geometry("annulus hole must lie strictly inside the outer rectangle".into()));
            }
            Some(lh)
        }
        None => None,
    };
    let p = mesh.order().degree();
    let in_hole_el = |ex: usize, ey: usize| match hole {
        Some(h) => ex >= h.i0 / p && ex < h.i1 / p && ey >= h.j0 / p && ey < h.j1 / p,
        None => false,
    };
    let mut elements = Vec::new();
    for ex in outer.i0 / p..outer.i1 / p {
        for ey in outer.j0 / p..outer.j1 / p {
            if !in_hole_el(ex, ey) {
                elements.push(mesh.element_index(ex, ey));
            }
        }
    }
    let in_hole_node = |i: usize, j: usize| match hole {
        Some(h) => i > h.i0 && i < h.i1 && j > h.j0 && j < h.j1,
        None => false,
    };
    let mut nodes = Vec::new();
    let mut local = vec![ABSENT; mesh.n_nodes()];
    for i in outer.i0..=outer.i1 {
        for j in outer.j0..=outer.j1 {
            if !in_hole_node(i, j) {
                let n = mesh.lattice_node(i, j);
                local[n] = nodes.len() as u32;
                nodes.push(n);
            }
        }
    }
    let mut loops = vec![rect_loop(mesh, outer)];
    if let Some(h) = hole {
        loops.push(rect_loop(mesh, h));
    }
    let mut boundary: Vec<usize> = loops.iter().flatten().copied().collect();
    boundary.sort_unstable();
    boundary.dedup();
    Ok(RegionIndex {
        shape,
        tag: RegionTag { outer, hole, mesh_nodes: mesh.n_nodes() },
        elements,
        nodes,
        local,
        loops,
        boundary,
    })
}

/// Counterclockwise node loop around a lattice rectangle, starting at its lower-left corner.
fn rect_loop<T: Scalar>(mesh: &Mesh<T>, r: LatticeRect) -> Vec<usize> {
    let mut out = Vec::with_capacity(2 * (r.i1 - r.i0 + r.j1 - r.j0));
    for i in r.i0..r.i1 {
        out.push(mesh.lattice_node(i, r.j0));
    }
    for j in r.j0..r.j1 {
        out.push(mesh.lattice_node(r.i1, j));
    }
    for i in ((r.i0 + 1)..=r.i1).rev() {
        out.push(mesh.lattice_node(i, r.j1));
    }
    for j in ((r.j0 + 1)..=r.j1).rev() {
        out.push(mesh.lattice_node(r.i0, j));
    }
    out
}

impl<T: Scalar> RegionIndex<T> {
    pub fn whole(mesh: &Mesh<T>) -> Self {
        region_index(mesh, RegionShape::Rect(mesh.domain().rect())).expect("whole domain is aligned")
    }

    pub fn shape(&self) -> RegionShape<T> {
        self.shape
    }

    pub fn tag(&self) -> RegionTag {
        self.tag
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    /// Global node ids in ascending order; position is the local index.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        match self.local.get(global) {
            Some(&l) if l != ABSENT => Some(l as usize),
            _ => None,
        }
    }

    pub fn contains_node(&self, global: usize) -> bool {
        self.local_index(global).is_some()
    }

    /// Boundary loops: the outer loop first, then the hole loop for annuli.
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    /// Sorted global ids of all region-boundary nodes.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary_node(&self, global: usize) -> bool {
        self.boundary.binary_search(&global).is_ok()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        self.nodes.iter().copied().filter(|n| !self.is_boundary_node(*n)).collect()
    }

    pub fn is_subset_of(&self, other: &RegionIndex<T>) -> bool {
        self.tag.mesh_nodes == other.tag.mesh_nodes && self.nodes.iter().all(|&n| other.contains_node(n)) && {
            let mut theirs = other.elements.clone();
            theirs.sort_unstable();
            self.elements.iter().all(|e| theirs.binary_search(e).is_ok())
        }
    }

    /// Whether the element belongs to the region.
    pub fn contains_element(&self, mesh: &Mesh<T>, e: usize) -> bool {
        let p = mesh.order().degree();
        let (ex, ey) = mesh.element_cell(e);
        let (i, j) = (p * ex, p * ey);
        let o = self.tag.outer;
        let inside = i >= o.i0 && i < o.i1 && j >= o.j0 && j < o.j1;
        let in_hole = match self.tag.hole {
            Some(h) => i >= h.i0 && i < h.i1 && j >= h.j0 && j < h.j1,
            None => false,
        };
        inside && !in_hole
    }
}
