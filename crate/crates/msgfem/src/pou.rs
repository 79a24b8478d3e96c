//! Overlapping cover `{ωᵢ ⊂ ωᵢ*}` and the flat-topped partition of unity.

use crate::error::{Error, Result};
use crate::fem::{field_gradient, BoundaryConditions, NodalField};
use crate::geometry::{Domain, Mesh, Rect, RegionIndex, RegionShape, Side, region_index};
use crate::scalar::Scalar;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PatchKind {
    /// ω* does not touch ∂Ω.
    Interior,
    /// ω* touches ∂Ω on Neumann sides only.
    Neumann,
    /// ω* touches a Dirichlet side.
    Dirichlet,
}

impl PatchKind {
    /// Interior and Neumann patches carry the constants in their local spaces.
    pub fn needs_constant(self) -> bool {
        !matches!(self, PatchKind::Dirichlet)
    }
}

#[derive(Clone, Debug)]
pub struct Patch<T> {
    pub id: usize,
    pub kind: PatchKind,
    pub omega: Arc<RegionIndex<T>>,
    pub omega_star: Arc<RegionIndex<T>>,
}

impl<T: Scalar> Patch<T> {
    /// Builds a patch and derives its kind from the sides of ∂Ω that ω* touches.
    pub fn new(
        id: usize,
        mesh: &Mesh<T>,
        omega: RegionShape<T>,
        omega_star: RegionShape<T>,
        bc: &BoundaryConditions<T>,
    ) -> Result<Self> {
        let w = region_index(mesh, omega)?;
        let ws = region_index(mesh, omega_star)?;
        if !w.is_subset_of(&ws) {
            return Err(Error::Cover(format!("patch {id}: ω is not contained in ω*")));
        }
        let kind = classify(mesh, &ws, bc);
        Ok(Self { id, kind, omega: Arc::new(w), omega_star: Arc::new(ws) })
    }

    /// Sides of ∂Ω touched by ω*.
    pub fn touched_sides(&self, mesh: &Mesh<T>) -> Vec<Side> {
        touched_sides(mesh, &self.omega_star)
    }
}

fn touched_sides<T: Scalar>(mesh: &Mesh<T>, region: &RegionIndex<T>) -> Vec<Side> {
    let (lx, ly) = mesh.lattice_dims();
    let o = region.tag().outer;
    let mut sides = Vec::new();
    if o.j0 == 0 {
        sides.push(Side::Bottom);
    }
    if o.i1 + 1 == lx {
        sides.push(Side::Right);
    }
    if o.j1 + 1 == ly {
        sides.push(Side::Top);
    }
    if o.i0 == 0 {
        sides.push(Side::Left);
    }
    sides
}

fn classify<T: Scalar>(mesh: &Mesh<T>, star: &RegionIndex<T>, bc: &BoundaryConditions<T>) -> PatchKind {
    let sides = touched_sides(mesh, star);
    if sides.is_empty() {
        PatchKind::Interior
    } else if sides.iter().any(|&s| bc.side(s).is_dirichlet()) {
        PatchKind::Dirichlet
    } else {
        PatchKind::Neumann
    }
}

/// Sizes of the four concentric rectangles defining the two-patch cover.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverDims<T> {
    /// ω₁.
    pub inner: (T, T),
    /// ω₁*.
    pub inner_star: (T, T),
    /// Hole of ω₂ (strictly inside ω₁).
    pub hole: (T, T),
    /// Hole of ω₂* (strictly inside the hole of ω₂).
    pub hole_star: (T, T),
}

impl<T: Scalar> CoverDims<T> {
    /// The benchmark cover scaled to a domain of the given size: ω₁ covers
    /// 60% of each side, ω₁* 80%, and the holes 40% and 20%.
    pub fn scaled_to(domain: Domain<T>) -> Self {
        let (w, h) = (domain.width, domain.height);
        let f = |s: f64| (w * T::lit(s), h * T::lit(s));
        Self { inner: f(0.6), inner_star: f(0.8), hole: f(0.4), hole_star: f(0.2) }
    }
}

/// Overlapping patches; overlap is the maximum number of patches sharing a point.
#[derive(Clone, Debug)]
pub struct Cover<T> {
    pub patches: Vec<Patch<T>>,
    pub overlap: usize,
    pub inner: Rect<T>,
    pub inner_star: Rect<T>,
    pub hole: Rect<T>,
    pub hole_star: Rect<T>,
}

/// ω₁ = inner rectangle (interior patch) and ω₂ = Ω minus a hole strictly
/// inside ω₁, with ω₁* and ω₂* their enlargements.
pub fn build_two_patch_cover<T: Scalar>(
    mesh: &Mesh<T>,
    bc: &BoundaryConditions<T>,
    dims: CoverDims<T>,
) -> Result<Cover<T>> {
    let domain = mesh.domain();
    let dr = domain.rect();
    let inner = domain.centered(dims.inner.0, dims.inner.1);
    let inner_star = domain.centered(dims.inner_star.0, dims.inner_star.1);
    let hole = domain.centered(dims.hole.0, dims.hole.1);
    let hole_star = domain.centered(dims.hole_star.0, dims.hole_star.1);
    for r in [inner, inner_star, hole, hole_star] {
        if !r.is_valid() {
            return Err(Error::Cover(format!("empty cover rectangle {r:?}")));
        }
    }
    if !dr.strictly_contains(&inner_star) {
        return Err(Error::Cover("ω₁* must lie strictly inside the domain".into()));
    }
    if !inner_star.strictly_contains(&inner) {
        return Err(Error::Cover("ω₁ must lie strictly inside ω₁*".into()));
    }
    if !inner.strictly_contains(&hole) {
        return Err(Error::Cover("the hole of ω₂ must lie strictly inside ω₁".into()));
    }
    if !hole.strictly_contains(&hole_star) {
        return Err(Error::Cover("the hole of ω₂* must lie strictly inside the hole of ω₂".into()));
    }
    let p1 = Patch::new(0, mesh, RegionShape::Rect(inner), RegionShape::Rect(inner_star), bc)?;
    let p2 = Patch::new(
        1,
        mesh,
        RegionShape::Annulus { outer: dr, hole },
        RegionShape::Annulus { outer: dr, hole: hole_star },
        bc,
    )?;
    Ok(Cover { patches: vec![p1, p2], overlap: 2, inner, inner_star, hole, hole_star })
}

/// One partition function, stored on the nodes of its patch ω.
#[derive(Clone, Debug)]
pub struct PuFunction<T> {
    pub patch: usize,
    pub field: NodalField<T>,
}

impl<T: Scalar> PuFunction<T> {
    /// Nodal value at a global node (zero outside ω).
    pub fn at(&self, global: usize) -> T {
        self.field.at(global)
    }
}

#[derive(Clone, Debug)]
pub struct PartitionOfUnity<T> {
    pub functions: Vec<PuFunction<T>>,
    /// Overlap band widths: left, right, bottom, top.
    pub bands: [T; 4],
}

// Clamped piecewise-linear ramp: 0 outside [a, d], 1 on [b, c].
fn ramp<T: Scalar>(x: T, a: T, b: T, c: T, d: T) -> T {
    if x <= a || x >= d {
        T::zero()
    } else if x < b {
        (x - a) / (b - a)
    } else if x <= c {
        T::one()
    } else {
        (d - x) / (d - c)
    }
}

/// φ₁ is the tensor product of two ramps from ∂ω₁ to the hole of ω₂, so it
/// is linear across edge bands and bilinear in the corners; φ₂ = 1 − φ₁.
pub fn build_pu<T: Scalar>(cover: &Cover<T>, mesh: &Mesh<T>) -> Result<PartitionOfUnity<T>> {
    if cover.patches.len() != 2
        || !matches!(cover.patches[0].omega.shape(), RegionShape::Rect(_))
        || !matches!(cover.patches[1].omega.shape(), RegionShape::Annulus { .. })
    {
        return Err(Error::UnsupportedCover("only the rectangle/annulus two-patch cover is supported".into()));
    }
    let (i, h) = (cover.inner, cover.hole);
    let phi1 = |p: [T; 2]| ramp(p[0], i.x0, h.x0, h.x1, i.x1) * ramp(p[1], i.y0, h.y0, h.y1, i.y1);
    let w1 = cover.patches[0].omega.clone();
    let w2 = cover.patches[1].omega.clone();
    let f1 = NodalField::interpolate(mesh, w1, phi1);
    let f2 = NodalField::interpolate(mesh, w2, |p| T::one() - phi1(p));
    Ok(PartitionOfUnity {
        functions: vec![PuFunction { patch: 0, field: f1 }, PuFunction { patch: 1, field: f2 }],
        bands: [h.x0 - i.x0, i.x1 - h.x1, h.y0 - i.y0, i.y1 - h.y1],
    })
}

/// Gradient of the interpolant of φ at reference point `xi` of element `e`.
pub fn pu_gradient<T: Scalar>(phi: &PuFunction<T>, mesh: &Mesh<T>, e: usize, xi: [T; 2]) -> [T; 2] {
    let nodal: Vec<T> = mesh.element(e).iter().map(|&g| phi.at(g)).collect();
    field_gradient(mesh, e, &nodal, xi)
}
