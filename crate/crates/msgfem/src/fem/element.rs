use super::shape::{quadrature, reference_nodes, shape_eval};
use crate::error::{Error, Result};
use crate::geometry::{CoefficientField, ElementOrder, Mesh, Point};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::sync::Arc;

/// Dense symmetric element matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementStiffness<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> ElementStiffness<T> {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> T {
        self.data[a * self.n + b]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&v| v * c).collect() }
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.data.chunks(self.n).map(|r| r.iter().copied().sum()).collect()
    }
}

/// Jacobian matrix and determinant of the isoparametric map at a reference point.
pub fn jacobian<T: Scalar>(coords: &[Point<T>], grads: &[[T; 2]]) -> ([[T; 2]; 2], T) {
    let mut j = [[T::zero(); 2]; 2];
    for (x, g) in coords.iter().zip(grads) {
        j[0][0] += x[0] * g[0];
        j[0][1] += x[0] * g[1];
        j[1][0] += x[1] * g[0];
        j[1][1] += x[1] * g[1];
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    (j, det)
}

/// Physical gradients of the shape functions given reference gradients.
pub fn physical_gradients<T: Scalar>(j: &[[T; 2]; 2], det: T, grads: &[[T; 2]], out: &mut [[T; 2]]) {
    // J = [[dx/dξ, dx/dη], [dy/dξ, dy/dη]]; ∇N = J⁻ᵀ ∇̂N.
    let inv = T::one() / det;
    for (o, g) in out.iter_mut().zip(grads) {
        o[0] = (j[1][1] * g[0] - j[1][0] * g[1]) * inv;
        o[1] = (-j[0][1] * g[0] + j[0][0] * g[1]) * inv;
    }
}

/// `Kₑ = ∫ a ∇Nᵢ·∇Nⱼ` by tensor Gauss quadrature (2×2 or 3×3).
pub fn element_stiffness<T: Scalar>(coords: &[Point<T>], coefficient: T, order: ElementOrder) -> Result<ElementStiffness<T>> {
    let n = order.nodes_per_element();
    if coords.len() != n {
        return Err(Error::Geometry(format!("expected {n} element nodes, got {}", coords.len())));
    }
    let mut data = vec![T::zero(); n * n];
    let mut pg = [[T::zero(); 2]; 9];
    for (xi, w) in quadrature::<T>(order) {
        let s = shape_eval(order, xi);
        let (j, det) = jacobian(coords, s.grads());
        if !(det > T::zero()) {
            return Err(Error::Geometry(format!("non-positive Jacobian {det} at {xi:?}")));
        }
        physical_gradients(&j, det, s.grads(), &mut pg[..n]);
        let f = coefficient * w * det;
        for a in 0..n {
            for b in a..n {
                data[a * n + b] += f * (pg[a][0] * pg[b][0] + pg[a][1] * pg[b][1]);
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            data[a * n + b] = data[b * n + a];
        }
    }
    Ok(ElementStiffness { n, data })
}

/// Smallest Jacobian determinant over quadrature and node points of all elements.
pub fn min_jacobian<T: Scalar>(mesh: &Mesh<T>) -> T {
    let order = mesh.order();
    let mut pts: Vec<[T; 2]> = quadrature::<T>(order).into_iter().map(|(p, _)| p).collect();
    pts.extend(reference_nodes::<T>(order));
    let shapes: Vec<_> = pts.iter().map(|&p| shape_eval(order, p)).collect();
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let c = mesh.element_coords(e);
            shapes.iter().map(|s| jacobian(&c, s.grads()).1).fold(T::infinity(), |m, d| m.min(d))
        })
        .reduce(|| T::infinity(), |a, b| a.min(b))
}

const REFERENCE: u32 = u32::MAX;

/// Unit-coefficient element matrices of a mesh. Undistorted elements share
/// one reference matrix; elements moved by inclusion fitting get their own.
#[derive(Debug)]
pub struct GeometryCache<T> {
    npe: usize,
    reference: Vec<T>,
    slot: Vec<u32>,
    own: Vec<T>,
}

impl<T: Scalar> GeometryCache<T> {
    pub fn new(mesh: &Mesh<T>) -> Result<Self> {
        let order = mesh.order();
        let npe = order.nodes_per_element();
        let (hx, hy) = mesh.element_size();
        let reference_coords: Vec<Point<T>> = reference_nodes::<T>(order)
            .into_iter()
            .map(|r| [(r[0] + T::one()) * T::lit(0.5) * hx, (r[1] + T::one()) * T::lit(0.5) * hy])
            .collect();
        let reference = element_stiffness(&reference_coords, T::one(), order)?.data;
        let distorted: Vec<usize> = (0..mesh.n_elements()).filter(|&e| mesh.is_distorted(e)).collect();
        let mats: Vec<Vec<T>> = distorted
            .par_iter()
            .map(|&e| element_stiffness(&mesh.element_coords(e), T::one(), order).map(|k| k.data))
            .collect::<Result<_>>()?;
        let mut slot = vec![REFERENCE; mesh.n_elements()];
        let mut own = Vec::with_capacity(mats.len() * npe * npe);
        for (k, (&e, m)) in distorted.iter().zip(&mats).enumerate() {
            slot[e] = k as u32;
            own.extend_from_slice(m);
        }
        Ok(Self { npe, reference, slot, own })
    }

    #[inline]
    pub fn unit_matrix(&self, e: usize) -> &[T] {
        let s = self.slot[e];
        if s == REFERENCE {
            &self.reference
        } else {
            let w = self.npe * self.npe;
            &self.own[s as usize * w..(s as usize + 1) * w]
        }
    }

    pub fn nodes_per_element(&self) -> usize {
        self.npe
    }
}

/// Mesh, coefficient and cached element matrices: everything needed to
/// apply the stiffness operator element by element.
#[derive(Clone, Debug)]
pub struct Operator<T> {
    mesh: Arc<Mesh<T>>,
    coeff: Arc<CoefficientField<T>>,
    cache: Arc<GeometryCache<T>>,
}

impl<T: Scalar> Operator<T> {
    pub fn new(mesh: Arc<Mesh<T>>, coeff: Arc<CoefficientField<T>>) -> Result<Self> {
        if coeff.len() != mesh.n_elements() {
            return Err(Error::Domain(format!(
                "coefficient has {} values for {} elements",
                coeff.len(),
                mesh.n_elements()
            )));
        }
        let cache = Arc::new(GeometryCache::new(&mesh)?);
        Ok(Self { mesh, coeff, cache })
    }

    /// Same mesh and cached geometry with a different coefficient field.
    pub fn with_coefficients(&self, coeff: Arc<CoefficientField<T>>) -> Result<Self> {
        if coeff.len() != self.mesh.n_elements() {
            return Err(Error::Domain("coefficient does not match mesh".into()));
        }
        Ok(Self { mesh: self.mesh.clone(), coeff, cache: self.cache.clone() })
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn coefficients(&self) -> &Arc<CoefficientField<T>> {
        &self.coeff
    }

    #[inline]
    pub fn coefficient(&self, e: usize) -> T {
        self.coeff.value(e)
    }

    #[inline]
    pub fn unit_matrix(&self, e: usize) -> &[T] {
        self.cache.unit_matrix(e)
    }

    pub fn element_stiffness(&self, e: usize) -> ElementStiffness<T> {
        let n = self.cache.nodes_per_element();
        let c = self.coefficient(e);
        ElementStiffness { n, data: self.unit_matrix(e).iter().map(|&v| v * c).collect() }
    }

    /// y += a·Kₑ·x for element-local vectors.
    #[inline]
    pub fn apply_element(&self, e: usize, x: &[T], y: &mut [T]) {
        let n = self.cache.nodes_per_element();
        let k = self.unit_matrix(e);
        let c = self.coefficient(e);
        for a in 0..n {
            let row = &k[a * n..(a + 1) * n];
            let mut s = T::zero();
            for b in 0..n {
                s += row[b] * x[b];
            }
            y[a] += c * s;
        }
    }
}
