use super::element::{jacobian, physical_gradients, Operator};
use super::field::NodalField;
use super::shape::{gauss_1d, quadrature, shape_eval};
use super::solver::{ConstrainedSolver, SolverSettings};
use super::sparse::assemble;
use crate::error::{Error, Result};
use crate::geometry::{ElementOrder, Mesh, Point, RegionIndex, Side};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

pub type ScalarFn<T> = Arc<dyn Fn(Point<T>) -> T + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryKind<T> {
    Dirichlet(ScalarFn<T>),
    Neumann(ScalarFn<T>),
    HomogeneousDirichlet,
    HomogeneousNeumann,
}

impl<T: Scalar> BoundaryKind<T> {
    pub fn dirichlet_const(v: T) -> Self {
        if v == T::zero() {
            Self::HomogeneousDirichlet
        } else {
            Self::Dirichlet(Arc::new(move |_| v))
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, Self::Dirichlet(_) | Self::HomogeneousDirichlet)
    }

    /// Prescribed value (Dirichlet) or flux (Neumann) at a point.
    pub fn value(&self, p: Point<T>) -> T {
        match self {
            Self::Dirichlet(f) | Self::Neumann(f) => f(p),
            Self::HomogeneousDirichlet | Self::HomogeneousNeumann => T::zero(),
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Self::HomogeneousDirichlet | Self::HomogeneousNeumann)
    }
}

impl<T> fmt::Debug for BoundaryKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dirichlet(_) => "Dirichlet",
            Self::Neumann(_) => "Neumann",
            Self::HomogeneousDirichlet => "HomogeneousDirichlet",
            Self::HomogeneousNeumann => "HomogeneousNeumann",
        })
    }
}

/// One boundary condition per side of the rectangle. A corner shared by a
/// Dirichlet and a Neumann side is a Dirichlet node.
#[derive(Clone, Debug)]
pub struct BoundaryConditions<T> {
    pub left: BoundaryKind<T>,
    pub right: BoundaryKind<T>,
    pub bottom: BoundaryKind<T>,
    pub top: BoundaryKind<T>,
}

impl<T: Scalar> BoundaryConditions<T> {
    /// `u = 0` on the left side, `u = 1` on the right side, insulated top and bottom.
    pub fn benchmark() -> Self {
        Self {
            left: BoundaryKind::HomogeneousDirichlet,
            right: BoundaryKind::dirichlet_const(T::one()),
            bottom: BoundaryKind::HomogeneousNeumann,
            top: BoundaryKind::HomogeneousNeumann,
        }
    }

    pub fn all_neumann() -> Self {
        Self {
            left: BoundaryKind::HomogeneousNeumann,
            right: BoundaryKind::HomogeneousNeumann,
            bottom: BoundaryKind::HomogeneousNeumann,
            top: BoundaryKind::HomogeneousNeumann,
        }
    }

    pub fn side(&self, s: Side) -> &BoundaryKind<T> {
        match s {
            Side::Left => &self.left,
            Side::Right => &self.right,
            Side::Bottom => &self.bottom,
            Side::Top => &self.top,
        }
    }

    pub fn has_dirichlet(&self) -> bool {
        Side::ALL.iter().any(|&s| self.side(s).is_dirichlet())
    }

    /// The Dirichlet side governing a mesh node, if any.
    pub fn dirichlet_side(&self, mesh: &Mesh<T>, n: usize) -> Option<Side> {
        let mut sides: Vec<Side> = mesh.node_sides(n).filter(|&s| self.side(s).is_dirichlet()).collect();
        sides.sort_by_key(|s| match s {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        });
        sides.first().copied()
    }

    pub fn dirichlet_value(&self, mesh: &Mesh<T>, n: usize) -> Option<T> {
        self.dirichlet_side(mesh, n).map(|s| self.side(s).value(mesh.node(n)))
    }
}

/// Load vector `∫ f v + ∫_{Γ_N} g v` on a region, in its local numbering.
/// Neumann contributions are taken from edges of ∂Ω that belong to the region.
pub fn assemble_load<T: Scalar>(
    op: &Operator<T>,
    region: &RegionIndex<T>,
    source: Option<&ScalarFn<T>>,
    bc: &BoundaryConditions<T>,
) -> Vec<T> {
    let mesh = op.mesh();
    let mut load = vec![T::zero(); region.n_nodes()];
    let order = mesh.order();
    if let Some(f) = source {
        let quad = quadrature::<T>(order);
        let shapes: Vec<_> = quad.iter().map(|&(p, w)| (shape_eval(order, p), w)).collect();
        let contributions: Vec<Vec<T>> = region
            .elements()
            .par_iter()
            .map(|&e| {
                let coords = mesh.element_coords(e);
                let mut fe = vec![T::zero(); coords.len()];
                for (s, w) in &shapes {
                    let (_, det) = jacobian(&coords, s.grads());
                    let mut x = [T::zero(); 2];
                    for (c, &v) in coords.iter().zip(s.values()) {
                        x[0] += c[0] * v;
                        x[1] += c[1] * v;
                    }
                    let fx = f(x) * *w * det;
                    for (a, &v) in s.values().iter().enumerate() {
                        fe[a] += fx * v;
                    }
                }
                fe
            })
            .collect();
        for (&e, fe) in region.elements().iter().zip(&contributions) {
            for (&g, &v) in mesh.element(e).iter().zip(fe) {
                load[region.local_index(g).unwrap()] += v;
            }
        }
    }
    for side in Side::ALL {
        let kind = bc.side(side);
        if !matches!(kind, BoundaryKind::Neumann(_)) {
            continue;
        }
        let gauss = gauss_1d::<T>(order.degree() + 2);
        for (e, nodes) in mesh.side_edges(side) {
            if !region.contains_element(mesh, e) {
                continue;
            }
            let xs: Vec<Point<T>> = nodes.iter().map(|&n| mesh.node(n)).collect();
            for &(t, w) in &gauss {
                let (vals, ders) = edge_shape(order, t);
                let mut x = [T::zero(); 2];
                let mut dx = [T::zero(); 2];
                for k in 0..xs.len() {
                    x[0] += xs[k][0] * vals[k];
                    x[1] += xs[k][1] * vals[k];
                    dx[0] += xs[k][0] * ders[k];
                    dx[1] += xs[k][1] * ders[k];
                }
                let ds = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
                let g = kind.value(x) * w * ds;
                for (k, &n) in nodes.iter().enumerate() {
                    load[region.local_index(n).unwrap()] += g * vals[k];
                }
            }
        }
    }
    load
}

// 1D Lagrange basis along an edge with nodes ordered from t = -1 to t = 1.
fn edge_shape<T: Scalar>(order: ElementOrder, t: T) -> (Vec<T>, Vec<T>) {
    let half = T::lit(0.5);
    let one = T::one();
    match order {
        ElementOrder::Linear => (vec![(one - t) * half, (one + t) * half], vec![-half, half]),
        ElementOrder::Quadratic => (
            vec![t * (t - one) * half, one - t * t, t * (t + one) * half],
            vec![t - half, -(t + t), t + half],
        ),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Nullspace {
    /// A system without Dirichlet nodes is rejected.
    #[default]
    Reject,
    /// Pure Neumann: pin the first node to zero (requires a compatible load).
    PinConstant,
}

/// Solves `-div(a ∇u) = f` on the whole mesh with the given side conditions.
pub fn solve<T: Scalar>(
    op: &Operator<T>,
    bc: &BoundaryConditions<T>,
    source: Option<&ScalarFn<T>>,
    settings: &SolverSettings<T>,
    nullspace: Nullspace,
) -> Result<NodalField<T>> {
    let mesh = op.mesh();
    let region = Arc::new(RegionIndex::whole(mesh));
    let k = assemble(op, &region);
    let load = assemble_load(op, &region, source, bc);
    let n = region.n_nodes();
    let mut fixed = vec![false; n];
    let mut values = vec![T::zero(); n];
    for (l, &g) in region.nodes().iter().enumerate() {
        if let Some(v) = bc.dirichlet_value(mesh, g) {
            fixed[l] = true;
            values[l] = v;
        }
    }
    if !fixed.iter().any(|&f| f) {
        match nullspace {
            Nullspace::Reject => {
                return Err(Error::Solvability("no Dirichlet nodes and no nullspace handling".into()));
            }
            Nullspace::PinConstant => {
                let total: T = load.iter().copied().sum();
                let scale: T = load.iter().map(|v| v.abs()).sum::<T>().max(T::min_positive_value());
                if total.abs() > T::lit(1e-10).max(T::lit(100.0) * T::epsilon()) * scale {
                    return Err(Error::Solvability(format!("pure Neumann load is incompatible (sum {total})")));
                }
                fixed[0] = true;
            }
        }
    }
    let solver = ConstrainedSolver::new(&k, &fixed, *settings)?;
    let u = solver.solve(&load, &values)?;
    NodalField::new(region, mesh.order(), u)
}

/// Gradient of the interpolant of nodal values at a reference point of element `e`.
pub fn field_gradient<T: Scalar>(mesh: &Mesh<T>, e: usize, nodal: &[T], xi: [T; 2]) -> [T; 2] {
    let order = mesh.order();
    let s = shape_eval(order, xi);
    let coords = mesh.element_coords(e);
    let (j, det) = jacobian(&coords, s.grads());
    let mut pg = [[T::zero(); 2]; 9];
    physical_gradients(&j, det, s.grads(), &mut pg[..s.n]);
    let mut g = [T::zero(); 2];
    for (k, &v) in nodal.iter().enumerate() {
        g[0] += v * pg[k][0];
        g[1] += v * pg[k][1];
    }
    g
}
