use crate::geometry::{ElementOrder, NODE_OFFSETS_Q1, NODE_OFFSETS_Q2};
use crate::scalar::Scalar;

/// Shape function values and reference gradients at one point.
#[derive(Clone, Copy, Debug)]
pub struct ShapeValues<T> {
    pub n: usize,
    pub values: [T; 9],
    pub grads: [[T; 2]; 9],
}

impl<T: Scalar> ShapeValues<T> {
    pub fn values(&self) -> &[T] {
        &self.values[..self.n]
    }

    pub fn grads(&self) -> &[[T; 2]] {
        &self.grads[..self.n]
    }
}

// 1D Lagrange basis on [-1, 1]: values and derivatives at x.
fn lagrange_1d<T: Scalar>(order: ElementOrder, x: T) -> ([T; 3], [T; 3]) {
    let half = T::lit(0.5);
    let one = T::one();
    match order {
        ElementOrder::Linear => ([(one - x) * half, (one + x) * half, T::zero()], [-half, half, T::zero()]),
        ElementOrder::Quadratic => (
            [x * (x - one) * half, one - x * x, x * (x + one) * half],
            [x - half, -(x + x), x + half],
        ),
    }
}

/// Evaluates the order-1 (4-node) or order-2 (9-node) Lagrange shape functions
/// on the reference square `[-1, 1]²`.
pub fn shape_eval<T: Scalar>(order: ElementOrder, xi: [T; 2]) -> ShapeValues<T> {
    let (vx, dx) = lagrange_1d(order, xi[0]);
    let (vy, dy) = lagrange_1d(order, xi[1]);
    let offsets: &[(usize, usize)] = match order {
        ElementOrder::Linear => &NODE_OFFSETS_Q1,
        ElementOrder::Quadratic => &NODE_OFFSETS_Q2,
    };
    let mut out = ShapeValues { n: offsets.len(), values: [T::zero(); 9], grads: [[T::zero(); 2]; 9] };
    for (k, &(a, b)) in offsets.iter().enumerate() {
        out.values[k] = vx[a] * vy[b];
        out.grads[k] = [dx[a] * vy[b], vx[a] * dy[b]];
    }
    out
}

/// Reference coordinates of the element nodes.
pub fn reference_nodes<T: Scalar>(order: ElementOrder) -> Vec<[T; 2]> {
    let (offsets, step): (&[(usize, usize)], f64) = match order {
        ElementOrder::Linear => (&NODE_OFFSETS_Q1, 2.0),
        ElementOrder::Quadratic => (&NODE_OFFSETS_Q2, 1.0),
    };
    offsets
        .iter()
        .map(|&(a, b)| [T::lit(-1.0 + step * a as f64), T::lit(-1.0 + step * b as f64)])
        .collect()
}

/// Gauss-Legendre points and weights on [-1, 1].
pub fn gauss_1d<T: Scalar>(n: usize) -> Vec<(T, T)> {
    let pts: Vec<(f64, f64)> = match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (0.6f64).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt() * 2.0;
            let a = ((3.0 - s) / 7.0).sqrt();
            let b = ((3.0 + s) / 7.0).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => panic!("Gauss rule with {n} points not tabulated"),
    };
    pts.into_iter().map(|(x, w)| (T::lit(x), T::lit(w))).collect()
}

/// Tensor Gauss rule with `order + 1` points per direction.
pub fn quadrature<T: Scalar>(order: ElementOrder) -> Vec<([T; 2], T)> {
    let g = gauss_1d::<T>(order.degree() + 1);
    let mut out = Vec::with_capacity(g.len() * g.len());
    for &(x, wx) in &g {
        for &(y, wy) in &g {
            out.push(([x, y], wx * wy));
        }
    }
    out
}
