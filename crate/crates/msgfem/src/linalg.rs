//! Small dense linear algebra: row-major matrices, Cholesky and a symmetric
//! eigensolver (Householder tridiagonalization followed by implicit QL).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != T::zero() {
                    axpy(a, other.row(k), out_row);
                }
            }
        }
        out
    }

    /// Quadratic form xᵀ A y.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        dot(x, &self.matvec(y))
    }

    /// Principal submatrix on the given index set.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut s = Self::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                s[(a, b)] = self[(i, j)];
            }
        }
        s
    }

    /// Largest absolute asymmetry |a_ij - a_ji|.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces the matrix by (A + Aᵀ)/2.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// D A D for a diagonal D given by its entries.
    pub fn diagonal_congruence(&self, d: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = d[i] * self[(i, j)] * d[j];
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// y += a x
#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2<T: Scalar>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

/// Upper-triangular Cholesky factor, A = UᵀU.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    u: DenseMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric positive definite matrix. Only the upper triangle is read.
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        assert!(a.is_square(), "Cholesky needs a square matrix");
        let n = a.rows();
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            u.row_mut(i)[i..].copy_from_slice(&a.row(i)[i..]);
        }
        for k in 0..n {
            let d = u[(k, k)];
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::DegenerateSpace { pivot: k });
            }
            let d = d.sqrt();
            u[(k, k)] = d;
            let inv = T::one() / d;
            for v in &mut u.row_mut(k)[k + 1..] {
                *v *= inv;
            }
            // Right-looking update of the trailing upper triangle.
            let (head, tail) = u.data.split_at_mut((k + 1) * n);
            let rk = &head[k * n..(k + 1) * n];
            for i in (k + 1)..n {
                let f = rk[i];
                if f == T::zero() {
                    continue;
                }
                let ri = &mut tail[(i - k - 1) * n..(i - k) * n];
                for j in i..n {
                    ri[j] -= f * rk[j];
                }
            }
        }
        Ok(Self { u })
    }

    pub fn upper(&self) -> &DenseMatrix<T> {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    /// Solves Uᵀ z = b in place.
    pub fn solve_upper_transpose_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.u[(k, i)] * b[k];
            }
            b[i] = s / self.u[(i, i)];
        }
    }

    /// Solves U x = y in place.
    pub fn solve_upper_in_place(&self, y: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let row = self.u.row(i);
            let s = y[i] - dot(&row[i + 1..], &y[i + 1..]);
            y[i] = s / row[i];
        }
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_upper_transpose_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// Returns U⁻ᵀ B, solving row blocks of Uᵀ X = B.
    pub fn left_solve_transpose(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let mut x = b.clone();
        let cols = x.cols();
        for i in 0..n {
            let (done, rest) = x.data.split_at_mut(i * cols);
            let xi = &mut rest[..cols];
            for k in 0..i {
                let f = self.u[(k, i)];
                if f != T::zero() {
                    let xk = &done[k * cols..(k + 1) * cols];
                    for (a, &b) in xi.iter_mut().zip(xk) {
                        *a -= f * b;
                    }
                }
            }
            let inv = T::one() / self.u[(i, i)];
            for a in xi.iter_mut() {
                *a *= inv;
            }
        }
        x
    }

    /// Returns U⁻ᵀ A U⁻¹ for symmetric A, symmetrized.
    pub fn reduce_congruence(&self, a: &DenseMatrix<T>) -> DenseMatrix<T> {
        let x = self.left_solve_transpose(a);
        let mut c = self.left_solve_transpose(&x.transpose());
        c.symmetrize();
        c
    }

    /// Smallest and largest squared pivot, a cheap conditioning indicator.
    pub fn pivot_range(&self) -> (T, T) {
        let d = self.u.diagonal();
        let lo = d.iter().fold(T::infinity(), |m, &v| m.min(v * v));
        let hi = d.iter().fold(T::zero(), |m, &v| m.max(v * v));
        (lo, hi)
    }
}

/// Diagonally pivoted Cholesky that stops once the largest remaining Schur
/// pivot falls below `rel_tol` times the largest diagonal entry. Returns the
/// factor of the kept principal block, in the order the columns were
/// chosen, and the kept indices in that order.
pub fn cholesky_with_drop<T: Scalar>(a: &DenseMatrix<T>, rel_tol: T) -> (Cholesky<T>, Vec<usize>) {
    let n = a.rows();
    let max_diag = a.diagonal().into_iter().fold(T::zero(), |m, v| m.max(v));
    let threshold = rel_tol * max_diag;
    let mut work = a.clone();
    let mut left: Vec<usize> = (0..n).collect();
    let mut kept: Vec<usize> = Vec::with_capacity(n);
    // Row r of U against original column indices.
    let mut urows: Vec<Vec<T>> = Vec::with_capacity(n);
    while !left.is_empty() {
        let (pos, &j) = left
            .iter()
            .enumerate()
            .max_by(|x, y| work[(*x.1, *x.1)].partial_cmp(&work[(*y.1, *y.1)]).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        let pivot = work[(j, j)];
        if !(pivot > threshold && pivot.is_finite()) {
            break;
        }
        left.swap_remove(pos);
        let d = pivot.sqrt();
        let mut row = vec![T::zero(); n];
        row[j] = d;
        for &c in &left {
            row[c] = work[(j, c)] / d;
        }
        for &c1 in &left {
            let r1 = row[c1];
            if r1 == T::zero() {
                continue;
            }
            for &c2 in &left {
                work[(c1, c2)] -= r1 * row[c2];
            }
        }
        urows.push(row);
        kept.push(j);
    }
    let m = kept.len();
    let mut u = DenseMatrix::zeros(m, m);
    for (r, row) in urows.iter().enumerate() {
        for (c, &kc) in kept.iter().enumerate().skip(r) {
            u[(r, c)] = row[kc];
        }
    }
    (Cholesky { u }, kept)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues in descending order.
    pub values: Vec<T>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: DenseMatrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    pub fn new(a: &DenseMatrix<T>) -> Result<Self> {
        assert!(a.is_square(), "eigensolver needs a square matrix");
        let n = a.rows();
        if n == 0 {
            return Ok(Self { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
        }
        let mut v = a.clone();
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        tred2(&mut v, &mut d, &mut e);
        // QL rotations act on rows of Vᵀ, which are contiguous.
        let mut vt = v.transpose();
        tql2(&mut vt, &mut d, &mut e)?;
        // Ascending from tql2, reverse to descending.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| d[i]).collect();
        let mut vectors = DenseMatrix::zeros(n, n);
        for (c, &src) in order.iter().enumerate() {
            for r in 0..n {
                vectors[(r, c)] = vt[(src, r)];
            }
        }
        Ok(Self { values, vectors })
    }
}

// Householder reduction to tridiagonal form (JAMA / EISPACK tred2).
fn tred2<T: Scalar>(v: &mut DenseMatrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
                v[(j, i)] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
            }
        }
        d[i] = h;
    }
    // Accumulate transformations.
    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = zero;
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = zero;
}

// Implicit QL iterations on the tridiagonal matrix (JAMA / EISPACK tql2).
fn tql2<T: Scalar>(vt: &mut DenseMatrix<T>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Conditioning("symmetric QL iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.as_mut_slice().split_at_mut((i + 1) * n);
                    let ri = &mut lo[i * n..];
                    let ri1 = &mut hi[..n];
                    for (a, b) in ri.iter_mut().zip(ri1.iter_mut()) {
                        let vk = *a;
                        let vk1 = *b;
                        *b = s * vk + c * vk1;
                        *a = c * vk - s * vk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DenseMatrix<f64> {
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = 1.0 / (1.0 + (i as f64 - j as f64).abs());
            }
            a[(i, i)] += n as f64;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd(7);
        let ch = Cholesky::factor(&a).unwrap();
        let u = ch.upper();
        let back = u.transpose().matmul(u);
        for i in 0..7 {
            for j in 0..7 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 2.0).collect();
        let x = ch.solve(&b);
        let r = a.matvec(&x);
        for i in 0..7 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_reports_pivot() {
        let a = DenseMatrix::from_row_major(3, 3, vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        match Cholesky::factor(&a) {
            Err(Error::DegenerateSpace { pivot }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eigen_of_diagonal_and_dense() {
        let a = DenseMatrix::from_diagonal(&[1.0, 5.0, 3.0]);
        let e = SymmetricEigen::new(&a).unwrap();
        assert_eq!(e.values, vec![5.0, 3.0, 1.0]);

        let a = spd(12);
        let e = SymmetricEigen::new(&a).unwrap();
        for c in 0..12 {
            let x = e.vectors.column(c);
            let ax = a.matvec(&x);
            for i in 0..12 {
                assert!((ax[i] - e.values[c] * x[i]).abs() < 1e-10);
            }
        }
        let vtv = e.vectors.transpose().matmul(&e.vectors);
        for i in 0..12 {
            for j in 0..12 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn congruence_matches_explicit_inverse() {
        let p = spd(5);
        let q = DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let ch = Cholesky::factor(&p).unwrap();
        let c = ch.reduce_congruence(&q);
        // Uᵀ C U should give back Q.
        let u = ch.upper();
        let back = u.transpose().matmul(&c).matmul(u);
        for i in 0..5 {
            for j in 0..5 {
                assert!((back[(i, j)] - q[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drop_cholesky_skips_duplicate_column() {
        let mut a = spd(4);
        // Make column/row 2 a copy of column/row 1.
        for k in 0..4 {
            let v = a[(1, k)];
            a[(2, k)] = v;
        }
        for k in 0..4 {
            let v = a[(k, 1)];
            a[(k, 2)] = v;
        }
        let (ch, kept) = cholesky_with_drop(&a, 1e-10);
        assert_eq!(kept.len(), 3);
        assert!(!(kept.contains(&1) && kept.contains(&2)));
        let sub = a.submatrix(&kept);
        let u = ch.upper();
        let back = u.transpose().matmul(u);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - sub[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
