use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    /// Envelope (skyline) Cholesky factorization.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings<T> {
    pub method: SolverMethod,
    /// Relative residual tolerance of the constrained system.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            tolerance: T::lit(1e-12).max(T::lit(100.0) * T::epsilon()),
            max_iterations: 20_000,
        }
    }
}

/// Lower-triangular envelope factor `A = L Lᵀ` with row `i` stored from its
/// first structural nonzero to the diagonal.
#[derive(Clone, Debug)]
pub struct SkylineCholesky<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> SkylineCholesky<T> {
    /// Bytes the factor of `a` would occupy.
    pub fn storage_bytes(a: &CsrMatrix<T>) -> usize {
        let mut total = 0usize;
        for i in 0..a.nrows() {
            let (c, _) = a.row(i);
            let f = c.first().copied().unwrap_or(i).min(i);
            total += i - f + 1;
        }
        total * std::mem::size_of::<T>()
    }

    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            let (c, _) = a.row(i);
            let f = c.first().copied().unwrap_or(i).min(i);
            first.push(f);
            start.push(start[i] + i - f + 1);
        }
        let mut data = vec![T::zero(); start[n]];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    data[start[i] + j - first[i]] = x;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = data.split_at_mut(start[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let row_j = &done[start[j]..start[j + 1]];
                let s = dot(&row_i[lo - fi..j - fi], &row_j[lo - fj..j - fj]);
                row_i[j - fi] = (row_i[j - fi] - s) / row_j[j - fj];
            }
            let d = row_i[i - fi] - dot(&row_i[..i - fi], &row_i[..i - fi]);
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::Solvability(format!("matrix not positive definite at pivot {i}")));
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self { first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = dot(&row[..i - fi], &b[fi..i]);
            b[i] = (b[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let xi = b[i] / row[i - fi];
            b[i] = xi;
            for (bk, &l) in b[fi..i].iter_mut().zip(&row[..i - fi]) {
                *bk -= l * xi;
            }
        }
    }
}

/// Jacobi-preconditioned CG on an SPD matrix, starting from zero.
pub fn pcg<T: Scalar>(a: &CsrMatrix<T>, b: &[T], tol: T, max_iter: usize) -> Result<Vec<T>> {
    let n = a.nrows();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(x);
    }
    let inv_diag: Vec<T> = a.diagonal().iter().map(|&d| T::one() / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&r, &d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 0..max_iter {
        a.matvec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            log::trace!("pcg converged in {} iterations", it + 1);
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / bnorm;
    Err(Error::Iteration { iterations: max_iter, residual: res.to_f64_lossy() })
}

#[derive(Debug)]
enum Backend<T> {
    Direct(SkylineCholesky<T>),
    Iterative,
}

/// SPD solver for a system with a fixed set of Dirichlet unknowns,
/// eliminated once so the free block can be factored and reused.
#[derive(Debug)]
pub struct ConstrainedSolver<T> {
    n: usize,
    free: Vec<usize>,
    dirichlet: Vec<usize>,
    kff: CsrMatrix<T>,
    kfd: CsrMatrix<T>,
    backend: Backend<T>,
    settings: SolverSettings<T>,
}

impl<T: Scalar> ConstrainedSolver<T> {
    /// `fixed[i]` marks unknown `i` as Dirichlet.
    pub fn new(k: &CsrMatrix<T>, fixed: &[bool], settings: SolverSettings<T>) -> Result<Self> {
        let n = k.nrows();
        assert_eq!(fixed.len(), n);
        let mut free_pos = vec![usize::MAX; n];
        let mut dir_pos = vec![usize::MAX; n];
        let mut free = Vec::new();
        let mut dirichlet = Vec::new();
        for i in 0..n {
            if fixed[i] {
                dir_pos[i] = dirichlet.len();
                dirichlet.push(i);
            } else {
                free_pos[i] = free.len();
                free.push(i);
            }
        }
        let kff = k.extract(&free_pos, free.len(), &free_pos, free.len());
        let kfd = k.extract(&free_pos, free.len(), &dir_pos, dirichlet.len());
        let backend = match settings.method {
            SolverMethod::Direct => Backend::Direct(SkylineCholesky::factor(&kff)?),
            SolverMethod::ConjugateGradient => {
                if kff.diagonal().iter().any(|&d| !(d > T::zero())) {
                    return Err(Error::Solvability("free block has a non-positive diagonal".into()));
                }
                Backend::Iterative
            }
        };
        Ok(Self { n, free, dirichlet, kff, kfd, backend, settings })
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn dirichlet(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Solves `K u = load` on free unknowns with `u = values` on Dirichlet
    /// unknowns. `values` is indexed like the full system; only its Dirichlet
    /// entries are read.
    pub fn solve(&self, load: &[T], values: &[T]) -> Result<Vec<T>> {
        assert_eq!(load.len(), self.n);
        assert_eq!(values.len(), self.n);
        let ud: Vec<T> = self.dirichlet.iter().map(|&i| values[i]).collect();
        let kud = self.kfd.matvec(&ud);
        let b: Vec<T> = self.free.iter().zip(&kud).map(|(&i, &k)| load[i] - k).collect();
        let xf = self.solve_free(&b)?;
        let mut u = vec![T::zero(); self.n];
        for (&i, &v) in self.dirichlet.iter().zip(&ud) {
            u[i] = v;
        }
        for (&i, &v) in self.free.iter().zip(&xf) {
            u[i] = v;
        }
        Ok(u)
    }

    /// Solves the free block `K_ff x = b` to the relative residual tolerance.
    pub fn solve_free(&self, b: &[T]) -> Result<Vec<T>> {
        let bnorm = dot(b, b).sqrt();
        if bnorm == T::zero() {
            return Ok(vec![T::zero(); b.len()]);
        }
        let tol = self.settings.tolerance;
        match &self.backend {
            Backend::Iterative => pcg(&self.kff, b, tol, self.settings.max_iterations),
            Backend::Direct(f) => {
                let mut x = b.to_vec();
                f.solve_in_place(&mut x);
                let mut res = T::infinity();
                for _ in 0..4 {
                    let kx = self.kff.matvec(&x);
                    let mut r: Vec<T> = b.iter().zip(&kx).map(|(&b, &k)| b - k).collect();
                    let prev = res;
                    res = dot(&r, &r).sqrt() / bnorm;
                    if res <= tol {
                        return Ok(x);
                    }
                    // Refinement has hit the rounding floor of a badly shaped mesh.
                    if res > T::lit(0.5) * prev && res <= T::lit(1e3) * tol {
                        log::debug!("direct solve stagnated at relative residual {res:?}");
                        return Ok(x);
                    }
                    f.solve_in_place(&mut r);
                    for (xi, ri) in x.iter_mut().zip(&r) {
                        *xi += *ri;
                    }
                }
                Err(Error::Iteration { iterations: 4, residual: res.to_f64_lossy() })
            }
        }
    }

    /// Relative residual of the constrained system for a full solution vector.
    pub fn residual(&self, load: &[T], u: &[T]) -> T {
        let ud: Vec<T> = self.dirichlet.iter().map(|&i| u[i]).collect();
        let uf: Vec<T> = self.free.iter().map(|&i| u[i]).collect();
        let kud = self.kfd.matvec(&ud);
        let kuf = self.kff.matvec(&uf);
        let mut rn = T::zero();
        let mut bn = T::zero();
        for (k, &i) in self.free.iter().enumerate() {
            let b = load[i] - kud[k];
            let r = b - kuf[k];
            rn += r * r;
            bn += b * b;
        }
        if bn == T::zero() {
            rn.sqrt()
        } else {
            (rn / bn).sqrt()
        }
    }
}
