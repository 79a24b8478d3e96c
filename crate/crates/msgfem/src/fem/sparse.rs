use super::element::Operator;
use crate::geometry::RegionIndex;
use crate::scalar::Scalar;
use rayon::prelude::*;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn from_parts(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<T>) -> Self {
        assert_eq!(row_ptr.len(), nrows + 1);
        assert_eq!(col_idx.len(), values.len());
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        y.par_iter_mut().with_min_len(4096).enumerate().for_each(|(i, yi)| {
            let (c, v) = self.row(i);
            let mut s = T::zero();
            for (&j, &a) in c.iter().zip(v) {
                s += a * x[j];
            }
            *yi = s;
        });
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).all(|(&j, &a)| self.get(j, i) == a)
            })
    }

    /// Submatrix with the given rows and columns, each mapped through a
    /// position table (`usize::MAX` = dropped).
    pub fn extract(&self, row_pos: &[usize], nrows: usize, col_pos: &[usize], ncols: usize) -> Self {
        let mut rows: Vec<usize> = vec![usize::MAX; nrows];
        for (i, &p) in row_pos.iter().enumerate() {
            if p != usize::MAX {
                rows[p] = i;
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &i in &rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                let p = col_pos[j];
                if p != usize::MAX {
                    col_idx.push(p);
                    values.push(a);
                }
            }
            row_ptr.push(col_idx.len());
        }
        // Position tables are monotone, so columns stay sorted.
        Self { nrows, ncols, row_ptr, col_idx, values }
    }
}

/// Assembles the stiffness matrix of `region` in its local node numbering.
///
/// Rows are built independently: each gathers the element contributions of
/// its node in ascending element order, so entry (i, j) and (j, i) see the
/// same additions in the same order and the result is exactly symmetric.
pub fn assemble<T: Scalar>(op: &Operator<T>, region: &RegionIndex<T>) -> CsrMatrix<T> {
    let mesh = op.mesh();
    let n = region.n_nodes();
    let npe = mesh.nodes_per_element();
    // node → (element, local position) adjacency.
    let mut count = vec![0usize; n + 1];
    for &e in region.elements() {
        for &g in mesh.element(e) {
            count[region.local_index(g).unwrap() + 1] += 1;
        }
    }
    for i in 0..n {
        count[i + 1] += count[i];
    }
    let mut fill = count.clone();
    let mut adj = vec![(0usize, 0usize); count[n]];
    for &e in region.elements() {
        for (a, &g) in mesh.element(e).iter().enumerate() {
            let l = region.local_index(g).unwrap();
            adj[fill[l]] = (e, a);
            fill[l] += 1;
        }
    }
    let rows: Vec<(Vec<usize>, Vec<T>)> = (0..n)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| {
            let mut entries: Vec<(usize, T)> = Vec::with_capacity((count[i + 1] - count[i]) * npe);
            for &(e, a) in &adj[count[i]..count[i + 1]] {
                let k = op.unit_matrix(e);
                let c = op.coefficient(e);
                for (b, &g) in mesh.element(e).iter().enumerate() {
                    entries.push((region.local_index(g).unwrap(), c * k[a * npe + b]));
                }
            }
            entries.sort_by_key(|&(j, _)| j);
            let mut cols = Vec::with_capacity(entries.len());
            let mut vals: Vec<T> = Vec::with_capacity(entries.len());
            for (j, v) in entries {
                if cols.last() == Some(&j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            (cols, vals)
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let nnz: usize = rows.iter().map(|r| r.0.len()).sum();
    let mut col_idx = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    for (c, v) in rows {
        col_idx.extend(c);
        values.extend(v);
        row_ptr.push(col_idx.len());
    }
    CsrMatrix { nrows: n, ncols: n, row_ptr, col_idx, values }
}
