//! Spectral matrices of a local space, the generalized eigenproblem
//! `Q x = λ P x` and selection of the n-width basis.

use crate::error::{Error, Result};
use crate::fem::{NodalField, Operator};
use crate::geometry::RegionIndex;
use crate::linalg::{dot, Cholesky, DenseMatrix, SymmetricEigen};
use crate::local::{spectral_entry_count, LocalSpace};
use crate::pou::PatchKind;
use crate::scalar::Scalar;
use rayon::prelude::*;

/// How the energy products are integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PqRoute {
    /// Sum over every element of ω and ω*.
    Full,
    /// Uses A-harmonicity: `B(wⱼ, wₖ) = B(wⱼ, ŵₖ)` where `ŵₖ` keeps only
    /// the boundary nodal values, so only elements touching the boundary
    /// contribute.
    #[default]
    BoundaryLayer,
}

/// Normalized `Q` (energy on ω) and `P` (energy on ω*) over all hat extensions.
#[derive(Clone, Debug)]
pub struct SpectralMatrices<T> {
    pub p: DenseMatrix<T>,
    pub q: DenseMatrix<T>,
    /// Raw diagonal `Pʲʲ` used for the normalization `D = diag(1/√Pʲʲ)`.
    pub p_diag: Vec<T>,
    /// Upper-triangle entries filled per matrix.
    pub entries: usize,
    /// Whether the constant lies in the span (last hat is then dropped).
    pub constants_in_span: bool,
}

impl<T: Scalar> SpectralMatrices<T> {
    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    /// Undoes the normalization.
    pub fn raw_p(&self) -> DenseMatrix<T> {
        let s: Vec<T> = self.p_diag.iter().map(|d| d.sqrt()).collect();
        self.p.diagonal_congruence(&s)
    }

    pub fn raw_q(&self) -> DenseMatrix<T> {
        let s: Vec<T> = self.p_diag.iter().map(|d| d.sqrt()).collect();
        self.q.diagonal_congruence(&s)
    }
}

// Gram-type matrix G_jk = Σ_{e ∈ elems} w_jᵀ K_e v_k, upper triangle only.
fn products<T: Scalar>(
    op: &Operator<T>,
    fields: &[NodalField<T>],
    elems: &[usize],
    keep: impl Fn(usize) -> bool + Sync,
) -> DenseMatrix<T> {
    let m = fields.len();
    if m == 0 {
        return DenseMatrix::zeros(0, 0);
    }
    let mesh = op.mesh();
    let region = fields[0].region().clone();
    // Compact numbering of nodes touched by the element set.
    let mut compact = vec![usize::MAX; region.n_nodes()];
    let mut nodes = Vec::new();
    for &e in elems {
        for &g in mesh.element(e) {
            let l = region.local_index(g).expect("element outside the field region");
            if compact[l] == usize::MAX {
                compact[l] = nodes.len();
                nodes.push(l);
            }
        }
    }
    let nc = nodes.len();
    let npe = mesh.nodes_per_element();
    let local: Vec<Vec<usize>> = elems
        .iter()
        .map(|&e| mesh.element(e).iter().map(|&g| region.local_index(g).unwrap()).collect())
        .collect();
    let w: Vec<Vec<T>> = fields.iter().map(|f| nodes.iter().map(|&l| f.values()[l]).collect()).collect();
    let y: Vec<Vec<T>> = fields
        .par_iter()
        .map(|f| {
            let vals = f.values();
            let mut out = vec![T::zero(); nc];
            let mut ve = [T::zero(); 9];
            let mut ke = [T::zero(); 9];
            for (&e, loc) in elems.iter().zip(&local) {
                for (k, &l) in loc.iter().enumerate() {
                    ve[k] = if keep(l) { vals[l] } else { T::zero() };
                    ke[k] = T::zero();
                }
                op.apply_element(e, &ve[..npe], &mut ke[..npe]);
                for (k, &l) in loc.iter().enumerate() {
                    out[compact[l]] += ke[k];
                }
            }
            out
        })
        .collect();
    let rows: Vec<Vec<T>> = (0..m)
        .into_par_iter()
        .map(|j| (j..m).map(|k| dot(&w[j], &y[k])).collect())
        .collect();
    let mut g = DenseMatrix::zeros(m, m);
    for (j, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            g[(j, j + off)] = v;
            g[(j + off, j)] = v;
        }
    }
    g
}

/// Fills the upper triangles of `P` and `Q` and normalizes both by the
/// congruence `D · D` with `D = diag(1/√Pʲʲ)`.
pub fn assemble_pq<T: Scalar>(
    op: &Operator<T>,
    space: &LocalSpace<T>,
    omega: &RegionIndex<T>,
    omega_star: &RegionIndex<T>,
    route: PqRoute,
) -> Result<SpectralMatrices<T>> {
    if let Some(f) = space.fields.first() {
        if f.region().tag() != omega_star.tag() {
            return Err(Error::Domain("local space does not live on ω*".into()));
        }
        if !omega.is_subset_of(omega_star) {
            return Err(Error::Domain("ω is not contained in ω*".into()));
        }
    }
    let mesh = op.mesh();
    let region = omega_star;
    let (p, q) = match route {
        PqRoute::Full => (
            products(op, &space.fields, omega_star.elements(), |_| true),
            products(op, &space.fields, omega.elements(), |_| true),
        ),
        PqRoute::BoundaryLayer => {
            let layer = |r: &RegionIndex<T>| -> Vec<usize> {
                r.elements()
                    .iter()
                    .copied()
                    .filter(|&e| mesh.element(e).iter().any(|&g| r.is_boundary_node(g)))
                    .collect()
            };
            let star_bd: Vec<bool> = region.nodes().iter().map(|&g| omega_star.is_boundary_node(g)).collect();
            let omega_bd: Vec<bool> = region.nodes().iter().map(|&g| omega.is_boundary_node(g)).collect();
            (
                products(op, &space.fields, &layer(omega_star), |l| star_bd[l]),
                products(op, &space.fields, &layer(omega), |l| omega_bd[l]),
            )
        }
    };
    let p_diag = p.diagonal();
    if let Some(j) = p_diag.iter().position(|&d| !(d > T::zero())) {
        return Err(Error::DegenerateSpace { pivot: j });
    }
    let d: Vec<T> = p_diag.iter().map(|&v| T::one() / v.sqrt()).collect();
    let mut pn = p.diagonal_congruence(&d);
    pn.symmetrize();
    for j in 0..pn.rows() {
        pn[(j, j)] = T::one();
    }
    let mut qn = q.diagonal_congruence(&d);
    qn.symmetrize();
    Ok(SpectralMatrices {
        entries: spectral_entry_count(p.rows()),
        p: pn,
        q: qn,
        p_diag,
        constants_in_span: space.constants_in_span,
    })
}

/// Eigenpairs of `Q x = λ P x` over the hat-extension basis.
#[derive(Clone, Debug)]
pub struct SpectralBasisSet<T> {
    /// Retained eigenvalues, descending, all at least the cutoff.
    pub eigenvalues: Vec<T>,
    /// Every computed eigenvalue, descending.
    pub all_eigenvalues: Vec<T>,
    /// Expansion of each eigenfunction in the raw extensions `wₖ`.
    pub coefficients: Vec<Vec<T>>,
    /// Number of eigenfunctions in use.
    pub selected: usize,
    /// Whether the constant function is appended.
    pub constant: bool,
}

impl<T: Scalar> SpectralBasisSet<T> {
    pub fn retained(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Local dimension including the constant.
    pub fn dimension(&self) -> usize {
        self.selected + self.constant as usize
    }

    /// `ξ_q = Σₖ x_qk wₖ` on ω* for the selected eigenvectors, followed by
    /// the constant when it is appended.
    pub fn fields(&self, space: &LocalSpace<T>) -> Result<Vec<NodalField<T>>> {
        let first = space.fields.first().ok_or_else(|| Error::Configuration("empty local space".into()))?;
        let region = first.region().clone();
        let order = first.order();
        let n = region.n_nodes();
        let mut out: Vec<NodalField<T>> = self.coefficients[..self.selected]
            .par_iter()
            .map(|x| {
                let mut v = vec![T::zero(); n];
                for (&c, w) in x.iter().zip(&space.fields) {
                    if c != T::zero() {
                        for (a, &b) in v.iter_mut().zip(w.values()) {
                            *a += c * b;
                        }
                    }
                }
                NodalField::new(region.clone(), order, v)
            })
            .collect::<Result<_>>()?;
        if self.constant {
            out.push(NodalField::new(region, order, vec![T::one(); n])?);
        }
        Ok(out)
    }
}

/// Default cutoff below which eigenvalues are discarded.
pub const EIGEN_CUTOFF: f64 = 1e-12;

/// Cholesky reduction `C = U⁻ᵀ Q U⁻¹`, `C y = λ y`, `x = D U⁻¹ y`.
/// When the constants lie in the span the last hat is left out, since the
/// sum of all extensions is 1 and `P` is singular on it.
pub fn generalized_eig<T: Scalar>(mats: &SpectralMatrices<T>, cutoff: T) -> Result<SpectralBasisSet<T>> {
    let m = mats.dim();
    let used = if mats.constants_in_span { m.saturating_sub(1) } else { m };
    let idx: Vec<usize> = (0..used).collect();
    let p = mats.p.submatrix(&idx);
    let q = mats.q.submatrix(&idx);
    let chol = Cholesky::factor(&p)?;
    let c = chol.reduce_congruence(&q);
    let eig = SymmetricEigen::new(&c)?;
    let mut eigenvalues = Vec::new();
    let mut coefficients = Vec::new();
    for (k, &lam) in eig.values.iter().enumerate() {
        if !(lam >= cutoff) {
            continue;
        }
        let mut x = eig.vectors.column(k);
        chol.solve_upper_in_place(&mut x);
        let mut full = vec![T::zero(); m];
        for (j, &v) in x.iter().enumerate() {
            full[j] = v / mats.p_diag[j].sqrt();
        }
        eigenvalues.push(lam);
        coefficients.push(full);
    }
    Ok(SpectralBasisSet {
        selected: eigenvalues.len(),
        eigenvalues,
        all_eigenvalues: eig.values,
        coefficients,
        constant: false,
    })
}

/// Keeps the first `m` eigenfunctions and appends the constant for interior
/// and Neumann patches.
pub fn select_basis<T: Scalar>(set: &SpectralBasisSet<T>, m: usize, kind: PatchKind) -> Result<SpectralBasisSet<T>> {
    if m > set.retained() {
        return Err(Error::Selection { requested: m, available: set.retained() });
    }
    let mut out = set.clone();
    out.selected = m;
    out.constant = kind.needs_constant();
    Ok(out)
}

/// `(n, √λₙ₊₁)`: the n-width of the retained spectrum.
pub fn nwidth_curve<T: Scalar>(set: &SpectralBasisSet<T>) -> Vec<(usize, T)> {
    set.eigenvalues.iter().enumerate().map(|(n, &l)| (n, l.sqrt())).collect()
}

/// Per-step decay factor `r` in `λ ≈ rⁿ` with `n = ⌈j/2⌉` (eigenvalues of
/// rotationally symmetric patches come in pairs), from a least-squares fit
/// of `ln λ` against `n` through the origin over `n ≤ n_max`.
pub fn paired_decay_factor<T: Scalar>(eigenvalues: &[T], n_max: usize) -> Option<T> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (j, &l) in eigenvalues.iter().enumerate() {
        let n = (j + 2) / 2;
        if n > n_max {
            break;
        }
        let l = l.to_f64_lossy();
        if l <= 0.0 {
            break;
        }
        sxy += n as f64 * l.ln();
        sxx += (n * n) as f64;
    }
    (sxx > 0.0).then(|| T::lit((sxy / sxx).exp()))
}
