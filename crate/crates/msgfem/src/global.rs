//! Global Galerkin system over the pasted trial functions `φᵢ ξᵢ^q`.

use crate::error::{Error, Result};
use crate::fem::{
    apply_stiffness, assemble_load, energy, BoundaryConditions, NodalField, Operator, ScalarFn, SolverSettings,
};
use crate::geometry::RegionIndex;
use crate::linalg::{cholesky_with_drop, dot, Cholesky, DenseMatrix};
use crate::local::{LocalSpace, ParticularSolution, PatchSolver};
use crate::pou::{Cover, PartitionOfUnity, Patch};
use crate::scalar::Scalar;
use crate::spectral::{assemble_pq, generalized_eig, select_basis, PqRoute, SpectralBasisSet, SpectralMatrices};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisMode {
    /// Leading eigenfunctions of each patch pencil (plus constants).
    Spectral,
    /// Raw hat extensions restricted to ω.
    Oversampled,
}

/// One pasted trial function `φᵢ · ξ`, stored on the nodes of ωᵢ.
#[derive(Clone, Debug)]
pub struct TrialFunction<T> {
    pub patch: usize,
    pub index: usize,
    pub field: NodalField<T>,
}

#[derive(Clone, Debug)]
pub struct GlobalBasis<T> {
    pub mode: BasisMode,
    pub functions: Vec<TrialFunction<T>>,
    /// Trial-function count per patch.
    pub per_patch: Vec<usize>,
}

impl<T: Scalar> GlobalBasis<T> {
    pub fn dimension(&self) -> usize {
        self.functions.len()
    }
}

/// Forms `φᵢ ξ` at the nodes of ωᵢ for every local function `ξ` (given on ωᵢ*).
pub fn build_global_basis<T: Scalar>(
    cover: &Cover<T>,
    pu: &PartitionOfUnity<T>,
    locals: &[Vec<NodalField<T>>],
    mode: BasisMode,
) -> Result<GlobalBasis<T>> {
    if locals.len() != cover.patches.len() {
        return Err(Error::Configuration(format!(
            "{} local bases for {} patches",
            locals.len(),
            cover.patches.len()
        )));
    }
    let mut functions = Vec::new();
    let mut per_patch = Vec::new();
    for (patch, fields) in cover.patches.iter().zip(locals) {
        if fields.is_empty() {
            return Err(Error::Configuration(format!("patch {} has an empty local basis", patch.id)));
        }
        let phi = pu.functions[patch.id].field.values();
        let made: Vec<TrialFunction<T>> = fields
            .par_iter()
            .enumerate()
            .map(|(q, xi)| {
                let r = xi.restrict_to(&patch.omega)?;
                let values = r.values().iter().zip(phi).map(|(&a, &b)| a * b).collect();
                Ok(TrialFunction { patch: patch.id, index: q, field: NodalField::new(patch.omega.clone(), r.order(), values)? })
            })
            .collect::<Result<_>>()?;
        per_patch.push(made.len());
        functions.extend(made);
    }
    Ok(GlobalBasis { mode, functions, per_patch })
}

/// `u^F = Σᵢ φᵢ χᵢ` on the whole mesh.
pub fn paste_particular<T: Scalar>(
    cover: &Cover<T>,
    pu: &PartitionOfUnity<T>,
    chis: &[ParticularSolution<T>],
    whole: &Arc<RegionIndex<T>>,
) -> Result<NodalField<T>> {
    let mut out = vec![T::zero(); whole.n_nodes()];
    let mut order = None;
    for (patch, chi) in cover.patches.iter().zip(chis) {
        let phi = &pu.functions[patch.id];
        let r = chi.chi.restrict_to(&patch.omega)?;
        order = Some(r.order());
        for (&g, &v) in patch.omega.nodes().iter().zip(r.values()) {
            out[whole.local_index(g).unwrap()] += phi.at(g) * v;
        }
    }
    let order = order.ok_or_else(|| Error::Configuration("no patches".into()))?;
    NodalField::new(whole.clone(), order, out)
}

/// `G x = r` with `G_ab = B(v_a, v_b)` and `r_a = F(v_a) − B(u^F, v_a)`.
#[derive(Clone, Debug)]
pub struct GlobalSystem<T> {
    pub g: DenseMatrix<T>,
    pub r: Vec<T>,
    /// `K v_a` on the nodes of the trial function's patch.
    pub kv: Vec<Vec<T>>,
}

pub fn assemble_global<T: Scalar>(
    op: &Operator<T>,
    basis: &GlobalBasis<T>,
    u_f: &NodalField<T>,
    source: Option<&ScalarFn<T>>,
    bc: &BoundaryConditions<T>,
) -> Result<GlobalSystem<T>> {
    let whole = u_f.region().clone();
    if whole.n_nodes() != op.mesh().n_nodes() {
        return Err(Error::Domain("u^F must cover the whole mesh".into()));
    }
    let load = assemble_load(op, &whole, source, bc);
    let fns = &basis.functions;
    let kv: Vec<Vec<T>> = fns
        .par_iter()
        .map(|v| apply_stiffness(op, &v.field, v.field.region()))
        .collect::<Result<_>>()?;
    // Map every trial function onto global node ids once.
    let n = fns.len();
    let r: Vec<T> = (0..n)
        .into_par_iter()
        .map(|a| {
            let reg = fns[a].field.region();
            let mut f = T::zero();
            let mut b = T::zero();
            for (l, &g) in reg.nodes().iter().enumerate() {
                f += load[g] * fns[a].field.values()[l];
                b += kv[a][l] * u_f.values()[g];
            }
            f - b
        })
        .collect();
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|a| {
            let ra = fns[a].field.region();
            (a..n)
                .map(|b| {
                    let fb = &fns[b].field;
                    if fb.region().tag() == ra.tag() {
                        dot(&kv[a], fb.values())
                    } else {
                        ra.nodes().iter().zip(&kv[a]).fold(T::zero(), |s, (&g, &k)| s + k * fb.at(g))
                    }
                })
                .collect()
        })
        .collect();
    let mut g = DenseMatrix::zeros(n, n);
    for (a, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            g[(a, a + off)] = v;
            g[(a + off, a)] = v;
        }
    }
    Ok(GlobalSystem { g, r, kv })
}

#[derive(Clone, Debug)]
pub struct GlobalSolution<T> {
    /// Coefficients per trial function (zero for dropped ones).
    pub x: Vec<T>,
    /// Trial functions kept by the pivot-dropping Cholesky.
    pub kept: Vec<usize>,
    pub u_g: NodalField<T>,
    pub u_f: NodalField<T>,
    pub u0: NodalField<T>,
    /// Relative residual `‖G x − r‖ / ‖r‖` on the kept block.
    pub residual: T,
    /// `(max pivot / min pivot)²` of the Jacobi-scaled Cholesky factor.
    pub condition_estimate: T,
}

/// Solves `G x = r` after Jacobi scaling by a dense Cholesky factorization.
/// With `drop_tol`, trial functions whose scaled pivot falls below it are
/// left out instead of failing.
pub fn solve_global<T: Scalar>(
    system: &GlobalSystem<T>,
    basis: &GlobalBasis<T>,
    u_f: &NodalField<T>,
    drop_tol: Option<T>,
) -> Result<GlobalSolution<T>> {
    let n = system.g.rows();
    let diag = system.g.diagonal();
    if let Some(a) = diag.iter().position(|&d| !(d > T::zero())) {
        return Err(Error::Conditioning(format!("trial function {a} has zero energy")));
    }
    let s: Vec<T> = diag.iter().map(|&d| T::one() / d.sqrt()).collect();
    let mut gs = system.g.diagonal_congruence(&s);
    gs.symmetrize();
    let (chol, kept) = match drop_tol {
        Some(tol) => {
            let (c, kept) = cholesky_with_drop(&gs, tol);
            if kept.len() < n {
                log::info!("dropped {} of {} trial functions", n - kept.len(), n);
            }
            (c, kept)
        }
        None => {
            let c = Cholesky::factor(&gs)
                .map_err(|e| Error::Conditioning(format!("global matrix is not positive definite: {e}")))?;
            (c, (0..n).collect())
        }
    };
    let gk = gs.submatrix(&kept);
    let rk: Vec<T> = kept.iter().map(|&a| system.r[a] * s[a]).collect();
    let mut y = chol.solve(&rk);
    let rnorm = dot(&rk, &rk).sqrt();
    let mut residual = T::zero();
    for _ in 0..3 {
        let gy = gk.matvec(&y);
        let res: Vec<T> = rk.iter().zip(&gy).map(|(&a, &b)| a - b).collect();
        residual = if rnorm > T::zero() { dot(&res, &res).sqrt() / rnorm } else { dot(&res, &res).sqrt() };
        if residual <= T::lit(1e-14) {
            break;
        }
        let dy = chol.solve(&res);
        for (a, b) in y.iter_mut().zip(&dy) {
            *a += *b;
        }
    }
    let mut x = vec![T::zero(); n];
    for (&a, &v) in kept.iter().zip(&y) {
        x[a] = v * s[a];
    }
    let (lo, hi) = chol.pivot_range();
    let condition_estimate = if lo > T::zero() { (hi / lo) * (hi / lo) } else { T::infinity() };
    let whole = u_f.region().clone();
    let mut ug = vec![T::zero(); whole.n_nodes()];
    for (v, &c) in basis.functions.iter().zip(&x) {
        if c == T::zero() {
            continue;
        }
        for (&g, &val) in v.field.region().nodes().iter().zip(v.field.values()) {
            ug[g] += c * val;
        }
    }
    let u_g = NodalField::new(whole.clone(), u_f.order(), ug)?;
    let mut u0 = u_g.clone();
    u0.axpy(T::one(), u_f)?;
    Ok(GlobalSolution { x, kept, u_g, u_f: u_f.clone(), u0, residual, condition_estimate })
}

/// Squared relative energy error `‖u₀ − u‖² / ‖u‖²`.
pub fn relative_error<T: Scalar>(op: &Operator<T>, u0: &NodalField<T>, reference: &NodalField<T>) -> Result<T> {
    let region = reference.region();
    let e_ref = energy(op, reference, region)?;
    if e_ref == T::zero() {
        return Err(Error::Division("reference energy is zero".into()));
    }
    let diff = u0.sub(reference)?;
    Ok(energy(op, &diff, region)? / e_ref)
}

/// `|B(u − u₀, v)| / (‖u − u₀‖ ‖v‖)` for every trial function.
pub fn galerkin_residuals<T: Scalar>(
    op: &Operator<T>,
    basis: &GlobalBasis<T>,
    system: &GlobalSystem<T>,
    u0: &NodalField<T>,
    reference: &NodalField<T>,
) -> Result<Vec<T>> {
    let diff = reference.sub(u0)?;
    let e = energy(op, &diff, reference.region())?.sqrt();
    Ok(basis
        .functions
        .par_iter()
        .zip(&system.kv)
        .enumerate()
        .map(|(a, (v, kv))| {
            let b = v.field.region().nodes().iter().zip(kv).fold(T::zero(), |s, (&g, &k)| s + k * diff.at(g));
            let nv = system.g[(a, a)].sqrt();
            let den = e * nv;
            if den > T::zero() {
                b.abs() / den
            } else {
                b.abs()
            }
        })
        .collect())
}

/// Everything computed once per patch for a given hat width.
#[derive(Clone, Debug)]
pub struct PatchData<T> {
    pub patch: Patch<T>,
    pub space: LocalSpace<T>,
    pub chi: ParticularSolution<T>,
    pub matrices: SpectralMatrices<T>,
    pub spectrum: SpectralBasisSet<T>,
}

/// Hat extensions (or a cached copy), particular solution and spectrum of one patch.
pub fn prepare_patch<T: Scalar>(
    op: &Operator<T>,
    patch: &Patch<T>,
    bc: &BoundaryConditions<T>,
    source: Option<&ScalarFn<T>>,
    width: usize,
    settings: SolverSettings<T>,
    cached: Option<LocalSpace<T>>,
    cutoff: T,
) -> Result<PatchData<T>> {
    let solver = PatchSolver::new(op, patch, bc, settings)?;
    let space = match cached {
        Some(s) if s.width == width && s.patch == patch.id => s,
        _ => solver.local_space(width)?,
    };
    let chi = solver.particular_solution(source)?;
    drop(solver);
    let matrices = assemble_pq(op, &space, &patch.omega, &patch.omega_star, PqRoute::BoundaryLayer)?;
    let spectrum = generalized_eig(&matrices, cutoff)?;
    Ok(PatchData { patch: patch.clone(), space, chi, matrices, spectrum })
}

/// Local functions per patch for the requested mode. In spectral mode
/// `dims[i]` eigenfunctions are kept on patch `i`.
pub fn local_functions<T: Scalar>(
    patches: &[PatchData<T>],
    mode: BasisMode,
    dims: &[usize],
) -> Result<Vec<Vec<NodalField<T>>>> {
    match mode {
        BasisMode::Oversampled => Ok(patches.iter().map(|p| p.space.fields.clone()).collect()),
        BasisMode::Spectral => {
            if dims.len() != patches.len() {
                return Err(Error::Configuration(format!("{} dimensions for {} patches", dims.len(), patches.len())));
            }
            patches
                .iter()
                .zip(dims)
                .map(|(p, &m)| select_basis(&p.spectrum, m, p.patch.kind)?.fields(&p.space))
                .collect()
        }
    }
}

/// Assembles and solves the global problem from prepared patches.
pub fn solve_from_patches<T: Scalar>(
    op: &Operator<T>,
    cover: &Cover<T>,
    pu: &PartitionOfUnity<T>,
    patches: &[PatchData<T>],
    bc: &BoundaryConditions<T>,
    source: Option<&ScalarFn<T>>,
    mode: BasisMode,
    dims: &[usize],
) -> Result<(GlobalBasis<T>, GlobalSystem<T>, GlobalSolution<T>)> {
    let whole = Arc::new(RegionIndex::whole(op.mesh()));
    let chis: Vec<ParticularSolution<T>> = patches.iter().map(|p| p.chi.clone()).collect();
    let u_f = paste_particular(cover, pu, &chis, &whole)?;
    let locals = local_functions(patches, mode, dims)?;
    let basis = build_global_basis(cover, pu, &locals, mode)?;
    let system = assemble_global(op, &basis, &u_f, source, bc)?;
    let drop_tol = match mode {
        BasisMode::Oversampled => Some(T::lit(1e-10)),
        BasisMode::Spectral => None,
    };
    let sol = solve_global(&system, &basis, &u_f, drop_tol)?;
    Ok((basis, system, sol))
}
