//! Per-patch local problems: boundary hats on ∂ω* ∩ Ω, their A-harmonic
//! extensions into ω*, and the particular solutions χ.

use crate::error::{Error, Result};
use crate::fem::{
    apply_stiffness, assemble, assemble_load, BoundaryConditions, ConstrainedSolver, CsrMatrix, NodalField,
    Operator, ScalarFn, SolverSettings,
};
use crate::geometry::{Mesh, RegionIndex};
use crate::pou::{Patch, PatchKind};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// A run of consecutive nodes of ∂ω* lying inside Ω.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryChain {
    pub nodes: Vec<usize>,
    /// Closed loops wrap around; open chains end next to ∂Ω.
    pub closed: bool,
}

/// Chains of ∂ω* ∩ Ω plus the junction nodes where ∂ω* meets ∂Ω.
pub fn boundary_chains<T: Scalar>(mesh: &Mesh<T>, star: &RegionIndex<T>) -> (Vec<BoundaryChain>, Vec<usize>) {
    let mut chains = Vec::new();
    let mut junctions = Vec::new();
    for lp in star.boundary_loops() {
        let n = lp.len();
        let on_bd: Vec<bool> = lp.iter().map(|&g| mesh.on_domain_boundary(g)).collect();
        if on_bd.iter().all(|&b| !b) {
            chains.push(BoundaryChain { nodes: lp.clone(), closed: true });
            continue;
        }
        if on_bd.iter().all(|&b| b) {
            continue;
        }
        // Rotate so the loop starts on ∂Ω, then split into interior runs.
        let start = on_bd.iter().position(|&b| b).unwrap();
        let mut run = Vec::new();
        for s in 0..=n {
            let q = (start + s) % n;
            if on_bd[q] {
                if !run.is_empty() {
                    chains.push(BoundaryChain { nodes: std::mem::take(&mut run), closed: false });
                }
                if s < n && (!on_bd[(q + 1) % n] || !on_bd[(q + n - 1) % n]) {
                    junctions.push(lp[q]);
                }
            } else {
                run.push(lp[q]);
            }
        }
    }
    junctions.sort_unstable();
    junctions.dedup();
    (chains, junctions)
}

/// Number of hats of width `k` on a chain of `n` nodes.
pub fn hat_count(n: usize, k: usize, closed: bool) -> usize {
    let s = k.div_ceil(2);
    if closed {
        n.div_ceil(s)
    } else if n <= 1 {
        n
    } else {
        (n - 1).div_ceil(s) + 1
    }
}

/// Upper-triangle entry count of an `m × m` spectral matrix.
pub fn spectral_entry_count(m: usize) -> usize {
    m * (m + 1) / 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryHat<T> {
    pub patch: usize,
    pub chain: usize,
    /// Peak position along the chain.
    pub peak: usize,
    pub width: usize,
    /// Nonzero nodal values as (global node, value).
    pub profile: Vec<(usize, T)>,
}

fn peaks(n: usize, s: usize, closed: bool) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).step_by(s).collect();
    if !closed && *p.last().unwrap() != n - 1 {
        p.push(n - 1);
    }
    p
}

/// Piecewise-linear hats of odd width `k` on one chain. Peaks sit every
/// `(k+1)/2` nodes from node 0; the last interval may be shorter.
pub fn chain_hats<T: Scalar>(chain: &BoundaryChain, chain_id: usize, patch: usize, k: usize) -> Result<Vec<BoundaryHat<T>>> {
    let n = chain.nodes.len();
    if k == 0 || k % 2 == 0 || k > n {
        return Err(Error::Width { width: k, chain_len: n });
    }
    let s = k.div_ceil(2);
    let p = peaks(n, s, chain.closed);
    let m = p.len();
    if m == 1 {
        let profile = chain.nodes.iter().map(|&g| (g, T::one())).collect();
        return Ok(vec![BoundaryHat { patch, chain: chain_id, peak: 0, width: k, profile }]);
    }
    let mut hats = Vec::with_capacity(m);
    for (idx, &pk) in p.iter().enumerate() {
        let mut profile = vec![(chain.nodes[pk], T::one())];
        // Falling side towards the next peak.
        let next = if idx + 1 < m { Some(p[idx + 1]) } else if chain.closed { Some(n) } else { None };
        if let Some(nx) = next {
            let len = T::from_usize_lossy(nx - pk);
            for q in pk + 1..nx {
                profile.push((chain.nodes[q % n], T::from_usize_lossy(nx - q) / len));
            }
        }
        // Rising side from the previous peak.
        let prev = if idx > 0 {
            Some((p[idx - 1], pk))
        } else if chain.closed {
            Some((p[m - 1], n))
        } else {
            None
        };
        if let Some((pv, here)) = prev {
            let len = T::from_usize_lossy(here - pv);
            for q in pv + 1..here {
                profile.push((chain.nodes[q % n], T::from_usize_lossy(q - pv) / len));
            }
        }
        hats.push(BoundaryHat { patch, chain: chain_id, peak: pk, width: k, profile });
    }
    Ok(hats)
}

/// Hats of width `k` on every chain of a patch, in chain order.
pub fn boundary_hats<T: Scalar>(mesh: &Mesh<T>, patch: &Patch<T>, k: usize) -> Result<Vec<BoundaryHat<T>>> {
    let (chains, _) = boundary_chains(mesh, &patch.omega_star);
    let mut out = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        out.extend(chain_hats(chain, c, patch.id, k)?);
    }
    Ok(out)
}

/// Hat extensions of one patch for one width.
#[derive(Clone, Debug)]
pub struct LocalSpace<T> {
    pub patch: usize,
    pub kind: PatchKind,
    pub width: usize,
    /// Node count N of ∂ω* ∩ Ω.
    pub n_boundary: usize,
    /// Whether the sum of all extensions is the constant 1.
    pub constants_in_span: bool,
    pub hats: Vec<BoundaryHat<T>>,
    pub fields: Vec<NodalField<T>>,
}

impl<T: Scalar> LocalSpace<T> {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// χ on ω*. For Dirichlet patches `chi = chi_r + chi_d`.
#[derive(Clone, Debug)]
pub struct ParticularSolution<T> {
    pub patch: usize,
    pub kind: PatchKind,
    pub chi: NodalField<T>,
    pub chi_r: Option<NodalField<T>>,
    pub chi_d: Option<NodalField<T>>,
}

/// Assembled ω* system of one patch with the hat-extension constraints
/// factored once.
pub struct PatchSolver<T: Scalar> {
    patch: Patch<T>,
    op: Operator<T>,
    bc: BoundaryConditions<T>,
    k: CsrMatrix<T>,
    chains: Vec<BoundaryChain>,
    fixed: Vec<bool>,
    solver: ConstrainedSolver<T>,
    settings: SolverSettings<T>,
    constants_in_span: bool,
}

impl<T: Scalar> PatchSolver<T> {
    pub fn new(op: &Operator<T>, patch: &Patch<T>, bc: &BoundaryConditions<T>, settings: SolverSettings<T>) -> Result<Self> {
        let mesh = op.mesh();
        let star = &patch.omega_star;
        let (chains, junctions) = boundary_chains(mesh, star);
        let n = star.n_nodes();
        let mut fixed = vec![false; n];
        for g in chains.iter().flat_map(|c| c.nodes.iter()).chain(&junctions) {
            fixed[star.local_index(*g).unwrap()] = true;
        }
        let mut has_dirichlet = false;
        for &g in star.boundary_nodes() {
            if bc.dirichlet_side(mesh, g).is_some() {
                fixed[star.local_index(g).unwrap()] = true;
                has_dirichlet = true;
            }
        }
        if !fixed.iter().any(|&f| f) {
            return Err(Error::UnsupportedPatch(format!("patch {} has no constrained boundary", patch.id)));
        }
        let constants_in_span = !has_dirichlet && junctions.is_empty() && chains.iter().all(|c| c.closed);
        let k = assemble(op, star);
        let solver = ConstrainedSolver::new(&k, &fixed, settings)?;
        Ok(Self {
            patch: patch.clone(),
            op: op.clone(),
            bc: bc.clone(),
            k,
            chains,
            fixed,
            solver,
            settings,
            constants_in_span,
        })
    }

    pub fn patch(&self) -> &Patch<T> {
        &self.patch
    }

    pub fn chains(&self) -> &[BoundaryChain] {
        &self.chains
    }

    pub fn n_boundary(&self) -> usize {
        self.chains.iter().map(|c| c.nodes.len()).sum()
    }

    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.k
    }

    pub fn hats(&self, k: usize) -> Result<Vec<BoundaryHat<T>>> {
        let mut out = Vec::new();
        for (c, chain) in self.chains.iter().enumerate() {
            out.extend(chain_hats(chain, c, self.patch.id, k)?);
        }
        Ok(out)
    }

    /// A-harmonic extension of boundary data given as (global node, value)
    /// pairs on ∂ω* ∩ Ω; all other constrained nodes are zero.
    pub fn extend(&self, data: &[(usize, T)]) -> Result<NodalField<T>> {
        let star = &self.patch.omega_star;
        let mut values = vec![T::zero(); star.n_nodes()];
        for &(g, v) in data {
            let l = star
                .local_index(g)
                .filter(|&l| self.fixed[l])
                .ok_or_else(|| Error::Domain(format!("node {g} is not a constrained node of ω*")))?;
            values[l] = v;
        }
        let load = vec![T::zero(); star.n_nodes()];
        let u = self.solver.solve(&load, &values)?;
        NodalField::new(star.clone(), self.op.mesh().order(), u)
    }

    pub fn harmonic_extend(&self, hat: &BoundaryHat<T>) -> Result<NodalField<T>> {
        self.extend(&hat.profile)
    }

    /// Extends all hats of width `k` in parallel; output order follows the hats.
    pub fn local_space(&self, k: usize) -> Result<LocalSpace<T>> {
        let hats = self.hats(k)?;
        let fields = hats.par_iter().map(|h| self.harmonic_extend(h)).collect::<Result<Vec<_>>>()?;
        Ok(LocalSpace {
            patch: self.patch.id,
            kind: self.patch.kind,
            width: k,
            n_boundary: self.n_boundary(),
            constants_in_span: self.constants_in_span,
            hats,
            fields,
        })
    }

    /// Largest residual of `K w` at free nodes relative to its largest entry.
    pub fn harmonic_residual(&self, w: &NodalField<T>) -> Result<T> {
        let kw = apply_stiffness(&self.op, w, &self.patch.omega_star)?;
        let scale = kw.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let free = kw
            .iter()
            .zip(&self.fixed)
            .filter(|(_, &f)| !f)
            .fold(T::zero(), |m, (v, _)| m.max(v.abs()));
        Ok(if scale == T::zero() { free } else { free / scale })
    }

    pub fn particular_solution(&self, source: Option<&ScalarFn<T>>) -> Result<ParticularSolution<T>> {
        let mesh = self.op.mesh();
        let patch = &self.patch;
        let expected = Patch::new(
            patch.id,
            mesh,
            patch.omega.shape(),
            patch.omega_star.shape(),
            &self.bc,
        )?
        .kind;
        if expected != patch.kind {
            return Err(Error::UnsupportedPatch(format!(
                "patch {} is declared {:?} but its boundary makes it {:?}",
                patch.id, patch.kind, expected
            )));
        }
        let star = &patch.omega_star;
        let order = mesh.order();
        let n = star.n_nodes();
        match patch.kind {
            PatchKind::Interior | PatchKind::Neumann => {
                let load = assemble_load(&self.op, star, source, &self.bc);
                let u = self.solver.solve(&load, &vec![T::zero(); n])?;
                let chi = NodalField::new(star.clone(), order, u)?;
                Ok(ParticularSolution { patch: patch.id, kind: patch.kind, chi, chi_r: None, chi_d: None })
            }
            PatchKind::Dirichlet => {
                let chi_r = match source {
                    Some(f) => {
                        let mut fixed = vec![false; n];
                        for &g in star.boundary_nodes() {
                            fixed[star.local_index(g).unwrap()] = true;
                        }
                        let s = ConstrainedSolver::new(&self.k, &fixed, self.settings)?;
                        let load = assemble_load(&self.op, star, Some(f), &BoundaryConditions::all_neumann());
                        NodalField::new(star.clone(), order, s.solve(&load, &vec![T::zero(); n])?)?
                    }
                    None => NodalField::zeros(star.clone(), order),
                };
                let mut fixed = vec![false; n];
                let mut values = vec![T::zero(); n];
                for &g in star.boundary_nodes() {
                    if let Some(v) = self.bc.dirichlet_value(mesh, g) {
                        let l = star.local_index(g).unwrap();
                        fixed[l] = true;
                        values[l] = v;
                    }
                }
                let s = ConstrainedSolver::new(&self.k, &fixed, self.settings)?;
                let load = assemble_load(&self.op, star, None, &self.bc);
                let chi_d = NodalField::new(star.clone(), order, s.solve(&load, &values)?)?;
                let mut chi = chi_r.clone();
                chi.axpy(T::one(), &chi_d)?;
                Ok(ParticularSolution { patch: patch.id, kind: patch.kind, chi, chi_r: Some(chi_r), chi_d: Some(chi_d) })
            }
        }
    }
}

const MAGIC: &[u8; 8] = b"MSGFLS01";

fn kind_code(k: PatchKind) -> u8 {
    match k {
        PatchKind::Interior => 0,
        PatchKind::Neumann => 1,
        PatchKind::Dirichlet => 2,
    }
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

/// Writes a local space with a caller-chosen key (typically a config hash).
/// Values are stored as little-endian f64.
pub fn save_local_space<T: Scalar>(space: &LocalSpace<T>, key: &[u8], path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        w.write_all(MAGIC)?;
        put_u64(&mut w, key.len() as u64)?;
        w.write_all(key)?;
        put_u64(&mut w, space.patch as u64)?;
        w.write_all(&[kind_code(space.kind), space.constants_in_span as u8])?;
        put_u64(&mut w, space.width as u64)?;
        put_u64(&mut w, space.n_boundary as u64)?;
        let n_nodes = space.fields.first().map_or(0, |f| f.values().len());
        put_u64(&mut w, space.hats.len() as u64)?;
        put_u64(&mut w, n_nodes as u64)?;
        for h in &space.hats {
            put_u64(&mut w, h.chain as u64)?;
            put_u64(&mut w, h.peak as u64)?;
            put_u64(&mut w, h.profile.len() as u64)?;
            for &(g, v) in &h.profile {
                put_u64(&mut w, g as u64)?;
                put_f64(&mut w, v.to_f64_lossy())?;
            }
        }
        for f in &space.fields {
            for &v in f.values() {
                put_f64(&mut w, v.to_f64_lossy())?;
            }
        }
        w.flush()?;
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

/// Reads a local space written by [`save_local_space`]. Returns `None` when
/// the file is missing or was written under a different key or region.
pub fn load_local_space<T: Scalar>(
    path: &Path,
    key: &[u8],
    region: &Arc<RegionIndex<T>>,
    order: crate::geometry::ElementOrder,
) -> Result<Option<LocalSpace<T>>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut r = std::io::BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: not a local-space file", path.display())));
    }
    let klen = get_u64(&mut r)? as usize;
    let mut stored = vec![0u8; klen];
    r.read_exact(&mut stored)?;
    if stored != key {
        return Ok(None);
    }
    let patch = get_u64(&mut r)? as usize;
    let mut flags = [0u8; 2];
    r.read_exact(&mut flags)?;
    let kind = match flags[0] {
        0 => PatchKind::Interior,
        1 => PatchKind::Neumann,
        2 => PatchKind::Dirichlet,
        c => return Err(Error::Format(format!("bad patch kind {c}"))),
    };
    let width = get_u64(&mut r)? as usize;
    let n_boundary = get_u64(&mut r)? as usize;
    let n_hats = get_u64(&mut r)? as usize;
    let n_nodes = get_u64(&mut r)? as usize;
    if n_hats > 0 && n_nodes != region.n_nodes() {
        return Ok(None);
    }
    let conv = |v: f64| T::from_f64(v).ok_or_else(|| Error::Format("value out of range".into()));
    let mut hats = Vec::with_capacity(n_hats);
    for _ in 0..n_hats {
        let chain = get_u64(&mut r)? as usize;
        let peak = get_u64(&mut r)? as usize;
        let len = get_u64(&mut r)? as usize;
        let mut profile = Vec::with_capacity(len);
        for _ in 0..len {
            let g = get_u64(&mut r)? as usize;
            profile.push((g, conv(get_f64(&mut r)?)?));
        }
        hats.push(BoundaryHat { patch, chain, peak, width, profile });
    }
    let mut fields = Vec::with_capacity(n_hats);
    for _ in 0..n_hats {
        let mut values = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            values.push(conv(get_f64(&mut r)?)?);
        }
        fields.push(NodalField::new(region.clone(), order, values)?);
    }
    Ok(Some(LocalSpace { patch, kind, width, n_boundary, constants_in_span: flags[1] != 0, hats, fields }))
}
