//! Builds the benchmark from a configuration and prepares patches,
//! reusing persisted hat extensions when a cache directory is set.

use crate::config::{Contrast, ExperimentConfig};
use msgfem::fem::{solve, BoundaryConditions, NodalField, Nullspace, Operator};
use msgfem::geometry::{
    assign_coefficients, generate_inclusions, Domain, ElementOrder, InclusionSet, Mesh, MeshBuilder, RegionIndex,
};
use msgfem::global::{
    assemble_global, build_global_basis, galerkin_residuals, local_functions, paste_particular, solve_global, BasisMode,
    GlobalBasis, GlobalSolution, GlobalSystem, PatchData,
};
use msgfem::local::{load_local_space, save_local_space, PatchSolver};
use msgfem::spectral::{assemble_pq, generalized_eig, PqRoute};
use msgfem::pou::{build_pu, build_two_patch_cover, Cover, CoverDims, PartitionOfUnity};
use msgfem::Result;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Per-patch artifact store keyed by a hash of everything that determines
/// the hat extensions.
#[derive(Clone, Debug, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn at(dir: &Path) -> Self {
        Self { dir: Some(dir.to_path_buf()) }
    }

    fn path(&self, key: &[u8]) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("patch-{}.bin", hex::encode(&key[..12]))))
    }
}

/// Domain, inclusion lattice and mesh of the configured geometry.
pub fn mesh_for(cfg: &ExperimentConfig, nx: usize, ny: usize) -> Result<(Domain<f64>, InclusionSet<f64>, Arc<Mesh<f64>>)> {
    let g = &cfg.geometry;
    let domain = Domain::new(g.width, g.height)?;
    let inclusions = generate_inclusions(domain, (g.inclusions[0], g.inclusions[1]), g.radius, g.variation, g.seed)?;
    let order: ElementOrder = cfg.mesh.order.into();
    let mut builder = MeshBuilder::new(domain, nx, ny).order(order);
    if cfg.mesh.fitted {
        builder = builder.fit_to(&inclusions);
    }
    let mesh = Arc::new(builder.build()?);
    Ok((domain, inclusions, mesh))
}

pub struct Benchmark {
    pub cfg: ExperimentConfig,
    pub domain: Domain<f64>,
    pub inclusions: InclusionSet<f64>,
    pub mesh: Arc<Mesh<f64>>,
    pub bc: BoundaryConditions<f64>,
    pub cover: Cover<f64>,
    pub pu: PartitionOfUnity<f64>,
}

impl Benchmark {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Self::with_mesh(cfg, cfg.mesh.nx, cfg.mesh.ny)
    }

    pub fn with_mesh(cfg: &ExperimentConfig, nx: usize, ny: usize) -> Result<Self> {
        let (domain, inclusions, mesh) = mesh_for(cfg, nx, ny)?;
        let bc = BoundaryConditions::benchmark();
        let c = &cfg.cover;
        let dims = CoverDims {
            inner: (c.inner[0], c.inner[1]),
            inner_star: (c.inner_star[0], c.inner_star[1]),
            hole: (c.hole[0], c.hole[1]),
            hole_star: (c.hole_star[0], c.hole_star[1]),
        };
        let cover = build_two_patch_cover(&mesh, &bc, dims)?;
        let pu = build_pu(&cover, &mesh)?;
        Ok(Self { cfg: cfg.clone(), domain, inclusions, mesh, bc, cover, pu })
    }

    pub fn operator(&self, contrast: Contrast) -> Result<Operator<f64>> {
        let coeff = assign_coefficients(&self.mesh, &self.inclusions, contrast[0], contrast[1])?;
        Operator::new(self.mesh.clone(), Arc::new(coeff))
    }

    /// Direct FEM solution on the same mesh.
    pub fn overkill(&self, op: &Operator<f64>) -> Result<NodalField<f64>> {
        solve(op, &self.bc, None, &self.cfg.solver.settings(), Nullspace::Reject)
    }

    fn patch_key(&self, contrast: Contrast, patch: usize, width: usize) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(toml::to_string(&self.cfg.geometry).unwrap());
        h.update(toml::to_string(&self.cfg.cover).unwrap());
        h.update(toml::to_string(&self.cfg.solver).unwrap());
        h.update(format!(
            "mesh {}x{} {:?} fitted={} contrast {:e}:{:e} patch {patch} width {width}",
            self.mesh.nx(),
            self.mesh.ny(),
            self.mesh.order(),
            self.cfg.mesh.fitted,
            contrast[0],
            contrast[1]
        ));
        h.finalize().to_vec()
    }

    /// Hat extensions, particular solutions and spectra of both patches.
    pub fn prepare(&self, op: &Operator<f64>, contrast: Contrast, width: usize, cache: &Cache) -> Result<Vec<PatchData<f64>>> {
        Ok(self.prepare_timed(op, contrast, width, cache)?.into_iter().map(|(d, _)| d).collect())
    }

    /// As [`Benchmark::prepare`], also timing hat-extension construction
    /// and the spectral-matrix fill separately.
    pub fn prepare_timed(
        &self,
        op: &Operator<f64>,
        contrast: Contrast,
        width: usize,
        cache: &Cache,
    ) -> Result<Vec<(PatchData<f64>, PatchTiming)>> {
        let s = &self.cfg.solver;
        self.cover
            .patches
            .iter()
            .map(|p| {
                let key = self.patch_key(contrast, p.id, width);
                let path = cache.path(&key);
                let cached = match &path {
                    Some(path) => load_local_space(path, &key, &p.omega_star, self.mesh.order())?,
                    None => None,
                };
                let hit = cached.is_some();
                let solver = PatchSolver::new(op, p, &self.bc, s.settings())?;
                let t = Instant::now();
                let space = match cached {
                    Some(space) => {
                        log::info!("patch {} width {width}: reusing cached hat extensions", p.id);
                        space
                    }
                    None => solver.local_space(width)?,
                };
                let build = t.elapsed().as_secs_f64();
                if let (Some(path), false) = (&path, hit) {
                    if let Some(dir) = path.parent() {
                        std::fs::create_dir_all(dir)?;
                    }
                    save_local_space(&space, &key, path)?;
                }
                let chi = solver.particular_solution(None)?;
                drop(solver);
                let t = Instant::now();
                let matrices = assemble_pq(op, &space, &p.omega, &p.omega_star, PqRoute::BoundaryLayer)?;
                let fill = t.elapsed().as_secs_f64();
                let spectrum = generalized_eig(&matrices, s.eigen_cutoff)?;
                let data = PatchData { patch: p.clone(), space, chi, matrices, spectrum };
                Ok((data, PatchTiming { build, fill, cached: hit }))
            })
            .collect()
    }
}

impl Benchmark {
    /// Global basis, system and solution from prepared patches. Oversampled
    /// runs drop near-dependent trial functions at the configured tolerance.
    pub fn solve_global(
        &self,
        op: &Operator<f64>,
        patches: &[PatchData<f64>],
        mode: BasisMode,
        dims: &[usize],
    ) -> Result<(GlobalBasis<f64>, GlobalSystem<f64>, GlobalSolution<f64>)> {
        let whole = Arc::new(RegionIndex::whole(&self.mesh));
        let chis: Vec<_> = patches.iter().map(|p| p.chi.clone()).collect();
        let u_f = paste_particular(&self.cover, &self.pu, &chis, &whole)?;
        let locals = local_functions(patches, mode, dims)?;
        let basis = build_global_basis(&self.cover, &self.pu, &locals, mode)?;
        let system = assemble_global(op, &basis, &u_f, None, &self.bc)?;
        let drop_tol = (mode == BasisMode::Oversampled).then_some(self.cfg.solver.drop_tolerance);
        let sol = solve_global(&system, &basis, &u_f, drop_tol)?;
        Ok((basis, system, sol))
    }
}

/// Largest Galerkin orthogonality ratio over all trial functions.
pub fn worst_galerkin(
    op: &Operator<f64>,
    basis: &GlobalBasis<f64>,
    system: &GlobalSystem<f64>,
    sol: &GlobalSolution<f64>,
    overkill: &NodalField<f64>,
) -> Result<f64> {
    Ok(galerkin_residuals(op, basis, system, &sol.u0, overkill)?.into_iter().fold(0.0, f64::max))
}

/// Wall times of one patch preparation, in seconds.
#[derive(Clone, Copy, Debug)]
pub struct PatchTiming {
    pub build: f64,
    pub fill: f64,
    pub cached: bool,
}
