//! Experiment configuration (TOML). Every section has desk-scale defaults,
//! so a file only needs the keys it changes. Unknown keys are rejected.

use msgfem::fem::{SolverMethod, SolverSettings};
use msgfem::geometry::ElementOrder;
use msgfem::global::BasisMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// `[matrix, inclusion]` conductivities.
pub type Contrast = [f64; 2];

pub fn contrast_label(c: Contrast) -> String {
    format!("{}:{}", c[0], c[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Linear,
    Quadratic,
}

impl From<Order> for ElementOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Linear => ElementOrder::Linear,
            Order::Quadratic => ElementOrder::Quadratic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Cg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Spectral,
    Oversampled,
}

impl From<Mode> for BasisMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Spectral => BasisMode::Spectral,
            Mode::Oversampled => BasisMode::Oversampled,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub width: f64,
    pub height: f64,
    /// Inclusion lattice `[columns, rows]`.
    pub inclusions: [usize; 2],
    pub radius: f64,
    /// Relative radius variation.
    pub variation: f64,
    pub seed: u64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { width: 10.0, height: 5.0, inclusions: [5, 5], radius: 0.35, variation: 0.1, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub order: Order,
    /// Bend element edges onto the inclusion boundaries.
    pub fitted: bool,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { nx: 300, ny: 150, order: Order::Linear, fitted: true }
    }
}

/// Sizes `[width, height]` of the centered cover rectangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverConfig {
    pub inner: [f64; 2],
    pub inner_star: [f64; 2],
    pub hole: [f64; 2],
    pub hole_star: [f64; 2],
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self { inner: [6.0, 3.0], inner_star: [8.0, 4.0], hole: [4.0, 2.0], hole_star: [2.0, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub eigen_cutoff: f64,
    /// Relative pivot below which oversampled trial functions are dropped.
    pub drop_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: Method::Direct, tolerance: 1e-12, max_iterations: 20_000, eigen_cutoff: 1e-12, drop_tolerance: 1e-10 }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SolverSettings<f64> {
        SolverSettings {
            method: match self.method {
                Method::Direct => SolverMethod::Direct,
                Method::Cg => SolverMethod::ConjugateGradient,
            },
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshStudyConfig {
    pub base_nx: usize,
    pub base_ny: usize,
    pub levels: usize,
    pub contrasts: Vec<Contrast>,
    pub gamma: f64,
    /// Required decrease of log₁₀ ε per level.
    pub min_decrease: f64,
    /// Upper bound on elements of the finest level.
    pub max_elements: usize,
}

impl Default for MeshStudyConfig {
    fn default() -> Self {
        Self {
            base_nx: 80,
            base_ny: 40,
            levels: 4,
            contrasts: vec![[100.0, 1.0], [1.0, 100.0], [1.0, 1.0]],
            gamma: 0.5,
            min_decrease: 0.2,
            max_elements: 4_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub contrast: Contrast,
    pub dims: [usize; 2],
    pub width: usize,
    pub mode: Mode,
    /// Also write the nodal solution.
    pub export_solution: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { contrast: [1.0, 100.0], dims: [20, 8], width: 1, mode: Mode::Spectral, export_solution: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub contrasts: Vec<Contrast>,
    /// Spectral counts `[m₁, m₂]`, strictly increasing.
    pub schedule: Vec<[usize; 2]>,
    pub width: usize,
    /// Rows with error above this multiple of the 1:1 plateau are pre-plateau.
    pub plateau_factor: f64,
    /// Required log₁₀ slope per basis function.
    pub max_slope: f64,
    pub slope_ratio: f64,
    /// Allowed spread of log₁₀ errors across contrasts.
    pub max_spread: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            contrasts: vec![
                [1.0, 1.0],
                [10.0, 1.0],
                [100.0, 1.0],
                [1000.0, 1.0],
                [1.0, 10.0],
                [1.0, 100.0],
                [1.0, 1000.0],
            ],
            schedule: (1..=8).map(|i| [5 * i, 2 * i]).collect(),
            width: 1,
            plateau_factor: 10.0,
            max_slope: -0.03,
            slope_ratio: 3.0,
            max_spread: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HatWidthConfig {
    pub widths: Vec<usize>,
    pub contrasts: Vec<Contrast>,
    /// Fixed spectral counts used at every width.
    pub dims: [usize; 2],
    pub max_ratio: f64,
}

impl Default for HatWidthConfig {
    fn default() -> Self {
        Self { widths: (0..13).map(|i| 2 * i + 1).collect(), contrasts: vec![[1.0, 100.0], [100.0, 1.0]], dims: [15, 6], max_ratio: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenDecayConfig {
    /// Square domain side.
    pub domain: f64,
    pub nx: usize,
    /// Side of the fixed outer square ω*.
    pub outer: f64,
    /// Sides of the inner squares ω.
    pub inner: Vec<f64>,
    pub contrasts: Vec<Contrast>,
    pub inclusions: [usize; 2],
    pub radius: f64,
    pub width: usize,
    pub n_max: usize,
    /// Allowed relative deviation of the fitted factor from (ρ/R)².
    pub tolerance: f64,
}

impl Default for EigenDecayConfig {
    fn default() -> Self {
        Self {
            domain: 5.0,
            nx: 300,
            outer: 4.5,
            inner: vec![4.0, 3.0, 1.5],
            contrasts: vec![[1.0, 1.0], [1.0, 1000.0]],
            inclusions: [5, 5],
            radius: 0.35,
            width: 1,
            n_max: 10,
            tolerance: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    /// Hat widths, ascending (so the basis shrinks down the table).
    pub widths: Vec<usize>,
    pub contrasts: Vec<Contrast>,
    /// Width used for the spectral basis.
    pub spectral_width: usize,
    pub max_ratio: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            widths: vec![13, 19, 25, 29, 35, 41, 47, 53, 59, 63, 69, 75, 93, 113],
            contrasts: vec![[100.0, 1.0], [1.0, 100.0]],
            spectral_width: 1,
            max_ratio: 2.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub mesh: MeshConfig,
    pub cover: CoverConfig,
    pub solver: SolverConfig,
    pub mesh_study: MeshStudyConfig,
    pub solve: SolveConfig,
    pub contrast_sweep: SweepConfig,
    pub hat_width: HatWidthConfig,
    pub eigen_decay: EigenDecayConfig,
    pub oversampled_compare: CompareConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    /// 20×10 domain with 100 inclusions and a mesh of ~320k elements.
    /// Expensive.
    pub fn paper_scale() -> Self {
        let mut c = Self::default();
        c.apply_paper_scale();
        c
    }

    pub fn apply_paper_scale(&mut self) {
        self.geometry.width = 20.0;
        self.geometry.height = 10.0;
        self.geometry.inclusions = [10, 10];
        self.mesh.nx = 800;
        self.mesh.ny = 400;
        self.cover = CoverConfig { inner: [12.0, 6.0], inner_star: [16.0, 8.0], hole: [8.0, 4.0], hole_star: [4.0, 2.0] };
        self.mesh_study.base_nx = 160;
        self.mesh_study.base_ny = 80;
        self.contrast_sweep.schedule = (1..=14).map(|i| [5 * i, 2 * i]).collect();
        self.hat_width.dims = [40, 16];
        self.eigen_decay.domain = 20.0;
        self.eigen_decay.outer = 18.0;
        self.eigen_decay.inner = vec![16.0, 12.0, 6.0];
        self.eigen_decay.nx = 400;
        self.eigen_decay.inclusions = [10, 10];
        self.eigen_decay.width = 19;
        self.oversampled_compare.widths = vec![69, 99, 129, 159, 189, 219, 249, 279, 309, 339, 369, 399, 499, 599];
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let g = &self.geometry;
        if !(g.width > 0.0 && g.height > 0.0) {
            return bad(format!("geometry: non-positive domain {}×{}", g.width, g.height));
        }
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return bad("mesh: nx and ny must be positive".into());
        }
        for (name, [w, h]) in [
            ("inner", self.cover.inner),
            ("inner_star", self.cover.inner_star),
            ("hole", self.cover.hole),
            ("hole_star", self.cover.hole_star),
        ] {
            for (v, n, side) in [(w, self.mesh.nx, g.width), (h, self.mesh.ny, g.height)] {
                // Centered rectangles: both edges sit on grid lines.
                let cells = (side - v) / 2.0 / (side / n as f64);
                if (cells - cells.round()).abs() > 1e-9 {
                    return bad(format!("cover.{name}: {w}×{h} is not aligned with a {}×{} mesh", self.mesh.nx, self.mesh.ny));
                }
            }
        }
        if self.mesh_study.levels < 3 {
            return bad("mesh_study: at least three refinement levels are needed".into());
        }
        if !self.contrast_sweep.schedule.windows(2).all(|w| w[0][0] < w[1][0] && w[0][1] < w[1][1]) {
            return bad("contrast_sweep: schedule must be strictly increasing".into());
        }
        if self.hat_width.widths.iter().any(|&k| k % 2 == 0) || !self.hat_width.widths.windows(2).all(|w| w[0] < w[1]) {
            return bad("hat_width: widths must be odd and ascending".into());
        }
        if self.oversampled_compare.widths.iter().any(|&k| k % 2 == 0)
            || !self.oversampled_compare.widths.windows(2).all(|w| w[0] < w[1])
        {
            return bad("oversampled_compare: widths must be odd and ascending".into());
        }
        if self.eigen_decay.inner.iter().any(|&r| !(r > 0.0 && r < self.eigen_decay.outer)) {
            return bad("eigen_decay: inner sides must lie in (0, outer)".into());
        }
        if self.eigen_decay.outer >= self.eigen_decay.domain {
            return bad("eigen_decay: outer square must fit inside the domain".into());
        }
        for c in self
            .mesh_study
            .contrasts
            .iter()
            .chain(&self.contrast_sweep.contrasts)
            .chain(&self.hat_width.contrasts)
            .chain(&self.eigen_decay.contrasts)
            .chain(&self.oversampled_compare.contrasts)
            .chain(std::iter::once(&self.solve.contrast))
        {
            if !(c[0] > 0.0 && c[1] > 0.0) {
                return bad(format!("contrast {} has a non-positive conductivity", contrast_label(*c)));
            }
        }
        Ok(())
    }
}
