use super::{new_result, Clock, GALERKIN_ERROR_FLOOR};
use crate::config::{contrast_label, ExperimentConfig, Mode};
use crate::emit::{Check, Plot, Series, StudyResult, Table};
use crate::problem::{worst_galerkin, Benchmark, Cache};
use msgfem::fem::energy;
use msgfem::global::relative_error;
use msgfem::Result;

const RESIDUAL_TOL: f64 = 1e-10;
const GALERKIN_TOL: f64 = 1e-8;
const DIRICHLET_TOL: f64 = 1e-12;

/// One global solve against the same-mesh overkill solution.
pub fn run_solve(cfg: &ExperimentConfig, cache: &Cache) -> Result<StudyResult> {
    let s = &cfg.solve;
    let mut result = new_result("solve", &cfg.hash());
    let clock = Clock::start();
    let bench = Benchmark::new(cfg)?;
    let op = bench.operator(s.contrast)?;
    let u = bench.overkill(&op)?;
    result.timings.push(("overkill".into(), clock.secs()));

    let clock = Clock::start();
    let patches = bench.prepare(&op, s.contrast, s.width, cache)?;
    result.timings.push(("patches".into(), clock.secs()));

    let clock = Clock::start();
    let dims = s.dims.to_vec();
    let (basis, system, sol) = bench.solve_global(&op, &patches, s.mode.into(), &dims)?;
    result.timings.push(("global".into(), clock.secs()));

    let whole = u.region().clone();
    let err = relative_error(&op, &sol.u0, &u)?;
    let galerkin = worst_galerkin(&op, &basis, &system, &sol, &u)?;
    let mut dirichlet: f64 = 0.0;
    for g in 0..bench.mesh.n_nodes() {
        if let Some(v) = bench.bc.dirichlet_value(&bench.mesh, g) {
            dirichlet = dirichlet.max((sol.u0.at(g) - v).abs());
        }
    }
    let mode = match s.mode {
        Mode::Spectral => "spectral",
        Mode::Oversampled => "oversampled",
    };
    let mut summary = Table::new(
        "summary",
        &[
            "contrast",
            "mode",
            "width",
            "elements",
            "per_patch",
            "dimension",
            "kept",
            "rel_error",
            "energy_overkill",
            "energy_u0",
            "condition",
            "residual",
            "galerkin_max",
            "dirichlet_max",
        ],
    );
    let per_patch: Vec<String> = basis.per_patch.iter().map(|m| m.to_string()).collect();
    summary.push(vec![
        contrast_label(s.contrast).into(),
        mode.into(),
        s.width.into(),
        bench.mesh.n_elements().into(),
        per_patch.join(" ").into(),
        basis.dimension().into(),
        sol.kept.len().into(),
        err.into(),
        energy(&op, &u, &whole)?.into(),
        energy(&op, &sol.u0, &whole)?.into(),
        sol.condition_estimate.into(),
        sol.residual.into(),
        galerkin.into(),
        dirichlet.into(),
    ]);
    result.tables.push(summary);

    let mut plot = Plot {
        name: "eigenvalues".into(),
        title: "Eigenvalues per patch".into(),
        x_label: "index".into(),
        y_label: "lambda".into(),
        log_y: true,
        series: Vec::new(),
    };
    for p in &patches {
        let mut t = Table::new(&format!("eigen-patch{}", p.patch.id), &["index", "lambda", "sqrt_lambda"]);
        let mut series = Series { label: format!("patch {}", p.patch.id), points: Vec::new() };
        for (n, &l) in p.spectrum.eigenvalues.iter().enumerate() {
            t.push(vec![n.into(), l.into(), l.sqrt().into()]);
            series.points.push((n as f64, l));
        }
        result.tables.push(t);
        plot.series.push(series);
    }
    result.plots.push(plot);

    if s.export_solution {
        let mut t = Table::new("solution", &["node", "x", "y", "u0", "overkill"]);
        for (g, p) in bench.mesh.nodes().iter().enumerate() {
            t.push(vec![g.into(), p[0].into(), p[1].into(), sol.u0.at(g).into(), u.at(g).into()]);
        }
        result.tables.push(t);
    }

    result.checks.push(Check::new(
        "residual",
        sol.residual,
        RESIDUAL_TOL,
        sol.residual <= RESIDUAL_TOL,
        "relative residual of the reduced global system",
    ));
    if err >= GALERKIN_ERROR_FLOOR {
        result.checks.push(Check::new(
            "galerkin",
            galerkin,
            GALERKIN_TOL,
            galerkin <= GALERKIN_TOL,
            "largest |B(u - u0, v)| / (|u - u0| |v|)",
        ));
    }
    result.checks.push(Check::new(
        "dirichlet",
        dirichlet,
        DIRICHLET_TOL,
        dirichlet <= DIRICHLET_TOL,
        "largest deviation from the Dirichlet data",
    ));
    Ok(result)
}
