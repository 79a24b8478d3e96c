use super::{new_result, Clock};
use crate::config::{contrast_label, ExperimentConfig};
use crate::emit::{Check, Plot, Series, StudyResult, Table};
use msgfem::fem::{BoundaryConditions, Operator};
use msgfem::geometry::{assign_coefficients, generate_inclusions, CoefficientField, Domain, MeshBuilder, RegionShape};
use msgfem::local::PatchSolver;
use msgfem::pou::Patch;
use msgfem::spectral::{assemble_pq, generalized_eig, paired_decay_factor, PqRoute};
use msgfem::Result;
use std::sync::Arc;

/// Wall-time budget per ratio, in seconds.
const RATIO_BUDGET: f64 = 300.0;

/// Eigenvalue decay on concentric squares against the `(ρ/R)^{2n}` law.
/// All ratios share ω*, so the hat extensions are computed once.
pub fn run_eigen_decay(cfg: &ExperimentConfig) -> Result<StudyResult> {
    let s = &cfg.eigen_decay;
    let mut result = new_result("eigen-decay", &cfg.hash());
    let domain = Domain::new(s.domain, s.domain)?;
    let mesh = Arc::new(MeshBuilder::new(domain, s.nx, s.nx).order(cfg.mesh.order.into()).build()?);
    let bc = BoundaryConditions::benchmark();
    let outer = RegionShape::Rect(domain.centered(s.outer, s.outer));
    let mut ratios: Vec<f64> = s.inner.clone();
    ratios.sort_by(|a, b| b.total_cmp(a));

    let mut fits = Table::new(
        "fits",
        &["contrast", "rho", "ratio", "target", "fitted", "fit_over_target", "within_tolerance", "secs"],
    );
    let mut curves = Table::new("eigenvalues", &["contrast", "rho", "index", "lambda", "law"]);
    for &contrast in &s.contrasts {
        let label = contrast_label(contrast);
        let homogeneous = contrast[0] == contrast[1];
        let coeff = if homogeneous {
            CoefficientField::uniform(&mesh, contrast[0])?
        } else {
            let g = &cfg.geometry;
            let inc = generate_inclusions(domain, (s.inclusions[0], s.inclusions[1]), s.radius, g.variation, g.seed)?;
            assign_coefficients(&mesh, &inc, contrast[0], contrast[1])?
        };
        let op = Operator::new(mesh.clone(), Arc::new(coeff))?;
        let clock = Clock::start();
        let first = Patch::new(0, &mesh, RegionShape::Rect(domain.centered(ratios[0], ratios[0])), outer, &bc)?;
        let space = PatchSolver::new(&op, &first, &bc, cfg.solver.settings())?.local_space(s.width)?;
        let build = clock.secs();
        log::info!("{label}: {} hat extensions in {build:.1}s", space.len());

        let mut plot = Plot {
            name: format!("eigenvalues-{}", label.replace(':', "-")),
            title: format!("Eigenvalue decay, contrast {label}"),
            x_label: "index".into(),
            y_label: "lambda".into(),
            log_y: true,
            series: Vec::new(),
        };
        let mut spectra: Vec<Vec<f64>> = Vec::new();
        for &rho in &ratios {
            let clock = Clock::start();
            let patch = Patch::new(0, &mesh, RegionShape::Rect(domain.centered(rho, rho)), outer, &bc)?;
            let mats = assemble_pq(&op, &space, &patch.omega, &patch.omega_star, PqRoute::BoundaryLayer)?;
            let spectrum = generalized_eig(&mats, cfg.solver.eigen_cutoff)?;
            // Each ratio on its own would pay for the extensions too.
            let secs = build + clock.secs();
            let target = (rho / s.outer).powi(2);
            let fitted = paired_decay_factor(&spectrum.eigenvalues, s.n_max);
            let q = fitted.map(|f| f / target);
            let within = q.is_some_and(|q| (q - 1.0).abs() <= s.tolerance);
            fits.push(vec![
                label.clone().into(),
                rho.into(),
                (rho / s.outer).into(),
                target.into(),
                fitted.into(),
                q.into(),
                within.into(),
                secs.into(),
            ]);
            let mut series = Series { label: format!("rho {rho}"), points: Vec::new() };
            let mut law = Series { label: format!("law rho {rho}"), points: Vec::new() };
            for (j, &l) in spectrum.eigenvalues.iter().enumerate() {
                let n = (j + 2) / 2;
                let line = target.powi(n as i32);
                curves.push(vec![label.clone().into(), rho.into(), j.into(), l.into(), line.into()]);
                if n <= s.n_max {
                    series.points.push((j as f64, l));
                    law.points.push((j as f64, line));
                }
            }
            plot.series.extend([series, law]);
            if homogeneous {
                result.checks.push(Check::new(
                    &format!("law {label} rho={rho}"),
                    q.map_or(f64::NAN, |q| (q - 1.0).abs()),
                    s.tolerance,
                    within,
                    format!("relative deviation of the fitted decay factor from (rho/R)^2 for n <= {}", s.n_max),
                ));
            }
            result.checks.push(Check::new(
                &format!("runtime {label} rho={rho}"),
                secs,
                RATIO_BUDGET,
                secs <= RATIO_BUDGET,
                "seconds for extensions, matrices and eigenproblem",
            ));
            spectra.push(spectrum.eigenvalues);
        }
        // Larger ω relative to ω* gives uniformly larger eigenvalues.
        let limit = 2 * s.n_max;
        let mut violations = 0;
        for pair in spectra.windows(2) {
            let n = pair[0].len().min(pair[1].len()).min(limit);
            violations += (0..n).filter(|&j| pair[0][j] < pair[1][j]).count();
        }
        result.checks.push(Check::new(
            &format!("nested {label}"),
            violations as f64,
            0.0,
            violations == 0,
            format!("indices up to {limit} where a larger ratio has a smaller eigenvalue"),
        ));
        result.plots.push(plot);
        result.timings.push((label, clock.secs()));
    }
    result.tables.extend([fits, curves]);
    Ok(result)
}
