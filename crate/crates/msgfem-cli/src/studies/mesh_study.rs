use super::{new_result, Clock};
use crate::config::{contrast_label, ExperimentConfig};
use crate::emit::{Check, Plot, Series, StudyResult, Table};
use crate::problem::mesh_for;
use msgfem::fem::{a_posteriori, energy, solve, BoundaryConditions, Nullspace, Operator};
use msgfem::geometry::{assign_coefficients, RegionIndex};
use msgfem::{Error, Result};
use rayon::prelude::*;
use std::sync::Arc;

/// A contrast-free run has a linear exact solution, so its ε² is rounding
/// noise. Direct solves accept residuals up to this multiple of the solver
/// tolerance.
const NOISE_FACTOR: f64 = 1e3;

/// Overkill energies on `levels` nested meshes and the a-posteriori error of
/// every level but the finest, which serves as reference.
pub fn run_mesh_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    let s = &cfg.mesh_study;
    let mut result = new_result("mesh-study", &cfg.hash());
    let finest = (s.base_nx << (s.levels - 1)) * (s.base_ny << (s.levels - 1));
    if finest > s.max_elements {
        return Err(Error::Resource(format!(
            "finest level needs {finest} elements, budget is {}",
            s.max_elements
        )));
    }
    let bc = BoundaryConditions::benchmark();
    let settings = cfg.solver.settings();
    let noise = 0.5 * (NOISE_FACTOR * cfg.solver.tolerance).log10();
    // energies[c][l]
    let mut energies = vec![Vec::new(); s.contrasts.len()];
    let mut elements = Vec::new();
    for level in 0..s.levels {
        let clock = Clock::start();
        let (nx, ny) = (s.base_nx << level, s.base_ny << level);
        let (_, inclusions, mesh) = mesh_for(cfg, nx, ny)?;
        let whole = RegionIndex::whole(&mesh);
        let e: Vec<f64> = s
            .contrasts
            .par_iter()
            .map(|c| {
                let coeff = assign_coefficients(&mesh, &inclusions, c[0], c[1])?;
                let op = Operator::new(mesh.clone(), Arc::new(coeff))?;
                let u = solve(&op, &bc, None, &settings, Nullspace::Reject)?;
                energy(&op, &u, &whole)
            })
            .collect::<Result<_>>()?;
        for (c, v) in e.into_iter().enumerate() {
            energies[c].push(v);
        }
        elements.push((nx, ny, mesh.n_elements()));
        result.timings.push((format!("level {level}"), clock.secs()));
        log::info!("mesh study level {level}: {nx}x{ny}");
    }

    let mut table =
        Table::new("levels", &["contrast", "level", "nx", "ny", "elements", "energy", "log10_eps", "decrease", "ok"]);
    let mut plot = Plot {
        name: "log-eps".into(),
        title: "A-posteriori error per refinement level".into(),
        x_label: "level".into(),
        y_label: "log10 eps".into(),
        log_y: false,
        series: Vec::new(),
    };
    for (c, contrast) in s.contrasts.iter().enumerate() {
        let label = contrast_label(*contrast);
        let e = &energies[c];
        let reference = e[s.levels - 1];
        let mut logs = Vec::new();
        for l in 0..s.levels - 1 {
            let eps2 = a_posteriori(e[l], e[l + 1], reference, s.gamma)?;
            logs.push(eps2.sqrt().log10());
        }
        let homogeneous = contrast[0] == contrast[1];
        let mut series = Series { label: label.clone(), points: Vec::new() };
        for l in 0..s.levels {
            let (nx, ny, n_el) = elements[l];
            let log_eps = logs.get(l).copied();
            let decrease = if l >= 1 { log_eps.map(|v| logs[l - 1] - v) } else { None };
            let ok = match (homogeneous, log_eps, decrease) {
                (true, Some(v), _) => v <= noise,
                (false, Some(_), Some(d)) => d >= s.min_decrease,
                _ => true,
            };
            if let Some(v) = log_eps.filter(|v| v.is_finite()) {
                series.points.push((l as f64, v));
            }
            table.push(vec![
                label.clone().into(),
                l.into(),
                nx.into(),
                ny.into(),
                n_el.into(),
                e[l].into(),
                log_eps.into(),
                decrease.into(),
                ok.into(),
            ]);
        }
        plot.series.push(series);
        if homogeneous {
            let worst = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            result.checks.push(Check::new(
                &format!("noise-level {label}"),
                worst,
                noise,
                worst <= noise,
                "largest log10 eps of a contrast-free run",
            ));
        } else {
            let smallest = logs.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
            result.checks.push(Check::new(
                &format!("monotone {label}"),
                smallest,
                s.min_decrease,
                logs.len() >= 2 && smallest >= s.min_decrease,
                format!("smallest per-level decrease of log10 eps over {} estimates", logs.len()),
            ));
        }
    }
    result.tables.push(table);
    result.plots.push(plot);
    Ok(result)
}
