use super::{ls_slope, new_result, Clock, GALERKIN_ERROR_FLOOR};
use crate::config::{contrast_label, ExperimentConfig};
use crate::emit::{Cell, Check, Plot, Series, StudyResult, Table};
use crate::problem::{worst_galerkin, Benchmark, Cache};
use msgfem::global::{relative_error, BasisMode};
use msgfem::Result;

const GALERKIN_TOL: f64 = 1e-8;

/// One point of the sweep.
#[derive(Clone, Copy, Debug)]
struct Row {
    dims: [usize; 2],
    dimension: usize,
    error: f64,
    galerkin: f64,
}

/// Relative error against basis dimension for every contrast, with
/// least-squares slopes over the pre-plateau window.
pub fn run_contrast_sweep(cfg: &ExperimentConfig, cache: &Cache) -> Result<StudyResult> {
    let s = &cfg.contrast_sweep;
    let mut result = new_result("contrast-sweep", &cfg.hash());
    let bench = Benchmark::new(cfg)?;
    let mut runs: Vec<Vec<Row>> = Vec::new();
    for &contrast in &s.contrasts {
        let clock = Clock::start();
        let op = bench.operator(contrast)?;
        let u = bench.overkill(&op)?;
        let patches = bench.prepare(&op, contrast, s.width, cache)?;
        let mut rows = Vec::new();
        for &dims in &s.schedule {
            if patches.iter().zip(dims).any(|(p, m)| m > p.spectrum.retained()) {
                log::warn!("{}: spectrum exhausted before dims {dims:?}", contrast_label(contrast));
                break;
            }
            let (basis, system, sol) = bench.solve_global(&op, &patches, BasisMode::Spectral, &dims)?;
            let error = relative_error(&op, &sol.u0, &u)?;
            let galerkin = worst_galerkin(&op, &basis, &system, &sol, &u)?;
            rows.push(Row { dims, dimension: basis.dimension(), error, galerkin });
        }
        result.timings.push((contrast_label(contrast), clock.secs()));
        log::info!("contrast {} done in {:.1}s", contrast_label(contrast), clock.secs());
        runs.push(rows);
    }

    let homogeneous: Vec<bool> = s.contrasts.iter().map(|c| c[0] == c[1]).collect();
    let plateau = runs
        .iter()
        .zip(&homogeneous)
        .filter(|(_, &h)| h)
        .flat_map(|(r, _)| r.iter().map(|r| r.error))
        .fold(f64::INFINITY, f64::min);
    let threshold = if plateau.is_finite() { s.plateau_factor * plateau } else { 0.0 };
    let pre = |r: &Row| r.error > threshold;

    let mut long = Table::new(
        "errors",
        &["contrast", "m1", "m2", "dimension", "rel_error", "log10_error", "galerkin_max", "pre_plateau"],
    );
    let mut plot = Plot {
        name: "error-vs-dimension".into(),
        title: "Relative energy error against basis dimension".into(),
        x_label: "dimension".into(),
        y_label: "relative error".into(),
        log_y: true,
        series: Vec::new(),
    };
    for (contrast, rows) in s.contrasts.iter().zip(&runs) {
        let label = contrast_label(*contrast);
        for r in rows {
            long.push(vec![
                label.clone().into(),
                r.dims[0].into(),
                r.dims[1].into(),
                r.dimension.into(),
                r.error.into(),
                r.error.log10().into(),
                r.galerkin.into(),
                pre(r).into(),
            ]);
        }
        plot.series.push(Series { label, points: rows.iter().map(|r| (r.dimension as f64, r.error)).collect() });
    }

    // Wide table: one row per schedule entry, one column per contrast.
    let mut columns = vec!["m1".to_string(), "m2".to_string(), "dimension".to_string()];
    columns.extend(s.contrasts.iter().map(|c| contrast_label(*c)));
    columns.extend(["spread".to_string(), "shared_pre_plateau".to_string()]);
    let mut wide = Table { name: "matrix".into(), columns, rows: Vec::new() };
    let mut worst_spread: f64 = 0.0;
    let mut spread_rows = 0;
    for (i, dims) in s.schedule.iter().enumerate() {
        let Some(first) = runs.iter().find_map(|r| r.get(i)) else { break };
        let mut row: Vec<Cell> = vec![dims[0].into(), dims[1].into(), first.dimension.into()];
        row.extend(runs.iter().map(|r| r.get(i).map(|r| r.error).into()));
        let contrasted: Vec<Option<&Row>> =
            runs.iter().zip(&homogeneous).filter(|(_, &h)| !h).map(|(r, _)| r.get(i)).collect();
        let shared = !contrasted.is_empty() && contrasted.iter().all(|r| r.is_some_and(pre));
        let spread = shared.then(|| {
            let logs: Vec<f64> = contrasted.iter().map(|r| r.unwrap().error.log10()).collect();
            logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - logs.iter().cloned().fold(f64::INFINITY, f64::min)
        });
        if let Some(v) = spread {
            worst_spread = worst_spread.max(v);
            spread_rows += 1;
        }
        row.push(spread.into());
        row.push(shared.into());
        wide.rows.push(row);
    }

    let mut slopes = Vec::new();
    let mut slope_table = Table::new("slopes", &["contrast", "points", "slope", "ok"]);
    for ((contrast, rows), &h) in s.contrasts.iter().zip(&runs).zip(&homogeneous) {
        if h {
            continue;
        }
        let label = contrast_label(*contrast);
        let points: Vec<(f64, f64)> =
            rows.iter().filter(|r| pre(r)).map(|r| (r.dimension as f64, r.error.log10())).collect();
        let slope = ls_slope(&points);
        let ok = slope.is_some_and(|v| v <= s.max_slope);
        slope_table.push(vec![label.clone().into(), points.len().into(), slope.into(), ok.into()]);
        result.checks.push(Check::new(
            &format!("slope {label}"),
            slope.unwrap_or(f64::NAN),
            s.max_slope,
            ok,
            format!("least-squares slope of log10 error over {} pre-plateau rows", points.len()),
        ));
        if let Some(v) = slope {
            slopes.push(v);
        }
    }
    if !slopes.is_empty() {
        let steep = slopes.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let shallow = slopes.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        let ratio = steep / shallow;
        result.checks.push(Check::new(
            "slope-ratio",
            ratio,
            s.slope_ratio,
            slopes.iter().all(|&v| v < 0.0) && ratio <= s.slope_ratio,
            "steepest over shallowest pre-plateau slope",
        ));
    }
    result.checks.push(Check::new(
        "spread",
        worst_spread,
        s.max_spread,
        spread_rows > 0 && worst_spread <= s.max_spread,
        format!("largest spread of log10 error over {spread_rows} shared pre-plateau rows"),
    ));
    let galerkin = runs.iter().flatten().filter(|r| r.error >= GALERKIN_ERROR_FLOOR).map(|r| r.galerkin).fold(0.0, f64::max);
    result.checks.push(Check::new(
        "galerkin",
        galerkin,
        GALERKIN_TOL,
        galerkin <= GALERKIN_TOL,
        format!("largest orthogonality ratio over rows with error >= {GALERKIN_ERROR_FLOOR:e}"),
    ));
    result.tables.extend([long, wide, slope_table]);
    result.plots.push(plot);
    Ok(result)
}
