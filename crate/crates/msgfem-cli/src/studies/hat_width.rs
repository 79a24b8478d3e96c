use super::{new_result, Clock};
use crate::config::{contrast_label, ExperimentConfig};
use crate::emit::{Check, Plot, Series, StudyResult, Table};
use crate::problem::{Benchmark, Cache, PatchTiming};
use msgfem::global::{relative_error, BasisMode};
use msgfem::local::{boundary_chains, hat_count, spectral_entry_count};
use msgfem::Result;

/// Spectral-system size, timings and global error per hat width at fixed
/// spectral dimension.
pub fn run_hat_width(cfg: &ExperimentConfig, cache: &Cache) -> Result<StudyResult> {
    let s = &cfg.hat_width;
    let mut result = new_result("hat-width", &cfg.hash());
    let bench = Benchmark::new(cfg)?;
    let chains: Vec<_> = bench.cover.patches.iter().map(|p| boundary_chains(&bench.mesh, &p.omega_star).0).collect();

    let mut sizes = Table::new(
        "sizes",
        &[
            "contrast",
            "width",
            "patch",
            "n_boundary",
            "hats",
            "expected_hats",
            "formula_hats",
            "entries",
            "entry_ratio",
            "mn_squared",
            "retained",
            "build_secs",
            "fill_secs",
            "build_ratio",
            "fill_ratio",
            "cached",
        ],
    );
    let mut errors = Table::new("errors", &["contrast", "width", "m1", "m2", "dimension", "rel_error"]);
    let mut plot = Plot {
        name: "error-vs-width".into(),
        title: "Relative error against hat width".into(),
        x_label: "hat width".into(),
        y_label: "relative error".into(),
        log_y: true,
        series: Vec::new(),
    };
    let mut count_ok = true;
    let mut entry_ok = true;
    for &contrast in &s.contrasts {
        let label = contrast_label(contrast);
        let clock = Clock::start();
        let op = bench.operator(contrast)?;
        let u = bench.overkill(&op)?;
        let mut series = Series { label: label.clone(), points: Vec::new() };
        // Timings of the first width, per patch.
        let mut base: Vec<PatchTiming> = Vec::new();
        for &k in &s.widths {
            let prepared = bench.prepare_timed(&op, contrast, k, cache)?;
            for (i, (data, timing)) in prepared.iter().enumerate() {
                let n = data.space.n_boundary;
                let m = data.space.len();
                if base.len() <= i {
                    base.push(*timing);
                }
                let expected: usize = chains[i].iter().map(|c| hat_count(c.nodes.len(), k, c.closed)).sum();
                let formula = n.div_ceil(k.div_ceil(2));
                let entries = data.matrices.entries;
                let n_entries = spectral_entry_count(n);
                let entry_ratio = entries as f64 / n_entries as f64;
                let mn = (m as f64 / n as f64).powi(2);
                count_ok &= m == expected;
                // M(M+1)/(N(N+1)) is (M/N)² up to the factor (1 + 1/M)/(1 + 1/N).
                entry_ok &= entries == spectral_entry_count(m) && entry_ratio <= mn * (1.0 + 1.0 / m as f64);
                let (b0, f0) = (base[i].build, base[i].fill);
                sizes.push(vec![
                    label.clone().into(),
                    k.into(),
                    i.into(),
                    n.into(),
                    m.into(),
                    expected.into(),
                    formula.into(),
                    entries.into(),
                    entry_ratio.into(),
                    mn.into(),
                    data.spectrum.retained().into(),
                    timing.build.into(),
                    timing.fill.into(),
                    (timing.build / b0).into(),
                    (timing.fill / f0).into(),
                    timing.cached.into(),
                ]);
            }
            let patches: Vec<_> = prepared.into_iter().map(|(d, _)| d).collect();
            let (basis, _, sol) = bench.solve_global(&op, &patches, BasisMode::Spectral, &s.dims)?;
            let err = relative_error(&op, &sol.u0, &u)?;
            errors.push(vec![
                label.clone().into(),
                k.into(),
                s.dims[0].into(),
                s.dims[1].into(),
                basis.dimension().into(),
                err.into(),
            ]);
            series.points.push((k as f64, err));
            log::info!("{label} width {k}: error {err:e}");
        }
        let hi = series.points.iter().map(|p| p.1).fold(0.0, f64::max);
        let lo = series.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        result.checks.push(Check::new(
            &format!("flat {label}"),
            hi / lo,
            s.max_ratio,
            hi / lo <= s.max_ratio,
            format!("max/min relative error over {} widths", series.points.len()),
        ));
        plot.series.push(series);
        result.timings.push((label, clock.secs()));
    }
    result.checks.push(Check::new(
        "hat-count",
        count_ok as u8 as f64,
        1.0,
        count_ok,
        "local solves equal the per-chain hat count for every width and patch",
    ));
    result.checks.push(Check::new(
        "entry-count",
        entry_ok as u8 as f64,
        1.0,
        entry_ok,
        "spectral-matrix entries equal M(M+1)/2 and shrink like (M/N)^2",
    ));
    result.tables.extend([sizes, errors]);
    result.plots.push(plot);
    Ok(result)
}
