use super::{inversions, new_result, Clock};
use crate::config::{contrast_label, ExperimentConfig};
use crate::emit::{Check, Plot, Series, StudyResult, Table};
use crate::problem::{Benchmark, Cache};
use msgfem::global::{relative_error, BasisMode};
use msgfem::Result;

/// Smallest bases at which the spectral basis must not lose.
const SMALL_BASES: usize = 3;

/// Oversampled-GFEM on hat extensions of each width against MS-GFEM of
/// the same total dimension built from the narrowest-hat spectrum.
pub fn run_oversampled_compare(cfg: &ExperimentConfig, cache: &Cache) -> Result<StudyResult> {
    let s = &cfg.oversampled_compare;
    let mut result = new_result("oversampled-compare", &cfg.hash());
    let bench = Benchmark::new(cfg)?;
    let mut table = Table::new(
        "errors",
        &["contrast", "width", "m1", "m2", "dimension", "kept", "oversampled", "ms_gfem", "ratio"],
    );
    let mut plot = Plot {
        name: "error-vs-dimension".into(),
        title: "Oversampled-GFEM and MS-GFEM at equal dimension".into(),
        x_label: "dimension".into(),
        y_label: "relative error".into(),
        log_y: true,
        series: Vec::new(),
    };
    for &contrast in &s.contrasts {
        let label = contrast_label(contrast);
        let clock = Clock::start();
        let op = bench.operator(contrast)?;
        let u = bench.overkill(&op)?;
        let spectral = bench.prepare(&op, contrast, s.spectral_width, cache)?;
        // (dimension, oversampled, ms-gfem)
        let mut rows: Vec<(usize, f64, f64)> = Vec::new();
        for &k in &s.widths {
            let patches = bench.prepare(&op, contrast, k, cache)?;
            let (basis, _, over) = bench.solve_global(&op, &patches, BasisMode::Oversampled, &[])?;
            // Same count per patch; the constant takes one slot where it is added.
            let dims: Vec<usize> = patches
                .iter()
                .zip(&spectral)
                .map(|(p, sp)| {
                    let m = p.space.len() - usize::from(p.patch.kind.needs_constant());
                    m.min(sp.spectrum.retained())
                })
                .collect();
            let (ms_basis, _, ms) = bench.solve_global(&op, &spectral, BasisMode::Spectral, &dims)?;
            if ms_basis.dimension() != basis.dimension() {
                log::warn!(
                    "{label} width {k}: spectrum too short, dimension {} against {}",
                    ms_basis.dimension(),
                    basis.dimension()
                );
            }
            let e_over = relative_error(&op, &over.u0, &u)?;
            let e_ms = relative_error(&op, &ms.u0, &u)?;
            table.push(vec![
                label.clone().into(),
                k.into(),
                basis.per_patch[0].into(),
                basis.per_patch[1].into(),
                basis.dimension().into(),
                over.kept.len().into(),
                e_over.into(),
                e_ms.into(),
                (e_over / e_ms).into(),
            ]);
            rows.push((basis.dimension(), e_over, e_ms));
            log::info!("{label} width {k}: oversampled {e_over:e}, ms-gfem {e_ms:e}");
        }
        rows.sort_by_key(|r| r.0);
        plot.series.push(Series {
            label: format!("oversampled {label}"),
            points: rows.iter().map(|r| (r.0 as f64, r.1)).collect(),
        });
        plot.series.push(Series { label: format!("ms-gfem {label}"), points: rows.iter().map(|r| (r.0 as f64, r.2)).collect() });

        if let Some(&(_, o, m)) = rows.last() {
            let ratio = o.max(m) / o.min(m);
            result.checks.push(Check::new(
                &format!("largest-basis {label}"),
                ratio,
                s.max_ratio,
                ratio <= s.max_ratio,
                "larger over smaller error at the largest basis",
            ));
        }
        if contrast[0] > contrast[1] {
            let small = &rows[..rows.len().min(SMALL_BASES)];
            let losses = small.iter().filter(|r| r.2 > r.1).count();
            result.checks.push(Check::new(
                &format!("small-bases {label}"),
                losses as f64,
                0.0,
                losses == 0,
                format!("of the {} smallest bases, those where MS-GFEM is worse", small.len()),
            ));
        }
        for (name, errs) in [
            ("oversampled", rows.iter().map(|r| r.1).collect::<Vec<_>>()),
            ("ms-gfem", rows.iter().map(|r| r.2).collect()),
        ] {
            let inv = inversions(&errs);
            let overall = errs.len() >= 2 && errs[errs.len() - 1] < errs[0];
            result.checks.push(Check::new(
                &format!("monotone {name} {label}"),
                inv as f64,
                1.0,
                inv <= 1 && overall,
                "increases of error between adjacent dimensions",
            ));
        }
        result.timings.push((label, clock.secs()));
    }
    result.tables.push(table);
    result.plots.push(plot);
    Ok(result)
}
