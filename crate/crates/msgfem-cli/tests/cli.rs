use msgfem::Error;
use msgfem_cli::config::{ConfigError, ExperimentConfig};
use msgfem_cli::emit::{csv_string, emit, svg_string, Formats, Plot, Series, StudyResult, Table};
use msgfem_cli::problem::{Benchmark, Cache};
use msgfem_cli::studies::{self, inversions, ls_slope};

const SMALL: &str = r#"
[mesh]
nx = 40
ny = 20

[solve]
dims = [5, 2]
export_solution = false

[contrast_sweep]
contrasts = [[1.0, 1.0], [100.0, 1.0], [1.0, 100.0]]
schedule = [[2, 1], [4, 2], [6, 3]]

[hat_width]
widths = [1, 3]
dims = [5, 2]
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMALL).unwrap()
}

#[test]
fn parse_errors_carry_line_numbers() {
    let err = ExperimentConfig::from_toml("[mesh]\nnx = 40\nny = \"wide\"\n").unwrap_err();
    assert!(matches!(err, ConfigError::Parse(_)));
    let msg = err.to_string();
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("ny"), "{msg}");
}

#[test]
fn unknown_keys_and_invalid_values_are_rejected() {
    let err = ExperimentConfig::from_toml("[mesh]\nnz = 4\n").unwrap_err();
    assert!(err.to_string().contains("nz"), "{err}");
    let err = ExperimentConfig::from_toml("[mystery]\n").unwrap_err();
    assert!(err.to_string().contains("mystery"), "{err}");
    for bad in [
        "[mesh_study]\nlevels = 1\n",
        "[contrast_sweep]\nschedule = [[5, 2], [5, 4]]\n",
        "[hat_width]\nwidths = [1, 4]\n",
        "[hat_width]\nwidths = [5, 3]\n",
        "[eigen_decay]\ninner = [5.0]\n",
        "[solve]\ncontrast = [0.0, 1.0]\n",
        "[geometry]\nwidth = -1.0\n",
    ] {
        assert!(matches!(ExperimentConfig::from_toml(bad), Err(ConfigError::Invalid(_))), "{bad}");
    }
    let missing = ExperimentConfig::load(std::path::Path::new("/nonexistent/x.toml")).unwrap_err();
    assert!(matches!(missing, ConfigError::Read { .. }));
}

#[test]
fn hash_is_stable_and_distinguishes_configs() {
    let a = small();
    let b = ExperimentConfig::from_toml(&a.to_toml()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 16);
    assert_ne!(a.hash(), ExperimentConfig::default().hash());
    let paper = ExperimentConfig::paper_scale();
    paper.validate().unwrap();
    assert_ne!(paper.hash(), ExperimentConfig::default().hash());
    // Shipped configurations match the built-in ones.
    for (name, expected) in [("desk.toml", ExperimentConfig::default()), ("paper.toml", paper)] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        assert_eq!(ExperimentConfig::load(&path).unwrap(), expected, "{name}");
    }
}

#[test]
fn formats_parse() {
    assert_eq!("csv,svg".parse::<Formats>().unwrap(), Formats { csv: true, svg: true });
    assert_eq!("svg".parse::<Formats>().unwrap(), Formats { csv: false, svg: true });
    assert!("png".parse::<Formats>().is_err());
    assert!("".parse::<Formats>().is_err());
}

#[test]
fn empty_study_emits_header_only_csv() {
    let mut r = StudyResult::new("empty", "0123456789abcdef");
    r.tables.push(Table::new("rows", &["a", "b"]));
    let text = csv_string(&r, &r.tables[0]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with("# msgfem-csv v1 study=empty table=rows config=0123456789abcdef"));
    assert_eq!(lines[1], "a,b");
}

#[test]
fn emit_is_deterministic_and_reports_io_errors() {
    let mut r = StudyResult::new("demo", "feedfacefeedface");
    let mut t = Table::new("rows", &["label", "value", "ok"]);
    t.push(vec!["x, quoted".into(), 1.5e-7.into(), true.into()]);
    t.push(vec!["y".into(), None.into(), false.into()]);
    r.tables.push(t);
    r.plots.push(Plot {
        name: "p".into(),
        title: "demo".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        log_y: true,
        series: vec![
            Series { label: "a".into(), points: vec![(1.0, 1e-3), (2.0, 1e-5)] },
            Series { label: "b".into(), points: vec![(1.0, 1e-2), (2.0, 1e-4)] },
        ],
    });
    let dir = tempfile::tempdir().unwrap();
    let both = Formats { csv: true, svg: true };
    let first = emit(&r, dir.path(), both).unwrap();
    let bytes: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
    let second = emit(&r, dir.path(), both).unwrap();
    assert_eq!(first, second);
    for (p, b) in second.iter().zip(&bytes) {
        assert_eq!(&std::fs::read(p).unwrap(), b);
    }
    let names: Vec<String> = first.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert!(names.contains(&"demo-rows-feedfacefeedface.csv".to_string()));
    assert!(names.contains(&"demo-checks-feedfacefeedface.csv".to_string()));
    assert!(names.contains(&"demo-p-feedfacefeedface.svg".to_string()));
    let csv = std::fs::read_to_string(dir.path().join("demo-rows-feedfacefeedface.csv")).unwrap();
    assert!(csv.contains("\"x, quoted\",1.5e-7,pass"), "{csv}");
    let svg = svg_string(&r, &r.plots[0]);
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("config=feedfacefeedface"));

    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    assert!(emit(&r, &file.join("sub"), both).is_err());
}

#[test]
fn helpers() {
    assert_eq!(ls_slope(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]), Some(2.0));
    assert_eq!(ls_slope(&[(0.0, 1.0)]), None);
    assert_eq!(ls_slope(&[(1.0, 1.0), (1.0, 2.0)]), None);
    assert_eq!(inversions(&[3.0, 2.0, 2.5, 1.0, 1.5]), 2);
    assert_eq!(inversions(&[]), 0);
}

#[test]
fn mesh_study_checks_budget_before_allocating() {
    let mut cfg = small();
    cfg.mesh_study.max_elements = 1000;
    assert!(matches!(studies::run_mesh_study(&cfg), Err(Error::Resource(_))));
}

#[test]
fn second_run_reuses_cached_patches() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::at(dir.path());
    let bench = Benchmark::new(&cfg).unwrap();
    let op = bench.operator([1.0, 100.0]).unwrap();
    let first = bench.prepare_timed(&op, [1.0, 100.0], 3, &cache).unwrap();
    assert!(first.iter().all(|(_, t)| !t.cached));
    let second = bench.prepare_timed(&op, [1.0, 100.0], 3, &cache).unwrap();
    assert!(second.iter().all(|(_, t)| t.cached));
    for ((a, _), (b, _)) in first.iter().zip(&second) {
        assert_eq!(a.spectrum.eigenvalues, b.spectrum.eigenvalues);
    }
    // A different contrast misses.
    let op2 = bench.operator([100.0, 1.0]).unwrap();
    let other = bench.prepare_timed(&op2, [100.0, 1.0], 3, &cache).unwrap();
    assert!(other.iter().all(|(_, t)| !t.cached));

    let r1 = studies::run_solve(&cfg, &cache).unwrap();
    let r2 = studies::run_solve(&cfg, &Cache::disabled()).unwrap();
    assert_eq!(r1.table("summary").unwrap().rows[0][7], r2.table("summary").unwrap().rows[0][7]);
}

#[test]
fn small_studies_report_checks() {
    let cfg = small();
    let cache = Cache::disabled();
    let solve = studies::run_solve(&cfg, &cache).unwrap();
    assert!(solve.all_pass(), "{:?}", solve.checks);

    let sweep = studies::run_contrast_sweep(&cfg, &cache).unwrap();
    let matrix = sweep.table("matrix").unwrap();
    assert_eq!(matrix.columns.len(), 3 + 3 + 2);
    assert_eq!(sweep.plots[0].series.len(), 3);
    assert!(sweep.check("galerkin").unwrap().pass);
    // Same configuration and threads: identical rows.
    let again = studies::run_contrast_sweep(&cfg, &cache).unwrap();
    for (a, b) in sweep.table("errors").unwrap().rows.iter().zip(&again.table("errors").unwrap().rows) {
        let (x, y) = (a[4].as_f64().unwrap(), b[4].as_f64().unwrap());
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300), "{x} {y}");
    }

    let hats = studies::run_hat_width(&cfg, &cache).unwrap();
    assert!(hats.check("hat-count").unwrap().pass);
    assert!(hats.check("entry-count").unwrap().pass);
}
