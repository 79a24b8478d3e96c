use clap::{Parser, Subcommand};
use msgfem_cli::config::ExperimentConfig;
use msgfem_cli::emit::{emit, Formats, StudyResult};
use msgfem_cli::problem::Cache;
use msgfem_cli::studies;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "msgfem", version, about = "MS-GFEM experiment harness")]
struct Cli {
    #[command(subcommand)]
    study: Study,
    /// TOML configuration; desk-scale defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Per-patch artifacts go to `<out>/cache`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "csv,svg")]
    format: Formats,
    /// Switch geometry, mesh and schedules to the large configuration.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Do not read or write per-patch artifacts.
    #[arg(long, global = true)]
    no_cache: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Study {
    /// A-posteriori error over nested meshes.
    MeshStudy,
    /// One global solve against the overkill solution.
    Solve,
    /// Error against basis dimension for every contrast.
    ContrastSweep,
    /// Error and system size against hat width.
    HatWidth,
    /// Eigenvalue decay on concentric squares.
    EigenDecay,
    /// Oversampled-GFEM against MS-GFEM.
    OversampledCompare,
}

fn run(cli: &Cli) -> Result<StudyResult, Box<dyn std::error::Error>> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.paper_scale {
        cfg.apply_paper_scale();
        cfg.validate()?;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cache = if cli.no_cache { Cache::disabled() } else { Cache::at(&cli.out.join("cache")) };
    log::info!("configuration {}", cfg.hash());
    let result = match cli.study {
        Study::MeshStudy => studies::run_mesh_study(&cfg)?,
        Study::Solve => studies::run_solve(&cfg, &cache)?,
        Study::ContrastSweep => studies::run_contrast_sweep(&cfg, &cache)?,
        Study::HatWidth => studies::run_hat_width(&cfg, &cache)?,
        Study::EigenDecay => studies::run_eigen_decay(&cfg)?,
        Study::OversampledCompare => studies::run_oversampled_compare(&cfg, &cache)?,
    };
    for path in emit(&result, &cli.out, cli.format)? {
        println!("wrote {}", path.display());
    }
    Ok(result)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(result) => {
            for c in &result.checks {
                println!("{:<4} {:<40} {:>12.4e} (threshold {:e})", if c.pass { "pass" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            for (phase, secs) in &result.timings {
                println!("time {phase:<36} {secs:>10.1}s");
            }
            if result.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
