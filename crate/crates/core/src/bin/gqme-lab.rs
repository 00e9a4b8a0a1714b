use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use gqme_lab::config::RunConfig;
use gqme_lab::pipeline::run_pipeline;
use gqme_lab::Error;

/// Spin-boson population dynamics: quasiclassical trajectory ensembles,
/// memory-kernel extraction, generalized master equation propagation and
/// long-time equilibrium analysis.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,

    /// Size of the worker thread pool (default: number of cores, or
    /// GQME_LAB_WORKERS)
    #[arg(long)]
    workers: Option<usize>,

    /// Override io.output_dir from the config
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let workers = cli.workers.or_else(|| {
        std::env::var("GQME_LAB_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} workers: {e}");
            return ExitCode::from(2);
        }
    }

    let cfg = match RunConfig::from_path(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    match run_pipeline(&cfg, cli.output_dir.as_deref()) {
        Ok(manifest) => {
            for p in &manifest.points {
                println!("[{}] direct P+(T) = {:.6}", p.tag, p.direct_p_plus_final);
                if let Some(g) = p.gqme_p_plus_final {
                    println!("[{}] gqme   P+(T) = {g:.6}", p.tag);
                }
                if let Some(s) = &p.stationary {
                    println!("[{}] stationary P+(inf) = {:.6}", p.tag, s.p_plus_inf);
                }
                println!(
                    "[{}] ergodic P+ = {:.6}   thermal benchmark P+ = {:.6}",
                    p.tag, p.ergodic_p_plus, p.benchmark_p_plus
                );
            }
            println!("wrote {} files", manifest.output_files.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidSpec(_) => ExitCode::from(2),
                Error::TrajectoryBlowup { .. } | Error::Instability { .. } => ExitCode::from(3),
                Error::DegenerateStationary(_) => ExitCode::from(4),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
