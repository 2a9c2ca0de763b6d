//! Command-line sweeps over the coexistence link simulator: configuration,
//! parallel execution, result files and the self-test suite.

pub mod config;
pub mod exec;
pub mod output;
pub mod selftest;

use std::fs;
use std::path::{Path, PathBuf};

use coexsim_core::engine::{estimate_per_with, PerPoint};

pub use config::{ConfigError, RunConfig};
pub use exec::PoolExecutor;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("simulation: {0}")]
    Sim(#[from] coexsim_core::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl Error {
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs every cell of `cfg` on `workers` threads, calling `on_point` as each
/// finishes.
pub fn run_sweep(cfg: &RunConfig, workers: usize, mut on_point: impl FnMut(&PerPoint)) -> Result<Vec<PerPoint>, Error> {
    let exec = PoolExecutor::new(workers)?;
    let mut results = Vec::new();
    for p in cfg.points() {
        let r = estimate_per_with(&p, &cfg.stop, &exec)?;
        on_point(&r);
        results.push(r);
    }
    Ok(results)
}

/// Creates the output directory and writes the plot script, so an unusable
/// path fails before any simulation time is spent.
pub fn prepare_output(cfg: &RunConfig) -> Result<(), Error> {
    fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    let plot = cfg.output.join(output::PLOT_NAME);
    fs::write(&plot, output::plot_script(&cfg.rates, &cfg.erasures)).map_err(io_err(&plot))
}

pub fn write_results(cfg: &RunConfig, results: &[PerPoint]) -> Result<PathBuf, Error> {
    let path = cfg.output.join(output::CSV_NAME);
    fs::write(&path, output::csv(results)).map_err(io_err(&path))?;
    Ok(path)
}

/// Full run: output files plus one summary line per cell on stdout.
pub fn run(cfg: &RunConfig, workers: usize) -> Result<Vec<PerPoint>, Error> {
    prepare_output(cfg)?;
    let results = run_sweep(cfg, workers, |p| println!("{}", output::summary_line(p)))?;
    write_results(cfg, &results)?;
    Ok(results)
}
