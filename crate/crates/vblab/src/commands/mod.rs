mod diagnose;
mod fit;
mod normality;
mod simulate;
mod sweep;

pub use diagnose::diagnose;
pub use fit::{fit, run_fit, FitSummary};
pub use normality::normality;
pub use simulate::simulate;
pub use sweep::sweep;

use std::path::PathBuf;
use std::time::Instant;

use crate::cli::DataArgs;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::io;

/// Dataset named by `--data`, else `dataset.csv` in the output directory.
fn load_dataset(cfg: &ExperimentConfig, data: &DataArgs) -> Result<(PathBuf, Vec<f64>)> {
    let path = data
        .data
        .clone()
        .unwrap_or_else(|| cfg.out_path("dataset.csv"));
    let ys = io::read_dataset(&path, cfg.model.integer_data())?;
    Ok((path, ys))
}

fn elapsed_ms(start: Instant, enabled: bool) -> Option<f64> {
    enabled.then(|| start.elapsed().as_secs_f64() * 1e3)
}
