use std::path::PathBuf;

use vblab_core::models;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::io::{write_dataset, DatasetMeta};

pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let n = cfg.single_n()?;
    let theta = cfg.theta_star()?;
    let model = cfg.model.build();
    let ys = models::simulate(model.as_ref(), theta, n, cfg.seed())?;
    cfg.ensure_output_dir()?;
    let path = cfg.out_path("dataset.csv");
    write_dataset(&path, &ys, cfg.model.integer_data())?;
    let meta_path = DatasetMeta::path_for(&path);
    DatasetMeta::new(cfg.model.as_str(), theta, cfg.seed(), n).write(&meta_path)?;
    Ok(vec![path, meta_path])
}
