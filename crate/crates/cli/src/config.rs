//! Experiment flags and the JSON config file that mirrors them.
//!
//! Flags given on the command line override values from `--config`, which in
//! turn override the built-in defaults.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use gp_sinkhorn::experiments::ExperimentConfig;
use gp_sinkhorn::kernels::KernelFamily;
use serde::Deserialize;

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// JSON file with any of the keys m, n, eps, dims, seed, ground_truth_n, k0, k1.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Repetitions per (d, n) cell.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: Option<u64>,
    /// Comma-separated marginal counts.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n: Option<Vec<usize>>,
    /// Comma-separated regularization strengths.
    #[arg(long, value_delimiter = ',', num_args = 1.., value_parser = crate::positive)]
    pub eps: Option<Vec<f64>>,
    /// Comma-separated input dimensions.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ground_truth_n: Option<usize>,
    #[arg(long)]
    pub k0: Option<String>,
    #[arg(long)]
    pub k1: Option<String>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Exit with status 4 when a group's mean error exceeds its bound.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "GP_SINKHORN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub m: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub eps: Option<Vec<f64>>,
    pub dims: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub ground_truth_n: Option<usize>,
    pub k0: Option<String>,
    pub k1: Option<String>,
}

impl ExperimentArgs {
    pub fn resolve(&self, dimension_scan: bool) -> anyhow::Result<ExperimentConfig> {
        let file: ConfigFile = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        let mut cfg = if dimension_scan {
            ExperimentConfig::dimension_scan_default()
        } else {
            ExperimentConfig::convergence_default()
        };
        if let Some(m) = self.m.map(|m| m as usize).or(file.m) {
            cfg.repetitions = m;
        }
        if let Some(n) = self.n.clone().or(file.n) {
            cfg.n_values = n;
        }
        if let Some(eps) = self.eps.clone().or(file.eps) {
            cfg.epsilons = eps;
        }
        if let Some(dims) = self.dims.clone().or(file.dims) {
            cfg.dims = dims;
        }
        if let Some(seed) = self.seed.or(file.seed) {
            cfg.base_seed = seed;
        }
        if let Some(gt) = self.ground_truth_n.or(file.ground_truth_n) {
            cfg.ground_truth_n = gt;
        }
        if let Some(k) = self.k0.as_deref().or(file.k0.as_deref()) {
            cfg.kernel0 = KernelFamily::parse(k)?;
        }
        if let Some(k) = self.k1.as_deref().or(file.k1.as_deref()) {
            cfg.kernel1 = KernelFamily::parse(k)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
