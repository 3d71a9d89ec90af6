use std::path::Path;

use anyhow::{Context, Result};
use latsmooth::data::SubsampleMode;
use latsmooth::harness::{LimitsConfig, RunConfig, SweepConfig, SweepGrid};
use serde::{Deserialize, Serialize};

/// Everything a config file may hold. Top-level keys are the run config;
/// `[sweep]` and `[limits]` only matter to their subcommands.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub sweep: SweepSection,
    pub limits: LimitsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub grid: SweepGrid,
    pub budget: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = SweepConfig::default();
        Self { grid: d.grid, budget: d.budget }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitsSection {
    pub ratios: Vec<f64>,
    pub modes: Vec<SubsampleMode>,
    pub repeats: usize,
}

impl Default for LimitsSection {
    fn default() -> Self {
        let d = LimitsConfig::default();
        Self { ratios: d.ratios, modes: d.modes, repeats: d.repeats }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str::<FileConfig>(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => FileConfig::default(),
        };
        // stage seeds always follow the run seed
        let s = seed.unwrap_or(cfg.run.seed);
        cfg.run.reseed(s);
        Ok(cfg)
    }
}
