//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the
//! [`PipelineConfig`] field names; unknown keys are an error.

use std::path::Path;

use clap::Args;
use semtrails::model::PipelineConfig;

use crate::CliError;

/// Threshold flags shared by `build` and `validate`. Flags beat the config
/// file, which beats the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat key=value file with pipeline thresholds
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Trail gap limit in seconds
    #[arg(long)]
    pub gap_limit_secs: Option<i64>,
    /// Minimum seconds between consecutive check-ins
    #[arg(long)]
    pub min_dwell_secs: Option<i64>,
    /// Maximum plausible speed in m/s
    #[arg(long)]
    pub max_speed_mps: Option<f64>,
    /// Radius for Wikidata linking in meters
    #[arg(long)]
    pub link_radius_m: Option<f64>,
    /// Population above which a city is big
    #[arg(long)]
    pub big_city_threshold: Option<u64>,
    /// Sphere radius for distances in meters
    #[arg(long)]
    pub earth_radius_m: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => read_config_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.gap_limit_secs {
            config.gap_limit_secs = v;
        }
        if let Some(v) = self.min_dwell_secs {
            config.min_dwell_secs = v;
        }
        if let Some(v) = self.max_speed_mps {
            config.max_speed_mps = v;
        }
        if let Some(v) = self.link_radius_m {
            config.link_radius_m = v;
        }
        if let Some(v) = self.big_city_threshold {
            config.big_city_threshold = v;
        }
        if let Some(v) = self.earth_radius_m {
            config.earth_radius_m = v;
        }
        config
            .validate()
            .map_err(|e| CliError::Usage(format!("config: {e}")))?;
        Ok(config)
    }
}

fn read_config_file(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = crate::read_to_string(path, "--config")?;
    parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn parse_config(text: &str) -> Result<PipelineConfig, String> {
    let mut config = PipelineConfig::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected key = value", i + 1));
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = || format!("line {}: bad value `{value}` for `{key}`", i + 1);
        match key {
            "gap_limit_secs" => config.gap_limit_secs = value.parse().map_err(|_| bad())?,
            "min_dwell_secs" => config.min_dwell_secs = value.parse().map_err(|_| bad())?,
            "max_speed_mps" => config.max_speed_mps = value.parse().map_err(|_| bad())?,
            "link_radius_m" => config.link_radius_m = value.parse().map_err(|_| bad())?,
            "big_city_threshold" => config.big_city_threshold = value.parse().map_err(|_| bad())?,
            "earth_radius_m" => config.earth_radius_m = value.parse().map_err(|_| bad())?,
            _ => return Err(format!("line {}: unknown key `{key}`", i + 1)),
        }
    }
    Ok(config)
}
