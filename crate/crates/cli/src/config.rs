//! Flat `key = value` configuration files.
//!
//! Keys are the field names of [`PipelineConfig`]. Blank lines and text after
//! `#` are ignored. Unknown keys and unparsable values are errors.

use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use chromaforest::PipelineConfig;

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| anyhow!("invalid value '{raw}' for '{key}': {e}"))
}

/// Sets one field by name.
pub fn set_field(cfg: &mut PipelineConfig, key: &str, raw: &str) -> Result<()> {
    match key {
        "target_superpixel_size" => cfg.target_superpixel_size = value(key, raw)?,
        "clusters" => cfg.clusters = value(key, raw)?,
        "trees" => cfg.trees = value(key, raw)?,
        "dims_per_node" => cfg.dims_per_node = value(key, raw)?,
        "thresholds_per_dim" => cfg.thresholds_per_dim = value(key, raw)?,
        "min_gain" => cfg.min_gain = value(key, raw)?,
        "max_depth" => cfg.max_depth = value(key, raw)?,
        "min_node" => cfg.min_node = value(key, raw)?,
        "bootstrap" => cfg.bootstrap = value(key, raw)?,
        "spatial_bandwidth" => cfg.spatial_bandwidth = value(key, raw)?,
        "range_bandwidth" => cfg.range_bandwidth = value(key, raw)?,
        "min_region" => cfg.min_region = value(key, raw)?,
        "cg_tolerance" => cfg.cg_tolerance = value(key, raw)?,
        "cg_max_iterations" => cfg.cg_max_iterations = value(key, raw)?,
        "seed" => cfg.seed = value(key, raw)?,
        _ => bail!("unknown key '{key}'"),
    }
    Ok(())
}

/// Applies every assignment in `text` on top of `cfg`.
pub fn apply_config_text(cfg: &mut PipelineConfig, text: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("expected 'key = value'"))
            .with_context(|| format!("line {}", i + 1))?;
        set_field(cfg, key.trim(), val.trim()).with_context(|| format!("line {}", i + 1))?;
    }
    Ok(())
}
