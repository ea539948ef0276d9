//! Experiment configuration: JSON documents or `key = value` files, with
//! command line overrides applied on top.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::coarse::CoarseKind;
use crate::error::{Error, Result};
use crate::mesh::PatternSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subdomains_per_side: usize,
    pub cells_per_subdomain_side: usize,
    pub pattern: PatternSpec,
    pub kind: CoarseKind,
    pub rtol: f64,
    pub max_iter: usize,
    /// Materialize `M⁻¹A` and compute its exact spectrum (small meshes only).
    pub verify: bool,
    /// Keep the per-subdomain generalized spectra in the report.
    pub include_spectra: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            subdomains_per_side: 4,
            cells_per_subdomain_side: 8,
            pattern: PatternSpec::Constant { value: 1.0 },
            kind: CoarseKind::NosasExact { c: DEFAULT_C },
            rtol: 1e-6,
            max_iter: 1000,
            verify: false,
            include_spectra: false,
            output: None,
        }
    }
}

pub const DEFAULT_C: f64 = 0.25;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subdomains_per_side == 0 || self.cells_per_subdomain_side == 0 {
            return Err(Error::Config("mesh sizes must be at least 1".into()));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::Config(format!("rtol must lie in (0, 1), got {}", self.rtol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        self.kind.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Partial settings from a `key = value` file or from flags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub subdomains: Option<usize>,
    pub cells: Option<usize>,
    pub pattern: Option<String>,
    pub value: Option<f64>,
    pub high: Option<f64>,
    pub low: Option<f64>,
    pub extra: Option<f64>,
    pub channels: Option<usize>,
    pub offset: Option<usize>,
    pub width: Option<usize>,
    pub raster: Option<String>,
    pub kind: Option<String>,
    pub c: Option<f64>,
    pub rtol: Option<f64>,
    pub max_iter: Option<usize>,
    pub verify: Option<bool>,
    pub include_spectra: Option<bool>,
    pub output: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = {v:?}")))
}

fn parse_bool(key: &str, v: &str, line: usize) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("line {line}: {key} expects a boolean, got {v:?}"))),
    }
}

impl ConfigOverrides {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_key_values(text: &str) -> Result<ConfigOverrides> {
        let mut o = ConfigOverrides::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, val) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
            let (key, val) = (key.trim(), val.trim().trim_matches('"'));
            match key {
                "subdomains" | "subdomains_per_side" => o.subdomains = Some(parse_value(key, val, line)?),
                "cells" | "cells_per_subdomain_side" => o.cells = Some(parse_value(key, val, line)?),
                "pattern" => o.pattern = Some(val.to_string()),
                "value" => o.value = Some(parse_value(key, val, line)?),
                "high" => o.high = Some(parse_value(key, val, line)?),
                "low" => o.low = Some(parse_value(key, val, line)?),
                "extra" => o.extra = Some(parse_value(key, val, line)?),
                "channels" => o.channels = Some(parse_value(key, val, line)?),
                "offset" => o.offset = Some(parse_value(key, val, line)?),
                "width" => o.width = Some(parse_value(key, val, line)?),
                "raster" => o.raster = Some(val.to_string()),
                "kind" => o.kind = Some(val.to_string()),
                "c" => o.c = Some(parse_value(key, val, line)?),
                "rtol" => o.rtol = Some(parse_value(key, val, line)?),
                "max_iter" => o.max_iter = Some(parse_value(key, val, line)?),
                "verify" => o.verify = Some(parse_bool(key, val, line)?),
                "include_spectra" | "spectra" => o.include_spectra = Some(parse_bool(key, val, line)?),
                "out" | "output" => o.output = Some(PathBuf::from(val)),
                other => return Err(Error::Config(format!("line {line}: unknown key {other:?}"))),
            }
        }
        Ok(o)
    }

    /// Applies the overrides to `base`.
    pub fn apply(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = base;
        if let Some(v) = self.subdomains {
            cfg.subdomains_per_side = v;
        }
        if let Some(v) = self.cells {
            cfg.cells_per_subdomain_side = v;
        }
        cfg.pattern = self.apply_pattern(&cfg.pattern)?;
        if self.kind.is_some() || self.c.is_some() {
            let name = self.kind.clone().unwrap_or_else(|| cfg.kind.name().to_string());
            let c = self.c.or(cfg.kind.threshold_constant()).unwrap_or(DEFAULT_C);
            cfg.kind = CoarseKind::from_name(&name, c).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(v) = self.rtol {
            cfg.rtol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.verify {
            cfg.verify = v;
        }
        if let Some(v) = self.include_spectra {
            cfg.include_spectra = v;
        }
        if let Some(v) = &self.output {
            cfg.output = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_pattern(&self, base: &PatternSpec) -> Result<PatternSpec> {
        let touched = self.pattern.is_some()
            || self.value.is_some()
            || self.high.is_some()
            || self.low.is_some()
            || self.extra.is_some()
            || self.channels.is_some()
            || self.offset.is_some()
            || self.width.is_some()
            || self.raster.is_some();
        if !touched {
            return Ok(base.clone());
        }
        let name = match (&self.pattern, &self.raster) {
            (Some(p), _) => p.clone(),
            (None, Some(_)) => "raster_file".to_string(),
            (None, None) => base.name().to_string(),
        };
        // parameters inherited from the base when it has the same shape
        let same = name == base.name();
        let (bh, bl) = base.contrast().filter(|_| same).unwrap_or((1e6, 1.0));
        let high = self.high.unwrap_or(bh);
        let low = self.low.unwrap_or(bl);
        let spec = match name.as_str() {
            "constant" => {
                let base_value = match base {
                    PatternSpec::Constant { value } => *value,
                    _ => 1.0,
                };
                PatternSpec::Constant { value: self.value.unwrap_or(base_value) }
            }
            "channel" => {
                let (bo, bw) = match base {
                    PatternSpec::Channel { offset, width, .. } => (*offset, *width),
                    _ => (None, 1),
                };
                PatternSpec::Channel { high, low, offset: self.offset.or(bo), width: self.width.unwrap_or(bw) }
            }
            "comb" => PatternSpec::Comb { high, low },
            "string" => {
                let h = self.high.unwrap_or(if same { bh } else { 1e12 });
                PatternSpec::String { high: h, low }
            }
            "inclusion_grid" => PatternSpec::InclusionGrid { high, low },
            "dual_stripe" => PatternSpec::DualStripe { high, low },
            "added_channels" => {
                let (be, bc, bh, bl) = match base {
                    PatternSpec::AddedChannels { extra, channels, high, low } => (*extra, *channels, *high, *low),
                    _ => (1e12, 0, 1e6, 1.0),
                };
                PatternSpec::AddedChannels {
                    high: self.high.unwrap_or(bh),
                    low: self.low.unwrap_or(bl),
                    extra: self.extra.unwrap_or(be),
                    channels: self.channels.unwrap_or(bc),
                }
            }
            "raster_file" | "raster" => {
                let path = match (&self.raster, base) {
                    (Some(p), _) => p.clone(),
                    (None, PatternSpec::RasterFile { path }) => path.clone(),
                    _ => return Err(Error::Config("the raster pattern needs a raster path".into())),
                };
                PatternSpec::RasterFile { path }
            }
            other => return Err(Error::Config(format!("unknown pattern {other:?}"))),
        };
        Ok(spec)
    }
}

/// Parses a config document: JSON when it starts with `{`, otherwise
/// `key = value` lines applied to the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let (cfg, _) = parse_config_with_overrides(text)?;
    Ok(cfg)
}

/// Like `parse_config`, also returning the overrides read from a key/value
/// file so flags can be layered on top.
pub fn parse_config_with_overrides(text: &str) -> Result<(ExperimentConfig, ConfigOverrides)> {
    if text.trim_start().starts_with('{') {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok((cfg, ConfigOverrides::default()))
    } else {
        let o = ConfigOverrides::parse_key_values(text)?;
        Ok((o.apply(ExperimentConfig::default())?, o))
    }
}
