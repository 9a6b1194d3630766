//! Effective configuration: built-in defaults, overridden by an optional
//! config file (`key=value` lines, `#` comments), overridden by CLI flags.
//!
//! Environment variables are deliberately not consulted, so a run is fully
//! described by its flags, its config file, and its inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use btsampler_core::SamplingConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub sampling: SamplingConfig,
    /// Subword join marker.
    pub marker: String,
    /// Oracle language-model order.
    pub order: usize,
    /// Oracle additive-smoothing constant.
    pub smoothing: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sampling: SamplingConfig::default(),
            marker: "@@".to_string(),
            order: 2,
            smoothing: 1.0,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Config::default();
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}: line {}: expected key=value, found {raw:?}",
                    path.display(),
                    i + 1
                );
            };
            config
                .set(key.trim(), value.trim())
                .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mu" => self.sampling.mu = parse(key, value)?,
            "rho" => self.sampling.rho = parse(key, value)?,
            "eta" => self.sampling.eta = parse(key, value)?,
            "s" => self.sampling.s = parse(key, value)?,
            "w" => self.sampling.w = parse(key, value)?,
            "n" => self.sampling.n = parse_optional(key, value)?,
            "seed" => self.sampling.seed = parse(key, value)?,
            "theta" => self.sampling.theta = parse_optional(key, value)?,
            "marker" => {
                if value.is_empty() {
                    bail!("marker must be non-empty");
                }
                self.marker = value.to_string();
            }
            "order" => self.order = parse(key, value)?,
            "smoothing" => self.smoothing = parse(key, value)?,
            other => bail!("unknown configuration key {other:?}"),
        }
        Ok(())
    }

    /// Sorted `key=value` dump of the effective configuration. Unset
    /// optional values dump as empty.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut line = |key: &str, value: String| {
            let _ = writeln!(out, "{key}={value}");
        };
        line("eta", self.sampling.eta.to_string());
        line("marker", self.marker.clone());
        line("mu", self.sampling.mu.to_string());
        line("n", self.sampling.n.map(|n| n.to_string()).unwrap_or_default());
        line("order", self.order.to_string());
        line("rho", self.sampling.rho.to_string());
        line("s", self.sampling.s.to_string());
        line("seed", self.sampling.seed.to_string());
        line("smoothing", self.smoothing.to_string());
        line(
            "theta",
            self.sampling.theta.map(|t| t.to_string()).unwrap_or_default(),
        );
        line("w", self.sampling.w.to_string());
        out
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow::anyhow!("bad value {value:?} for {key}"))
}

fn parse_optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() {
        return Ok(None);
    }
    parse(key, value).map(Some)
}
