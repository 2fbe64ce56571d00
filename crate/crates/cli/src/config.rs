//! Optional TOML pipeline config. Command-line flags override it; it
//! overrides built-in defaults. Relative paths in the file are resolved
//! against the file's directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use spoilkit_core::metrics::ProviderSettings;
use spoilkit_core::spanlab::LabelerConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub cleaned: Option<PathBuf>,
    pub labeled: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub decisions: Option<PathBuf>,
    pub export: Option<PathBuf>,
    pub predictions: Vec<String>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerSection {
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub window_slack: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub capacity: Option<usize>,
    pub lookup_file: Option<PathBuf>,
    pub url: Option<String>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewSection {
    pub bind: Option<String>,
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub labeler: LabelerSection,
    pub provider: ProviderSection,
    pub review: ReviewSection,
}

fn rebase(base: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.labeler_config(None, None, None)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = PipelineConfig::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.corpus,
            &mut p.rules,
            &mut p.cleaned,
            &mut p.labeled,
            &mut p.tags,
            &mut p.split,
            &mut p.decisions,
            &mut p.export,
            &mut p.report,
            &mut cfg.provider.lookup_file,
            &mut cfg.review.static_dir,
        ] {
            rebase(base, slot);
        }
        for spec in &mut p.predictions {
            let (name, file) = match spec.split_once('=') {
                Some((n, f)) => (Some(n), f),
                None => (None, spec.as_str()),
            };
            let file = Path::new(file);
            if file.is_relative() {
                let full = base.join(file).display().to_string();
                *spec = match name {
                    Some(n) => format!("{n}={full}"),
                    None => full,
                };
            }
        }
        Ok(cfg)
    }

    /// Flag values win over the file, which wins over defaults.
    pub fn labeler_config(&self, tau: Option<f64>, delta: Option<f64>, slack: Option<usize>) -> Result<LabelerConfig> {
        let d = LabelerConfig::default();
        let cfg = LabelerConfig {
            tau: tau.or(self.labeler.tau).unwrap_or(d.tau),
            delta: delta.or(self.labeler.delta).unwrap_or(d.delta),
            window_slack: slack.or(self.labeler.window_slack).unwrap_or(d.window_slack),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn provider_settings(&self, flags: &ProviderFlags) -> ProviderSettings {
        let d = ProviderSettings::default();
        let p = &self.provider;
        ProviderSettings {
            seed: flags.provider_seed.or(p.seed).unwrap_or(d.seed),
            dim: flags.provider_dim.or(p.dim).unwrap_or(d.dim),
            capacity: flags.provider_capacity.or(p.capacity).unwrap_or(d.capacity),
            lookup_file: flags.lookup_file.clone().or_else(|| p.lookup_file.clone()),
            url: flags.provider_url.clone().or_else(|| p.url.clone()),
            timeout_secs: flags.provider_timeout.or(p.timeout_secs).unwrap_or(d.timeout_secs),
        }
    }
}

/// Embedding provider flags shared by commands that score.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct ProviderFlags {
    /// Embedding provider for the semantic column: onehot, hashed, lookup or remote.
    /// Without one the column reads "n/a".
    #[arg(long)]
    pub provider: Option<String>,
    /// Seed for the hashed provider.
    #[arg(long)]
    pub provider_seed: Option<u64>,
    /// Vector dimension (hashed, remote).
    #[arg(long)]
    pub provider_dim: Option<usize>,
    /// Vocabulary capacity (onehot).
    #[arg(long)]
    pub provider_capacity: Option<usize>,
    /// JSONL file of {token, vector} records (lookup).
    #[arg(long)]
    pub lookup_file: Option<PathBuf>,
    /// Base URL of the embedding server (remote).
    #[arg(long)]
    pub provider_url: Option<String>,
    /// Request timeout in seconds (remote).
    #[arg(long)]
    pub provider_timeout: Option<u64>,
}
