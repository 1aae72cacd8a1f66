//! Run configuration: a strict TOML schema plus `--set key=value` overrides.
//! Unknown keys are errors, and every numeric option is validated against
//! the owning module's preconditions before anything runs.

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;
use std::path::Path;

use rotor_core::ModelParams;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: u64,
    pub params: ParamsConfig,
    pub evolve: Option<EvolveConfig>,
    pub lyapunov: Option<LyapunovConfig>,
    pub nekhoroshev: Option<NekhoroshevConfig>,
    pub ed: Option<EdConfig>,
    pub analyze: Option<AnalyzeConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "K")]
    pub kick: f64,
    pub epsilon: f64,
    pub kbar: f64,
    #[serde(rename = "M")]
    pub m_max: usize,
}

impl ParamsConfig {
    pub fn build(&self) -> anyhow::Result<ModelParams> {
        ModelParams::new(self.kick, self.epsilon, self.kbar, self.m_max)
            .map_err(|e| anyhow!("invalid [params]: {e}"))
    }
}

fn default_record_every() -> u64 {
    1
}

fn default_method() -> String {
    "bessel".into()
}

fn default_initial() -> String {
    "momentum".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub n_kicks: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_initial")]
    pub initial: String,
    #[serde(default)]
    pub m0: i64,
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: String,
    #[serde(default)]
    pub sigma: f64,
}

fn default_delta() -> f64 {
    1e-10
}

fn default_pairing() -> String {
    "m0-perturbed".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub n_periods: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default = "default_pairing")]
    pub pairing: String,
    /// Truncations to sweep; defaults to the single [params] M.
    pub m_values: Option<Vec<usize>>,
}

fn default_b() -> f64 {
    0.7
}

fn default_fit_t_min() -> f64 {
    10.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NekhoroshevConfig {
    pub eps: Vec<f64>,
    pub n_disorder: usize,
    pub n_kicks: u64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_fit_t_min")]
    pub fit_t_min: f64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
}

fn default_max_dim() -> usize {
    40_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdConfig {
    pub n_bosons: usize,
    pub k_grid: Vec<f64>,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    #[serde(default)]
    pub dump_spectra: bool,
}

fn default_g() -> f64 {
    1.0
}

fn default_window() -> u64 {
    50
}

fn default_stride() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub input: String,
    pub op: String,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default = "default_stride")]
    pub stride: u64,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default)]
    pub centered: bool,
}

/// Parses the optional config file, applies `--set path=value` overrides,
/// and deserializes into the strict schema.
pub fn load_config(path: Option<&Path>, sets: &[String]) -> anyhow::Result<FileConfig> {
    let mut doc: toml::Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            text.parse::<toml::Table>()
                .with_context(|| format!("cannot parse config {}", p.display()))?
        }
        None => toml::Table::default(),
    };

    for set in sets {
        apply_set(&mut doc, set)?;
    }

    let config: FileConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e| anyhow!("invalid configuration: {e}"))?;
    Ok(config)
}

/// Applies one `a.b.c=value` override into the TOML document, creating
/// intermediate tables as needed.
fn apply_set(doc: &mut toml::Table, set: &str) -> anyhow::Result<()> {
    let (path, raw) = set
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects key=value, got '{set}'"))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("--set path '{path}' has an empty segment");
    }

    // parse the value as a TOML literal, falling back to a bare string
    let value: toml::Value = raw
        .parse::<toml::Value>()
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));

    let mut table = doc;
    for key in &keys[..keys.len() - 1] {
        table = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("--set path '{path}' crosses a non-table"))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_evolve_config_parses() {
        let mut doc: toml::Table = r#"
            seed = 42
            [params]
            K = 6.0
            epsilon = 0.52
            kbar = 1.7
            M = 1024
            [evolve]
            n_kicks = 10000
        "#
        .parse()
        .unwrap();
        apply_set(&mut doc, "evolve.record_every=10").unwrap();
        let cfg: FileConfig = toml::Value::Table(doc).try_into().unwrap();
        assert_eq!(cfg.seed, 42);
        let p = cfg.params.build().unwrap();
        assert_eq!(p.m_max, 1024);
        assert_eq!(cfg.evolve.unwrap().record_every, 10);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let doc: toml::Table = r#"
            seed = 1
            kappa = 3.0
            [params]
            K = 6.0
            epsilon = 0.0
            kbar = 1.7
            M = 8
        "#
        .parse()
        .unwrap();
        let res: Result<FileConfig, _> = toml::Value::Table(doc).try_into();
        let err = format!("{}", res.unwrap_err());
        assert!(err.contains("kappa"), "error should name the key: {err}");
    }

    #[test]
    fn zero_truncation_fails_validation() {
        let doc: toml::Table = r#"
            seed = 1
            [params]
            K = 6.0
            epsilon = 0.0
            kbar = 1.7
            M = 0
        "#
        .parse()
        .unwrap();
        let cfg: FileConfig = toml::Value::Table(doc).try_into().unwrap();
        assert!(cfg.params.build().is_err());
    }

    #[test]
    fn set_overrides_create_tables_and_parse_literals() {
        let mut doc = toml::Table::default();
        apply_set(&mut doc, "seed=7").unwrap();
        apply_set(&mut doc, "params.K=6.0").unwrap();
        apply_set(&mut doc, "params.epsilon=0.52").unwrap();
        apply_set(&mut doc, "params.kbar=1.7").unwrap();
        apply_set(&mut doc, "params.M=16").unwrap();
        apply_set(&mut doc, "evolve.n_kicks=100").unwrap();
        apply_set(&mut doc, "evolve.method=spectral").unwrap();
        let cfg: FileConfig = toml::Value::Table(doc).try_into().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.evolve.as_ref().unwrap().method, "spectral");
        assert_eq!(cfg.evolve.unwrap().n_kicks, 100);
    }
}
