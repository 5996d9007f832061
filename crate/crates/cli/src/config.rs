use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nashmoser::iteration::SchemeParams;
use nashmoser::models::{HoppingSpec, PotentialSpec};
use nashmoser::{LatticeBox, NormPolicy};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    #[default]
    Sup,
    /// Sampled BV norm over the potential's frequency vector.
    SampledBv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub dimension: usize,
    pub radius: usize,
    pub interior_radius: usize,
    #[serde(default)]
    pub norm: NormChoice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_ledger")]
    pub ledger_csv_path: PathBuf,
    #[serde(default = "default_report")]
    pub report_json_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
}

fn default_ledger() -> PathBuf {
    "ledger.csv".into()
}

fn default_report() -> PathBuf {
    "report.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            ledger_csv_path: default_ledger(),
            report_json_path: default_report(),
            checkpoint_dir: None,
        }
    }
}

/// Axes of a sweep; an empty axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub s_exponent: Vec<f64>,
    #[serde(default)]
    pub radius: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "box")]
    pub lattice: BoxConfig,
    pub potential: PotentialSpec,
    pub hopping: HoppingSpec,
    pub params: SchemeParams,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seeds: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl RunConfig {
    pub fn lattice(&self) -> Result<LatticeBox> {
        let b = &self.lattice;
        Ok(LatticeBox::new(b.dimension, b.radius, b.interior_radius)?)
    }

    pub fn policy(&self) -> NormPolicy {
        match self.lattice.norm {
            NormChoice::Sup => NormPolicy::Sup,
            NormChoice::SampledBv => NormPolicy::sampled_bv(self.potential.omega.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice()?;
        self.params.validate(self.lattice.dimension)?;
        if self.lattice.norm == NormChoice::SampledBv && self.potential.omega.len() != self.lattice.dimension {
            bail!("sampled_bv norm needs a frequency vector of length {}", self.lattice.dimension);
        }
        Ok(())
    }

    /// Output path resolved against `out_dir`.
    pub fn resolve(&self, out_dir: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            out_dir.join(p)
        }
    }
}

/// Loaded configuration together with the JSON it was parsed from.
pub struct Loaded {
    pub config: RunConfig,
    pub echo: Value,
}

/// Reads `path`, applies `key=value` overrides (dotted keys, JSON values with
/// a bare-string fallback) and validates the result.
pub fn load(path: &Path, overrides: &[String]) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    from_value(value)
}

pub fn from_value(value: Value) -> Result<Loaded> {
    let config: RunConfig = serde_json::from_value(value.clone()).context("invalid configuration")?;
    config.validate().context("invalid configuration")?;
    Ok(Loaded { config, echo: value })
}

pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("override `{key}`: `{}` is not an object", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    bail!("empty override key")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_nest_and_parse() {
        let mut v = json!({"hopping": {"epsilon": 0.1}});
        apply_override(&mut v, "hopping.epsilon=0.05").unwrap();
        apply_override(&mut v, "params.mode=direct").unwrap();
        assert_eq!(v, json!({"hopping": {"epsilon": 0.05}, "params": {"mode": "direct"}}));
        assert!(apply_override(&mut v, "noequals").is_err());
        assert!(apply_override(&mut v, "hopping.epsilon.x=1").is_err());
    }
}
