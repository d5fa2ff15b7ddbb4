//! Experiment configuration: defaults, file layering, `--set` overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use local_consensus::field::NoiseDistribution;
use local_consensus::spacing::SpacingLaw;
use local_consensus::{AlgorithmSpec, ChainConfig, MeasurementField};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const SECTIONS: [&str; 5] = ["chain", "field", "algorithm", "analysis", "output"];

/// Keys that select an enum variant. Changing one drops the sibling keys,
/// which belonged to the old variant.
const TAGS: [&str; 5] = ["variant", "kind", "policy", "law", "scheme"];

const DEFAULTS: &str = r#"
[chain]
n = 64
rounds = 40
boundary = { policy = "ring" }

[field]
kind = "spatial_cosine"
amplitude = 1.0
omega = 0.7853981633974483
phase = 0.0

[algorithm]
variant = "exponential"
rho = 0.9

[analysis]

[output]
dir = "out"
"#;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// First fitted round; derived from the algorithm when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settle: Option<usize>,
    /// Spatial harmonics `m`, probed at `omega = 2 pi m / n`.
    pub harmonics: Vec<usize>,
    /// Temporal probe frequencies.
    pub omegas: Vec<f64>,
    pub sigma: f64,
    pub distribution: NoiseDistribution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Size of the plain-mean baseline in `noise`; 0 disables it.
    pub global_n: usize,
    pub spacing: SpacingLaw,
    /// Reject arbitrary weight tables whose rows miss `K` by more than `weight_tolerance`.
    pub check_weights: bool,
    pub weight_tolerance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            settle: None,
            harmonics: vec![1, 2, 4, 8, 16],
            omegas: vec![0.0, 0.05, 0.1, 0.5],
            sigma: 1.0,
            distribution: NoiseDistribution::Gaussian,
            replicates: None,
            global_n: 100,
            spacing: SpacingLaw::ExpDensity,
            check_weights: true,
            weight_tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub chain: ChainConfig,
    pub field: MeasurementField,
    pub algorithm: AlgorithmSpec,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
    /// Whether `chain.master_seed` was given rather than defaulted.
    #[serde(skip)]
    pub seed_given: bool,
}

impl ExperimentConfig {
    /// Defaults, then the file at `path`, then `--seed`, `--out`, and `--set` in order.
    pub fn load(path: Option<&Path>, seed: Option<u64>, out: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut doc: Table = DEFAULTS.parse().expect("built-in defaults parse");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let user: Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
            merge(&mut doc, user, "")?;
        }
        if let Some(seed) = seed {
            set_path(&mut doc, "chain.master_seed", Value::Integer(seed_to_toml(seed)?))?;
        }
        if let Some(out) = out {
            let dir = out.to_str().ok_or_else(|| anyhow!("--out: path is not valid UTF-8"))?;
            set_path(&mut doc, "output.dir", Value::String(dir.to_string()))?;
        }
        for raw in sets {
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| anyhow!("--set {raw}: expected key=value"))?;
            set_path(&mut doc, key.trim(), parse_value(value.trim()))?;
        }
        Self::from_table(doc)
    }

    fn from_table(mut doc: Table) -> Result<Self> {
        let seed_given = doc
            .get("chain")
            .and_then(Value::as_table)
            .is_some_and(|t| t.contains_key("master_seed"));
        let mut take = |name: &str| doc.remove(name).unwrap_or_else(|| Value::Table(Table::new()));
        let cfg = ExperimentConfig {
            chain: section(take("chain"), "chain")?,
            field: section(take("field"), "field")?,
            algorithm: section(take("algorithm"), "algorithm")?,
            analysis: section(take("analysis"), "analysis")?,
            output: section(take("output"), "output")?,
            seed_given,
        };
        cfg.field.validate().map_err(|e| anyhow!(e)).context("config key `field`")?;
        Ok(cfg)
    }

    /// The resolved configuration as a TOML document, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing the resolved config")
    }

    pub fn require_seed(&self, command: &str) -> Result<u64> {
        if !self.seed_given {
            bail!("config key `chain.master_seed`: `{command}` is stochastic; pass --seed or set chain.master_seed");
        }
        Ok(self.chain.master_seed)
    }
}

fn seed_to_toml(seed: u64) -> Result<i64> {
    i64::try_from(seed).map_err(|_| anyhow!("--seed: {seed} exceeds the largest TOML integer"))
}

fn section<T: serde::de::DeserializeOwned>(value: Value, name: &str) -> Result<T> {
    value
        .try_into()
        .map_err(|e: toml::de::Error| anyhow!("config key `{name}`: {}", e.message().trim()))
}

/// Literal TOML when it parses (numbers, booleans, arrays, inline tables), a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(doc: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("--set {key}: empty key segment");
    }
    if !SECTIONS.contains(&parts[0]) {
        bail!("config key `{key}`: unknown section `{}`", parts[0]);
    }
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut table = doc;
    for (depth, p) in parents.iter().enumerate() {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("config key `{}` is not a table", parts[..=depth].join(".")))?;
    }
    if TAGS.contains(last) && table.get(*last) != Some(&value) {
        table.clear();
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn merge(base: &mut Table, over: Table, prefix: &str) -> Result<()> {
    if prefix.is_empty() {
        if let Some(bad) = over.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            bail!("config key `{bad}`: unknown section");
        }
    }
    let retag = TAGS
        .iter()
        .any(|t| over.get(*t).is_some_and(|v| base.get(*t) != Some(v)));
    if retag {
        base.clear();
    }
    for (k, v) in over {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o, &path)?,
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    Ok(())
}
