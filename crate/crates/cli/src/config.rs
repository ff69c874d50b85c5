//! Run configuration: one JSON object of flat dotted keys, layered as
//! defaults, then preset, then config file, then command-line overrides.

use std::path::{Path, PathBuf};

use alp_core::sampler::default_fanouts;
use alp_core::synth::{self, SynthConfig};
use alp_core::{SamplingStrategy, ThetaKind, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Non-anchor candidates per ranking task.
    pub candidates: usize,
    pub batch_size: usize,
    pub collision_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            candidates: alp_core::eval::DEFAULT_CANDIDATES,
            batch_size: 128,
            collision_threshold: alp_core::eval::DEFAULT_COLLISION_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    /// Expected degree of the random benchmark graph.
    pub degree: f64,
    pub anchor_fraction: f64,
    pub attr_dim: usize,
    pub epochs: usize,
    /// Caps the timed batches per epoch; 0 times every batch.
    pub max_batches: usize,
    /// Node size used by the fan-out sweeps.
    pub sweep_size: usize,
    pub hop1_sweep: Vec<usize>,
    pub hop2_sweep: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1_000, 10_000, 100_000],
            degree: 10.0,
            anchor_fraction: 0.1,
            attr_dim: 16,
            epochs: 1,
            max_batches: 0,
            sweep_size: 1_000,
            hop1_sweep: Vec::new(),
            hop2_sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds generation, splitting, initialization, sampling and candidates.
    pub seed: u64,
    pub out: PathBuf,
    /// Dataset directory; when absent the dataset is generated from `synth`.
    pub data: Option<PathBuf>,
    /// Attribute CSV columns of `data` holding category labels, one-hot encoded on load.
    pub categorical_columns: Vec<usize>,
    pub preset: Option<String>,
    pub checkpoint: Option<PathBuf>,
    /// Save a checkpoint every this many epochs; 0 saves only at the end.
    pub checkpoint_every: usize,
    pub pairs: Option<PathBuf>,
    /// Training fraction of the anchors; `evaluate` accepts several.
    pub ratios: Vec<f64>,
    pub workers: usize,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub benchmark: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            data: None,
            categorical_columns: Vec::new(),
            preset: None,
            checkpoint: None,
            checkpoint_every: 0,
            pairs: None,
            ratios: vec![0.8],
            workers: 1,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            benchmark: BenchConfig::default(),
        }
    }
}

/// Command-line values that override configuration keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub theta: Option<ThetaKind>,
    pub hops: Option<usize>,
    pub fanouts: Option<Vec<usize>>,
    pub strategy: Option<SamplingStrategy>,
    pub ratios: Option<Vec<f64>>,
    pub preset: Option<String>,
    pub workers: Option<usize>,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    /// Raw `key=value` assignments; values parse as JSON, else as strings.
    pub set: Vec<String>,
}

/// Nested objects become `a.b.c` keys; arrays and scalars are leaves.
pub fn flatten(value: &Value) -> Map<String, Value> {
    fn walk(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
        match v {
            Value::Object(m) if !m.is_empty() => {
                for (k, child) in m {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            _ => {
                out.insert(prefix.to_string(), v.clone());
            }
        }
    }
    let mut out = Map::new();
    walk("", value, &mut out);
    out
}

fn assign(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    let (leaf, parents) = parts.split_last().expect("split yields one part");
    let mut node = root;
    for (depth, part) in parents.iter().enumerate() {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(*part))
            .filter(|v| v.is_object())
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown configuration key {:?}",
                    parts[..=depth].join(".")
                ))
            })?;
    }
    let obj = node.as_object_mut().expect("parents are objects");
    if *leaf == "kind" {
        // Switching a tagged variant drops the old variant's fields.
        if obj.get("kind") != Some(&value) {
            obj.clear();
        }
    } else if !obj.contains_key(*leaf) && !obj.contains_key("kind") {
        return Err(CliError::Usage(format!(
            "unknown configuration key {key:?}"
        )));
    }
    obj.insert(leaf.to_string(), value);
    Ok(())
}

/// Applies dotted assignments; `kind` keys go first so variant fields land
/// on the selected variant.
fn apply(root: &mut Value, entries: Map<String, Value>) -> Result<(), CliError> {
    let (kinds, rest): (Vec<_>, Vec<_>) = entries
        .into_iter()
        .partition(|(k, _)| k == "kind" || k.ends_with(".kind"));
    for (k, v) in kinds.into_iter().chain(rest) {
        assign(root, &k, v)?;
    }
    Ok(())
}

fn parse_assignment(raw: &str) -> Result<(String, Value), CliError> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected KEY=VALUE, got {raw:?}")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("configuration types serialize")
}

pub fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::Usage(format!(
            "config {} must be a JSON object",
            path.display()
        )));
    }
    Ok(flatten(&value))
}

impl RunConfig {
    /// Layers defaults, the selected preset, `file` and `overrides`.
    pub fn resolve(
        file: Option<Map<String, Value>>,
        overrides: &Overrides,
    ) -> Result<Self, CliError> {
        let file = file.unwrap_or_default();
        let preset = overrides.preset.clone().or_else(|| {
            file.get("preset")
                .and_then(Value::as_str)
                .map(str::to_string)
        });
        let mut base = RunConfig::default();
        if let Some(name) = &preset {
            base.synth = synth::preset(name).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        let mut root = to_value(&base);
        apply(&mut root, file)?;

        let mut flags = Map::new();
        let mut put = |k: &str, v: Value| {
            flags.insert(k.to_string(), v);
        };
        if let Some(x) = overrides.seed {
            put("seed", to_value(&x));
        }
        if let Some(x) = &overrides.out {
            put("out", to_value(x));
        }
        if let Some(x) = &preset {
            put("preset", to_value(x));
        }
        if let Some(x) = overrides.theta {
            put("train.theta", to_value(&x));
        }
        if let Some(x) = overrides.strategy {
            put("train.sampling.strategy", to_value(&x));
        }
        if let Some(k) = overrides.hops {
            if k == 0 {
                return Err(CliError::Usage("--hops must be at least 1".into()));
            }
            if overrides.fanouts.as_ref().is_some_and(|f| f.len() != k) {
                return Err(CliError::Usage(
                    "--fanouts must list one value per hop".into(),
                ));
            }
            put("train.sampling.fanouts", to_value(&default_fanouts(k)));
        }
        if let Some(x) = &overrides.fanouts {
            put("train.sampling.fanouts", to_value(x));
        }
        if let Some(x) = &overrides.ratios {
            put("ratios", to_value(x));
        }
        if let Some(x) = overrides.workers {
            put("workers", to_value(&x));
        }
        if let Some(x) = &overrides.data {
            put("data", to_value(x));
        }
        if let Some(x) = &overrides.checkpoint {
            put("checkpoint", to_value(x));
        }
        if let Some(x) = &overrides.pairs {
            put("pairs", to_value(x));
        }
        apply(&mut root, flags)?;
        let mut set = Map::new();
        for raw in &overrides.set {
            let (k, v) = parse_assignment(raw)?;
            set.insert(k, v);
        }
        apply(&mut root, set)?;

        let mut cfg: RunConfig = serde_json::from_value(root)
            .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
        cfg.synth.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
        cfg.train.sampling.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: alp_core::Error| CliError::Usage(e.to_string());
        self.train.validate().map_err(usage)?;
        if self.ratios.is_empty() {
            return Err(CliError::Usage(
                "at least one split ratio is required".into(),
            ));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(CliError::Usage(format!(
                "split ratio {r} must lie in (0, 1)"
            )));
        }
        if self.workers == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        if self.eval.batch_size == 0 {
            return Err(CliError::Usage("eval.batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// The resolved configuration as sorted flat dotted keys.
    pub fn to_flat_json(&self) -> Value {
        Value::Object(flatten(&to_value(self)))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        crate::write_json(&dir.join("config.json"), &self.to_flat_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alp_core::synth::{AttributeModel, GraphModel};
    use serde_json::json;

    fn flat(v: Value) -> Map<String, Value> {
        flatten(&v)
    }

    #[test]
    fn defaults_match_documented_values() {
        let c = RunConfig::resolve(None, &Overrides::default()).unwrap();
        assert_eq!(c.train.theta, ThetaKind::CosineScalar);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.train.learning_rate, 0.01);
        assert_eq!(c.train.sampling.fanouts, vec![10, 5]);
        assert_eq!(c.train.embed_dim, 128);
        assert_eq!(c.train.neg_ratio, 1.0);
        assert_eq!(c.eval.candidates, 20);
    }

    #[test]
    fn file_then_flags() {
        let file = flat(json!({"train.learning_rate": 0.5, "seed": 3, "train": {"epochs": 7}}));
        let o = Overrides {
            seed: Some(9),
            hops: Some(1),
            ..Default::default()
        };
        let c = RunConfig::resolve(Some(file), &o).unwrap();
        assert_eq!(c.train.learning_rate, 0.5);
        assert_eq!(c.train.epochs, 7);
        assert_eq!(c.seed, 9);
        assert_eq!(c.train.seed, 9);
        assert_eq!(c.train.sampling.seed, 9);
        assert_eq!(c.train.sampling.fanouts, vec![5]);
    }

    #[test]
    fn unknown_keys_rejected() {
        for bad in [
            json!({"train.lerning_rate": 1}),
            json!({"nope.x": 1}),
            json!({"synth.model.q": 1}),
        ] {
            assert!(matches!(
                RunConfig::resolve(Some(flat(bad)), &Overrides::default()),
                Err(CliError::Usage(_))
            ));
        }
    }

    #[test]
    fn switching_tagged_variant() {
        let file = flat(
            json!({"synth.model.kind": "erdos-renyi", "synth.model.p": 0.01, "synth.attributes.kind": "gaussian"}),
        );
        let c = RunConfig::resolve(Some(file), &Overrides::default()).unwrap();
        assert_eq!(c.synth.model, GraphModel::ErdosRenyi { p: 0.01 });
        assert_eq!(c.synth.attributes, AttributeModel::Gaussian);
    }

    #[test]
    fn preset_then_overrides() {
        let o = Overrides {
            preset: Some("flickr-myspace-like".into()),
            set: vec!["synth.n=300".into(), "ratios=[0.1,0.5]".into()],
            ..Default::default()
        };
        let c = RunConfig::resolve(None, &o).unwrap();
        let p = synth::preset("flickr-myspace-like").unwrap();
        assert_eq!(c.synth.edge_preserve, p.edge_preserve);
        assert_eq!(c.synth.n, 300);
        assert_eq!(c.ratios, vec![0.1, 0.5]);
        let bad = Overrides {
            preset: Some("nope".into()),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, &bad).is_err());
    }

    #[test]
    fn flat_json_round_trips() {
        let o = Overrides {
            theta: Some(ThetaKind::Hadamard),
            ..Default::default()
        };
        let c = RunConfig::resolve(None, &o).unwrap();
        let flat = match c.to_flat_json() {
            Value::Object(m) => m,
            _ => unreachable!(),
        };
        assert_eq!(flat["train.theta"], json!("hadamard"));
        assert_eq!(
            RunConfig::resolve(Some(flat), &Overrides::default()).unwrap(),
            c
        );
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for set in [
            "ratios=[1.5]",
            "workers=0",
            "train.batch_size=0",
            "train.learning_rate=-1",
        ] {
            let o = Overrides {
                set: vec![set.into()],
                ..Default::default()
            };
            assert!(
                matches!(RunConfig::resolve(None, &o), Err(CliError::Usage(_))),
                "{set}"
            );
        }
        let o = Overrides {
            hops: Some(2),
            fanouts: Some(vec![3]),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, &o).is_err());
    }
}
