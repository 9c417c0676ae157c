use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use linefield_core::data::SynthSpec;
use linefield_core::model::ModelConfig;
use linefield_core::render::RaySampling;
use linefield_core::train::TrainConfig;

use crate::CliError;

pub const SEED_ENV: &str = "PLKRF_SEED";
pub const ECHO_FILE: &str = "run_config.json";

/// Scene counts for `gen-data`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    /// Seed of the first scene; scenes of all splits use consecutive seeds.
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            train: 20,
            val: 4,
            test: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Conditioning views; `None` picks 64 and 128 when present, else the
    /// first view and the one halfway round.
    pub inputs: Option<Vec<usize>>,
    pub sampling: RaySampling,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            inputs: None,
            sampling: RaySampling {
                jitter: false,
                ..RaySampling::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub checkpoints: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            checkpoints: PathBuf::from("runs/checkpoints"),
            output: PathBuf::from("runs/output"),
        }
    }
}

/// Everything a command can be configured with. The model section lives at
/// the top level; `train.model` is filled from it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(serialize_with = "train_without_model")]
    pub train: TrainConfig,
    pub synth: SynthSpec,
    pub gen: GenConfig,
    pub eval: EvalConfig,
    pub paths: Paths,
}

fn train_without_model<S: serde::Serializer>(t: &TrainConfig, s: S) -> Result<S::Ok, S::Error> {
    let mut v = serde_json::to_value(t).map_err(serde::ser::Error::custom)?;
    if let Value::Object(m) = &mut v {
        m.remove("model");
    }
    v.serialize(s)
}

impl RunConfig {
    /// Reads `file` (if any), applies the seed environment override and then
    /// the `key=value` overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[String], env_seed: Option<&str>) -> Result<Self, CliError> {
        let mut root = match file {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                if text.trim().is_empty() {
                    Value::Object(Map::new())
                } else {
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
                }
            }
            None => Value::Object(Map::new()),
        };
        if !root.is_object() {
            return Err(CliError::Config("config file must hold a JSON object".into()));
        }
        if root.pointer("/train/model").is_some() {
            return Err(CliError::Config("model settings belong in the top-level `model` section".into()));
        }
        if let Some(seed) = env_seed {
            let seed: u64 = seed
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={seed:?} is not an unsigned integer")))?;
            set_path(&mut root, "train.seed", Value::from(seed))?;
            set_path(&mut root, "gen.seed", Value::from(seed))?;
        }
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {o:?} is not of the form key=value")))?;
            if key.trim() == "train.model" || key.trim().starts_with("train.model.") {
                return Err(CliError::Config(format!("{key}: use model.* instead")));
            }
            set_path(&mut root, key.trim(), parse_value(raw))?;
        }
        let mut cfg: RunConfig = serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.train.model = cfg.model.clone();
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Writes the effective config to `dir/run_config.json`.
    pub fn echo(&self, dir: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let p = dir.join(ECHO_FILE);
        fs::write(&p, self.to_json()).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}

/// JSON when the text parses as JSON, otherwise a plain string, so that
/// `paths.output=out` needs no quoting.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed key {key:?}")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {part} is inside a non-object value")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("{key}: parent is not an object")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
