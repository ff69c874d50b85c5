//! Versioned JSON checkpoints of model parameters and optimizer state.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::trainer::{AdamState, TrainConfig, TrainState};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AdamRecord {
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Record {
    version: u32,
    model: ModelConfig,
    tensors: Vec<Tensor>,
    adam: Option<AdamRecord>,
    epoch: usize,
    loss_history: Vec<f64>,
    train_config: Option<TrainConfig>,
}

fn dump(params: &ModelParams) -> Vec<Tensor> {
    params
        .tensors()
        .into_iter()
        .map(|(name, values)| Tensor {
            name,
            values: values.to_vec(),
        })
        .collect()
}

fn restore(cfg: &ModelConfig, tensors: &[Tensor]) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(cfg)?;
    let mut slots = params.tensors_mut();
    if slots.len() != tensors.len() {
        return Err(Error::invalid(format!(
            "checkpoint has {} tensors, model expects {}",
            tensors.len(),
            slots.len()
        )));
    }
    for ((name, slot), tensor) in slots.iter_mut().zip(tensors) {
        if *name != tensor.name {
            return Err(Error::invalid(format!(
                "expected tensor {name}, found {}",
                tensor.name
            )));
        }
        if slot.len() != tensor.values.len() {
            return Err(Error::DimensionMismatch {
                expected: slot.len(),
                got: tensor.values.len(),
            });
        }
        slot.copy_from_slice(&tensor.values);
    }
    drop(slots);
    if !params.all_finite() {
        return Err(Error::NonFinite("checkpoint tensors".into()));
    }
    Ok(params)
}

/// A training snapshot. `train_config` is the configuration it was produced with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: TrainState,
    pub train_config: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn from_params(params: ModelParams) -> Self {
        let adam = AdamState::new(&params);
        Self {
            state: TrainState {
                params,
                adam,
                epoch: 0,
                loss_history: Vec::new(),
            },
            train_config: None,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.state.params
    }

    pub fn to_json(&self) -> Result<String> {
        let s = &self.state;
        let record = Record {
            version: CHECKPOINT_VERSION,
            model: s.params.config(),
            tensors: dump(&s.params),
            adam: Some(AdamRecord {
                t: s.adam.t,
                m: dump(&s.adam.m),
                v: dump(&s.adam.v),
            }),
            epoch: s.epoch,
            loss_history: s.loss_history.clone(),
            train_config: self.train_config.clone(),
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: Record = serde_json::from_str(text)?;
        if record.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                record.version
            )));
        }
        let params = restore(&record.model, &record.tensors)?;
        let adam = match record.adam {
            Some(a) => AdamState {
                m: restore(&record.model, &a.m)?,
                v: restore(&record.model, &a.v)?,
                t: a.t,
            },
            None => AdamState::new(&params),
        };
        Ok(Self {
            state: TrainState {
                params,
                adam,
                epoch: record.epoch,
                loss_history: record.loss_history,
            },
            train_config: record.train_config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        // Write then rename so an interrupted save never leaves a torn file.
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
