//! Anchor link prediction between two attributed networks.
//!
//! Candidate pairs `(s, t)` are nodes of an implicit matching graph whose
//! edges join pairs that are adjacent on both sides. A mini-batch graph
//! convolutional model embeds sampled matching-graph neighborhoods and
//! scores each pair with a logistic head.

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod matching;
pub mod model;
pub mod network;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use eval::{Diagnostics, EvalReport, RankingTask};
pub use matching::{MatchingGraphView, MatchingNode, ThetaKind};
pub use model::{ModelConfig, ModelParams};
pub use network::{AnchorSet, Network, NodeId};
pub use sampler::{Batch, BatchStats, SamplingConfig, SamplingStrategy};
pub use synth::{SynthConfig, SynthDataset};
pub use trainer::{TrainConfig, TrainState};
