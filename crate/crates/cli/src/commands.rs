use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use alp_core::checkpoint::Checkpoint;
use alp_core::eval::{self, build_tasks, embed_pairs, measure_dataset, model_ranks, EvalReport};
use alp_core::network::{read_pair_file, split_anchors};
use alp_core::rng::rng_from;
use alp_core::synth::{self, AttributeModel, DatasetPaths, GraphModel, SynthConfig};
use alp_core::trainer::{epoch_examples, train_from, train_step};
use alp_core::{
    AnchorSet, BatchStats, MatchingGraphView, MatchingNode, ModelParams, Network, TrainConfig,
    TrainState,
};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::{write_json, CliError};

const STREAM_BENCH_SHUFFLE: u64 = 21;

pub struct Dataset {
    pub source: Network,
    pub target: Network,
    pub anchors: AnchorSet,
}

/// Loads `cfg.data`, or generates from `cfg.synth` when no directory is given.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match &cfg.data {
        Some(dir) => {
            let p = DatasetPaths::in_dir(dir);
            let (source, target) = Network::load_pair(
                (&p.source_edges, &p.source_attrs),
                (&p.target_edges, &p.target_attrs),
                &cfg.categorical_columns,
            )?;
            let anchors = AnchorSet::load(&p.anchors, &source, &target)?;
            Ok(Dataset {
                source,
                target,
                anchors,
            })
        }
        None => {
            cfg.synth
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let d = synth::generate(&cfg.synth)?;
            Ok(Dataset {
                source: d.source,
                target: d.target,
                anchors: d.anchors,
            })
        }
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out)?;
    cfg.write(&cfg.out)?;
    Ok(&cfg.out)
}

fn view<'a>(cfg: &RunConfig, d: &'a Dataset) -> Result<MatchingGraphView<'a>, CliError> {
    MatchingGraphView::new(&d.source, &d.target, cfg.train.theta)
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn single_ratio(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.ratios.as_slice() {
        [r] => Ok(*r),
        _ => Err(CliError::Usage(
            "this command takes exactly one split ratio".into(),
        )),
    }
}

/// Checks that a loaded model fits the configured θ and hop count.
fn check_compatible(
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    train: &TrainConfig,
) -> Result<(), CliError> {
    if params.input_dim() != view.feature_dim() {
        return Err(CliError::Usage(format!(
            "checkpoint expects {}-dimensional matching features but θ={} yields {}",
            params.input_dim(),
            train.theta,
            view.feature_dim()
        )));
    }
    if params.hops() != train.sampling.hops() {
        return Err(CliError::Usage(format!(
            "checkpoint has {} layers but {} fan-outs are configured",
            params.hops(),
            train.sampling.hops()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub source_nodes: usize,
    pub source_edges: usize,
    pub target_nodes: usize,
    pub target_edges: usize,
    pub anchors: usize,
    pub collision_rate: f64,
    pub consistency_1hop: f64,
    pub consistency_2hop: f64,
}

/// Writes the dataset files and `diagnostics.json`.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary, CliError> {
    cfg.synth
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let out = prepare_out(cfg)?;
    let d = synth::generate(&cfg.synth)?;
    d.save(out)?;
    let diag = measure_dataset(
        &d.source,
        &d.target,
        &d.anchors,
        cfg.eval.collision_threshold,
    )?;
    let summary = GenerateSummary {
        source_nodes: d.source.node_count(),
        source_edges: d.source.edge_count(),
        target_nodes: d.target.node_count(),
        target_edges: d.target.edge_count(),
        anchors: d.anchors.len(),
        collision_rate: diag.collision_rate,
        consistency_1hop: diag.consistency_1hop,
        consistency_2hop: diag.consistency_2hop,
    };
    for x in [
        summary.collision_rate,
        summary.consistency_1hop,
        summary.consistency_2hop,
    ] {
        if !(0.0..=1.0).contains(&x) {
            return Err(alp_core::Error::NonFinite("dataset diagnostics".into()).into());
        }
    }
    write_json(
        &out.join("diagnostics.json"),
        &json!({"config": cfg.to_flat_json(), "diagnostics": summary}),
    )?;
    Ok(summary)
}

fn write_loss_csv(path: &Path, history: &[f64]) -> Result<(), CliError> {
    let mut text = String::from("epoch,loss\n");
    for (i, loss) in history.iter().enumerate() {
        writeln!(text, "{},{loss}", i + 1).expect("writing to a String");
    }
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_loss: Option<f64>,
    pub checkpoint: PathBuf,
}

/// Trains on the training split and writes `model.json` and `loss.csv`.
/// With `resume`, continues from `cfg.checkpoint` (default `out/model.json`).
pub fn cmd_train(cfg: &RunConfig, resume: bool) -> Result<TrainSummary, CliError> {
    let ratio = single_ratio(cfg)?;
    let d = load_dataset(cfg)?;
    let out = prepare_out(cfg)?;
    let model_path = out.join("model.json");
    let view = view(cfg, &d)?;
    let (train, _) = split_anchors(&d.anchors, ratio, cfg.seed)?;
    let state = if resume {
        let path = cfg.checkpoint.clone().unwrap_or_else(|| model_path.clone());
        let state = Checkpoint::load(&path)?.state;
        check_compatible(&state.params, &view, &cfg.train)?;
        state
    } else {
        TrainState::new(&view, &cfg.train)?
    };
    let snapshot = |state: &TrainState| -> alp_core::Result<()> {
        Checkpoint {
            state: state.clone(),
            train_config: Some(cfg.train.clone()),
        }
        .save(&model_path)
    };
    let every = cfg.checkpoint_every;
    let state = train_from(state, &view, &train, &cfg.train, |s| {
        if every > 0 && s.epoch % every == 0 {
            snapshot(s)?;
        }
        Ok(())
    })?;
    snapshot(&state)?;
    write_loss_csv(&out.join("loss.csv"), &state.loss_history)?;
    Ok(TrainSummary {
        epochs: state.epoch,
        final_loss: state.loss_history.last().copied(),
        checkpoint: model_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits10: f64,
    pub num_tasks: usize,
}

impl From<&EvalReport> for MethodMetrics {
    fn from(r: &EvalReport) -> Self {
        Self {
            mrr: r.mrr,
            hits1: r.hits1,
            hits10: r.hits10,
            num_tasks: r.num_tasks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioResult {
    pub ratio: f64,
    pub train_anchors: usize,
    pub test_anchors: usize,
    pub model: MethodMetrics,
    pub ac: MethodMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTiming {
    pub ratio: f64,
    pub train_s: f64,
    pub model_eval_s: f64,
    pub ac_eval_s: f64,
}

/// Model and attribute-baseline metrics for every split ratio, written to
/// `metrics.json`; wall times go to `timing.json`. Without a checkpoint a
/// model is trained per ratio.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<RatioResult>, CliError> {
    if cfg.checkpoint.is_some() && cfg.ratios.len() != 1 {
        return Err(CliError::Usage(
            "a checkpoint belongs to one split; pass a single --ratio".into(),
        ));
    }
    let d = load_dataset(cfg)?;
    let out = prepare_out(cfg)?;
    let view = view(cfg, &d)?;
    let anchored = d.anchors.targets();
    let mut results = Vec::new();
    let mut timing = Vec::new();
    for &ratio in &cfg.ratios {
        let (train, test) = split_anchors(&d.anchors, ratio, cfg.seed)?;
        let start = Instant::now();
        let params = match &cfg.checkpoint {
            Some(path) => {
                let params = Checkpoint::load(path)?.state.params;
                check_compatible(&params, &view, &cfg.train)?;
                params
            }
            None => {
                let state = TrainState::new(&view, &cfg.train)?;
                train_from(state, &view, &train, &cfg.train, |_| Ok(()))?.params
            }
        };
        let train_s = start.elapsed().as_secs_f64();
        let tasks = build_tasks(&test, &d.target, &anchored, cfg.eval.candidates, cfg.seed)?;
        let model = eval::evaluate_model(
            &params,
            &view,
            &tasks,
            &cfg.train.sampling,
            cfg.eval.batch_size,
            cfg.workers,
        )?;
        let ac = eval::evaluate_ac(&tasks, &d.source, &d.target)?;
        results.push(RatioResult {
            ratio,
            train_anchors: train.len(),
            test_anchors: test.len(),
            model: (&model).into(),
            ac: (&ac).into(),
        });
        timing.push(RatioTiming {
            ratio,
            train_s,
            model_eval_s: model.wall_time_s,
            ac_eval_s: ac.wall_time_s,
        });
    }
    write_json(
        &out.join("metrics.json"),
        &json!({"config": cfg.to_flat_json(), "results": results}),
    )?;
    write_json(&out.join("timing.json"), &json!({"results": timing}))?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub node_size: usize,
    /// Median wall time of batch sampling, forward, backward and update.
    pub per_batch_ms: f64,
    pub train_s: f64,
    pub test_s: f64,
    pub hop1_fanout: usize,
    /// 0 for one-hop models.
    pub hop2_fanout: usize,
}

#[derive(Serialize)]
struct BatchRecord<'a> {
    node_size: usize,
    hop1_fanout: usize,
    hop2_fanout: usize,
    epoch: usize,
    batch: usize,
    ms: f64,
    #[serde(flatten)]
    stats: &'a BatchStats,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn bench_one(
    cfg: &RunConfig,
    n: usize,
    fanouts: &[usize],
    log: &mut String,
) -> Result<BenchRow, CliError> {
    let b = &cfg.benchmark;
    let synth_cfg = SynthConfig {
        n,
        model: GraphModel::ErdosRenyi {
            p: (b.degree / (n.max(2) - 1) as f64).min(1.0),
        },
        edge_preserve: 1.0,
        anchor_fraction: b.anchor_fraction,
        collider_count: 0,
        collision_fraction: 0.0,
        attr_dim: b.attr_dim,
        attributes: AttributeModel::Gaussian,
        attr_noise: 0.0,
        identical: true,
        seed: cfg.seed,
    };
    synth_cfg
        .validate()
        .map_err(|e| CliError::Usage(format!("benchmark at n={n}: {e}")))?;
    let d = synth::generate(&synth_cfg)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.sampling.fanouts = fanouts.to_vec();
    let view = MatchingGraphView::new(&d.source, &d.target, train_cfg.theta)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (train, test) = split_anchors(&d.anchors, single_ratio(cfg)?, cfg.seed)?;
    let k = fanouts.len();
    let hop1 = fanouts[k - 1];
    let hop2 = if k >= 2 { fanouts[k - 2] } else { 0 };

    let start = Instant::now();
    let mut state = TrainState::new(&view, &train_cfg)?;
    let mut times = Vec::new();
    for epoch in 0..b.epochs {
        let mut examples = epoch_examples(&view, &train, &train_cfg, epoch)?;
        let mut rng = rng_from(cfg.seed, &[STREAM_BENCH_SHUFFLE, epoch as u64]);
        examples.shuffle(&mut rng);
        for (i, chunk) in examples.chunks(train_cfg.batch_size).enumerate() {
            if b.max_batches > 0 && i >= b.max_batches {
                break;
            }
            let t = Instant::now();
            let (_, batch) = train_step(&mut state, &view, chunk, &train_cfg, &mut rng)?;
            let ms = t.elapsed().as_secs_f64() * 1e3;
            times.push(ms);
            let record = BatchRecord {
                node_size: n,
                hop1_fanout: hop1,
                hop2_fanout: hop2,
                epoch,
                batch: i,
                ms,
                stats: &batch.stats(),
            };
            log.push_str(&serde_json::to_string(&record).map_err(alp_core::Error::from)?);
            log.push('\n');
        }
    }
    let train_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let tasks = build_tasks(
        &test,
        &d.target,
        &d.anchors.targets(),
        cfg.eval.candidates,
        cfg.seed,
    )?;
    model_ranks(
        &state.params,
        &view,
        &tasks,
        &train_cfg.sampling,
        cfg.eval.batch_size,
        cfg.workers,
    )?;
    let test_s = start.elapsed().as_secs_f64();
    Ok(BenchRow {
        node_size: n,
        per_batch_ms: median(&mut times),
        train_s,
        test_s,
        hop1_fanout: hop1,
        hop2_fanout: hop2,
    })
}

/// Timing over node sizes on identical random networks, plus optional
/// fan-out sweeps. Writes `benchmark.csv` and per-batch `batches.jsonl`.
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<Vec<BenchRow>, CliError> {
    let b = &cfg.benchmark;
    let base = cfg.train.sampling.fanouts.clone();
    let k = base.len();
    if !b.hop2_sweep.is_empty() && k < 2 {
        return Err(CliError::Usage(
            "a 2-hop fan-out sweep needs at least 2 hops".into(),
        ));
    }
    let mut runs: Vec<(usize, Vec<usize>)> = b.sizes.iter().map(|&n| (n, base.clone())).collect();
    for &q in &b.hop1_sweep {
        let mut f = base.clone();
        f[k - 1] = q;
        runs.push((b.sweep_size, f));
    }
    for &q in &b.hop2_sweep {
        let mut f = base.clone();
        f[k - 2] = q;
        runs.push((b.sweep_size, f));
    }
    if runs.iter().any(|(_, f)| f.contains(&0)) {
        return Err(CliError::Usage("fan-outs must be positive".into()));
    }
    let out = prepare_out(cfg)?;
    let mut log = String::new();
    let mut rows = Vec::new();
    for (n, fanouts) in &runs {
        let row = bench_one(cfg, *n, fanouts, &mut log)?;
        log::info!("n={} per-batch {:.3} ms", row.node_size, row.per_batch_ms);
        rows.push(row);
    }
    let mut csv = String::from("node_size,per_batch_ms,train_s,test_s,hop1_fanout,hop2_fanout\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{:.4},{:.4},{:.4},{},{}",
            r.node_size, r.per_batch_ms, r.train_s, r.test_s, r.hop1_fanout, r.hop2_fanout
        )
        .expect("writing to a String");
    }
    fs::write(out.join("benchmark.csv"), csv)?;
    fs::write(out.join("batches.jsonl"), log)?;
    Ok(rows)
}

/// Writes `embeddings.tsv`: per pair `s`, `t`, then the final embedding.
pub fn cmd_export_embeddings(cfg: &RunConfig) -> Result<usize, CliError> {
    let checkpoint = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::Usage("export-embeddings needs --checkpoint".into()))?;
    let pairs_path = cfg
        .pairs
        .as_ref()
        .ok_or_else(|| CliError::Usage("export-embeddings needs --pairs".into()))?;
    let d = load_dataset(cfg)?;
    let view = view(cfg, &d)?;
    let params = Checkpoint::load(checkpoint)?.state.params;
    check_compatible(&params, &view, &cfg.train)?;
    let pairs: Vec<MatchingNode> =
        read_pair_file(pairs_path, d.source.node_count(), d.target.node_count())?
            .into_iter()
            .map(|(s, t)| MatchingNode::new(s, t))
            .collect();
    let out = prepare_out(cfg)?;
    let mut text = String::new();
    if !pairs.is_empty() {
        let (embeddings, _) = embed_pairs(
            &params,
            &view,
            &pairs,
            &cfg.train.sampling,
            cfg.eval.batch_size,
        )?;
        for (m, z) in pairs.iter().zip(&embeddings) {
            write!(text, "{}\t{}", m.s, m.t).expect("writing to a String");
            for x in z {
                write!(text, "\t{x}").expect("writing to a String");
            }
            text.push('\n');
        }
    }
    fs::write(out.join("embeddings.tsv"), text)?;
    Ok(pairs.len())
}

/// Reads a JSON artifact back, for callers that post-process outputs.
pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text).map_err(alp_core::Error::from)?)
}
