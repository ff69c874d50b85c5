use alp_core::network::split_anchors;
use alp_core::{eval, synth, trainer, MatchingGraphView, SynthConfig, TrainConfig};

#[test]
fn generate_train_evaluate() -> alp_core::Result<()> {
    let data = synth::generate(&SynthConfig {
        n: 300,
        ..synth::preset("online-offline-like")?
    })?;
    let (train, test) = split_anchors(&data.anchors, 0.8, 0)?;
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let (params, losses) = trainer::train(&data.source, &data.target, &train, &cfg)?;
    assert_eq!(losses.len(), 5);
    let view = MatchingGraphView::new(&data.source, &data.target, cfg.theta)?;
    let tasks = eval::build_tasks(&test, &data.target, &data.anchors.targets(), 20, 0)?;
    let report = eval::evaluate_model(&params, &view, &tasks, &cfg.sampling, 128, 1)?;
    assert_eq!(report.num_tasks, test.len());
    assert!(report.mrr > 0.0 && report.mrr <= 1.0);
    Ok(())
}
