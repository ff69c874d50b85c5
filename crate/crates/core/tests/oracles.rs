//! Library results checked against independent reference computations.

use alp_core::eval::{hits_at, mrr};
use alp_core::matching::{cosine, MatchingGraphView, MatchingNode, ThetaKind};
use alp_core::model::{self, forward, layer_forward, ModelConfig, ModelParams};
use alp_core::network::Network;
use alp_core::rng::rng_from;
use alp_core::sampler::{build_batch, SamplingConfig, SamplingStrategy};
use alp_core::trainer::loss_and_gradients;
use rand::Rng;

fn random_network<R: Rng>(n: usize, p: f64, dim: usize, rng: &mut R) -> Network {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let attrs = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Network::from_edges(&edges, attrs).unwrap()
}

#[test]
fn matching_graph_matches_brute_force() {
    let mut rng = rng_from(42, &[]);
    for _ in 0..50 {
        let ns = rng.random_range(1..=10);
        let nt = rng.random_range(1..=100 / ns);
        let source = random_network(ns, 0.4, 2, &mut rng);
        let target = random_network(nt, 0.4, 2, &mut rng);
        let view = MatchingGraphView::new(&source, &target, ThetaKind::CosineScalar).unwrap();
        let nodes: Vec<MatchingNode> = (0..ns)
            .flat_map(|s| (0..nt).map(move |t| MatchingNode::new(s, t)))
            .collect();
        let mut directed_edges = 0;
        for &a in &nodes {
            let expected: Vec<MatchingNode> = nodes
                .iter()
                .copied()
                .filter(|b| source.has_edge(a.s, b.s) && target.has_edge(a.t, b.t))
                .collect();
            assert_eq!(view.matching_neighbors(a).unwrap(), expected);
            assert_eq!(view.neighbor_count(a), expected.len());
            for &b in &nodes {
                let linked = source.has_edge(a.s, b.s) && target.has_edge(a.t, b.t);
                assert_eq!(view.is_matching_edge(a, b), linked);
            }
            directed_edges += expected.len();
        }
        assert_eq!(
            directed_edges,
            4 * source.edge_count() * target.edge_count()
        );
    }
}

#[test]
fn metrics_match_naive_reference() {
    let mut rng = rng_from(7, &[]);
    for _ in 0..1000 {
        let len = rng.random_range(1..50);
        let ranks: Vec<usize> = (0..len).map(|_| rng.random_range(1..=21)).collect();
        let mut reciprocal = 0.0;
        let (mut top1, mut top10) = (0, 0);
        for &r in &ranks {
            reciprocal += 1.0 / r as f64;
            if r == 1 {
                top1 += 1;
            }
            if r <= 10 {
                top10 += 1;
            }
        }
        let n = ranks.len() as f64;
        assert!((mrr(&ranks).unwrap() - reciprocal / n).abs() <= 1e-12);
        assert!((hits_at(&ranks, 1).unwrap() - top1 as f64 / n).abs() <= 1e-12);
        assert!((hits_at(&ranks, 10).unwrap() - top10 as f64 / n).abs() <= 1e-12);
    }
}

fn instance(seed: u64) -> (Network, Network, Vec<MatchingNode>, Vec<f64>) {
    let mut rng = rng_from(seed, &[]);
    let source = random_network(12, 0.3, 4, &mut rng);
    let target = random_network(12, 0.3, 4, &mut rng);
    let targets: Vec<MatchingNode> = (0..6)
        .map(|_| MatchingNode::new(rng.random_range(0..12), rng.random_range(0..12)))
        .collect();
    let labels = (0..targets.len()).map(|i| (i % 2) as f64).collect();
    (source, target, targets, labels)
}

#[test]
fn batched_forward_matches_per_node_reference() {
    for seed in 0..10 {
        for theta in [
            ThetaKind::CosineScalar,
            ThetaKind::Hadamard,
            ThetaKind::Concat,
        ] {
            let (source, target, targets, _) = instance(seed);
            let view = MatchingGraphView::new(&source, &target, theta).unwrap();
            let cfg = SamplingConfig {
                fanouts: vec![3, 2],
                strategy: SamplingStrategy::Random,
                seed,
            };
            let batch = build_batch(&targets, &view, &cfg, &mut rng_from(seed, &[1])).unwrap();
            let params = ModelParams::init(
                &ModelConfig {
                    input_dim: view.feature_dim(),
                    hidden_dims: vec![5, 3],
                    use_bias: true,
                },
                &mut rng_from(seed, &[2]),
            )
            .unwrap();
            let mut params = params;
            params.layers[0].bias.fill(0.1);
            params.head_bias = -0.2;

            // Reference: plain vectors, one node at a time.
            let mut h: Vec<Vec<f64>> = batch
                .layer(0)
                .iter()
                .map(|&m| {
                    let (xs, xt) = (source.attributes(m.s), target.attributes(m.t));
                    match theta {
                        ThetaKind::CosineScalar => vec![cosine(xs, xt)],
                        ThetaKind::Hadamard => xs.iter().zip(xt).map(|(a, b)| a * b).collect(),
                        ThetaKind::Concat => xs.iter().chain(xt).copied().collect(),
                    }
                })
                .collect();
            for k in 1..=2 {
                let layer = &params.layers[k - 1];
                h = (0..batch.layer(k).len())
                    .map(|i| {
                        let nbrs: Vec<&[f64]> = batch
                            .sampled(k, i)
                            .iter()
                            .map(|&j| h[j].as_slice())
                            .collect();
                        let mean = model::aggregate_mean(&nbrs, h[i].len()).unwrap();
                        layer_forward(&h[i], &mean, &layer.weight, &layer.bias).unwrap()
                    })
                    .collect();
            }
            let out = forward(&batch, &params, &view).unwrap();
            for (i, z) in h.iter().enumerate() {
                let logit: f64 = z
                    .iter()
                    .zip(params.head_weight.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + params.head_bias;
                let p = 1.0 / (1.0 + (-logit).exp());
                for (a, b) in z.iter().zip(out.embeddings.row(i).iter()) {
                    assert!((a - b).abs() < 1e-12);
                }
                assert!((p - out.probabilities[i]).abs() < 1e-12);
            }
        }
    }
}

fn loss_at(
    batch: &alp_core::Batch,
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    labels: &[f64],
) -> f64 {
    let out = forward(batch, params, view).unwrap();
    model::loss(&out.probabilities, labels).unwrap()
}

#[test]
fn gradients_match_central_differences() {
    const H: f64 = 1e-4;
    for seed in 0..20u64 {
        for use_bias in [true, false] {
            let (source, target, targets, labels) = instance(100 + seed);
            let view = MatchingGraphView::new(&source, &target, ThetaKind::Hadamard).unwrap();
            let cfg = SamplingConfig {
                fanouts: vec![3, 2],
                strategy: SamplingStrategy::Random,
                seed,
            };
            let batch = build_batch(&targets, &view, &cfg, &mut rng_from(seed, &[1])).unwrap();
            let mut params = ModelParams::init(
                &ModelConfig {
                    input_dim: 4,
                    hidden_dims: vec![4, 4],
                    use_bias,
                },
                &mut rng_from(seed, &[2]),
            )
            .unwrap();
            if use_bias {
                let mut rng = rng_from(seed, &[3]);
                for l in &mut params.layers {
                    l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
                }
                params.head_bias = 0.3;
            }
            let (_, grads) = loss_and_gradients(&batch, &params, &view, &labels).unwrap();
            let analytic: Vec<(String, Vec<f64>)> = grads
                .tensors()
                .into_iter()
                .map(|(n, g)| (n, g.to_vec()))
                .collect();
            for (ti, (name, g)) in analytic.iter().enumerate() {
                for (j, &a) in g.iter().enumerate() {
                    let mut plus = params.clone();
                    plus.tensors_mut()[ti].1[j] += H;
                    let mut minus = params.clone();
                    minus.tensors_mut()[ti].1[j] -= H;
                    let numeric = (loss_at(&batch, &plus, &view, &labels)
                        - loss_at(&batch, &minus, &view, &labels))
                        / (2.0 * H);
                    let tol = (1e-4 * a.abs().max(numeric.abs())).max(1e-8);
                    assert!(
                        (a - numeric).abs() <= tol,
                        "seed {seed} {name}[{j}]: analytic {a} numeric {numeric}"
                    );
                }
            }
        }
    }
}
