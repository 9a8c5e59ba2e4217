mod common;

use common::stats::{chi2_critical_1pct, chi2_paired_binomial, mean};
use common::{random_graph, rng};
use nalgebra::DMatrix;
use rand::Rng;
use sgnn_core::clock::stream_rng;
use sgnn_core::engine::{GcnConfig, Model};
use sgnn_core::graph::normalize;
use sgnn_core::regularizers::{apply, plan_epoch, RegularizerConfig, RegularizerKind};
use sgnn_core::Matrix;

fn sgnn(lambda: f64, t_cut: f64) -> RegularizerConfig {
    RegularizerConfig {
        kind: RegularizerKind::Sgnn,
        lambda,
        t_cut,
        ..RegularizerConfig::default()
    }
}

#[test]
fn sgnn_active_fraction_matches_exponential_cdf() {
    let g = random_graph(10_000, 0.0, 1, 1, &mut rng(1));
    let mut r = stream_rng(2, 0);
    for (lambda, t_cut) in [(1.0, 0.7), (2.0, 0.25), (0.1, 3.0)] {
        let cfg = sgnn(lambda, t_cut);
        let p = cfg.expected_active_fraction();
        let fractions: Vec<f64> = (0..100)
            .map(|e| {
                plan_epoch(&cfg, &g, 16, e, &mut r)
                    .unwrap()
                    .active_fraction()
            })
            .collect();
        // the mean of 100 plans pools 10^6 Bernoulli(p) trials
        let sd = (p * (1.0 - p) / 1e6).sqrt();
        assert!(
            (mean(&fractions) - p).abs() < 3.0 * sd,
            "λ={lambda} t={t_cut}"
        );
    }
}

#[test]
fn sgnn_and_matching_drop_node_select_identically_distributed_nodes() {
    let g = random_graph(100, 0.05, 1, 1, &mut rng(3));
    let (lambda, t_cut) = (1.0, 0.7);
    let clock = sgnn(lambda, t_cut);
    let node = RegularizerConfig {
        kind: RegularizerKind::DropNode,
        p: (-lambda * t_cut).exp(),
        ..RegularizerConfig::default()
    };
    let epochs = 10_000u64;
    let count = |cfg: &RegularizerConfig, seed| {
        let mut r = stream_rng(seed, 0);
        let mut hits = vec![0u64; 100];
        for e in 0..epochs as usize {
            let plan = plan_epoch(cfg, &g, 16, e, &mut r).unwrap();
            for v in plan.node_keep.unwrap().iter_active() {
                hits[v] += 1;
            }
        }
        hits
    };
    let (stat, dof) = chi2_paired_binomial(&count(&clock, 4), &count(&node, 5), epochs);
    assert!(stat < chi2_critical_1pct(dof), "chi2 = {stat} on {dof} dof");
}

#[test]
fn inverted_dropout_preserves_expected_features() {
    let g = random_graph(30, 0.1, 8, 2, &mut rng(6));
    let adj = normalize(&g);
    let cfg = RegularizerConfig {
        kind: RegularizerKind::Dropout,
        p: 0.5,
        ..RegularizerConfig::default()
    };
    let mut r = stream_rng(7, 0);
    let trials = 40_000;
    let mut sum = Matrix::zeros(30, 8);
    let mut hidden_sum = Matrix::zeros(30, 16);
    for e in 0..trials {
        let plan = plan_epoch(&cfg, &g, 16, e, &mut r).unwrap();
        let eff = apply(&plan, &g, &adj).unwrap();
        for (s, x) in sum.as_mut_slice().iter_mut().zip(eff.features.as_slice()) {
            *s += x;
        }
        for (s, x) in hidden_sum
            .as_mut_slice()
            .iter_mut()
            .zip(eff.hidden_keep.unwrap().as_slice())
        {
            *s += x;
        }
    }
    // the sum over all entries averages 240·trials masks, so its relative
    // error is far below 1%
    let total: f64 = sum.as_slice().iter().sum::<f64>() / trials as f64;
    let want: f64 = g.features().as_slice().iter().sum();
    let abs_total: f64 = g.features().as_slice().iter().map(|x| x.abs()).sum();
    assert!((total - want).abs() < 0.01 * abs_total);
    let keep_mean = hidden_sum.as_slice().iter().sum::<f64>() / (trials * 30 * 16) as f64;
    assert!((keep_mean - 1.0).abs() < 0.01);
}

#[test]
fn drop_edge_keeps_expected_share_of_edges() {
    let g = random_graph(200, 0.1, 1, 1, &mut rng(8));
    let cfg = RegularizerConfig {
        kind: RegularizerKind::DropEdge,
        p: 0.3,
        ..RegularizerConfig::default()
    };
    let mut r = stream_rng(9, 0);
    let mut kept = 0usize;
    let rounds = 200;
    for e in 0..rounds {
        let plan = plan_epoch(&cfg, &g, 16, e, &mut r).unwrap();
        kept += plan.edge_keep.unwrap().iter().filter(|&&k| k).count();
    }
    let trials = (rounds * g.num_edges()) as f64;
    let sd = (0.7 * 0.3 / trials).sqrt();
    assert!((kept as f64 / trials - 0.7).abs() < 4.0 * sd);
}

fn dense_forward(model: &Model, a: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let to = |m: &Matrix| DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let ones = DMatrix::from_element(a.nrows(), 1, 1.0);
    let h = (a * x * to(&model.w1) + &ones * to(&model.b1)).map(|v| v.max(0.0));
    a * h * to(&model.w2) + &ones * to(&model.b2)
}

#[test]
fn masked_forward_matches_forward_on_extracted_subgraph() {
    let mut r = rng(10);
    for trial in 0..20 {
        let n = 50;
        let g = random_graph(n, 0.08, 5, 3, &mut r);
        let adj = normalize(&g);
        let mut model = Model::init(5, 3, GcnConfig::default(), &mut stream_rng(trial, 1)).unwrap();
        for b in model
            .b1
            .as_mut_slice()
            .iter_mut()
            .chain(model.b2.as_mut_slice())
        {
            *b = r.random_range(-0.5..0.5);
        }
        let cfg = sgnn(1.0, 0.7);
        let plan = plan_epoch(&cfg, &g, 16, 0, &mut stream_rng(trial, 2)).unwrap();
        let active = plan.node_keep.clone().unwrap();
        let eff = apply(&plan, &g, &adj).unwrap();
        let got = model.predict(&eff.operator, &eff.features).unwrap();

        // oracle: principal submatrix of the full operator over the active
        // nodes, reindexed, pushed through an independent dense forward pass
        let idx: Vec<usize> = active.iter_active().collect();
        let full = adj.matrix().to_dense();
        let sub_a = DMatrix::from_fn(idx.len(), idx.len(), |i, j| full[(idx[i], idx[j])]);
        let sub_x = DMatrix::from_fn(idx.len(), 5, |i, j| g.features()[(idx[i], j)]);
        let want = dense_forward(&model, &sub_a, &sub_x);
        for (i, &v) in idx.iter().enumerate() {
            for c in 0..3 {
                assert!((got[(v, c)] - want[(i, c)]).abs() < 1e-12);
            }
        }
        for v in (0..n).filter(|&v| !active.get(v)) {
            assert_eq!(got.row(v), model.b2.row(0));
        }
    }
}
