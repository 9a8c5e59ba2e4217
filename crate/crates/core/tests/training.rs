mod common;

use common::stats::{chi2_critical_1pct, chi2_paired_binomial, mean};
use sgnn_core::clock::{stream_rng, RenewalAnchor};
use sgnn_core::data::{generate_sbm, SbmConfig};
use sgnn_core::engine::{GcnConfig, Model};
use sgnn_core::graph::normalize;
use sgnn_core::regularizers::{plan_epoch, RegularizerConfig, RegularizerKind};
use sgnn_core::trainer::{
    evaluate, train, ClockMode, Regime, RenewalSchedule, TrainConfig, CSV_HEADER,
};
use sgnn_core::{Graph, NodeMask};

fn sbm() -> Graph {
    generate_sbm(&SbmConfig::default()).unwrap().graph
}

fn config(kind: RegularizerKind) -> TrainConfig {
    TrainConfig {
        reg: RegularizerConfig::new(kind),
        ..TrainConfig::default()
    }
}

fn csv(record: &sgnn_core::trainer::RunRecord) -> String {
    let mut out = Vec::new();
    record.write_csv(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn plain_gcn_separates_planted_blocks() {
    let (_, record) = train(&sbm(), &config(RegularizerKind::None)).unwrap();
    assert_eq!(record.rows.len(), 200);
    assert!(
        record.reported.1 > 0.9,
        "test accuracy {}",
        record.reported.1
    );
}

#[test]
fn every_regularizer_trains_and_early_loss_decreases() {
    let g = sbm();
    for kind in RegularizerKind::ALL {
        let cfg = TrainConfig {
            epochs: 10,
            ..config(kind)
        };
        let (_, record) = train(&g, &cfg).unwrap();
        let losses: Vec<f64> = record.rows.iter().filter_map(|r| r.loss).collect();
        assert!(losses.len() >= 8, "{kind}");
        // stochastic plans make single steps noisy; compare the ends
        let head = mean(&losses[..3]);
        let tail = mean(&losses[losses.len() - 3..]);
        assert!(tail < head, "{kind}: {head} -> {tail}");
    }
}

#[test]
fn runs_are_byte_reproducible() {
    let g = sbm();
    for regime in [Regime::Epoch, Regime::PoissonDynamic] {
        let cfg = TrainConfig {
            regime,
            epochs: 30,
            total_time: 15.0,
            ..config(RegularizerKind::Sgnn)
        };
        let (m1, r1) = train(&g, &cfg).unwrap();
        let (m2, r2) = train(&g, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(csv(&r1), csv(&r2));
        let other = TrainConfig { seed: 2, ..cfg };
        assert_ne!(csv(&train(&g, &other).unwrap().1), csv(&r1));
    }
}

#[test]
fn csv_layout() {
    let cfg = TrainConfig {
        epochs: 3,
        ..config(RegularizerKind::DropNode)
    };
    let text = csv(&train(&sbm(), &cfg).unwrap().1);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 4);
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[0], i.to_string());
        assert_eq!(fields[6], "0");
    }
}

fn dynamic(lambda: f64, dt: f64, anchor: RenewalAnchor) -> f64 {
    let n = 20_000;
    let rates = vec![lambda; n];
    let mut schedule =
        RenewalSchedule::new(rates, 7, 400.0 * dt, dt, anchor, ClockMode::Persistent).unwrap();
    let mut fractions = Vec::new();
    while let Some(step) = schedule.next_step().unwrap() {
        // skip the transient from the t = 0 start
        if step.index >= 100 {
            fractions.push(step.active.fraction());
        }
    }
    mean(&fractions)
}

#[test]
fn dynamic_active_fraction_follows_renewal_rate() {
    for (lambda, dt) in [(1.0, 0.5), (0.2, 0.5), (2.0, 0.1)] {
        // renewing from the previous event time fires on average λΔt clocks
        // per step: the renewal theorem for a Poisson process
        let event = dynamic(lambda, dt, RenewalAnchor::EventTime);
        assert!(
            (event - lambda * dt).abs() < 0.01,
            "event λ={lambda}: {event}"
        );
        // renewing from the firing step makes each step a fresh trial
        let firing = dynamic(lambda, dt, RenewalAnchor::FiringTime);
        let p = 1.0 - (-lambda * dt).exp();
        assert!((firing - p).abs() < 0.01, "firing λ={lambda}: {firing}");
    }
    for anchor in [RenewalAnchor::EventTime, RenewalAnchor::FiringTime] {
        assert!(dynamic(50.0, 1.0, anchor) > 0.99);
    }
}

#[test]
fn zero_horizon_runs_no_steps() {
    let cfg = TrainConfig {
        regime: Regime::PoissonDynamic,
        total_time: 0.0,
        ..config(RegularizerKind::Sgnn)
    };
    let g = sbm();
    let (model, record) = train(&g, &cfg).unwrap();
    assert!(record.rows.is_empty() && record.skipped_steps.is_empty());
    let untrained = Model::init(
        g.feature_dim(),
        g.num_classes(),
        GcnConfig::default(),
        &mut stream_rng(cfg.seed, 1),
    )
    .unwrap();
    assert_eq!(model, untrained);
}

#[test]
fn dynamic_bookkeeping() {
    let g = sbm();
    let cfg = TrainConfig {
        regime: Regime::PoissonDynamic,
        total_time: 10.0,
        dt: 0.5,
        ..config(RegularizerKind::Sgnn)
    };
    let (_, record) = train(&g, &cfg).unwrap();
    assert_eq!(record.rows.len(), 20);
    for (k, row) in record.rows.iter().enumerate() {
        assert_eq!(row.step, k);
        assert_eq!(row.t, k as f64 * 0.5);
        assert_eq!(row.loss.is_none(), record.skipped_steps.contains(&k));
    }
    // nothing has fired at t = 0 yet, so the first step cannot train
    assert_eq!(record.rows[0].active_frac, 0.0);
    assert_eq!(record.skipped_steps.first(), Some(&0));
    let want = record.rows.iter().map(|r| r.active_frac).sum::<f64>() / 20.0;
    assert!((record.mean_active_frac - want).abs() < 1e-15);
}

#[test]
fn fresh_clocks_match_epoch_sgnn_with_cutoff_dt() {
    let g = common::random_graph(100, 0.05, 1, 1, &mut common::rng(9));
    let (lambda, dt) = (1.0, 0.7);
    let steps = 10_000u64;
    let mut schedule = RenewalSchedule::new(
        vec![lambda; 100],
        11,
        steps as f64 * dt,
        dt,
        RenewalAnchor::EventTime,
        ClockMode::Fresh,
    )
    .unwrap();
    let mut fresh = vec![0u64; 100];
    while let Some(step) = schedule.next_step().unwrap() {
        for v in step.active.iter_active() {
            fresh[v] += 1;
        }
    }
    let cfg = RegularizerConfig {
        kind: RegularizerKind::Sgnn,
        lambda,
        t_cut: dt,
        ..RegularizerConfig::default()
    };
    let mut r = stream_rng(12, 2);
    let mut epoch = vec![0u64; 100];
    for e in 0..steps as usize {
        for v in plan_epoch(&cfg, &g, 16, e, &mut r)
            .unwrap()
            .node_keep
            .unwrap()
            .iter_active()
        {
            epoch[v] += 1;
        }
    }
    let (stat, dof) = chi2_paired_binomial(&fresh, &epoch, steps);
    assert!(stat < chi2_critical_1pct(dof), "chi2 = {stat}");
}

#[test]
fn untrained_model_is_near_chance() {
    let g = sbm();
    let adj = normalize(&g);
    let accs: Vec<f64> = (0..20)
        .map(|seed| {
            let model = Model::init(
                g.feature_dim(),
                g.num_classes(),
                GcnConfig::default(),
                &mut stream_rng(seed, 1),
            )
            .unwrap();
            evaluate(&model, &g, &adj, g.test_mask()).unwrap()
        })
        .collect();
    assert!((mean(&accs) - 1.0 / 3.0).abs() < 0.12, "{}", mean(&accs));
}

#[test]
fn evaluation_ignores_regularizer_state() {
    // Evaluation runs on the full graph: a trained model gives the same
    // accuracy whatever regularizer trained it, when evaluated twice.
    let g = sbm();
    let adj = normalize(&g);
    let cfg = TrainConfig {
        epochs: 20,
        ..config(RegularizerKind::Sgnn)
    };
    let (model, record) = train(&g, &cfg).unwrap();
    let a = evaluate(&model, &g, &adj, g.test_mask()).unwrap();
    let b = evaluate(&model, &g, &adj, g.test_mask()).unwrap();
    assert_eq!(a, b);
    assert_eq!(record.reported.1, a);
    assert_eq!(
        evaluate(&model, &g, &adj, &NodeMask::full(g.num_nodes())).unwrap(),
        evaluate(&model, &g, &adj, &NodeMask::full(g.num_nodes())).unwrap()
    );
}

#[test]
fn best_validation_selection_reports_the_best_row() {
    let g = sbm();
    let cfg = TrainConfig {
        epochs: 40,
        select_best_val: true,
        ..config(RegularizerKind::Dropout)
    };
    let (_, record) = train(&g, &cfg).unwrap();
    let best = record
        .rows
        .iter()
        .fold(None::<(f64, f64)>, |acc, r| match acc {
            Some((v, _)) if v >= r.val_acc => acc,
            _ => Some((r.val_acc, r.test_acc)),
        })
        .unwrap();
    assert_eq!(record.reported, best);
}

#[test]
fn invalid_configs_are_rejected() {
    let g = sbm();
    let bad = [
        TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            regime: Regime::PoissonDynamic,
            dt: -1.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            reg: RegularizerConfig {
                kind: RegularizerKind::DropEdge,
                p: 1.5,
                ..RegularizerConfig::default()
            },
            ..TrainConfig::default()
        },
    ];
    for cfg in bad {
        assert!(train(&g, &cfg).is_err());
    }
}
