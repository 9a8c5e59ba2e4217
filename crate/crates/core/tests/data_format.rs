mod common;

use proptest::prelude::*;
use sgnn_core::data::{
    content_checksum, generate_sbm, load_dataset, parse_dataset, DatasetBundle, SbmConfig,
};
use sgnn_core::graph::{Graph, GraphInput, Splits};
use sgnn_core::{Error, Matrix, NodeMask};

fn arb_graph() -> impl Strategy<Value = Graph> {
    (1usize..25, 1usize..5, 1usize..4).prop_flat_map(|(n, dim, classes)| {
        (
            prop::collection::vec((0..n, 0..n), 0..3 * n),
            prop::collection::vec(
                prop_oneof![
                    3 => Just(0.0),
                    2 => -1e3..1e3f64,
                    1 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
                ],
                n * dim,
            ),
            prop::collection::vec(0..classes, n),
            prop::collection::vec(0u8..4, n),
        )
            .prop_map(move |(edges, feats, labels, split)| {
                let mut splits = Splits::empty(n);
                for (v, s) in split.into_iter().enumerate() {
                    match s {
                        0 => splits.train.set(v, true),
                        1 => splits.val.set(v, true),
                        2 => splits.test.set(v, true),
                        _ => {}
                    }
                }
                Graph::build(GraphInput {
                    num_nodes: n,
                    num_classes: classes,
                    edges,
                    features: Matrix::from_vec(n, dim, feats).unwrap(),
                    labels,
                    splits,
                })
                .unwrap()
                .0
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_text_round_trips_exactly(g in arb_graph(), directed in prop::option::of(0usize..100)) {
        let mut bundle = DatasetBundle::new("prop", "generated", g);
        bundle.directed_edges = directed;
        bundle.extra.push(("note".into(), "round trip".into()));
        let text = bundle.to_canonical();
        let parsed = parse_dataset(&text).unwrap();
        prop_assert_eq!(&parsed.graph, &bundle.graph);
        prop_assert_eq!(parsed.directed_edges, directed);
        prop_assert_eq!(&parsed.extra, &bundle.extra);
        prop_assert_eq!(parsed.to_canonical(), text.clone());
        prop_assert_eq!(&parsed.checksum, &content_checksum(&text));
    }
}

#[test]
fn saved_files_load_back() {
    let bundle = generate_sbm(&SbmConfig::from_spec("sbm:2x30").unwrap()).unwrap();
    let path = std::env::temp_dir().join(format!("sgnn-data-{}.txt", std::process::id()));
    bundle.save(&path).unwrap();
    let loaded = load_dataset(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(loaded.graph, bundle.graph);
    assert_eq!(loaded.checksum, bundle.checksum);
}

#[test]
fn any_edit_breaks_the_checksum() {
    let text = generate_sbm(&SbmConfig::from_spec("sbm:2x40").unwrap())
        .unwrap()
        .to_canonical();
    // node 0 sits in block 0; relabel it as class 1
    let tampered = text.replacen("#labels\n0 0\n", "#labels\n0 1\n", 1);
    assert_ne!(tampered, text);
    assert!(matches!(
        parse_dataset(&tampered),
        Err(Error::ChecksumMismatch { .. })
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(
        load_dataset("/nonexistent/sgnn/graph.txt"),
        Err(Error::Io(_))
    ));
}

#[test]
fn sbm_edge_count_is_within_four_sigma() {
    for seed in 1..=10 {
        let cfg = SbmConfig {
            seed,
            ..SbmConfig::default()
        };
        let edges = generate_sbm(&cfg).unwrap().graph.num_edges() as f64;
        let sd = cfg.edge_count_variance().sqrt();
        assert!(
            (edges - cfg.expected_edges()).abs() < 4.0 * sd,
            "seed {seed}: {edges}"
        );
    }
}

#[test]
fn sbm_splits_are_disjoint_and_balanced() {
    let g = generate_sbm(&SbmConfig::default()).unwrap().graph;
    let s = g.splits();
    assert_eq!(s.train.count(), 60);
    assert_eq!(s.val.count(), 55);
    assert_eq!(s.test.count(), 185);
    for class in 0..3 {
        let per_class = s
            .train
            .iter_active()
            .filter(|&v| g.labels()[v] == class)
            .count();
        assert_eq!(per_class, 20);
    }
    let overlap = s.train.intersect(&s.val).unwrap();
    assert_eq!(overlap, NodeMask::empty(300));
    assert!(s.test.intersect(&s.train).unwrap().count() == 0);
}
