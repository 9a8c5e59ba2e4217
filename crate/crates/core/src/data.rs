//! Dataset bundles: the line-oriented text format, its loader and writer,
//! split construction and a stochastic block model generator.
//!
//! A bundle file is UTF-8 with five sections in this order:
//!
//! ```text
//! #meta
//! format=sgnn-graph/1
//! name=cora
//! source=planetoid
//! nodes=2708
//! edges=5278
//! directed_edges=5429
//! classes=7
//! features=1433
//! feature_nnz=49216
//! train=140
//! val=500
//! test=1000
//! checksum=<sha-256 hex>
//! #edges
//! 0 633            one undirected edge per line, u < v, sorted
//! #features
//! 0 19 1           node dim value, sorted by (node, dim), zeros omitted
//! #labels
//! 0 3              node class, one line per node
//! #masks
//! 0 train          node split for split members only
//! ```
//!
//! `directed_edges` is optional. Extra `key=value` lines in `#meta` are kept
//! in order after the fixed keys. Values are written in Rust's shortest
//! round-trip decimal form (`1`, `0.25`, `0.0001`). The checksum is the
//! SHA-256 of the file with the `checksum=` line removed.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::clock::stream_rng;
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphInput, Splits};
use crate::mask::NodeMask;

pub const FORMAT_TAG: &str = "sgnn-graph/1";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub source: String,
    pub graph: Graph,
    /// Citation links before symmetrization, when known.
    pub directed_edges: Option<usize>,
    /// Extra metadata lines.
    pub extra: Vec<(String, String)>,
    /// Lowercase hex SHA-256 of the canonical form.
    pub checksum: String,
    /// Non-fatal findings from loading.
    pub warnings: Vec<String>,
}

impl DatasetBundle {
    pub fn new(name: impl Into<String>, source: impl Into<String>, graph: Graph) -> Self {
        let mut bundle = DatasetBundle {
            name: name.into(),
            source: source.into(),
            graph,
            directed_edges: None,
            extra: Vec::new(),
            checksum: String::new(),
            warnings: Vec::new(),
        };
        bundle.checksum = checksum_of(&bundle.body_without_checksum());
        bundle
    }

    /// Canonical file contents, checksum included.
    pub fn to_canonical(&self) -> String {
        let body = self.body_without_checksum();
        let checksum = checksum_of(&body);
        let split_at = body
            .find("#edges\n")
            .expect("canonical body always has an edges section");
        let mut out = String::with_capacity(body.len() + 80);
        out.push_str(&body[..split_at]);
        let _ = writeln!(out, "checksum={checksum}");
        out.push_str(&body[split_at..]);
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_canonical())?;
        Ok(())
    }

    fn body_without_checksum(&self) -> String {
        let g = &self.graph;
        let splits = g.splits();
        let mut s = String::new();
        let feature_nnz = g
            .features()
            .as_slice()
            .iter()
            .filter(|&&v| v != 0.0)
            .count();
        s.push_str("#meta\n");
        let _ = writeln!(s, "format={FORMAT_TAG}");
        let _ = writeln!(s, "name={}", self.name);
        let _ = writeln!(s, "source={}", self.source);
        let _ = writeln!(s, "nodes={}", g.num_nodes());
        let _ = writeln!(s, "edges={}", g.num_edges());
        if let Some(d) = self.directed_edges {
            let _ = writeln!(s, "directed_edges={d}");
        }
        let _ = writeln!(s, "classes={}", g.num_classes());
        let _ = writeln!(s, "features={}", g.feature_dim());
        let _ = writeln!(s, "feature_nnz={feature_nnz}");
        let _ = writeln!(s, "train={}", splits.train.count());
        let _ = writeln!(s, "val={}", splits.val.count());
        let _ = writeln!(s, "test={}", splits.test.count());
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k}={v}");
        }
        s.push_str("#edges\n");
        for &(u, v) in g.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s.push_str("#features\n");
        for node in 0..g.num_nodes() {
            for (dim, &value) in g.features().row(node).iter().enumerate() {
                if value != 0.0 {
                    let _ = writeln!(s, "{node} {dim} {value}");
                }
            }
        }
        s.push_str("#labels\n");
        for (node, label) in g.labels().iter().enumerate() {
            let _ = writeln!(s, "{node} {label}");
        }
        s.push_str("#masks\n");
        for node in 0..g.num_nodes() {
            let split = if splits.train.get(node) {
                "train"
            } else if splits.val.get(node) {
                "val"
            } else if splits.test.get(node) {
                "test"
            } else {
                continue;
            };
            let _ = writeln!(s, "{node} {split}");
        }
        s
    }
}

fn checksum_of(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Checksum of raw file text with its `checksum=` line dropped.
pub fn content_checksum(text: &str) -> String {
    let mut hasher = Sha256::new();
    for line in text.split_inclusive('\n') {
        if !line.starts_with("checksum=") {
            hasher.update(line.as_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetBundle> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Meta,
    Edges,
    Features,
    Labels,
    Masks,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_fields<const N: usize>(line_no: usize, line: &str) -> Result<[&str; N]> {
    let mut parts = line.split(' ');
    let mut out = [""; N];
    for slot in out.iter_mut() {
        *slot = parts
            .next()
            .filter(|p| !p.is_empty())
            .ok_or_else(|| parse_err(line_no, format!("expected {N} fields in `{line}`")))?;
    }
    if parts.next().is_some() {
        return Err(parse_err(
            line_no,
            format!("expected {N} fields in `{line}`"),
        ));
    }
    Ok(out)
}

fn parse_index(line_no: usize, field: &str, what: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad {what} `{field}`")))
}

pub fn parse_dataset(text: &str) -> Result<DatasetBundle> {
    let mut section: Option<Section> = None;
    let mut seen: Vec<Section> = Vec::new();
    let mut meta: Vec<(String, String, usize)> = Vec::new();
    let mut edge_lines: Vec<(usize, usize, usize)> = Vec::new();
    let mut feature_lines: Vec<(usize, usize, f64, usize)> = Vec::new();
    let mut label_lines: Vec<(usize, usize, usize)> = Vec::new();
    let mut mask_lines: Vec<(usize, &str, usize)> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('#') {
            let next = match name {
                "meta" => Section::Meta,
                "edges" => Section::Edges,
                "features" => Section::Features,
                "labels" => Section::Labels,
                "masks" => Section::Masks,
                other => return Err(parse_err(line_no, format!("unknown section `#{other}`"))),
            };
            if seen.last().is_some_and(|&s| s >= next) {
                return Err(parse_err(
                    line_no,
                    format!("section `#{name}` out of order"),
                ));
            }
            seen.push(next);
            section = Some(next);
            continue;
        }
        match section {
            None => return Err(parse_err(line_no, "content before the #meta section")),
            Some(Section::Meta) => {
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    parse_err(line_no, format!("expected key=value, got `{line}`"))
                })?;
                meta.push((k.to_string(), v.to_string(), line_no));
            }
            Some(Section::Edges) => {
                let [u, v] = parse_fields::<2>(line_no, line)?;
                edge_lines.push((
                    parse_index(line_no, u, "node")?,
                    parse_index(line_no, v, "node")?,
                    line_no,
                ));
            }
            Some(Section::Features) => {
                let [node, dim, value] = parse_fields::<3>(line_no, line)?;
                let value: f64 = value
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad feature value `{value}`")))?;
                if !value.is_finite() {
                    return Err(parse_err(line_no, "feature value is not finite"));
                }
                feature_lines.push((
                    parse_index(line_no, node, "node")?,
                    parse_index(line_no, dim, "feature dimension")?,
                    value,
                    line_no,
                ));
            }
            Some(Section::Labels) => {
                let [node, class] = parse_fields::<2>(line_no, line)?;
                label_lines.push((
                    parse_index(line_no, node, "node")?,
                    parse_index(line_no, class, "class")?,
                    line_no,
                ));
            }
            Some(Section::Masks) => {
                let [node, split] = parse_fields::<2>(line_no, line)?;
                mask_lines.push((parse_index(line_no, node, "node")?, split, line_no));
            }
        }
    }
    let eof_line = last_line + 1;
    for required in [
        Section::Meta,
        Section::Edges,
        Section::Features,
        Section::Labels,
        Section::Masks,
    ] {
        if !seen.contains(&required) {
            return Err(parse_err(
                eof_line,
                "file ends before all sections were read",
            ));
        }
    }

    // meta
    let mut fields: HashMap<&str, (&str, usize)> = HashMap::new();
    let mut extra = Vec::new();
    const KNOWN: [&str; 13] = [
        "format",
        "name",
        "source",
        "nodes",
        "edges",
        "directed_edges",
        "classes",
        "features",
        "feature_nnz",
        "train",
        "val",
        "test",
        "checksum",
    ];
    for (k, v, line_no) in &meta {
        if KNOWN.contains(&k.as_str()) {
            if fields.insert(k.as_str(), (v.as_str(), *line_no)).is_some() {
                return Err(parse_err(*line_no, format!("duplicate meta key `{k}`")));
            }
        } else {
            extra.push((k.clone(), v.clone()));
        }
    }
    let meta_line = |key: &str| fields.get(key).map_or(1, |&(_, l)| l);
    let required = |key: &'static str| -> Result<&str> {
        fields
            .get(key)
            .map(|&(v, _)| v)
            .ok_or_else(|| parse_err(eof_line, format!("missing meta key `{key}`")))
    };
    let count = |key: &'static str| -> Result<usize> {
        let v = required(key)?;
        v.parse()
            .map_err(|_| parse_err(meta_line(key), format!("bad count `{v}` for `{key}`")))
    };
    let format = required("format")?;
    if format != FORMAT_TAG {
        return Err(parse_err(
            meta_line("format"),
            format!("unsupported format `{format}`"),
        ));
    }
    let n = count("nodes")?;
    let num_classes = count("classes")?;
    let feature_dim = count("features")?;
    let declared_checksum = required("checksum")?.to_string();
    let directed_edges = match fields.get("directed_edges") {
        Some(_) => Some(count("directed_edges")?),
        None => None,
    };

    // edges
    let mut edges = Vec::with_capacity(edge_lines.len());
    for w in edge_lines.windows(2) {
        if (w[0].0, w[0].1) >= (w[1].0, w[1].1) {
            return Err(parse_err(w[1].2, "edges must be sorted and unique"));
        }
    }
    for &(u, v, line_no) in &edge_lines {
        if u >= v {
            return Err(parse_err(
                line_no,
                format!("edge `{u} {v}` must have u < v"),
            ));
        }
        if v >= n {
            return Err(parse_err(line_no, format!("node {v} out of range")));
        }
        edges.push((u, v));
    }

    // features
    let mut features = Matrix::zeros(n, feature_dim);
    let mut prev: Option<(usize, usize)> = None;
    for &(node, dim, value, line_no) in &feature_lines {
        if node >= n {
            return Err(parse_err(line_no, format!("node {node} out of range")));
        }
        if dim >= feature_dim {
            return Err(parse_err(
                line_no,
                format!("feature dimension {dim} out of range"),
            ));
        }
        if prev.is_some_and(|p| p >= (node, dim)) {
            return Err(parse_err(line_no, "features must be sorted and unique"));
        }
        prev = Some((node, dim));
        features[(node, dim)] = value;
    }

    // labels
    let mut labels = vec![usize::MAX; n];
    for &(node, class, line_no) in &label_lines {
        if node >= n {
            return Err(parse_err(line_no, format!("node {node} out of range")));
        }
        if labels[node] != usize::MAX {
            return Err(parse_err(line_no, format!("node {node} labelled twice")));
        }
        labels[node] = class;
    }
    if let Some(node) = labels.iter().position(|&l| l == usize::MAX) {
        return Err(parse_err(eof_line, format!("node {node} has no label")));
    }

    // masks
    let mut splits = Splits::empty(n);
    let mut assigned = vec![false; n];
    for &(node, split, line_no) in &mask_lines {
        if node >= n {
            return Err(parse_err(line_no, format!("node {node} out of range")));
        }
        if std::mem::replace(&mut assigned[node], true) {
            return Err(parse_err(
                line_no,
                format!("node {node} listed twice in #masks"),
            ));
        }
        match split {
            "train" => splits.train.set(node, true),
            "val" => splits.val.set(node, true),
            "test" => splits.test.set(node, true),
            other => return Err(parse_err(line_no, format!("unknown split `{other}`"))),
        }
    }

    let (graph, _) = Graph::build(GraphInput {
        num_nodes: n,
        num_classes,
        edges,
        features,
        labels,
        splits,
    })?;

    let stats = [
        ("edges", count("edges")?, graph.num_edges()),
        ("feature_nnz", count("feature_nnz")?, feature_lines.len()),
        ("train", count("train")?, graph.train_mask().count()),
        ("val", count("val")?, graph.val_mask().count()),
        ("test", count("test")?, graph.test_mask().count()),
    ];
    for (key, declared, found) in stats {
        if declared != found {
            return Err(Error::StatsMismatch {
                key,
                declared,
                found,
            });
        }
    }

    let computed = content_checksum(text);
    if computed != declared_checksum {
        return Err(Error::ChecksumMismatch {
            declared: declared_checksum,
            computed,
        });
    }

    let mut warnings = Vec::new();
    let featureless = (0..n)
        .filter(|&v| graph.features().row(v).iter().all(|&x| x == 0.0))
        .count();
    if featureless > 0 {
        warnings.push(format!("{featureless} nodes have all-zero features"));
    }

    Ok(DatasetBundle {
        name: required("name")?.to_string(),
        source: fields.get("source").map_or("", |&(v, _)| v).to_string(),
        graph,
        directed_edges,
        extra,
        checksum: computed,
        warnings,
    })
}

/// How many nodes go into each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub per_class_train: usize,
    pub val: usize,
    /// `None` puts every remaining node in the test set.
    pub test: Option<usize>,
}

/// Random split with `per_class_train` training nodes per class, then `val`
/// validation nodes and the test nodes drawn from the remainder.
pub fn standard_split(
    labels: &[usize],
    num_classes: usize,
    spec: SplitSpec,
    seed: u64,
) -> Result<Splits> {
    if spec.per_class_train == 0 {
        return Err(Error::InvalidConfig(
            "per-class training count must be positive".into(),
        ));
    }
    let n = labels.len();
    let mut rng = stream_rng(seed, 0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (v, &c) in labels.iter().enumerate() {
        if c >= num_classes {
            return Err(Error::LabelOutOfRange {
                node: v,
                label: c,
                num_classes,
            });
        }
        by_class[c].push(v);
    }
    let mut splits = Splits::empty(n);
    let mut rest = Vec::with_capacity(n);
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < spec.per_class_train {
            return Err(Error::ClassTooSmall {
                class,
                available: members.len(),
                required: spec.per_class_train,
            });
        }
        members.shuffle(&mut rng);
        for &v in &members[..spec.per_class_train] {
            splits.train.set(v, true);
        }
        rest.extend_from_slice(&members[spec.per_class_train..]);
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let test = spec.test.unwrap_or(rest.len().saturating_sub(spec.val));
    if spec.val + test > rest.len() {
        return Err(Error::InvalidConfig(format!(
            "split needs {} validation and {test} test nodes but only {} remain after training",
            spec.val,
            rest.len()
        )));
    }
    for &v in &rest[..spec.val] {
        splits.val.set(v, true);
    }
    for &v in &rest[spec.val..spec.val + test] {
        splits.test.set(v, true);
    }
    Ok(splits)
}

/// Stochastic block model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian feature noise.
    pub noise: f64,
    pub per_class_train: usize,
    /// `None` scales Planetoid's 500 validation nodes by `n / 2708`.
    pub val: Option<usize>,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            blocks: 3,
            block_size: 100,
            p_in: 0.1,
            p_out: 0.005,
            feature_dim: 16,
            noise: 1.0,
            per_class_train: 20,
            val: None,
            seed: 1,
        }
    }
}

impl SbmConfig {
    pub fn num_nodes(&self) -> usize {
        self.blocks * self.block_size
    }

    pub fn val_count(&self) -> usize {
        self.val
            .unwrap_or_else(|| (self.num_nodes() * 500 + 1354) / 2708)
    }

    /// Expected number of undirected edges.
    pub fn expected_edges(&self) -> f64 {
        let s = self.block_size as f64;
        let b = self.blocks as f64;
        let within = b * s * (s - 1.0) / 2.0;
        let between = b * (b - 1.0) / 2.0 * s * s;
        within * self.p_in + between * self.p_out
    }

    /// Variance of the undirected edge count.
    pub fn edge_count_variance(&self) -> f64 {
        let s = self.block_size as f64;
        let b = self.blocks as f64;
        let within = b * s * (s - 1.0) / 2.0;
        let between = b * (b - 1.0) / 2.0 * s * s;
        within * self.p_in * (1.0 - self.p_in) + between * self.p_out * (1.0 - self.p_out)
    }

    /// Parses `sbm:BxS`, e.g. `sbm:3x100`, on top of the defaults.
    pub fn from_spec(spec: &str) -> Result<SbmConfig> {
        let bad = || Error::InvalidConfig(format!("expected sbm:<blocks>x<size>, got `{spec}`"));
        let dims = spec.strip_prefix("sbm:").ok_or_else(bad)?;
        let (b, s) = dims.split_once('x').ok_or_else(bad)?;
        Ok(SbmConfig {
            blocks: b.parse().map_err(|_| bad())?,
            block_size: s.parse().map_err(|_| bad())?,
            ..SbmConfig::default()
        })
    }

    fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.blocks == 0 || self.block_size == 0 {
            return Err(Error::InvalidConfig("SBM needs at least one node".into()));
        }
        if !prob(self.p_in) || !prob(self.p_out) {
            return Err(Error::InvalidConfig(format!(
                "SBM probabilities must be in [0, 1], got {} and {}",
                self.p_in, self.p_out
            )));
        }
        if self.feature_dim < self.blocks {
            return Err(Error::InvalidConfig(format!(
                "feature_dim {} is smaller than the block count {}",
                self.feature_dim, self.blocks
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bad noise level {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Samples an SBM graph. Class is block id; features are the one-hot block
/// indicator plus Gaussian noise.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<DatasetBundle> {
    cfg.validate()?;
    let n = cfg.num_nodes();
    let block = |v: usize| v / cfg.block_size;

    let mut edge_rng = stream_rng(cfg.seed, 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block(u) == block(v) {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if edge_rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut feature_rng = stream_rng(cfg.seed, 1);
    let normal = Normal::new(0.0, cfg.noise)
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
    let mut features = Matrix::zeros(n, cfg.feature_dim);
    for v in 0..n {
        for (d, x) in features.row_mut(v).iter_mut().enumerate() {
            let centroid = if d == block(v) { 1.0 } else { 0.0 };
            *x = centroid + normal.sample(&mut feature_rng);
        }
    }

    let labels: Vec<usize> = (0..n).map(block).collect();
    let splits = standard_split(
        &labels,
        cfg.blocks,
        SplitSpec {
            per_class_train: cfg.per_class_train,
            val: cfg.val_count(),
            test: None,
        },
        cfg.seed ^ 0x5b11_7000,
    )?;
    let (graph, _) = Graph::build(GraphInput {
        num_nodes: n,
        num_classes: cfg.blocks,
        edges,
        features,
        labels,
        splits,
    })?;
    let name = format!("sbm-{}x{}", cfg.blocks, cfg.block_size);
    let source = format!(
        "sbm blocks={} size={} p_in={} p_out={} dim={} noise={} seed={}",
        cfg.blocks, cfg.block_size, cfg.p_in, cfg.p_out, cfg.feature_dim, cfg.noise, cfg.seed
    );
    Ok(DatasetBundle::new(name, source, graph))
}

/// Nodes reachable from `start`, including it.
pub fn component_of(g: &Graph, start: usize) -> NodeMask {
    let mut seen = NodeMask::empty(g.num_nodes());
    let mut stack = vec![start];
    seen.set(start, true);
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            if !seen.get(v) {
                seen.set(v, true);
                stack.push(v);
            }
        }
    }
    seen
}
