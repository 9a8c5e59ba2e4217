//! Training-time stochastic schemes: Dropout, DropEdge, DropNode and
//! clock-driven node selection ("sgnn").
//!
//! A scheme is turned into a [`StochasticPlan`] once per epoch by
//! [`plan_epoch`], and the plan is turned into the operator and features the
//! forward pass sees by [`apply`].

use std::borrow::Cow;

use rand::{Rng, RngCore};

use crate::clock::{node_rates, ClockState, RateMode};
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::{renormalized, Graph, NormalizedAdjacency, SparseMatrix};
use crate::mask::NodeMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegularizerKind {
    #[default]
    None,
    Dropout,
    DropEdge,
    DropNode,
    Sgnn,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 5] = [
        RegularizerKind::None,
        RegularizerKind::Dropout,
        RegularizerKind::DropEdge,
        RegularizerKind::DropNode,
        RegularizerKind::Sgnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::None => "none",
            RegularizerKind::Dropout => "dropout",
            RegularizerKind::DropEdge => "drop_edge",
            RegularizerKind::DropNode => "drop_node",
            RegularizerKind::Sgnn => "sgnn",
        }
    }

    /// Whether the scheme removes whole nodes from propagation and the loss.
    pub fn selects_nodes(self) -> bool {
        matches!(self, RegularizerKind::DropNode | RegularizerKind::Sgnn)
    }
}

impl std::str::FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.replace('-', "_").to_ascii_lowercase();
        RegularizerKind::ALL
            .into_iter()
            .find(|k| k.name() == normalized)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown regularizer `{s}`")))
    }
}

impl std::fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerConfig {
    pub kind: RegularizerKind,
    /// Drop probability for the baselines.
    pub p: f64,
    /// Clock intensity for sgnn.
    pub lambda: f64,
    /// Activation cutoff for sgnn.
    pub t_cut: f64,
    pub rate_mode: RateMode,
    /// Recompute degrees on the surviving subgraph instead of masking the
    /// full-graph operator.
    pub renormalize_subgraph: bool,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig {
            kind: RegularizerKind::None,
            p: 0.5,
            lambda: 1.0,
            t_cut: 0.7,
            rate_mode: RateMode::Uniform,
            renormalize_subgraph: false,
        }
    }
}

impl RegularizerConfig {
    pub fn new(kind: RegularizerKind) -> Self {
        RegularizerConfig {
            kind,
            ..RegularizerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RegularizerKind::None => Ok(()),
            RegularizerKind::Dropout | RegularizerKind::DropEdge | RegularizerKind::DropNode => {
                if (0.0..1.0).contains(&self.p) {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "drop probability must be in [0, 1), got {}",
                        self.p
                    )))
                }
            }
            RegularizerKind::Sgnn => {
                if !(self.lambda.is_finite() && self.lambda > 0.0) {
                    Err(Error::InvalidConfig(format!(
                        "lambda must be positive, got {}",
                        self.lambda
                    )))
                } else if !(self.t_cut.is_finite() && self.t_cut > 0.0) {
                    Err(Error::InvalidConfig(format!(
                        "t_cut must be positive, got {}",
                        self.t_cut
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Fraction of nodes an sgnn plan keeps on average with uniform rates.
    pub fn expected_active_fraction(&self) -> f64 {
        1.0 - (-self.lambda * self.t_cut).exp()
    }
}

/// The random choices made for one training epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPlan {
    pub epoch: usize,
    /// Input-feature mask, entries `0` or `1/(1-p)`.
    pub feature_keep: Option<Matrix>,
    /// Hidden-activation mask, entries `0` or `1/(1-p)`.
    pub hidden_keep: Option<Matrix>,
    /// One flag per undirected edge, in [`Graph::edges`] order.
    pub edge_keep: Option<Vec<bool>>,
    /// Nodes that take part in propagation and the loss.
    pub node_keep: Option<NodeMask>,
    pub renormalize: bool,
}

impl StochasticPlan {
    pub fn identity(epoch: usize) -> Self {
        StochasticPlan {
            epoch,
            feature_keep: None,
            hidden_keep: None,
            edge_keep: None,
            node_keep: None,
            renormalize: false,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.feature_keep.is_none()
            && self.hidden_keep.is_none()
            && self.edge_keep.is_none()
            && self.node_keep.is_none()
    }

    /// Fraction of nodes taking part in this epoch.
    pub fn active_fraction(&self) -> f64 {
        self.node_keep.as_ref().map_or(1.0, NodeMask::fraction)
    }
}

fn inverted_dropout_mask<R: RngCore + ?Sized>(
    rows: usize,
    cols: usize,
    p: f64,
    rng: &mut R,
) -> Matrix {
    let scale = 1.0 / (1.0 - p);
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

/// Draws the random choices of `cfg` for one epoch on `g`. `hidden` is the
/// width of the hidden layer, used for the activation dropout mask.
pub fn plan_epoch<R: RngCore + ?Sized>(
    cfg: &RegularizerConfig,
    g: &Graph,
    hidden: usize,
    epoch: usize,
    rng: &mut R,
) -> Result<StochasticPlan> {
    cfg.validate()?;
    let mut plan = StochasticPlan::identity(epoch);
    plan.renormalize = cfg.renormalize_subgraph;
    let n = g.num_nodes();
    match cfg.kind {
        RegularizerKind::None => {}
        _ if cfg.kind != RegularizerKind::Sgnn && cfg.p == 0.0 => {}
        RegularizerKind::Dropout => {
            plan.feature_keep = Some(inverted_dropout_mask(n, g.feature_dim(), cfg.p, rng));
            plan.hidden_keep = Some(inverted_dropout_mask(n, hidden, cfg.p, rng));
        }
        RegularizerKind::DropEdge => {
            plan.edge_keep = Some(
                (0..g.num_edges())
                    .map(|_| rng.random::<f64>() >= cfg.p)
                    .collect(),
            );
        }
        RegularizerKind::DropNode => {
            plan.node_keep = Some(NodeMask::from_bools(
                (0..n).map(|_| rng.random::<f64>() >= cfg.p).collect(),
            ));
        }
        RegularizerKind::Sgnn => {
            let rates = node_rates(g, cfg.lambda, cfg.rate_mode)?;
            let clocks = ClockState::with_rng(rates, &mut *rng)?;
            plan.node_keep = Some(clocks.active_set(cfg.t_cut)?);
        }
    }
    Ok(plan)
}

/// Operator, features and loss support for one forward pass.
#[derive(Debug, Clone)]
pub struct EffectiveInputs<'a> {
    pub operator: Cow<'a, SparseMatrix>,
    pub features: Cow<'a, Matrix>,
    pub hidden_keep: Option<&'a Matrix>,
    /// Nodes allowed to contribute to the loss; `None` means all.
    pub loss_nodes: Option<&'a NodeMask>,
}

/// Realizes `plan` on the graph: removes dropped nodes and edges from the
/// operator and masks the features. The identity plan returns the inputs
/// unchanged.
pub fn apply<'a>(
    plan: &'a StochasticPlan,
    g: &'a Graph,
    adj: &'a NormalizedAdjacency,
) -> Result<EffectiveInputs<'a>> {
    let n = g.num_nodes();
    if adj.matrix().dim() != n {
        return Err(Error::DimensionMismatch {
            context: "operator size vs graph",
            expected: n,
            actual: adj.matrix().dim(),
        });
    }
    if let Some(mask) = &plan.node_keep {
        mask.check_len(n, "plan node mask length")?;
    }

    let operator = match (&plan.node_keep, &plan.edge_keep) {
        (None, None) => Cow::Borrowed(adj.matrix()),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig(
                "a plan may drop nodes or edges, not both".into(),
            ))
        }
        (nodes, edges) if plan.renormalize => {
            Cow::Owned(renormalized(g, nodes.as_ref(), edges.as_deref())?)
        }
        (Some(nodes), None) => Cow::Owned(adj.masked(nodes)?),
        (None, Some(edges)) => Cow::Owned(adj.without_edges(edges)?),
    };

    let features = match &plan.feature_keep {
        None => Cow::Borrowed(g.features()),
        Some(keep) => Cow::Owned(g.features().hadamard(keep)?),
    };
    if let Some(h) = &plan.hidden_keep {
        if h.rows() != n {
            return Err(Error::DimensionMismatch {
                context: "hidden mask rows",
                expected: n,
                actual: h.rows(),
            });
        }
    }

    Ok(EffectiveInputs {
        operator,
        features,
        hidden_keep: plan.hidden_keep.as_ref(),
        loss_nodes: plan.node_keep.as_ref(),
    })
}
