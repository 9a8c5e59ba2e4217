//! Training loops and evaluation.
//!
//! Two regimes share one update step:
//!
//! * `Epoch`: every epoch draws a fresh [`StochasticPlan`] from the configured
//!   regularizer and performs one full-batch update on it.
//! * `PoissonDynamic`: node clocks persist across steps. At step `k` (time
//!   `t = k·Δt`) the nodes whose clocks have fired form the active set, one
//!   update runs on the induced subgraph, and every fired clock is renewed.
//!
//! Evaluation always uses the full graph with no stochastic plan.

use std::io::Write;
use std::time::Instant;

use crate::clock::{node_rates, stream_rng, ClockState, RenewalAnchor, StreamRng};
use crate::dense::Matrix;
use crate::engine::{Adam, AdamConfig, GcnConfig, Model};
use crate::error::{Error, Result};
use crate::graph::{normalize, renormalized, Graph, NormalizedAdjacency, SparseMatrix};
use crate::mask::NodeMask;
use crate::regularizers::{apply, plan_epoch, RegularizerConfig};

/// Stream ids carved out of the run seed.
const INIT_STREAM: u64 = 1;
const PLAN_STREAM: u64 = 2;
const CLOCK_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regime {
    #[default]
    Epoch,
    PoissonDynamic,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epoch" => Ok(Regime::Epoch),
            "poisson_dynamic" | "poisson-dynamic" => Ok(Regime::PoissonDynamic),
            other => Err(Error::InvalidConfig(format!("unknown regime `{other}`"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Epoch => "epoch",
            Regime::PoissonDynamic => "poisson_dynamic",
        })
    }
}

/// Clock handling in the dynamic regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockMode {
    /// Clocks carry over between steps and fired ones are renewed.
    #[default]
    Persistent,
    /// Every step redraws all clocks and activates nodes with `T_v ≤ Δt`.
    Fresh,
}

impl std::str::FromStr for ClockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "persistent" => Ok(ClockMode::Persistent),
            "fresh" => Ok(ClockMode::Fresh),
            other => Err(Error::InvalidConfig(format!(
                "unknown clock mode `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for ClockMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClockMode::Persistent => "persistent",
            ClockMode::Fresh => "fresh",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub regime: Regime,
    pub reg: RegularizerConfig,
    pub model: GcnConfig,
    pub adam: AdamConfig,
    /// L2 decay on the first-layer weights.
    pub weight_decay: f64,
    pub epochs: usize,
    /// Dynamic regime horizon `T`.
    pub total_time: f64,
    /// Dynamic regime step `Δt`.
    pub dt: f64,
    pub anchor: RenewalAnchor,
    pub clock_mode: ClockMode,
    pub eval_every: usize,
    /// Report the best-validation evaluation point instead of the last one.
    pub select_best_val: bool,
    /// Fill the `ms` column with wall-clock times. Off keeps output
    /// byte-reproducible.
    pub record_timing: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regime: Regime::Epoch,
            reg: RegularizerConfig::default(),
            model: GcnConfig::default(),
            adam: AdamConfig::default(),
            weight_decay: 5e-4,
            epochs: 200,
            total_time: 100.0,
            dt: 0.5,
            anchor: RenewalAnchor::EventTime,
            clock_mode: ClockMode::Persistent,
            eval_every: 1,
            select_best_val: false,
            record_timing: false,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.reg.validate()?;
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be positive".into()));
        }
        match self.regime {
            Regime::Epoch if self.epochs == 0 => {
                Err(Error::InvalidConfig("epochs must be positive".into()))
            }
            Regime::PoissonDynamic if !(self.dt.is_finite() && self.dt > 0.0) => Err(
                Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)),
            ),
            Regime::PoissonDynamic if !(self.total_time.is_finite() && self.total_time >= 0.0) => {
                Err(Error::InvalidConfig(format!(
                    "total time must be non-negative, got {}",
                    self.total_time
                )))
            }
            Regime::PoissonDynamic if !(self.reg.lambda.is_finite() && self.reg.lambda > 0.0) => {
                Err(Error::InvalidConfig(format!(
                    "lambda must be positive, got {}",
                    self.reg.lambda
                )))
            }
            _ => Ok(()),
        }
    }

    /// Number of optimizer steps the configuration schedules.
    pub fn scheduled_steps(&self) -> usize {
        match self.regime {
            Regime::Epoch => self.epochs,
            Regime::PoissonDynamic => step_count(self.total_time, self.dt),
        }
    }
}

/// `ceil(total / dt)`, with ratios within `1e-9` of an integer snapped to it
/// so that e.g. `T = 10, Δt = 0.05` gives 200 rather than 201.
pub fn step_count(total: f64, dt: f64) -> usize {
    let ratio = total / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// One evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub step: usize,
    pub t: f64,
    /// `None` when the step was skipped because no training node was active.
    pub loss: Option<f64>,
    pub val_acc: f64,
    pub test_acc: f64,
    pub active_frac: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    /// Steps skipped because no training node was active.
    pub skipped_steps: Vec<usize>,
    /// Mean active fraction over every scheduled step.
    pub mean_active_frac: f64,
    /// Reported `(val, test)` under the configured model selection.
    pub reported: (f64, f64),
}

pub const CSV_HEADER: &str = "step,t,loss,val_acc,test_acc,active_frac,ms";

impl RunRecord {
    pub fn final_row(&self) -> Option<&RunRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            let loss = r.loss.map(|l| l.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.step, r.t, loss, r.val_acc, r.test_acc, r.active_frac, r.ms
            )?;
        }
        Ok(())
    }
}

/// Fraction of `mask` nodes whose arg-max logit is their label. Ties go to
/// the lowest class index.
pub fn accuracy(logits: &Matrix, labels: &[usize], mask: &NodeMask) -> Result<f64> {
    mask.check_len(logits.rows(), "evaluation mask length")?;
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let correct = mask
        .iter_active()
        .filter(|&v| logits.argmax_row(v) == labels[v])
        .count();
    Ok(correct as f64 / mask.count() as f64)
}

/// Accuracy of `model` on `mask` with the full, unmasked graph.
pub fn evaluate(
    model: &Model,
    g: &Graph,
    adj: &NormalizedAdjacency,
    mask: &NodeMask,
) -> Result<f64> {
    let logits = model.predict(adj.matrix(), g.features())?;
    accuracy(&logits, g.labels(), mask)
}

/// Validation and test accuracy from one forward pass. An empty split
/// reports 0.
fn evaluate_splits(model: &Model, g: &Graph, adj: &NormalizedAdjacency) -> Result<(f64, f64)> {
    let logits = model.predict(adj.matrix(), g.features())?;
    let acc = |mask: &NodeMask| {
        if mask.count() == 0 {
            Ok(0.0)
        } else {
            accuracy(&logits, g.labels(), mask)
        }
    };
    Ok((acc(g.val_mask())?, acc(g.test_mask())?))
}

struct Learner {
    model: Model,
    opt: Adam,
}

impl Learner {
    fn new(g: &Graph, cfg: &TrainConfig) -> Result<Learner> {
        let mut rng = stream_rng(cfg.seed, INIT_STREAM);
        let model = Model::init(g.feature_dim(), g.num_classes(), cfg.model, &mut rng)?;
        let mut decay = vec![0.0; model.params().len()];
        decay[0] = cfg.weight_decay;
        let opt = Adam::new(cfg.adam, &model.params(), decay)?;
        Ok(Learner { model, opt })
    }

    /// One update; `None` if `loss_mask` is empty.
    fn step(
        &mut self,
        op: &SparseMatrix,
        x: &Matrix,
        hidden_keep: Option<&Matrix>,
        labels: &[usize],
        loss_mask: &NodeMask,
    ) -> Result<Option<f64>> {
        if loss_mask.count() == 0 {
            return Ok(None);
        }
        let (loss, grads) = self
            .model
            .loss_and_grads(op, x, hidden_keep, labels, loss_mask)?;
        self.opt.step(&mut self.model.params_mut(), &grads)?;
        Ok(Some(loss))
    }
}

struct Recorder<'a> {
    cfg: &'a TrainConfig,
    steps: usize,
    record: RunRecord,
    active_sum: f64,
    best: Option<(f64, f64)>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a TrainConfig) -> Self {
        Recorder {
            cfg,
            steps: cfg.scheduled_steps(),
            record: RunRecord::default(),
            active_sum: 0.0,
            best: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn after_step(
        &mut self,
        learner: &Learner,
        g: &Graph,
        adj: &NormalizedAdjacency,
        step: usize,
        t: f64,
        loss: Option<f64>,
        active_frac: f64,
        started: Instant,
    ) -> Result<()> {
        self.active_sum += active_frac;
        if loss.is_none() {
            self.record.skipped_steps.push(step);
        }
        let last = step + 1 == self.steps;
        if !(step + 1).is_multiple_of(self.cfg.eval_every) && !last {
            return Ok(());
        }
        let (val_acc, test_acc) = evaluate_splits(&learner.model, g, adj)?;
        if self.best.is_none_or(|(v, _)| val_acc > v) {
            self.best = Some((val_acc, test_acc));
        }
        let ms = if self.cfg.record_timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        self.record.rows.push(RunRow {
            step,
            t,
            loss,
            val_acc,
            test_acc,
            active_frac,
            ms,
        });
        Ok(())
    }

    fn finish(mut self) -> RunRecord {
        if self.steps > 0 {
            self.record.mean_active_frac = self.active_sum / self.steps as f64;
        }
        let last = self
            .record
            .rows
            .last()
            .map_or((0.0, 0.0), |r| (r.val_acc, r.test_acc));
        self.record.reported = if self.cfg.select_best_val {
            self.best.unwrap_or(last)
        } else {
            last
        };
        self.record
    }
}

/// Trains a fresh model on `g` under `cfg`, dispatching on the regime.
pub fn train(g: &Graph, cfg: &TrainConfig) -> Result<(Model, RunRecord)> {
    match cfg.regime {
        Regime::Epoch => train_epoch_regime(g, cfg),
        Regime::PoissonDynamic => train_poisson_dynamic(g, cfg),
    }
}

/// Per-epoch regularized training.
pub fn train_epoch_regime(g: &Graph, cfg: &TrainConfig) -> Result<(Model, RunRecord)> {
    cfg.validate()?;
    if cfg.regime != Regime::Epoch {
        return Err(Error::InvalidConfig(
            "train_epoch_regime needs regime=epoch".into(),
        ));
    }
    let adj = normalize(g);
    let mut learner = Learner::new(g, cfg)?;
    let mut plan_rng = stream_rng(cfg.seed, PLAN_STREAM);
    let mut recorder = Recorder::new(cfg);

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let plan = plan_epoch(&cfg.reg, g, learner.model.hidden(), epoch, &mut plan_rng)?;
        let eff = apply(&plan, g, &adj)?;
        let loss_mask = match eff.loss_nodes {
            Some(nodes) => g.train_mask().intersect(nodes)?,
            None => g.train_mask().clone(),
        };
        let loss = learner.step(
            &eff.operator,
            &eff.features,
            eff.hidden_keep,
            g.labels(),
            &loss_mask,
        )?;
        recorder.after_step(
            &learner,
            g,
            &adj,
            epoch,
            epoch as f64,
            loss,
            plan.active_fraction(),
            started,
        )?;
    }
    Ok((learner.model, recorder.finish()))
}

/// One step of the dynamic schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledStep {
    pub index: usize,
    pub t: f64,
    pub active: NodeMask,
}

/// Active sets of the dynamic regime, independent of any model.
///
/// Each call to [`RenewalSchedule::next_step`] computes the active set at
/// `t = k·Δt` and renews the fired clocks before returning.
#[derive(Debug, Clone)]
pub struct RenewalSchedule {
    clocks: ClockState<StreamRng>,
    dt: f64,
    steps: usize,
    next: usize,
    anchor: RenewalAnchor,
    mode: ClockMode,
}

impl RenewalSchedule {
    pub fn new(
        rates: Vec<f64>,
        seed: u64,
        total_time: f64,
        dt: f64,
        anchor: RenewalAnchor,
        mode: ClockMode,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if !(total_time.is_finite() && total_time >= 0.0) {
            return Err(Error::InvalidTime(total_time));
        }
        Ok(RenewalSchedule {
            clocks: ClockState::with_rng(rates, stream_rng(seed, CLOCK_STREAM))?,
            dt,
            steps: step_count(total_time, dt),
            next: 0,
            anchor,
            mode,
        })
    }

    pub fn for_config(g: &Graph, cfg: &TrainConfig) -> Result<Self> {
        let rates = node_rates(g, cfg.reg.lambda, cfg.reg.rate_mode)?;
        RenewalSchedule::new(
            rates,
            cfg.seed,
            cfg.total_time,
            cfg.dt,
            cfg.anchor,
            cfg.clock_mode,
        )
    }

    pub fn clocks(&self) -> &ClockState<StreamRng> {
        &self.clocks
    }

    pub fn total_steps(&self) -> usize {
        self.steps
    }

    pub fn next_step(&mut self) -> Result<Option<ScheduledStep>> {
        if self.next >= self.steps {
            return Ok(None);
        }
        let index = self.next;
        let t = index as f64 * self.dt;
        let active = match self.mode {
            ClockMode::Persistent => {
                let active = self.clocks.active_set(t)?;
                self.clocks.resample(&active, t, self.anchor)?;
                active
            }
            ClockMode::Fresh => {
                self.clocks.redraw();
                self.clocks.active_set(self.dt)?
            }
        };
        self.next += 1;
        Ok(Some(ScheduledStep { index, t, active }))
    }
}

/// Continuous-time renewal training on clock-selected subgraphs.
pub fn train_poisson_dynamic(g: &Graph, cfg: &TrainConfig) -> Result<(Model, RunRecord)> {
    cfg.validate()?;
    if cfg.regime != Regime::PoissonDynamic {
        return Err(Error::InvalidConfig(
            "train_poisson_dynamic needs regime=poisson_dynamic".into(),
        ));
    }
    let adj = normalize(g);
    let mut learner = Learner::new(g, cfg)?;
    let mut schedule = RenewalSchedule::for_config(g, cfg)?;
    let mut recorder = Recorder::new(cfg);

    loop {
        let started = Instant::now();
        let Some(ScheduledStep { index, t, active }) = schedule.next_step()? else {
            break;
        };
        let loss_mask = g.train_mask().intersect(&active)?;
        let loss = if loss_mask.count() == 0 {
            None
        } else {
            let op = if cfg.reg.renormalize_subgraph {
                renormalized(g, Some(&active), None)?
            } else {
                adj.masked(&active)?
            };
            learner.step(&op, g.features(), None, g.labels(), &loss_mask)?
        };
        recorder.after_step(
            &learner,
            g,
            &adj,
            index,
            t,
            loss,
            active.fraction(),
            started,
        )?;
    }
    Ok((learner.model, recorder.finish()))
}
