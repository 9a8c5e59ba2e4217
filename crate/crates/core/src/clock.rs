//! Per-node exponential clocks.
//!
//! Each node `v` carries a next-event time `T_v` and a rate `λ_v`. Node `v`
//! is active at time `t` when `T_v ≤ t`. Renewing a fired clock adds a fresh
//! `Exp(λ_v)` delay, so the event times of a single node form a Poisson
//! process of rate `λ_v`.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64` and split into independent streams with
//! `set_stream`. Draws are consumed in node-index order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mask::NodeMask;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of run seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate(rate))
    }
}

/// Inverse-CDF exponential draw `-ln(U) / rate` with `U` uniform on `(0, 1]`.
pub fn sample_exponential<R: RngCore + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    check_rate(rate)?;
    Ok(exp_draw(rate, rng))
}

#[inline]
fn exp_draw<R: RngCore + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    // random::<f64>() is on [0, 1) with 53-bit resolution, so 1 - u is on (0, 1]
    let u = 1.0 - rng.random::<f64>();
    // + 0.0 turns the -0.0 from ln(1) into 0.0
    -u.ln() / rate + 0.0
}

/// How a node's clock rate is derived from the base intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateMode {
    #[default]
    Uniform,
    /// `λ_v = λ · (deg(v) + 1) / mean(deg + 1)`. Experimental.
    Degree,
}

impl std::str::FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(RateMode::Uniform),
            "degree" => Ok(RateMode::Degree),
            other => Err(Error::InvalidConfig(format!("unknown rate mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for RateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateMode::Uniform => "uniform",
            RateMode::Degree => "degree",
        })
    }
}

/// Per-node rates for base intensity `lambda`.
pub fn node_rates(g: &Graph, lambda: f64, mode: RateMode) -> Result<Vec<f64>> {
    check_rate(lambda)?;
    let n = g.num_nodes();
    Ok(match mode {
        RateMode::Uniform => vec![lambda; n],
        RateMode::Degree => {
            let mean = (0..n).map(|v| (g.degree(v) + 1) as f64).sum::<f64>() / n.max(1) as f64;
            (0..n)
                .map(|v| lambda * (g.degree(v) + 1) as f64 / mean)
                .collect()
        }
    })
}

/// Where a fired clock's next delay is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenewalAnchor {
    /// `T_v ← T_v + Exp(λ_v)`: the event-time renewal process.
    #[default]
    EventTime,
    /// `T_v ← t + Exp(λ_v)`: the delay restarts at the observation time.
    FiringTime,
}

impl std::str::FromStr for RenewalAnchor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "event" => Ok(RenewalAnchor::EventTime),
            "firing" => Ok(RenewalAnchor::FiringTime),
            other => Err(Error::InvalidConfig(format!(
                "unknown renewal anchor `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for RenewalAnchor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RenewalAnchor::EventTime => "event",
            RenewalAnchor::FiringTime => "firing",
        })
    }
}

/// Next-event times and rates for every node, plus the generator feeding them.
#[derive(Debug, Clone)]
pub struct ClockState<R = StreamRng> {
    next_event: Vec<f64>,
    rate: Vec<f64>,
    rng: R,
}

impl ClockState<StreamRng> {
    /// Fresh clocks drawn from stream 0 of `seed`.
    pub fn init(rates: Vec<f64>, seed: u64) -> Result<Self> {
        ClockState::with_rng(rates, stream_rng(seed, 0))
    }

    pub fn uniform(num_nodes: usize, rate: f64, seed: u64) -> Result<Self> {
        ClockState::init(vec![rate; num_nodes], seed)
    }
}

impl<R: RngCore> ClockState<R> {
    /// Draws `T_v ~ Exp(rates[v])` for every node from `rng`.
    pub fn with_rng(rates: Vec<f64>, mut rng: R) -> Result<Self> {
        for &r in &rates {
            check_rate(r)?;
        }
        let next_event = rates.iter().map(|&r| exp_draw(r, &mut rng)).collect();
        Ok(ClockState {
            next_event,
            rate: rates,
            rng,
        })
    }

    pub fn len(&self) -> usize {
        self.rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate.is_empty()
    }

    pub fn next_event(&self) -> &[f64] {
        &self.next_event
    }

    pub fn rates(&self) -> &[f64] {
        &self.rate
    }

    pub fn into_rng(self) -> R {
        self.rng
    }

    /// Nodes with `T_v ≤ t`.
    pub fn active_set(&self, t: f64) -> Result<NodeMask> {
        if !(t >= 0.0) {
            return Err(Error::InvalidTime(t));
        }
        Ok(NodeMask::from_bools(
            self.next_event.iter().map(|&tv| tv <= t).collect(),
        ))
    }

    /// `T_v ← T_v + Exp(λ_v)` for every node in `mask`.
    pub fn resample_fired(&mut self, mask: &NodeMask) -> Result<()> {
        mask.check_len(self.len(), "clock mask length")?;
        for v in mask.iter_active() {
            self.next_event[v] += exp_draw(self.rate[v], &mut self.rng);
        }
        Ok(())
    }

    /// `T_v ← t + Exp(λ_v)` for every node in `mask`.
    pub fn resample_fired_at(&mut self, mask: &NodeMask, t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidTime(t));
        }
        mask.check_len(self.len(), "clock mask length")?;
        for v in mask.iter_active() {
            self.next_event[v] = self.next_event[v].max(t) + exp_draw(self.rate[v], &mut self.rng);
        }
        Ok(())
    }

    pub fn resample(&mut self, mask: &NodeMask, t: f64, anchor: RenewalAnchor) -> Result<()> {
        match anchor {
            RenewalAnchor::EventTime => self.resample_fired(mask),
            RenewalAnchor::FiringTime => self.resample_fired_at(mask, t),
        }
    }

    /// Discards every pending event and draws `T_v ~ Exp(λ_v)` afresh.
    pub fn redraw(&mut self) {
        for (tv, &r) in self.next_event.iter_mut().zip(&self.rate) {
            *tv = exp_draw(r, &mut self.rng);
        }
    }

    /// Runs every clock forward, renewing on each firing, and counts the
    /// firings at or before `horizon`. Clocks are left at their first event
    /// past the horizon.
    pub fn merged_event_count(&mut self, horizon: f64) -> Result<u64> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidTime(horizon));
        }
        let mut count = 0;
        for (tv, &r) in self.next_event.iter_mut().zip(&self.rate) {
            while *tv <= horizon {
                count += 1;
                *tv += exp_draw(r, &mut self.rng);
            }
        }
        Ok(count)
    }
}
