//! Timing of one clock step (init, active set, renewal) against node count.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use sgnn_core::clock::ClockState;

use crate::error::CliResult;

/// `10^4, 10^4.5, …, 10^7`, rounded.
pub fn default_sizes() -> Vec<usize> {
    (0..=6)
        .map(|i| 10f64.powf(4.0 + 0.5 * i as f64).round() as usize)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchPoint {
    pub n: usize,
    /// Median seconds per step.
    pub seconds: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    /// Least-squares slope of `ln seconds` on `ln n` over points with
    /// `n > 0`; `None` with fewer than two such sizes.
    pub exponent: Option<f64>,
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut s = String::from("n,seconds,reps\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{:.6e},{}", p.n, p.seconds, p.reps);
        }
        match self.exponent {
            Some(e) => {
                let _ = writeln!(s, "exponent={e:.4}");
            }
            None => s.push_str("exponent=n/a\n"),
        }
        s
    }
}

fn one_step(n: usize, rate: f64, t: f64, seed: u64) -> CliResult<f64> {
    let started = Instant::now();
    let mut clocks = ClockState::uniform(n, rate, seed)?;
    let active = clocks.active_set(t)?;
    clocks.resample_fired(&active)?;
    let elapsed = started.elapsed().as_secs_f64();
    black_box(clocks.next_event().first().copied());
    Ok(elapsed)
}

/// Least-squares slope of `ys` on `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times a clock step at each size. Small sizes are repeated until about
/// `10^7` node-steps have been timed so that their medians are stable.
pub fn bench_clocks(sizes: &[usize], min_reps: usize, rate: f64, t: f64) -> CliResult<BenchReport> {
    let mut points = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        let reps = min_reps.max(1).max((10_000_000 / n.max(1)).min(1_000));
        // warm-up: first-touch page faults and allocator growth
        one_step(n, rate, t, 0)?;
        let mut times = (0..reps)
            .map(|r| one_step(n, rate, t, (i * 10_000 + r + 1) as u64))
            .collect::<CliResult<Vec<f64>>>()?;
        times.sort_by(|a, b| a.total_cmp(b));
        points.push(BenchPoint {
            n,
            seconds: times[times.len() / 2],
            reps,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.n > 0 && p.seconds > 0.0)
        .map(|p| ((p.n as f64).ln(), p.seconds.ln()))
        .unzip();
    Ok(BenchReport {
        exponent: fit_slope(&xs, &ys),
        points,
    })
}
