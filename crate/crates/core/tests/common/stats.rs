//! Test-side statistics: KS and chi-square statistics with their 1% critical
//! values. Shared by the core integration tests and the acceptance suite.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper 1% point of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_critical_1pct(dof: usize) -> f64 {
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.99)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// One-sample KS statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    let mut log_p = -mu + k as f64 * mu.ln();
    for j in 1..=k {
        log_p -= (j as f64).ln();
    }
    log_p.exp()
}

/// Chi-square goodness of fit of integer `samples` against `pmf`, pooling
/// adjacent values until every bin expects at least 5 observations; the last
/// bin absorbs the upper tail. Returns `(statistic, dof)`.
pub fn chi2_gof(samples: &[u64], pmf: impl Fn(u64) -> f64) -> (f64, usize) {
    let n = samples.len() as f64;
    let max = *samples.iter().max().unwrap_or(&0);
    let mut counts = vec![0u64; max as usize + 1];
    for &s in samples {
        counts[s as usize] += 1;
    }
    // (expected probability, observed) per pooled bin
    let mut bins: Vec<(f64, u64)> = Vec::new();
    let mut acc = (0.0, 0u64);
    let mut cum = 0.0;
    let mut k = 0u64;
    loop {
        let p = pmf(k);
        cum += p;
        acc.0 += p;
        acc.1 += counts.get(k as usize).copied().unwrap_or(0);
        if acc.0 * n >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0);
        }
        k += 1;
        if (1.0 - cum) * n < 5.0 && k > max {
            break;
        }
    }
    // whatever is left, including the unobserved upper tail
    let tail_p = acc.0 + (1.0 - cum).max(0.0);
    let tail_obs = acc.1 + counts.iter().skip(k as usize).sum::<u64>();
    if let Some(last) = bins.last_mut() {
        last.0 += tail_p;
        last.1 += tail_obs;
    }
    let stat = bins
        .iter()
        .map(|&(p, o)| {
            let e = p * n;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    (stat, bins.len() - 1)
}

/// Chi-square homogeneity test of two integer samples, pooling values until
/// each bin holds at least 10 combined observations. Returns `(statistic, dof)`.
pub fn chi2_two_sample(a: &[u64], b: &[u64]) -> (f64, usize) {
    let max = *a.iter().chain(b).max().unwrap_or(&0) as usize;
    let mut ca = vec![0u64; max + 1];
    let mut cb = vec![0u64; max + 1];
    for &x in a {
        ca[x as usize] += 1;
    }
    for &x in b {
        cb[x as usize] += 1;
    }
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let mut acc = (0u64, 0u64);
    for k in 0..=max {
        acc.0 += ca[k];
        acc.1 += cb[k];
        if acc.0 + acc.1 >= 10 {
            bins.push(acc);
            acc = (0, 0);
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += acc.0;
        last.1 += acc.1;
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let total = na + nb;
    let mut stat = 0.0;
    for &(oa, ob) in &bins {
        let col = (oa + ob) as f64;
        let ea = na * col / total;
        let eb = nb * col / total;
        stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    (stat, bins.len() - 1)
}

/// Sum over items of the 2×2 Pearson statistic comparing two success counts
/// out of `trials` each. Under equal per-item probabilities this is
/// chi-square with one degree of freedom per item.
pub fn chi2_paired_binomial(success_a: &[u64], success_b: &[u64], trials: u64) -> (f64, usize) {
    let t = trials as f64;
    let mut stat = 0.0;
    for (&sa, &sb) in success_a.iter().zip(success_b) {
        let p = (sa + sb) as f64 / (2.0 * t);
        if p == 0.0 || p == 1.0 {
            continue;
        }
        let e_s = t * p;
        let e_f = t * (1.0 - p);
        for (s, f) in [(sa as f64, t - sa as f64), (sb as f64, t - sb as f64)] {
            stat += (s - e_s).powi(2) / e_s + (f - e_f).powi(2) / e_f;
        }
    }
    (stat, success_a.len())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
