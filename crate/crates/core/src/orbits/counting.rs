//! Trace-weighted orbit counting functions and their normalized sequences.
//!
//! * `π′(n) = Σ_{λ(τ)≤n} tr ᵗΨ_τ`
//! * `η(n) = Σ_{j≤n} a_j` with `a_j` the fix-point sums for `V ≡ 0`
//! * `π(r) = Σ_{N(τ)≤r} tr ᵗΨ_τ`, `N(τ) = e^{|c| V̂(τ)}`
//! * `S(r) = Σ_{N(τ)^k ≤ r} log N(τ) · tr ᵗΨ_τ^k`

use rayon::prelude::*;
use serde::Serialize;

use super::{lyndon_chunks, orbit_core, power_trace, Scratch};
use crate::error::{Error, Result};
use crate::exterior::PushForwardFamily;
use crate::symbolic::{birkhoff_sum, Potential};

#[derive(Debug, Clone, Serialize)]
pub struct CountingTables {
    pub max_period: usize,
    pub potential: String,
    pub c: Option<f64>,
    /// `n = 1..=max_period`.
    pub periods: Vec<usize>,
    pub pi_prime: Vec<f64>,
    pub eta: Vec<f64>,
    /// Ascending grid for `π` and `S` (empty when no `c` was given).
    pub r_grid: Vec<f64>,
    pub pi: Vec<f64>,
    pub s: Vec<f64>,
    /// `π` and `S` are exact for `r` below this value; above it orbits of
    /// period `> max_period` could contribute.
    pub exact_below: f64,
    pub orbit_count: u64,
}

impl CountingTables {
    pub fn exact(&self, j: usize) -> bool {
        self.r_grid[j] < self.exact_below
    }
}

#[derive(Clone)]
struct Acc {
    tr_by_period: Vec<f64>,
    // power[d][k] = Σ_{λ(τ)=d} tr ᵗΨ_τ^k for d·k ≤ max_period
    power: Vec<Vec<f64>>,
    pi_bins: Vec<f64>,
    s_bins: Vec<f64>,
    count: u64,
}

impl Acc {
    fn new(p: usize, grid: usize) -> Self {
        Acc {
            tr_by_period: vec![0.0; p + 1],
            power: (0..=p).map(|d| vec![0.0; if d == 0 { 0 } else { p / d + 1 }]).collect(),
            pi_bins: vec![0.0; grid],
            s_bins: vec![0.0; grid],
            count: 0,
        }
    }

    fn merge(&mut self, o: &Acc) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.tr_by_period, &o.tr_by_period);
        for (a, b) in self.power.iter_mut().zip(&o.power) {
            add(a, b);
        }
        add(&mut self.pi_bins, &o.pi_bins);
        add(&mut self.s_bins, &o.s_bins);
        self.count += o.count;
    }
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Exact truncations of the counting functions from all prime orbits of
/// period `≤ max_period`. `π` and `S` are evaluated on `r_grid` only when `c`
/// is given; they need `V̂ > 0`.
pub fn counting_tables(
    family: &PushForwardFamily,
    vhat: &Potential,
    c: Option<f64>,
    max_period: usize,
    r_grid: &[f64],
    budget: f64,
) -> Result<CountingTables> {
    if max_period == 0 {
        return Err(Error::Argument("max_period must be at least 1".into()));
    }
    if vhat.t() != family.t() {
        return Err(Error::Dimension {
            expected: family.t(),
            got: vhat.t(),
        });
    }
    let grid: Vec<f64> = if c.is_some() { r_grid.to_vec() } else { Vec::new() };
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Argument("r_grid must be positive and strictly increasing".into()));
    }
    let abs_c = match c {
        Some(c) if c == 0.0 || !c.is_finite() => return Err(Error::Argument("c must be finite and nonzero".into())),
        Some(c) => {
            if !(vhat.min() > 0.0) {
                return Err(Error::Argument("counting by N(τ) needs a potential with V̂ > 0".into()));
            }
            c.abs()
        }
        None => 0.0,
    };
    let r_max = grid.last().copied().unwrap_or(0.0);
    let p = max_period;
    let mut total = Acc::new(p, grid.len());
    for n in 1..=p {
        let chunks = lyndon_chunks(family.t(), n, budget)?;
        let parts: Vec<Acc> = chunks
            .par_iter()
            .map(|chunk| {
                let mut acc = Acc::new(p, grid.len());
                let mut s = Scratch::new(family);
                let mut buf = vec![0usize; n];
                for packed in chunk.chunks(n) {
                    for (b, &x) in buf.iter_mut().zip(packed) {
                        *b = x as usize;
                    }
                    let core = orbit_core(family, &buf, &mut s)?;
                    acc.count += 1;
                    acc.tr_by_period[n] += core.trace;
                    for k in 1..=p / n {
                        acc.power[n][k] += if k == 1 { core.trace } else { power_trace(&core.alphas, k) };
                    }
                    if grid.is_empty() {
                        continue;
                    }
                    let log_n = abs_c * birkhoff_sum(vhat, &buf);
                    let j = grid.partition_point(|&r| r.ln() < log_n);
                    if j < grid.len() {
                        acc.pi_bins[j] += core.trace;
                    }
                    let mut k = 1;
                    while (k as f64) * log_n <= r_max.ln() {
                        let j = grid.partition_point(|&r| r.ln() < k as f64 * log_n);
                        acc.s_bins[j] += log_n * if k == 1 { core.trace } else { power_trace(&core.alphas, k) };
                        k += 1;
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        for a in &parts {
            total.merge(a);
        }
    }

    let pi_prime = prefix_sums(&total.tr_by_period[1..]);
    let mut a = vec![0.0; p];
    for d in 1..=p {
        for k in 1..=p / d {
            a[d * k - 1] += d as f64 * total.power[d][k];
        }
    }
    let exact_below = if grid.is_empty() {
        0.0
    } else {
        (abs_c * (p + 1) as f64 * vhat.min()).exp()
    };
    Ok(CountingTables {
        max_period: p,
        potential: vhat.tag().to_string(),
        c,
        periods: (1..=p).collect(),
        pi_prime,
        eta: prefix_sums(&a),
        pi: prefix_sums(&total.pi_bins),
        s: prefix_sums(&total.s_bins),
        r_grid: grid,
        exact_below,
        orbit_count: total.count,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RescaledRow {
    /// `ρ = r^{1/|c|}`.
    pub r: f64,
    pub pi_hat: f64,
    /// `π̂(ρ) log ρ / ρ^{|c|}`.
    pub normalized: f64,
    pub exact: bool,
}

/// `π̂(ρ) = π(ρ^{|c|})`, evaluated at the points `ρ_j = r_j^{1/|c|}`.
pub fn rescale_counts(tables: &CountingTables, c: f64) -> Result<Vec<RescaledRow>> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::Argument("rescaling needs c != 0".into()));
    }
    let a = c.abs();
    Ok(tables
        .r_grid
        .iter()
        .zip(&tables.pi)
        .enumerate()
        .map(|(j, (&r, &pi))| {
            let rho = r.powf(1.0 / a);
            RescaledRow {
                r: rho,
                pi_hat: pi,
                normalized: pi * rho.ln() / r,
                exact: tables.exact(j),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodRow {
    pub r: usize,
    pub pi_prime: f64,
    pub eta: f64,
    /// `r π′(r) / β^r`.
    pub r_pi_prime_over_beta_r: f64,
    /// `β/(β−1)` when `β > 1`.
    pub r_pi_prime_bound: Option<f64>,
    /// `π′(r) / β^{γ′ r}`, expected to decrease to 0 when `β > 1`.
    pub pi_prime_over_beta_gamma: f64,
    /// `β(β^r − 1)/(β − 1)`.
    pub eta_geometric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub r: f64,
    pub pi: f64,
    pub s: f64,
    /// `π(r) log r / r`.
    pub pi_log_r_over_r: f64,
    /// `A/|c|`-type bound for the normalized `π`: `β/(β−1) log β` when `β > 1`.
    pub pi_bound: Option<f64>,
    /// `S(r)/r`, expected to tend to 1 when `c > 0`.
    pub s_over_r: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub beta: f64,
    pub c: Option<f64>,
    pub gamma_prime: f64,
    pub period_rows: Vec<PeriodRow>,
    pub grid_rows: Vec<GridRow>,
}

pub fn asymptotic_report(tables: &CountingTables, beta: f64, gamma_prime: f64) -> Result<AsymptoticReport> {
    if !(beta > 0.0) || beta == 1.0 {
        return Err(Error::Argument("beta must be positive and different from 1".into()));
    }
    if !(gamma_prime > 1.0) {
        return Err(Error::Argument("gamma' must exceed 1".into()));
    }
    let over = beta > 1.0;
    let period_rows = tables
        .periods
        .iter()
        .map(|&r| {
            let pp = tables.pi_prime[r - 1];
            let rf = r as f64;
            PeriodRow {
                r,
                pi_prime: pp,
                eta: tables.eta[r - 1],
                r_pi_prime_over_beta_r: rf * pp / beta.powf(rf),
                r_pi_prime_bound: over.then(|| beta / (beta - 1.0)),
                pi_prime_over_beta_gamma: pp / beta.powf(gamma_prime * rf),
                eta_geometric: beta * (beta.powf(rf) - 1.0) / (beta - 1.0),
            }
        })
        .collect();
    let grid_rows = (0..tables.r_grid.len())
        .map(|j| {
            let r = tables.r_grid[j];
            GridRow {
                r,
                pi: tables.pi[j],
                s: tables.s[j],
                pi_log_r_over_r: tables.pi[j] * r.ln() / r,
                pi_bound: over.then(|| beta / (beta - 1.0) * beta.ln()),
                s_over_r: tables.s[j] / r,
                exact: tables.exact(j),
            }
        })
        .collect();
    Ok(AsymptoticReport {
        beta,
        c: tables.c,
        gamma_prime,
        period_rows,
        grid_rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricFit {
    /// Fitted `ε > 0`.
    pub epsilon: f64,
    /// `max_r |η(r) − β(β^r−1)/(β−1)| e^{εr} / β^r`.
    pub d2: f64,
    /// `(r, |η(r) − β(β^r−1)/(β−1)|)`.
    pub errors: Vec<(usize, f64)>,
    /// `|η(r) − …| e^{εr} / β^r` for each `r`.
    pub normalized: Vec<f64>,
    /// True when the normalized sequence shows no growth: its maximum over
    /// the last third is at most twice its maximum over the first two thirds.
    pub bounded: bool,
}

/// Fits `ε` from the slope of `log(e_r / β^r)` in `r`. An error that is zero
/// to rounding carries no rate information; `ε = log β` is reported then.
pub fn geometric_error_fit(tables: &CountingTables, beta: f64) -> Result<GeometricFit> {
    if !(beta > 1.0) {
        return Err(Error::Argument("the geometric error fit needs beta > 1".into()));
    }
    let errors: Vec<(usize, f64)> = tables
        .periods
        .iter()
        .map(|&r| {
            let g = beta * (beta.powi(r as i32) - 1.0) / (beta - 1.0);
            (r, (tables.eta[r - 1] - g).abs())
        })
        .collect();
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .zip(&tables.eta)
        .filter(|((_, e), eta)| *e > 1e-12 * eta.abs().max(1.0))
        .map(|(&(r, e), _)| (r as f64, (e / beta.powi(r as i32)).ln()))
        .collect();
    let epsilon = if pts.len() >= 3 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    } else {
        beta.ln()
    };
    let normalized: Vec<f64> = errors
        .iter()
        .map(|&(r, e)| e * (epsilon * r as f64).exp() / beta.powi(r as i32))
        .collect();
    let d2 = normalized.iter().cloned().fold(0.0, f64::max);
    let cut = (2 * normalized.len()).div_ceil(3);
    let head = normalized[..cut].iter().cloned().fold(0.0, f64::max);
    let tail = normalized[cut..].iter().cloned().fold(0.0, f64::max);
    let bounded = tail <= 2.0 * head.max(1e-12 * tables.eta.last().copied().unwrap_or(1.0).abs());
    Ok(GeometricFit {
        epsilon,
        d2,
        errors,
        normalized,
        bounded,
    })
}
