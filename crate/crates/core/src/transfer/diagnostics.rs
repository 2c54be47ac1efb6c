//! Spectral and cone diagnostics of the block operator and its measures.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{BlockOperator, CylinderMeasure};
use crate::error::Result;
use crate::exterior::{hilbert_metric_product, relative_spectrum, SymOperator};
use crate::linalg;
use crate::symbolic::{fix_points, SymWord, DEFAULT_BUDGET};

/// All eigenvalues of the dense block matrix, by decreasing modulus.
pub fn dense_spectrum(block: &BlockOperator) -> Vec<Complex64> {
    linalg::eigenvalues_by_modulus(&block.dense())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralGap {
    /// Spectral radius from the dense eigensolver.
    pub radius: f64,
    /// Modulus of the second eigenvalue (0 when the matrix is 1×1).
    pub second: f64,
}

pub fn spectral_gap(block: &BlockOperator) -> SpectralGap {
    let ev = dense_spectrum(block);
    SpectralGap {
        radius: ev[0].norm(),
        second: ev.get(1).map(|z| z.norm()).unwrap_or(0.0),
    }
}

fn apply_power(block: &BlockOperator, v: &DVector<f64>, power: usize) -> DVector<f64> {
    let mut w = v.clone();
    for _ in 0..power {
        w = block.apply(&w);
        let n = w.norm();
        if n > 0.0 {
            w /= n;
        }
    }
    w
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let nv: f64 = v.norm();
        if nv > 1e-12 {
            return v / nv;
        }
    }
}

/// Sampled Hilbert diameter of `L^power(cone)`.
///
/// The image cone is generated by the images of the rank-one state vectors
/// `e eᵀ` placed at a single state; the diameter is estimated as the largest
/// product-cone distance between images of `n_rays` random generators per
/// state (plus the coordinate directions). Returns `∞` when some image leaves
/// the open cone.
pub fn cone_diameter(block: &BlockOperator, power: usize, n_rays: usize, seed: u64) -> f64 {
    let c = block.family().dim_form();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images: Vec<Vec<SymOperator>> = Vec::new();
    for s in 0..block.n_states() {
        let mut dirs: Vec<DVector<f64>> = (0..c).map(|i| DVector::from_fn(c, |j, _| (i == j) as u8 as f64)).collect();
        dirs.extend((0..n_rays).map(|_| random_unit(&mut rng, c)));
        for e in dirs {
            let mut states = vec![SymOperator::zeros(c); block.n_states()];
            states[s] = SymOperator::from_symmetric(&e * e.transpose());
            let img = apply_power(block, &block.from_states(&states), power);
            let ops = block.to_states(&img);
            if ops.iter().any(|o| !o.is_pd()) {
                return f64::INFINITY;
            }
            images.push(ops);
        }
    }
    let mut diam: f64 = 0.0;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            match hilbert_metric_product(&images[i], &images[j]) {
                Ok(th) => diam = diam.max(th),
                Err(_) => return f64::INFINITY,
            }
        }
    }
    diam
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub power: usize,
    pub diameter: f64,
    /// `1 − e^{−D}`.
    pub bound: f64,
    /// Largest observed `θ(L^p v₁, L^p v₂) / θ(v₁, v₂)`.
    pub max_ratio: f64,
    pub pairs: usize,
}

fn random_pd_states(block: &BlockOperator, rng: &mut ChaCha8Rng) -> Vec<SymOperator> {
    let c = block.family().dim_form();
    (0..block.n_states())
        .map(|_| {
            let g: DMatrix<f64> = DMatrix::from_fn(c, c, |_, _| StandardNormal.sample(rng));
            SymOperator::from_symmetric(&g * g.transpose() + DMatrix::identity(c, c) * 0.05)
        })
        .collect()
}

/// Measures the projective contraction of `L^power` on random pairs of
/// positive-definite state vectors against `1 − e^{−D}`.
pub fn contraction_check(block: &BlockOperator, power: usize, n_pairs: usize, seed: u64) -> Result<ContractionReport> {
    let diameter = cone_diameter(block, power, 24, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut max_ratio: f64 = 0.0;
    let mut pairs = 0;
    for _ in 0..n_pairs {
        let a = random_pd_states(block, &mut rng);
        let b = random_pd_states(block, &mut rng);
        let before = hilbert_metric_product(&a, &b)?;
        if before <= 1e-12 {
            continue;
        }
        let la = block.to_states(&apply_power(block, &block.from_states(&a), power));
        let lb = block.to_states(&apply_power(block, &block.from_states(&b), power));
        let after = hilbert_metric_product(&la, &lb)?;
        max_ratio = max_ratio.max(after / before);
        pairs += 1;
    }
    Ok(ContractionReport {
        power,
        diameter,
        bound: 1.0 - (-diameter).exp(),
        max_ratio,
        pairs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GibbsReport {
    /// Per word length `l`, the smallest `D₁` with
    /// `S/D₁ ≤ μ([w]) ≤ D₁ S` over all words of that length, where
    /// `S = e^{V^l} β^{−l} ᵗΨ_w(μ(Σ))`.
    pub per_length: Vec<(usize, f64)>,
}

/// Empirical Gibbs constant over all words of the given lengths.
///
/// `V^l` sums the windows lying inside the word; the omitted `k − 1`
/// boundary terms are bounded and absorbed in the constant.
pub fn gibbs_constant(cm: &CylinderMeasure, lengths: &[usize]) -> Result<GibbsReport> {
    let block = cm.block();
    let k = block.memory();
    let t = block.t();
    let beta = cm.beta();
    let fam = block.family();
    let mut per_length = Vec::new();
    for &l in lengths {
        let mut d1: f64 = 1.0;
        for w in fix_points(t, l, DEFAULT_BUDGET)? {
            if l + 1 < k {
                continue;
            }
            let mu_w = cm.mu(&SymWord::from_symbols(w.clone()))?;
            let mut s = cm.mu_total().matrix().clone();
            for &sym in w.iter().rev() {
                let p = fam.pullback(sym);
                s = p * &s * p.transpose();
            }
            let vl: f64 = if l >= k {
                (0..=l - k).map(|j| block.potential().eval(&w[j..j + k])).sum()
            } else {
                0.0
            };
            let s = SymOperator::from_symmetric(s * (vl.exp() / beta.powi(l as i32)));
            match relative_spectrum(&s, &mu_w) {
                Ok((lo, hi)) if lo > 0.0 => d1 = d1.max(hi).max(1.0 / lo),
                _ => d1 = f64::INFINITY,
            }
        }
        per_length.push((l, d1));
    }
    Ok(GibbsReport { per_length })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    /// `(n, |Cov_κ(1[x_0 = a], 1[x_n = a])|)` for the observed symbol `a`.
    pub lags: Vec<(usize, f64)>,
    /// Least-squares decay rate `δ` of `log |Cov|` against `n`, when defined.
    pub rate: Option<f64>,
}

/// Exact correlations of the indicator of `symbol` at lags `1..=max_lag`,
/// computed by summing `κ` over all intermediate words.
pub fn correlation_report(cm: &CylinderMeasure, symbol: usize, max_lag: usize) -> Result<CorrelationReport> {
    let t = cm.block().t();
    let p = cm.kappa(&SymWord::from_symbols(vec![symbol]))?;
    let mut lags = Vec::new();
    for n in 1..=max_lag {
        let joint: f64 = if n == 1 {
            cm.kappa(&SymWord::from_symbols(vec![symbol, symbol]))?
        } else {
            let mut acc = 0.0;
            for mid in fix_points(t, n - 1, DEFAULT_BUDGET)? {
                let mut w = Vec::with_capacity(n + 1);
                w.push(symbol);
                w.extend_from_slice(&mid);
                w.push(symbol);
                acc += cm.kappa(&SymWord::from_symbols(w))?;
            }
            acc
        };
        lags.push((n, (joint - p * p).abs()));
    }
    let pts: Vec<(f64, f64)> = lags
        .iter()
        .filter(|(_, c)| *c > 1e-300)
        .map(|&(n, c)| (n as f64, c.ln()))
        .collect();
    let rate = if pts.len() >= 2 {
        let nf = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(-sxy / sxx)
    } else {
        None
    };
    Ok(CorrelationReport { lags, rate })
}
