//! Monte-Carlo evaluation of the entropy-plus-energy functional
//!
//! `I(m, M) = h(m) + ∫ V dm + ∫ log(Q(x), ᵗΨ_{x_0} M(σx))_HS dm(x)`
//!
//! for the Kusuoka measure with its own density, or for a Bernoulli
//! competitor with the density `M(y) ∝ Q_{state(y)}^{-1}`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::measure::rng_for;
use super::CylinderMeasure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Competitor {
    Kusuoka,
    /// Product measure with the given symbol weights.
    Bernoulli(Vec<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalReport {
    pub value: f64,
    pub stderr: f64,
    pub entropy: f64,
    pub entropy_stderr: f64,
    pub energy: f64,
    pub energy_stderr: f64,
    pub matrix_term: f64,
    pub matrix_term_stderr: f64,
    pub log_beta: f64,
    pub n_samples: usize,
    pub depth: usize,
    /// Fraction of samples where `(Q_{state}, M)_HS` differed from 1 by more than 1e-8.
    pub normalization_violations: f64,
}

struct Sample {
    entropy: f64,
    energy: f64,
    matrix: f64,
    violation: bool,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = xs.clone().sum::<f64>() / nf;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    (mean, (var / nf).sqrt())
}

fn hs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

pub fn variational_value(
    cm: &CylinderMeasure,
    competitor: &Competitor,
    n_samples: usize,
    depth: usize,
    seed: u64,
) -> Result<VariationalReport> {
    let block = cm.block();
    let t = block.t();
    let k = block.memory();
    if n_samples < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    if depth + 1 < k {
        return Err(Error::Argument(format!("depth must be at least {}", k - 1)));
    }
    if let Competitor::Bernoulli(w) = competitor {
        let s: f64 = w.iter().sum();
        if w.len() != t || w.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-12 {
            return Err(Error::Argument("Bernoulli weights must be a probability vector on the alphabet".into()));
        }
    }
    let c_dim = block.family().dim_form() as f64;
    let q_inv: Vec<DMatrix<f64>> = cm
        .spectral()
        .q
        .iter()
        .map(|q| q.inverse().map(|x| x.into_matrix() / c_dim))
        .collect::<Result<_>>()?;
    let len = depth + k + 1;
    let fam = block.family();

    let samples: Vec<Sample> = (0..n_samples as u64)
        .into_par_iter()
        .map(|j| -> Result<Sample> {
            let (x, q) = match competitor {
                Competitor::Kusuoka => {
                    let x = super::sample_kappa_stream(cm, len, seed, j)?.symbols().to_vec();
                    let q = cm.conditional_probs(&x[1..], depth)?;
                    (x, q)
                }
                Competitor::Bernoulli(w) => {
                    let mut rng = rng_for(seed, j);
                    let x: Vec<usize> = (0..len)
                        .map(|_| {
                            let mut u = rng.random::<f64>();
                            let mut pick = t - 1;
                            for (i, &wi) in w.iter().enumerate() {
                                if u < wi {
                                    pick = i;
                                    break;
                                }
                                u -= wi;
                            }
                            pick
                        })
                        .collect();
                    (x, w.clone())
                }
            };
            let entropy = -q.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
            let energy = block.potential().eval(&x[..k]);
            let ctx = &x[1..];
            let ctx_state = block.state_of(ctx);
            let m = match competitor {
                Competitor::Kusuoka => cm.density_m(&ctx[..depth.max(k - 1)])?.into_matrix(),
                Competitor::Bernoulli(_) => q_inv[ctx_state].clone(),
            };
            let norm = hs(cm.spectral().q[ctx_state].matrix(), &m);
            let p = fam.pullback(x[0]);
            let pushed = p * &m * p.transpose();
            let pairing = hs(cm.spectral().q[block.state_of(&x)].matrix(), &pushed);
            if !(pairing > 0.0) {
                return Err(Error::Degenerate("nonpositive pairing in the matrix term".into()));
            }
            Ok(Sample {
                entropy,
                energy,
                matrix: pairing.ln(),
                violation: (norm - 1.0).abs() > 1e-8,
            })
        })
        .collect::<Result<_>>()?;

    let n = samples.len();
    let violations = samples.iter().filter(|s| s.violation).count() as f64 / n as f64;
    if violations > 0.05 {
        return Err(Error::Contract(format!(
            "density normalization violated on {:.1}% of samples",
            100.0 * violations
        )));
    }
    let (entropy, entropy_stderr) = mean_se(samples.iter().map(|s| s.entropy), n);
    let (energy, energy_stderr) = mean_se(samples.iter().map(|s| s.energy), n);
    let (matrix_term, matrix_term_stderr) = mean_se(samples.iter().map(|s| s.matrix), n);
    let (value, stderr) = mean_se(samples.iter().map(|s| s.entropy + s.energy + s.matrix), n);
    Ok(VariationalReport {
        value,
        stderr,
        entropy,
        entropy_stderr,
        energy,
        energy_stderr,
        matrix_term,
        matrix_term_stderr,
        log_beta: cm.beta().ln(),
        n_samples: n,
        depth,
        normalization_violations: violations,
    })
}
