//! Prime periodic orbits, fix-point sums, counting functions and zeta functions.
//!
//! A prime orbit `τ` is represented by its Lyndon word `x_0 … x_{n−1}`; its
//! operator is `ᵗΨ_τ = ᵗΨ_{x_0} ∘ … ∘ ᵗΨ_{x_{n−1}}` (note the order).

mod counting;
mod zeta;

pub use counting::{
    asymptotic_report, counting_tables, geometric_error_fit, rescale_counts, AsymptoticReport, CountingTables,
    GeometricFit, GridRow, PeriodRow, RescaledRow,
};
pub use zeta::{
    line_scan, line_scan_min, zeta_euler, zeta_log_derivative, zeta_minus_v, zeta_rational, zeta_series, LinePoint,
    ZetaValue,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exterior::PushForwardFamily;
use crate::linalg;
use crate::symbolic::{birkhoff_sum, check_budget, divisors, fix_points, next_lyndon, Potential, SymWord};
use crate::transfer::BlockOperator;

/// Words handed to one parallel task; fixed so that results do not depend on
/// the size of the thread pool.
pub(crate) const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord {
    pub word: SymWord,
    /// Minimal period `λ(τ)`.
    pub period: usize,
    /// `tr ᵗΨ_τ`.
    pub trace: f64,
    /// Eigenvalues of `ᵗΨ_τ`, by decreasing modulus.
    pub alphas: Vec<Complex64>,
    /// `V(τ)`, the Birkhoff sum over one period.
    pub v_tau: f64,
    /// `N(τ) = e^{V(τ)}`.
    pub n_tau: f64,
    /// Logarithm of the scale removed from the product while multiplying.
    pub log_scale: f64,
}

impl OrbitRecord {
    /// `tr ᵗΨ_τ^k = Σ_i α_i^k`.
    pub fn power_trace(&self, k: usize) -> f64 {
        power_trace(&self.alphas, k)
    }
}

pub(crate) fn power_trace(alphas: &[Complex64], k: usize) -> f64 {
    alphas.iter().map(|a| a.powu(k as u32).re).sum()
}

/// Reusable buffers for the renormalized products.
pub(crate) struct Scratch {
    acc: DMatrix<f64>,
    tmp: DMatrix<f64>,
    h: DMatrix<f64>,
    htmp: DMatrix<f64>,
}

impl Scratch {
    pub(crate) fn new(family: &PushForwardFamily) -> Self {
        let (m, c) = (family.m(), family.dim_form());
        Scratch {
            acc: DMatrix::zeros(m, m),
            tmp: DMatrix::zeros(m, m),
            h: DMatrix::zeros(c, c),
            htmp: DMatrix::zeros(c, c),
        }
    }
}

pub(crate) struct OrbitCore {
    pub trace: f64,
    pub alphas: Vec<Complex64>,
    pub log_scale: f64,
}

/// `ᵗΨ_{w_0} ⋯ ᵗΨ_{w_{n−1}}` with the HS norm divided out after every factor.
///
/// Since `ᵗΨ_w(A) = H A ᵗH` with `H = P_{w_0} ⋯ P_{w_{n−1}}`, the eigenvalues
/// are the products `λ_i λ_j`, `i ≤ j`, of the eigenvalues of `H`. They are
/// taken from the small product `H`: when `H` has a complex pair, all `α` share
/// one modulus and the real one must come first, which the `m × m`
/// eigensolver cannot resolve for strongly non-normal products.
pub(crate) fn orbit_core(family: &PushForwardFamily, word: &[usize], s: &mut Scratch) -> Result<OrbitCore> {
    let vanished = || Error::NumericRange(format!("orbit product vanished at word {}", SymWord::from_symbols(word.to_vec())));
    let mut log_scale = 0.0;
    let mut log_h = 0.0;
    s.acc.copy_from(family.psi_t(word[0]));
    s.h.copy_from(family.pullback(word[0]));
    let nrm = linalg::hs_norm(&s.acc);
    s.acc /= nrm;
    log_scale += nrm.ln();
    let nrm = linalg::hs_norm(&s.h);
    s.h /= nrm;
    log_h += nrm.ln();
    for &x in &word[1..] {
        s.tmp.gemm(1.0, &s.acc, family.psi_t(x), 0.0);
        let nrm = linalg::hs_norm(&s.tmp);
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(vanished());
        }
        s.tmp /= nrm;
        log_scale += nrm.ln();
        std::mem::swap(&mut s.acc, &mut s.tmp);
        s.htmp.gemm(1.0, &s.h, family.pullback(x), 0.0);
        let nrm = linalg::hs_norm(&s.htmp);
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(vanished());
        }
        s.htmp /= nrm;
        log_h += nrm.ln();
        std::mem::swap(&mut s.h, &mut s.htmp);
    }
    if log_scale < -700.0 || log_scale > 700.0 || 2.0 * log_h < -700.0 || 2.0 * log_h > 700.0 {
        return Err(Error::NumericRange(format!("orbit scale e^{log_scale:.1} is outside the f64 range")));
    }
    let lambdas = linalg::eigenvalues_by_modulus(&s.h);
    let scale = (2.0 * log_h).exp();
    let mut alphas = Vec::with_capacity(family.m());
    for i in 0..lambdas.len() {
        for j in i..lambdas.len() {
            alphas.push(lambdas[i] * lambdas[j] * scale);
        }
    }
    linalg::sort_by_modulus(&mut alphas);
    Ok(OrbitCore {
        trace: s.acc.trace() * log_scale.exp(),
        alphas,
        log_scale,
    })
}

pub fn orbit_record(family: &PushForwardFamily, v: &Potential, word: &SymWord) -> Result<OrbitRecord> {
    let w = word.symbols();
    if w.is_empty() || w.iter().any(|&x| x >= family.t()) {
        return Err(Error::Argument(format!("\"{word}\" is not a word over {} symbols", family.t())));
    }
    if word.minimal_period() != w.len() || (1..w.len()).any(|j| word.rotate(j).symbols() < w) {
        return Err(Error::Argument(format!("\"{word}\" is not a Lyndon word")));
    }
    let mut s = Scratch::new(family);
    let core = orbit_core(family, w, &mut s)?;
    let v_tau = birkhoff_sum(v, w);
    Ok(OrbitRecord {
        word: word.clone(),
        period: w.len(),
        trace: core.trace,
        alphas: core.alphas,
        v_tau,
        n_tau: v_tau.exp(),
        log_scale: core.log_scale,
    })
}

/// Lyndon words of length `n`, packed `n` bytes per word, in lexicographic
/// order and cut into chunks of [`CHUNK`] words.
pub(crate) fn lyndon_chunks(t: usize, n: usize, budget: f64) -> Result<Vec<Vec<u8>>> {
    if t > 256 {
        return Err(Error::Argument("at most 256 symbols are supported for enumeration".into()));
    }
    if n == 0 {
        return Err(Error::Argument("period must be at least 1".into()));
    }
    check_budget(t, n, budget)?;
    let mut chunks = Vec::new();
    let mut cur: Vec<u8> = Vec::with_capacity(CHUNK * n);
    let mut w = vec![0usize];
    loop {
        if w.len() == n {
            cur.extend(w.iter().map(|&x| x as u8));
            if cur.len() == CHUNK * n {
                chunks.push(std::mem::replace(&mut cur, Vec::with_capacity(CHUNK * n)));
            }
        }
        if !next_lyndon(&mut w, t, n) {
            break;
        }
    }
    if !cur.is_empty() {
        chunks.push(cur);
    }
    Ok(chunks)
}

/// Records of all prime orbits with period `1..=max_period`, ordered by
/// period and then lexicographically.
pub fn orbit_records(family: &PushForwardFamily, v: &Potential, max_period: usize, budget: f64) -> Result<Vec<OrbitRecord>> {
    let t = family.t();
    let mut out = Vec::new();
    for n in 1..=max_period {
        let chunks = lyndon_chunks(t, n, budget)?;
        let parts: Vec<Vec<OrbitRecord>> = chunks
            .par_iter()
            .map(|chunk| {
                let mut s = Scratch::new(family);
                let mut buf = vec![0usize; n];
                chunk
                    .chunks(n)
                    .map(|packed| {
                        for (b, &x) in buf.iter_mut().zip(packed) {
                            *b = x as usize;
                        }
                        let core = orbit_core(family, &buf, &mut s)?;
                        let v_tau = birkhoff_sum(v, &buf);
                        Ok(OrbitRecord {
                            word: SymWord::from_symbols(buf.clone()),
                            period: n,
                            trace: core.trace,
                            alphas: core.alphas,
                            v_tau,
                            n_tau: v_tau.exp(),
                            log_scale: core.log_scale,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        out.extend(parts.into_iter().flatten());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixSumMethod {
    /// Divisor assembly from prime-orbit records.
    Enumeration,
    /// Direct sum over all `t^n` points of `Fix_n`.
    Direct,
    /// `tr(Lⁿ)` of the dense block matrix.
    TracePower,
}

/// `a_n = Σ_{d|n} d Σ_{λ(τ)=d} e^{(n/d)V(τ)} tr ᵗΨ_τ^{n/d}` for `n = 1..=n_max`.
/// `records` must contain every prime orbit of period at most `n_max`.
pub fn assemble_fix_sums(records: &[OrbitRecord], n_max: usize) -> Vec<f64> {
    let mut a = vec![0.0; n_max];
    for r in records {
        let d = r.period;
        let mut k = 1;
        while d * k <= n_max {
            let term: f64 = r.alphas.iter().map(|al| (al * r.v_tau.exp()).powu(k as u32).re).sum();
            a[d * k - 1] += d as f64 * term;
            k += 1;
        }
    }
    a
}

/// `tr(Lⁿ)` for `n = 1..=n_max`.
pub fn trace_powers(block: &BlockOperator, n_max: usize) -> Vec<f64> {
    let l = block.dense();
    let mut p = l.clone();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if n > 1 {
            p = &p * &l;
        }
        out.push(p.trace());
    }
    out
}

pub fn fix_sum(block: &BlockOperator, n: usize, method: FixSumMethod, budget: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("fix_sum needs n >= 1".into()));
    }
    let fam = block.family();
    let v = block.potential();
    match method {
        FixSumMethod::TracePower => Ok(trace_powers(block, n)[n - 1]),
        FixSumMethod::Direct => {
            let mut s = Scratch::new(fam);
            let mut total = 0.0;
            for x in fix_points(block.t(), n, budget)? {
                let core = orbit_core(fam, &x, &mut s)?;
                total += birkhoff_sum(v, &x).exp() * core.trace;
            }
            Ok(total)
        }
        FixSumMethod::Enumeration => {
            let mut total = 0.0;
            for d in divisors(n) {
                let chunks = lyndon_chunks(block.t(), d, budget)?;
                let k = (n / d) as u32;
                let parts: Vec<f64> = chunks
                    .par_iter()
                    .map(|chunk| {
                        let mut s = Scratch::new(fam);
                        let mut buf = vec![0usize; d];
                        let mut acc = 0.0;
                        for packed in chunk.chunks(d) {
                            for (b, &x) in buf.iter_mut().zip(packed) {
                                *b = x as usize;
                            }
                            let core = orbit_core(fam, &buf, &mut s)?;
                            let w = birkhoff_sum(v, &buf).exp();
                            acc += core.alphas.iter().map(|al| (al * w).powu(k).re).sum::<f64>();
                        }
                        Ok(acc)
                    })
                    .collect::<Result<_>>()?;
                total += d as f64 * parts.iter().sum::<f64>();
            }
            Ok(total)
        }
    }
}
