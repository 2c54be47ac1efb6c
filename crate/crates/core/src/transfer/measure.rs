//! Kusuoka cylinder measures, conditional probabilities and sampling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BlockOperator, SpectralResult};
use crate::error::{Error, Result};
use crate::exterior::SymOperator;
use crate::symbolic::SymWord;

fn hs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Matrix-valued measure `μ` and scalar measure `κ` on cylinders.
#[derive(Debug, Clone)]
pub struct CylinderMeasure {
    block: BlockOperator,
    spectral: SpectralResult,
    mu_total: SymOperator,
    state_mass: Vec<f64>,
}

impl CylinderMeasure {
    pub fn new(block: BlockOperator, spectral: SpectralResult) -> Self {
        let mu_total = spectral.mu_total();
        let state_mass = spectral
            .q
            .iter()
            .zip(&spectral.mu)
            .map(|(q, m)| hs(q.matrix(), m.matrix()).max(0.0))
            .collect();
        Self {
            block,
            spectral,
            mu_total,
            state_mass,
        }
    }

    pub fn block(&self) -> &BlockOperator {
        &self.block
    }

    pub fn spectral(&self) -> &SpectralResult {
        &self.spectral
    }

    pub fn beta(&self) -> f64 {
        self.spectral.beta
    }

    pub fn mu_total(&self) -> &SymOperator {
        &self.mu_total
    }

    fn k(&self) -> usize {
        self.block.memory()
    }

    fn check_word(&self, w: &[usize]) -> Result<()> {
        if let Some(&s) = w.iter().find(|&&s| s >= self.block.t()) {
            return Err(Error::Argument(format!("symbol {} outside alphabet", s + 1)));
        }
        Ok(())
    }

    /// `μ([w])` for `|w| ≥ k − 1` by left extension from the state block of
    /// the last `k − 1` symbols.
    fn mu_long(&self, w: &[usize]) -> DMatrix<f64> {
        let k = self.k();
        let n = w.len();
        let fam = self.block.family();
        let base = self.block.state_of(&w[n + 1 - k..]);
        let mut acc = self.spectral.mu[base].matrix().clone();
        let beta = self.spectral.beta;
        for j in (0..n + 1 - k).rev() {
            // prepend w[j] to the cylinder w[j+1..]
            let i = w[j];
            let u = self.block.state_of(&w[j + 1..]);
            let p = fam.pullback(i);
            acc = (p * &acc * p.transpose()) * (self.block.log_weight(u, i).exp() / beta);
        }
        acc
    }

    fn mu_matrix(&self, w: &[usize]) -> DMatrix<f64> {
        let k = self.k();
        if w.len() + 1 >= k {
            return self.mu_long(w);
        }
        // shorter than a state: sum the children
        let t = self.block.t();
        let mut acc = DMatrix::zeros(self.block.family().dim_form(), self.block.family().dim_form());
        let mut child = w.to_vec();
        child.push(0);
        for i in 0..t {
            *child.last_mut().unwrap() = i;
            acc += self.mu_matrix(&child);
        }
        acc
    }

    pub fn mu(&self, w: &SymWord) -> Result<SymOperator> {
        self.check_word(w.symbols())?;
        Ok(SymOperator::from_symmetric(self.mu_matrix(w.symbols())))
    }

    fn kappa_slice(&self, w: &[usize]) -> f64 {
        let k = self.k();
        if w.len() + 1 < k {
            let mut child = w.to_vec();
            child.push(0);
            return (0..self.block.t())
                .map(|i| {
                    *child.last_mut().unwrap() = i;
                    self.kappa_slice(&child)
                })
                .sum();
        }
        let q = &self.spectral.q[self.block.state_of(w)];
        hs(q.matrix(), &self.mu_long(w))
    }

    /// `κ([w]) = (Q_{state(w)}, μ([w]))_HS`.
    pub fn kappa(&self, w: &SymWord) -> Result<f64> {
        self.check_word(w.symbols())?;
        Ok(self.kappa_slice(w.symbols()))
    }

    /// `κ` of the states, i.e. of the cylinders of length `k − 1`.
    pub fn state_masses(&self) -> &[f64] {
        &self.state_mass
    }

    fn require_context(&self, context: &[usize], l: usize) -> Result<()> {
        self.check_word(context)?;
        let k = self.k();
        if l + 1 < k {
            return Err(Error::Argument(format!(
                "depth {l} is below the state length {}",
                k - 1
            )));
        }
        if context.len() < l.max(k - 1) {
            return Err(Error::Argument(format!(
                "context of length {} is shorter than the depth {l}",
                context.len()
            )));
        }
        Ok(())
    }

    /// Ratio estimators `κ([i x_1…x_l]) / κ([x_1…x_l])` for every symbol `i`,
    /// where `context = x_1 x_2 …`.
    pub fn conditional_probs(&self, context: &[usize], l: usize) -> Result<Vec<f64>> {
        self.require_context(context, l)?;
        let w = &context[..l];
        let mu_w = self.mu_long(w);
        let den = hs(self.spectral.q[self.block.state_of(w)].matrix(), &mu_w);
        if !(den > 0.0 && den.is_finite()) {
            return Err(Error::Degenerate(format!(
                "cylinder [{}] has mass {den}",
                SymWord::from_symbols(w.to_vec())
            )));
        }
        let k = self.k();
        let u = self.block.state_of(w);
        let fam = self.block.family();
        let beta = self.spectral.beta;
        let mut ext = Vec::with_capacity(k);
        Ok((0..self.block.t())
            .map(|i| {
                ext.clear();
                ext.push(i);
                ext.extend_from_slice(&w[..k - 1]);
                let p = fam.pullback(i);
                let mu_iw = (p * &mu_w * p.transpose()) * (self.block.log_weight(u, i).exp() / beta);
                let q = &self.spectral.q[self.block.state_of(&ext)];
                hs(q.matrix(), &mu_iw) / den
            })
            .collect())
    }

    pub fn conditional_prob(&self, i: usize, context: &[usize], l: usize) -> Result<f64> {
        if i >= self.block.t() {
            return Err(Error::Argument(format!("symbol {} outside alphabet", i + 1)));
        }
        Ok(self.conditional_probs(context, l)?[i])
    }

    /// `M^{(l)}(w) = ᵗΨ_{w_0}∘…∘ᵗΨ_{w_{l−1}}(μ(Σ))`, rescaled so that
    /// `(Q_{state(w)}, M)_HS = 1`.
    pub fn density_m(&self, w: &[usize]) -> Result<SymOperator> {
        self.check_word(w)?;
        if w.len() + 1 < self.k() {
            return Err(Error::Argument(format!(
                "density needs a prefix of length >= {}",
                self.k() - 1
            )));
        }
        let fam = self.block.family();
        let mut acc = self.mu_total.matrix().clone();
        for &s in w.iter().rev() {
            let p = fam.pullback(s);
            acc = p * &acc * p.transpose();
            let n = acc.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Degenerate("density product vanished".into()));
            }
            acc /= n;
        }
        let z = hs(self.spectral.q[self.block.state_of(w)].matrix(), &acc);
        if !(z > 0.0) {
            return Err(Error::Degenerate("density is orthogonal to Q".into()));
        }
        Ok(SymOperator::from_symmetric(acc / z))
    }

    /// The conditional probabilities in closed form,
    /// `e^{V(i x)} (Ψ_i Q_{state(i x)}, M(x))_HS / β` with `M = M^{(l)}`.
    pub fn conditional_probs_formula(&self, context: &[usize], l: usize) -> Result<Vec<f64>> {
        self.require_context(context, l)?;
        let k = self.k();
        let m = self.density_m(&context[..l.max(k - 1)])?;
        let u = self.block.state_of(context);
        let fam = self.block.family();
        let beta = self.spectral.beta;
        let mut ext = Vec::with_capacity(k);
        Ok((0..self.block.t())
            .map(|i| {
                ext.clear();
                ext.push(i);
                ext.extend_from_slice(&context[..k - 1]);
                let q = self.spectral.q[self.block.state_of(&ext)].matrix();
                let p = fam.pullback(i);
                let psi_q = p.transpose() * q * p;
                self.block.log_weight(u, i).exp() * hs(&psi_q, m.matrix()) / beta
            })
            .collect())
    }

    fn sample_with(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let k = self.k();
        let t = self.block.t();
        let fam = self.block.family();
        let beta = self.spectral.beta;
        let total: f64 = self.state_mass.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut state = self.state_mass.len() - 1;
        for (u, &p) in self.state_mass.iter().enumerate() {
            if target < p {
                state = u;
                break;
            }
            target -= p;
        }
        let mut x = vec![0usize; k - 1];
        let mut s = state;
        for slot in x.iter_mut().rev() {
            *slot = s % t;
            s /= t;
        }
        let mut r = self.spectral.q[state].matrix().clone();
        let mut candidates: Vec<DMatrix<f64>> = Vec::with_capacity(t);
        let mut weights = vec![0.0; t];
        while x.len() < n {
            let len = x.len();
            let j = len + 1 - k;
            candidates.clear();
            for i in 0..t {
                let sym = if j < len { x[j] } else { i };
                // window x_j … x_len with x_len = i
                let mut idx = 0usize;
                for pos in j..len {
                    idx = idx * t + x[pos];
                }
                idx = idx * t + i;
                let vw = self.block.potential().eval_index(idx).exp() / beta;
                let p = fam.pullback(sym);
                let ri = (p.transpose() * &r * p) * vw;
                // state of the last k − 1 symbols of x·i
                let mut last = 0usize;
                for pos in len + 2 - k..len {
                    last = last * t + x[pos];
                }
                if k > 1 {
                    last = last * t + i;
                }
                weights[i] = hs(&ri, self.spectral.mu[last].matrix()).max(0.0);
                candidates.push(ri);
            }
            let sum: f64 = weights.iter().sum();
            let mut target = rng.random::<f64>() * sum;
            let mut pick = t - 1;
            for (i, &w) in weights.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            r = candidates.swap_remove(pick) / sum;
            x.push(pick);
        }
        x.truncate(n);
        x
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `x_0 … x_{n−1}` from `κ` by sequential conditionals `κ([w i]) / κ([w])`.
pub fn sample_kappa(cm: &CylinderMeasure, n: usize, seed: u64) -> Result<SymWord> {
    sample_kappa_stream(cm, n, seed, 0)
}

/// As [`sample_kappa`] on the independent stream `stream` of the seed.
pub fn sample_kappa_stream(cm: &CylinderMeasure, n: usize, seed: u64, stream: u64) -> Result<SymWord> {
    if n + 1 < cm.k() {
        return Err(Error::Argument(format!(
            "sample length {n} is below the state length {}",
            cm.k() - 1
        )));
    }
    let mut rng = stream_rng(seed, stream);
    Ok(SymWord::from_symbols(cm.sample_with(n, &mut rng)))
}

/// `count` independent samples; sample `j` uses stream `j`, so the output
/// does not depend on the number of worker threads.
pub fn sample_kappa_many(cm: &CylinderMeasure, n: usize, count: usize, seed: u64) -> Result<Vec<SymWord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|j| sample_kappa_stream(cm, n, seed, j))
        .collect()
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    stream_rng(seed, stream)
}

#[cfg(test)]
mod tests {
    use super::super::{perron, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use super::*;
    use crate::ifs::{dyadic, harmonic_gasket};
    use crate::symbolic::{fix_points, Potential, DEFAULT_BUDGET};

    fn measure(ifs: &crate::ifs::IfsSpec, v: &Potential) -> CylinderMeasure {
        let b = BlockOperator::new(ifs, 1, v).unwrap();
        let s = perron(&b, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        CylinderMeasure::new(b, s)
    }

    fn memory2() -> Potential {
        Potential::from_fn(3, 2, |w| 0.3 * w[0] as f64 - 0.2 * (w[1] as f64).powi(2) + 0.1, "m2").unwrap()
    }

    #[test]
    fn total_mass_and_additivity() {
        let g = harmonic_gasket();
        for v in [Potential::zero(3), memory2()] {
            let cm = measure(&g, &v);
            let k = v.memory();
            for n in k - 1..=k + 2 {
                let total: f64 = if n == 0 {
                    cm.kappa(&SymWord::empty()).unwrap()
                } else {
                    fix_points(3, n, DEFAULT_BUDGET)
                        .unwrap()
                        .map(|w| cm.kappa(&SymWord::from_symbols(w)).unwrap())
                        .sum()
                };
                assert!((total - 1.0).abs() < 1e-10, "n={n} total={total}");
            }
            for w in fix_points(3, 3, DEFAULT_BUDGET).unwrap() {
                let w = SymWord::from_symbols(w);
                let parent = cm.mu(&w).unwrap();
                let children = (0..3)
                    .map(|i| cm.mu(&w.concat(&SymWord::from_symbols(vec![i]))).unwrap())
                    .fold(SymOperator::zeros(2), |a, b| a.add(&b));
                assert!((parent.matrix() - children.matrix()).abs().max() < 1e-10);
                let left: f64 = (0..3).map(|i| cm.kappa(&w.prepend(i)).unwrap()).sum();
                assert!((left - cm.kappa(&w).unwrap()).abs() < 1e-10);
                assert!(parent.is_psd(1e-10));
            }
        }
    }

    #[test]
    fn dyadic_uniformity() {
        let cm = measure(&dyadic(), &Potential::zero(2));
        let base = cm.mu(&SymWord::empty()).unwrap();
        for n in 1..6 {
            for w in fix_points(2, n, DEFAULT_BUDGET).unwrap() {
                let w = SymWord::from_symbols(w);
                assert!((cm.kappa(&w).unwrap() - 0.5f64.powi(n as i32)).abs() < 1e-14);
                let mu = cm.mu(&w).unwrap();
                assert!((mu.matrix() - base.matrix() * 0.5f64.powi(n as i32)).abs().max() < 1e-14);
            }
        }
        let ctx = [0, 1, 1, 0, 1];
        for i in 0..2 {
            assert!((cm.conditional_prob(i, &ctx, 5).unwrap() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn conditionals_sum_to_one_and_match_formula() {
        let cm = measure(&harmonic_gasket(), &memory2());
        let w = sample_kappa(&cm, 40, 5).unwrap();
        let ctx = &w.symbols()[1..];
        let ratio = cm.conditional_probs(ctx, 20).unwrap();
        let formula = cm.conditional_probs_formula(ctx, 20).unwrap();
        assert!((ratio.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((formula.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for (a, b) in ratio.iter().zip(&formula) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn density_is_normalized_and_converges() {
        let cm = measure(&harmonic_gasket(), &Potential::zero(3));
        let w = sample_kappa(&cm, 40, 9).unwrap();
        let mut prev: Option<SymOperator> = None;
        let mut diffs = vec![];
        for l in [4, 8, 16, 32] {
            let m = cm.density_m(&w.symbols()[..l]).unwrap();
            assert!(m.is_psd(1e-10));
            let z = crate::exterior::hs_inner(&cm.spectral().q[0], &m).unwrap();
            assert!((z - 1.0).abs() < 1e-12);
            if let Some(p) = prev {
                diffs.push(m.sub(&p).hs_norm());
            }
            prev = Some(m);
        }
        assert!(diffs.windows(2).all(|d| d[1] <= d[0] + 1e-15), "{diffs:?}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let cm = measure(&harmonic_gasket(), &memory2());
        assert_eq!(sample_kappa(&cm, 30, 1).unwrap(), sample_kappa(&cm, 30, 1).unwrap());
        assert_ne!(sample_kappa(&cm, 30, 1).unwrap(), sample_kappa(&cm, 30, 2).unwrap());
    }

    #[test]
    fn first_symbol_frequencies() {
        let cm = measure(&harmonic_gasket(), &memory2());
        let n = 20_000;
        let samples = sample_kappa_many(&cm, 3, n, 77).unwrap();
        for i in 0..3 {
            let p = cm.kappa(&SymWord::from_symbols(vec![i])).unwrap();
            let freq = samples.iter().filter(|w| w.symbols()[0] == i).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "symbol {i}: {freq} vs {p}");
        }
    }
}
