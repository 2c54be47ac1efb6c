//! Products of the cocycle `H(x) = ᵗΨ_{x_0}` along a word: the Lyapunov
//! matrix `Λ_x = lim [H^l(x) μ(Σ) ᵗH^l(x)]^{1/2l}` and the normalized
//! matrices `H^l μ ᵗH^l / ‖·‖`, which become rank one when the top exponent
//! is simple.
//!
//! `H^l(x) = P_{x_0} ⋯ P_{x_{l−1}}` with `P_i` the pull-back matrices, so
//! `H^l μ ᵗH^l = ᵗΨ_{x_0} ∘ … ∘ ᵗΨ_{x_{l−1}}(μ)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{PushForwardFamily, SymOperator};
use crate::linalg::{hs_norm, sym_eigen, symmetrize};

/// Eigenvalues at or below this are treated as zero.
const CLAMP: f64 = 1e-300;

#[derive(Debug, Clone, Serialize)]
pub struct LyapEstimate {
    pub l: usize,
    /// Symmetric PSD estimate of `Λ_x`.
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    /// Eigenvalues of the estimate, descending.
    pub eigenvalues: Vec<f64>,
    pub top: f64,
    /// `1 − λ₂/λ₁` (1 for a 1×1 cocycle).
    pub gap: f64,
    /// Some singular value of the product vanished.
    pub reduced_rank: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub l: usize,
    /// `H^l μ ᵗH^l` divided by its HS norm.
    #[serde(skip)]
    pub p: SymOperator,
    /// `‖P² − P‖_HS` after scaling `P` to unit trace.
    pub idempotency_defect: f64,
    /// `λ₂/λ₁` of `P`; near 0 for an essentially rank-one matrix.
    pub rank_indicator: f64,
}

fn check(family: &PushForwardFamily, mu_total: &SymOperator, word: &[usize], l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::Argument("l must be at least 1".into()));
    }
    if word.len() < l {
        return Err(Error::Argument(format!("word of length {} is shorter than l = {l}", word.len())));
    }
    if word[..l].iter().any(|&x| x >= family.t()) {
        return Err(Error::Argument("symbol out of range".into()));
    }
    if mu_total.dim() != family.dim_form() {
        return Err(Error::Dimension {
            expected: family.dim_form(),
            got: mu_total.dim(),
        });
    }
    Ok(())
}

/// `B = P_{x_0} ⋯ P_{x_{l−1}} R` with `μ = R Rᵀ`, accumulated right to left.
/// Returns the log moduli of the triangular diagonals from a QR step after
/// every factor (the singular-value exponents of the product) and the
/// normalized `B Bᵀ / ‖B Bᵀ‖`.
fn cocycle(family: &PushForwardFamily, mu: &SymOperator, word: &[usize], l: usize) -> (Vec<f64>, DMatrix<f64>) {
    let c = family.dim_form();
    // PSD square root; a Cholesky factor would fail on singular μ
    let (vals, vecs) = sym_eigen(mu.matrix());
    let root = &vecs * DMatrix::from_diagonal(&vals.map(|x| x.max(0.0).sqrt()));
    let mut b = root.clone();
    let nrm = hs_norm(&b);
    b /= nrm;
    // orthonormal frame; the bounded factor μ^{1/2} does not change the exponents
    let mut g = DMatrix::<f64>::identity(c, c);
    let mut logs = vec![0.0; c];
    for &x in word[..l].iter().rev() {
        let p = family.pullback(x);
        b = p * &b;
        let n = hs_norm(&b);
        if n > 0.0 {
            b /= n;
        }
        let qr = (p * &g).qr();
        for (i, lg) in logs.iter_mut().enumerate() {
            *lg += qr.r()[(i, i)].abs().max(CLAMP).ln();
        }
        g = qr.q();
    }
    let mut s = symmetrize(&(&b * b.transpose()));
    let n = hs_norm(&s);
    if n > 0.0 {
        s /= n;
    }
    (logs, s)
}

/// `[H^l μ ᵗH^l]^{1/2l}`: eigenvectors from the normalized product, eigenvalues
/// `σ_i^{1/l}` from the QR-accumulated singular values of `H^l μ^{1/2}`.
pub fn lyap_matrix(family: &PushForwardFamily, mu_total: &SymOperator, word: &[usize], l: usize) -> Result<LyapEstimate> {
    check(family, mu_total, word, l)?;
    let (mut logs, s) = cocycle(family, mu_total, word, l);
    logs.sort_by(|a, b| b.total_cmp(a));
    let reduced_rank = logs.iter().any(|&x| x <= CLAMP.ln() * 0.5);
    let eig: Vec<f64> = logs.iter().map(|x| (x / l as f64).exp()).collect();
    let (_, vecs) = sym_eigen(&s);
    let c = family.dim_form();
    // sym_eigen is ascending; pair the largest exponent with the top direction
    let diag = DMatrix::from_fn(c, c, |i, j| if i == j { eig[c - 1 - i] } else { 0.0 });
    let matrix = symmetrize(&(&vecs * diag * vecs.transpose()));
    let gap = if c > 1 { 1.0 - eig[1] / eig[0] } else { 1.0 };
    Ok(LyapEstimate {
        l,
        matrix,
        top: eig[0],
        eigenvalues: eig,
        gap,
        reduced_rank,
    })
}

pub fn oseledets_projection(
    family: &PushForwardFamily,
    mu_total: &SymOperator,
    word: &[usize],
    l: usize,
) -> Result<Projection> {
    check(family, mu_total, word, l)?;
    let (_, s) = cocycle(family, mu_total, word, l);
    let tr = s.trace();
    let unit = &s / tr;
    let defect = hs_norm(&(&unit * &unit - &unit));
    let (vals, _) = sym_eigen(&s);
    let n = vals.len();
    let rank_indicator = if n > 1 { vals[n - 2].max(0.0) / vals[n - 1] } else { 0.0 };
    Ok(Projection {
        l,
        p: SymOperator::from_symmetric(s),
        idempotency_defect: defect,
        rank_indicator,
    })
}

/// HS angle between two nonzero symmetric operators, in radians.
pub fn hs_angle(a: &SymOperator, b: &SymOperator) -> f64 {
    let ip: f64 = a.matrix().component_mul(b.matrix()).sum();
    let cos = ip / (a.hs_norm() * b.hs_norm());
    // acos is ill-conditioned near 1; use the sine from the orthogonal residual
    let resid = a.matrix() / a.hs_norm() - b.matrix() * (cos / b.hs_norm());
    hs_norm(&resid).atan2(cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{dyadic, harmonic_gasket, rotation_family};
    use crate::symbolic::Potential;
    use crate::transfer::{perron, sample_kappa, BlockOperator, CylinderMeasure, DEFAULT_MAX_ITER, DEFAULT_TOL};

    fn normalized_mu(cm: &CylinderMeasure) -> SymOperator {
        let mu = cm.mu_total();
        mu.scaled(1.0 / mu.max_eigenvalue())
    }

    fn measure(ifs: &crate::ifs::IfsSpec) -> CylinderMeasure {
        let b = BlockOperator::new(ifs, 1, &Potential::zero(ifs.t())).unwrap();
        let s = perron(&b, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        CylinderMeasure::new(b, s)
    }

    #[test]
    fn dyadic_is_one_half() {
        let cm = measure(&dyadic());
        let fam = cm.block().family();
        let mu = normalized_mu(&cm);
        for w in [vec![0, 1, 1, 0, 1], vec![1; 5]] {
            for l in 1..=5 {
                let e = lyap_matrix(fam, &mu, &w, l).unwrap();
                assert!((e.top - 0.5).abs() < 1e-12);
                let p = oseledets_projection(fam, &mu, &w, l).unwrap();
                assert!((p.p.matrix()[(0, 0)] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn conformal_top_is_rho() {
        let cm = measure(&rotation_family(0.8, 3).unwrap());
        let fam = cm.block().family();
        let mu = normalized_mu(&cm);
        let w: Vec<usize> = (0..60).map(|j| (j * 7 + j / 3) % 3).collect();
        let e = lyap_matrix(fam, &mu, &w, 60).unwrap();
        assert!((e.top - 0.8).abs() < 1e-10, "{}", e.top);
        let m = &e.matrix;
        assert!((m - m.transpose()).amax() < 1e-14);
        assert!(crate::linalg::sym_eigenvalues(m).min() > -1e-10);
    }

    #[test]
    fn gasket_rank_one_limit() {
        let cm = measure(&harmonic_gasket());
        let fam = cm.block().family();
        let mu = normalized_mu(&cm);
        let w = sample_kappa(&cm, 240, 11).unwrap();
        let w = w.symbols();
        let e = lyap_matrix(fam, &mu, w, 200).unwrap();
        assert!(e.gap > 1e-3, "{e:?}");
        let p10 = oseledets_projection(fam, &mu, w, 10).unwrap();
        let p200 = oseledets_projection(fam, &mu, w, 200).unwrap();
        assert!(p200.idempotency_defect < 1e-2);
        assert!(p200.idempotency_defect <= p10.idempotency_defect + 1e-12);
        let m = cm.density_m(&w[..200]).unwrap();
        assert!(hs_angle(&p200.p, &m) < 1e-6);
        // start index shift barely moves the spectrum
        let e2 = lyap_matrix(fam, &mu, &w[3..], 200).unwrap();
        assert!((e.top - e2.top).abs() < 1e-2 * e.top);
        let e100 = lyap_matrix(fam, &mu, w, 100).unwrap();
        assert!((e.top.ln() - e100.top.ln()).abs() < 0.05);
    }

    #[test]
    fn rejects_short_words() {
        let cm = measure(&harmonic_gasket());
        let mu = normalized_mu(&cm);
        assert!(lyap_matrix(cm.block().family(), &mu, &[0, 1], 3).is_err());
        assert!(oseledets_projection(cm.block().family(), &mu, &[0, 1], 0).is_err());
    }
}
