//! The finite-memory matrix Ruelle operator and its Perron data.
//!
//! A potential of memory `k` makes the transfer operator act on functions of
//! the first `k − 1` coordinates, i.e. on state vectors `(A_u)` indexed by
//! words `u` of length `k − 1`:
//!
//! `(L A)_u = Σ_i e^{V(i u)} Ψ_i(A_{(i u)_{0..k−1}})`.
//!
//! States are numbered in base `t` with the first symbol most significant and
//! the dense realization uses the index `state · m + a`.

mod diagnostics;
mod measure;
mod variational;

pub use diagnostics::{
    cone_diameter, contraction_check, correlation_report, dense_spectrum, gibbs_constant,
    spectral_gap, ContractionReport, CorrelationReport, GibbsReport, SpectralGap,
};
pub use measure::{sample_kappa, sample_kappa_many, sample_kappa_stream, CylinderMeasure};
pub use variational::{variational_value, Competitor, VariationalReport};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{binomial, hilbert_metric_product, PushForwardFamily, SymOperator};
use crate::ifs::IfsSpec;
use crate::symbolic::Potential;

#[derive(Debug, Clone)]
pub struct BlockOperator {
    family: PushForwardFamily,
    potential: Potential,
    n_states: usize,
}

impl BlockOperator {
    pub fn new(ifs: &IfsSpec, q: usize, v: &Potential) -> Result<Self> {
        let c = binomial(ifs.d(), q);
        if q == 0 || q > ifs.d() {
            return Err(Error::Argument(format!("form degree q = {q} must lie in 1..={}", ifs.d())));
        }
        if ifs.t() < c {
            return Err(Error::Argument(format!(
                "t = {} < binomial(d, q) = {c}: the operator cannot contract the cone",
                ifs.t()
            )));
        }
        Self::from_family(ifs.push_forward_family(q)?, v.clone())
    }

    pub fn from_family(family: PushForwardFamily, potential: Potential) -> Result<Self> {
        if potential.t() != family.t() {
            return Err(Error::Dimension {
                expected: family.t(),
                got: potential.t(),
            });
        }
        let n_states = family.t().pow(potential.memory() as u32 - 1);
        Ok(Self {
            family,
            potential,
            n_states,
        })
    }

    /// Same maps and degree, another potential.
    pub fn with_potential(&self, potential: Potential) -> Result<Self> {
        Self::from_family(self.family.clone(), potential)
    }

    pub fn family(&self) -> &PushForwardFamily {
        &self.family
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn memory(&self) -> usize {
        self.potential.memory()
    }

    pub fn t(&self) -> usize {
        self.family.t()
    }

    pub fn m(&self) -> usize {
        self.family.m()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Side of the dense matrix, `m · t^{k−1}`.
    pub fn side(&self) -> usize {
        self.m() * self.n_states
    }

    /// Index of the state `(i u)_{0..k−1}` feeding state `u` through symbol `i`.
    pub fn source_state(&self, i: usize, u: usize) -> usize {
        if self.memory() == 1 {
            0
        } else {
            i * (self.n_states / self.t()) + u / self.t()
        }
    }

    /// `V(i u)`, the potential on the window `i` followed by the state `u`.
    pub fn log_weight(&self, u: usize, i: usize) -> f64 {
        self.potential.eval_index(i * self.n_states + u)
    }

    /// State index of the first `k − 1` symbols of `w`.
    pub fn state_of(&self, w: &[usize]) -> usize {
        let k = self.memory();
        w[..k - 1].iter().fold(0, |acc, &s| acc * self.t() + s)
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.m();
        let mut out = DVector::zeros(self.side());
        for u in 0..self.n_states {
            for i in 0..self.t() {
                let src = self.source_state(i, u);
                let w = self.log_weight(u, i).exp();
                let contrib = self.family.psi(i) * v.rows(src * m, m);
                let mut dst = out.rows_mut(u * m, m);
                dst.axpy(w, &contrib, 1.0);
            }
        }
        out
    }

    pub fn apply_adjoint(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.m();
        let mut out = DVector::zeros(self.side());
        for u in 0..self.n_states {
            for i in 0..self.t() {
                let src = self.source_state(i, u);
                let w = self.log_weight(u, i).exp();
                let contrib = self.family.psi_t(i) * v.rows(u * m, m);
                let mut dst = out.rows_mut(src * m, m);
                dst.axpy(w, &contrib, 1.0);
            }
        }
        out
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut d = DMatrix::zeros(self.side(), self.side());
        for u in 0..self.n_states {
            for i in 0..self.t() {
                let src = self.source_state(i, u);
                let w = self.log_weight(u, i).exp();
                let mut block = d.view_mut((u * m, src * m), (m, m));
                block += self.family.psi(i) * w;
            }
        }
        d
    }

    /// Dense matrix with block weights `weight(V(i u))` in place of `e^{V(i u)}`.
    pub fn dense_complex(&self, weight: impl Fn(f64) -> Complex64) -> DMatrix<Complex64> {
        let m = self.m();
        let mut d = DMatrix::from_element(self.side(), self.side(), Complex64::new(0.0, 0.0));
        for u in 0..self.n_states {
            for i in 0..self.t() {
                let src = self.source_state(i, u);
                let w = weight(self.log_weight(u, i));
                let psi = self.family.psi(i);
                for a in 0..m {
                    for b in 0..m {
                        d[(u * m + a, src * m + b)] += w * psi[(a, b)];
                    }
                }
            }
        }
        d
    }

    pub fn to_states(&self, v: &DVector<f64>) -> Vec<SymOperator> {
        let m = self.m();
        (0..self.n_states)
            .map(|u| self.family.basis().from_coords(v.rows(u * m, m).as_slice()))
            .collect()
    }

    pub fn from_states(&self, ops: &[SymOperator]) -> DVector<f64> {
        let m = self.m();
        let mut v = DVector::zeros(self.side());
        for (u, op) in ops.iter().enumerate() {
            v.rows_mut(u * m, m).copy_from(&self.family.basis().coords(op));
        }
        v
    }

    /// The state vector with the identity at every state.
    pub fn identity_vector(&self) -> DVector<f64> {
        let ops = vec![SymOperator::identity(self.family.dim_form()); self.n_states];
        self.from_states(&ops)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub beta: f64,
    /// Right eigenvector, one positive-definite block per state.
    #[serde(skip)]
    pub q: Vec<SymOperator>,
    /// Left eigenvector, normalized so that `Σ_u (Q_u, μ_u)_HS = 1`.
    #[serde(skip)]
    pub mu: Vec<SymOperator>,
    pub iterations: usize,
    pub adjoint_iterations: usize,
    /// Projective distance between the last two right iterates.
    pub theta: f64,
    pub residual_right: f64,
    pub residual_left: f64,
    /// Sampled Hilbert diameter of `L^p(cone)` with `p = k`.
    pub diameter: f64,
}

impl SpectralResult {
    pub fn pressure(&self) -> f64 {
        self.beta.ln()
    }

    /// `μ(Σ) = Σ_u μ_u`.
    pub fn mu_total(&self) -> SymOperator {
        self.mu
            .iter()
            .skip(1)
            .fold(self.mu[0].clone(), |acc, x| acc.add(x))
    }
}

fn projective_step(block: &BlockOperator, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let a = block.to_states(v);
    let b = block.to_states(w);
    match hilbert_metric_product(&a, &b) {
        Ok(th) => th,
        // off the interior of the cone: fall back to the HS distance of unit vectors
        Err(_) => (v - w).norm(),
    }
}

/// Power iteration in the cone of positive-definite state vectors, followed
/// by the adjoint iteration for the left eigenvector.
pub fn perron(block: &BlockOperator, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Argument("perron needs tol > 0 and max_iter >= 1".into()));
    }
    let run = |adjoint: bool| -> std::result::Result<(DVector<f64>, f64, usize, f64), (usize, f64)> {
        let mut v = block.identity_vector();
        v /= v.norm();
        let mut theta = f64::INFINITY;
        for it in 1..=max_iter {
            let mut w = if adjoint { block.apply_adjoint(&v) } else { block.apply(&v) };
            let norm = w.norm();
            if !(norm.is_finite() && norm > 0.0) {
                return Err((it, theta));
            }
            w /= norm;
            let beta = norm;
            theta = projective_step(block, &v, &w);
            v = w;
            if theta < tol {
                return Ok((v, beta, it, theta));
            }
        }
        Err((max_iter, theta))
    };

    let (q_vec, beta, iterations, theta) = match run(false) {
        Ok(r) => r,
        Err((it, th)) => {
            return Err(Error::NonConvergence {
                iterations: it,
                theta: th,
                diameter: cone_diameter(block, block.memory(), 24, 0),
            })
        }
    };
    let (mu_vec, _, adjoint_iterations, _) = match run(true) {
        Ok(r) => r,
        Err((it, th)) => {
            return Err(Error::NonConvergence {
                iterations: it,
                theta: th,
                diameter: cone_diameter(block, block.memory(), 24, 0),
            })
        }
    };

    let q_ops = block.to_states(&q_vec);
    if let Some(u) = q_ops.iter().position(|x| !x.is_pd()) {
        return Err(Error::Contract(format!(
            "right eigenvector block {u} is not positive definite"
        )));
    }
    let pairing = q_vec.dot(&mu_vec);
    if !(pairing > 0.0) {
        return Err(Error::Degenerate("left and right eigenvectors are orthogonal".into()));
    }
    let mu_vec = mu_vec / pairing;

    let residual_right = (block.apply(&q_vec) - &q_vec * beta).norm() / (beta * q_vec.norm());
    let residual_left = (block.apply_adjoint(&mu_vec) - &mu_vec * beta).norm() / (beta * mu_vec.norm());
    Ok(SpectralResult {
        beta,
        q: q_ops,
        mu: block.to_states(&mu_vec),
        iterations,
        adjoint_iterations,
        theta,
        residual_right,
        residual_left,
        diameter: cone_diameter(block, block.memory(), 24, 0),
    })
}

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 10_000;

pub fn solve(ifs: &IfsSpec, q: usize, v: &Potential) -> Result<SpectralResult> {
    perron(&BlockOperator::new(ifs, q, v)?, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// `P(V) = log β_V`.
pub fn pressure(ifs: &IfsSpec, q: usize, v: &Potential) -> Result<f64> {
    Ok(solve(ifs, q, v)?.pressure())
}

pub fn pressure_of(block: &BlockOperator, v: &Potential) -> Result<f64> {
    Ok(perron(&block.with_potential(v.clone())?, DEFAULT_TOL, DEFAULT_MAX_ITER)?.pressure())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootResult {
    pub c: f64,
    /// `P(−c V̂)` at the returned `c`.
    pub pressure_at_c: f64,
    /// `P(0)`.
    pub pressure_zero: f64,
    pub evaluations: usize,
}

/// The unique `c` with `P(−c V̂) = 0`, by safeguarded regula falsi on the
/// strictly decreasing map `c ↦ P(−c V̂)`.
pub fn pressure_root(block: &BlockOperator, vhat: &Potential, tol: f64) -> Result<RootResult> {
    let vmin = vhat.min();
    if !(vmin > 0.0) {
        return Err(Error::Argument(format!(
            "V̂ must be strictly positive (minimum {vmin})"
        )));
    }
    let vmax = vhat.max();
    let f = |c: f64| pressure_of(block, &vhat.scaled(-c));
    let p0 = f(0.0)?;
    let mut evaluations = 1;
    if p0.abs() <= tol {
        return Ok(RootResult {
            c: 0.0,
            pressure_at_c: p0,
            pressure_zero: p0,
            evaluations,
        });
    }
    // P(0) − c·max V̂ ≤ P(−cV̂) ≤ P(0) − c·min V̂ for c ≥ 0 (reversed for c ≤ 0)
    let (mut lo, mut hi) = if p0 > 0.0 {
        (p0 / vmax, p0 / vmin)
    } else {
        (p0 / vmin, p0 / vmax)
    };
    let mut flo = f(lo)?;
    let mut fhi = f(hi)?;
    evaluations += 2;
    // widen slightly if rounding put an endpoint on the wrong side
    let mut widen = 0;
    while !(flo >= 0.0 && fhi <= 0.0) {
        let w = (hi - lo).abs().max(1e-12);
        if flo < 0.0 {
            lo -= w;
            flo = f(lo)?;
        }
        if fhi > 0.0 {
            hi += w;
            fhi = f(hi)?;
        }
        evaluations += 1;
        widen += 1;
        if widen > 60 {
            return Err(Error::NonConvergence {
                iterations: evaluations,
                theta: flo.abs().min(fhi.abs()),
                diameter: f64::NAN,
            });
        }
    }
    let (mut best_c, mut best_f) = if flo.abs() < fhi.abs() { (lo, flo) } else { (hi, fhi) };
    let mut side = 0i32;
    for _ in 0..200 {
        if best_f.abs() <= tol || (hi - lo).abs() <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
        // Illinois variant of regula falsi
        let c = if fhi != flo {
            (lo * fhi - hi * flo) / (fhi - flo)
        } else {
            0.5 * (lo + hi)
        };
        let c = if c > lo.min(hi) && c < lo.max(hi) { c } else { 0.5 * (lo + hi) };
        let fc = f(c)?;
        evaluations += 1;
        if fc.abs() < best_f.abs() {
            best_c = c;
            best_f = fc;
        }
        if fc > 0.0 {
            lo = c;
            flo = fc;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = c;
            fhi = fc;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(RootResult {
        c: best_c,
        pressure_at_c: best_f,
        pressure_zero: p0,
        evaluations,
    })
}
