//! The dynamical zeta function `ζ(z, V) = exp Σ_n a_n zⁿ / n` in its three
//! forms (power series, Euler product over prime orbits, `1/det(I − zL)`)
//! and `ζ_{−V}(s) = 1/det(I − L_{−sV})` on vertical lines.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::OrbitRecord;
use crate::linalg::{complex_det, complex_solve};
use crate::transfer::BlockOperator;

/// Values of `1/det` closer to a pole than this are reported as poles.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaValue {
    pub re: f64,
    pub im: f64,
    /// Bound on the truncation error of the series or product, when known.
    pub error_bound: Option<f64>,
    /// `|det| < 1e-12`: the value is left at `∞` and `det` is reported.
    pub near_pole: bool,
    pub det_re: f64,
    pub det_im: f64,
}

impl ZetaValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn det(&self) -> Complex64 {
        Complex64::new(self.det_re, self.det_im)
    }

    fn finite(v: Complex64, error_bound: Option<f64>) -> Self {
        let d = v.inv();
        ZetaValue {
            re: v.re,
            im: v.im,
            error_bound,
            near_pole: false,
            det_re: d.re,
            det_im: d.im,
        }
    }

    fn from_det(d: Complex64) -> Self {
        if d.norm() < POLE_TOL {
            ZetaValue {
                re: f64::INFINITY,
                im: 0.0,
                error_bound: None,
                near_pole: true,
                det_re: d.re,
                det_im: d.im,
            }
        } else {
            let v = d.inv();
            ZetaValue {
                re: v.re,
                im: v.im,
                error_bound: Some(0.0),
                near_pole: false,
                det_re: d.re,
                det_im: d.im,
            }
        }
    }
}

/// Tail of `Σ_{n>N} |a_n| |z|ⁿ / n` under `|a_n| ≤ K βⁿ`, `K = max_{n≤N} |a_n|/βⁿ`.
/// Infinite when `β|z| ≥ 1`.
fn geometric_tail(a: &[f64], beta: f64, z: f64, start: usize) -> f64 {
    let x = beta * z;
    if x >= 1.0 {
        return f64::INFINITY;
    }
    let k = a
        .iter()
        .enumerate()
        .map(|(j, v)| v.abs() / beta.powi(j as i32 + 1))
        .fold(0.0, f64::max);
    let n = start as f64 + 1.0;
    k * x.powf(n) / (n * (1.0 - x))
}

fn error_from_log_tail(value: Complex64, tail: f64) -> f64 {
    value.norm() * tail.exp_m1()
}

/// `exp Σ_{n≤N} a_n zⁿ / n` from `a = [a_1, …, a_N]`.
pub fn zeta_series(a: &[f64], beta: f64, z: Complex64) -> ZetaValue {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut zn = Complex64::new(1.0, 0.0);
    for (j, &an) in a.iter().enumerate() {
        zn *= z;
        sum += an * zn / (j + 1) as f64;
    }
    let v = sum.exp();
    let tail = geometric_tail(a, beta, z.norm(), a.len());
    ZetaValue::finite(v, Some(error_from_log_tail(v, tail)))
}

/// `Π_τ Π_j (1 − α_{τ,j} e^{V(τ)} z^{λ(τ)})^{−1}` over the given records.
///
/// When `records` holds every prime orbit of period `≤ P`, the product
/// reproduces the series through `z^P`; `fix_sums` (the `a_n`, `n ≤ P`) are
/// used only for the error bound, which is twice the geometric series tail.
pub fn zeta_euler(z: Complex64, records: &[OrbitRecord], fix_sums: &[f64], beta: f64) -> ZetaValue {
    let mut log = Complex64::new(0.0, 0.0);
    let mut near_pole = false;
    for r in records {
        let zl = z.powu(r.period as u32);
        let w = r.v_tau.exp();
        for a in &r.alphas {
            let f = Complex64::new(1.0, 0.0) - a * w * zl;
            if f.norm() < POLE_TOL {
                near_pole = true;
            }
            log -= f.ln();
        }
    }
    if near_pole {
        return ZetaValue {
            re: f64::INFINITY,
            im: 0.0,
            error_bound: None,
            near_pole: true,
            det_re: 0.0,
            det_im: 0.0,
        };
    }
    let v = log.exp();
    let tail = 2.0 * geometric_tail(fix_sums, beta, z.norm(), fix_sums.len());
    ZetaValue::finite(v, Some(error_from_log_tail(v, tail)))
}

/// `1/det(I − zL)` by complex LU.
pub fn zeta_rational(z: Complex64, block: &BlockOperator) -> ZetaValue {
    let l = block.dense().map(|x| Complex64::new(x, 0.0));
    ZetaValue::from_det(complex_det(&identity_minus(&(l * z))))
}

fn identity_minus(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::identity(m.nrows(), m.ncols()) - m
}

/// `ζ_{−V}(s) = 1/det(I − L_{−sV})` where `V` is the block's potential.
pub fn zeta_minus_v(s: Complex64, block: &BlockOperator) -> ZetaValue {
    let l = block.dense_complex(|v| (-s * v).exp());
    ZetaValue::from_det(complex_det(&identity_minus(&l)))
}

/// `ζ′/ζ(s) = tr((I − L_{−sV})^{−1} ∂_s L_{−sV})`; `None` at a pole.
pub fn zeta_log_derivative(s: Complex64, block: &BlockOperator) -> Option<Complex64> {
    let l = block.dense_complex(|v| (-s * v).exp());
    let dl = block.dense_complex(|v| -v * (-s * v).exp());
    let a = identity_minus(&l);
    if complex_det(&a).norm() < POLE_TOL {
        return None;
    }
    complex_solve(&a, &dl).map(|x| x.trace())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinePoint {
    pub y: f64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

/// `det(I − L_{−(1+iy)V})` along the grid.
pub fn line_scan(block: &BlockOperator, y_grid: &[f64]) -> Vec<LinePoint> {
    y_grid
        .iter()
        .map(|&y| {
            let s = Complex64::new(1.0, y);
            let l = block.dense_complex(|v| (-s * v).exp());
            let d = complex_det(&identity_minus(&l));
            LinePoint {
                y,
                re: d.re,
                im: d.im,
                abs: d.norm(),
            }
        })
        .collect()
}

/// Smallest `|det|` over grid points with `|y| ≥ exclude`, with its location.
pub fn line_scan_min(points: &[LinePoint], exclude: f64) -> Option<(f64, f64)> {
    points
        .iter()
        .filter(|p| p.y.abs() >= exclude)
        .map(|p| (p.y, p.abs))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}
