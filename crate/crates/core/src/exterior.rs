//! Exterior powers, induced pull-backs, push-forward operators on symmetric
//! matrices and the Hilbert projective metric on the positive-definite cone.
//!
//! A q-form on `R^d` is stored in the basis `e^I = e^{i_1} ∧ … ∧ e^{i_q}`
//! indexed by strictly increasing tuples `I` in lexicographic order. The
//! pull-back of a linear map `A` acts by `(A_* ω)(v_1, …, v_q) = ω(A v_1, …, A v_q)`,
//! so its matrix has entries `P[K][J] = det A[J, K]`, i.e. it is the transpose
//! of the q-th compound matrix of `A`. Composition is contravariant:
//! `pullback(A·B) = pullback(B) · pullback(A)`.
//!
//! Symmetric operators on `Λ^q` are represented in an orthonormal basis for
//! the Hilbert-Schmidt product `(A, B)_HS = tr(A B)`, so that every linear
//! map on `M^q` becomes an `m × m` matrix with `m = C (C + 1) / 2`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Lexicographically ordered q-subsets of `0..d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QFormBasis {
    d: usize,
    q: usize,
    subsets: Vec<Vec<usize>>,
}

impl QFormBasis {
    pub fn new(d: usize, q: usize) -> Result<Self> {
        if d == 0 || q == 0 || q > d {
            return Err(Error::Argument(format!(
                "form degree q = {q} must lie in 1..={d}"
            )));
        }
        let mut subsets = Vec::with_capacity(binomial(d, q));
        let mut current: Vec<usize> = (0..q).collect();
        loop {
            subsets.push(current.clone());
            // advance to the next combination in lexicographic order
            let mut i = q;
            while i > 0 && current[i - 1] == d - q + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            current[i - 1] += 1;
            for j in i..q {
                current[j] = current[j - 1] + 1;
            }
        }
        Ok(Self { d, q, subsets })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of basis forms, `binomial(d, q)`.
    pub fn dim(&self) -> usize {
        self.subsets.len()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }
}

/// A symmetric operator on `Λ^q(R^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOperator(DMatrix<f64>);

impl SymOperator {
    /// Validates squareness, finiteness and symmetry (relative 1e-12), then
    /// stores the exactly symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite entry in symmetric operator".into()));
        }
        let norm = linalg::hs_norm(&m);
        let asym = linalg::hs_norm(&(&m - m.transpose()));
        if asym > 1e-12 * norm.max(f64::MIN_POSITIVE) && asym > 0.0 {
            return Err(Error::Domain(format!(
                "matrix is not symmetric (defect {asym:e})"
            )));
        }
        Ok(Self(linalg::symmetrize(&m)))
    }

    /// Wraps a matrix that is symmetric by construction.
    pub(crate) fn from_symmetric(m: DMatrix<f64>) -> Self {
        Self(linalg::symmetrize(&m))
    }

    pub fn identity(c: usize) -> Self {
        Self(DMatrix::identity(c, c))
    }

    pub fn zeros(c: usize) -> Self {
        Self(DMatrix::zeros(c, c))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn hs_norm(&self) -> f64 {
        linalg::hs_norm(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &SymOperator) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymOperator) -> Self {
        Self(&self.0 - &other.0)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> DVector<f64> {
        linalg::sym_eigenvalues(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let e = self.eigenvalues();
        e[e.len() - 1]
    }

    /// Positive semi-definite up to `-tol * ‖A‖`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol * self.hs_norm().max(f64::MIN_POSITIVE)
    }

    /// Positive definite with smallest eigenvalue above `1e-12 * ‖A‖`.
    pub fn is_pd(&self) -> bool {
        let n = self.hs_norm();
        n > 0.0 && self.min_eigenvalue() > 1e-12 * n
    }

    pub fn inverse(&self) -> Result<SymOperator> {
        self.0
            .clone()
            .try_inverse()
            .map(Self::from_symmetric)
            .ok_or_else(|| Error::Domain("singular symmetric operator".into()))
    }
}

/// HS-orthonormal basis of the symmetric `C × C` matrices.
///
/// Diagonal elements are `e_i ⊗ e_i`; off-diagonal ones are
/// `(e_i ⊗ e_j + e_j ⊗ e_i) / √2`, ordered row by row over the upper triangle.
#[derive(Debug, Clone)]
pub struct SymBasis {
    dim_form: usize,
    pairs: Vec<(usize, usize)>,
}

pub fn sym_basis(c: usize) -> SymBasis {
    let mut pairs = Vec::with_capacity(c * (c + 1) / 2);
    for i in 0..c {
        for j in i..c {
            pairs.push((i, j));
        }
    }
    SymBasis { dim_form: c, pairs }
}

impl SymBasis {
    pub fn dim_form(&self) -> usize {
        self.dim_form
    }

    /// Number of basis elements `m`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn element(&self, k: usize) -> SymOperator {
        let (i, j) = self.pairs[k];
        let mut m = DMatrix::zeros(self.dim_form, self.dim_form);
        if i == j {
            m[(i, i)] = 1.0;
        } else {
            let v = std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        SymOperator(m)
    }

    pub fn elements(&self) -> Vec<SymOperator> {
        (0..self.len()).map(|k| self.element(k)).collect()
    }

    /// Coordinates `(E_k, A)_HS`.
    pub fn coords(&self, a: &SymOperator) -> DVector<f64> {
        self.coords_of(a.matrix())
    }

    pub(crate) fn coords_of(&self, a: &DMatrix<f64>) -> DVector<f64> {
        let s = std::f64::consts::SQRT_2;
        DVector::from_iterator(
            self.len(),
            self.pairs.iter().map(|&(i, j)| {
                if i == j {
                    a[(i, i)]
                } else {
                    0.5 * s * (a[(i, j)] + a[(j, i)])
                }
            }),
        )
    }

    pub fn from_coords(&self, v: &[f64]) -> SymOperator {
        let c = self.dim_form;
        let mut m = DMatrix::zeros(c, c);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                m[(i, j)] = v[k] * h;
                m[(j, i)] = v[k] * h;
            }
        }
        SymOperator(m)
    }

    /// Matrix of a linear map `M^q → M^q` in this basis.
    pub fn represent(&self, op: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> DMatrix<f64> {
        let m = self.len();
        let mut out = DMatrix::zeros(m, m);
        for l in 0..m {
            let image = op(self.element(l).matrix());
            out.set_column(l, &self.coords_of(&image));
        }
        out
    }
}

/// Matrix of the pull-back `ω ↦ ω(A·, …, A·)` on q-forms.
pub fn pullback_matrix(a: &DMatrix<f64>, q: usize) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("non-finite entry in linear map".into()));
    }
    let basis = QFormBasis::new(a.nrows(), q)?;
    let c = basis.dim();
    let s = basis.subsets();
    Ok(DMatrix::from_fn(c, c, |k, j| linalg::minor(a, &s[j], &s[k])))
}

fn check_dims(p: &DMatrix<f64>, a: &SymOperator) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::Dimension {
            expected: p.nrows(),
            got: p.ncols(),
        });
    }
    if p.nrows() != a.dim() {
        return Err(Error::Dimension {
            expected: p.nrows(),
            got: a.dim(),
        });
    }
    Ok(())
}

/// `Ψ(A) = ᵗP · A · P`.
pub fn push_forward(p: &DMatrix<f64>, a: &SymOperator) -> Result<SymOperator> {
    check_dims(p, a)?;
    Ok(SymOperator::from_symmetric(p.transpose() * a.matrix() * p))
}

/// The HS-adjoint `ᵗΨ(A) = P · A · ᵗP`.
pub fn push_forward_t(p: &DMatrix<f64>, a: &SymOperator) -> Result<SymOperator> {
    check_dims(p, a)?;
    Ok(SymOperator::from_symmetric(p * a.matrix() * p.transpose()))
}

pub fn hs_inner(a: &SymOperator, b: &SymOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.matrix().component_mul(b.matrix()).sum())
}

/// Extreme eigenvalues `(λ_min, λ_max)` of `A^{-1} B`, computed through the
/// congruence `L^{-1} B L^{-T}` with `A = L ᵗL`.
pub fn relative_spectrum(a: &SymOperator, b: &SymOperator) -> Result<(f64, f64)> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    for (name, x) in [("first", a), ("second", b)] {
        if !x.is_pd() {
            return Err(Error::Domain(format!(
                "{name} argument of the Hilbert metric is not positive definite"
            )));
        }
    }
    let chol = Cholesky::new(a.matrix().clone())
        .ok_or_else(|| Error::Domain("Cholesky factorization failed".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular Cholesky factor".into()))?;
    let c = &linv * b.matrix() * linv.transpose();
    let ev = linalg::sym_eigenvalues(&c);
    Ok((ev[0], ev[ev.len() - 1]))
}

/// Hilbert projective distance `log(λ_max / λ_min)` of `A^{-1} B`.
pub fn hilbert_metric(a: &SymOperator, b: &SymOperator) -> Result<f64> {
    let (lo, hi) = relative_spectrum(a, b)?;
    if lo <= 0.0 {
        return Err(Error::Domain("relative spectrum is not positive".into()));
    }
    Ok((hi / lo).ln().max(0.0))
}

/// Hilbert metric of the product cone of state-indexed PD matrices.
pub fn hilbert_metric_product(a: &[SymOperator], b: &[SymOperator]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let (l, h) = relative_spectrum(x, y)?;
        lo = lo.min(l);
        hi = hi.max(h);
    }
    if lo <= 0.0 {
        return Err(Error::Domain("relative spectrum is not positive".into()));
    }
    Ok((hi / lo).ln().max(0.0))
}

/// For fixed `q`, the pull-backs of a family of linear maps together with the
/// `m × m` matrices of `Ψ_i` and `ᵗΨ_i` in the orthonormal symmetric basis.
#[derive(Debug, Clone)]
pub struct PushForwardFamily {
    q: usize,
    forms: QFormBasis,
    basis: SymBasis,
    pullbacks: Vec<DMatrix<f64>>,
    psi_ops: Vec<DMatrix<f64>>,
    psi_t_ops: Vec<DMatrix<f64>>,
}

impl PushForwardFamily {
    pub fn new(linears: &[DMatrix<f64>], q: usize) -> Result<Self> {
        let d = linears
            .first()
            .ok_or_else(|| Error::Argument("empty family of maps".into()))?
            .nrows();
        let forms = QFormBasis::new(d, q)?;
        let basis = sym_basis(forms.dim());
        let mut pullbacks = Vec::with_capacity(linears.len());
        let mut psi_ops = Vec::with_capacity(linears.len());
        for a in linears {
            if a.nrows() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: a.nrows(),
                });
            }
            let p = pullback_matrix(a, q)?;
            psi_ops.push(basis.represent(|x| p.transpose() * x * &p));
            pullbacks.push(p);
        }
        let psi_t_ops = psi_ops.iter().map(|m| m.transpose()).collect();
        Ok(Self {
            q,
            forms,
            basis,
            pullbacks,
            psi_ops,
            psi_t_ops,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn t(&self) -> usize {
        self.pullbacks.len()
    }

    /// `C = binomial(d, q)`.
    pub fn dim_form(&self) -> usize {
        self.forms.dim()
    }

    /// `m = C (C + 1) / 2`.
    pub fn m(&self) -> usize {
        self.basis.len()
    }

    pub fn forms(&self) -> &QFormBasis {
        &self.forms
    }

    pub fn basis(&self) -> &SymBasis {
        &self.basis
    }

    pub fn pullback(&self, i: usize) -> &DMatrix<f64> {
        &self.pullbacks[i]
    }

    pub fn pullbacks(&self) -> &[DMatrix<f64>] {
        &self.pullbacks
    }

    pub fn psi(&self, i: usize) -> &DMatrix<f64> {
        &self.psi_ops[i]
    }

    pub fn psi_t(&self, i: usize) -> &DMatrix<f64> {
        &self.psi_t_ops[i]
    }

    pub fn psi_ops(&self) -> &[DMatrix<f64>] {
        &self.psi_ops
    }

    pub fn psi_t_ops(&self) -> &[DMatrix<f64>] {
        &self.psi_t_ops
    }

    pub fn apply_psi(&self, i: usize, a: &SymOperator) -> SymOperator {
        let p = &self.pullbacks[i];
        SymOperator::from_symmetric(p.transpose() * a.matrix() * p)
    }

    pub fn apply_psi_t(&self, i: usize, a: &SymOperator) -> SymOperator {
        let p = &self.pullbacks[i];
        SymOperator::from_symmetric(p * a.matrix() * p.transpose())
    }
}
