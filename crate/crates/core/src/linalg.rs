//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    sym_eigen(a).0
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Applies `f` to the spectrum of a symmetric matrix.
pub fn sym_apply(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(a);
    let n = vals.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = f(vals[i]);
    }
    &vecs * d * vecs.transpose()
}

pub fn hs_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// All eigenvalues of a general real matrix (Hessenberg reduction + shifted QR),
/// ordered by modulus descending. Among eigenvalues whose moduli agree to
/// relative 1e-9 the one with the largest real part comes first, so a real
/// positive Perron root is reported ahead of complex companions of equal size.
pub fn eigenvalues_by_modulus(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.nrows() == 1 {
        return vec![Complex64::new(a[(0, 0)], 0.0)];
    }
    let mut v = raw_eigenvalues(a);
    sort_by_modulus(&mut v);
    v
}

/// Real Schur form with an iteration cap. The QR sweep stalls on nearly
/// scalar matrices at machine-epsilon deflation tolerance, so deflation uses
/// 1e-14; on failure the tolerance is relaxed further and the matrix shifted
/// by a multiple of the identity, which is removed afterwards.
fn raw_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    let scale = hs_norm(a).max(f64::MIN_POSITIVE);
    let tries = [(0.0, 1e-14), (0.318, 1e-14), (-0.577, 1e-14), (1.213, 1e-13), (-2.071, 1e-12)];
    for (shift, eps) in tries {
        let m = a + DMatrix::identity(a.nrows(), a.ncols()) * (shift * scale);
        if let Some(s) = Schur::try_new(m, eps, 500) {
            return s
                .complex_eigenvalues()
                .iter()
                .map(|c| Complex64::new(c.re - shift * scale, c.im))
                .collect();
        }
    }
    panic!("Schur iteration failed to converge for every shift")
}

pub fn sort_by_modulus(v: &mut [Complex64]) {
    let scale = v.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    v.sort_by(|a, b| {
        let (na, nb) = (a.norm(), b.norm());
        if (na - nb).abs() <= 1e-9 * scale {
            b.re.total_cmp(&a.re)
        } else {
            nb.total_cmp(&na)
        }
    });
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues_by_modulus(a).first().map(|c| c.norm()).unwrap_or(0.0)
}

/// Determinant of a complex matrix by LU factorization.
pub fn complex_det(a: &DMatrix<Complex64>) -> Complex64 {
    if a.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let m: DMatrix<nalgebra::Complex<f64>> = a.map(|z| nalgebra::Complex::new(z.re, z.im));
    let d = m.lu().determinant();
    Complex64::new(d.re, d.im)
}

/// Solves `a x = b` for complex square `a`; `None` when singular.
pub fn complex_solve(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let m: DMatrix<nalgebra::Complex<f64>> = a.map(|z| nalgebra::Complex::new(z.re, z.im));
    let rhs: DMatrix<nalgebra::Complex<f64>> = b.map(|z| nalgebra::Complex::new(z.re, z.im));
    m.lu()
        .solve(&rhs)
        .map(|x| x.map(|z| Complex64::new(z.re, z.im)))
}

/// Determinant of a square submatrix picked by `rows` and `cols`.
pub fn minor(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let q = rows.len();
    let sub = DMatrix::from_fn(q, q, |i, j| a[(rows[i], cols[j])]);
    sub.determinant()
}
