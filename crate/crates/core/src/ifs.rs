//! Affine iterated function systems, presets and the coding map.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{binomial, pullback_matrix, PushForwardFamily};
use crate::symbolic::SymWord;

/// `x ↦ linear · x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let d = linear.nrows();
        if d == 0 || linear.ncols() != d {
            return Err(Error::Argument("linear part must be a non-empty square matrix".into()));
        }
        if offset.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: offset.len(),
            });
        }
        if linear.iter().chain(offset.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Argument("non-finite entry in affine map".into()));
        }
        let norm = operator_norm(&linear);
        if norm >= 1.0 {
            return Err(Error::Argument(format!(
                "map is not a contraction (operator norm {norm})"
            )));
        }
        if linear.determinant().abs() <= 1e-12 {
            return Err(Error::Argument("linear part is not invertible".into()));
        }
        Ok(Self { linear, offset })
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.offset
    }

    pub fn lipschitz(&self) -> f64 {
        operator_norm(&self.linear)
    }

    /// `(I − T)^{-1} b`.
    pub fn fixed_point(&self) -> DVector<f64> {
        let d = self.dim();
        let a = DMatrix::identity(d, d) - &self.linear;
        a.lu()
            .solve(&self.offset)
            .expect("I - T is invertible for a contraction")
    }
}

/// Largest singular value.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Whether the geometric hypotheses of the construction were checked
/// analytically for this family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    PaperVerified,
    Unverified,
}

#[derive(Debug, Clone)]
pub struct IfsSpec {
    name: String,
    maps: Vec<AffineMap>,
    d: usize,
    eta: f64,
    verification: Verification,
}

impl IfsSpec {
    pub fn new(name: impl Into<String>, maps: Vec<AffineMap>, verification: Verification) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::Argument(format!(
                "an IFS needs at least two maps, got {}",
                maps.len()
            )));
        }
        let d = maps[0].dim();
        if let Some(m) = maps.iter().find(|m| m.dim() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: m.dim(),
            });
        }
        let eta = maps.iter().map(AffineMap::lipschitz).fold(0.0, f64::max);
        Ok(Self {
            name: name.into(),
            maps,
            d,
            eta,
            verification,
        })
    }

    /// User-supplied family from row-major linear parts and offsets.
    pub fn from_parts(linears: &[Vec<f64>], offsets: &[Vec<f64>]) -> Result<Self> {
        if linears.len() != offsets.len() {
            return Err(Error::Dimension {
                expected: linears.len(),
                got: offsets.len(),
            });
        }
        let mut maps = Vec::with_capacity(linears.len());
        for (lin, off) in linears.iter().zip(offsets) {
            let d = off.len();
            if lin.len() != d * d {
                return Err(Error::Dimension {
                    expected: d * d,
                    got: lin.len(),
                });
            }
            maps.push(AffineMap::new(
                DMatrix::from_row_slice(d, d, lin),
                DVector::from_column_slice(off),
            )?);
        }
        Self::new("custom", maps, Verification::Unverified)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t(&self) -> usize {
        self.maps.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn verification(&self) -> Verification {
        self.verification
    }

    pub fn linears(&self) -> Vec<DMatrix<f64>> {
        self.maps.iter().map(|m| m.linear.clone()).collect()
    }

    pub fn fixed_points(&self) -> Vec<DVector<f64>> {
        self.maps.iter().map(AffineMap::fixed_point).collect()
    }

    pub fn push_forward_family(&self, q: usize) -> Result<PushForwardFamily> {
        PushForwardFamily::new(&self.linears(), q)
    }

    /// Upper bound on the diameter of the attractor.
    ///
    /// Two rigorous bounds are combined. The attractor lies in the ball of
    /// radius `max_i |ψ_i(c) − c| / (1 − η)` around any point `c`. It is also
    /// within `η^n · diam` of the images of the fixed points under all words
    /// of length `n`, so `diam ≤ diam(points) / (1 − 2η^n)` when `2η^n < 1`.
    pub fn diameter_bound(&self) -> f64 {
        let fps = self.fixed_points();
        let centre = fps.iter().fold(DVector::zeros(self.d), |acc, p| acc + p) / fps.len() as f64;
        let r = self
            .maps
            .iter()
            .map(|m| (m.apply(&centre) - &centre).norm())
            .fold(0.0, f64::max)
            / (1.0 - self.eta);
        let ball = 2.0 * r;

        let t = self.t();
        let mut depth = 0usize;
        while (t as f64).powi(depth as i32 + 1) * fps.len() as f64 <= 4096.0 {
            depth += 1;
        }
        let mut points = fps.clone();
        for _ in 0..depth {
            points = self
                .maps
                .iter()
                .flat_map(|m| points.iter().map(move |p| m.apply(p)))
                .collect();
        }
        let mut diam: f64 = 0.0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                diam = diam.max((&points[i] - &points[j]).norm());
            }
        }
        let slack = 2.0 * self.eta.powi(depth as i32);
        if slack < 1.0 {
            ball.min(diam / (1.0 - slack))
        } else {
            ball
        }
    }
}

/// Point of the cylinder `[w]` together with a bound on its distance to any
/// other point of the cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedPoint {
    pub point: DVector<f64>,
    pub bound: f64,
}

/// `ψ_{w_0} ∘ … ∘ ψ_{w_{l}}(anchor)` with the bound `η^{|w|} · diam_bound`.
///
/// The bound assumes the anchor lies on the attractor (e.g. a fixed point);
/// `diam_bound` defaults to [`IfsSpec::diameter_bound`].
pub fn code_point(ifs: &IfsSpec, word: &SymWord, anchor: &DVector<f64>, diam_bound: Option<f64>) -> Result<CodedPoint> {
    if anchor.len() != ifs.d() {
        return Err(Error::Dimension {
            expected: ifs.d(),
            got: anchor.len(),
        });
    }
    if let Some(&s) = word.symbols().iter().find(|&&s| s >= ifs.t()) {
        return Err(Error::Argument(format!("symbol {} outside alphabet", s + 1)));
    }
    let diam = diam_bound.unwrap_or_else(|| ifs.diameter_bound());
    let mut x = anchor.clone();
    for &s in word.symbols().iter().rev() {
        x = ifs.maps[s].apply(&x);
    }
    Ok(CodedPoint {
        point: x,
        bound: ifs.eta.powi(word.len() as i32) * diam,
    })
}

/// Monte-Carlo estimate of the nondegeneracy constant with its worst pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NdEstimate {
    pub gamma: f64,
    pub witness_c: Vec<f64>,
    pub witness_e: Vec<f64>,
}

/// `min` over sampled unit pairs `(c, e)` of `max_i |(P_i c, e)|`.
pub fn check_nd(ifs: &IfsSpec, q: usize, n_samples: usize, seed: u64) -> Result<NdEstimate> {
    check_nd_linears(&ifs.linears(), q, n_samples, seed)
}

pub fn check_nd_linears(linears: &[DMatrix<f64>], q: usize, n_samples: usize, seed: u64) -> Result<NdEstimate> {
    let d = linears
        .first()
        .ok_or_else(|| Error::Argument("empty family".into()))?
        .nrows();
    let c_dim = binomial(d, q);
    if q == 0 || q > d {
        return Err(Error::Argument(format!("form degree q = {q} must lie in 1..={d}")));
    }
    if linears.len() < c_dim {
        return Err(Error::Argument(format!(
            "nondegeneracy needs t >= binomial(d, q) = {c_dim}, got t = {}",
            linears.len()
        )));
    }
    if n_samples == 0 {
        return Err(Error::Argument("n_samples must be positive".into()));
    }
    let pulls: Vec<DMatrix<f64>> = linears
        .iter()
        .map(|a| pullback_matrix(a, q))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let v = DVector::from_fn(c_dim, |_, _| StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-12 {
            break v / n;
        }
    };
    let mut best = NdEstimate {
        gamma: f64::INFINITY,
        witness_c: vec![],
        witness_e: vec![],
    };
    for _ in 0..n_samples {
        let c = unit(&mut rng);
        let e = unit(&mut rng);
        let val = pulls
            .iter()
            .map(|p| (p * &c).dot(&e).abs())
            .fold(0.0, f64::max);
        if val < best.gamma {
            best = NdEstimate {
                gamma: val,
                witness_c: c.as_slice().to_vec(),
                witness_e: e.as_slice().to_vec(),
            };
        }
    }
    if best.gamma <= 1e-8 {
        return Err(Error::Nondegeneracy {
            gamma: best.gamma,
            witness_c: best.witness_c,
            witness_e: best.witness_e,
        });
    }
    Ok(best)
}

fn map2(a: [f64; 4], b: [f64; 2]) -> AffineMap {
    AffineMap::new(DMatrix::from_row_slice(2, 2, &a), DVector::from_column_slice(&b))
        .expect("preset maps are contractions")
}

/// Affine map with linear part `t` fixing the point `p`.
fn fixing(t: [f64; 4], p: [f64; 2]) -> AffineMap {
    let off = [
        p[0] - (t[0] * p[0] + t[1] * p[1]),
        p[1] - (t[2] * p[0] + t[3] * p[1]),
    ];
    map2(t, off)
}

fn gasket_linears(scale: f64) -> [[f64; 4]; 3] {
    let r = 3f64.sqrt() / 10.0;
    [
        [0.6 * scale, 0.0, 0.0, 0.2 * scale],
        [0.3 * scale, r * scale, r * scale, 0.5 * scale],
        [0.3 * scale, -r * scale, -r * scale, 0.5 * scale],
    ]
}

fn gasket_vertices() -> [[f64; 2]; 3] {
    let s = 1.0 / 3f64.sqrt();
    [[0.0, 0.0], [1.0, s], [1.0, -s]]
}

/// The harmonic Sierpinski gasket with vertices `A = 0`, `B = (1, 1/√3)`,
/// `C = (1, −1/√3)`.
pub fn harmonic_gasket() -> IfsSpec {
    let t = gasket_linears(1.0);
    let v = gasket_vertices();
    let maps = (0..3).map(|i| fixing(t[i], v[i])).collect();
    IfsSpec::new("harmonic_gasket", maps, Verification::PaperVerified).expect("valid preset")
}

/// The gasket maps with linear parts multiplied by `s`, fixing the same
/// vertices. Used as a family with `β = 0.6 s² > 1` for `s` close to `1/0.6`.
pub fn scaled_gasket(s: f64) -> Result<IfsSpec> {
    if !(s > 0.0 && s * 0.6 < 1.0) {
        return Err(Error::Argument(format!("scale {s} must lie in (0, 5/3)")));
    }
    let t = gasket_linears(s);
    let v = gasket_vertices();
    let maps = (0..3).map(|i| fixing(t[i], v[i])).collect();
    IfsSpec::new(format!("scaled_gasket({s})"), maps, Verification::Unverified)
}

/// `t` maps `ρ R(2πk/t)` with offsets at the vertices of the regular `t`-gon
/// inscribed in the unit circle (the unit triangle for `t = 3`).
pub fn rotation_family(rho: f64, t: usize) -> Result<IfsSpec> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Argument(format!("rho = {rho} must lie in (0, 1)")));
    }
    if t < 2 {
        return Err(Error::Argument("rotation family needs t >= 2".into()));
    }
    let maps = (0..t)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / t as f64;
            let (s, c) = th.sin_cos();
            map2([rho * c, -rho * s, rho * s, rho * c], [c, s])
        })
        .collect();
    IfsSpec::new(format!("rotation_family({rho},{t})"), maps, Verification::Unverified)
}

/// `x ↦ x/2`, `x ↦ x/2 + 1/2` on the line.
pub fn dyadic() -> IfsSpec {
    let half = |b: f64| {
        AffineMap::new(DMatrix::from_element(1, 1, 0.5), DVector::from_element(1, b)).expect("contraction")
    };
    IfsSpec::new("dyadic", vec![half(0.0), half(0.5)], Verification::PaperVerified).expect("valid preset")
}

/// Resolves a preset by name; `param` is the scale for the parametric ones.
pub fn preset(name: &str, param: Option<f64>) -> Result<IfsSpec> {
    match name {
        "harmonic_gasket" | "gasket" => Ok(harmonic_gasket()),
        "dyadic" => Ok(dyadic()),
        "rotation_family" | "rotation" => rotation_family(param.unwrap_or(0.9), 3),
        "scaled_gasket" => scaled_gasket(param.unwrap_or(1.5)),
        other => Err(Error::Argument(format!("unknown preset \"{other}\""))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gasket_shape_and_determinants() {
        let g = harmonic_gasket();
        assert_eq!((g.t(), g.d()), (3, 2));
        for m in g.maps() {
            assert!((m.linear().determinant() - 3.0 / 25.0).abs() < 1e-15);
        }
        assert!(g.fixed_points()[0].norm() < 1e-15);
        assert_eq!(g.verification(), Verification::PaperVerified);
    }

    #[test]
    fn fixed_points_are_fixed() {
        for ifs in [harmonic_gasket(), rotation_family(0.9, 3).unwrap(), dyadic(), scaled_gasket(1.5).unwrap()] {
            for m in ifs.maps() {
                let p = m.fixed_point();
                assert!((m.apply(&p) - &p).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gasket_vertex_combinatorics() {
        // ψ_1(ABC) = Abc, ψ_2(ABC) = Bca, ψ_3(ABC) = Cba: the images share
        // exactly one vertex pairwise and each keeps its own fixed vertex
        let g = harmonic_gasket();
        let v: Vec<DVector<f64>> = gasket_vertices().iter().map(|p| DVector::from_column_slice(p)).collect();
        let images: Vec<Vec<DVector<f64>>> = g
            .maps()
            .iter()
            .map(|m| v.iter().map(|p| m.apply(p)).collect())
            .collect();
        for i in 0..3 {
            assert!((&images[i][i] - &v[i]).norm() < 1e-12);
            for j in i + 1..3 {
                let shared = images[i]
                    .iter()
                    .filter(|p| images[j].iter().any(|r| (*p - r).norm() < 1e-12))
                    .count();
                assert_eq!(shared, 1, "maps {i} and {j}");
            }
        }
    }

    #[test]
    fn rotation_family_eta() {
        let r = rotation_family(0.9, 3).unwrap();
        assert!((r.eta() - 0.9).abs() < 1e-12);
        assert!(rotation_family(1.2, 3).is_err());
        assert!(rotation_family(0.0, 3).is_err());
    }

    #[test]
    fn nd_examples() {
        let g = harmonic_gasket();
        assert!(check_nd(&g, 1, 2000, 7).unwrap().gamma > 0.0);
        assert!(check_nd(&rotation_family(0.9, 3).unwrap(), 1, 2000, 7).unwrap().gamma > 0.0);
        let single = vec![DMatrix::identity(2, 2) * 0.5];
        assert!(matches!(check_nd_linears(&single, 1, 10, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn nd_is_deterministic_and_monotone() {
        let g = harmonic_gasket();
        let a = check_nd(&g, 1, 500, 11).unwrap();
        let b = check_nd(&g, 1, 500, 11).unwrap();
        assert_eq!(a, b);
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 5000] {
            let e = check_nd(&g, 1, n, 11).unwrap().gamma;
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn code_point_converges_to_fixed_points() {
        let g = harmonic_gasket();
        let anchor = g.fixed_points()[0].clone();
        for i in 0..3 {
            let w = SymWord::from_symbols(vec![i; 30]);
            let cp = code_point(&g, &w, &anchor, None).unwrap();
            assert!((cp.point - g.maps()[i].fixed_point()).norm() < 1e-3);
        }
        let e = code_point(&g, &SymWord::empty(), &anchor, Some(2.0)).unwrap();
        assert_eq!(e.point, anchor);
        assert_eq!(e.bound, 2.0);
        let mut prev = f64::INFINITY;
        for l in 0..10 {
            let b = code_point(&g, &SymWord::from_symbols(vec![1; l]), &anchor, None).unwrap().bound;
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn diameter_bound_covers_vertices() {
        let g = harmonic_gasket();
        let d = g.diameter_bound();
        assert!(d >= 2.0 / 3f64.sqrt() - 1e-12, "{d}");
        assert!(d < 3.0);
        assert!(dyadic().diameter_bound() >= 1.0 - 1e-12);
    }
}
