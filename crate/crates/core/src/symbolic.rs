//! Words over the full shift on `t` symbols, periodic points, prime-orbit
//! representatives and finite-memory potentials.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `t^n` for any enumeration of `Fix_n` or of prime orbits.
pub const DEFAULT_BUDGET: f64 = 5e7;

/// A finite word. Symbols are stored 0-based; `Display` and [`SymWord::parse`]
/// use the 1-based alphabet `1..=t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymWord(Vec<usize>);

impl SymWord {
    pub fn new(symbols: Vec<usize>, t: usize) -> Result<Self> {
        if let Some(&s) = symbols.iter().find(|&&s| s >= t) {
            return Err(Error::Argument(format!(
                "symbol {} outside alphabet 1..={t}",
                s + 1
            )));
        }
        Ok(Self(symbols))
    }

    pub fn from_symbols(symbols: Vec<usize>) -> Self {
        Self(symbols)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Parses a 1-based digit string such as `"132"`.
    pub fn parse(s: &str, t: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(s.len());
        for ch in s.chars() {
            let d = ch
                .to_digit(10)
                .filter(|&d| d >= 1 && (d as usize) <= t)
                .ok_or_else(|| {
                    Error::Argument(format!("invalid symbol '{ch}' in word \"{s}\" (alphabet 1..={t})"))
                })?;
            out.push(d as usize - 1);
        }
        Ok(Self(out))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cyclic rotation moving the first `j` symbols to the end.
    pub fn rotate(&self, j: usize) -> Self {
        let mut v = self.0.clone();
        if !v.is_empty() {
            let n = v.len();
            v.rotate_left(j % n);
        }
        Self(v)
    }

    pub fn repeat(&self, k: usize) -> Self {
        Self(self.0.repeat(k))
    }

    pub fn concat(&self, other: &SymWord) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    pub fn prepend(&self, i: usize) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(i);
        v.extend_from_slice(&self.0);
        Self(v)
    }

    /// Smallest period `p` with `w` equal to the `n/p`-fold power of its prefix.
    pub fn minimal_period(&self) -> usize {
        let n = self.0.len();
        (1..=n)
            .find(|&p| n % p == 0 && (p..n).all(|i| self.0[i] == self.0[i - p]))
            .unwrap_or(0)
    }
}

impl fmt::Display for SymWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&s| s < 9) {
            for &s in &self.0 {
                write!(f, "{}", s + 1)?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|s| (s + 1).to_string()).collect();
            write!(f, "{}", parts.join("-"))
        }
    }
}

/// A potential depending on the first `k` coordinates, stored as a table over
/// `t^k` windows indexed in base `t` with the first symbol most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    t: usize,
    k: usize,
    table: Vec<f64>,
    tag: String,
}

impl Potential {
    pub fn from_table(t: usize, k: usize, table: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        if t == 0 || k == 0 {
            return Err(Error::Argument("potential needs t >= 1 and memory k >= 1".into()));
        }
        let expected = t
            .checked_pow(k as u32)
            .ok_or_else(|| Error::Argument("potential table too large".into()))?;
        if table.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: table.len(),
            });
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite potential value".into()));
        }
        Ok(Self {
            t,
            k,
            table,
            tag: tag.into(),
        })
    }

    pub fn constant(t: usize, c: f64) -> Self {
        Self {
            t,
            k: 1,
            table: vec![c; t],
            tag: format!("constant({c})"),
        }
    }

    pub fn zero(t: usize) -> Self {
        Self::constant(t, 0.0)
    }

    pub fn from_fn(t: usize, k: usize, f: impl Fn(&[usize]) -> f64, tag: impl Into<String>) -> Result<Self> {
        let size = t
            .checked_pow(k as u32)
            .ok_or_else(|| Error::Argument("potential table too large".into()))?;
        let mut window = vec![0usize; k];
        let table = (0..size)
            .map(|idx| {
                decode_index(idx, t, &mut window);
                f(&window)
            })
            .collect();
        Self::from_table(t, k, table, tag)
    }

    /// Builds a table from 1-based string keys (`"132"` means the window 1,3,2).
    /// Every window must be present exactly once.
    pub fn from_entries<'a>(
        t: usize,
        k: usize,
        entries: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self> {
        let size = t
            .checked_pow(k as u32)
            .ok_or_else(|| Error::Argument("potential table too large".into()))?;
        let mut table = vec![f64::NAN; size];
        for (key, value) in entries {
            let w = SymWord::parse(key, t)
                .map_err(|_| Error::Argument(format!("malformed potential key \"{key}\"")))?;
            if w.len() != k {
                return Err(Error::Argument(format!(
                    "malformed potential key \"{key}\": expected {k} symbols"
                )));
            }
            let idx = encode_index(w.symbols(), t);
            if !table[idx].is_nan() {
                return Err(Error::Argument(format!("duplicate potential key \"{key}\"")));
            }
            table[idx] = value;
        }
        if let Some(missing) = table.iter().position(|v| v.is_nan()) {
            let mut window = vec![0usize; k];
            decode_index(missing, t, &mut window);
            return Err(Error::Argument(format!(
                "potential key \"{}\" missing",
                SymWord::from_symbols(window)
            )));
        }
        Self::from_table(t, k, table, "table")
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn memory(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    /// Value on a window of exactly `k` symbols.
    pub fn eval(&self, window: &[usize]) -> f64 {
        self.table[encode_index(&window[..self.k], self.t)]
    }

    pub fn eval_index(&self, idx: usize) -> f64 {
        self.table[idx]
    }

    pub fn min(&self) -> f64 {
        self.table.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.table.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64, tag: impl Into<String>) -> Self {
        Self {
            t: self.t,
            k: self.k,
            table: self.table.iter().map(|&v| f(v)).collect(),
            tag: tag.into(),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|v| v + c, format!("{}+{c}", self.tag))
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s, format!("{s}*{}", self.tag))
    }

    /// Same function viewed as a potential of larger memory.
    pub fn with_memory(&self, k: usize) -> Result<Self> {
        if k < self.k {
            return Err(Error::Argument(format!(
                "cannot lower memory from {} to {k}",
                self.k
            )));
        }
        Self::from_fn(self.t, k, |w| self.eval(&w[..self.k]), self.tag.clone())
    }

    /// Birkhoff sum over one period of the periodic point generated by `word`.
    pub fn birkhoff_sum(&self, word: &[usize]) -> f64 {
        birkhoff_sum(self, word)
    }
}

pub(crate) fn encode_index(window: &[usize], t: usize) -> usize {
    window.iter().fold(0usize, |acc, &s| acc * t + s)
}

pub(crate) fn decode_index(mut idx: usize, t: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % t;
        idx /= t;
    }
}

/// `V^n(x) = Σ_{j<n} V(σ^j x)` for the periodic point `x = (word)^∞`.
pub fn birkhoff_sum(v: &Potential, word: &[usize]) -> f64 {
    let n = word.len();
    let k = v.memory();
    let t = v.t();
    let mut total = 0.0;
    for j in 0..n {
        let mut idx = 0usize;
        for r in 0..k {
            idx = idx * t + word[(j + r) % n];
        }
        total += v.eval_index(idx);
    }
    total
}

pub fn check_budget(t: usize, n: usize, limit: f64) -> Result<()> {
    let requested = (t as f64).powi(n as i32);
    if requested > limit {
        return Err(Error::Budget { requested, limit });
    }
    Ok(())
}

/// Odometer over all `t^n` words in lexicographic order.
#[derive(Debug, Clone)]
pub struct FixPoints {
    t: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for FixPoints {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let mut w = out.clone();
        let mut i = w.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if w[i] + 1 < self.t {
                w[i] += 1;
                self.current = Some(w);
                break;
            }
            w[i] = 0;
        }
        Some(out)
    }
}

/// The points of `Fix_n`, each given by one period.
pub fn fix_points(t: usize, n: usize, budget: f64) -> Result<FixPoints> {
    if n == 0 || t == 0 {
        return Err(Error::Argument("fix_points needs n >= 1 and t >= 1".into()));
    }
    check_budget(t, n, budget)?;
    Ok(FixPoints {
        t,
        current: Some(vec![0; n]),
    })
}

/// Duval's successor: the next Lyndon word of length at most `n` in
/// lexicographic order, or `false` when `w` was the last one.
pub(crate) fn next_lyndon(w: &mut Vec<usize>, t: usize, n: usize) -> bool {
    let m = w.len();
    for i in m..n {
        let s = w[i - m];
        w.push(s);
    }
    while let Some(&last) = w.last() {
        if last == t - 1 {
            w.pop();
        } else {
            break;
        }
    }
    match w.last_mut() {
        Some(last) => {
            *last += 1;
            true
        }
        None => false,
    }
}

fn lyndon_with_leading(t: usize, n: usize, lead: usize) -> Vec<SymWord> {
    let mut out = Vec::new();
    let mut w = vec![lead];
    loop {
        if w[0] != lead {
            break;
        }
        if w.len() == n {
            out.push(SymWord(w.clone()));
        }
        if !next_lyndon(&mut w, t, n) {
            break;
        }
    }
    out
}

/// Lyndon words of length exactly `n` (one per prime orbit of minimal period
/// `n`), in lexicographic order.
pub fn lyndon_words(t: usize, n: usize, budget: f64) -> Result<Vec<SymWord>> {
    Ok(lyndon_words_partitioned(t, n, budget)?
        .into_iter()
        .flatten()
        .collect())
}

/// As [`lyndon_words`], enumerated in parallel with one block per leading
/// symbol; the blocks concatenate to the serial order.
pub fn lyndon_words_partitioned(t: usize, n: usize, budget: f64) -> Result<Vec<Vec<SymWord>>> {
    if n == 0 || t == 0 {
        return Err(Error::Argument("lyndon_words needs n >= 1 and t >= 1".into()));
    }
    check_budget(t, n, budget)?;
    Ok((0..t)
        .into_par_iter()
        .map(|lead| lyndon_with_leading(t, n, lead))
        .collect())
}

/// Number of Lyndon words of length `n` over `t` letters (Möbius formula).
pub fn lyndon_count(t: usize, n: usize) -> u64 {
    let mut total: i128 = 0;
    for d in 1..=n {
        if n % d == 0 {
            total += mobius(n / d) as i128 * (t as i128).pow(d as u32);
        }
    }
    (total / n as i128) as u64
}

pub fn mobius(mut n: usize) -> i32 {
    let mut sign = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

pub fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Hölder data of a potential family for the metric `d(x, y) = γ^{n(x,y)}`,
/// `n(x, y)` the first index where `x` and `y` differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderMeta {
    pub constant: f64,
    pub alpha: f64,
    /// Memory beyond which truncation is exact, if any.
    pub exact_memory: Option<usize>,
}

/// A potential on infinite words that can be evaluated on a finite prefix
/// followed by the constant tail of symbol 1.
pub trait HolderFamily: Send + Sync {
    fn t(&self) -> usize;
    fn eval_with_tail(&self, prefix: &[usize]) -> f64;
    fn holder(&self, gamma: f64) -> Option<HolderMeta>;
    fn tag(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct ConstantFamily {
    pub t: usize,
    pub value: f64,
}

impl HolderFamily for ConstantFamily {
    fn t(&self) -> usize {
        self.t
    }
    fn eval_with_tail(&self, _prefix: &[usize]) -> f64 {
        self.value
    }
    fn holder(&self, _gamma: f64) -> Option<HolderMeta> {
        Some(HolderMeta {
            constant: 0.0,
            alpha: 1.0,
            exact_memory: Some(1),
        })
    }
    fn tag(&self) -> String {
        format!("constant({})", self.value)
    }
}

/// `V(x) = w[x_0]`.
#[derive(Debug, Clone)]
pub struct FirstSymbolFamily {
    pub weights: Vec<f64>,
}

impl HolderFamily for FirstSymbolFamily {
    fn t(&self) -> usize {
        self.weights.len()
    }
    fn eval_with_tail(&self, prefix: &[usize]) -> f64 {
        self.weights[prefix.first().copied().unwrap_or(0)]
    }
    fn holder(&self, _gamma: f64) -> Option<HolderMeta> {
        let spread = self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - self.weights.iter().copied().fold(f64::INFINITY, f64::min);
        Some(HolderMeta {
            constant: spread,
            alpha: 1.0,
            exact_memory: Some(1),
        })
    }
    fn tag(&self) -> String {
        format!("first_symbol({:?})", self.weights)
    }
}

/// `V(x) = Σ_j λ^j w[x_j]` with `0 < λ < 1`.
#[derive(Debug, Clone)]
pub struct GeometricFamily {
    pub weights: Vec<f64>,
    pub lambda: f64,
}

impl GeometricFamily {
    pub fn new(weights: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Argument(format!("lambda = {lambda} must lie in (0, 1)")));
        }
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Argument("geometric family needs finite weights".into()));
        }
        Ok(Self { weights, lambda })
    }
}

impl HolderFamily for GeometricFamily {
    fn t(&self) -> usize {
        self.weights.len()
    }
    fn eval_with_tail(&self, prefix: &[usize]) -> f64 {
        let mut acc = 0.0;
        let mut p = 1.0;
        for &s in prefix {
            acc += p * self.weights[s];
            p *= self.lambda;
        }
        acc + self.weights[0] * p / (1.0 - self.lambda)
    }
    fn holder(&self, gamma: f64) -> Option<HolderMeta> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return None;
        }
        let wmax = self.weights.iter().map(|w| w.abs()).fold(0.0, f64::max);
        Some(HolderMeta {
            constant: 2.0 * wmax / (1.0 - self.lambda),
            alpha: (self.lambda.ln() / gamma.ln()).min(1.0),
            exact_memory: None,
        })
    }
    fn tag(&self) -> String {
        format!("geometric({:?}, {})", self.weights, self.lambda)
    }
}

/// Family without Hölder metadata; truncation refuses it.
#[derive(Debug, Clone)]
pub struct OpaqueFamily<F> {
    pub t: usize,
    pub f: F,
}

impl<F: Fn(&[usize]) -> f64 + Send + Sync> HolderFamily for OpaqueFamily<F> {
    fn t(&self) -> usize {
        self.t
    }
    fn eval_with_tail(&self, prefix: &[usize]) -> f64 {
        (self.f)(prefix)
    }
    fn holder(&self, _gamma: f64) -> Option<HolderMeta> {
        None
    }
    fn tag(&self) -> String {
        "opaque".into()
    }
}

/// Memory-`k` truncation (prefix followed by the all-1 tail) with its
/// sup-norm error bound `H γ^{αk}`.
pub fn truncate_to_memory(family: &dyn HolderFamily, k: usize, gamma: f64) -> Result<(Potential, f64)> {
    if k == 0 {
        return Err(Error::Argument("truncation memory must be >= 1".into()));
    }
    let meta = family
        .holder(gamma)
        .ok_or_else(|| Error::Argument(format!("family {} has no Hölder metadata", family.tag())))?;
    let t = family.t();
    let pot = Potential::from_fn(t, k, |w| family.eval_with_tail(w), format!("{}|k={k}", family.tag()))?;
    let bound = match meta.exact_memory {
        Some(e) if k >= e => 0.0,
        _ => meta.constant * gamma.powf(meta.alpha * k as f64),
    };
    Ok((pot, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn canonical_rotation(w: &[usize]) -> Vec<usize> {
        (0..w.len())
            .map(|j| {
                let mut v = w.to_vec();
                v.rotate_left(j);
                v
            })
            .min()
            .unwrap()
    }

    #[test]
    fn fix_points_counts_and_order() {
        assert_eq!(fix_points(3, 2, DEFAULT_BUDGET).unwrap().count(), 9);
        let one: Vec<_> = fix_points(2, 1, DEFAULT_BUDGET).unwrap().collect();
        assert_eq!(one, vec![vec![0], vec![1]]);
        let all: Vec<_> = fix_points(3, 4, DEFAULT_BUDGET).unwrap().collect();
        assert_eq!(all.len(), 81);
        assert_eq!(SymWord::from_symbols(all[0].clone()).to_string(), "1111");
        assert!(all.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(fix_points(3, 40, DEFAULT_BUDGET), Err(Error::Budget { .. })));
        assert!(matches!(lyndon_words(3, 40, DEFAULT_BUDGET), Err(Error::Budget { .. })));
    }

    #[test]
    fn lyndon_small_cases_match_brute_force() {
        for (t, n) in [(3, 1), (3, 2), (3, 3), (2, 3), (2, 6), (3, 6), (4, 4)] {
            let brute: BTreeSet<Vec<usize>> = fix_points(t, n, DEFAULT_BUDGET)
                .unwrap()
                .filter(|w| SymWord::from_symbols(w.clone()).minimal_period() == n)
                .map(|w| canonical_rotation(&w))
                .collect();
            let got: Vec<Vec<usize>> = lyndon_words(t, n, DEFAULT_BUDGET)
                .unwrap()
                .into_iter()
                .map(|w| w.symbols().to_vec())
                .collect();
            assert_eq!(got, brute.into_iter().collect::<Vec<_>>(), "t={t} n={n}");
        }
        assert_eq!(lyndon_words(3, 1, DEFAULT_BUDGET).unwrap().len(), 3);
        assert_eq!(lyndon_words(3, 2, DEFAULT_BUDGET).unwrap().len(), 3);
        assert_eq!(lyndon_words(3, 3, DEFAULT_BUDGET).unwrap().len(), 8);
        let l: Vec<String> = lyndon_words(2, 3, DEFAULT_BUDGET)
            .unwrap()
            .iter()
            .map(|w| w.to_string())
            .collect();
        assert_eq!(l, vec!["112", "122"]);
    }

    #[test]
    fn necklace_identity() {
        for t in 2..=3 {
            for n in 1..=12 {
                let total: u64 = divisors(n)
                    .into_iter()
                    .map(|d| d as u64 * lyndon_words(t, d, DEFAULT_BUDGET).unwrap().len() as u64)
                    .sum();
                assert_eq!(total, (t as u64).pow(n as u32));
                assert_eq!(lyndon_words(t, n, DEFAULT_BUDGET).unwrap().len() as u64, lyndon_count(t, n));
            }
        }
    }

    #[test]
    fn partitioned_concatenates_to_serial() {
        let parts = lyndon_words_partitioned(3, 7, DEFAULT_BUDGET).unwrap();
        assert_eq!(parts.len(), 3);
        let flat: Vec<SymWord> = parts.into_iter().flatten().collect();
        let mut sorted = flat.clone();
        sorted.sort();
        assert_eq!(flat, sorted);
    }

    #[test]
    fn birkhoff_examples() {
        let c = Potential::constant(3, 0.7);
        assert!((birkhoff_sum(&c, &[0, 2, 1, 1]) - 2.8).abs() < 1e-15);
        let v = Potential::from_fn(2, 2, |w| if w[0] == w[1] { 1.0 } else { 0.0 }, "eq").unwrap();
        assert_eq!(birkhoff_sum(&v, &[0, 1]), 0.0);
        assert_eq!(birkhoff_sum(&v, &[0, 0]), 2.0);
    }

    #[test]
    fn entries_parsing() {
        let v = Potential::from_entries(2, 2, [("11", 1.0), ("12", 2.0), ("21", 3.0), ("22", 4.0)]).unwrap();
        assert_eq!(v.eval(&[1, 0]), 3.0);
        let err = Potential::from_entries(2, 2, [("11", 1.0), ("13", 2.0)]).unwrap_err();
        assert!(err.to_string().contains("\"13\""));
        let err = Potential::from_entries(2, 2, [("11", 1.0), ("12", 2.0), ("21", 3.0)]).unwrap_err();
        assert!(err.to_string().contains("\"22\""));
    }

    #[test]
    fn word_parse_display() {
        let w = SymWord::parse("132", 3).unwrap();
        assert_eq!(w.symbols(), &[0, 2, 1]);
        assert_eq!(w.to_string(), "132");
        assert!(SymWord::parse("14", 3).is_err());
        assert_eq!(SymWord::parse("1212", 2).unwrap().minimal_period(), 2);
    }

    #[test]
    fn truncation_examples() {
        let (p, b) = truncate_to_memory(&ConstantFamily { t: 3, value: 2.5 }, 3, 0.5).unwrap();
        assert!(p.table().iter().all(|&v| v == 2.5));
        assert_eq!(b, 0.0);
        let fam = FirstSymbolFamily { weights: vec![0.1, -0.2, 0.4] };
        for k in 1..4 {
            let (p, b) = truncate_to_memory(&fam, k, 0.5).unwrap();
            assert_eq!(b, 0.0);
            assert_eq!(p.eval(&vec![1; k]), -0.2);
        }
        let opaque = OpaqueFamily { t: 2, f: |_: &[usize]| 1.0 };
        assert!(truncate_to_memory(&opaque, 2, 0.5).is_err());
    }

    #[test]
    fn geometric_truncation_error_is_within_bound() {
        let fam = GeometricFamily::new(vec![0.3, -0.5, 1.0], 0.6).unwrap();
        let gamma = 0.5;
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let (p, bound) = truncate_to_memory(&fam, k, gamma).unwrap();
            assert!(bound < prev);
            prev = bound;
            // compare against long prefixes with other tails
            for w in fix_points(3, k + 4, DEFAULT_BUDGET).unwrap() {
                let exact = fam.eval_with_tail(&w);
                assert!((p.eval(&w[..k]) - exact).abs() <= bound + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn birkhoff_rotation_invariant(w in proptest::collection::vec(0usize..3, 1..12), j in 0usize..12, seed in proptest::collection::vec(-1.0f64..1.0, 27)) {
            let v = Potential::from_table(3, 3, seed, "rand").unwrap();
            let word = SymWord::from_symbols(w);
            let a = birkhoff_sum(&v, word.symbols());
            let b = birkhoff_sum(&v, word.rotate(j).symbols());
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
