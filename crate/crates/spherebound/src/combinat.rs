//! Multi-index enumeration/ranking and exact combinatorial coefficients.
//!
//! Everything downstream (form canonicalization, Gram assembly, pencil
//! indexing) is built on the fixed basis order defined here: multi-indices of
//! a given length are ordered graded reverse-lexicographically, with
//! `(d, 0, ..., 0)` first and `(0, ..., 0, d)` last. Coefficients come in two
//! flavors: exact (`BigRational`, for identity checks and the rational
//! assembly mode) and log-space (`f64`, for matrix entries whose constituent
//! binomials overflow any fixed-width type long before the entries do).

use std::cmp::Ordering;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::Error;

/// Exponent vector of a monomial, with its total degree cached.
///
/// The `Ord` impl realizes the canonical basis order (graded reverse-lex,
/// `(d,0,...,0)` ranked first), so sorted containers keyed by `MultiIndex`
/// iterate in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exps: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(exps: Vec<u32>) -> Self {
        let degree = exps.iter().sum();
        MultiIndex { exps, degree }
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex { exps: vec![0; n], degree: 0 }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        let exps = self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect();
        MultiIndex { exps, degree: self.degree + other.degree }
    }

    /// Componentwise difference, `None` if any component would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.len() != other.len() {
            return None;
        }
        let mut exps = Vec::with_capacity(self.len());
        for (a, b) in self.exps.iter().zip(&other.exps) {
            exps.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex::new(exps))
    }

    /// True if every exponent is even.
    pub fn is_even(&self) -> bool {
        self.exps.iter().all(|e| e % 2 == 0)
    }

    /// Halve every exponent (caller checks `is_even`).
    pub fn half(&self) -> MultiIndex {
        MultiIndex::new(self.exps.iter().map(|e| e / 2).collect())
    }

    /// Extend with one extra variable carrying exponent `e`.
    pub fn append(&self, e: u32) -> MultiIndex {
        let mut exps = self.exps.clone();
        exps.push(e);
        MultiIndex { exps, degree: self.degree + e }
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(self.len(), other.len());
        match self.degree.cmp(&other.degree) {
            Ordering::Equal => {}
            ord => return ord,
        }
        // Same degree: compare at the last differing coordinate; the smaller
        // exponent there ranks earlier (grevlex-descending enumeration).
        for (a, b) in self.exps.iter().zip(&other.exps).rev() {
            match a.cmp(b) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.exps.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Number of multi-indices of length `n` and degree `d`: C(n+d-1, d).
pub fn basis_dim(n: usize, d: u32) -> usize {
    binomial_u128(n as u64 + d as u64 - 1, d as u64) as usize
}

/// All multi-indices of length `n` and degree `d`, in canonical order.
pub fn enumerate_basis(n: usize, d: u32) -> Vec<MultiIndex> {
    assert!(n >= 1, "variable count must be positive");
    let mut out = Vec::with_capacity(basis_dim(n, d));
    let mut cur = vec![0u32; n];
    emit(&mut out, &mut cur, n, d);
    out
}

fn emit(out: &mut Vec<MultiIndex>, cur: &mut [u32], vars: usize, deg: u32) {
    if vars == 1 {
        cur[0] = deg;
        out.push(MultiIndex::new(cur.to_vec()));
        return;
    }
    for last in 0..=deg {
        cur[vars - 1] = last;
        emit(out, cur, vars - 1, deg - last);
    }
}

/// Rank/unrank support for one symmetric-subspace basis.
///
/// Precomputes the dimension table `dims[m][e] = C(m+e-1, e)` so that ranking
/// costs O(n) lookups; assembly calls this in its innermost loop.
#[derive(Debug, Clone)]
pub struct BasisIndexer {
    n: usize,
    d: u32,
    /// dims[m][e], m in 0..=n, e in 0..=d
    dims: Vec<Vec<u64>>,
}

impl BasisIndexer {
    pub fn new(n: usize, d: u32) -> Self {
        assert!(n >= 1);
        let mut dims = vec![vec![0u64; d as usize + 1]; n + 1];
        dims[0][0] = 1;
        for m in 1..=n {
            dims[m][0] = 1;
            for e in 1..=d as usize {
                // C(m+e-1, e) = C(m+e-2, e) + C(m+e-2, e-1)
                dims[m][e] = dims[m - 1][e] + dims[m][e - 1];
            }
        }
        BasisIndexer { n, d, dims }
    }

    pub fn dim(&self) -> usize {
        self.dims[self.n][self.d as usize] as usize
    }

    /// Rank of an exponent slice in the canonical order.
    pub fn rank_exps(&self, exps: &[u32]) -> usize {
        debug_assert_eq!(exps.len(), self.n);
        let mut rank = 0u64;
        let mut deg = self.d as usize;
        for pos in (1..self.n).rev() {
            let a = exps[pos] as usize;
            // offset of all indices with smaller last exponent
            rank += self.dims[pos + 1][deg] - self.dims[pos + 1][deg - a];
            deg -= a;
        }
        debug_assert_eq!(exps[0] as usize, deg);
        rank as usize
    }

    pub fn rank(&self, mi: &MultiIndex) -> usize {
        self.rank_exps(mi.exps())
    }

    pub fn unrank(&self, mut rank: u64) -> Result<MultiIndex, Error> {
        if rank >= self.dim() as u64 {
            return Err(Error::RankOutOfRange { rank: rank as usize, dim: self.dim() });
        }
        let mut exps = vec![0u32; self.n];
        let mut deg = self.d as usize;
        for pos in (1..self.n).rev() {
            let mut a = 0usize;
            loop {
                let block = self.dims[pos][deg - a];
                if rank < block {
                    break;
                }
                rank -= block;
                a += 1;
            }
            exps[pos] = a as u32;
            deg -= a;
        }
        exps[0] = deg as u32;
        Ok(MultiIndex::new(exps))
    }
}

/// Rank of `mi` in the canonical basis of its length and degree.
pub fn rank(mi: &MultiIndex) -> usize {
    BasisIndexer::new(mi.len(), mi.degree()).rank(mi)
}

/// Inverse of [`rank`]: the multi-index of length `n`, degree `d`, rank `r`.
pub fn unrank(n: usize, d: u32, r: usize) -> Result<MultiIndex, Error> {
    BasisIndexer::new(n, d).unrank(r as u64)
}

/// C(n, k) in u128 (exact; panics on overflow, which none of our index
/// arithmetic can reach).
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut res: u128 = 1;
    for i in 1..=k {
        res = res * (n - k + i) as u128 / i as u128;
    }
    res
}

/// Exact binomial coefficient as a big integer.
pub fn binomial_big(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut res = BigInt::one();
    for i in 1..=k {
        res = res * BigInt::from(n - k + i) / BigInt::from(i);
    }
    res
}

/// Exact multinomial coefficient d! / (mi_1! ... mi_n!), as a rational.
///
/// Errors when `d` disagrees with the index degree.
pub fn multinomial(d: u32, mi: &MultiIndex) -> Result<BigRational, Error> {
    Ok(BigRational::from_integer(multinomial_big(d, mi)?))
}

/// Exact multinomial coefficient as a big integer.
pub fn multinomial_big(d: u32, mi: &MultiIndex) -> Result<BigInt, Error> {
    if mi.degree() != d {
        return Err(Error::DegreeMismatch { expected: d, found: mi.degree() });
    }
    let mut res = BigInt::one();
    let mut acc = 0u64;
    for &e in mi.exps() {
        acc += e as u64;
        res *= binomial_big(acc, e as u64);
    }
    Ok(res)
}

/// ln(m!) with f64 accuracy.
pub fn ln_factorial(m: u64) -> f64 {
    ln_gamma(m as f64 + 1.0)
}

/// ln C(n, k).
pub fn log_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// ln of the multinomial coefficient; agrees with the exact value to
/// ~1e-12 relative even at degrees in the thousands.
pub fn log_multinomial(d: u32, mi: &MultiIndex) -> Result<f64, Error> {
    if mi.degree() != d {
        return Err(Error::DegreeMismatch { expected: d, found: mi.degree() });
    }
    let mut s = ln_factorial(d as u64);
    for &e in mi.exps() {
        s -= ln_factorial(e as u64);
    }
    Ok(s)
}

/// Natural log of a positive big integer (handles values far beyond f64 range).
pub fn ln_bigint(x: &BigInt) -> f64 {
    assert!(x.is_positive());
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap().ln();
    }
    let top: BigInt = x >> (bits - 53);
    let m = top.to_f64().unwrap();
    m.ln() + (bits - 53) as f64 * std::f64::consts::LN_2
}

/// The reduction constant 2^d / C(2d, d), exactly.
pub fn delta(d: u32) -> BigRational {
    assert!(d >= 1, "delta is defined for d >= 1");
    BigRational::new(BigInt::from(2u32).pow(d), binomial_big(2 * d as u64, d as u64))
}

/// The curve sum_j C(d,j)^2 C(2d,2j)^{-1} t^j (1-t)^{d-j}, evaluated in
/// exact rational arithmetic and converted at the end. Its minimum over
/// [0,1] is attained at t = 1/2 with value [`delta`]`(d)`.
pub fn delta_curve(d: u32, t: f64) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError(format!("delta_curve: t = {t} outside [0, 1]")));
    }
    let tr = BigRational::from_float(t).expect("finite t");
    let one_minus = BigRational::one() - &tr;
    let mut sum = BigRational::zero();
    for j in 0..=d {
        let coeff = BigRational::new(
            binomial_big(d as u64, j as u64).pow(2),
            binomial_big(2 * d as u64, 2 * j as u64),
        );
        let term = coeff * pow_rational(&tr, j) * pow_rational(&one_minus, d - j);
        sum += term;
    }
    Ok(sum.to_f64().expect("sum fits f64"))
}

fn pow_rational(x: &BigRational, e: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Both sides of the hypergeometric identity
/// sum_j C(2j,j) C(j,k) C(2d-2j,d-j) C(d-j,s-k) = 4^{d-s} C(2k,k) C(2s-2k,s-k) C(d,s),
/// evaluated exactly. The caller asserts equality.
pub fn claim4_check(d: u32, s: u32, k: u32) -> Result<(BigRational, BigRational), Error> {
    if k > s {
        return Err(Error::DomainError(format!("claim4_check requires k <= s, got k={k}, s={s}")));
    }
    let mut lhs = BigInt::zero();
    for j in 0..=d as u64 {
        lhs += binomial_big(2 * j, j)
            * binomial_big(j, k as u64)
            * binomial_big(2 * (d as u64 - j), d as u64 - j)
            * binomial_big(d as u64 - j, (s - k) as u64);
    }
    let four_pow = if d >= s {
        BigRational::from_integer(BigInt::from(4u32).pow(d - s))
    } else {
        BigRational::new(BigInt::one(), BigInt::from(4u32).pow(s - d))
    };
    let rhs = four_pow
        * BigRational::from_integer(
            binomial_big(2 * k as u64, k as u64)
                * binomial_big(2 * (s - k) as u64, (s - k) as u64)
                * binomial_big(d as u64, s as u64),
        );
    Ok((BigRational::from_integer(lhs), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(exps: &[u32]) -> MultiIndex {
        MultiIndex::new(exps.to_vec())
    }

    #[test]
    fn enumerate_small() {
        let b = enumerate_basis(2, 2);
        assert_eq!(b, vec![mi(&[2, 0]), mi(&[1, 1]), mi(&[0, 2])]);
        assert_eq!(enumerate_basis(3, 3).len(), 10);
        assert_eq!(enumerate_basis(1, 5), vec![mi(&[5])]);
    }

    #[test]
    fn enumerate_grevlex_order_n3() {
        let b = enumerate_basis(3, 2);
        let expect: Vec<MultiIndex> = [
            [2, 0, 0], [1, 1, 0], [0, 2, 0], [1, 0, 1], [0, 1, 1], [0, 0, 2],
        ]
        .iter()
        .map(|e| mi(e))
        .collect();
        assert_eq!(b, expect);
        // Ord agrees with enumeration order
        for w in b.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn rank_unrank_roundtrip_exhaustive() {
        for n in 1..=4usize {
            for d in 0..=6u32 {
                let basis = enumerate_basis(n, d);
                assert_eq!(basis.len(), basis_dim(n, d));
                let ix = BasisIndexer::new(n, d);
                for (r, b) in basis.iter().enumerate() {
                    assert_eq!(ix.rank(b), r);
                    assert_eq!(&ix.unrank(r as u64).unwrap(), b);
                }
                // all distinct
                let mut sorted = basis.clone();
                sorted.dedup();
                assert_eq!(sorted.len(), basis.len());
            }
        }
    }

    #[test]
    fn rank_first_is_zero() {
        assert_eq!(rank(&mi(&[3, 0, 0])), 0);
        assert_eq!(unrank(2, 2, 1).unwrap(), mi(&[1, 1]));
        assert!(unrank(2, 2, 3).is_err());
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(4, &mi(&[2, 2])).unwrap(), BigRational::from_integer(6.into()));
        assert_eq!(multinomial(3, &mi(&[1, 1, 1])).unwrap(), BigRational::from_integer(6.into()));
        assert!(multinomial(5, &mi(&[2, 2])).is_err());
    }

    #[test]
    fn log_multinomial_matches_bigint() {
        let cases = [
            (2000u32, vec![1000u32, 600, 400]),
            (64, vec![20, 30, 14]),
            (120, vec![40, 40, 40]),
        ];
        for (d, exps) in cases {
            let m = mi(&exps);
            let exact = multinomial_big(d, &m).unwrap();
            let expect = ln_bigint(&exact);
            let got = log_multinomial(d, &m).unwrap();
            assert!(
                (got - expect).abs() <= 1e-12 * expect.abs(),
                "d={d}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta(1), BigRational::from_integer(1.into()));
        assert_eq!(delta(2), BigRational::new(2.into(), 3.into()));
        assert_eq!(delta(3), BigRational::new(2.into(), 5.into()));
    }

    #[test]
    fn delta_curve_values() {
        for t in [0.0, 0.3, 0.77, 1.0] {
            assert!((delta_curve(1, t).unwrap() - 1.0).abs() < 1e-15);
        }
        let v = delta_curve(2, 0.5).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert!(delta_curve(2, 1.5).is_err());
        // evenness about t = 1/2
        for d in 1..=8 {
            for t in [0.1, 0.25, 0.4] {
                let a = delta_curve(d, t).unwrap();
                let b = delta_curve(d, 1.0 - t).unwrap();
                assert!((a - b).abs() < 1e-14, "d={d} t={t}");
            }
        }
    }

    #[test]
    fn claim4_examples() {
        let (lhs, rhs) = claim4_check(2, 1, 0).unwrap();
        assert_eq!(lhs, BigRational::from_integer(16.into()));
        assert_eq!(rhs, BigRational::from_integer(16.into()));
        for d in 0..=10u32 {
            let (lhs, rhs) = claim4_check(d, 0, 0).unwrap();
            assert_eq!(lhs, BigRational::from_integer(BigInt::from(4u32).pow(d)));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn claim4_exhaustive() {
        for d in 0..=10u32 {
            for s in 0..=d {
                for k in 0..=s {
                    let (lhs, rhs) = claim4_check(d, s, k).unwrap();
                    assert_eq!(lhs, rhs, "d={d} s={s} k={k}");
                }
            }
        }
    }

    #[test]
    fn vandermonde_aggregation() {
        // sum_{alpha+beta=gamma, |alpha|=|beta|=d} C(d,alpha) C(d,beta) = C(2d,gamma)
        for n in 1..=3usize {
            for d in 1..=8u32 {
                for gamma in enumerate_basis(n, 2 * d) {
                    let mut sum = BigInt::zero();
                    for alpha in enumerate_basis(n, d) {
                        if let Some(beta) = gamma.checked_sub(&alpha) {
                            sum += multinomial_big(d, &alpha).unwrap()
                                * multinomial_big(d, &beta).unwrap();
                        }
                    }
                    assert_eq!(sum, multinomial_big(2 * d, &gamma).unwrap(), "n={n} d={d} gamma={gamma}");
                }
            }
        }
    }
}
