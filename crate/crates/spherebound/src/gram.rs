//! Maximally symmetric Gram operators and the sparse pencil matrices.
//!
//! All matrices live in the *orthonormal* basis of the symmetric subspace
//! (`sqrt(C(k,mu)) e^mu`), where the generalized eigenvalues of the pencil
//! are the same as in the raw monomial basis but the entries stay bounded by
//! the normalized coefficients: an entry of `P_k` is
//!
//! ```text
//! A[mu,nu] = sum_{gamma <= mu, gamma <= nu, |gamma| = k-d}
//!            C_{(mu-gamma)+(nu-gamma)} C(d, mu-gamma) C(d, nu-gamma) C(k-d, gamma)
//!            / sqrt(C(k, mu) C(k, nu)),
//! ```
//!
//! computed as `exp` of a balanced sum of log-multinomials so nothing
//! overflows even at `k - d` in the thousands. Assembly iterates over the
//! support pairs of the normalized coefficients and the `||x||` power index
//! `gamma`, so the cost is proportional to the number of structurally
//! nonzero contributions, never to `dim^2`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num::complex::Complex64;
use num::rational::BigRational;
use num::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::combinat::{
    basis_dim, enumerate_basis, ln_factorial, multinomial_big, BasisIndexer, MultiIndex,
};
use crate::error::{Error, Result};
use crate::polyform::{norm_power_form, HomogeneousForm, MultiForm};

/// One symmetric-subspace factor S^k(R^n).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorTag {
    pub n: usize,
    pub k: u32,
}

/// Identifies the (product) basis a matrix or vector is expressed in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisTag(pub Vec<FactorTag>);

impl BasisTag {
    pub fn single(n: usize, k: u32) -> Self {
        BasisTag(vec![FactorTag { n, k }])
    }

    pub fn factors(&self) -> &[FactorTag] {
        &self.0
    }

    pub fn is_single(&self) -> bool {
        self.0.len() == 1
    }

    pub fn dim(&self) -> usize {
        self.0.iter().map(|f| basis_dim(f.n, f.k)).product()
    }
}

/// A vector in the orthonormal symmetric-subspace basis.
#[derive(Debug, Clone)]
pub struct OrthoVec {
    pub tag: BasisTag,
    pub coords: Vec<f64>,
}

/// Symmetric sparse matrix; only the upper triangle (row <= col) is stored,
/// in CSR layout sorted by (row, col). Symmetry is structural.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    tag: BasisTag,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Build from (row, col, value) triplets in either orientation.
    /// Duplicates are summed (in a deterministic order); nothing is dropped.
    pub fn from_triplets(tag: BasisTag, triplets: Vec<(u32, u32, f64)>) -> Self {
        let dim = tag.dim();
        assert!(dim <= u32::MAX as usize, "basis dimension exceeds index width");
        let mut t: Vec<(u32, u32, f64)> = triplets
            .into_iter()
            .map(|(r, c, v)| if r <= c { (r, c, v) } else { (c, r, v) })
            .collect();
        // stable sort: duplicate keys are summed in emission order
        t.par_sort_by_key(|&(r, c, _)| (r, c));
        let mut rows: Vec<u32> = Vec::with_capacity(t.len());
        let mut cols: Vec<u32> = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        let mut row_ptr = vec![0usize; dim + 1];
        for &r in &rows {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymMatrix { tag, dim, row_ptr, cols, vals }
    }

    pub fn identity(tag: BasisTag) -> Self {
        let dim = tag.dim();
        let triplets = (0..dim as u32).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(tag, triplets)
    }

    pub fn tag(&self) -> &BasisTag {
        &self.tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz_upper(&self) -> usize {
        self.vals.len()
    }

    /// Stored (upper-triangle) entries in (row, col, value) order.
    pub fn upper_entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |i| (r as u32, self.cols[i], self.vals[i]))
        })
    }

    /// Symmetric matvec with a length check.
    pub fn try_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self.apply(x))
    }

    /// Symmetric matvec from single-triangle storage (each off-diagonal
    /// entry applied on both sides). Panics on length mismatch; use
    /// [`try_apply`](Self::try_apply) at the library boundary.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.fill(0.0);
        for r in 0..self.dim {
            let xr = x[r];
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[i] as usize;
                let v = self.vals[i];
                acc += v * x[c];
                if c != r {
                    y[c] += v * xr;
                }
            }
            y[r] += acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.upper_entries() {
            m[(r as usize, c as usize)] += v;
            if r != c {
                m[(c as usize, r as usize)] += v;
            }
        }
        m
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (r, c, v) in self.upper_entries() {
            if r == c {
                d[r as usize] += v;
            }
        }
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (r, c, v) in self.upper_entries() {
            acc += if r == c { v * v } else { 2.0 * v * v };
        }
        acc.sqrt()
    }

    /// True if this is numerically the identity (used to skip inner solves
    /// when the pencil's B side is trivial, e.g. the spectral-norm case).
    pub fn is_identity(&self) -> bool {
        if self.nnz_upper() != self.dim {
            return self.upper_entries().all(|(r, c, v)| {
                (r == c && (v - 1.0).abs() <= 1e-12) || (r != c && v == 0.0)
            }) && self.diagonal().iter().all(|&d| (d - 1.0).abs() <= 1e-12);
        }
        self.upper_entries().all(|(r, c, v)| r == c && (v - 1.0).abs() <= 1e-12)
    }

    /// Write in coordinate text format: one `row col value` triple per line,
    /// 1-based indices, upper triangle only. Values are printed shortest
    /// round-trip, so reading the file back reproduces the matrix bitwise.
    pub fn write_coo(&self, w: &mut impl Write) -> Result<()> {
        for (r, c, v) in self.upper_entries() {
            writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
        }
        Ok(())
    }

    /// Read coordinate text format written by [`write_coo`](Self::write_coo).
    pub fn read_coo(tag: BasisTag, r: impl BufRead) -> Result<Self> {
        let dim = tag.dim();
        let mut triplets = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::InvalidProblem(format!(
                    "coo line {}: expected 'row col value'",
                    lineno + 1
                )));
            }
            let row: usize = fields[0].parse().map_err(|e| {
                Error::InvalidProblem(format!("coo line {}: bad row ({e})", lineno + 1))
            })?;
            let col: usize = fields[1].parse().map_err(|e| {
                Error::InvalidProblem(format!("coo line {}: bad col ({e})", lineno + 1))
            })?;
            let val: f64 = fields[2].parse().map_err(|e| {
                Error::InvalidProblem(format!("coo line {}: bad value ({e})", lineno + 1))
            })?;
            if row == 0 || col == 0 || row > dim || col > dim {
                return Err(Error::InvalidProblem(format!(
                    "coo line {}: index out of range for dimension {dim}",
                    lineno + 1
                )));
            }
            triplets.push(((row - 1) as u32, (col - 1) as u32, val));
        }
        Ok(Self::from_triplets(tag, triplets))
    }
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// ln of the multinomial from a factorial table (hot path; no checks).
#[inline]
fn lmn_table(ln_fact: &[f64], d: u32, exps: &[u32]) -> f64 {
    let mut s = ln_fact[d as usize];
    for &e in exps {
        s -= ln_fact[e as usize];
    }
    s
}

fn ln_fact_table(max: u32) -> Vec<f64> {
    (0..=max as u64).map(ln_factorial).collect()
}

/// Exact multinomial values C(d, mu) per basis rank, when every value fits
/// f64 exactly (below 2^53). At that size entries can be computed with two
/// roundings total instead of going through exp/ln; None means use log space.
fn exact_multinomial_table(n: usize, d: u32) -> Option<Vec<f64>> {
    // the balanced index maximizes the multinomial
    let mut balanced = vec![d / n as u32; n];
    for b in balanced.iter_mut().take(d as usize % n) {
        *b += 1;
    }
    let peak = multinomial_big(d, &MultiIndex::new(balanced)).expect("degree consistent");
    if peak.bits() > 53 {
        return None;
    }
    Some(
        enumerate_basis(n, d)
            .iter()
            .map(|mi| {
                multinomial_big(d, mi)
                    .expect("degree consistent")
                    .to_f64()
                    .expect("below 2^53")
            })
            .collect(),
    )
}

struct SupportPair {
    alpha: Vec<u32>,
    beta: Vec<u32>,
    sign: f64,
    /// ln |C_{alpha+beta}| + ln C(d, alpha) + ln C(d, beta)
    log_base: f64,
    /// C_{alpha+beta} C(d, alpha) C(d, beta), signed (exact mode only).
    exact_base: f64,
}

fn single_support_pairs(
    d: u32,
    coeffs: &[(MultiIndex, f64)],
    ln_fact: &[f64],
) -> Vec<SupportPair> {
    let mut pairs = Vec::new();
    for (g, c) in coeffs {
        if *c == 0.0 {
            continue;
        }
        for alpha in enumerate_basis(g.len(), d) {
            if let Some(beta) = g.checked_sub(&alpha) {
                if alpha <= beta {
                    let log_base = c.abs().ln()
                        + lmn_table(ln_fact, d, alpha.exps())
                        + lmn_table(ln_fact, d, beta.exps());
                    let exact_base = multinomial_big(d, &alpha)
                        .unwrap()
                        .to_f64()
                        .map(|ma| {
                            multinomial_big(d, &beta)
                                .unwrap()
                                .to_f64()
                                .map(|mb| c * ma * mb)
                                .unwrap_or(f64::NAN)
                        })
                        .unwrap_or(f64::NAN);
                    pairs.push(SupportPair {
                        alpha: alpha.exps().to_vec(),
                        beta: beta.exps().to_vec(),
                        sign: c.signum(),
                        log_base,
                        exact_base,
                    });
                }
            }
        }
    }
    pairs
}

fn assemble_single(
    n: usize,
    d: u32,
    k: u32,
    coeffs: &[(MultiIndex, f64)],
) -> SparseSymMatrix {
    let tag = BasisTag::single(n, k);
    let ln_fact = ln_fact_table(k.max(1));
    let pairs = single_support_pairs(d, coeffs, &ln_fact);
    let indexer = BasisIndexer::new(n, k);
    let gbasis = enumerate_basis(n, k - d);
    let exact_k = exact_multinomial_table(n, k);
    let exact_g: Option<Vec<f64>> = exact_k
        .as_ref()
        .map(|_| {
            gbasis
                .iter()
                .map(|g| multinomial_big(k - d, g).unwrap().to_f64().expect("within exact range"))
                .collect()
        });

    let chunk = 2048usize.max(gbasis.len() / (8 * rayon::current_num_threads().max(1)) + 1);
    let triplets: Vec<(u32, u32, f64)> = gbasis
        .par_chunks(chunk)
        .enumerate()
        .flat_map_iter(|(ci, gs)| {
            let mut out = Vec::with_capacity(gs.len() * pairs.len());
            let mut mu = vec![0u32; n];
            let mut nu = vec![0u32; n];
            for (gi, g) in gs.iter().enumerate() {
                let lg = lmn_table(&ln_fact, k - d, g.exps());
                let eg = exact_g.as_ref().map(|t| t[ci * chunk + gi]);
                for p in &pairs {
                    for i in 0..n {
                        mu[i] = p.alpha[i] + g.exps()[i];
                        nu[i] = p.beta[i] + g.exps()[i];
                    }
                    let r = indexer.rank_exps(&mu);
                    let c = indexer.rank_exps(&nu);
                    let v = match (&exact_k, eg) {
                        (Some(tab), Some(eg)) => {
                            p.exact_base * eg / (tab[r] * tab[c]).sqrt()
                        }
                        _ => {
                            let lmu = lmn_table(&ln_fact, k, &mu);
                            let lnu = lmn_table(&ln_fact, k, &nu);
                            p.sign * (p.log_base + lg - 0.5 * (lmu + lnu)).exp()
                        }
                    };
                    let (r, c) = (r as u32, c as u32);
                    out.push(if r <= c { (r, c, v) } else { (c, r, v) });
                }
            }
            out
        })
        .collect();
    SparseSymMatrix::from_triplets(tag, triplets)
}

/// The maximally symmetric Gram operator M(p) on S^d, d = D/2.
///
/// Orthonormal-basis entries are `C_{alpha+beta} sqrt(C(d,alpha) C(d,beta))`;
/// the trace is `sum_alpha C_{2 alpha} C(d, alpha)`.
pub fn build_m(p: &HomogeneousForm) -> Result<SparseSymMatrix> {
    if !p.degree().is_multiple_of(2) {
        return Err(Error::OddDegree(p.degree()));
    }
    build_pk(p, p.degree() / 2)
}

/// The level-k Gram operator P_k of `p` on S^k (k >= d).
pub fn build_pk(p: &HomogeneousForm, k: u32) -> Result<SparseSymMatrix> {
    if !p.degree().is_multiple_of(2) {
        return Err(Error::OddDegree(p.degree()));
    }
    let d = p.degree() / 2;
    if k < d {
        return Err(Error::LevelBelowDegree { k, d });
    }
    let nc = p.normalize_coeffs()?;
    let coeffs: Vec<(MultiIndex, f64)> =
        nc.float_terms().iter().map(|(mi, c)| (mi.clone(), *c)).collect();
    Ok(assemble_single(p.n(), d, k, &coeffs))
}

/// N_k^{(d)}: the level-k Gram operator of ||x||^{2d}. Symmetric positive
/// definite, with condition number bounded by that of N^{(d)} at every k.
pub fn build_nk(n: usize, d: u32, k: u32) -> Result<SparseSymMatrix> {
    if d < 1 {
        return Err(Error::DomainError("build_nk requires d >= 1".into()));
    }
    build_pk(&norm_power_form(n, d), k)
}

fn multi_normalized(p: &MultiForm) -> Result<Vec<(Vec<MultiIndex>, f64)>> {
    let mut out = Vec::with_capacity(p.terms().len());
    for (key, c) in p.terms() {
        let mut denom = BigRational::from_integer(1.into());
        for (mi, &(_, di)) in key.0.iter().zip(p.factors()) {
            denom *= BigRational::from_integer(multinomial_big(di, mi)?);
        }
        let v = (c / denom).to_f64().expect("normalized coefficient fits f64");
        out.push((key.0.clone(), v));
    }
    Ok(out)
}

struct MultiSupportPair {
    alphas: Vec<Vec<u32>>,
    betas: Vec<Vec<u32>>,
    sign: f64,
    log_base: f64,
    exact_base: f64,
}

/// The multi-homogeneous level-k Gram operator on S^k(V_1) x ... x S^k(V_m):
/// the per-factor Appendix-style kernels coupled through the shared
/// normalized coefficient of each multi-index tuple. Reduces to [`build_pk`]
/// entrywise when m = 1.
pub fn build_multi_pk(p: &MultiForm, k: u32) -> Result<SparseSymMatrix> {
    let m = p.num_factors();
    let mut ds = Vec::with_capacity(m);
    for &(_, di) in p.factors() {
        if di % 2 != 0 {
            return Err(Error::OddDegree(di));
        }
        ds.push(di / 2);
    }
    let dmax = ds.iter().copied().max().unwrap_or(0);
    if k < dmax {
        return Err(Error::LevelBelowDegree { k, d: dmax });
    }
    let ns: Vec<usize> = p.factors().iter().map(|&(ni, _)| ni).collect();
    let tag = BasisTag(ns.iter().zip(&ds).map(|(&n, _)| FactorTag { n, k }).collect());
    let ln_fact = ln_fact_table(k.max(1));

    // support pairs over tuples
    let coeffs = multi_normalized(p)?;
    let mut pairs: Vec<MultiSupportPair> = Vec::new();
    for (gs, c) in &coeffs {
        if *c == 0.0 {
            continue;
        }
        // options for alpha_j per factor
        let opts: Vec<Vec<MultiIndex>> = (0..m)
            .map(|j| {
                enumerate_basis(ns[j], ds[j])
                    .into_iter()
                    .filter(|a| gs[j].checked_sub(a).is_some())
                    .collect()
            })
            .collect();
        let mut choice = vec![0usize; m];
        'outer: loop {
            let alphas: Vec<&MultiIndex> = (0..m).map(|j| &opts[j][choice[j]]).collect();
            let betas: Vec<MultiIndex> =
                (0..m).map(|j| gs[j].checked_sub(alphas[j]).unwrap()).collect();
            // dedupe unordered tuple pairs
            let a_le_b = {
                let mut ord = std::cmp::Ordering::Equal;
                for j in 0..m {
                    ord = alphas[j].cmp(&betas[j]);
                    if ord != std::cmp::Ordering::Equal {
                        break;
                    }
                }
                ord != std::cmp::Ordering::Greater
            };
            if a_le_b {
                let mut log_base = c.abs().ln();
                let mut exact_base = *c;
                for j in 0..m {
                    log_base += lmn_table(&ln_fact, ds[j], alphas[j].exps())
                        + lmn_table(&ln_fact, ds[j], betas[j].exps());
                    exact_base *= multinomial_big(ds[j], alphas[j])
                        .unwrap()
                        .to_f64()
                        .unwrap_or(f64::NAN)
                        * multinomial_big(ds[j], &betas[j])
                            .unwrap()
                            .to_f64()
                            .unwrap_or(f64::NAN);
                }
                pairs.push(MultiSupportPair {
                    alphas: alphas.iter().map(|a| a.exps().to_vec()).collect(),
                    betas: betas.iter().map(|b| b.exps().to_vec()).collect(),
                    sign: c.signum(),
                    log_base,
                    exact_base,
                });
            }
            // odometer
            for j in (0..m).rev() {
                choice[j] += 1;
                if choice[j] < opts[j].len() {
                    continue 'outer;
                }
                choice[j] = 0;
                if j == 0 {
                    break 'outer;
                }
            }
        }
    }

    let indexers: Vec<BasisIndexer> = (0..m).map(|j| BasisIndexer::new(ns[j], k)).collect();
    let dims: Vec<usize> = indexers.iter().map(|ix| ix.dim()).collect();
    let gbases: Vec<Vec<MultiIndex>> =
        (0..m).map(|j| enumerate_basis(ns[j], k - ds[j])).collect();
    // exact f64 multinomials per factor when every value fits 53 bits
    let exact_k: Option<Vec<Vec<f64>>> = (0..m)
        .map(|j| exact_multinomial_table(ns[j], k))
        .collect();
    let exact_g: Option<Vec<Vec<f64>>> = exact_k.as_ref().map(|_| {
        (0..m)
            .map(|j| {
                gbases[j]
                    .iter()
                    .map(|g| {
                        multinomial_big(k - ds[j], g)
                            .unwrap()
                            .to_f64()
                            .expect("within exact range")
                    })
                    .collect()
            })
            .collect()
    });

    // parallelize over the first factor's gamma index
    let triplets: Vec<(u32, u32, f64)> = gbases[0]
        .par_iter()
        .enumerate()
        .flat_map_iter(|(g0i, g0)| {
            let mut out = Vec::new();
            let mut gchoice = vec![0usize; m];
            'tuple: loop {
                let gammas: Vec<&MultiIndex> = (0..m)
                    .map(|j| if j == 0 { g0 } else { &gbases[j][gchoice[j]] })
                    .collect();
                let gidx = |j: usize| if j == 0 { g0i } else { gchoice[j] };
                let mut lg = 0.0;
                let mut eg = 1.0f64;
                for j in 0..m {
                    lg += lmn_table(&ln_fact, k - ds[j], gammas[j].exps());
                    if let Some(t) = &exact_g {
                        eg *= t[j][gidx(j)];
                    }
                }
                for p in &pairs {
                    let mut lmu = 0.0;
                    let mut lnu = 0.0;
                    let mut emu = 1.0f64;
                    let mut enu = 1.0f64;
                    let mut r = 0usize;
                    let mut cc = 0usize;
                    for j in 0..m {
                        let nj = ns[j];
                        let mut mu = vec![0u32; nj];
                        let mut nu = vec![0u32; nj];
                        for i in 0..nj {
                            mu[i] = p.alphas[j][i] + gammas[j].exps()[i];
                            nu[i] = p.betas[j][i] + gammas[j].exps()[i];
                        }
                        let rj = indexers[j].rank_exps(&mu);
                        let cj = indexers[j].rank_exps(&nu);
                        if let Some(t) = &exact_k {
                            emu *= t[j][rj];
                            enu *= t[j][cj];
                        } else {
                            lmu += lmn_table(&ln_fact, k, &mu);
                            lnu += lmn_table(&ln_fact, k, &nu);
                        }
                        r = r * dims[j] + rj;
                        cc = cc * dims[j] + cj;
                    }
                    let v = if exact_k.is_some() {
                        p.exact_base * eg / (emu * enu).sqrt()
                    } else {
                        p.sign * (p.log_base + lg - 0.5 * (lmu + lnu)).exp()
                    };
                    let (r, cc) = if r <= cc { (r, cc) } else { (cc, r) };
                    out.push((r as u32, cc as u32, v));
                }
                for j in (1..m).rev() {
                    gchoice[j] += 1;
                    if gchoice[j] < gbases[j].len() {
                        continue 'tuple;
                    }
                    gchoice[j] = 0;
                }
                break;
            }
            out
        })
        .collect();
    Ok(SparseSymMatrix::from_triplets(tag, triplets))
}

/// N_k^{(d_1..d_m)}: the multi Gram operator of the product of norm powers.
/// Kronecker product of the per-factor N_k matrices.
pub fn build_multi_nk(ns: &[usize], ds: &[u32], k: u32) -> Result<SparseSymMatrix> {
    if ns.len() != ds.len() || ns.is_empty() {
        return Err(Error::InvalidProblem("factor lists must match and be nonempty".into()));
    }
    let mut form = MultiForm::from_homogeneous(&norm_power_form(ns[0], ds[0]));
    for j in 1..ns.len() {
        form = tensor_product(&form, &norm_power_form(ns[j], ds[j]))?;
    }
    build_multi_pk(&form, k)
}

/// Tensor product of a multi form with one more single-factor form.
fn tensor_product(a: &MultiForm, b: &HomogeneousForm) -> Result<MultiForm> {
    let mut factors = a.factors().to_vec();
    factors.push((b.n(), b.degree()));
    let mut terms = Vec::new();
    for (ka, ca) in a.terms() {
        for (kb, cb) in b.terms() {
            let mut parts = ka.0.clone();
            parts.push(kb.clone());
            terms.push((crate::polyform::MultiIndexTuple(parts), ca * cb));
        }
    }
    MultiForm::from_terms(factors, terms)
}

// ---------------------------------------------------------------------------
// Exact rational validation mode
// ---------------------------------------------------------------------------

/// The exact symmetric kernel `G` of a level-k Gram operator:
/// `A[mu,nu] = G[mu,nu] / sqrt(C(k,mu) C(k,nu))`. `G` is rational, so
/// identity checks (traces, entry cross-checks) can run in exact arithmetic;
/// the square root enters only at the float boundary.
#[derive(Debug, Clone)]
pub struct RationalGram {
    pub tag: BasisTag,
    pub dim: usize,
    pub k: u32,
    /// upper triangle of G, sorted by (row, col)
    pub entries: Vec<(u32, u32, BigRational)>,
}

impl RationalGram {
    /// Exactly rational trace of the orthonormal-basis matrix:
    /// `sum_mu G[mu,mu] / C(k,mu)`.
    pub fn trace_orthonormal(&self) -> BigRational {
        let f = &self.tag.factors()[0];
        let ix = BasisIndexer::new(f.n, f.k);
        let mut acc = BigRational::zero();
        for (r, c, v) in &self.entries {
            if r == c {
                let mu = ix.unrank(*r as u64).expect("stored rank is valid");
                acc += v / BigRational::from_integer(
                    multinomial_big(f.k, &mu).expect("degree matches"),
                );
            }
        }
        acc
    }

    /// Convert to the orthonormal float matrix (sqrt applied entrywise).
    pub fn to_orthonormal_float(&self) -> SparseSymMatrix {
        let f = &self.tag.factors()[0];
        let ix = BasisIndexer::new(f.n, f.k);
        let triplets = self
            .entries
            .iter()
            .map(|(r, c, v)| {
                let mu = ix.unrank(*r as u64).expect("valid rank");
                let nu = ix.unrank(*c as u64).expect("valid rank");
                let cmu = multinomial_big(f.k, &mu).unwrap().to_f64().unwrap();
                let cnu = multinomial_big(f.k, &nu).unwrap().to_f64().unwrap();
                (*r, *c, v.to_f64().unwrap() / (cmu * cnu).sqrt())
            })
            .collect();
        SparseSymMatrix::from_triplets(self.tag.clone(), triplets)
    }
}

/// Exact-arithmetic assembly of the kernel `G` for `P_k` (validation mode;
/// guarded to `k - d <= 10` and small dimensions).
pub fn build_gram_rational(p: &HomogeneousForm, k: u32) -> Result<RationalGram> {
    if !p.degree().is_multiple_of(2) {
        return Err(Error::OddDegree(p.degree()));
    }
    let d = p.degree() / 2;
    if k < d {
        return Err(Error::LevelBelowDegree { k, d });
    }
    if k - d > 10 {
        return Err(Error::SizeGuard(format!(
            "rational assembly is a validation mode, limited to k - d <= 10 (got {})",
            k - d
        )));
    }
    let n = p.n();
    let dim = basis_dim(n, k);
    if dim > 20_000 {
        return Err(Error::SizeGuard(format!("rational assembly limited to dim <= 20000 (got {dim})")));
    }
    let nc = p.normalize_coeffs()?;
    let ix = BasisIndexer::new(n, k);
    let mut map: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
    for (g, c) in nc.map() {
        for alpha in enumerate_basis(n, d) {
            if let Some(beta) = g.checked_sub(&alpha) {
                if alpha <= beta {
                    let base = c
                        * BigRational::from_integer(multinomial_big(d, &alpha)?)
                        * BigRational::from_integer(multinomial_big(d, &beta)?);
                    for gamma in enumerate_basis(n, k - d) {
                        let mu = alpha.add(&gamma);
                        let nu = beta.add(&gamma);
                        let v = &base
                            * BigRational::from_integer(multinomial_big(k - d, &gamma)?);
                        let (r, cc) = {
                            let r = ix.rank(&mu) as u32;
                            let cc = ix.rank(&nu) as u32;
                            if r <= cc {
                                (r, cc)
                            } else {
                                (cc, r)
                            }
                        };
                        *map.entry((r, cc)).or_insert_with(BigRational::zero) += v;
                    }
                }
            }
        }
    }
    let entries = map.into_iter().map(|((r, c), v)| (r, c, v)).collect();
    Ok(RationalGram { tag: BasisTag::single(n, k), dim, k, entries })
}

// ---------------------------------------------------------------------------
// Evaluation at points
// ---------------------------------------------------------------------------

/// Coordinates of `z^{tensor k}` in the orthonormal basis of S^k:
/// `psi[mu] = sqrt(C(k, mu)) z^mu`, computed per coordinate in log space so
/// giant binomials and tiny monomials never overflow each other.
pub fn sym_power_coords(z: &[Complex64], k: u32) -> Vec<Complex64> {
    let n = z.len();
    let ln_fact = ln_fact_table(k.max(1));
    let abs_ln: Vec<f64> = z.iter().map(|zi| zi.norm().ln()).collect();
    let args: Vec<f64> = z.iter().map(|zi| zi.arg()).collect();
    enumerate_basis(n, k)
        .iter()
        .map(|mu| {
            let mut lm = 0.5 * lmn_table(&ln_fact, k, mu.exps());
            let mut arg = 0.0;
            for (i, &e) in mu.exps().iter().enumerate() {
                if e > 0 {
                    lm += e as f64 * abs_ln[i];
                    arg += e as f64 * args[i];
                }
            }
            Complex64::from_polar(lm.exp(), arg)
        })
        .collect()
}

/// Real-point specialization of [`sym_power_coords`].
pub fn sym_power_coords_real(x: &[f64], k: u32) -> Vec<f64> {
    let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    sym_power_coords(&z, k).into_iter().map(|c| c.re).collect()
}

/// The Hermitian-form value `psi(z)^dagger A psi(z)` of a real symmetric
/// operator at a complex point. Real for symmetric real `A`; the vanishing
/// imaginary part is checked and dropped.
pub fn hermitian_value(a: &SparseSymMatrix, z: &[Complex64]) -> Result<f64> {
    let f = a
        .tag()
        .is_single()
        .then(|| a.tag().factors()[0].clone())
        .ok_or_else(|| Error::InvalidProblem("hermitian_value expects a single-factor basis".into()))?;
    if z.len() != f.n {
        return Err(Error::DimensionMismatch { expected: f.n, found: z.len() });
    }
    let psi = sym_power_coords(z, f.k);
    let mut y = vec![Complex64::new(0.0, 0.0); a.dim()];
    for (r, c, v) in a.upper_entries() {
        y[r as usize] += v * psi[c as usize];
        if r != c {
            y[c as usize] += v * psi[r as usize];
        }
    }
    let val: Complex64 = psi.iter().zip(&y).map(|(p, yi)| p.conj() * yi).sum();
    let scale = a.frobenius_norm() * psi.iter().map(|p| p.norm_sqr()).sum::<f64>();
    if val.im.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::DomainError(format!(
            "hermitian value has non-negligible imaginary part {:.3e}",
            val.im
        )));
    }
    Ok(val.re)
}

/// `psi(x)^T A psi(x)` at a real point; equals `p(x) ||x||^{2(k-d)}` when
/// `A = P_k` (the Gram evaluation identity).
pub fn quadratic_value_real(a: &SparseSymMatrix, x: &[f64]) -> Result<f64> {
    let f = a
        .tag()
        .is_single()
        .then(|| a.tag().factors()[0].clone())
        .ok_or_else(|| Error::InvalidProblem("quadratic_value_real expects a single-factor basis".into()))?;
    if x.len() != f.n {
        return Err(Error::DimensionMismatch { expected: f.n, found: x.len() });
    }
    let psi = sym_power_coords_real(x, f.k);
    let y = a.apply(&psi);
    Ok(psi.iter().zip(&y).map(|(p, yi)| p * yi).sum())
}

// ---------------------------------------------------------------------------
// Structural validators
// ---------------------------------------------------------------------------

/// Expand `A` (an operator on S^d) into the full n^d tensor-power basis,
/// apply the partial transpose on the first factor, and report whether the
/// operator is unchanged to 1e-12. True exactly for maximally symmetric Gram
/// operators; generally false for other Gram operators and for P_k at k > d.
pub fn check_partial_transpose(a: &SparseSymMatrix) -> Result<bool> {
    let f = a
        .tag()
        .is_single()
        .then(|| a.tag().factors()[0].clone())
        .ok_or_else(|| Error::InvalidProblem("check_partial_transpose expects a single factor".into()))?;
    let (n, d) = (f.n, f.k as usize);
    if d == 0 {
        return Ok(true);
    }
    let total = n.checked_pow(d as u32).filter(|&t| t <= 4096).ok_or_else(|| {
        Error::SizeGuard(format!("partial-transpose check limited to n^d <= 4096 (n={n}, d={d})"))
    })?;

    let ix = BasisIndexer::new(n, f.k);
    let dense = a.to_dense();
    // word w (base-n digits, first factor most significant) -> (rank of content, 1/sqrt(C(d,content)))
    let mut content_rank = vec![0usize; total];
    let mut inv_sqrt = vec![0.0f64; total];
    for w in 0..total {
        let mut exps = vec![0u32; n];
        let mut t = w;
        for _ in 0..d {
            exps[t % n] += 1;
            t /= n;
        }
        content_rank[w] = ix.rank_exps(&exps);
        let m = multinomial_big(f.k, &MultiIndex::new(exps)).unwrap().to_f64().unwrap();
        inv_sqrt[w] = 1.0 / m.sqrt();
    }
    let full = |w: usize, u: usize| -> f64 {
        dense[(content_rank[w], content_rank[u])] * inv_sqrt[w] * inv_sqrt[u]
    };
    // first factor = most significant digit
    let msd = n.pow(d as u32 - 1);
    let mut max_abs = 0.0f64;
    let mut max_diff = 0.0f64;
    for w in 0..total {
        for u in 0..total {
            let v = full(w, u);
            max_abs = max_abs.max(v.abs());
            let (w0, wr) = (w / msd, w % msd);
            let (u0, ur) = (u / msd, u % msd);
            let pt = full(u0 * msd + wr, w0 * msd + ur);
            max_diff = max_diff.max((v - pt).abs());
        }
    }
    Ok(max_diff <= 1e-12 * max_abs.max(1e-300))
}

/// Computed and conjectured condition number of N^{(d)} on R^n.
#[derive(Debug, Clone, Copy)]
pub struct KappaN {
    /// lambda_max / lambda_min from a dense eigendecomposition.
    pub computed: f64,
    /// The Gamma-extended binomial C(n/2 + d - 1, floor(d/2)). Unproven;
    /// reported for comparison, never used in correctness-critical paths.
    pub conjectured: f64,
}

/// Condition number of N^{(d)} = M(||x||^{2d}), with the conjectured
/// closed form alongside. Caller compares.
pub fn kappa_n(n: usize, d: u32) -> Result<KappaN> {
    let dim = basis_dim(n, d);
    if dim > 5000 {
        return Err(Error::SizeGuard(format!(
            "kappa_n uses a dense eigendecomposition, limited to dim <= 5000 (got {dim})"
        )));
    }
    let nd = build_nk(n, d, d)?;
    let eig = nalgebra::SymmetricEigen::new(nd.to_dense());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    if lo <= 0.0 {
        return Err(Error::NotSpd(format!("N^({d}) on R^{n} has nonpositive eigenvalue {lo}")));
    }
    let x = n as f64 / 2.0 + d as f64 - 1.0;
    let m = (d / 2) as f64;
    let conjectured = (ln_gamma(x + 1.0) - ln_gamma(m + 1.0) - ln_gamma(x - m + 1.0)).exp();
    Ok(KappaN { computed: hi / lo, conjectured })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyform::{motzkin, parse_form};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn m_of_xz_matches_closed_form() {
        let p = parse_form("x1*x3", &vars(&["x1", "x2", "x3"])).unwrap();
        let m = build_m(&p).unwrap();
        let d = m.to_dense();
        let expect = nalgebra::dmatrix![
            0.0, 0.0, 0.5;
            0.0, 0.0, 0.0;
            0.5, 0.0, 0.0
        ];
        assert!((d - expect).norm() < 1e-14);
    }

    #[test]
    fn m_of_norm_square_is_identity() {
        let m = build_m(&norm_power_form(4, 1)).unwrap();
        assert!((m.to_dense() - DMatrix::identity(4, 4)).norm() < 1e-14);
        assert!(m.is_identity());
    }

    #[test]
    fn trace_identity_small() {
        // Tr M(x1^{2j} x2^{2(d-j)}) = C(d,j) / C(2d,2j) ; d=2, j=1 -> 1/3
        let p = parse_form("x1^2*x2^2", &vars(&["x1", "x2"])).unwrap();
        let m = build_m(&p).unwrap();
        let tr = m.to_dense().trace();
        assert!((tr - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn pk_at_d_equals_m() {
        let p = motzkin();
        let m = build_m(&p).unwrap();
        let pk = build_pk(&p, 3).unwrap();
        assert_eq!((m.to_dense() - pk.to_dense()).norm(), 0.0);
    }

    #[test]
    fn evaluation_identity_motzkin() {
        let p = motzkin();
        let k = 6u32; // d + 3
        let pk = build_pk(&p, k).unwrap();
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm2: f64 = x.iter().map(|v| v * v).sum();
            let lhs = quadratic_value_real(&pk, &x).unwrap();
            let rhs = p.evaluate(&x).unwrap() * norm2.powi((k - 3) as i32);
            let scale = rhs.abs().max(1e-12);
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn pk_dimension_motzkin_k163() {
        let p = motzkin();
        let pk = build_pk(&p, 163).unwrap();
        assert_eq!(pk.dim(), 13530);
    }

    #[test]
    fn nk_small_spectra() {
        // d=1, k=1 -> identity
        let n1 = build_nk(3, 1, 1).unwrap();
        assert!(n1.is_identity());
        // n=2, d=k=2 -> eigenvalues {4/3, 2/3, 2/3}
        let n2 = build_nk(2, 2, 2).unwrap();
        let mut eig: Vec<f64> =
            nalgebra::SymmetricEigen::new(n2.to_dense()).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eig[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((eig[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((eig[2] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn nk_cholesky_small_grid() {
        for n in 1..=4usize {
            for d in 1..=3u32 {
                for k in d..=d + 2 {
                    let nk = build_nk(n, d, k).unwrap();
                    assert!(
                        nalgebra::Cholesky::new(nk.to_dense()).is_some(),
                        "N not SPD at n={n} d={d} k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn rational_assembly_matches_float() {
        let p = motzkin();
        for k in [3u32, 5, 7] {
            let rat = build_gram_rational(&p, k).unwrap().to_orthonormal_float();
            let fl = build_pk(&p, k).unwrap();
            let diff = (rat.to_dense() - fl.to_dense()).norm();
            assert!(diff < 1e-12, "k={k}: diff {diff}");
        }
    }

    #[test]
    fn rational_trace_identity_exact() {
        // Remark-style exact trace check at d <= 4 here (full d <= 6 in acceptance)
        for d in 1..=4u32 {
            for j in 0..=d {
                let text = match (j, d - j) {
                    (0, b) => format!("x2^{}", 2 * b),
                    (a, 0) => format!("x1^{}", 2 * a),
                    (a, b) => format!("x1^{}*x2^{}", 2 * a, 2 * b),
                };
                let p = parse_form(&text, &vars(&["x1", "x2"])).unwrap();
                let g = build_gram_rational(&p, d).unwrap();
                let tr = g.trace_orthonormal();
                let expect = BigRational::new(
                    crate::combinat::binomial_big(d as u64, j as u64),
                    crate::combinat::binomial_big(2 * d as u64, 2 * j as u64),
                );
                assert_eq!(tr, expect, "d={d} j={j}");
            }
        }
    }

    #[test]
    fn multi_reduces_to_single() {
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..5 {
            let n = 2 + trial % 2;
            let d = 1 + (trial % 2) as u32;
            let basis = enumerate_basis(n, 2 * d);
            let terms: Vec<(MultiIndex, f64)> =
                basis.iter().map(|mi| (mi.clone(), rng.gen_range(-1.0..1.0))).collect();
            let p = HomogeneousForm::from_float_terms(n, 2 * d, terms).unwrap();
            let k = d + 2;
            let single = build_pk(&p, k).unwrap();
            let multi = build_multi_pk(&MultiForm::from_homogeneous(&p), k).unwrap();
            let diff = (single.to_dense() - multi.to_dense()).norm();
            assert!(diff < 1e-12 * single.frobenius_norm().max(1.0), "trial {trial}: {diff}");
        }
    }

    #[test]
    fn multi_nk_is_kronecker() {
        let k = 2u32;
        let a = build_nk(2, 1, k).unwrap().to_dense();
        let b = build_nk(2, 1, k).unwrap().to_dense();
        let kron = a.kronecker(&b);
        let multi = build_multi_nk(&[2, 2], &[1, 1], k).unwrap().to_dense();
        assert!((kron - multi).norm() < 1e-12);

        // a non-identity case: d = (2, 1)
        let a2 = build_nk(2, 2, 3).unwrap().to_dense();
        let b2 = build_nk(3, 1, 3).unwrap().to_dense();
        let kron2 = a2.kronecker(&b2);
        let multi2 = build_multi_nk(&[2, 3], &[2, 1], 3).unwrap().to_dense();
        assert!((kron2 - multi2).norm() < 1e-12);
    }

    #[test]
    fn multi_evaluation_identity_biquadratic() {
        let groups = vec![vars(&["x1", "x2"]), vars(&["y1", "y2"])];
        let p = crate::polyform::parse_multi_form("(x1*y1 + x2*y2)^2", &groups).unwrap();
        let k = 3u32;
        let pk = build_multi_pk(&p, k).unwrap();
        let ix = BasisIndexer::new(2, k);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let px = sym_power_coords_real(&x, k);
            let py = sym_power_coords_real(&y, k);
            // psi = px (x) py in the combined basis
            let dimy = ix.dim();
            let mut psi = vec![0.0; px.len() * py.len()];
            for (i, a) in px.iter().enumerate() {
                for (j, b) in py.iter().enumerate() {
                    psi[i * dimy + j] = a * b;
                }
            }
            let v = {
                let ap = pk.apply(&psi);
                psi.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>()
            };
            let nx: f64 = x.iter().map(|t| t * t).sum();
            let ny: f64 = y.iter().map(|t| t * t).sum();
            let expect = p.evaluate(&[&x, &y]).unwrap()
                * nx.powi((k - 1) as i32)
                * ny.powi((k - 1) as i32);
            assert!((v - expect).abs() <= 1e-10 * expect.abs().max(1e-10), "{v} vs {expect}");
        }
    }

    #[test]
    fn hermitian_value_prop_examples() {
        let p = parse_form("x1*x3", &vars(&["x1", "x2", "x3"])).unwrap();
        let m = build_m(&p).unwrap();
        let s6 = 6.0f64.sqrt();
        let s3 = 3.0f64.sqrt();
        let s2 = 2.0f64.sqrt();
        let v = [
            Complex64::new(1.0 / s6, 0.0),
            Complex64::new(0.0, 1.0 / s3),
            Complex64::new(-1.0 / s2, 0.0),
        ];
        let val = hermitian_value(&m, &v).unwrap();
        assert!((val - (-1.0 / (2.0 * s3))).abs() < 1e-12);
        assert!((val - (-0.288675)).abs() < 1e-6);

        // real-point consistency on a denser quadratic
        let q = parse_form("x1^2 - 2*x1*x2 + 3*x2*x3 + x3^2", &vars(&["x1", "x2", "x3"])).unwrap();
        let mq = build_m(&q).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z: Vec<Complex64> = x.iter().map(|&t| Complex64::new(t, 0.0)).collect();
            let hv = hermitian_value(&mq, &z).unwrap();
            let pv = q.evaluate(&x).unwrap();
            assert!((hv - pv).abs() <= 1e-12 * pv.abs().max(1.0));
        }

        // N^(2) value bracketed by its spectrum
        let n2 = build_nk(2, 2, 2).unwrap();
        let z = [Complex64::new(1.0 / s2, 0.0), Complex64::new(0.0, 1.0 / s2)];
        let nv = hermitian_value(&n2, &z).unwrap();
        assert!((2.0 / 3.0 - 1e-12..=4.0 / 3.0 + 1e-12).contains(&nv));
    }

    #[test]
    fn partial_transpose_checks() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let basis = enumerate_basis(2, 4);
            let terms: Vec<(MultiIndex, f64)> =
                basis.iter().map(|mi| (mi.clone(), rng.gen_range(-1.0..1.0))).collect();
            let p = HomogeneousForm::from_float_terms(2, 4, terms).unwrap();
            let m = build_m(&p).unwrap();
            assert!(check_partial_transpose(&m).unwrap());
        }
        // the projector-combination Gram operator of 1/4 ||x||^4 is NOT
        // maximally symmetric: Q = 3/4 Pi - Pi_U
        let q = SparseSymMatrix::from_triplets(
            BasisTag::single(2, 2),
            vec![
                (0, 0, 0.25),
                (0, 2, 0.5),
                (1, 1, -0.25),
                (2, 2, 0.25),
            ],
        );
        // sanity: Q is a Gram operator for 1/4 ||x||^4
        let mut rng2 = StdRng::seed_from_u64(9);
        for _ in 0..10 {
            let x: Vec<f64> = (0..2).map(|_| rng2.gen_range(-1.0..1.0)).collect();
            let nx: f64 = x.iter().map(|t| t * t).sum();
            let v = quadratic_value_real(&q, &x).unwrap();
            assert!((v - 0.25 * nx * nx).abs() < 1e-14);
        }
        assert!(!check_partial_transpose(&q).unwrap());
    }

    #[test]
    fn kappa_values() {
        let k22 = kappa_n(2, 2).unwrap();
        assert!((k22.computed - 2.0).abs() < 1e-12);
        assert!((k22.conjectured - 2.0).abs() < 1e-12);
        let k32 = kappa_n(3, 2).unwrap();
        assert!((k32.computed - 2.5).abs() < 1e-12);
        assert!((k32.conjectured - 2.5).abs() < 1e-12);
        let k51 = kappa_n(5, 1).unwrap();
        assert!((k51.computed - 1.0).abs() < 1e-12);
        assert!((k51.conjectured - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matvec_against_dense() {
        let p = motzkin();
        let a = build_pk(&p, 5).unwrap();
        let d = a.to_dense();
        let mut rng = StdRng::seed_from_u64(1);
        let x: Vec<f64> = (0..a.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = a.apply(&x);
        let xd = nalgebra::DVector::from_vec(x.clone());
        let yd = &d * xd;
        for i in 0..a.dim() {
            assert!((y[i] - yd[i]).abs() < 1e-14 * yd.abs().max());
        }
        // column reconstruction
        for j in [0usize, 3, a.dim() - 1] {
            let mut e = vec![0.0; a.dim()];
            e[j] = 1.0;
            let col = a.apply(&e);
            for i in 0..a.dim() {
                assert!((col[i] - d[(i, j)]).abs() < 1e-15);
            }
        }
        // identity matvec, and the checked variant's length contract
        let idm = SparseSymMatrix::identity(BasisTag::single(3, 2));
        let v: Vec<f64> = (0..idm.dim()).map(|i| i as f64 - 2.0).collect();
        assert_eq!(idm.apply(&v), v);
        assert!(matches!(
            idm.try_apply(&[1.0, 2.0]),
            Err(crate::error::Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn coo_roundtrip_bitwise() {
        let p = motzkin();
        let a = build_pk(&p, 7).unwrap();
        let mut buf = Vec::new();
        a.write_coo(&mut buf).unwrap();
        let b = SparseSymMatrix::read_coo(a.tag().clone(), std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(a.nnz_upper(), b.nnz_upper());
        for ((r1, c1, v1), (r2, c2, v2)) in a.upper_entries().zip(b.upper_entries()) {
            assert_eq!((r1, c1), (r2, c2));
            assert_eq!(v1.to_bits(), v2.to_bits());
        }
    }

    #[test]
    fn overflow_safety_large_k() {
        let p = motzkin();
        let k = 3 + 500;
        let pk = build_pk(&p, k).unwrap();
        assert!(pk.upper_entries().all(|(_, _, v)| v.is_finite()));
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..3 {
            let mut x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nrm: f64 = x.iter().map(|t| t * t).sum::<f64>().sqrt();
            x.iter_mut().for_each(|t| *t /= nrm);
            let lhs = quadratic_value_real(&pk, &x).unwrap();
            let rhs = p.evaluate(&x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-8), "{lhs} vs {rhs}");
        }
    }
}
