//! Homogeneous and multi-homogeneous forms: parsing, canonicalization,
//! evaluation, coefficient normalization, and the lifts feeding the
//! hierarchy (odd-degree lift, tensor spectral-norm lift).
//!
//! Coefficients are carried as exact rationals from parse time (decimal
//! literals are base-10 exact, float inputs are dyadic exact) and converted
//! to binary floating point only where a matrix entry or an evaluation needs
//! one; a flat f64 term list is cached at construction for the hot paths.

use std::collections::BTreeMap;
use std::fmt;

use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::combinat::{multinomial_big, MultiIndex};
use crate::error::{Error, Result};

/// A real homogeneous form `p(x) = sum_gamma c_gamma x^gamma` with every
/// monomial of total degree `D`. The zero form (empty term map) is legal at
/// every degree.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousForm {
    n: usize,
    degree: u32,
    terms: BTreeMap<MultiIndex, BigRational>,
    float_terms: Vec<(MultiIndex, f64)>,
}

impl HomogeneousForm {
    /// Build from exact-rational terms. Zero coefficients are dropped; every
    /// key must have length `n` and degree `degree`.
    pub fn from_terms(
        n: usize,
        degree: u32,
        terms: impl IntoIterator<Item = (MultiIndex, BigRational)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (mi, c) in terms {
            if mi.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: mi.len() });
            }
            if mi.degree() != degree {
                return Err(Error::DegreeMismatch { expected: degree, found: mi.degree() });
            }
            if c.is_zero() {
                continue;
            }
            *map.entry(mi).or_insert_with(BigRational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        let float_terms = float_cache(&map);
        Ok(HomogeneousForm { n, degree, terms: map, float_terms })
    }

    /// Build from f64 coefficients (converted exactly; every f64 is dyadic).
    pub fn from_float_terms(
        n: usize,
        degree: u32,
        terms: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        Self::from_terms(
            n,
            degree,
            terms.into_iter().map(|(mi, c)| {
                (mi, BigRational::from_float(c).expect("finite coefficient"))
            }),
        )
    }

    pub fn zero(n: usize, degree: u32) -> Self {
        HomogeneousForm { n, degree, terms: BTreeMap::new(), float_terms: Vec::new() }
    }

    /// The quadratic form x^T S x of a symmetric matrix (n x n slice rows).
    pub fn from_symmetric_matrix(s: &nalgebra::DMatrix<f64>) -> Result<Self> {
        let n = s.nrows();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in i..n {
                let c = if i == j { s[(i, i)] } else { s[(i, j)] + s[(j, i)] };
                let mut e = vec![0u32; n];
                e[i] += 1;
                e[j] += 1;
                terms.push((MultiIndex::new(e), c));
            }
        }
        Self::from_float_terms(n, 2, terms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, BigRational> {
        &self.terms
    }

    pub fn float_terms(&self) -> &[(MultiIndex, f64)] {
        &self.float_terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Evaluate at a point by direct monomial summation.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        let mut acc = 0.0;
        for (mi, c) in &self.float_terms {
            acc += c * monomial_value(mi.exps(), x);
        }
        Ok(acc)
    }

    /// Euclidean gradient at a point.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        out.fill(0.0);
        for (mi, c) in &self.float_terms {
            for (i, &e) in mi.exps().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut v = c * e as f64;
                for (j, &ej) in mi.exps().iter().enumerate() {
                    let p = if j == i { ej - 1 } else { ej };
                    v *= x[j].powi(p as i32);
                }
                out[i] += v;
            }
        }
    }

    /// Multiply by the (n+1)-th coordinate of a one-variable extension:
    /// the form `y * p(x)` on R^{n+1}. Building block of the odd-degree lift.
    pub fn mul_by_new_variable(&self) -> HomogeneousForm {
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|(mi, c)| (mi.append(1), c.clone()))
            .collect();
        HomogeneousForm::from_terms(self.n + 1, self.degree + 1, terms)
            .expect("degree bookkeeping is consistent")
    }

    /// Normalized coefficients C_gamma = c_gamma / C(2d, gamma). Requires an
    /// even degree; odd-degree forms must be lifted first.
    pub fn normalize_coeffs(&self) -> Result<NormalizedCoeffs> {
        if !self.degree.is_multiple_of(2) {
            return Err(Error::OddDegree(self.degree));
        }
        let mut map = BTreeMap::new();
        for (mi, c) in &self.terms {
            let m = multinomial_big(self.degree, mi)?;
            map.insert(mi.clone(), c / BigRational::from_integer(m));
        }
        let float_terms = float_cache(&map);
        Ok(NormalizedCoeffs { n: self.n, two_d: self.degree, map, float_terms })
    }

    /// The squared Frobenius norm of the underlying symmetric tensor:
    /// sum_gamma c_gamma^2 / C(D, gamma).
    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (mi, c) in &self.float_terms {
            let m = multinomial_big(self.degree, mi).expect("keys are homogeneous");
            acc += c * c / m.to_f64().expect("monomial count fits f64");
        }
        acc.sqrt()
    }
}

fn float_cache(map: &BTreeMap<MultiIndex, BigRational>) -> Vec<(MultiIndex, f64)> {
    map.iter()
        .map(|(mi, c)| (mi.clone(), c.to_f64().expect("coefficient fits f64")))
        .collect()
}

fn monomial_value(exps: &[u32], x: &[f64]) -> f64 {
    let mut v = 1.0;
    for (e, xi) in exps.iter().zip(x) {
        if *e > 0 {
            v *= xi.powi(*e as i32);
        }
    }
    v
}

impl fmt::Display for HomogeneousForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (mi, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = c.abs();
            let mut printed = false;
            if !a.is_one() || mi.degree() == 0 {
                write!(f, "{a}")?;
                printed = true;
            }
            for (j, &e) in mi.exps().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if printed {
                    write!(f, "*")?;
                }
                write!(f, "x{}", j + 1)?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
                printed = true;
            }
        }
        Ok(())
    }
}

/// Coefficients in the convention `p(x) = sum_gamma C_gamma C(2d, gamma) x^gamma`.
/// These are the numbers that enter every Gram-operator entry.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCoeffs {
    n: usize,
    two_d: u32,
    map: BTreeMap<MultiIndex, BigRational>,
    float_terms: Vec<(MultiIndex, f64)>,
}

impl NormalizedCoeffs {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn two_d(&self) -> u32 {
        self.two_d
    }

    pub fn map(&self) -> &BTreeMap<MultiIndex, BigRational> {
        &self.map
    }

    pub fn float_terms(&self) -> &[(MultiIndex, f64)] {
        &self.float_terms
    }

    /// Invert the normalization: c_gamma = C_gamma * C(2d, gamma). Exact.
    pub fn denormalize(&self) -> HomogeneousForm {
        let terms: Vec<_> = self
            .map
            .iter()
            .map(|(mi, c)| {
                let m = multinomial_big(self.two_d, mi).expect("keys are homogeneous");
                (mi.clone(), c * BigRational::from_integer(m))
            })
            .collect();
        HomogeneousForm::from_terms(self.n, self.two_d, terms).expect("keys already validated")
    }
}

/// Key of a multi-homogeneous term: one exponent vector per variable group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndexTuple(pub Vec<MultiIndex>);

impl MultiIndexTuple {
    pub fn factors(&self) -> &[MultiIndex] {
        &self.0
    }
}

/// A real multi-homogeneous form on variable groups of sizes `n_1..n_m`,
/// of multidegree `D_1..D_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiForm {
    factors: Vec<(usize, u32)>,
    terms: BTreeMap<MultiIndexTuple, BigRational>,
    float_terms: Vec<(MultiIndexTuple, f64)>,
}

impl MultiForm {
    pub fn from_terms(
        factors: Vec<(usize, u32)>,
        terms: impl IntoIterator<Item = (MultiIndexTuple, BigRational)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (key, c) in terms {
            if key.0.len() != factors.len() {
                return Err(Error::DimensionMismatch {
                    expected: factors.len(),
                    found: key.0.len(),
                });
            }
            for (mi, &(ni, di)) in key.0.iter().zip(&factors) {
                if mi.len() != ni {
                    return Err(Error::DimensionMismatch { expected: ni, found: mi.len() });
                }
                if mi.degree() != di {
                    return Err(Error::DegreeMismatch { expected: di, found: mi.degree() });
                }
            }
            if c.is_zero() {
                continue;
            }
            *map.entry(key).or_insert_with(BigRational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        let float_terms = map
            .iter()
            .map(|(k, c)| (k.clone(), c.to_f64().expect("coefficient fits f64")))
            .collect();
        Ok(MultiForm { factors, terms: map, float_terms })
    }

    pub fn from_homogeneous(p: &HomogeneousForm) -> Self {
        let terms: Vec<_> = p
            .terms
            .iter()
            .map(|(mi, c)| (MultiIndexTuple(vec![mi.clone()]), c.clone()))
            .collect();
        MultiForm::from_terms(vec![(p.n(), p.degree())], terms).expect("single factor is valid")
    }

    pub fn factors(&self) -> &[(usize, u32)] {
        &self.factors
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndexTuple, BigRational> {
        &self.terms
    }

    pub fn float_terms(&self) -> &[(MultiIndexTuple, f64)] {
        &self.float_terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The single-factor form, when `m == 1`.
    pub fn to_homogeneous(&self) -> Option<HomogeneousForm> {
        if self.factors.len() != 1 {
            return None;
        }
        let (n, d) = self.factors[0];
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|(k, c)| (k.0[0].clone(), c.clone()))
            .collect();
        Some(HomogeneousForm::from_terms(n, d, terms).expect("validated on construction"))
    }

    /// Evaluate at one point per factor.
    pub fn evaluate(&self, points: &[&[f64]]) -> Result<f64> {
        if points.len() != self.factors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.factors.len(),
                found: points.len(),
            });
        }
        for (p, &(ni, _)) in points.iter().zip(&self.factors) {
            if p.len() != ni {
                return Err(Error::DimensionMismatch { expected: ni, found: p.len() });
            }
        }
        let mut acc = 0.0;
        for (key, c) in &self.float_terms {
            let mut v = *c;
            for (mi, p) in key.0.iter().zip(points) {
                v *= monomial_value(mi.exps(), p);
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Euclidean gradient with respect to factor `j`'s variables.
    pub fn gradient_factor(&self, points: &[&[f64]], j: usize, out: &mut [f64]) {
        out.fill(0.0);
        for (key, c) in &self.float_terms {
            let mut outer = *c;
            for (f, (mi, p)) in key.0.iter().zip(points).enumerate() {
                if f != j {
                    outer *= monomial_value(mi.exps(), p);
                }
            }
            let mi = &key.0[j];
            let x = points[j];
            for (i, &e) in mi.exps().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut v = outer * e as f64;
                for (l, &el) in mi.exps().iter().enumerate() {
                    let pw = if l == i { el - 1 } else { el };
                    v *= x[l].powi(pw as i32);
                }
                out[i] += v;
            }
        }
    }

    /// Squared-coefficient Frobenius norm of the underlying tensor.
    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (key, c) in &self.float_terms {
            let mut denom = 1.0;
            for (mi, &(_, di)) in key.0.iter().zip(&self.factors) {
                denom *= multinomial_big(di, mi)
                    .expect("keys are homogeneous")
                    .to_f64()
                    .expect("monomial count fits f64");
            }
            acc += c * c / denom;
        }
        acc.sqrt()
    }
}

/// Odd-degree lift: append an auxiliary variable to factor `j` (requiring
/// `D_j` odd) and multiply by its linear form. Returns the lifted form and
/// the positive scale relating the two sphere minima:
/// `p_min = scale * lifted_min`, `scale = (D+1)^{(D+1)/2} / D^{D/2}`.
pub fn odd_lift(p: &MultiForm, j: usize) -> Result<(MultiForm, f64)> {
    let (nj, dj) = *p
        .factors()
        .get(j)
        .ok_or_else(|| Error::InvalidProblem(format!("factor index {j} out of range")))?;
    if dj % 2 == 0 {
        return Err(Error::EvenDegree(dj));
    }
    let mut factors = p.factors().to_vec();
    factors[j] = (nj + 1, dj + 1);
    let terms: Vec<_> = p
        .terms()
        .iter()
        .map(|(key, c)| {
            let mut parts = key.0.clone();
            parts[j] = parts[j].append(1);
            (MultiIndexTuple(parts), c.clone())
        })
        .collect();
    let lifted = MultiForm::from_terms(factors, terms)?;
    let d = dj as f64;
    let scale = (d + 1.0).powf((d + 1.0) / 2.0) / d.powf(d / 2.0);
    Ok((lifted, scale))
}

/// A dense-or-sparse real tensor of order `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    entries: BTreeMap<Vec<usize>, f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, entries: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidProblem("tensor dimensions must be positive".into()));
        }
        let mut map = BTreeMap::new();
        for (idx, v) in entries {
            if idx.len() != dims.len() {
                return Err(Error::DimensionMismatch { expected: dims.len(), found: idx.len() });
            }
            for (i, &d) in idx.iter().zip(&dims) {
                if *i >= d {
                    return Err(Error::InvalidProblem(format!(
                        "tensor index {i} out of range for dimension {d}"
                    )));
                }
            }
            if v != 0.0 {
                *map.entry(idx).or_insert(0.0) += v;
            }
        }
        map.retain(|_, v| *v != 0.0);
        Ok(Tensor { dims, entries: map })
    }

    pub fn from_matrix(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut entries = BTreeMap::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    entries.insert(vec![i, j], m[(i, j)]);
                }
            }
        }
        Tensor { dims: vec![m.nrows(), m.ncols()], entries }
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm2(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            entries: self.entries.iter().map(|(k, v)| (k.clone(), v * s)).collect(),
        }
    }

    pub fn to_matrix(&self) -> Option<nalgebra::DMatrix<f64>> {
        if self.order() != 2 {
            return None;
        }
        let mut m = nalgebra::DMatrix::zeros(self.dims[0], self.dims[1]);
        for (idx, v) in &self.entries {
            m[(idx[0], idx[1])] = *v;
        }
        Some(m)
    }

    /// <T, v_1 x ... x v_m> for unit-intent vectors (no normalization applied).
    pub fn apply(&self, points: &[&[f64]]) -> Result<f64> {
        if points.len() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), found: points.len() });
        }
        let mut acc = 0.0;
        for (idx, v) in &self.entries {
            let mut t = *v;
            for (j, &i) in idx.iter().enumerate() {
                t *= points[j][i];
            }
            acc += t;
        }
        Ok(acc)
    }
}

/// The spectral-norm lift: from an order-m tensor T build the multiquadratic
/// form `r(v_1..v_m) = T(w_1..w_m) t_1...t_m` on the extended spaces
/// `U_j = R^{n_j+1}` (each `v_j = (w_j, t_j)`, auxiliary coordinate last).
/// Returns `(r, ||T||_2)`; the lift satisfies `||r||_2 = 2^{-m/2} ||T||_2`,
/// and the sphere minimum of `r` is `-2^{-m} ||T||_sigma`.
pub fn build_spectral_norm_form(t: &Tensor) -> Result<(MultiForm, f64)> {
    let m = t.order();
    let factors: Vec<(usize, u32)> = t.dims().iter().map(|&n| (n + 1, 2u32)).collect();
    let mut terms = Vec::with_capacity(t.entries().len());
    for (idx, v) in t.entries() {
        let mut parts = Vec::with_capacity(m);
        for (j, &i) in idx.iter().enumerate() {
            let nj = t.dims()[j];
            let mut exps = vec![0u32; nj + 1];
            exps[i] += 1;
            exps[nj] += 1;
            parts.push(MultiIndex::new(exps));
        }
        terms.push((
            MultiIndexTuple(parts),
            BigRational::from_float(*v).expect("finite tensor entry"),
        ));
    }
    let r = MultiForm::from_terms(factors, terms)?;
    Ok((r, t.norm2()))
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

fn perr(column: usize, message: impl Into<String>) -> Error {
    Error::Parse { column, message: message.into() }
}

impl<'a> Lexer<'a> {
    fn tokenize(text: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src: text.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            if lx.pos >= lx.src.len() {
                break;
            }
            let start = lx.pos;
            let c = lx.src[lx.pos];
            let tok = match c {
                b'+' => {
                    lx.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    lx.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    lx.pos += 1;
                    Tok::Star
                }
                b'/' => {
                    lx.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    lx.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RParen
                }
                b'0'..=b'9' | b'.' => lx.number()?,
                c if c.is_ascii_alphabetic() || c == b'_' => lx.ident(),
                other => {
                    return Err(perr(start + 1, format!("unexpected character '{}'", other as char)))
                }
            };
            out.push((tok, start + 1));
        }
        Ok(out)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<Tok> {
        let start = self.pos;
        let mut seen_dot = false;
        while self.pos < self.src.len() {
            match self.src[self.pos] {
                b'0'..=b'9' => self.pos += 1,
                b'.' if !seen_dot => {
                    seen_dot = true;
                    self.pos += 1;
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if text == "." {
            return Err(perr(start + 1, "malformed number"));
        }
        Ok(Tok::Num(decimal_to_rational(text, start + 1)?))
    }

    fn ident(&mut self) -> Tok {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        Tok::Ident(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string())
    }
}

/// Exact conversion of a decimal literal (base-10) to a rational.
fn decimal_to_rational(text: &str, column: usize) -> Result<BigRational> {
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    let num: num::BigInt = digits
        .parse()
        .map_err(|_| perr(column, format!("malformed number '{text}'")))?;
    let den = num::BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(BigRational::new(num, den))
}

/// Expansion state: a canonical term map plus the degree the subtree has
/// committed to. A subtree whose terms all cancelled still remembers its
/// degree, so `x1^2 - x1^2` is the degree-2 zero form.
struct Expanded {
    terms: BTreeMap<Vec<u32>, BigRational>,
    degree: u32,
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    vars: &'a [String],
    end_column: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|&(_, c)| c).unwrap_or(self.end_column)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expanded> {
        let mut acc = self.term()?;
        loop {
            let negate = match self.peek() {
                Some(Tok::Plus) => false,
                Some(Tok::Minus) => true,
                _ => break,
            };
            let op_col = self.column();
            self.bump();
            let mut rhs = self.term()?;
            if negate {
                for c in rhs.terms.values_mut() {
                    *c = -c.clone();
                }
            }
            acc = add_expanded(acc, rhs, op_col)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expanded> {
        let mut acc = self.factor()?;
        while matches!(self.peek(), Some(Tok::Star)) {
            self.bump();
            let rhs = self.factor()?;
            acc = mul_expanded(&acc, &rhs);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expanded> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                let mut inner = self.factor()?;
                for c in inner.terms.values_mut() {
                    *c = -c.clone();
                }
                Ok(inner)
            }
            Some(Tok::Plus) => {
                self.bump();
                self.factor()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expanded> {
        let base = self.atom()?;
        if !matches!(self.peek(), Some(Tok::Caret)) {
            return Ok(base);
        }
        self.bump();
        let col = self.column();
        let e = match self.bump() {
            Some(Tok::Num(r)) => {
                if !r.is_integer() {
                    return Err(perr(col, "fractional exponent is not allowed"));
                }
                r.to_integer().to_u32().ok_or_else(|| perr(col, "exponent too large"))?
            }
            Some(Tok::Minus) => return Err(perr(col, "negative exponent is not allowed")),
            _ => return Err(perr(col, "expected a nonnegative integer exponent after '^'")),
        };
        // repeated squaring is overkill at these sizes
        let mut acc = constant_expanded(BigRational::one(), self.vars.len());
        for _ in 0..e {
            acc = mul_expanded(&acc, &base);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<Expanded> {
        let col = self.column();
        match self.bump().cloned() {
            Some(Tok::Num(r)) => {
                // rational literal: NUM '/' NUM
                if matches!(self.peek(), Some(Tok::Slash)) {
                    self.bump();
                    let dcol = self.column();
                    match self.bump().cloned() {
                        Some(Tok::Num(den)) => {
                            if den.is_zero() {
                                return Err(perr(dcol, "division by zero in rational literal"));
                            }
                            Ok(constant_expanded(r / den, self.vars.len()))
                        }
                        _ => Err(perr(dcol, "expected a number after '/' (rational literal)")),
                    }
                } else {
                    Ok(constant_expanded(r, self.vars.len()))
                }
            }
            Some(Tok::Ident(name)) => {
                let i = self
                    .vars
                    .iter()
                    .position(|v| *v == name)
                    .ok_or_else(|| perr(col, format!("unknown variable '{name}'")))?;
                let mut exps = vec![0u32; self.vars.len()];
                exps[i] = 1;
                let mut terms = BTreeMap::new();
                terms.insert(exps, BigRational::one());
                Ok(Expanded { terms, degree: 1 })
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(perr(self.end_column, "unclosed '('")),
                }
            }
            Some(t) => Err(perr(col, format!("unexpected token {t:?}"))),
            None => Err(perr(col, "unexpected end of expression")),
        }
    }
}

fn constant_expanded(c: BigRational, n: usize) -> Expanded {
    let mut terms = BTreeMap::new();
    if !c.is_zero() {
        terms.insert(vec![0u32; n], c);
    }
    Expanded { terms, degree: 0 }
}

fn add_expanded(mut a: Expanded, b: Expanded, op_col: usize) -> Result<Expanded> {
    // adding a vanished subtree is always fine (zero lies in every degree)
    if b.terms.is_empty() && b.degree == 0 {
        return Ok(a);
    }
    if a.terms.is_empty() && a.degree == 0 {
        return Ok(b);
    }
    if a.terms.is_empty() {
        a.degree = a.degree.max(b.degree);
        a.terms = b.terms;
        if !a.terms.is_empty() && a.degree != b.degree {
            // unreachable by construction; degrees equal when terms nonempty
        }
        return Ok(a);
    }
    if b.terms.is_empty() {
        return Ok(a);
    }
    if a.degree != b.degree {
        return Err(perr(
            op_col,
            format!("non-homogeneous expression: degree {} combined with degree {}", a.degree, b.degree),
        ));
    }
    for (k, c) in b.terms {
        let e = a.terms.entry(k).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            // keep map canonical; the committed degree survives
        }
    }
    a.terms.retain(|_, c| !c.is_zero());
    Ok(a)
}

fn mul_expanded(a: &Expanded, b: &Expanded) -> Expanded {
    let mut terms: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
    for (ka, ca) in &a.terms {
        for (kb, cb) in &b.terms {
            let k: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *terms.entry(k).or_insert_with(BigRational::zero) += ca * cb;
        }
    }
    terms.retain(|_, c| !c.is_zero());
    Expanded { terms, degree: a.degree + b.degree }
}

/// Parse an arithmetic expression over the named variables (+, -, *, ^ with
/// nonnegative integer exponents, parentheses, decimal/rational literals)
/// into canonical monomial form. All monomials must share one total degree.
pub fn parse_form(text: &str, variables: &[String]) -> Result<HomogeneousForm> {
    if variables.is_empty() {
        return Err(Error::InvalidProblem("at least one variable is required".into()));
    }
    {
        let mut seen = std::collections::HashSet::new();
        for v in variables {
            if !seen.insert(v) {
                return Err(Error::InvalidProblem(format!("duplicate variable '{v}'")));
            }
        }
    }
    let toks = Lexer::tokenize(text)?;
    let mut p = Parser { toks: &toks, pos: 0, vars: variables, end_column: text.chars().count() + 1 };
    let expanded = p.expr()?;
    if p.pos != toks.len() {
        return Err(perr(p.column(), "trailing input after expression"));
    }
    HomogeneousForm::from_terms(
        variables.len(),
        expanded.degree,
        expanded.terms.into_iter().map(|(k, c)| (MultiIndex::new(k), c)),
    )
}

/// Parse a multi-homogeneous form over the given variable groups: the text is
/// parsed over the concatenated variables, then every monomial is split per
/// group and checked for a uniform per-group degree.
pub fn parse_multi_form(text: &str, groups: &[Vec<String>]) -> Result<MultiForm> {
    if groups.is_empty() {
        return Err(Error::InvalidProblem("at least one variable group is required".into()));
    }
    let flat: Vec<String> = groups.iter().flatten().cloned().collect();
    let form = parse_form(text, &flat)?;
    if form.is_zero() {
        return Err(Error::InvalidProblem(
            "cannot infer the multidegree of a zero form; provide structured terms instead".into(),
        ));
    }
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let mut degrees: Option<Vec<u32>> = None;
    let mut terms = Vec::new();
    for (mi, c) in form.terms() {
        let mut parts = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for &s in &sizes {
            parts.push(MultiIndex::new(mi.exps()[offset..offset + s].to_vec()));
            offset += s;
        }
        let degs: Vec<u32> = parts.iter().map(|p| p.degree()).collect();
        match &degrees {
            None => degrees = Some(degs),
            Some(d0) => {
                if *d0 != degs {
                    return Err(Error::InvalidProblem(format!(
                        "not multi-homogeneous: group degrees {degs:?} differ from {d0:?}"
                    )));
                }
            }
        }
        terms.push((MultiIndexTuple(parts), c.clone()));
    }
    let degrees = degrees.expect("nonzero form has terms");
    let factors: Vec<(usize, u32)> = sizes.into_iter().zip(degrees).collect();
    MultiForm::from_terms(factors, terms)
}

/// The homogeneous Motzkin form x1^2 x2^2 (x1^2 + x2^2 - 3 x3^2) + x3^6.
/// Nonnegative on the sphere with minimum exactly 0; the standard sparse
/// stress case for the hierarchy.
pub fn motzkin() -> HomogeneousForm {
    let vars: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
    parse_form("x1^2*x2^2*(x1^2 + x2^2 - 3*x3^2) + x3^6", &vars).expect("fixed text parses")
}

/// The form ||x||^{2d} on R^n in monomial coordinates.
pub fn norm_power_form(n: usize, d: u32) -> HomogeneousForm {
    let terms: Vec<_> = crate::combinat::enumerate_basis(n, d)
        .into_iter()
        .map(|h| {
            let c = multinomial_big(d, &h).expect("degree matches");
            let g = MultiIndex::new(h.exps().iter().map(|e| 2 * e).collect());
            (g, BigRational::from_integer(c))
        })
        .collect();
    HomogeneousForm::from_terms(n, 2 * d, terms).expect("construction is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn parse_motzkin() {
        let p = motzkin();
        assert_eq!(p.degree(), 6);
        assert_eq!(p.num_terms(), 4);
        let t = p.terms();
        assert_eq!(t[&mi(&[4, 2, 0])], BigRational::from_integer(1.into()));
        assert_eq!(t[&mi(&[2, 4, 0])], BigRational::from_integer(1.into()));
        assert_eq!(t[&mi(&[2, 2, 2])], BigRational::from_integer((-3).into()));
        assert_eq!(t[&mi(&[0, 0, 6])], BigRational::from_integer(1.into()));
    }

    #[test]
    fn parse_cancellation_keeps_degree() {
        let p = parse_form("x1^2 - x1^2", &vars(&["x1", "x2"])).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn parse_rejects_inhomogeneous() {
        let err = parse_form("x1*x2 + x3", &vars(&["x1", "x2", "x3"])).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("non-homogeneous")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn parse_reports_position() {
        let err = parse_form("x1^2 + x9^2", &vars(&["x1", "x2"])).unwrap_err();
        match err {
            Error::Parse { column, .. } => assert_eq!(column, 8),
            other => panic!("unexpected error {other}"),
        }
        assert!(parse_form("x1^-2", &vars(&["x1"])).is_err());
        assert!(parse_form("x1^1.5", &vars(&["x1"])).is_err());
    }

    #[test]
    fn parse_rational_and_decimal_literals() {
        let p = parse_form("1/2*x1^2 + 0.25*x2^2", &vars(&["x1", "x2"])).unwrap();
        assert_eq!(p.terms()[&mi(&[2, 0])], BigRational::new(1.into(), 2.into()));
        assert_eq!(p.terms()[&mi(&[0, 2])], BigRational::new(1.into(), 4.into()));
    }

    #[test]
    fn evaluate_motzkin() {
        let p = motzkin();
        let s = 1.0 / 3.0f64.sqrt();
        assert!(p.evaluate(&[s, s, s]).unwrap().abs() < 1e-15);
        assert_eq!(p.evaluate(&[0.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(p.evaluate(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(p.evaluate(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn normalize_norm4() {
        let p = norm_power_form(2, 2); // ||x||^4 on R^2
        let nc = p.normalize_coeffs().unwrap();
        assert_eq!(nc.map()[&mi(&[4, 0])], BigRational::from_integer(1.into()));
        assert_eq!(nc.map()[&mi(&[2, 2])], BigRational::new(1.into(), 3.into()));
        assert_eq!(nc.map()[&mi(&[0, 4])], BigRational::from_integer(1.into()));
        assert_eq!(nc.denormalize(), p);
    }

    #[test]
    fn normalize_cross_term() {
        let p = parse_form("x1*x3", &vars(&["x1", "x2", "x3"])).unwrap();
        let nc = p.normalize_coeffs().unwrap();
        assert_eq!(nc.map()[&mi(&[1, 0, 1])], BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn normalize_rejects_odd() {
        let p = parse_form("x1^3", &vars(&["x1"])).unwrap();
        assert!(matches!(p.normalize_coeffs(), Err(Error::OddDegree(3))));
        let z = HomogeneousForm::zero(2, 4);
        assert!(z.normalize_coeffs().unwrap().map().is_empty());
    }

    #[test]
    fn odd_lift_scales() {
        let p = parse_form("x1^3", &vars(&["x1"])).unwrap();
        let mp = MultiForm::from_homogeneous(&p);
        let (lifted, scale) = odd_lift(&mp, 0).unwrap();
        assert_eq!(lifted.factors(), &[(2, 4)]);
        assert!((scale - 16.0 / (3.0f64.sqrt() * 3.0)).abs() < 1e-12);
        assert!((scale - 3.0792014357).abs() < 1e-9);

        let lin = parse_form("x1", &vars(&["x1", "x2"])).unwrap();
        let (_, s1) = odd_lift(&MultiForm::from_homogeneous(&lin), 0).unwrap();
        assert!((s1 - 2.0).abs() < 1e-14);

        let even = parse_form("x1^2", &vars(&["x1"])).unwrap();
        assert!(odd_lift(&MultiForm::from_homogeneous(&even), 0).is_err());
    }

    #[test]
    fn spectral_lift_norm_ratio() {
        // random 3x3: ||r||_2 = ||T||_2 / 2
        let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin());
        let t = Tensor::from_matrix(&m);
        let (r, norm2) = build_spectral_norm_form(&t).unwrap();
        assert!((norm2 - t.norm2()).abs() < 1e-15);
        assert!((r.frobenius_norm() - norm2 / 2.0).abs() < 1e-12 * norm2);
        // m=1 single entry
        let v = Tensor::new(vec![1], vec![(vec![0], 1.0)]).unwrap();
        let (r1, n1) = build_spectral_norm_form(&v).unwrap();
        assert_eq!(n1, 1.0);
        assert_eq!(r1.factors(), &[(2, 2)]);
        // r1(v) = v1 v2
        let val = r1.evaluate(&[&[0.6, 0.8]]).unwrap();
        assert!((val - 0.48).abs() < 1e-15);
    }

    #[test]
    fn multiform_roundtrip_and_eval() {
        let groups = vec![vars(&["x1", "x2"]), vars(&["y1", "y2"])];
        let p = parse_multi_form("(x1*y1 + x2*y2)^2", &groups).unwrap();
        assert_eq!(p.factors(), &[(2, 2), (2, 2)]);
        let x = [0.6, 0.8];
        let y = [0.8, -0.6];
        let v = p.evaluate(&[&x, &y]).unwrap();
        let direct = (x[0] * y[0] + x[1] * y[1]).powi(2);
        assert!((v - direct).abs() < 1e-15);
        // orthogonal pair gives 0
        assert!(v.abs() < 1e-15);
        let bad = parse_multi_form("x1*y1^2 + x2*y2", &groups);
        assert!(bad.is_err());
    }

    #[test]
    fn display_roundtrip_corpus() {
        let v3 = vars(&["x1", "x2", "x3"]);
        let mut corpus: Vec<String> = vec![
            "x1^2*x2^2*(x1^2 + x2^2 - 3*x3^2) + x3^6".into(),
            "x1*x3".into(),
            "(x1 + x2 + x3)^2".into(),
            "1/3*x1^4 - 0.125*x2^4 + x3^4".into(),
            "-x1^2 - x2^2".into(),
        ];
        // generated corpus: random-ish coefficient grids
        for a in 1..=25 {
            corpus.push(format!("{a}/7*x1^3 - {}*x1*x2^2 + x2*x3^2 - x3^3", a * a));
            corpus.push(format!("(x1 - {a}*x2)^2*(x1 + x3)^2"));
        }
        assert!(corpus.len() >= 50);
        for text in corpus {
            let p = parse_form(&text, &v3).unwrap();
            let printed = format!("{p}");
            let q = parse_form(&printed, &v3).unwrap();
            assert_eq!(p, q, "round trip failed for '{text}' -> '{printed}'");
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = motzkin();
        let x = [0.3, -0.7, 0.64];
        let mut g = [0.0; 3];
        p.gradient(&x, &mut g);
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (p.evaluate(&xp).unwrap() - p.evaluate(&xm).unwrap()) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6, "i={i}: {} vs {fd}", g[i]);
        }
    }
}
