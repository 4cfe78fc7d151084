//! Truncated polynomials in the odd times `t₁, t₃, t₅, …` with exact rational
//! coefficients, and Hirota bilinear derivatives.
//!
//! Two variable families are supported: the plain times `t` and a second set
//! `t̄` used by the bilinear series. The degree cap applies to each family
//! separately (`deg t_m = m`), so the set of dropped monomials is an ideal and
//! truncation commutes with multiplication.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ring::{parse_rational, rat_int, rational_to_f64, Rational, Ring};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("degree caps differ: {0} vs {1}")]
    CapMismatch(u32, u32),
    #[error("exponential needs a zero constant term, found {0}")]
    NonzeroConstant(Rational),
    #[error("variable index {0} is not a positive odd integer")]
    EvenIndex(u32),
    #[error("no value assigned to {0}")]
    MissingAssignment(Var),
    #[error("malformed polynomial: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    T,
    TBar,
}

/// A single odd-indexed time variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub family: Family,
    pub index: u32,
}

impl Var {
    pub fn t(index: u32) -> Self {
        Self::checked(Family::T, index).expect("odd index")
    }

    pub fn tbar(index: u32) -> Self {
        Self::checked(Family::TBar, index).expect("odd index")
    }

    pub fn checked(family: Family, index: u32) -> Result<Self, PolyError> {
        if index % 2 == 0 {
            return Err(PolyError::EvenIndex(index));
        }
        Ok(Self { family, index })
    }

    fn key(&self) -> String {
        match self.family {
            Family::T => self.index.to_string(),
            Family::TBar => format!("bar:{}", self.index),
        }
    }

    fn from_key(key: &str) -> Result<Self, PolyError> {
        let (family, idx) = match key.strip_prefix("bar:") {
            Some(rest) => (Family::TBar, rest),
            None => (Family::T, key),
        };
        let index: u32 = idx
            .trim()
            .parse()
            .map_err(|_| PolyError::Malformed(format!("bad variable key {key:?}")))?;
        Self::checked(family, index)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::T => write!(f, "t{}", self.index),
            Family::TBar => write!(f, "tbar{}", self.index),
        }
    }
}

/// Sorted sparse exponent vector.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Self(vec![(v, 1)])
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, u32)>) -> Self {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v).or_default() += e;
        }
        Self(map.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    pub fn pairs(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0
            .iter()
            .find(|(w, _)| *w == v)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    pub fn degree_in(&self, family: Family) -> u32 {
        self.0
            .iter()
            .filter(|(v, _)| v.family == family)
            .map(|(v, e)| v.index * e)
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(v, e)| v.index * e).sum()
    }

    fn fits(&self, cap: u32) -> bool {
        self.degree_in(Family::T) <= cap && self.degree_in(Family::TBar) <= cap
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(v, e)| if *e == 1 { v.to_string() } else { format!("{v}^{e}") })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Truncated polynomial with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedPoly {
    terms: BTreeMap<Monomial, Rational>,
    cap: u32,
}

impl GradedPoly {
    pub fn zero(cap: u32) -> Self {
        Self { terms: BTreeMap::new(), cap }
    }

    pub fn one(cap: u32) -> Self {
        Self::constant(Rational::one(), cap)
    }

    pub fn constant(c: Rational, cap: u32) -> Self {
        let mut p = Self::zero(cap);
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(v: Var, cap: u32) -> Self {
        Self::term(Monomial::var(v), Rational::one(), cap)
    }

    pub fn term(m: Monomial, c: Rational, cap: u32) -> Self {
        let mut p = Self::zero(cap);
        p.add_term(m, c);
        p
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    /// Adds `c·m`, dropping it when `m` exceeds the cap.
    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() || !m.fits(self.cap) {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&Monomial::one())
    }

    /// Same polynomial under a smaller (or equal) cap.
    pub fn truncate(&self, cap: u32) -> Self {
        let cap = cap.min(self.cap);
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m.fits(cap))
            .map(|(m, c)| (m.clone(), c.clone()))
            .collect();
        Self { terms, cap }
    }

    /// Raises the cap without adding information; the caller is responsible
    /// for knowing the polynomial is exact at the larger cap.
    pub fn with_cap(mut self, cap: u32) -> Self {
        if cap < self.cap {
            return self.truncate(cap);
        }
        self.cap = cap;
        self
    }

    pub fn is_homogeneous(&self, degree: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == degree)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.cap);
        }
        let terms = self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect();
        Self { terms, cap: self.cap }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.cap = self.cap.min(other.cap);
        if out.cap < self.cap {
            out = out.truncate(out.cap);
        }
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect();
        Self { terms, cap: self.cap }
    }

    /// Exact product; caps must agree.
    pub fn try_mul(&self, other: &Self) -> Result<Self, PolyError> {
        if self.cap != other.cap {
            return Err(PolyError::CapMismatch(self.cap, other.cap));
        }
        Ok(self.mul_truncated(other, self.cap))
    }

    fn mul_truncated(&self, other: &Self, cap: u32) -> Self {
        let mut out = Self::zero(cap);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                if m.fits(cap) {
                    out.add_term(m, ca * cb);
                }
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.cap);
        for _ in 0..k {
            acc = acc.mul_truncated(self, self.cap);
        }
        acc
    }

    /// Truncated exponential of a polynomial without constant term.
    pub fn exp(&self) -> Result<Self, PolyError> {
        let c0 = self.constant_term();
        if !c0.is_zero() {
            return Err(PolyError::NonzeroConstant(c0));
        }
        let mut result = Self::one(self.cap);
        let mut power = Self::one(self.cap);
        let mut k = 1i64;
        loop {
            power = power.mul_truncated(self, self.cap).scale(&Rational::new(1.into(), k.into()));
            if power.is_zero() {
                break;
            }
            result = result.add(&power);
            k += 1;
        }
        Ok(result)
    }

    /// ∂/∂v; the cap shrinks by `deg v` since higher coefficients are unknown.
    pub fn derivative(&self, v: Var) -> Self {
        let cap = self.cap.saturating_sub(v.index);
        let mut out = Self::zero(cap);
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let pairs = m
                .pairs()
                .iter()
                .map(|&(w, f)| if w == v { (w, f - 1) } else { (w, f) });
            out.add_term(Monomial::from_pairs(pairs), c * rat_int(e as i64));
        }
        out
    }

    fn derivative_multi(&self, orders: &[(Var, u32)]) -> Self {
        let mut p = self.clone();
        for &(v, k) in orders {
            for _ in 0..k {
                p = p.derivative(v);
            }
        }
        p
    }

    /// Variables that occur in some term.
    pub fn variables(&self) -> Vec<Var> {
        let mut vars: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.pairs().iter().map(|(v, _)| *v))
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }

    pub fn eval_rational(&self, assignment: &BTreeMap<Var, Rational>) -> Result<Rational, PolyError> {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for &(v, e) in m.pairs() {
                let x = assignment.get(&v).ok_or(PolyError::MissingAssignment(v))?;
                term *= num_traits::pow(x.clone(), e as usize);
            }
            total += term;
        }
        Ok(total)
    }

    pub fn eval_f64(&self, assignment: &BTreeMap<Var, f64>) -> Result<f64, PolyError> {
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut term = rational_to_f64(c);
            for &(v, e) in m.pairs() {
                let x = assignment.get(&v).ok_or(PolyError::MissingAssignment(v))?;
                term *= x.powi(e as i32);
            }
            total += term;
        }
        Ok(total)
    }

    /// Evaluation where every variable outside `assignment` is zero.
    pub fn eval_rational_sparse(&self, assignment: &BTreeMap<Var, Rational>) -> Rational {
        let mut total = Rational::zero();
        'terms: for (m, c) in &self.terms {
            let mut term = c.clone();
            for &(v, e) in m.pairs() {
                match assignment.get(&v) {
                    Some(x) => term *= num_traits::pow(x.clone(), e as usize),
                    None => continue 'terms,
                }
            }
            total += term;
        }
        total
    }

    pub fn eval_f64_sparse(&self, assignment: &BTreeMap<Var, f64>) -> f64 {
        let mut total = 0.0;
        'terms: for (m, c) in &self.terms {
            let mut term = rational_to_f64(c);
            for &(v, e) in m.pairs() {
                match assignment.get(&v) {
                    Some(x) => term *= x.powi(e as i32),
                    None => continue 'terms,
                }
            }
            total += term;
        }
        total
    }

    /// Renames every `t` variable to the `t̄` family (and vice versa).
    pub fn swap_families(&self) -> Self {
        let mut out = Self::zero(self.cap);
        for (m, c) in &self.terms {
            let pairs = m.pairs().iter().map(|&(v, e)| {
                let family = match v.family {
                    Family::T => Family::TBar,
                    Family::TBar => Family::T,
                };
                (Var { family, index: v.index }, e)
            });
            out.add_term(Monomial::from_pairs(pairs), c.clone());
        }
        out
    }

    pub fn max_abs_coeff(&self) -> Rational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

impl fmt::Display for GradedPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| if m.is_one() { c.to_string() } else { format!("{c}*{m}") })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Ring for GradedPoly {
    fn zero_like(&self) -> Self {
        Self::zero(self.cap)
    }
    fn one_like(&self) -> Self {
        Self::one(self.cap)
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
    fn add_ref(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self.sub(other)
    }
    /// Products of differently capped values truncate to the smaller cap.
    fn mul_ref(&self, other: &Self) -> Self {
        self.mul_truncated(other, self.cap.min(other.cap))
    }
    fn neg_ref(&self) -> Self {
        self.neg()
    }
}

fn binomial(n: u32, k: u32) -> Rational {
    let mut acc = Rational::one();
    for i in 0..k {
        acc = acc * rat_int((n - i) as i64) / rat_int((i + 1) as i64);
    }
    acc
}

/// Hirota derivative `D^orders f·g = ∂_y^orders [f(t+y) g(t−y)]_{y=0}`.
///
/// Expanded by the Leibniz rule
/// `Σ_k ∏_v C(o_v, k_v) (−1)^{o_v−k_v} ∂^k f · ∂^{o−k} g`.
/// The result carries cap `cap − Σ o_v·deg v`, the range where it is exact.
pub fn hirota_d(f: &GradedPoly, g: &GradedPoly, orders: &[(Var, u32)]) -> Result<GradedPoly, PolyError> {
    if f.cap != g.cap {
        return Err(PolyError::CapMismatch(f.cap, g.cap));
    }
    let weight: u32 = orders.iter().map(|(v, o)| v.index * o).sum();
    if weight > f.cap {
        warn!("Hirota order weight {weight} exceeds degree cap {}; returning 0", f.cap);
        return Ok(GradedPoly::zero(0));
    }
    let cap = f.cap - weight;
    let orders: Vec<(Var, u32)> = orders.iter().copied().filter(|&(_, o)| o > 0).collect();
    let mut out = GradedPoly::zero(cap);
    let mut ks = vec![0u32; orders.len()];
    loop {
        let mut coeff = Rational::one();
        for (i, &(_, o)) in orders.iter().enumerate() {
            coeff *= binomial(o, ks[i]);
            if (o - ks[i]) % 2 == 1 {
                coeff = -coeff;
            }
        }
        let left: Vec<(Var, u32)> = orders.iter().zip(&ks).map(|(&(v, _), &k)| (v, k)).collect();
        let right: Vec<(Var, u32)> = orders.iter().zip(&ks).map(|(&(v, o), &k)| (v, o - k)).collect();
        let df = f.derivative_multi(&left).truncate(cap).with_cap(cap);
        let dg = g.derivative_multi(&right).truncate(cap).with_cap(cap);
        out = out.add(&df.mul_truncated(&dg, cap).scale(&coeff));
        // odometer over 0..=o_v
        let mut i = 0;
        loop {
            if i == ks.len() {
                return Ok(out);
            }
            ks[i] += 1;
            if ks[i] <= orders[i].1 {
                break;
            }
            ks[i] = 0;
            i += 1;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    monomial: BTreeMap<String, u32>,
    coeff: String,
}

impl Serialize for GradedPoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let list: Vec<TermJson> = self
            .terms
            .iter()
            .map(|(m, c)| TermJson {
                monomial: m.pairs().iter().map(|(v, e)| (v.key(), *e)).collect(),
                coeff: c.to_string(),
            })
            .collect();
        list.serialize(serializer)
    }
}

/// Deserializes a bare term list; the cap is set to the largest family
/// degree present, so the value is exact as written.
impl<'de> Deserialize<'de> for GradedPoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let list: Vec<TermJson> = Vec::deserialize(deserializer)?;
        let mut parsed = Vec::new();
        for t in list {
            let mut pairs = Vec::new();
            for (k, e) in t.monomial {
                pairs.push((Var::from_key(&k).map_err(D::Error::custom)?, e));
            }
            let c = parse_rational(&t.coeff)
                .ok_or_else(|| D::Error::custom(format!("bad coefficient {:?}", t.coeff)))?;
            parsed.push((Monomial::from_pairs(pairs), c));
        }
        let cap = parsed
            .iter()
            .map(|(m, _)| m.degree_in(Family::T).max(m.degree_in(Family::TBar)))
            .max()
            .unwrap_or(0);
        let mut p = GradedPoly::zero(cap);
        for (m, c) in parsed {
            p.add_term(m, c);
        }
        Ok(p)
    }
}

/// Assignment helper: `t_k = value` for the listed odd indices of one family.
pub fn assignment<T: Clone>(family: Family, values: &[(u32, T)]) -> BTreeMap<Var, T> {
    values
        .iter()
        .map(|(k, x)| (Var { family, index: *k }, x.clone()))
        .collect()
}
