//! The partition sums S₀–S₅ and S₀₀, their coefficient systems, the closed
//! forms at `t = t∞`, and the random strict-partition models built on them.
//!
//! All series go through one kernel ([`evaluate`]) parameterized by a
//! [`SeriesBackend`]: the exact backend produces truncated polynomials in
//! `t` and `t̄`, the numeric backend produces `f64` values at fixed times.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partitions::{
    delta_star, delta_star_seq, delta_star_tilde4, enumerate_dp, enumerate_dp2,
    enumerate_dp_prime, StrictPartition,
};
use crate::pfaffian::{det_ring, pfaffian_ring, PfaffianError, SkewMatrix};
use crate::polyring::{Family, GradedPoly, Var};
use crate::qfunctions::{QCache, QError, QScalarCache};
use crate::ring::{
    factorial_rational, parse_rational, rational_to_f64, Rational, Ring, Scalar,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SumError {
    #[error("exact evaluation requested but {0} is only known as a float")]
    InexactData(String),
    #[error("negative weight {weight} at partition {partition}")]
    NegativeWeight { partition: StrictPartition, weight: f64 },
    #[error("partition function vanishes on the truncated support")]
    EmptySupport,
    #[error("partitions {0} and {1} have different lengths")]
    LengthMismatch(StrictPartition, StrictPartition),
    #[error("Gamma pole at n = {0}")]
    GammaPole(u32),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Q(#[from] QError),
    #[error(transparent)]
    Pfaffian(#[from] PfaffianError),
}

/// A coefficient known either exactly or as a float.
#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(Rational),
    Float(f64),
}

impl Number {
    pub fn zero() -> Self {
        Number::Exact(Rational::zero())
    }

    pub fn one() -> Self {
        Number::Exact(Rational::one())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => rational_to_f64(r),
            Number::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&Rational> {
        match self {
            Number::Exact(r) => Some(r),
            Number::Float(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Exact(r) => r.is_zero(),
            Number::Float(x) => *x == 0.0,
        }
    }

    /// Exact zero absorbs floats, so excluded terms stay exactly excluded.
    pub fn mul(&self, other: &Number) -> Number {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => Number::Exact(a * b),
            (Number::Exact(a), _) | (_, Number::Exact(a)) if a.is_zero() => Number::zero(),
            _ => Number::Float(self.to_f64() * other.to_f64()),
        }
    }

    pub fn add(&self, other: &Number) -> Number {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => Number::Exact(a + b),
            _ => Number::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn neg(&self) -> Number {
        match self {
            Number::Exact(a) => Number::Exact(-a),
            Number::Float(x) => Number::Float(-x),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) => write!(f, "{r}"),
            Number::Float(x) => write!(f, "{x:e}"),
        }
    }
}

/// JSON form: strings are exact rationals (`"3/4"`, `"0.25"`), integers are
/// exact, other JSON numbers are floats.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NumberJson {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Serialize for Number {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Number::Exact(r) => r.to_string().serialize(s),
            Number::Float(x) => x.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match NumberJson::deserialize(d)? {
            NumberJson::Int(i) => Ok(Number::Exact(Rational::from_integer(i.into()))),
            NumberJson::Float(x) => Ok(Number::Float(x)),
            NumberJson::Str(s) => parse_rational(&s)
                .map(Number::Exact)
                .ok_or_else(|| D::Error::custom(format!("not a rational: {s:?}"))),
        }
    }
}

/// The constant `U_n⁽⁰⁾`.
#[derive(Clone, Debug, PartialEq)]
pub enum U0 {
    /// `U = +∞`: the mode is excluded.
    Infinite,
    /// A finite real value of `U⁽⁰⁾`.
    Log(f64),
    /// `e^{−U⁽⁰⁾}` given exactly.
    Boltzmann(Rational),
    /// `e^{−U⁽⁰⁾}` given as a float, possibly negative.
    BoltzmannFloat(f64),
}

impl U0 {
    fn boltzmann(&self) -> Number {
        match self {
            U0::Infinite => Number::zero(),
            U0::Log(u) if *u == 0.0 => Number::one(),
            U0::Log(u) => Number::Float((-u).exp()),
            U0::Boltzmann(r) => Number::Exact(r.clone()),
            U0::BoltzmannFloat(x) => Number::Float(*x),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum U0Json {
    Value(f64),
    Text(String),
    Boltzmann { boltzmann: Number },
}

impl Serialize for U0 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            U0::Infinite => "inf".serialize(s),
            U0::Log(u) => u.serialize(s),
            U0::Boltzmann(r) => U0Json::Boltzmann { boltzmann: Number::Exact(r.clone()) }.serialize(s),
            U0::BoltzmannFloat(x) => U0Json::Boltzmann { boltzmann: Number::Float(*x) }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for U0 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match U0Json::deserialize(d)? {
            U0Json::Value(u) => Ok(U0::Log(u)),
            U0Json::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(U0::Infinite),
            U0Json::Text(t) => t
                .parse::<f64>()
                .map(U0::Log)
                .map_err(|_| D::Error::custom(format!("bad U0 value {t:?}"))),
            U0Json::Boltzmann { boltzmann: Number::Exact(r) } => Ok(U0::Boltzmann(r)),
            U0Json::Boltzmann { boltzmann: Number::Float(x) } => Ok(U0::BoltzmannFloat(x)),
        }
    }
}

fn default_u0() -> U0 {
    U0::Log(0.0)
}

/// Weights `e^{−U_n}` with `U_n = U_n⁽⁰⁾ − Σ_{m≠0 odd} n^m t*_m − ln n!`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default)]
    pub u0: BTreeMap<u32, U0>,
    /// Value used for every `n` missing from `u0`.
    #[serde(default = "default_u0")]
    pub default_u0: U0,
    /// `t*_m` for odd `m`, positive or negative.
    #[serde(default)]
    pub tstar: BTreeMap<i32, f64>,
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self { u0: BTreeMap::new(), default_u0: default_u0(), tstar: BTreeMap::new() }
    }
}

impl WeightSpec {
    /// `U⁽⁰⁾ = 0`, `t* = 0`, so `e^{−U_n} = n!`.
    pub fn zero() -> Self {
        Self::default()
    }

    /// `U⁽⁰⁾ = 0` for `n ≤ l` and `+∞` above.
    pub fn cutoff(l: u32) -> Self {
        Self {
            u0: (1..=l).map(|n| (n, U0::Log(0.0))).collect(),
            default_u0: U0::Infinite,
            tstar: BTreeMap::new(),
        }
    }

    /// Exact Boltzmann factors `e^{−U⁽⁰⁾_n}` for `n = 1, 2, …`, `+∞` beyond.
    pub fn from_boltzmann(factors: &[Rational]) -> Self {
        Self {
            u0: factors
                .iter()
                .enumerate()
                .map(|(i, r)| (i as u32 + 1, U0::Boltzmann(r.clone())))
                .collect(),
            default_u0: U0::Infinite,
            tstar: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SumError> {
        for m in self.tstar.keys() {
            if m % 2 == 0 {
                return Err(SumError::Invalid(format!("t* index {m} is not odd")));
            }
        }
        Ok(())
    }

    fn u0_of(&self, n: u32) -> &U0 {
        self.u0.get(&n).unwrap_or(&self.default_u0)
    }

    /// `e^{−U_n}`; `n = 0` gives 1.
    pub fn weight(&self, n: u32) -> Number {
        if n == 0 {
            return Number::one();
        }
        let base = self.u0_of(n).boltzmann();
        if base.is_zero() {
            return Number::zero();
        }
        let mut w = base.mul(&Number::Exact(factorial_rational(n)));
        let s: f64 = self
            .tstar
            .iter()
            .map(|(&m, &t)| (n as f64).powi(m) * t)
            .sum();
        if s != 0.0 {
            w = w.mul(&Number::Float(s.exp()));
        }
        w
    }

    /// Whether every weight up to `max_n` is exact.
    pub fn is_exact(&self, max_n: u32) -> bool {
        (1..=max_n).all(|n| self.weight(n).exact().is_some())
    }
}

/// `e^{−U_α} = ∏ e^{−U_{α_i}}`; zero parts contribute 1.
pub fn weight_factor(alpha: &StrictPartition, w: &WeightSpec) -> Number {
    alpha
        .parts()
        .iter()
        .fold(Number::one(), |acc, &p| acc.mul(&w.weight(p)))
}

/// Weights of the generalized hypergeometric family
/// `U_n = log ∏Γ(n+a_i)/∏Γ(n+b_i)`, with the built-in `−ln n!` compensated
/// through `U⁽⁰⁾`. Integer parameters give exact factors.
pub fn hypergeometric_weights(a: &[f64], b: &[f64], max_n: u32) -> Result<WeightSpec, SumError> {
    for n in 1..=max_n {
        for &p in a.iter().chain(b) {
            let x = n as f64 + p;
            if x <= 0.0 && x.fract() == 0.0 {
                return Err(SumError::GammaPole(n));
            }
        }
    }
    let integral = a.iter().chain(b).all(|p| p.fract() == 0.0);
    let mut u0 = BTreeMap::new();
    for n in 1..=max_n {
        let value = if integral {
            // Γ(n+p) = (n+p−1)!
            let gamma = |p: f64| factorial_rational((n as i64 + p as i64 - 1) as u32);
            let mut r = Rational::one();
            for &p in b {
                r *= gamma(p);
            }
            for &p in a {
                r /= gamma(p);
            }
            U0::Boltzmann(r / factorial_rational(n))
        } else {
            let mut log = -libm::lgamma_r(n as f64 + 1.0).0;
            let mut sign = 1.0;
            for &p in b {
                let (lg, s) = libm::lgamma_r(n as f64 + p);
                log += lg;
                sign *= s as f64;
            }
            for &p in a {
                let (lg, s) = libm::lgamma_r(n as f64 + p);
                log -= lg;
                sign *= s as f64;
            }
            U0::BoltzmannFloat(sign * log.exp())
        };
        u0.insert(n, value);
    }
    Ok(WeightSpec { u0, default_u0: U0::Infinite, tstar: BTreeMap::new() })
}

/// A coefficient `scale · p(t̄)`, where `p` is an optional polynomial in the
/// `t̄` family (absent means 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Coef {
    pub scale: Number,
    pub poly: Option<GradedPoly>,
}

impl Coef {
    pub fn number(x: Number) -> Self {
        Self { scale: x, poly: None }
    }
}

impl From<Number> for Coef {
    fn from(x: Number) -> Self {
        Coef::number(x)
    }
}

impl Serialize for Coef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Full<'a> {
            scale: &'a Number,
            poly: &'a GradedPoly,
        }
        match &self.poly {
            None => self.scale.serialize(s),
            Some(p) => Full { scale: &self.scale, poly: p }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Coef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Coef::number(Number::deserialize(d)?))
    }
}

/// The pair `(A, a)` defining `A^c_α`. `A` is stored for `n > m` and
/// continued antisymmetrically.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCoefficients {
    /// Entries `[n, m, A_nm]` with `n > m ≥ 1`.
    #[serde(default, with = "pair_entries")]
    pub matrix: BTreeMap<(u32, u32), Coef>,
    /// Entries `a_n`, `n ≥ 1`.
    #[serde(default)]
    pub vector: BTreeMap<u32, Coef>,
}

mod pair_entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<(u32, u32), Coef>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<(u32, u32, &Coef)> = m.iter().map(|(&(a, b), c)| (a, b, c)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(u32, u32), Coef>, D::Error> {
        use serde::de::Error;
        let v: Vec<(u32, u32, Coef)> = Vec::deserialize(d)?;
        let mut out = BTreeMap::new();
        for (n, m, c) in v {
            if n == 0 || m == 0 || n == m {
                return Err(D::Error::custom(format!("invalid index pair ({n},{m})")));
            }
            if n > m {
                out.insert((n, m), c);
            } else {
                out.insert((m, n), Coef { scale: c.scale.neg(), poly: c.poly });
            }
        }
        Ok(out)
    }
}

impl PairCoefficients {
    pub fn set(&mut self, n: u32, m: u32, c: Coef) {
        assert!(n != m, "diagonal of A is zero");
        if n > m {
            self.matrix.insert((n, m), c);
        } else {
            self.matrix.insert((m, n), Coef { scale: c.scale.neg(), poly: c.poly });
        }
    }

    /// `(A_nm, sign)` with the stored entry for the ordered pair.
    fn entry(&self, n: u32, m: u32) -> Option<(&Coef, bool)> {
        if n > m {
            self.matrix.get(&(n, m)).map(|c| (c, false))
        } else {
            self.matrix.get(&(m, n)).map(|c| (c, true))
        }
    }

    pub fn max_index(&self) -> u32 {
        let a = self.matrix.keys().map(|&(n, _)| n).max().unwrap_or(0);
        let b = self.vector.keys().copied().max().unwrap_or(0);
        a.max(b)
    }
}

/// The matrix `D` of the bilinear series; entries absent are zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DMatrix {
    #[serde(with = "d_entries")]
    pub entries: BTreeMap<(u32, u32), Number>,
}

mod d_entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<(u32, u32), Number>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<(u32, u32, &Number)> = m.iter().map(|(&(a, b), c)| (a, b, c)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(u32, u32), Number>, D::Error> {
        let v: Vec<(u32, u32, Number)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|(a, b, c)| ((a, b), c)).collect())
    }
}

impl DMatrix {
    pub fn get(&self, n: u32, m: u32) -> Number {
        self.entries.get(&(n, m)).cloned().unwrap_or_else(Number::zero)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub max_part: u32,
    pub max_length: usize,
    pub degree_cap: u32,
}

impl Truncation {
    pub fn new(max_part: u32, max_length: usize, degree_cap: u32) -> Self {
        Self { max_part, max_length, degree_cap }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeriesId {
    S0,
    S1,
    S2,
    S00,
    S3,
    S4,
    S5,
}

impl std::str::FromStr for SeriesId {
    type Err = SumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "S0" => SeriesId::S0,
            "S1" => SeriesId::S1,
            "S2" => SeriesId::S2,
            "S00" => SeriesId::S00,
            "S3" => SeriesId::S3,
            "S4" => SeriesId::S4,
            "S5" => SeriesId::S5,
            _ => return Err(SumError::Invalid(format!("unknown series {s:?}"))),
        })
    }
}

/// A series together with the data it needs.
#[derive(Clone, Debug, PartialEq)]
pub enum Series {
    S0 { l: u32 },
    S1(WeightSpec),
    S2(WeightSpec),
    S00 { l: u32 },
    S3(PairCoefficients),
    S4(WeightSpec),
    S5(DMatrix),
}

impl Series {
    pub fn id(&self) -> SeriesId {
        match self {
            Series::S0 { .. } => SeriesId::S0,
            Series::S1(_) => SeriesId::S1,
            Series::S2(_) => SeriesId::S2,
            Series::S00 { .. } => SeriesId::S00,
            Series::S3(_) => SeriesId::S3,
            Series::S4(_) => SeriesId::S4,
            Series::S5(_) => SeriesId::S5,
        }
    }

    /// Whether the series also depends on the second time family.
    pub fn is_bilinear(&self) -> bool {
        matches!(self, Series::S2(_) | Series::S00 { .. } | Series::S5(_))
    }
}

/// Evaluation target for the shared series kernel.
pub trait SeriesBackend {
    type V: Ring;
    fn zero(&self) -> Self::V;
    fn number(&self, x: &Number) -> Result<Self::V, SumError>;
    fn coef(&self, c: &Coef) -> Result<Self::V, SumError>;
    fn q(&mut self, family: Family, alpha: &StrictPartition) -> Result<Self::V, SumError>;
    /// Whether `Q_α` can be nonzero in this backend (degree pruning).
    fn admits(&self, alpha: &StrictPartition) -> bool;
}

/// Truncated polynomials in `t` and `t̄`.
pub struct ExactBackend {
    cap: u32,
    qt: QCache,
    qbar: QCache,
}

impl ExactBackend {
    pub fn new(cap: u32) -> Self {
        Self { cap, qt: QCache::new(cap, Family::T), qbar: QCache::new(cap, Family::TBar) }
    }
}

impl SeriesBackend for ExactBackend {
    type V = GradedPoly;

    fn zero(&self) -> GradedPoly {
        GradedPoly::zero(self.cap)
    }

    fn number(&self, x: &Number) -> Result<GradedPoly, SumError> {
        match x {
            Number::Exact(r) => Ok(GradedPoly::constant(r.clone(), self.cap)),
            Number::Float(v) => Err(SumError::InexactData(format!("coefficient {v}"))),
        }
    }

    fn coef(&self, c: &Coef) -> Result<GradedPoly, SumError> {
        let s = self.number(&c.scale)?;
        Ok(match &c.poly {
            None => s,
            Some(p) => s.mul_ref(&p.clone().with_cap(self.cap)),
        })
    }

    fn q(&mut self, family: Family, alpha: &StrictPartition) -> Result<GradedPoly, SumError> {
        Ok(match family {
            Family::T => self.qt.q_schur(alpha)?,
            Family::TBar => self.qbar.q_schur(alpha)?,
        })
    }

    fn admits(&self, alpha: &StrictPartition) -> bool {
        alpha.weight() <= self.cap
    }
}

/// Scalar values at fixed `t` and `t̄`.
pub struct NumericBackend {
    qt: QScalarCache<f64>,
    qbar: QScalarCache<f64>,
    tbar: BTreeMap<Var, f64>,
}

impl NumericBackend {
    pub fn new(t: &[(u32, f64)], tbar: &[(u32, f64)]) -> Self {
        Self {
            qt: QScalarCache::new(t),
            qbar: QScalarCache::new(tbar),
            tbar: tbar.iter().map(|&(k, v)| (Var { family: Family::TBar, index: k }, v)).collect(),
        }
    }
}

impl SeriesBackend for NumericBackend {
    type V = f64;

    fn zero(&self) -> f64 {
        0.0
    }

    fn number(&self, x: &Number) -> Result<f64, SumError> {
        Ok(x.to_f64())
    }

    fn coef(&self, c: &Coef) -> Result<f64, SumError> {
        let s = c.scale.to_f64();
        Ok(match &c.poly {
            None => s,
            Some(p) => s * p.eval_f64_sparse(&self.tbar),
        })
    }

    fn q(&mut self, family: Family, alpha: &StrictPartition) -> Result<f64, SumError> {
        Ok(match family {
            Family::T => self.qt.q_schur(alpha)?,
            Family::TBar => self.qbar.q_schur(alpha)?,
        })
    }

    fn admits(&self, _alpha: &StrictPartition) -> bool {
        true
    }
}

/// The index set of a series under a truncation, in graded-lex order.
pub fn index_set(series: &Series, trunc: &Truncation) -> Vec<StrictPartition> {
    match series {
        Series::S0 { l } | Series::S00 { l } => {
            enumerate_dp((*l).min(trunc.max_part), trunc.max_length)
        }
        Series::S4(_) => enumerate_dp2(trunc.max_part)
            .into_iter()
            .filter(|a| a.len() <= trunc.max_length)
            .collect(),
        _ => enumerate_dp(trunc.max_part, trunc.max_length),
    }
}

fn a_c_in<B: SeriesBackend>(alpha: &StrictPartition, pc: &PairCoefficients, b: &B) -> Result<B::V, SumError> {
    let parts = alpha.positive_parts();
    if parts.is_empty() {
        return Ok(b.zero().one_like());
    }
    let entry = |n: u32, m: u32| -> Result<B::V, SumError> {
        match pc.entry(n, m) {
            None => Ok(b.zero()),
            Some((c, flip)) => {
                let v = b.coef(c)?;
                Ok(if flip { v.neg_ref() } else { v })
            }
        }
    };
    let k = parts.len();
    let dim = k + k % 2;
    let mut entries = vec![vec![b.zero(); dim]; dim];
    for i in 0..k {
        for j in i + 1..k {
            entries[i][j] = entry(parts[i], parts[j])?;
        }
        if k % 2 == 1 {
            entries[i][k] = match pc.vector.get(&parts[i]) {
                None => b.zero(),
                Some(c) => b.coef(c)?,
            };
        }
    }
    let m = SkewMatrix::from_fn(dim, b.zero(), |i, j| entries[i][j].clone());
    Ok(pfaffian_ring(&m)?)
}

fn d_in<B: SeriesBackend>(
    alpha: &StrictPartition,
    beta: &StrictPartition,
    d: &DMatrix,
    b: &B,
) -> Result<B::V, SumError> {
    let (pa, pb) = (alpha.positive_parts(), beta.positive_parts());
    if pa.len() != pb.len() {
        return Err(SumError::LengthMismatch(alpha.clone(), beta.clone()));
    }
    let mut rows = Vec::with_capacity(pa.len());
    for &x in pa {
        let mut row = Vec::with_capacity(pb.len());
        for &y in pb {
            row.push(b.number(&d.get(x, y))?);
        }
        rows.push(row);
    }
    Ok(det_ring(&rows, &b.zero()))
}

/// The shared kernel: `Σ coefficient(α[, β]) · Q_α(t) [· Q_β(t̄)]` over the
/// truncated index set, accumulated in enumeration order.
pub fn evaluate<B: SeriesBackend>(series: &Series, trunc: &Truncation, b: &mut B) -> Result<B::V, SumError> {
    let index: Vec<StrictPartition> =
        index_set(series, trunc).into_iter().filter(|a| b.admits(a)).collect();
    let mut acc = b.zero();
    match series {
        Series::S5(d) => {
            for alpha in &index {
                let qa = b.q(Family::T, alpha)?;
                if qa.is_zero_value() {
                    continue;
                }
                for beta in index.iter().filter(|x| x.len() == alpha.len()) {
                    let coeff = d_in(alpha, beta, d, b)?;
                    if coeff.is_zero_value() {
                        continue;
                    }
                    let qb = b.q(Family::TBar, beta)?;
                    acc = acc.add_ref(&qa.mul_ref(&coeff).mul_ref(&qb));
                }
            }
        }
        _ => {
            for alpha in &index {
                let coeff = match series {
                    Series::S0 { .. } | Series::S00 { .. } => b.zero().one_like(),
                    Series::S1(w) | Series::S2(w) | Series::S4(w) => b.number(&weight_factor(alpha, w))?,
                    Series::S3(pc) => a_c_in(alpha, pc, b)?,
                    Series::S5(_) => unreachable!(),
                };
                if coeff.is_zero_value() {
                    continue;
                }
                let mut term = coeff.mul_ref(&b.q(Family::T, alpha)?);
                if matches!(series, Series::S2(_) | Series::S00 { .. }) {
                    term = term.mul_ref(&b.q(Family::TBar, alpha)?);
                }
                acc = acc.add_ref(&term);
            }
        }
    }
    Ok(acc)
}

/// Exact truncated series as a polynomial in `t` (and `t̄`).
pub fn sum_series(series: &Series, trunc: &Truncation) -> Result<GradedPoly, SumError> {
    if let Series::S1(w) | Series::S2(w) | Series::S4(w) = series {
        w.validate()?;
    }
    let reachable: u32 = match series {
        Series::S0 { l } | Series::S00 { l } => top_weight((*l).min(trunc.max_part), trunc.max_length),
        _ => top_weight(trunc.max_part, trunc.max_length),
    };
    if reachable > trunc.degree_cap {
        log::warn!(
            "degree cap {} is below the largest reachable weight {reachable}; heavier terms are dropped",
            trunc.degree_cap
        );
    }
    evaluate(series, trunc, &mut ExactBackend::new(trunc.degree_cap))
}

fn top_weight(max_part: u32, max_length: usize) -> u32 {
    (0..max_length.min(max_part as usize) as u32).map(|i| max_part - i).sum()
}

/// Series value at fixed times; the degree cap of `trunc` is ignored.
pub fn sum_series_at(
    series: &Series,
    trunc: &Truncation,
    t: &[(u32, f64)],
    tbar: &[(u32, f64)],
) -> Result<f64, SumError> {
    evaluate(series, trunc, &mut NumericBackend::new(t, tbar))
}

/// `A^c_α` for numeric pair data; exact when every entry used is exact.
pub fn a_c_coefficient(alpha: &StrictPartition, pc: &PairCoefficients) -> Result<Number, SumError> {
    match a_c_in(alpha, pc, &ExactBackend::new(0)) {
        Ok(p) => Ok(Number::Exact(p.constant_term())),
        Err(SumError::InexactData(_)) => Ok(Number::Float(a_c_in(alpha, pc, &NumericBackend::new(&[], &[]))?)),
        Err(e) => Err(e),
    }
}

/// `D_{α,β} = det(D_{α_i, β_j})`.
pub fn d_coefficient(alpha: &StrictPartition, beta: &StrictPartition, d: &DMatrix) -> Result<Number, SumError> {
    match d_in(alpha, beta, d, &ExactBackend::new(0)) {
        Ok(p) => Ok(Number::Exact(p.constant_term())),
        Err(SumError::InexactData(_)) => Ok(Number::Float(d_in(alpha, beta, d, &NumericBackend::new(&[], &[]))?)),
        Err(e) => Err(e),
    }
}

/// Targets of the pair-coefficient specializations.
#[derive(Clone, Debug, PartialEq)]
pub enum SpecTarget {
    S0 { l: u32 },
    S1(WeightSpec),
    S2(WeightSpec),
    S00 { l: u32 },
    S4(WeightSpec),
}

/// Pair data `(A, a)` on indices `1..=max_n` such that S₃ reproduces the
/// target series:
///
/// * S₁: `A_nm = w_n w_m sgn(n−m)`, `a_n = w_n` with `w_n = e^{−U_n}`;
/// * S₀: the same with `w_n = 1` for `n ≤ L` and `0` above;
/// * S₂: `A_nm = w_n w_m Q_(n,m)(t̄)`, `a_n = w_n q_n(t̄)`; S₀₀ likewise;
/// * S₄: `A_{n+1,n} = w_{n+1} w_n`, all other entries and `a` zero.
pub fn specialize_pair_coeffs(target: &SpecTarget, max_n: u32) -> PairCoefficients {
    let mut pc = PairCoefficients::default();
    let weights: Vec<Number> = match target {
        SpecTarget::S1(w) | SpecTarget::S2(w) | SpecTarget::S4(w) => {
            (0..=max_n).map(|n| w.weight(n)).collect()
        }
        SpecTarget::S0 { l } | SpecTarget::S00 { l } => (0..=max_n)
            .map(|n| if n <= *l { Number::one() } else { Number::zero() })
            .collect(),
    };
    match target {
        SpecTarget::S0 { .. } | SpecTarget::S1(_) => {
            for n in 1..=max_n {
                pc.vector.insert(n, Coef::number(weights[n as usize].clone()));
                for m in 1..n {
                    pc.set(n, m, Coef::number(weights[n as usize].mul(&weights[m as usize])));
                }
            }
        }
        SpecTarget::S2(_) | SpecTarget::S00 { .. } => {
            let cap = 2 * max_n;
            let mut q = QCache::new(cap, Family::TBar);
            for n in 1..=max_n {
                pc.vector.insert(
                    n,
                    Coef { scale: weights[n as usize].clone(), poly: Some(q.row(n)) },
                );
                for m in 1..n {
                    let scale = weights[n as usize].mul(&weights[m as usize]);
                    pc.set(n, m, Coef { scale, poly: Some(q.pair(n, m)) });
                }
            }
        }
        SpecTarget::S4(_) => {
            for n in 1..max_n {
                let scale = weights[n as usize + 1].mul(&weights[n as usize]);
                pc.set(n + 1, n, Coef::number(scale));
            }
        }
    }
    pc
}

/// `D_nm = e^{−U_n} δ_nm` on `1..=max_n`, which turns S₅ into S₂.
pub fn specialize_dmatrix(w: &WeightSpec, max_n: u32) -> DMatrix {
    DMatrix { entries: (1..=max_n).map(|n| ((n, n), w.weight(n))).collect() }
}

/// Closed forms at `t = t̄ = t∞`.
#[derive(Clone, Debug, PartialEq)]
pub enum ClosedForm {
    S1DI(WeightSpec),
    S2DI(WeightSpec),
    S4DI(WeightSpec),
    S5DI(DMatrix),
}

fn closed_form_in<T: Scalar>(
    form: &ClosedForm,
    trunc: &Truncation,
    conv: &dyn Fn(&Number) -> Option<T>,
) -> Option<T> {
    let mut acc = T::from_i64(0);
    let inv_fact = |n: u32| T::from_rational(&(Rational::one() / factorial_rational(n)));
    match form {
        ClosedForm::S1DI(w) | ClosedForm::S2DI(w) => {
            let squared = matches!(form, ClosedForm::S2DI(_));
            for alpha in enumerate_dp(trunc.max_part, trunc.max_length) {
                let ds = T::from_rational(&delta_star(&alpha));
                let mut term = if squared { ds.mul_ref(&ds) } else { ds };
                for &p in alpha.positive_parts() {
                    term = term.mul_ref(&conv(&w.weight(p))?).mul_ref(&inv_fact(p));
                    if squared {
                        term = term.mul_ref(&inv_fact(p));
                    }
                }
                acc = acc.add_ref(&term);
            }
        }
        ClosedForm::S4DI(w) => {
            let heads = enumerate_dp_prime(trunc.max_part.saturating_sub(1), trunc.max_length / 2);
            for gamma in heads {
                let mut term = T::from_rational(&delta_star_tilde4(&gamma));
                for &g in gamma.positive_parts() {
                    term = term
                        .mul_ref(&conv(&w.weight(g))?)
                        .mul_ref(&conv(&w.weight(g + 1))?)
                        .mul_ref(&inv_fact(g))
                        .mul_ref(&inv_fact(g + 1));
                }
                acc = acc.add_ref(&term);
            }
        }
        ClosedForm::S5DI(d) => {
            // α decreasing, β over all orderings of distinct parts; equal to the
            // symmetric form with both orderings and a 1/k! normalization.
            for alpha in enumerate_dp(trunc.max_part, trunc.max_length) {
                let pa = alpha.positive_parts();
                let k = pa.len();
                let da = T::from_rational(&delta_star(&alpha));
                let mut base = da;
                for &p in pa {
                    base = base.mul_ref(&inv_fact(p));
                }
                for beta in ordered_tuples(trunc.max_part, k) {
                    let mut term = base.clone();
                    for i in 0..k {
                        let dij = conv(&d.get(pa[i], beta[i]))?;
                        if dij.is_zero_value() {
                            term = T::from_i64(0);
                            break;
                        }
                        term = term.mul_ref(&dij).mul_ref(&inv_fact(beta[i]));
                    }
                    if term.is_zero_value() {
                        continue;
                    }
                    let seq: Vec<i64> = beta.iter().map(|&x| x as i64).collect();
                    let db = delta_star_seq(&seq).ok()?;
                    acc = acc.add_ref(&term.mul_ref(&T::from_rational(&db)));
                }
            }
        }
    }
    Some(acc)
}

/// Ordered `k`-tuples of distinct integers in `1..=max_part`.
pub fn ordered_tuples(max_part: u32, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    fn rec(max_part: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in 1..=max_part {
            if !cur.contains(&x) {
                cur.push(x);
                rec(max_part, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(max_part, k, &mut Vec::new(), &mut out);
    out
}

/// Evaluates a closed form; exact when every weight involved is exact.
pub fn sum_series_tinf(form: &ClosedForm, trunc: &Truncation) -> Result<Number, SumError> {
    if let ClosedForm::S1DI(w) | ClosedForm::S2DI(w) | ClosedForm::S4DI(w) = form {
        w.validate()?;
    }
    let exact = closed_form_in::<Rational>(form, trunc, &|x| x.exact().cloned());
    if let Some(r) = exact {
        return Ok(Number::Exact(r));
    }
    closed_form_in::<f64>(form, trunc, &|x| Some(x.to_f64()))
        .map(Number::Float)
        .ok_or_else(|| SumError::Invalid("closed form evaluation failed".into()))
}

/// Random strict-partition models: weights `A^c_α Q_α`, `e^{−U_α} Q_α` or
/// `e^{−U_α} Q_α(t) Q_α(t̄)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    A(PairCoefficients),
    B(WeightSpec),
    C(WeightSpec),
}

/// Normalized probability table over the truncated support.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbTable {
    pub entries: Vec<ProbEntry>,
    /// The matching partition function.
    pub total: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbEntry {
    pub partition: StrictPartition,
    pub weight: Number,
    pub probability: Number,
}

impl ProbTable {
    pub fn probabilities_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability.to_f64()).collect()
    }

    /// Exact total probability, when every entry is exact.
    pub fn exact_sum(&self) -> Option<Rational> {
        self.entries
            .iter()
            .map(|e| e.probability.exact().cloned())
            .sum::<Option<Rational>>()
    }
}

fn time_pairs_exact(times: &[(u32, Number)]) -> Option<Vec<(u32, Rational)>> {
    times.iter().map(|(k, v)| v.exact().map(|r| (*k, r.clone()))).collect()
}

/// Builds the probability table `P(α) = W_α / S` for a model.
pub fn model_distribution(
    model: &Model,
    trunc: &Truncation,
    t: &[(u32, Number)],
    tbar: &[(u32, Number)],
) -> Result<ProbTable, SumError> {
    let support = enumerate_dp(trunc.max_part, trunc.max_length);
    let exact_times = time_pairs_exact(t).zip(time_pairs_exact(tbar));
    let mut weights: Vec<Number> = Vec::with_capacity(support.len());
    let mut exact_q = exact_times
        .as_ref()
        .map(|(a, b)| (QScalarCache::<Rational>::new(a), QScalarCache::<Rational>::new(b)));
    let tf: Vec<(u32, f64)> = t.iter().map(|(k, v)| (*k, v.to_f64())).collect();
    let tbf: Vec<(u32, f64)> = tbar.iter().map(|(k, v)| (*k, v.to_f64())).collect();
    let mut float_q = (QScalarCache::<f64>::new(&tf), QScalarCache::<f64>::new(&tbf));
    for alpha in &support {
        let coeff = match model {
            Model::A(pc) => a_c_coefficient(alpha, pc)?,
            Model::B(w) | Model::C(w) => weight_factor(alpha, w),
        };
        let q = match (&mut exact_q, &coeff) {
            (Some((qt, qb)), Number::Exact(_)) => {
                let mut v = qt.q_schur(alpha)?;
                if matches!(model, Model::C(_)) {
                    v *= qb.q_schur(alpha)?;
                }
                Number::Exact(v)
            }
            _ => {
                let mut v = float_q.0.q_schur(alpha)?;
                if matches!(model, Model::C(_)) {
                    v *= float_q.1.q_schur(alpha)?;
                }
                Number::Float(v)
            }
        };
        let w = coeff.mul(&q);
        let negative = match &w {
            Number::Exact(r) => r.is_negative(),
            Number::Float(x) => *x < 0.0,
        };
        if negative {
            return Err(SumError::NegativeWeight { partition: alpha.clone(), weight: w.to_f64() });
        }
        weights.push(w);
    }
    let total = weights.iter().fold(Number::zero(), |acc, w| acc.add(w));
    if total.is_zero() {
        return Err(SumError::EmptySupport);
    }
    let entries = support
        .into_iter()
        .zip(weights)
        .map(|(partition, weight)| {
            let probability = match (&weight, &total) {
                (Number::Exact(w), Number::Exact(s)) => Number::Exact(w / s),
                _ => Number::Float(weight.to_f64() / total.to_f64()),
            };
            ProbEntry { partition, weight, probability }
        })
        .collect();
    Ok(ProbTable { entries, total })
}

/// Inverse-CDF sampling over the table order with a seeded ChaCha8 stream.
pub fn sample(table: &ProbTable, seed: u64, count: usize) -> Vec<StrictPartition> {
    let probs = table.probabilities_f64();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut run = 0.0;
    for p in &probs {
        run += p;
        cdf.push(run);
    }
    let last_positive = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * run;
            let i = cdf.partition_point(|&c| c <= u).min(last_positive);
            table.entries[i].partition.clone()
        })
        .collect()
}
