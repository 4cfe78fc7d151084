//! Finite-mode matrix representation of neutral fermions `φ_n`, `|n| ≤ L`,
//! used as an independent oracle for the fermionic formulas, plus the BKP
//! Hirota certifier.
//!
//! Modes live on a spin chain. Site 0 of each component carries `φ₀` as
//! `X/√2`, with the vacuum in the `+` eigenstate; sites `1..=L` carry
//! `φ_{−n} = c_n` and `φ_n = (−1)^n c_n†`, dressed by Jordan–Wigner strings.
//! Every operator is a signed monomial matrix, so operators are applied to
//! vectors and never stored densely.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::pfaffian::{pfaffian_float, PfaffianError, SkewMatrix};
use crate::partitions::delta_star;
use crate::polyring::{hirota_d, GradedPoly, PolyError, Var};
use crate::ring::rational_to_f64;
use crate::tausums::{sum_series_tinf, ClosedForm, Series, SumError, Truncation, WeightSpec, U0};

/// Largest `L` per component count.
pub const MAX_MODE_ONE: u32 = 6;
pub const MAX_MODE_TWO: u32 = 4;
const TAYLOR_LIMIT: usize = 500;
const WICK_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FermionError {
    #[error("L = {l} with {components} component(s) exceeds the dimension guard")]
    DimensionOverflow { l: u32, components: u8 },
    #[error("mode {n} of component {component} is outside ±{l}")]
    ModeOutOfRange { component: u8, n: i32, l: u32 },
    #[error("component {0} does not exist in this representation")]
    NoSuchComponent(u8),
    #[error("time index {0} is even")]
    EvenTime(u32),
    #[error("coefficient support reaches mode {index} outside 1..={l}")]
    SupportExceeds { index: u32, l: u32 },
    #[error("exponential series did not converge within {TAYLOR_LIMIT} terms")]
    NonConvergent,
    #[error("Wick paths disagree: product {product}, Pfaffian {pfaffian}")]
    WickMismatch { product: f64, pfaffian: f64 },
    #[error("degree cap {0} is below the Hirota weight 6")]
    CapTooSmall(u32),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Sum(#[from] SumError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Pfaffian(#[from] PfaffianError),
}

/// How modes of different components relate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossStatistics {
    /// Tensor product of one-component chains; each `φ₀^{(a)}` fixes the vacuum.
    Commuting,
    /// One global string; vacuum `(1 + 2φ₀^{(2)}φ₀^{(1)})|Ω⟩`, covacuum `⟨Ω|`.
    Anticommuting,
}

/// A signed monomial matrix: column `j` maps to `val[j]·e_{row[j]}`.
#[derive(Clone, Debug)]
struct MonomialOp {
    row: Vec<u32>,
    val: Vec<f64>,
}

impl MonomialOp {
    fn apply_into(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        for (j, &x) in v.iter().enumerate() {
            if x != 0.0 && self.val[j] != 0.0 {
                out[self.row[j] as usize] += scale * self.val[j] * x;
            }
        }
    }
}

#[derive(Clone, Copy)]
enum SiteOp {
    Flip,
    Lower,
    Raise,
}

fn site_op(dim: usize, site: usize, string_mask: usize, op: SiteOp, scale: f64) -> MonomialOp {
    let bit = 1usize << site;
    let mut row = vec![0u32; dim];
    let mut val = vec![0.0; dim];
    for j in 0..dim {
        let sign = if (j & string_mask).count_ones() % 2 == 1 { -scale } else { scale };
        let occupied = j & bit != 0;
        let (r, v) = match op {
            SiteOp::Flip => (j ^ bit, sign),
            SiteOp::Lower if occupied => (j ^ bit, sign),
            SiteOp::Raise if !occupied => (j | bit, sign),
            _ => (j, 0.0),
        };
        row[j] = r as u32;
        val[j] = v;
    }
    MonomialOp { row, val }
}

/// The neutral-fermion algebra on `2^{components·(L+1)}` dimensions.
#[derive(Clone, Debug)]
pub struct CliffordRep {
    max_mode: u32,
    components: u8,
    cross: CrossStatistics,
    dim: usize,
    ops: Vec<MonomialOp>,
    mode_sites: Vec<Vec<usize>>,
    vacuum: Vec<f64>,
    covacuum: Vec<f64>,
}

/// One- or two-component representation; components commute.
pub fn build_rep(l: u32, components: u8) -> Result<CliffordRep, FermionError> {
    build_rep_with(l, components, CrossStatistics::Commuting)
}

pub fn build_rep_with(l: u32, components: u8, cross: CrossStatistics) -> Result<CliffordRep, FermionError> {
    let limit = match components {
        1 => MAX_MODE_ONE,
        2 => MAX_MODE_TWO,
        _ => return Err(FermionError::NoSuchComponent(components)),
    };
    if l == 0 || l > limit {
        return Err(FermionError::DimensionOverflow { l, components });
    }
    let lu = l as usize;
    let sites = components as usize * (lu + 1);
    let dim = 1usize << sites;
    let below = |s: usize| (1usize << s) - 1;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;

    // (aux site, mode sites, string origin) per component
    let layout: Vec<(usize, Vec<usize>, usize)> = match (components, cross) {
        (1, _) => vec![(0, (1..=lu).collect(), 0)],
        (_, CrossStatistics::Commuting) => (0..2)
            .map(|a| {
                let base = a * (lu + 1);
                (base, (1..=lu).map(|n| base + n).collect(), base)
            })
            .collect(),
        (_, CrossStatistics::Anticommuting) => vec![
            (0, (2..2 + lu).collect(), 0),
            (1, (2 + lu..2 + 2 * lu).collect(), 0),
        ],
    };

    let mut ops = Vec::with_capacity(components as usize * (2 * lu + 1));
    let mut mode_sites = Vec::new();
    for (aux, modes, origin) in &layout {
        let string = |s: usize| below(s) & !below(*origin);
        for n in -(l as i32)..=(l as i32) {
            let op = match n {
                0 => site_op(dim, *aux, string(*aux), SiteOp::Flip, inv_sqrt2),
                _ if n < 0 => {
                    let s = modes[(-n) as usize - 1];
                    site_op(dim, s, string(s), SiteOp::Lower, 1.0)
                }
                _ => {
                    let s = modes[n as usize - 1];
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    site_op(dim, s, string(s), SiteOp::Raise, sign)
                }
            };
            ops.push(op);
        }
        mode_sites.push(modes.clone());
    }

    let mut rep = CliffordRep {
        max_mode: l,
        components,
        cross,
        dim,
        ops,
        mode_sites,
        vacuum: vec![0.0; dim],
        covacuum: vec![0.0; dim],
    };
    match (components, cross) {
        (2, CrossStatistics::Anticommuting) => {
            let mut omega = vec![0.0; dim];
            omega[0] = 1.0;
            let flipped = rep.phi(1, 0).and_then(|_| {
                let e = OperatorExpr::Product(vec![OperatorExpr::mode_of(1, 0), OperatorExpr::mode_of(0, 0)]);
                rep.apply(&e, &omega)
            })?;
            rep.vacuum = omega.iter().zip(&flipped).map(|(a, b)| a + 2.0 * b).collect();
            rep.covacuum = omega;
        }
        _ => {
            let auxes: usize = layout.iter().map(|(aux, _, _)| 1usize << aux).sum();
            let amp = inv_sqrt2.powi(components as i32);
            for j in 0..dim {
                if j & !auxes == 0 {
                    rep.vacuum[j] = amp;
                }
            }
            rep.covacuum = rep.vacuum.clone();
        }
    }
    Ok(rep)
}

/// Expression tree of operators on a [`CliffordRep`]. Components are
/// numbered from 0.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorExpr {
    Identity,
    Mode { component: u8, n: i32 },
    /// `Σ c_n φ_n` within one component.
    Linear { component: u8, coeffs: Vec<(i32, f64)> },
    /// Applied right to left.
    Product(Vec<OperatorExpr>),
    Sum(Vec<OperatorExpr>),
    Scaled(f64, Box<OperatorExpr>),
    Exp(Box<OperatorExpr>),
    /// Diagonal factor `∏ w_n` over occupied modes `n > 0`.
    ModeWeights { component: u8, weights: BTreeMap<u32, f64> },
}

impl OperatorExpr {
    pub fn mode(n: i32) -> Self {
        OperatorExpr::Mode { component: 0, n }
    }

    pub fn mode_of(component: u8, n: i32) -> Self {
        OperatorExpr::Mode { component, n }
    }

    /// `c·φ_n φ_m`.
    pub fn pair(component: u8, c: f64, n: i32, m: i32) -> Self {
        Self::pair_between(c, (component, n), (component, m))
    }

    pub fn pair_between(c: f64, left: (u8, i32), right: (u8, i32)) -> Self {
        OperatorExpr::Scaled(
            c,
            Box::new(OperatorExpr::Product(vec![
                OperatorExpr::mode_of(left.0, left.1),
                OperatorExpr::mode_of(right.0, right.1),
            ])),
        )
    }

    /// Partial sum `φ(z) = Σ_{|n|≤L} φ_n z^n`.
    pub fn field(component: u8, z: f64, l: u32) -> Self {
        let coeffs = (-(l as i32)..=l as i32).map(|n| (n, z.powi(n))).collect();
        OperatorExpr::Linear { component, coeffs }
    }

    pub fn exp(self) -> Self {
        OperatorExpr::Exp(Box::new(self))
    }
}

impl CliffordRep {
    pub fn max_mode(&self) -> u32 {
        self.max_mode
    }

    pub fn components(&self) -> u8 {
        self.components
    }

    pub fn cross_statistics(&self) -> CrossStatistics {
        self.cross
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vacuum(&self) -> &[f64] {
        &self.vacuum
    }

    pub fn covacuum(&self) -> &[f64] {
        &self.covacuum
    }

    fn phi(&self, component: u8, n: i32) -> Result<&MonomialOp, FermionError> {
        if component >= self.components {
            return Err(FermionError::NoSuchComponent(component));
        }
        let l = self.max_mode as i32;
        if n.abs() > l {
            return Err(FermionError::ModeOutOfRange { component, n, l: self.max_mode });
        }
        Ok(&self.ops[component as usize * (2 * l as usize + 1) + (n + l) as usize])
    }

    /// `expr · v`.
    pub fn apply(&self, expr: &OperatorExpr, v: &[f64]) -> Result<Vec<f64>, FermionError> {
        let mut out = vec![0.0; self.dim];
        match expr {
            OperatorExpr::Identity => out.copy_from_slice(v),
            OperatorExpr::Mode { component, n } => self.phi(*component, *n)?.apply_into(v, 1.0, &mut out),
            OperatorExpr::Linear { component, coeffs } => {
                for &(n, c) in coeffs {
                    if c != 0.0 {
                        self.phi(*component, n)?.apply_into(v, c, &mut out);
                    }
                }
            }
            OperatorExpr::Product(factors) => {
                let mut cur = v.to_vec();
                for f in factors.iter().rev() {
                    cur = self.apply(f, &cur)?;
                }
                out = cur;
            }
            OperatorExpr::Sum(terms) => {
                for t in terms {
                    for (o, x) in out.iter_mut().zip(self.apply(t, v)?) {
                        *o += x;
                    }
                }
            }
            OperatorExpr::Scaled(c, e) => {
                out = self.apply(e, v)?;
                out.iter_mut().for_each(|x| *x *= c);
            }
            OperatorExpr::Exp(e) => out = self.apply_exp(e, v)?,
            OperatorExpr::ModeWeights { component, weights } => {
                if *component >= self.components {
                    return Err(FermionError::NoSuchComponent(*component));
                }
                let sites = &self.mode_sites[*component as usize];
                for (j, (o, &x)) in out.iter_mut().zip(v).enumerate() {
                    let mut f = x;
                    for (&n, &w) in weights {
                        if n == 0 || n > self.max_mode {
                            continue;
                        }
                        if j & (1usize << sites[n as usize - 1]) != 0 {
                            f *= w;
                        }
                    }
                    *o = f;
                }
            }
        }
        Ok(out)
    }

    /// Taylor series on the vector; exact once the generator becomes nilpotent
    /// on the orbit of `v`.
    fn apply_exp(&self, e: &OperatorExpr, v: &[f64]) -> Result<Vec<f64>, FermionError> {
        let mut sum = v.to_vec();
        let mut term = v.to_vec();
        for k in 1..=TAYLOR_LIMIT {
            term = self.apply(e, &term)?;
            let inv = 1.0 / k as f64;
            term.iter_mut().for_each(|x| *x *= inv);
            let tnorm = term.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
            let snorm = sum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if tnorm == 0.0 || (k > 2 && tnorm <= 1e-18 * snorm.max(1.0)) {
                return Ok(sum);
            }
        }
        Err(FermionError::NonConvergent)
    }

    /// Largest deviation from the canonical relations over all stored pairs.
    /// For commuting components, cross pairs are checked for commutation.
    pub fn canonical_deviation(&self) -> f64 {
        let l = self.max_mode as i32;
        let mut worst = 0.0f64;
        let basis: Vec<Vec<f64>> = (0..self.dim)
            .map(|j| {
                let mut e = vec![0.0; self.dim];
                e[j] = 1.0;
                e
            })
            .collect();
        for a in 0..self.components {
            for b in a..self.components {
                for n in -l..=l {
                    for m in -l..=l {
                        let cross_commute = a != b && self.cross == CrossStatistics::Commuting;
                        let expected = if a == b && n == -m { if n % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 };
                        let nm = OperatorExpr::Product(vec![OperatorExpr::mode_of(a, n), OperatorExpr::mode_of(b, m)]);
                        let mn = OperatorExpr::Product(vec![OperatorExpr::mode_of(b, m), OperatorExpr::mode_of(a, n)]);
                        for (j, e) in basis.iter().enumerate() {
                            let x = self.apply(&nm, e).expect("modes in range");
                            let y = self.apply(&mn, e).expect("modes in range");
                            for (i, (p, q)) in x.iter().zip(&y).enumerate() {
                                let got = if cross_commute { p - q } else { p + q };
                                let want = if i == j { expected } else { 0.0 };
                                worst = worst.max((got - want).abs());
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    /// `⟨0| expr |0⟩`.
    pub fn vev(&self, expr: &OperatorExpr) -> Result<f64, FermionError> {
        let v = self.apply(expr, &self.vacuum)?;
        Ok(self.covacuum.iter().zip(&v).map(|(a, b)| a * b).sum())
    }

    /// `⟨0| w₁ ⋯ w_k |0⟩` for linear forms in the first component, evaluated
    /// directly and as a Pfaffian of pair expectations (odd `k` is completed
    /// by `φ₀`). Fails when the two paths disagree.
    pub fn vev_wick(&self, factors: &[Vec<(i32, f64)>]) -> Result<f64, FermionError> {
        if self.components != 1 {
            return Err(FermionError::Unsupported("Wick path needs one component".into()));
        }
        let mut lin: Vec<OperatorExpr> = factors
            .iter()
            .map(|c| OperatorExpr::Linear { component: 0, coeffs: c.clone() })
            .collect();
        let product = self.vev(&OperatorExpr::Product(lin.clone()))?;
        let odd = lin.len() % 2 == 1;
        if odd {
            lin.push(OperatorExpr::mode(0));
        }
        let k = lin.len();
        let mut pairs = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i + 1..k {
                pairs[i][j] = self.vev(&OperatorExpr::Product(vec![lin[i].clone(), lin[j].clone()]))?;
            }
        }
        let m = SkewMatrix::from_fn(k, 0.0, |i, j| pairs[i][j]);
        let mut pf = pfaffian_float(&m)?;
        if odd {
            pf *= std::f64::consts::SQRT_2;
        }
        if (product - pf).abs() > WICK_TOLERANCE * product.abs().max(1.0) {
            return Err(FermionError::WickMismatch { product, pfaffian: pf });
        }
        Ok(product)
    }
}

/// Which side a Γ factor acts from: `Γ(t)` uses `B_n`, `Γ̄(t)` uses `B_{−n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// `B_n = ½ Σ_i (−1)^{i+1} φ_i φ_{−i−n}` restricted to `|i|, |i+n| ≤ L`.
pub fn b_operator(rep: &CliffordRep, component: u8, n: i32) -> OperatorExpr {
    let l = rep.max_mode as i32;
    let terms = (-l..=l)
        .filter(|i| (i + n).abs() <= l)
        .map(|i| {
            let c = if i % 2 == 0 { -0.5 } else { 0.5 };
            OperatorExpr::pair(component, c, i, -i - n)
        })
        .collect();
    OperatorExpr::Sum(terms)
}

/// `Γ(t) = exp Σ B_n t_n` (left) or `Γ̄(t) = exp Σ B_{−n} t_n` (right).
pub fn gamma_op(
    rep: &CliffordRep,
    component: u8,
    times: &[(u32, f64)],
    direction: Direction,
) -> Result<OperatorExpr, FermionError> {
    let mut terms = Vec::new();
    for &(k, t) in times {
        if k % 2 == 0 {
            return Err(FermionError::EvenTime(k));
        }
        if t == 0.0 {
            continue;
        }
        let n = match direction {
            Direction::Left => k as i32,
            Direction::Right => -(k as i32),
        };
        terms.push(OperatorExpr::Scaled(t, Box::new(b_operator(rep, component, n))));
    }
    if terms.is_empty() {
        return Ok(OperatorExpr::Identity);
    }
    Ok(OperatorExpr::Sum(terms).exp())
}

/// The diagonal operator weighting each occupied mode `n ≤ L` by `e^{−U_n}`.
pub fn t_operator(rep: &CliffordRep, component: u8, w: &WeightSpec) -> OperatorExpr {
    let weights = (1..=rep.max_mode).map(|n| (n, w.weight(n).to_f64())).collect();
    OperatorExpr::ModeWeights { component, weights }
}

/// Ordering of the pair operators in the exponent of the DP² series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairOrdering {
    /// `φ_{n+1} φ_n`: reproduces the combinatorial series.
    Descending,
    /// `φ_n φ_{n+1}`.
    Ascending,
}

fn complete_times(times: &[(u32, f64)]) -> Result<(), FermionError> {
    for &(k, _) in times {
        if k % 2 == 0 {
            return Err(FermionError::EvenTime(k));
        }
    }
    Ok(())
}

/// The fermionic expectation matching a series, on modes `≤ l`.
pub fn oracle_sum(series: &Series, l: u32, t: &[(u32, f64)], tbar: &[(u32, f64)]) -> Result<f64, FermionError> {
    complete_times(t)?;
    complete_times(tbar)?;
    match series {
        Series::S0 { l: n } => {
            if *n > l {
                return Err(FermionError::SupportExceeds { index: *n, l });
            }
            let rep = build_rep(l, 1)?;
            let g = gamma_op(&rep, 0, t, Direction::Left)?;
            let h = staircase(*n);
            rep.vev(&OperatorExpr::Product(vec![g, h.exp()]))
        }
        Series::S1(w) => {
            w.validate()?;
            let rep = build_rep(l, 1)?;
            let g = gamma_op(&rep, 0, t, Direction::Left)?;
            rep.vev(&OperatorExpr::Product(vec![g, t_operator(&rep, 0, w), staircase(l).exp()]))
        }
        Series::S3(pc) => {
            let top = pc.max_index();
            if top > l {
                return Err(FermionError::SupportExceeds { index: top, l });
            }
            let rep = build_rep(l, 1)?;
            let g = gamma_op(&rep, 0, t, Direction::Left)?;
            let tb: BTreeMap<Var, f64> = tbar.iter().map(|&(k, v)| (Var::tbar(k), v)).collect();
            let value = |c: &crate::tausums::Coef| {
                c.scale.to_f64() * c.poly.as_ref().map_or(1.0, |p| p.eval_f64_sparse(&tb))
            };
            let mut terms = Vec::new();
            for (&(n, m), c) in &pc.matrix {
                terms.push(OperatorExpr::pair(0, 2.0 * value(c), n as i32, m as i32));
            }
            for (&n, c) in &pc.vector {
                terms.push(OperatorExpr::pair(0, 2.0 * value(c), n as i32, 0));
            }
            rep.vev(&OperatorExpr::Product(vec![g, OperatorExpr::Sum(terms).exp()]))
        }
        Series::S4(w) => oracle_s4(w, l, t, PairOrdering::Descending),
        Series::S5(d) => {
            if let Some(&(n, m)) = d.entries.keys().find(|&&(n, m)| n.max(m) > l || n == 0 || m == 0) {
                return Err(FermionError::SupportExceeds { index: if n == 0 || m == 0 { 0 } else { n.max(m) }, l });
            }
            let rep = build_rep(l, 2)?;
            let g1 = gamma_op(&rep, 0, t, Direction::Left)?;
            let g2 = gamma_op(&rep, 1, tbar, Direction::Left)?;
            let terms = d
                .entries
                .iter()
                .map(|(&(n, m), x)| OperatorExpr::pair_between(2.0 * x.to_f64(), (0, n as i32), (1, m as i32)))
                .collect();
            rep.vev(&OperatorExpr::Product(vec![g1, g2, OperatorExpr::Sum(terms).exp()]))
        }
        other => Err(FermionError::Unsupported(format!("no fermionic oracle for {:?}", other.id()))),
    }
}

/// `2 Σ_{n>m≥0, n≤N} φ_n φ_m`.
fn staircase(n_max: u32) -> OperatorExpr {
    let mut terms = Vec::new();
    for n in 1..=n_max as i32 {
        for m in 0..n {
            terms.push(OperatorExpr::pair(0, 2.0, n, m));
        }
    }
    OperatorExpr::Sum(terms)
}

/// `⟨0|Γ(t) 𝕋 exp(2 Σ pair_n)|0⟩` with either pair ordering.
pub fn oracle_s4(w: &WeightSpec, l: u32, t: &[(u32, f64)], ordering: PairOrdering) -> Result<f64, FermionError> {
    w.validate()?;
    complete_times(t)?;
    let rep = build_rep(l, 1)?;
    let g = gamma_op(&rep, 0, t, Direction::Left)?;
    let terms = (1..l as i32)
        .map(|n| match ordering {
            PairOrdering::Descending => OperatorExpr::pair(0, 2.0, n + 1, n),
            PairOrdering::Ascending => OperatorExpr::pair(0, 2.0, n, n + 1),
        })
        .collect();
    rep.vev(&OperatorExpr::Product(vec![g, t_operator(&rep, 0, w), OperatorExpr::Sum(terms).exp()]))
}

/// `(D₁⁶ − 5D₁³D₃ − 5D₃² + 9D₁D₅) τ·τ` in the `t` family; exact up to
/// degree `cap − 6`.
pub fn hirota_residual(tau: &GradedPoly) -> Result<GradedPoly, FermionError> {
    if tau.cap() < 6 {
        return Err(FermionError::CapTooSmall(tau.cap()));
    }
    let (t1, t3, t5) = (Var::t(1), Var::t(3), Var::t(5));
    let parts: [(i64, Vec<(Var, u32)>); 4] = [
        (1, vec![(t1, 6)]),
        (-5, vec![(t1, 3), (t3, 1)]),
        (-5, vec![(t3, 2)]),
        (9, vec![(t1, 1), (t5, 1)]),
    ];
    let mut out = GradedPoly::zero(tau.cap() - 6);
    for (c, orders) in parts {
        let d = hirota_d(tau, tau, &orders)?;
        out = out.add(&d.scale(&crate::ring::rat_int(c)));
    }
    Ok(out)
}

/// Coefficient of `∏ z_i^{a_i}` in `2^{−m/2} ∏_{i<j} (z_i − z_j)/(z_i + z_j)`
/// expanded in `z_j/z_i`, for `m ≤ 3`.
fn fermi_delta_coefficient(a: &[i32], bound: i32) -> f64 {
    let m = a.len();
    let c = |k: i32| if k == 0 { 1.0 } else if k % 2 == 0 { 2.0 } else { -2.0 };
    let scale = std::f64::consts::FRAC_1_SQRT_2.powi(m as i32);
    match m {
        0 => 1.0,
        1 => {
            if a[0] == 0 {
                scale
            } else {
                0.0
            }
        }
        2 => {
            if a[0] + a[1] == 0 && a[1] >= 0 {
                scale * c(a[1])
            } else {
                0.0
            }
        }
        _ => {
            // exponents: a₁ = −k₁₂ − k₁₃, a₂ = k₁₂ − k₂₃, a₃ = k₁₃ + k₂₃
            let mut total = 0.0;
            for k12 in 0..=bound {
                for k13 in 0..=bound {
                    let k23 = k12 - a[1];
                    if k23 < 0 || -k12 - k13 != a[0] || k13 + k23 != a[2] {
                        continue;
                    }
                    total += c(k12) * c(k13) * c(k23);
                }
            }
            scale * total
        }
    }
}

/// Largest deviation between `⟨0|φ_{a₁}⋯φ_{a_m}|0⟩` and the formal
/// coefficient of `2^{−m/2}Δ*_m(z)` over all modes in the window.
pub fn fermi_delta_deviation(rep: &CliffordRep, m: usize) -> Result<f64, FermionError> {
    if !(1..=3).contains(&m) {
        return Err(FermionError::Unsupported(format!("field correlator of order {m}")));
    }
    let l = rep.max_mode as i32;
    let mut worst = 0.0f64;
    let mut idx = vec![-l; m];
    loop {
        let expr = OperatorExpr::Product(idx.iter().map(|&n| OperatorExpr::mode(n)).collect());
        let got = rep.vev(&expr)?;
        let want = fermi_delta_coefficient(&idx, 3 * l);
        worst = worst.max((got - want).abs());
        let mut i = 0;
        loop {
            if i == m {
                return Ok(worst);
            }
            idx[i] += 1;
            if idx[i] <= l {
                break;
            }
            idx[i] = -l;
            i += 1;
        }
    }
}

/// Outcome of the finite-mode check of the soliton-type representation of
/// the first weighted sum at `t = t∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolitonicCheck {
    pub value: f64,
    pub target: f64,
    /// Contributions of even-length subsets only.
    pub value_even: f64,
    pub target_even: f64,
    pub normalization: f64,
    pub expected_normalization: f64,
}

/// Evaluates `c⁻¹⟨0|Γ(t*₊) exp(2Σ_{n>m>0} w_n w_m φ(n)φ(m) + 2Σ w_n φ(n)φ₀) Γ̄(t*₋)|0⟩`
/// with `w_n = e^{−U⁽⁰⁾_n}` on the points `n = 1..=M`, fields truncated to
/// modes `≤ l`, and `c = ⟨0|Γ(t*₊)Γ̄(t*₋)|0⟩`.
///
/// The exponential is read as its ordered-product expansion
/// `Σ_{α ⊆ {1..M}} 2^{⌈ℓ/2⌉} ∏ w_{α_i} · φ(α₁)⋯φ(α_ℓ)[φ₀]` with `α` decreasing,
/// so every point occurs at most once and each truncated field correlator
/// converges as `l` grows.
pub fn solitonic_s1(l: u32, boltzmann: &[f64], tstar: &BTreeMap<i32, f64>) -> Result<SolitonicCheck, FermionError> {
    let rep = build_rep(l, 1)?;
    let plus: Vec<(u32, f64)> = tstar.iter().filter(|(&m, _)| m > 0).map(|(&m, &v)| (m as u32, v)).collect();
    let minus: Vec<(u32, f64)> = tstar.iter().filter(|(&m, _)| m < 0).map(|(&m, &v)| ((-m) as u32, -v)).collect();
    complete_times(&plus)?;
    complete_times(&minus)?;
    let gl = gamma_op(&rep, 0, &plus, Direction::Left)?;
    let gr = gamma_op(&rep, 0, &minus, Direction::Right)?;
    let points = boltzmann.len() as u32;
    let mut raw = 0.0;
    let mut raw_even = 0.0;
    let mut target_even = 0.0;
    for alpha in crate::partitions::enumerate_dp(points, points as usize) {
        let parts = alpha.positive_parts();
        let mut factors = vec![gl.clone()];
        let mut coeff = 2f64.powi(((parts.len() + 1) / 2) as i32);
        for &p in parts {
            coeff *= boltzmann[p as usize - 1];
            factors.push(OperatorExpr::field(0, p as f64, l));
        }
        if parts.len() % 2 == 1 {
            factors.push(OperatorExpr::mode(0));
        }
        factors.push(gr.clone());
        let term = coeff * rep.vev(&OperatorExpr::Product(factors))?;
        raw += term;
        if parts.len() % 2 == 0 {
            raw_even += term;
            let mut t = rational_to_f64(&delta_star(&alpha));
            for &p in parts {
                let n = p as f64;
                let xi: f64 = tstar.iter().map(|(&m, &v)| n.powi(m) * v).sum();
                t *= boltzmann[p as usize - 1] * xi.exp();
            }
            target_even += t;
        }
    }
    let normalization = rep.vev(&OperatorExpr::Product(vec![gl, gr]))?;
    let expected_normalization = minus
        .iter()
        .map(|&(k, s)| {
            let t = plus.iter().find(|&&(j, _)| j == k).map_or(0.0, |&(_, v)| v);
            0.5 * k as f64 * s * t
        })
        .sum::<f64>()
        .exp();
    let w = WeightSpec {
        u0: boltzmann
            .iter()
            .enumerate()
            .map(|(i, &b)| (i as u32 + 1, U0::BoltzmannFloat(b)))
            .collect(),
        default_u0: U0::Infinite,
        tstar: tstar.clone(),
    };
    let m = boltzmann.len() as u32;
    let target = sum_series_tinf(&ClosedForm::S1DI(w), &Truncation::new(m, m as usize, 0))?.to_f64();
    Ok(SolitonicCheck {
        value: raw / normalization,
        target,
        value_even: raw_even / normalization,
        target_even,
        normalization,
        expected_normalization,
    })
}
