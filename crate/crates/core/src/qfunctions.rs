//! Projective Schur functions `Q_α(½t)` as truncated polynomials, and their
//! values at scalar time assignments.
//!
//! Rows come from `Σ q_n zⁿ = exp(Σ_{k odd} t_k z^k)`, two-row functions from
//! `Q_(a,b) = q_a q_b + 2 Σ_{i=1..b} (−1)^i q_{a+i} q_{b−i}`, and general
//! `Q_α` from the Pfaffian of two-row entries (odd lengths padded with a zero
//! part, `Q_(a,0) = q_a`).

use std::collections::HashMap;

use num_traits::One;
use thiserror::Error;

use crate::partitions::{delta_star, StrictPartition};
use crate::pfaffian::{pfaffian_ring, PfaffianError, SkewMatrix};
use crate::polyring::{Family, GradedPoly, Var};
use crate::ring::{factorial_rational, rat_int, Rational, Ring, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("two-row index ({0},{0}) is not strict")]
    RepeatedPart(u32),
    #[error(transparent)]
    Pfaffian(#[from] PfaffianError),
}

/// `Q_α(½t)` together with its partition.
#[derive(Clone, Debug, PartialEq)]
pub struct QFunction {
    pub partition: StrictPartition,
    pub poly: GradedPoly,
}

/// Rows `q_0 … q_max` in the variables of `family`.
pub fn q_rows(max_n: u32, cap: u32, family: Family) -> Vec<GradedPoly> {
    let mut rows = vec![GradedPoly::one(cap)];
    for n in 1..=max_n {
        let mut acc = GradedPoly::zero(cap);
        for k in (1..=n).step_by(2) {
            let v = Var { family, index: k };
            let term = GradedPoly::var(v, cap).mul_ref(&rows[(n - k) as usize]);
            acc = acc.add(&term.scale(&rat_int(k as i64)));
        }
        rows.push(acc.scale(&Rational::new(1.into(), (n as i64).into())));
    }
    rows
}

/// `q_n` in the `t` variables; negative `n` gives 0.
pub fn q_row(n: i64, cap: u32) -> GradedPoly {
    if n < 0 {
        return GradedPoly::zero(cap);
    }
    q_rows(n as u32, cap, Family::T).pop().unwrap()
}

fn pair_from_rows<T: Ring>(a: u32, b: u32, rows: &[T]) -> T {
    let (a, b) = (a as usize, b as usize);
    let zero = rows[0].zero_like();
    let get = |k: usize| rows.get(k).cloned().unwrap_or_else(|| zero.clone());
    let mut acc = get(a).mul_ref(&get(b));
    for i in 1..=b {
        let term = get(a + i).mul_ref(&get(b - i));
        let twice = term.add_ref(&term);
        acc = if i % 2 == 1 { acc.sub_ref(&twice) } else { acc.add_ref(&twice) };
    }
    acc
}

/// `Q_(a,b)(½t)` for `a ≠ b`, continued antisymmetrically to `a < b`.
pub fn q_pair(a: u32, b: u32, cap: u32) -> Result<GradedPoly, QError> {
    if a == b {
        return Err(QError::RepeatedPart(a));
    }
    let rows = q_rows(a + b, cap, Family::T);
    Ok(if a > b {
        pair_from_rows(a, b, &rows)
    } else {
        pair_from_rows(b, a, &rows).neg()
    })
}

/// Pfaffian assembly shared by the polynomial and scalar paths.
fn schur_from_pairs<T: Ring>(
    alpha: &StrictPartition,
    zero: T,
    pair: &mut dyn FnMut(u32, u32) -> T,
) -> Result<T, QError> {
    let parts = alpha.padded_even();
    if parts.is_empty() {
        return Ok(zero.one_like());
    }
    let m = SkewMatrix::from_fn(parts.len(), zero, |i, j| pair(parts[i], parts[j]));
    Ok(pfaffian_ring(&m)?)
}

/// `Q_α(½t)` as a polynomial truncated at `cap`.
pub fn q_schur(alpha: &StrictPartition, cap: u32) -> Result<QFunction, QError> {
    let mut cache = QCache::new(cap, Family::T);
    let poly = cache.q_schur(alpha)?;
    Ok(QFunction { partition: alpha.clone(), poly })
}

/// `Q_α(½t∞) = Δ*(α) ∏ 1/α_i!`.
pub fn q_at_tinf(alpha: &StrictPartition) -> Rational {
    alpha
        .positive_parts()
        .iter()
        .fold(delta_star(alpha), |acc, &p| acc / factorial_rational(p))
}

/// Memoized rows, two-row functions and full `Q_α` for one cap and family.
pub struct QCache {
    cap: u32,
    family: Family,
    rows: Vec<GradedPoly>,
    pairs: HashMap<(u32, u32), GradedPoly>,
    full: HashMap<StrictPartition, GradedPoly>,
}

impl QCache {
    pub fn new(cap: u32, family: Family) -> Self {
        Self {
            cap,
            family,
            rows: q_rows(0, cap, family),
            pairs: HashMap::new(),
            full: HashMap::new(),
        }
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    fn ensure_rows(&mut self, n: u32) {
        if self.rows.len() <= n as usize {
            self.rows = q_rows(n.max(self.cap), self.cap, self.family);
        }
    }

    pub fn row(&mut self, n: u32) -> GradedPoly {
        self.ensure_rows(n);
        self.rows[n as usize].clone()
    }

    pub fn pair(&mut self, a: u32, b: u32) -> GradedPoly {
        if a < b {
            return self.pair(b, a).neg();
        }
        if let Some(p) = self.pairs.get(&(a, b)) {
            return p.clone();
        }
        self.ensure_rows(a + b);
        let p = pair_from_rows(a, b, &self.rows);
        self.pairs.insert((a, b), p.clone());
        p
    }

    pub fn q_schur(&mut self, alpha: &StrictPartition) -> Result<GradedPoly, QError> {
        if alpha.weight() > self.cap {
            return Ok(GradedPoly::zero(self.cap));
        }
        if let Some(p) = self.full.get(alpha) {
            return Ok(p.clone());
        }
        let zero = GradedPoly::zero(self.cap);
        let p = schur_from_pairs(alpha, zero, &mut |a, b| self.pair(a, b))?;
        self.full.insert(alpha.clone(), p.clone());
        Ok(p)
    }
}

/// Rows `q_0 … q_max` evaluated at a scalar assignment of odd times
/// (`times[k] = t_k`, missing entries are zero).
pub fn q_rows_at<T: Scalar>(max_n: u32, times: &[(u32, T)], one: &T) -> Vec<T> {
    let mut rows = vec![one.clone()];
    for n in 1..=max_n {
        let mut acc = one.zero_like();
        for (k, tk) in times {
            if *k == 0 || k % 2 == 0 || *k > n {
                continue;
            }
            let c = T::from_i64(*k as i64).mul_ref(tk);
            acc = acc.add_ref(&c.mul_ref(&rows[(n - k) as usize]));
        }
        rows.push(acc.div_ref(&T::from_i64(n as i64)));
    }
    rows
}

/// `Q_α(½t)` at a scalar time assignment.
pub struct QScalarCache<T: Scalar> {
    rows: Vec<T>,
    times: Vec<(u32, T)>,
    full: HashMap<StrictPartition, T>,
}

impl<T: Scalar> QScalarCache<T> {
    pub fn new(times: &[(u32, T)]) -> Self {
        let one = T::from_i64(1);
        Self { rows: q_rows_at(0, times, &one), times: times.to_vec(), full: HashMap::new() }
    }

    fn ensure_rows(&mut self, n: u32) {
        if self.rows.len() <= n as usize {
            self.rows = q_rows_at(n + 8, &self.times, &T::from_i64(1));
        }
    }

    pub fn row(&mut self, n: u32) -> T {
        self.ensure_rows(n);
        self.rows[n as usize].clone()
    }

    pub fn pair(&mut self, a: u32, b: u32) -> T {
        self.ensure_rows(a + b);
        if a > b {
            pair_from_rows(a, b, &self.rows)
        } else {
            pair_from_rows(b, a, &self.rows).neg_ref()
        }
    }

    pub fn q_schur(&mut self, alpha: &StrictPartition) -> Result<T, QError> {
        if let Some(v) = self.full.get(alpha) {
            return Ok(v.clone());
        }
        self.ensure_rows(alpha.largest() * 2 + 1);
        let rows = self.rows.clone();
        let v = schur_from_pairs(alpha, T::from_i64(0), &mut |a, b| {
            if a > b {
                pair_from_rows(a, b, &rows)
            } else {
                pair_from_rows(b, a, &rows).neg_ref()
            }
        })?;
        self.full.insert(alpha.clone(), v.clone());
        Ok(v)
    }
}

/// The `t∞ = (1, 0, 0, …)` assignment in the `t` family.
pub fn t_infinity() -> std::collections::BTreeMap<Var, Rational> {
    [(Var::t(1), Rational::one())].into_iter().collect()
}

/// Checks homogeneity of degree `|α|` (trivially true for the zero polynomial).
pub fn is_homogeneous(q: &QFunction) -> bool {
    q.poly.is_homogeneous(q.partition.weight())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::enumerate_dp;
    use crate::polyring::Monomial;
    use crate::ring::rat;

    fn sp(p: &[u32]) -> StrictPartition {
        StrictPartition::new(p.to_vec()).unwrap()
    }

    fn mono(pairs: &[(u32, u32)]) -> Monomial {
        Monomial::from_pairs(pairs.iter().map(|&(k, e)| (Var::t(k), e)))
    }

    #[test]
    fn rows_match_generating_function() {
        let q1 = q_row(1, 5);
        assert_eq!(q1, GradedPoly::var(Var::t(1), 5));
        let q3 = q_row(3, 5);
        assert_eq!(q3.coeff(&mono(&[(1, 3)])), rat(1, 6));
        assert_eq!(q3.coeff(&mono(&[(3, 1)])), rat(1, 1));
        assert_eq!(q3.len(), 2);
        assert_eq!(q_row(0, 5), GradedPoly::one(5));
        assert!(q_row(-2, 5).is_zero());
    }

    #[test]
    fn two_row_examples() {
        let q21 = q_pair(2, 1, 4).unwrap();
        assert_eq!(q21.coeff(&mono(&[(1, 3)])), rat(1, 6));
        assert_eq!(q21.coeff(&mono(&[(3, 1)])), rat(-2, 1));
        assert_eq!(q21.len(), 2);
        assert_eq!(q_pair(1, 2, 4).unwrap(), q21.neg());
        assert_eq!(q_pair(1, 0, 4).unwrap(), q_row(1, 4));
        assert!(q_pair(2, 2, 4).is_err());
        let at = q21.eval_rational_sparse(&t_infinity());
        assert_eq!(at, rat(1, 6));
    }

    #[test]
    fn schur_examples() {
        assert_eq!(q_schur(&sp(&[2, 1]), 6).unwrap().poly, q_pair(2, 1, 6).unwrap());
        let q321 = q_schur(&sp(&[3, 2, 1]), 6).unwrap();
        assert_eq!(q321.poly.eval_rational_sparse(&t_infinity()), rat(1, 360));
        assert_eq!(q_schur(&StrictPartition::empty(), 3).unwrap().poly, GradedPoly::one(3));
        assert_eq!(q_at_tinf(&sp(&[2, 1])), rat(1, 6));
        assert_eq!(q_at_tinf(&sp(&[1])), rat(1, 1));
        assert_eq!(q_at_tinf(&sp(&[4, 1])), rat(1, 40));
        let q41 = q_schur(&sp(&[4, 1]), 5).unwrap();
        assert_eq!(q41.poly.eval_rational_sparse(&t_infinity()), rat(1, 40));
    }

    #[test]
    fn specialization_and_homogeneity_up_to_ten() {
        let cap = 10;
        let mut cache = QCache::new(cap, Family::T);
        for alpha in enumerate_dp(cap, 5) {
            if alpha.weight() > cap {
                continue;
            }
            let poly = cache.q_schur(&alpha).unwrap();
            assert!(poly.is_homogeneous(alpha.weight()), "{alpha}");
            assert_eq!(poly.eval_rational_sparse(&t_infinity()), q_at_tinf(&alpha), "{alpha}");
        }
    }

    #[test]
    fn four_part_three_term_expansion() {
        let cap = 12;
        let alpha = sp(&[5, 4, 2, 1]);
        let p = |a, b| q_pair(a, b, cap).unwrap();
        let three_term = p(5, 4)
            .mul_ref(&p(2, 1))
            .sub(&p(5, 2).mul_ref(&p(4, 1)))
            .add(&p(5, 1).mul_ref(&p(4, 2)));
        assert_eq!(q_schur(&alpha, cap).unwrap().poly, three_term);
    }

    #[test]
    fn scalar_path_matches_polynomial() {
        let times = [(1u32, rat(2, 3)), (3, rat(-1, 2)), (5, rat(1, 7))];
        let assign = times.iter().map(|(k, v)| (Var::t(*k), v.clone())).collect();
        let mut scalar = QScalarCache::new(&times);
        let mut poly = QCache::new(9, Family::T);
        for alpha in enumerate_dp(6, 3) {
            if alpha.weight() > 9 {
                continue;
            }
            let expected = poly.q_schur(&alpha).unwrap().eval_rational_sparse(&assign);
            assert_eq!(scalar.q_schur(&alpha).unwrap(), expected, "{alpha}");
        }
    }

    #[test]
    fn bar_family_rows() {
        let rows = q_rows(3, 3, Family::TBar);
        assert_eq!(rows[3].swap_families(), q_row(3, 3));
    }
}
