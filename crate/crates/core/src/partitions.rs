//! Strict partitions and the distinguished families DP, DP² and DP′.
//!
//! Every enumeration returns partitions in one fixed total order: graded by
//! weight `|α|`, ties broken lexicographically on the (decreasing) part list.
//! Truncated sums therefore accumulate terms in a reproducible order.

use std::cmp::Ordering;
use std::fmt;

use log::warn;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::{rat_int, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("parts must be strictly decreasing, got {0:?}")]
    NotStrict(Vec<i64>),
    #[error("negative part in {0:?}")]
    NegativePart(Vec<i64>),
    #[error("parts {0} and {1} give a vanishing denominator")]
    VanishingDenominator(i64, i64),
}

/// A strictly decreasing list of nonnegative parts. A single trailing zero
/// part is representable and acts as padding: it does not count towards the
/// length and contributes nothing to the weight.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct StrictPartition {
    parts: Vec<u32>,
}

impl StrictPartition {
    pub fn new(parts: Vec<u32>) -> Result<Self, PartitionError> {
        if parts.windows(2).any(|w| w[0] <= w[1]) {
            return Err(PartitionError::NotStrict(
                parts.iter().map(|&p| p as i64).collect(),
            ));
        }
        Ok(Self { parts })
    }

    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    /// Builds a partition from parts given in any order.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Result<Self, PartitionError> {
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self::new(parts)
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Parts with the padding zero removed.
    pub fn positive_parts(&self) -> &[u32] {
        match self.parts.last() {
            Some(0) => &self.parts[..self.parts.len() - 1],
            _ => &self.parts,
        }
    }

    /// ℓ(α): number of nonzero parts.
    pub fn len(&self) -> usize {
        self.positive_parts().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn largest(&self) -> u32 {
        self.parts.first().copied().unwrap_or(0)
    }

    pub fn has_zero_part(&self) -> bool {
        self.parts.last() == Some(&0)
    }

    /// Part list padded with a zero to even length (the Pfaffian convention).
    pub fn padded_even(&self) -> Vec<u32> {
        let mut p = self.positive_parts().to_vec();
        if p.len() % 2 == 1 {
            p.push(0);
        }
        p
    }

    /// Consecutive positive parts differ by at least two.
    pub fn is_dp_prime(&self) -> bool {
        self.positive_parts().windows(2).all(|w| w[0] >= w[1] + 2)
    }

    /// Shape `(β₁, β₁−1, β₂, β₂−1, …)` with positive parts.
    pub fn is_dp2(&self) -> bool {
        let p = self.positive_parts();
        p.len() % 2 == 0
            && p.chunks(2).all(|c| c[0] == c[1] + 1)
            && p.chunks(2).collect::<Vec<_>>().windows(2).all(|w| w[0][1] > w[1][0])
    }

    /// Graded-lexicographic comparison used by every enumeration.
    pub fn graded_cmp(&self, other: &Self) -> Ordering {
        self.weight()
            .cmp(&other.weight())
            .then_with(|| self.positive_parts().cmp(other.positive_parts()))
            .then_with(|| self.parts.len().cmp(&other.parts.len()))
    }
}

impl PartialOrd for StrictPartition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StrictPartition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.graded_cmp(other)
    }
}

impl TryFrom<Vec<u32>> for StrictPartition {
    type Error = PartitionError;
    fn try_from(parts: Vec<u32>) -> Result<Self, Self::Error> {
        Self::new(parts)
    }
}

impl From<StrictPartition> for Vec<u32> {
    fn from(p: StrictPartition) -> Self {
        p.parts
    }
}

impl fmt::Display for StrictPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "()");
        }
        let body: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", body.join(","))
    }
}

impl std::str::FromStr for StrictPartition {
    type Err = PartitionError;

    /// Accepts `"4,2,1"`, `"(4,2,1)"`, `"[4,2,1]"` or the empty string.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim().trim_matches(|c| matches!(c, '(' | ')' | '[' | ']'));
        if body.trim().is_empty() {
            return Ok(Self::empty());
        }
        let mut parts = Vec::new();
        for tok in body.split(',') {
            let v: i64 = tok
                .trim()
                .parse()
                .map_err(|_| PartitionError::NotStrict(vec![]))?;
            if v < 0 {
                return Err(PartitionError::NegativePart(vec![v]));
            }
            parts.push(v as u32);
        }
        Self::new(parts)
    }
}

fn subsets_of_range<F>(max_part: u32, max_length: usize, min_gap: u32, keep: F) -> Vec<StrictPartition>
where
    F: Fn(&[u32]) -> bool,
{
    // depth-first over decreasing sequences with the given minimum gap
    fn rec<F: Fn(&[u32]) -> bool>(
        upper: u32,
        max_length: usize,
        min_gap: u32,
        current: &mut Vec<u32>,
        out: &mut Vec<StrictPartition>,
        keep: &F,
    ) {
        if keep(current) {
            out.push(StrictPartition { parts: current.clone() });
        }
        if current.len() == max_length {
            return;
        }
        for next in (1..=upper).rev() {
            current.push(next);
            let next_upper = next.saturating_sub(min_gap);
            rec(next_upper, max_length, min_gap, current, out, keep);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(max_part, max_length, min_gap, &mut Vec::new(), &mut out, &keep);
    out.sort();
    out
}

/// All strict partitions with positive parts `≤ max_part` and at most
/// `max_length` parts, including ∅.
pub fn enumerate_dp(max_part: u32, max_length: usize) -> Vec<StrictPartition> {
    subsets_of_range(max_part, max_length, 1, |_| true)
}

/// All strict partitions with consecutive parts differing by at least two.
pub fn enumerate_dp_prime(max_part: u32, max_length: usize) -> Vec<StrictPartition> {
    subsets_of_range(max_part, max_length, 2, |_| true)
}

/// All DP² shapes `(β₁, β₁−1, β₂, β₂−1, …)` with largest part `≤ max_part`.
///
/// Built from DP′ through [`dp2_from_dp_prime`], so DP² elements with
/// largest part `M` correspond to DP′ elements with largest part `M − 1`.
pub fn enumerate_dp2(max_part: u32) -> Vec<StrictPartition> {
    let mut out: Vec<StrictPartition> = enumerate_dp_prime(max_part.saturating_sub(1), usize::MAX)
        .iter()
        .map(dp2_from_dp_prime)
        .collect();
    out.sort();
    out
}

/// `(γ₁, γ₂, …) ∈ DP′  ↦  (γ₁+1, γ₁, γ₂+1, γ₂, …) ∈ DP²`.
pub fn dp2_from_dp_prime(gamma: &StrictPartition) -> StrictPartition {
    let parts = gamma
        .positive_parts()
        .iter()
        .flat_map(|&g| [g + 1, g])
        .collect();
    StrictPartition { parts }
}

/// Inverse of [`dp2_from_dp_prime`]; `None` when `alpha` is not a DP² shape.
pub fn dp_prime_from_dp2(alpha: &StrictPartition) -> Option<StrictPartition> {
    if !alpha.is_dp2() {
        return None;
    }
    let parts = alpha.positive_parts().chunks(2).map(|c| c[1]).collect();
    Some(StrictPartition { parts })
}

/// Δ*(α) = ∏_{i<j} (α_i − α_j)/(α_i + α_j) over the positive parts.
pub fn delta_star(alpha: &StrictPartition) -> Rational {
    let p = alpha.positive_parts();
    let mut num = Rational::one();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let (a, b) = (p[i] as i64, p[j] as i64);
            num *= Rational::new((a - b).into(), (a + b).into());
        }
    }
    num
}

/// Δ* of an arbitrary (not necessarily sorted) integer sequence. Antisymmetric
/// under transpositions; fails when some `α_i + α_j = 0`.
pub fn delta_star_seq(values: &[i64]) -> Result<Rational, PartitionError> {
    let mut acc = Rational::one();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let s = values[i] + values[j];
            if s == 0 {
                return Err(PartitionError::VanishingDenominator(values[i], values[j]));
            }
            acc *= Rational::new((values[i] - values[j]).into(), s.into());
        }
    }
    Ok(acc)
}

/// Δ̃*(α)⁴ = ∏_{i<j} d²(d²−1) / (s²(s²−1)) with d = α_i − α_j, s = α_i + α_j.
pub fn delta_star_tilde4(alpha: &StrictPartition) -> Rational {
    if !alpha.is_dp_prime() {
        warn!("delta_star_tilde4 called on {alpha}, which is not in DP'");
    }
    let p = alpha.positive_parts();
    let mut acc = Rational::one();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let d = p[i] as i64 - p[j] as i64;
            let s = p[i] as i64 + p[j] as i64;
            let num = rat_int(d * d * (d * d - 1));
            let den = rat_int(s * s * (s * s - 1));
            if num.is_zero() {
                return Rational::zero();
            }
            acc *= num / den;
        }
    }
    acc
}
