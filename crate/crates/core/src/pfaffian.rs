//! Pfaffians and determinants of exact, ring-valued and floating matrices,
//! plus the sign lemma relating `Pf[sgn(z_i − z_j)]` to `Δ*(z)`.

use std::collections::HashMap;

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::ring::{Field, Rational, Ring};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfaffianError {
    #[error("Pfaffian of odd dimension {0} requested")]
    OddDimension(usize),
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("coincident points at positions {0} and {1}")]
    Coincident(usize, usize),
    #[error("matrix is not skew-symmetric at ({0}, {1})")]
    NotSkew(usize, usize),
    #[error("dimension {0} exceeds the supported bound {1}")]
    TooLarge(usize, usize),
}

/// Antisymmetric matrix stored through its strict upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix<T> {
    n: usize,
    upper: Vec<T>,
    zero: T,
}

impl<T: Ring> SkewMatrix<T> {
    /// Builds `M` with `M_ij = f(i, j)` for `i < j`. `zero` fixes the shape of
    /// the zero element (relevant for truncated polynomials).
    pub fn from_fn(n: usize, zero: T, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper, zero }
    }

    pub fn from_dense(rows: &[Vec<T>], zero: T) -> Result<Self, PfaffianError> {
        let n = rows.len();
        for i in 0..n {
            if !rows[i][i].is_zero_value() {
                return Err(PfaffianError::NotSkew(i, i));
            }
            for j in i + 1..n {
                if !rows[i][j].add_ref(&rows[j][i]).is_zero_value() {
                    return Err(PfaffianError::NotSkew(i, j));
                }
            }
        }
        Ok(Self::from_fn(n, zero, |i, j| rows[i][j].clone()))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => self.zero.clone(),
            Less => self.upper[self.idx(i, j)].clone(),
            Greater => self.upper[self.idx(j, i)].neg_ref(),
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        assert!(i != j, "diagonal of a skew matrix is fixed at zero");
        if i < j {
            let k = self.idx(i, j);
            self.upper[k] = value;
        } else {
            let k = self.idx(j, i);
            self.upper[k] = value.neg_ref();
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Principal submatrix on the given ordered index list.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), self.zero.clone(), |i, j| self.get(idx[i], idx[j]))
    }

    /// Appends one row/column with `M_{i,n} = column[i]` (the odd-size augmentation).
    pub fn augmented(&self, column: &[T]) -> Self {
        assert_eq!(column.len(), self.n);
        Self::from_fn(self.n + 1, self.zero.clone(), |i, j| {
            if j == self.n {
                column[i].clone()
            } else {
                self.get(i, j)
            }
        })
    }

    pub fn map<U: Ring>(&self, zero: U, f: impl Fn(&T) -> U) -> SkewMatrix<U> {
        SkewMatrix { n: self.n, upper: self.upper.iter().map(f).collect(), zero }
    }
}

impl SkewMatrix<Rational> {
    /// Builds a matrix from `(i, j, value)` triplets; unspecified entries are zero.
    pub fn from_upper_triplets(
        n: usize,
        triplets: &[(usize, usize, Rational)],
    ) -> Result<Self, PfaffianError> {
        let mut m = Self::from_fn(n, Rational::zero(), |_, _| Rational::zero());
        for (i, j, v) in triplets {
            if *i >= n || *j >= n || i == j {
                return Err(PfaffianError::NotSkew(*i, *j));
            }
            m.set(*i, *j, v.clone());
        }
        Ok(m)
    }
}

/// Exact Pfaffian over a field by skew Gaussian elimination.
///
/// Each step pairs row `k` with a pivot row, folds the rest of the matrix
/// through the Schur complement and multiplies the pivot into the result.
pub fn pfaffian_exact<T: Field>(m: &SkewMatrix<T>) -> Result<T, PfaffianError> {
    let n = m.dim();
    if n % 2 == 1 {
        return Err(PfaffianError::OddDimension(n));
    }
    let mut a = m.to_dense();
    let mut result = m.zero.one_like();
    let mut k = 0;
    while k < n {
        let pivot = (k + 1..n).find(|&j| !a[k][j].is_zero_value());
        let Some(p) = pivot else {
            return Ok(m.zero.clone());
        };
        if p != k + 1 {
            a.swap(k + 1, p);
            for row in a.iter_mut() {
                row.swap(k + 1, p);
            }
            result = result.neg_ref();
        }
        let piv = a[k][k + 1].clone();
        result = result.mul_ref(&piv);
        for i in k + 2..n {
            for j in i + 1..n {
                // S_ij = A_ij + (A_{k+1,i} A_{k,j} − A_{k,i} A_{k+1,j}) / A_{k,k+1}
                let t = a[k + 1][i]
                    .mul_ref(&a[k][j])
                    .sub_ref(&a[k][i].mul_ref(&a[k + 1][j]))
                    .div_ref(&piv);
                let v = a[i][j].add_ref(&t);
                a[j][i] = v.neg_ref();
                a[i][j] = v;
            }
        }
        k += 2;
    }
    Ok(result)
}

/// Division-free Pfaffian over any commutative ring, by first-row expansion
/// memoized on the set of surviving indices. Cost grows like `2^n`, so the
/// dimension is bounded by 24.
pub fn pfaffian_ring<T: Ring>(m: &SkewMatrix<T>) -> Result<T, PfaffianError> {
    let n = m.dim();
    if n % 2 == 1 {
        return Err(PfaffianError::OddDimension(n));
    }
    if n > 24 {
        return Err(PfaffianError::TooLarge(n, 24));
    }
    let dense = m.to_dense();
    let mut memo: HashMap<u32, T> = HashMap::new();
    let full: u32 = if n == 0 { 0 } else { (1u32 << n) - 1 };
    Ok(expand(full, &dense, &m.zero, &mut memo))
}

fn expand<T: Ring>(mask: u32, a: &[Vec<T>], zero: &T, memo: &mut HashMap<u32, T>) -> T {
    if mask == 0 {
        return zero.one_like();
    }
    if let Some(v) = memo.get(&mask) {
        return v.clone();
    }
    let i = mask.trailing_zeros() as usize;
    let rest = mask & !(1 << i);
    let mut acc = zero.clone();
    let mut sign_positive = true;
    let mut bits = rest;
    while bits != 0 {
        let j = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        if !a[i][j].is_zero_value() {
            let sub = expand(rest & !(1 << j), a, zero, memo);
            if !sub.is_zero_value() {
                let term = a[i][j].mul_ref(&sub);
                acc = if sign_positive { acc.add_ref(&term) } else { acc.sub_ref(&term) };
            }
        }
        sign_positive = !sign_positive;
    }
    memo.insert(mask, acc.clone());
    acc
}

/// Sum over perfect matchings with crossing signs. Reference implementation
/// for small matrices (n ≤ 8 in practice).
pub fn pfaffian_matching<T: Ring>(m: &SkewMatrix<T>) -> Result<T, PfaffianError> {
    let n = m.dim();
    if n % 2 == 1 {
        return Err(PfaffianError::OddDimension(n));
    }
    if n > 14 {
        return Err(PfaffianError::TooLarge(n, 14));
    }
    fn rec<T: Ring>(m: &SkewMatrix<T>, remaining: &[usize]) -> T {
        if remaining.is_empty() {
            return m.zero.one_like();
        }
        let first = remaining[0];
        let mut acc = m.zero.clone();
        for (pos, &j) in remaining.iter().enumerate().skip(1) {
            let rest: Vec<usize> = remaining
                .iter()
                .enumerate()
                .filter(|&(q, _)| q != 0 && q != pos)
                .map(|(_, &x)| x)
                .collect();
            let term = m.get(first, j).mul_ref(&rec(m, &rest));
            acc = if pos % 2 == 1 { acc.add_ref(&term) } else { acc.sub_ref(&term) };
        }
        acc
    }
    let all: Vec<usize> = (0..n).collect();
    Ok(rec(m, &all))
}

/// Pfaffian of a complex antisymmetric matrix by Householder
/// tridiagonalization.
pub fn pfaffian_complex(m: &SkewMatrix<Complex64>) -> Result<Complex64, PfaffianError> {
    let n = m.dim();
    if n % 2 == 1 {
        return Err(PfaffianError::OddDimension(n));
    }
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut a = m.to_dense();
    for i in 0..n {
        for j in 0..n {
            if !(a[i][j].re.is_finite() && a[i][j].im.is_finite()) {
                return Err(PfaffianError::NonFinite(i, j));
            }
        }
    }
    let mut pf = Complex64::new(1.0, 0.0);
    for i in 0..n - 2 {
        let x: Vec<Complex64> = (i + 1..n).map(|r| a[r][i]).collect();
        let sigma: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        let (v, tau, alpha) = if sigma == 0.0 {
            (vec![Complex64::zero(); x.len()], 0.0, x[0])
        } else {
            let norm_x = (x[0].norm_sqr() + sigma).sqrt();
            let phase = Complex64::from_polar(1.0, x[0].im.atan2(x[0].re));
            let mut v = x.clone();
            v[0] += phase * norm_x;
            let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in v.iter_mut() {
                *z /= vn;
            }
            (v, 2.0, -phase * norm_x)
        };
        a[i + 1][i] = alpha;
        a[i][i + 1] = -alpha;
        for r in i + 2..n {
            a[r][i] = Complex64::zero();
            a[i][r] = Complex64::zero();
        }
        if tau != 0.0 {
            let k = n - i - 1;
            let w: Vec<Complex64> = (0..k)
                .map(|r| {
                    let mut s = Complex64::zero();
                    for c in 0..k {
                        s += a[i + 1 + r][i + 1 + c] * v[c].conj();
                    }
                    s * tau
                })
                .collect();
            for r in 0..k {
                for c in 0..k {
                    a[i + 1 + r][i + 1 + c] += v[r] * w[c] - w[r] * v[c];
                }
            }
            pf *= 1.0 - tau;
        }
        if i % 2 == 0 {
            pf *= -alpha;
        }
    }
    pf *= a[n - 2][n - 1];
    Ok(pf)
}

/// Real Pfaffian through the complex tridiagonalization.
pub fn pfaffian_float(m: &SkewMatrix<f64>) -> Result<f64, PfaffianError> {
    let c = m.map(Complex64::zero(), |&x| Complex64::new(x, 0.0));
    Ok(pfaffian_complex(&c)?.re)
}

/// Exact determinant over a field by fraction-preserving elimination.
pub fn det_exact<T: Field>(rows: &[Vec<T>], zero: &T) -> T {
    let n = rows.len();
    let mut a = rows.to_vec();
    let mut det = zero.one_like();
    for k in 0..n {
        let Some(p) = (k..n).find(|&r| !a[r][k].is_zero_value()) else {
            return zero.clone();
        };
        if p != k {
            a.swap(p, k);
            det = det.neg_ref();
        }
        let piv = a[k][k].clone();
        det = det.mul_ref(&piv);
        for r in k + 1..n {
            if a[r][k].is_zero_value() {
                continue;
            }
            let f = a[r][k].div_ref(&piv);
            for c in k..n {
                let v = a[r][c].sub_ref(&f.mul_ref(&a[k][c]));
                a[r][c] = v;
            }
        }
    }
    det
}

/// Division-free determinant (Laplace expansion memoized on column sets).
pub fn det_ring<T: Ring>(rows: &[Vec<T>], zero: &T) -> T {
    let n = rows.len();
    assert!(n <= 24, "det_ring supports n ≤ 24");
    fn rec<T: Ring>(row: usize, cols: u32, a: &[Vec<T>], zero: &T, memo: &mut HashMap<u32, T>) -> T {
        if row == a.len() {
            return zero.one_like();
        }
        if let Some(v) = memo.get(&cols) {
            return v.clone();
        }
        let mut acc = zero.clone();
        let mut parity = false;
        for c in 0..a.len() {
            if cols & (1 << c) == 0 {
                continue;
            }
            if !a[row][c].is_zero_value() {
                let term = a[row][c].mul_ref(&rec(row + 1, cols & !(1 << c), a, zero, memo));
                acc = if parity { acc.sub_ref(&term) } else { acc.add_ref(&term) };
            }
            parity = !parity;
        }
        memo.insert(cols, acc.clone());
        acc
    }
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    rec(0, full, rows, zero, &mut HashMap::new())
}

/// LU determinant with partial pivoting.
pub fn det_float(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let mut a = rows.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))
            .unwrap();
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det *= a[k][k];
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..n {
                a[r][c] -= f * a[k][c];
            }
        }
    }
    det
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContourKind {
    /// Positive reals.
    A,
    /// Arc of the unit circle, points given by their angles.
    B,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgnReport {
    pub pfaffian_sign: i32,
    pub delta_sign: i32,
    /// `|Im w| / |w|` for the phase-corrected Δ* (0 on contour A).
    pub imaginary_ratio: f64,
    pub realness_ok: bool,
    pub holds: bool,
}

/// `Pf[sgn(ς_i − ς_j)]`, with a column of ones appended for odd `N`.
pub fn sgn_pfaffian(values: &[f64]) -> Result<i32, PfaffianError> {
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            if values[i] == values[j] {
                return Err(PfaffianError::Coincident(i, j));
            }
        }
    }
    let m = SkewMatrix::from_fn(values.len(), Rational::zero(), |i, j| {
        Rational::from_integer(if values[i] > values[j] { 1.into() } else { (-1).into() })
    });
    let m = if values.len() % 2 == 1 {
        let ones = vec![Rational::from_integer(1.into()); values.len()];
        m.augmented(&ones)
    } else {
        m
    };
    let pf = pfaffian_exact(&m)?;
    Ok(if pf.is_positive() { 1 } else if pf.is_negative() { -1 } else { 0 })
}

/// Checks the sign lemma for one point set.
///
/// Contour A takes positive reals and compares with `sgn Δ*(z)`. Contour B
/// takes angles in (0, π), forms `w = e^{−iπ(N²−N)/4} Δ*(e^{iφ})`, checks it
/// is real to `1e−12` relative, and compares with `sgn Re w`.
pub fn sgn_pfaffian_check(points: &[f64], kind: ContourKind) -> Result<SgnReport, PfaffianError> {
    let pfaffian_sign = sgn_pfaffian(points)?;
    let n = points.len();
    let (delta_sign, imaginary_ratio) = match kind {
        ContourKind::A => {
            let mut s = 1.0f64;
            for i in 0..n {
                for j in i + 1..n {
                    s *= (points[i] - points[j]) / (points[i] + points[j]);
                }
            }
            (if s > 0.0 { 1 } else { -1 }, 0.0)
        }
        ContourKind::B => {
            let z: Vec<Complex64> = points.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
            let mut w = Complex64::new(1.0, 0.0);
            for i in 0..n {
                for j in i + 1..n {
                    w *= (z[i] - z[j]) / (z[i] + z[j]);
                }
            }
            let nn = n as f64;
            w *= Complex64::from_polar(1.0, -std::f64::consts::PI * (nn * nn - nn) / 4.0);
            let ratio = w.im.abs() / w.norm();
            (if w.re > 0.0 { 1 } else { -1 }, ratio)
        }
    };
    let realness_ok = imaginary_ratio <= 1e-12;
    Ok(SgnReport {
        pfaffian_sign,
        delta_sign,
        imaginary_ratio,
        realness_ok,
        holds: realness_ok && pfaffian_sign == delta_sign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{rat, rat_int};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rational_skew(n: usize, rng: &mut ChaCha8Rng) -> SkewMatrix<Rational> {
        SkewMatrix::from_fn(n, Rational::zero(), |_, _| rat(rng.gen_range(-9..=9), rng.gen_range(1..=5)))
    }

    #[test]
    fn small_examples() {
        let a = rat(7, 3);
        let m = SkewMatrix::from_fn(2, Rational::zero(), |_, _| a.clone());
        assert_eq!(pfaffian_exact(&m).unwrap(), a);
        let ones = SkewMatrix::from_fn(4, Rational::zero(), |_, _| rat_int(1));
        assert_eq!(pfaffian_exact(&ones).unwrap(), rat_int(1));
        assert_eq!(pfaffian_ring(&ones).unwrap(), rat_int(1));
        assert_eq!(pfaffian_matching(&ones).unwrap(), rat_int(1));
        let odd = SkewMatrix::from_fn(3, Rational::zero(), |_, _| rat_int(1));
        assert_eq!(pfaffian_exact(&odd), Err(PfaffianError::OddDimension(3)));
        let empty = SkewMatrix::from_fn(0, Rational::zero(), |_, _| rat_int(1));
        assert_eq!(pfaffian_exact(&empty).unwrap(), rat_int(1));
        let f = SkewMatrix::from_fn(2, 0.0, |_, _| 1.5);
        assert!((pfaffian_float(&f).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn cayley_kernel_gives_delta_star() {
        let z = [4i64, 3, 2, 1];
        let m = SkewMatrix::from_fn(4, Rational::zero(), |i, j| rat(z[i] - z[j], z[i] + z[j]));
        let expected = crate::partitions::delta_star_seq(&z).unwrap();
        assert_eq!(pfaffian_exact(&m).unwrap(), expected);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let mut m = SkewMatrix::from_fn(4, Rational::zero(), |_, _| Rational::zero());
        m.set(0, 2, rat_int(2));
        m.set(1, 3, rat_int(5));
        m.set(1, 2, rat_int(1));
        let expected = pfaffian_matching(&m).unwrap();
        assert_eq!(pfaffian_exact(&m).unwrap(), expected);
        assert_eq!(expected, rat_int(-10));
    }

    #[test]
    fn exact_kernels_agree_and_square_to_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 4, 6, 8] {
            let m = random_rational_skew(n, &mut rng);
            let pf = pfaffian_exact(&m).unwrap();
            assert_eq!(pfaffian_ring(&m).unwrap(), pf);
            assert_eq!(pfaffian_matching(&m).unwrap(), pf);
            let det = det_exact(&m.to_dense(), &Rational::zero());
            assert_eq!(&pf * &pf, det);
            assert_eq!(det_ring(&m.to_dense(), &Rational::zero()), det);
        }
    }

    #[test]
    fn float_matches_exact_and_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_rational_skew(8, &mut rng);
        let exact = crate::ring::rational_to_f64(&pfaffian_exact(&m).unwrap());
        let f = m.map(0.0, crate::ring::rational_to_f64);
        let approx = pfaffian_float(&f).unwrap();
        assert!(((approx - exact) / exact).abs() < 1e-12);

        let big = SkewMatrix::from_fn(50, 0.0, |_, _| rng.gen_range(-1.0..1.0));
        let pf = pfaffian_float(&big).unwrap();
        let det = det_float(&big.to_dense());
        assert!(((pf * pf - det) / det).abs() < 1e-10);
    }

    #[test]
    fn complex_pfaffian_matches_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = SkewMatrix::from_fn(6, Complex64::zero(), |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let a = pfaffian_complex(&m).unwrap();
        let b = pfaffian_matching(&m).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn non_finite_rejected() {
        let m = SkewMatrix::from_fn(2, 0.0, |_, _| f64::NAN);
        assert!(matches!(pfaffian_float(&m), Err(PfaffianError::NonFinite(..))));
    }

    #[test]
    fn sign_lemma_examples() {
        let r = sgn_pfaffian_check(&[3.0, 1.0], ContourKind::A).unwrap();
        assert_eq!((r.pfaffian_sign, r.delta_sign), (1, 1));
        let r = sgn_pfaffian_check(&[1.0, 3.0], ContourKind::A).unwrap();
        assert_eq!((r.pfaffian_sign, r.delta_sign), (-1, -1));
        let r = sgn_pfaffian_check(&[0.3, 2.1, 1.2, 0.7], ContourKind::B).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(sgn_pfaffian_check(&[1.0, 1.0], ContourKind::A).is_err());
        let odd = sgn_pfaffian_check(&[0.5, 2.0, 1.0], ContourKind::A).unwrap();
        assert!(odd.holds);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scaling_row_and_column(seed in 0u64..1000, i in 0usize..6, num in -5i64..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_rational_skew(6, &mut rng);
            let lambda = rat(num, 3);
            let scaled = SkewMatrix::from_fn(6, Rational::zero(), |a, b| {
                let v = m.get(a, b);
                if a == i || b == i { v * &lambda } else { v }
            });
            prop_assert_eq!(pfaffian_exact(&scaled).unwrap(), pfaffian_exact(&m).unwrap() * lambda);
        }

        #[test]
        fn permutation_covariance(seed in 0u64..1000, perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_rational_skew(6, &mut rng);
            let permuted = m.submatrix(&perm);
            let mut inversions = 0;
            for a in 0..perm.len() {
                for b in a + 1..perm.len() {
                    if perm[a] > perm[b] { inversions += 1; }
                }
            }
            let sign = if inversions % 2 == 0 { rat_int(1) } else { rat_int(-1) };
            prop_assert_eq!(pfaffian_exact(&permuted).unwrap(), pfaffian_exact(&m).unwrap() * sign);
        }
    }
}
