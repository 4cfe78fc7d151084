//! The `verify-all` identity suite.

use bkp_tau::fermionic::{hirota_residual, oracle_sum};
use bkp_tau::integrals::{
    braden_first_term, braden_g, cauchy_pf_identity_check, grand_z, BiMeasure, Contour, ContourMeasure,
    DeformationTimes, Density, GrandSpec, IntegralId, QuadratureSpec,
};
use bkp_tau::partitions::{delta_star, enumerate_dp};
use bkp_tau::pfaffian::{det_exact, pfaffian_exact, SkewMatrix};
use bkp_tau::qfunctions::{q_schur, t_infinity};
use bkp_tau::ring::{factorial_rational, Rational};
use bkp_tau::tausums::{
    model_distribution, specialize_pair_coeffs, sum_series, sum_series_at, Number, Series, SpecTarget, Truncation,
    WeightSpec,
};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub tolerance: f64,
}

fn check(name: &'static str, tolerance: f64, f: impl FnOnce() -> Result<(bool, String), String>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail, tolerance },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}"), tolerance },
    }
}

fn random_rational(rng: &mut ChaCha8Rng, lo: i64, hi: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(rng.gen_range(lo..=hi)), BigInt::from(rng.gen_range(1..=den)))
}

pub fn run(level: Level, seed: u64) -> Vec<Check> {
    let full = level == Level::Full;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let max_weight = if full { 14 } else { 10 };
    out.push(check("q_at_t_infinity", 0.0, || {
        let tinf = t_infinity();
        let mut count = 0;
        for alpha in enumerate_dp(max_weight, max_weight as usize).into_iter().filter(|a| a.weight() <= max_weight) {
            let q = q_schur(&alpha, alpha.weight()).map_err(|e| e.to_string())?;
            let got = q.poly.eval_rational_sparse(&tinf);
            let mut expected = delta_star(&alpha);
            for &p in alpha.positive_parts() {
                expected /= factorial_rational(p);
            }
            if got != expected {
                return Ok((false, format!("mismatch at {alpha}")));
            }
            count += 1;
        }
        Ok((true, format!("{count} partitions with |α| ≤ {max_weight}")))
    }));

    let sizes: &[usize] = if full { &[2, 4, 6, 8, 10] } else { &[2, 4, 6] };
    let mats: Vec<SkewMatrix<Rational>> = sizes
        .iter()
        .map(|&n| {
            let vals: Vec<Rational> = (0..n * n).map(|_| random_rational(&mut rng, -9, 9, 5)).collect();
            SkewMatrix::from_fn(n, Rational::zero(), |i, j| vals[i * n + j].clone())
        })
        .collect();
    out.push(check("pfaffian_squared_is_det", 0.0, || {
        for m in &mats {
            let pf = pfaffian_exact(m).map_err(|e| e.to_string())?;
            let det = det_exact(&m.to_dense(), &Rational::zero());
            if &pf * &pf != det {
                return Ok((false, format!("n = {}", m.dim())));
            }
        }
        Ok((true, format!("sizes {sizes:?}")))
    }));

    let xs: Vec<Rational> = (0..if full { 6 } else { 4 }).map(|k| random_rational(&mut rng, 1, 20, 7) + Rational::from_integer(BigInt::from(30 * k))).collect();
    out.push(check("cauchy_pfaffian_determinant", 0.0, || {
        let small = cauchy_pf_identity_check(&[Rational::one(), Rational::from_integer(2.into())]).map_err(|e| e.to_string())?;
        let random = cauchy_pf_identity_check(&xs).map_err(|e| e.to_string())?;
        Ok((small.holds && random.holds, format!("x=(1,2) gives {}; random n={} holds={}", small.lhs, xs.len(), random.holds)))
    }));

    let l = if full { 5 } else { 3 };
    let boltz: Vec<Rational> = (0..l).map(|_| random_rational(&mut rng, 1, 6, 4)).collect();
    out.push(check("s3_specializes_to_s1", 0.0, || {
        let w = WeightSpec::from_boltzmann(&boltz);
        let trunc = Truncation::new(l, l as usize, if full { 9 } else { 6 });
        let s1 = sum_series(&Series::S1(w.clone()), &trunc).map_err(|e| e.to_string())?;
        let pc = specialize_pair_coeffs(&SpecTarget::S1(w), l);
        let s3 = sum_series(&Series::S3(pc), &trunc).map_err(|e| e.to_string())?;
        Ok((s1 == s3, format!("L = {l}, {} terms", s1.len())))
    }));

    out.push(check("hirota_on_q_functions", 0.0, || {
        let cap = 8;
        let mut count = 0;
        for alpha in enumerate_dp(8, 8).into_iter().filter(|a| a.weight() <= if full { 8 } else { 5 }) {
            let q = q_schur(&alpha, cap).map_err(|e| e.to_string())?.poly;
            if !hirota_residual(&q).map_err(|e| e.to_string())?.is_zero() {
                return Ok((false, format!("nonzero residual for {alpha}")));
            }
            count += 1;
        }
        Ok((true, format!("{count} Q-functions, cap {cap}")))
    }));

    let weights: Vec<Rational> = (0..4).map(|_| random_rational(&mut rng, 1, 6, 5)).collect();
    let t1: f64 = rng.gen_range(-0.5..0.5);
    let t3: f64 = rng.gen_range(-0.5..0.5);
    out.push(check("fermionic_oracle_s1", 1e-10, || {
        let w = WeightSpec::from_boltzmann(&weights);
        let window = if full { 4 } else { 3 };
        let s = Series::S1(w);
        let t = [(1, t1), (3, t3)];
        let a = oracle_sum(&s, window, &t, &[]).map_err(|e| e.to_string())?;
        let b = sum_series_at(&s, &Truncation::new(window, window as usize, 0), &t, &[]).map_err(|e| e.to_string())?;
        let d = (a - b).abs();
        Ok((d <= 1e-10 * b.abs().max(1.0), format!("|Δ| = {d:e}")))
    }));

    out.push(check("model_b_normalized", 0.0, || {
        let w = WeightSpec::from_boltzmann(&boltz);
        let table = model_distribution(
            &bkp_tau::tausums::Model::B(w),
            &Truncation::new(l, l as usize, 0),
            &[(1, Number::one())],
            &[],
        )
        .map_err(|e| e.to_string())?;
        let s = table.exact_sum();
        Ok((s == Some(Rational::one()), format!("{} entries", table.entries.len())))
    }));

    out.push(check("braden_first_term", 1e-8, || {
        let qs = QuadratureSpec::default();
        let mut worst = 0.0f64;
        for r in [0.5, 1.0, 2.0] {
            let g = braden_g(r, 1, 1, &qs, 1e-8).map_err(|e| e.to_string())?;
            let exact = braden_first_term(r);
            worst = worst.max((g.terms[1] - exact).abs() / exact);
        }
        Ok((worst <= 1e-8, format!("max relative error {worst:e}")))
    }));

    if full {
        out.push(check("z2_equals_z5_diagonal", 1e-12, || {
            let m = ContourMeasure { contour: Contour::A, density: Density::Exponential { rate: 1.0 } };
            let d1 = DeformationTimes { t: [(1, 0.2)].into(), tbar: [(1, 0.1)].into() };
            let d2 = DeformationTimes { t: [(3, -0.05)].into(), tbar: [(3, 0.1)].into() };
            let qs = QuadratureSpec::default();
            let mut worst = 0.0f64;
            for mu in [0.1, 1.0] {
                let z2 = grand_z(
                    &GrandSpec::Single { id: IntegralId::I2, measure: m.clone(), times: d1.combined(&d2), kernel: None },
                    mu,
                    4,
                    &qs,
                    1e-8,
                )
                .map_err(|e| e.to_string())?;
                let z5 = grand_z(
                    &GrandSpec::Bilinear { measure: BiMeasure::Diagonal { measure: m.clone() }, times1: d1.clone(), times2: d2.clone() },
                    mu,
                    4,
                    &qs,
                    1e-8,
                )
                .map_err(|e| e.to_string())?;
                worst = worst.max((z2.re - z5.re).abs() / z2.re.abs());
            }
            Ok((worst <= 1e-12, format!("max relative gap {worst:e}")))
        }));
    }

    out
}
