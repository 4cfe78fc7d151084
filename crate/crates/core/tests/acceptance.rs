//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always print;
//! the process exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use bkp_tau::fermionic::{build_rep, gamma_op, hirota_residual, oracle_sum, Direction, OperatorExpr};
use bkp_tau::integrals::{
    braden_g, cauchy_pf_identity_check, grand_z, integral_i, integral_i5, BiMeasure, Contour, ContourMeasure,
    Coupling, DeformationTimes, Density, GrandSpec, IntegralId, IntegralReport, Kernel, QuadratureSpec,
};
use bkp_tau::partitions::{enumerate_dp, StrictPartition};
use bkp_tau::pfaffian::{det_exact, pfaffian_exact, pfaffian_float, SkewMatrix};
use bkp_tau::polyring::{assignment, Family, Var};
use bkp_tau::qfunctions::q_schur;
use bkp_tau::ring::Rational;
use bkp_tau::tausums::{
    model_distribution, sample, specialize_dmatrix, specialize_pair_coeffs, sum_series, sum_series_at, Coef,
    DMatrix, Model, Number, PairCoefficients, Series, SpecTarget, Truncation, WeightSpec,
};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const YOU_TOLERANCE: f64 = 1e-10;
const ORACLE_TOLERANCE: f64 = 1e-10;
const SGN_REALNESS: f64 = 1e-12;
const Z_GAP: f64 = 1e-12;
const BESSEL_RELATIVE: f64 = 1e-8;
const SIGMA_BAND: f64 = 4.0;
const QUADRATURE_TOLERANCE: f64 = 1e-8;

struct Outcome {
    passed: bool,
    detail: String,
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn random_rational(rng: &mut ChaCha8Rng, lo: i64, hi: i64, den: i64) -> Rational {
    rat(rng.gen_range(lo..=hi), rng.gen_range(1..=den))
}

fn factorial(n: u32) -> Rational {
    (1..=n as i64).fold(Rational::one(), |acc, k| acc * rat(k, 1))
}

/// `∏_{i<j} (x_i − x_j)/(x_i + x_j)` computed directly.
fn delta_star_of(x: &[Rational]) -> Rational {
    let mut d = Rational::one();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d *= (&x[i] - &x[j]) / (&x[i] + &x[j]);
        }
    }
    d
}

fn q_specialization() -> Outcome {
    let tinf: BTreeMap<Var, Rational> = [(Var::t(1), Rational::one())].into_iter().collect();
    let mut count = 0;
    for alpha in enumerate_dp(14, 14).into_iter().filter(|a| a.weight() <= 14) {
        let q = q_schur(&alpha, alpha.weight()).expect("q_schur").poly;
        let got = q.eval_rational_sparse(&tinf);
        let parts: Vec<Rational> = alpha.positive_parts().iter().map(|&p| rat(p as i64, 1)).collect();
        let mut want = delta_star_of(&parts);
        for &p in alpha.positive_parts() {
            want /= factorial(p);
        }
        if got != want {
            return Outcome { passed: false, detail: format!("mismatch at {alpha}: {got} vs {want}") };
        }
        count += 1;
    }
    Outcome { passed: true, detail: format!("{count} strict partitions with |α| ≤ 14, exact") }
}

fn you_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let l = 5;
    let rep = build_rep(l, 1).expect("rep");
    let alphas = enumerate_dp(4, 4);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let exact: Vec<(u32, Rational)> = [1u32, 3, 5].iter().map(|&k| (k, random_rational(&mut rng, -4, 4, 5) / rat(4, 1))).collect();
        let times: Vec<(u32, f64)> = exact.iter().map(|(k, r)| (*k, bkp_tau::ring::rational_to_f64(r))).collect();
        let at = assignment(Family::T, &exact);
        let g = gamma_op(&rep, 0, &times, Direction::Left).expect("gamma");
        for alpha in &alphas {
            let padded = alpha.padded_even();
            let mut factors = vec![g.clone()];
            factors.extend(padded.iter().map(|&p| OperatorExpr::mode(p as i32)));
            let got = rep.vev(&OperatorExpr::Product(factors)).expect("vev");
            let q = q_schur(alpha, alpha.weight()).expect("q").poly.eval_rational_sparse(&at);
            let want = 0.5f64.powi(padded.len() as i32 / 2) * bkp_tau::ring::rational_to_f64(&q);
            worst = worst.max((got - want).abs());
        }
    }
    Outcome {
        passed: worst <= YOU_TOLERANCE,
        detail: format!("{} partitions × 5 time sets, max |Δ| = {worst:.2e}", alphas.len()),
    }
}

fn remark_one() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = Vec::new();
    for (l, cap) in [(6u32, 9u32), (4, 7)] {
        let boltz: Vec<Rational> = (0..l).map(|_| random_rational(&mut rng, 1, 7, 6)).collect();
        let w = WeightSpec::from_boltzmann(&boltz);
        let trunc = Truncation::new(l, l as usize, cap);
        let cases: Vec<(&str, Series, SpecTarget)> = vec![
            ("S0", Series::S0 { l }, SpecTarget::S0 { l }),
            ("S1", Series::S1(w.clone()), SpecTarget::S1(w.clone())),
            ("S2", Series::S2(w.clone()), SpecTarget::S2(w.clone())),
            ("S00", Series::S00 { l }, SpecTarget::S00 { l }),
            ("S4", Series::S4(w.clone()), SpecTarget::S4(w.clone())),
        ];
        for (name, series, target) in cases {
            let direct = sum_series(&series, &trunc).expect("direct");
            let via = sum_series(&Series::S3(specialize_pair_coeffs(&target, l + 1)), &trunc).expect("via S3");
            if direct != via {
                return Outcome { passed: false, detail: format!("{name} differs at L={l}, cap={cap}") };
            }
            checked.push(format!("{name}@L{l}"));
        }
        let s2 = sum_series(&Series::S2(w.clone()), &trunc).expect("S2");
        let s5 = sum_series(&Series::S5(specialize_dmatrix(&w, l)), &trunc).expect("S5");
        if s2 != s5 {
            return Outcome { passed: false, detail: format!("S5 diagonal differs from S2 at L={l}") };
        }
        checked.push(format!("S5→S2@L{l}"));
    }
    Outcome { passed: true, detail: format!("exact: {}", checked.join(", ")) }
}

fn random_pair_coefficients(rng: &mut ChaCha8Rng, l: u32) -> PairCoefficients {
    let mut pc = PairCoefficients::default();
    for n in 1..=l {
        for m in 1..n {
            pc.set(n, m, Coef::number(Number::Float(rng.gen_range(-1.0..1.0))));
        }
        pc.vector.insert(n, Coef::number(Number::Float(rng.gen_range(-1.0..1.0))));
    }
    pc
}

fn fermionic_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut runs = 0;
    for _ in 0..3 {
        let l = 4u32;
        let t = [(1u32, rng.gen_range(-0.6..0.6)), (3, rng.gen_range(-0.4..0.4))];
        let tbar = [(1u32, rng.gen_range(-0.6..0.6)), (3, rng.gen_range(-0.4..0.4))];
        let boltz: Vec<Rational> = (0..l).map(|_| random_rational(&mut rng, 1, 9, 8)).collect();
        let w = WeightSpec::from_boltzmann(&boltz);
        let mut d = DMatrix::default();
        for n in 1..=l {
            for m in 1..=l {
                if rng.gen_bool(0.6) {
                    d.entries.insert((n, m), Number::Float(rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let series = [
            Series::S0 { l: rng.gen_range(1..=l) },
            Series::S1(w.clone()),
            Series::S3(random_pair_coefficients(&mut rng, l)),
            Series::S4(w),
            Series::S5(d),
        ];
        for s in &series {
            let (tt, tb): (&[(u32, f64)], &[(u32, f64)]) = if s.is_bilinear() { (&t, &tbar) } else { (&t, &[]) };
            let a = match oracle_sum(s, l, tt, tb) {
                Ok(v) => v,
                Err(e) => return Outcome { passed: false, detail: format!("{:?}: {e}", s.id()) },
            };
            let b = sum_series_at(s, &Truncation::new(l, l as usize, 0), tt, tb).expect("series");
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
            runs += 1;
        }
    }
    Outcome {
        passed: worst <= ORACLE_TOLERANCE,
        detail: format!("{runs} runs over S0,S1,S3,S4,S5 at L=4, max |Δ| = {worst:.2e}"),
    }
}

fn hirota() -> Outcome {
    let cap = 8;
    for parts in [vec![1u32], vec![2, 1], vec![3, 1]] {
        let q = q_schur(&StrictPartition::new(parts.clone()).unwrap(), cap).unwrap().poly;
        if !hirota_residual(&q).unwrap().is_zero() {
            return Outcome { passed: false, detail: format!("calibration fails on {parts:?}") };
        }
    }
    let mut q_count = 0;
    for alpha in enumerate_dp(8, 8).into_iter().filter(|a| a.weight() <= 8) {
        let q = q_schur(&alpha, cap).unwrap().poly;
        if !hirota_residual(&q).unwrap().is_zero() {
            return Outcome { passed: false, detail: format!("nonzero residual for Q{alpha}") };
        }
        q_count += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for k in 0..10 {
        let l = 5;
        let mut pc = PairCoefficients::default();
        for n in 1..=l {
            for m in 1..n {
                pc.set(n, m, Coef::number(Number::Exact(random_rational(&mut rng, -5, 5, 4))));
            }
            pc.vector.insert(n, Coef::number(Number::Exact(random_rational(&mut rng, -5, 5, 4))));
        }
        let tau = sum_series(&Series::S3(pc), &Truncation::new(l, l as usize, cap)).unwrap();
        let r = hirota_residual(&tau).unwrap();
        if !r.is_zero() {
            return Outcome { passed: false, detail: format!("random S3 #{k} leaves {} terms", r.len()) };
        }
    }
    let mut bad = bkp_tau::polyring::GradedPoly::one(cap);
    bad.add_term(bkp_tau::polyring::Monomial::from_pairs([(Var::t(1), 6)]), Rational::one());
    let control = !hirota_residual(&bad).unwrap().is_zero();
    Outcome {
        passed: control,
        detail: format!("calibrated on Q(1),Q(2,1),Q(3,1); {q_count} Q-functions and 10 random S3 vanish through degree {}; 1+t1^6 does not", cap - 6),
    }
}

fn pfaffian_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for n in 1..=10usize {
        let vals: Vec<Rational> = (0..n * n).map(|_| random_rational(&mut rng, -9, 9, 7)).collect();
        let m = SkewMatrix::from_fn(n, Rational::zero(), |i, j| vals[i * n + j].clone());
        let det = det_exact(&m.to_dense(), &Rational::zero());
        let ok = if n % 2 == 0 {
            let pf = pfaffian_exact(&m).unwrap();
            &pf * &pf == det
        } else {
            det.is_zero()
        };
        if !ok {
            return Outcome { passed: false, detail: format!("Pf² ≠ det at n={n}") };
        }
    }
    for n in [2usize, 4, 6, 8] {
        let mut z: Vec<Rational> = Vec::new();
        while z.len() < n {
            let c = random_rational(&mut rng, 1, 40, 9);
            if !z.contains(&c) {
                z.push(c);
            }
        }
        let m = SkewMatrix::from_fn(n, Rational::zero(), |i, j| (&z[i] - &z[j]) / (&z[i] + &z[j]));
        if pfaffian_exact(&m).unwrap() != delta_star_of(&z) {
            return Outcome { passed: false, detail: format!("Cayley Pfaffian ≠ Δ* at n={n}") };
        }
    }
    let sgn_pf = |s: &[f64]| {
        let n = s.len();
        let dim = n + n % 2;
        let m = SkewMatrix::from_fn(dim, 0.0, |i, j| if j == n { 1.0 } else if s[i] > s[j] { 1.0 } else { -1.0 });
        pfaffian_float(&m).unwrap()
    };
    for k in 0..200 {
        let n = 1 + k % 7;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..10.0)).collect();
        let mut d = 1.0;
        for i in 0..n {
            for j in i + 1..n {
                d *= (x[i] - x[j]) / (x[i] + x[j]);
            }
        }
        if (sgn_pf(&x) - d.signum()).abs() > 1e-9 {
            return Outcome { passed: false, detail: format!("sgn lemma fails on real set {x:?}") };
        }
    }
    let mut worst_imag = 0.0f64;
    for k in 0..50 {
        let n = 1 + k % 7;
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..3.1)).collect();
        let z: Vec<Complex64> = phi.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        let mut w = Complex64::from_polar(1.0, -PI * (n * n - n) as f64 / 4.0);
        for i in 0..n {
            for j in i + 1..n {
                w *= (z[i] - z[j]) / (z[i] + z[j]);
            }
        }
        worst_imag = worst_imag.max(w.im.abs() / w.norm());
        if (sgn_pf(&phi) - w.re.signum()).abs() > 1e-9 {
            return Outcome { passed: false, detail: format!("sgn lemma fails on arc set {phi:?}") };
        }
    }
    Outcome {
        passed: worst_imag <= SGN_REALNESS,
        detail: format!("Pf²=det n≤10; Cayley Pf=Δ* n∈{{2,4,6,8}}; sgn lemma 200 real + 50 arc sets, max Im/|w| = {worst_imag:.1e}"),
    }
}

fn z2_z5(reports: &mut Vec<(String, IntegralReport)>) -> Outcome {
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
            QUADRATURE_TOLERANCE,
        )
        .unwrap();
        let z5 = grand_z(
            &GrandSpec::Bilinear { measure: BiMeasure::Diagonal { measure: m.clone() }, times1: d1.clone(), times2: d2.clone() },
            mu,
            4,
            &qs,
            QUADRATURE_TOLERANCE,
        )
        .unwrap();
        worst = worst.max((z2.re - z5.re).abs() / z2.re.abs());
    }
    for n in 0..=4 {
        let r = integral_i(IntegralId::I2, n, &m, &d1.combined(&d2), None, &qs, QUADRATURE_TOLERANCE).unwrap();
        reports.push((format!("I2({n}) combined times"), r));
        let r = integral_i5(n, &BiMeasure::Diagonal { measure: m.clone() }, &d1, &d2, &qs, QUADRATURE_TOLERANCE).unwrap();
        reports.push((format!("I5({n}) diagonal"), r));
    }
    Outcome { passed: worst <= Z_GAP, detail: format!("N_max=4, μ∈{{0.1,1}}, max relative gap {worst:.2e}") }
}

/// `K₀(x) = ∫₀^∞ e^{−x cosh u} du` by the trapezoid rule.
fn k0_by_quadrature(x: f64) -> f64 {
    let h: f64 = 1.0 / 64.0;
    let mut s = 0.5 * (-x).exp();
    let mut u: f64 = h;
    loop {
        let f = (-x * u.cosh()).exp();
        s += f;
        if f < 1e-300 || u > 30.0 {
            break;
        }
        u += h;
    }
    s * h
}

fn braden_cauchy(reports: &mut Vec<(String, IntegralReport)>) -> Outcome {
    let qs = QuadratureSpec::default();
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for r in [0.5, 1.0, 2.0] {
        let start = Instant::now();
        let g = braden_g(r, 1, 1, &qs, QUADRATURE_TOLERANCE).unwrap();
        slowest = slowest.max(start.elapsed());
        let want = k0_by_quadrature(2.0 * r) / PI;
        worst = worst.max((g.terms[1] - want).abs() / want);
        let cm = ContourMeasure { contour: Contour::A, density: Density::Braden { r } };
        let rep = integral_i(IntegralId::I2, 1, &cm, &DeformationTimes::default(), None, &qs, QUADRATURE_TOLERANCE).unwrap();
        reports.push((format!("Braden I2(1) r={r}"), rep));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for n in 1..=6usize {
        let mut x: Vec<Rational> = Vec::new();
        while x.len() < n {
            let c = random_rational(&mut rng, 1, 30, 7);
            if !x.contains(&c) {
                x.push(c);
            }
        }
        let rows: Vec<Vec<Rational>> = x.iter().map(|a| x.iter().map(|b| Rational::one() / (a + b)).collect()).collect();
        let lhs = det_exact(&rows, &Rational::zero());
        let d = delta_star_of(&x);
        let mut rhs = &d * &d;
        for a in &x {
            rhs /= rat(2, 1) * a;
        }
        let report = cauchy_pf_identity_check(&x).unwrap();
        if lhs != rhs || !report.holds || report.lhs != lhs {
            return Outcome { passed: false, detail: format!("Cauchy identity fails at n={n}") };
        }
    }
    Outcome {
        passed: worst <= BESSEL_RELATIVE && slowest < Duration::from_secs(1),
        detail: format!(
            "r∈{{0.5,1,2}}: max rel err {worst:.2e}, slowest {:.0} ms; Cauchy det identity exact n≤6",
            slowest.as_secs_f64() * 1e3
        ),
    }
}

fn sampler() -> Outcome {
    let w = WeightSpec::from_boltzmann(&[rat(1, 1), rat(2, 3), rat(1, 2), rat(3, 5), rat(1, 4)]);
    let trunc = Truncation::new(5, 5, 0);
    let table = model_distribution(&Model::B(w), &trunc, &[(1, Number::Exact(Rational::one()))], &[]).unwrap();
    let exact_one = table.exact_sum() == Some(Rational::one());
    let count = 100_000usize;
    let draws = sample(&table, 909, count);
    let mut hits: BTreeMap<&StrictPartition, usize> = BTreeMap::new();
    for d in &draws {
        *hits.entry(d).or_default() += 1;
    }
    let mut checked = 0;
    let mut worst_z = 0.0f64;
    for e in &table.entries {
        let p = e.probability.to_f64();
        if p < 1e-3 {
            continue;
        }
        let sigma = (count as f64 * p * (1.0 - p)).sqrt();
        let observed = hits.get(&e.partition).copied().unwrap_or(0) as f64;
        worst_z = worst_z.max((observed - count as f64 * p).abs() / sigma);
        checked += 1;
    }
    let negative = table.entries.iter().any(|e| e.probability.exact().map(|r| r.is_negative()).unwrap_or(true));
    Outcome {
        passed: exact_one && !negative && worst_z <= SIGMA_BAND,
        detail: format!(
            "{} entries sum to 1 exactly: {exact_one}; {checked} with P ≥ 1e-3, worst deviation {worst_z:.2}σ over 1e5 draws",
            table.entries.len()
        ),
    }
}

fn quadrature_stability(mut reports: Vec<(String, IntegralReport)>) -> Outcome {
    let qs = QuadratureSpec::default();
    let dt = DeformationTimes { t: [(1, -0.3)].into(), tbar: [(1, 0.2)].into() };
    let exp_measure = ContourMeasure { contour: Contour::A, density: Density::Exponential { rate: 1.5 } };
    let arc = ContourMeasure { contour: Contour::B { theta: 2.5 }, density: Density::Angular };
    for n in 1..=3 {
        reports.push((format!("I1({n}) half-line"), integral_i(IntegralId::I1, n, &exp_measure, &dt, None, &qs, QUADRATURE_TOLERANCE).unwrap()));
        reports.push((format!("I3({n}) sgn"), integral_i(IntegralId::I3, n, &exp_measure, &dt, Some(&Kernel::Sgn), &qs, QUADRATURE_TOLERANCE).unwrap()));
        reports.push((format!("I4({n}) half-line"), integral_i(IntegralId::I4, n, &exp_measure, &dt, None, &qs, QUADRATURE_TOLERANCE).unwrap()));
        reports.push((format!("I1({n}) arc"), integral_i(IntegralId::I1, n, &arc, &DeformationTimes::default(), None, &qs, QUADRATURE_TOLERANCE).unwrap()));
        let grid = BiMeasure::Grid { z: exp_measure.clone(), y: exp_measure.clone(), coupling: Coupling::Gaussian { sigma: 0.7 } };
        reports.push((format!("I5({n}) gaussian grid"), integral_i5(n, &grid, &dt, &DeformationTimes::default(), &qs, QUADRATURE_TOLERANCE).unwrap()));
    }
    let failing: Vec<String> = reports
        .iter()
        .filter(|(_, r)| !r.converged)
        .map(|(name, r)| format!("{name} (Δ={:.1e})", r.difference))
        .collect();
    let worst = reports
        .iter()
        .map(|(_, r)| r.difference / r.refined_re.abs().max(1.0))
        .fold(0.0f64, f64::max);
    Outcome {
        passed: failing.is_empty(),
        detail: if failing.is_empty() {
            format!("{} integrals stable under node doubling, worst relative change {worst:.1e}", reports.len())
        } else {
            format!("not converged: {}", failing.join("; "))
        },
    }
}

fn main() {
    let mut reports = Vec::new();
    let mut all = true;
    let mut line = |k: usize, name: &str, tolerance: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut o = f();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                o.passed = false;
                o.detail.push_str(&format!("; exceeded {} s", limit.as_secs()));
            }
        }
        all &= o.passed;
        println!(
            "{} [{k:>2}] {name} (tol {tolerance}; {:.2} s): {}",
            if o.passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            o.detail
        );
    };
    line(1, "Q-specialization at t∞", "exact", Some(Duration::from_secs(10)), &mut q_specialization);
    line(2, "vacuum expectation of Γ and modes", "1e-10", Some(Duration::from_secs(60)), &mut you_formula);
    line(3, "pair-coefficient specializations", "exact", Some(Duration::from_secs(30)), &mut remark_one);
    line(4, "fermionic oracle equals series", "1e-10", Some(Duration::from_secs(120)), &mut fermionic_oracle);
    line(5, "bilinear residual certification", "exact", None, &mut hirota);
    line(6, "Pfaffian identities", "exact / 1e-12", None, &mut pfaffian_identities);
    line(7, "Z2 equals diagonal Z5", "1e-12", None, &mut || z2_z5(&mut reports));
    line(8, "Bessel first term and Cauchy determinant", "1e-8", None, &mut || braden_cauchy(&mut reports));
    line(9, "sampler soundness", "4σ", None, &mut sampler);
    let collected = std::mem::take(&mut reports);
    line(10, "quadrature stability", "1e-8", None, &mut || quadrature_stability(collected.clone()));
    if !all {
        std::process::exit(1);
    }
}
