use bkp_tau::integrals::{integral_i, Contour, ContourMeasure, DeformationTimes, Density, IntegralId, Kernel, QuadratureSpec};
use bkp_tau::partitions::{
    delta_star, delta_star_seq, dp2_from_dp_prime, dp_prime_from_dp2, enumerate_dp, enumerate_dp2,
    enumerate_dp_prime, StrictPartition,
};
use bkp_tau::pfaffian::{pfaffian_exact, SkewMatrix};
use bkp_tau::polyring::{hirota_d, GradedPoly, Monomial, Var};
use bkp_tau::qfunctions::q_schur;
use bkp_tau::ring::{rat, Rational};
use bkp_tau::tausums::{sum_series, sum_series_tinf, ClosedForm, Series, Truncation, WeightSpec};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Rational> {
    (-9i64..=9, 1i64..=6).prop_map(|(n, d)| rat(n, d))
}

fn positive_rational() -> impl Strategy<Value = Rational> {
    (1i64..=9, 1i64..=6).prop_map(|(n, d)| rat(n, d))
}

fn small_poly(cap: u32) -> impl Strategy<Value = GradedPoly> {
    let var = prop_oneof![Just(Var::t(1)), Just(Var::t(3)), Just(Var::tbar(1))];
    prop::collection::vec((prop::collection::vec((var, 1u32..=2), 0..=2), rational()), 0..=4).prop_map(move |terms| {
        let mut p = GradedPoly::zero(cap);
        for (pairs, c) in terms {
            p.add_term(Monomial::from_pairs(pairs), c);
        }
        p
    })
}

#[test]
fn dp_count_matches_subset_count() {
    for l in 0..=12u32 {
        let subsets = (0u32..1 << l).filter(|mask| mask.count_ones() as usize <= l as usize).count();
        assert_eq!(enumerate_dp(l, l as usize).len(), subsets, "L = {l}");
    }
}

#[test]
fn dp2_and_dp_prime_are_in_bijection() {
    for bound in 1..=10u32 {
        for alpha in enumerate_dp2(bound) {
            let gamma = dp_prime_from_dp2(&alpha).expect("pair heads");
            assert!(gamma.is_dp_prime());
            assert_eq!(dp2_from_dp_prime(&gamma), alpha);
        }
        for gamma in enumerate_dp_prime(bound / 2, bound as usize) {
            let alpha = dp2_from_dp_prime(&gamma);
            if alpha.largest() <= bound {
                assert!(alpha.is_dp2(), "{alpha}");
            }
        }
    }
}

#[test]
fn q_functions_are_homogeneous() {
    for alpha in enumerate_dp(9, 9).into_iter().filter(|a| a.weight() <= 9) {
        let q = q_schur(&alpha, 12).unwrap().poly;
        assert!(q.is_homogeneous(alpha.weight()), "{alpha}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_star_is_small_and_antisymmetric(parts in prop::collection::btree_set(1u32..30, 2..6), i in 0usize..5, j in 0usize..5) {
        let alpha = StrictPartition::from_unsorted(parts.into_iter().collect()).unwrap();
        let d = delta_star(&alpha);
        prop_assert!(d.abs() < Rational::one());
        let mut seq: Vec<i64> = alpha.positive_parts().iter().map(|&p| p as i64).collect();
        let (i, j) = (i % seq.len(), j % seq.len());
        prop_assume!(i != j);
        seq.swap(i, j);
        prop_assert_eq!(delta_star_seq(&seq).unwrap(), -d);
    }

    #[test]
    fn exp_is_a_homomorphism(p in small_poly(6), q in small_poly(6)) {
        let p = p.sub(&GradedPoly::constant(p.constant_term(), 6));
        let q = q.sub(&GradedPoly::constant(q.constant_term(), 6));
        let lhs = p.add(&q).exp().unwrap();
        let rhs = p.exp().unwrap().try_mul(&q.exp().unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn hirota_d_swaps_with_parity(f in small_poly(8), g in small_poly(8), a in 0u32..=2, b in 0u32..=1) {
        let orders = [(Var::t(1), a), (Var::t(3), b)];
        let fg = hirota_d(&f, &g, &orders).unwrap();
        let gf = hirota_d(&g, &f, &orders).unwrap();
        if (a + b) % 2 == 0 {
            prop_assert_eq!(fg, gf);
        } else {
            prop_assert_eq!(fg, gf.neg());
        }
    }

    #[test]
    fn hirota_d_is_bilinear(f in small_poly(8), g in small_poly(8), h in small_poly(8), c in rational()) {
        let orders = [(Var::t(1), 2)];
        let lhs = hirota_d(&f.add(&g.scale(&c)), &h, &orders).unwrap();
        let rhs = hirota_d(&f, &h, &orders).unwrap().add(&hirota_d(&g, &h, &orders).unwrap().scale(&c));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn pfaffian_permutation_covariance(vals in prop::collection::vec(rational(), 36), perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
        let m = SkewMatrix::from_fn(6, Rational::zero(), |i, j| vals[i * 6 + j].clone());
        let pm = SkewMatrix::from_fn(6, Rational::zero(), |i, j| m.get(perm[i], perm[j]));
        let mut inversions = 0;
        for i in 0..6 {
            for j in i + 1..6 {
                if perm[i] > perm[j] {
                    inversions += 1;
                }
            }
        }
        let pf = pfaffian_exact(&m).unwrap();
        let expected = if inversions % 2 == 0 { pf } else { -pf };
        prop_assert_eq!(pfaffian_exact(&pm).unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn truncation_is_monotone(boltz in prop::collection::vec(positive_rational(), 4)) {
        let w = WeightSpec::from_boltzmann(&boltz);
        for series in [Series::S1(w.clone()), Series::S2(w)] {
            let small = sum_series(&series, &Truncation::new(3, 3, 6)).unwrap();
            let large = sum_series(&series, &Truncation::new(4, 4, 6)).unwrap();
            prop_assert_eq!(large.truncate(3), small.truncate(3));
            let low_cap = sum_series(&series, &Truncation::new(4, 4, 4)).unwrap();
            prop_assert_eq!(large.truncate(4), low_cap);
        }
    }

    #[test]
    fn closed_forms_match_t_infinity(boltz in prop::collection::vec(positive_rational(), 4)) {
        let w = WeightSpec::from_boltzmann(&boltz);
        let trunc = Truncation::new(4, 4, 0);
        let tinf = bkp_tau::qfunctions::t_infinity();
        let s1 = sum_series(&Series::S1(w.clone()), &Truncation::new(4, 4, 10)).unwrap().eval_rational_sparse(&tinf);
        let di = sum_series_tinf(&ClosedForm::S1DI(w), &trunc).unwrap();
        prop_assert_eq!(Some(&s1), di.exact());
    }

    #[test]
    fn discrete_integrals_ignore_point_order(
        pts in prop::collection::btree_set(1u32..40, 3..6),
        seed in any::<u64>(),
    ) {
        let points: Vec<(f64, f64)> = pts.iter().map(|&p| (p as f64 / 7.0, 1.0 / (1.0 + p as f64))).collect();
        let mut shuffled = points.clone();
        shuffled.rotate_left((seed % points.len() as u64) as usize);
        shuffled.reverse();
        let qs = QuadratureSpec::default();
        let dt = DeformationTimes::default();
        for (id, kernel) in [(IntegralId::I1, None), (IntegralId::I2, None), (IntegralId::I4, None), (IntegralId::I3, Some(Kernel::Cayley))] {
            let a = integral_i(id, 3, &ContourMeasure { contour: Contour::A, density: Density::Discrete { points: points.clone() } }, &dt, kernel.as_ref(), &qs, 1e-12).unwrap();
            let b = integral_i(id, 3, &ContourMeasure { contour: Contour::A, density: Density::Discrete { points: shuffled.clone() } }, &dt, kernel.as_ref(), &qs, 1e-12).unwrap();
            prop_assert!((a.re - b.re).abs() <= 1e-13 * a.re.abs().max(1.0), "{:?}: {} vs {}", id, a.re, b.re);
        }
    }
}

#[test]
fn empty_integrals_are_one() {
    let cm = ContourMeasure { contour: Contour::A, density: Density::Exponential { rate: 2.0 } };
    let dt = DeformationTimes { t: [(1, -0.1)].into(), tbar: Default::default() };
    for (id, kernel) in [(IntegralId::I1, None), (IntegralId::I2, None), (IntegralId::I4, None), (IntegralId::I3, Some(Kernel::Sgn))] {
        let r = integral_i(id, 0, &cm, &dt, kernel.as_ref(), &QuadratureSpec::default(), 1e-12).unwrap();
        assert_eq!((r.re, r.im), (1.0, 0.0), "{id:?}");
    }
}
