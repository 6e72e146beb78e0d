mod common;

use incompat_core::criterion::{busch_g, region_membership, unbiased_f, yu_compatible};
use incompat_core::estimate::{count_incompatible, prob_grid, prob_lambda_section, prob_mc};
use incompat_core::joint::{
    build_m_thm1, build_t_product, construct_unbiased_witness, feasibility_oracle, g_tensor, marginal, qubit_joint,
};
use incompat_core::povm::{validate_povm, BlochPovm, HermitianOp, TOL_PSD};
use incompat_core::sampling::sample_pair;
use incompat_core::{MeasureSpec, RngStream};
use proptest::prelude::*;

fn ball_vector() -> impl Strategy<Value = [f64; 3]> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y, z, r)| {
        let n = (x * x + y * y + z * z).sqrt().max(1e-9);
        let r = r.cbrt();
        [r * x / n, r * y / n, r * z / n]
    })
}

fn general_povm() -> impl Strategy<Value = BlochPovm> {
    (-1.0..1.0f64, ball_vector()).prop_map(|(bias, v)| {
        let c = 1.0 - bias.abs();
        BlochPovm::new(bias, [c * v[0], c * v[1], c * v[2]]).unwrap()
    })
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn unbiased_criteria_agree(a in ball_vector(), b in ball_vector()) {
        let g = busch_g(&a, &b);
        let f = unbiased_f(&a, &b).unwrap();
        prop_assume!((g - 2.0).abs() > 1e-9 && (f - 1.0).abs() > 1e-9);
        let yu = yu_compatible(&BlochPovm::unbiased(a).unwrap(), &BlochPovm::unbiased(b).unwrap()).unwrap();
        prop_assert_eq!(yu.compatible, g <= 2.0);
        prop_assert_eq!(f <= 1.0, g <= 2.0);
    }

    #[test]
    fn region_matches_f(a in ball_vector(), b in ball_vector()) {
        let (na, nb) = (norm(&a), norm(&b));
        prop_assume!(na > 1e-6 && nb > 1e-6);
        let s = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
        let f = unbiased_f(&a, &b).unwrap();
        prop_assume!((f - 1.0).abs() > 1e-9);
        prop_assert_eq!(region_membership(na, nb, s), f > 1.0);
    }

    #[test]
    fn effects_between_zero_and_identity(m in general_povm()) {
        for e in m.effects().unwrap() {
            let ev = e.eigenvalues();
            prop_assert!(ev.iter().all(|&l| l >= -1e-12 && l <= 1.0 + 1e-12), "{:?}", ev);
        }
    }

    #[test]
    fn witness_exists_iff_g_at_most_two(a in ball_vector(), b in ball_vector()) {
        let g = busch_g(&a, &b);
        prop_assume!((g - 2.0).abs() > 1e-9);
        let (pa, pb) = (BlochPovm::unbiased(a).unwrap(), BlochPovm::unbiased(b).unwrap());
        let w = construct_unbiased_witness(&pa, &pb).unwrap();
        prop_assert_eq!(w.is_some(), g <= 2.0);
        if let Some((_, m)) = w {
            prop_assert!(validate_povm(&m, TOL_PSD).ok);
            let (ta, tb) = (pa.to_tensor().unwrap(), pb.to_tensor().unwrap());
            prop_assert!(common::max_defect(&marginal(&m, 0).unwrap(), &ta) < 1e-12);
            prop_assert!(common::max_defect(&marginal(&m, 1).unwrap(), &tb) < 1e-12);
        }
    }

    #[test]
    fn yu_verdict_is_symmetric_under_bias_flip(a in general_povm(), b in general_povm()) {
        // relabelling both outcomes flips the signs of (x0, x)
        let flip = |m: &BlochPovm| BlochPovm::new(-m.bias, [-m.vec[0], -m.vec[1], -m.vec[2]]).unwrap();
        let v = yu_compatible(&a, &b).unwrap();
        let w = yu_compatible(&flip(&a), &flip(&b)).unwrap();
        prop_assert!((v.margin - w.margin).abs() < 1e-12);
    }
}

#[test]
fn oracle_witnesses_are_genuine() {
    let mut rng = RngStream::new(3, 9);
    let mut found = 0;
    for _ in 0..60 {
        let (a, b) = sample_pair(&mut rng, &MeasureSpec::General).unwrap();
        if let Some(noise) = feasibility_oracle(&a, &b, 0.5, 0.5, 12, 0.0).unwrap() {
            found += 1;
            assert!(yu_compatible(&a, &b).unwrap().compatible);
            let m = qubit_joint(&a, &b, 0.5, 0.5, &noise).unwrap();
            assert!(validate_povm(&m, TOL_PSD).ok);
            assert!(common::max_defect(&marginal(&m, 0).unwrap(), &a.to_tensor().unwrap()) < 1e-12);
            assert!(common::max_defect(&marginal(&m, 1).unwrap(), &b.to_tensor().unwrap()) < 1e-12);
        }
    }
    assert!(found > 20);
}

#[test]
fn construction_marginals_on_random_instances() {
    let mut rng = RngStream::new(5, 2);
    for trial in 0..500 {
        let n = 2 + trial % 2;
        let d = 2 + (trial / 2) % 2;
        let ks: Vec<usize> = (0..n).map(|_| 2 + (rng.next_u64() % 2) as usize).collect();
        let povms: Vec<_> = ks.iter().map(|&k| common::random_povm(&mut rng, d, k)).collect();
        let pv: Vec<_> = ks.iter().map(|&k| common::random_probability_vector(&mut rng, k)).collect();
        let t = build_t_product(&pv, d).unwrap();
        let m = build_m_thm1(&povms, &pv, &t).unwrap();
        for (axis, a) in povms.iter().enumerate() {
            assert!(common::max_defect(&marginal(&m, axis).unwrap(), a) < 1e-12);
        }
        assert!(m.total().max_abs_diff(&HermitianOp::identity(d)) < 1e-12);
        assert!(validate_povm(&g_tensor(&povms, &pv).unwrap(), TOL_PSD).ok);
    }
}

#[test]
fn centred_section_reproduces_unbiased_draws() {
    let centred = MeasureSpec::Section { a0: 0.0, b0: 0.0 };
    let mut r1 = RngStream::new(17, 4);
    let mut r2 = RngStream::new(17, 4);
    for _ in 0..1000 {
        let (a, b) = sample_pair(&mut r1, &MeasureSpec::Unbiased).unwrap();
        let (c, d) = sample_pair(&mut r2, &centred).unwrap();
        assert_eq!(a.vec.map(f64::to_bits), c.vec.map(f64::to_bits));
        assert_eq!(b.vec.map(f64::to_bits), d.vec.map(f64::to_bits));
    }
    assert_eq!(
        count_incompatible(&MeasureSpec::Unbiased, 50_000, 17, 0).unwrap(),
        count_incompatible(&centred, 50_000, 17, 0).unwrap()
    );
}

#[test]
fn lambda_section_matches_monte_carlo() {
    for lambda in [0.0, 0.2, 0.5, 0.8] {
        let q = prob_lambda_section(lambda, 1e-9).unwrap().value;
        let mc = prob_mc(&MeasureSpec::Section { a0: lambda, b0: 0.0 }, 400_000, 21).unwrap();
        let sigma = (q * (1.0 - q) / 400_000.0).sqrt();
        assert!((mc.value - q).abs() < 4.0 * sigma, "λ = {lambda}: mc {} quad {q}", mc.value);
    }
}

#[test]
fn grid_is_symmetric_in_signs_and_order() {
    let r = 7;
    let grid = prob_grid(r, 20_000, 8).unwrap();
    for i in 0..r {
        for j in 0..r {
            let p = grid.get(i, j);
            for q in [grid.get(r - 1 - i, j), grid.get(i, r - 1 - j), grid.get(j, i)] {
                let sigma = (p.stderr.powi(2) + q.stderr.powi(2)).sqrt().max(1e-3);
                assert!((p.value - q.value).abs() < 5.0 * sigma, "({i}, {j}): {} vs {}", p.value, q.value);
            }
        }
    }
    let centre = grid.get(r / 2, r / 2).value;
    assert!((centre - 0.6).abs() < 0.02);
}
