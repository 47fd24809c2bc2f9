use dasgd_core::theory::{corollary_bound, corollary_eta, lr_caps, theorem_bound, AssumptionParams};
use dasgd_core::HyperParams;
use proptest::prelude::*;

fn ap(l: f64, beta: f64, sigma_sq: f64, gap: f64, g0: f64) -> AssumptionParams {
    AssumptionParams { lipschitz: l, beta, sigma_sq, f_initial: gap, f_inf: 0.0, g0 }
}

fn hp(workers: usize, tau: usize, delay: usize, xi: f64, steps: usize) -> HyperParams {
    HyperParams { workers, tau, delay, xi, steps, ..HyperParams::default() }
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

// Frozen values below were computed in exact rational arithmetic from the
// closed forms, independently of this crate.

#[test]
fn caps_frozen_example() {
    let c = lr_caps(&ap(1.0, 0.0, 0.1, 1.0, 0.0), &hp(2, 2, 1, 0.25, 100)).unwrap();
    assert!(close(c.a, 1.0 / 755.71875, 1e-14), "a = {}", c.a);
    assert!(close(c.b, 0.375 / 1502.34375, 1e-14), "b = {}", c.b);
    assert!(close(c.eta_max, (0.375f64 / 1502.34375).sqrt(), 1e-14));
    assert!(!c.b_degenerate);
}

#[test]
fn caps_frozen_a_with_delay_two() {
    let c = lr_caps(&ap(2.0, 0.0, 0.3, 1.5, 5.0), &hp(4, 4, 2, 0.5, 4000)).unwrap();
    assert!(close(c.a, 3.4717822220447755e-06, 1e-13), "a = {}", c.a);
}

#[test]
fn theorem_frozen_example() {
    let b = theorem_bound(&ap(1.0, 0.0, 0.1, 1.0, 0.0), &hp(2, 2, 1, 0.25, 10_000), 0.01).unwrap();
    assert!(close(b.terms[0], 0.0337, 1e-13), "t1 = {}", b.terms[0]);
    assert_eq!(b.terms[1], 0.0);
    assert!(close(b.terms[2], 6.8e-09, 1e-12), "t3 = {}", b.terms[2]);
    assert!(close(b.value, 0.0337000068, 1e-13));
}

#[test]
fn theorem_frozen_with_warmup_term() {
    let b = theorem_bound(&ap(2.0, 0.0, 0.3, 1.5, 5.0), &hp(4, 4, 2, 0.5, 4000), 0.02).unwrap();
    assert!(close(b.terms[0], 0.07, 1e-13), "t1 = {}", b.terms[0]);
    assert!(close(b.terms[1], 4e-10, 1e-12), "t2 = {}", b.terms[1]);
    assert!(close(b.terms[2], 4.224e-06, 1e-12), "t3 = {}", b.terms[2]);
}

#[test]
fn corollary_matches_theorem_at_its_rate() {
    let a = ap(1.5, 0.0, 0.2, 2.0, 3.0);
    for (tau, d, xi) in [(2, 1, 0.25), (4, 3, 0.5), (4, 2, 0.0)] {
        let p = hp(4, tau, d, xi, 800);
        let c = corollary_bound(&a, &p, 0.3).unwrap();
        let t = theorem_bound(&a, &p, corollary_eta(&p, 0.3)).unwrap();
        assert!(close(c.full, t.value, 1e-12), "{} vs {}", c.full, t.value);
        for i in 0..3 {
            assert!((c.terms[i] - t.terms[i]).abs() <= 1e-12 * t.terms[i].abs() + 1e-300);
        }
    }
}

#[test]
fn asymptotic_halves_when_k_quadruples() {
    let a = ap(1.0, 0.0, 0.1, 1.0, 0.0);
    for steps in [100, 1000, 4096] {
        let c1 = corollary_bound(&a, &hp(4, 4, 1, 0.25, steps), 0.5).unwrap();
        let c4 = corollary_bound(&a, &hp(4, 4, 1, 0.25, 4 * steps), 0.5).unwrap();
        assert_eq!(c4.asymptotic / c1.asymptotic, 0.5);
    }
}

#[test]
fn corollary_tail_decays_quadratically() {
    let a = ap(1.0, 0.0, 0.4, 1.0, 2.0);
    let tail = |steps: usize| {
        let c = corollary_bound(&a, &hp(2, 4, 3, 0.5, steps), 1.0).unwrap();
        c.full - c.asymptotic
    };
    // K ×10 → tail ÷100 (the 1/K³ part only helps)
    let r = tail(40_000) / tail(4_000);
    assert!(r <= 0.0100001 && r > 0.0099, "ratio {r}");
}

proptest! {
    #[test]
    fn caps_shrink_with_smoothness(l in 0.1f64..10.0, scale in 1.01f64..5.0, xi in 0.05f64..0.9) {
        let p = hp(4, 4, 2, xi, 400);
        let c1 = lr_caps(&ap(l, 0.0, 0.1, 1.0, 0.0), &p).unwrap();
        let c2 = lr_caps(&ap(l * scale, 0.0, 0.1, 1.0, 0.0), &p).unwrap();
        prop_assert!(c2.eta_max < c1.eta_max);
    }

    #[test]
    fn caps_shrink_with_horizon(steps in 8usize..5000, extra in 4usize..5000) {
        let a = ap(1.0, 0.5, 0.1, 1.0, 0.0);
        let c1 = lr_caps(&a, &hp(2, 4, 1, 0.25, steps)).unwrap();
        let c2 = lr_caps(&a, &hp(2, 4, 1, 0.25, steps + extra)).unwrap();
        prop_assert!(c2.a < c1.a);
        prop_assert!(c2.b < c1.b);
    }

    #[test]
    fn bound_grows_with_noise(s in 0.0f64..2.0, ds in 0.01f64..2.0, eta in 1e-4f64..0.05) {
        let p = hp(4, 4, 2, 0.5, 400);
        let b1 = theorem_bound(&ap(1.0, 0.0, s, 1.0, 1.0), &p, eta).unwrap();
        let b2 = theorem_bound(&ap(1.0, 0.0, s + ds, 1.0, 1.0), &p, eta).unwrap();
        prop_assert!(b2.value > b1.value);
    }

    #[test]
    fn bound_grows_with_gap(gap in 0.0f64..5.0, dg in 0.01f64..5.0, eta in 1e-4f64..0.05) {
        let p = hp(2, 2, 1, 0.25, 200);
        let b1 = theorem_bound(&ap(1.0, 0.0, 0.1, gap, 0.0), &p, eta).unwrap();
        let b2 = theorem_bound(&ap(1.0, 0.0, 0.1, gap + dg, 0.0), &p, eta).unwrap();
        prop_assert!(b2.value > b1.value);
    }

    #[test]
    fn bound_terms_nonnegative(
        l in 0.1f64..5.0, s in 0.0f64..1.0, g0 in 0.0f64..10.0,
        tau in 2usize..8, d_frac in 0.0f64..1.0, xi in 0.0f64..0.95, eta in 1e-5f64..0.1,
    ) {
        let d = ((tau - 1) as f64 * d_frac).round() as usize;
        let b = theorem_bound(&ap(l, 0.0, s, 1.0, g0), &hp(4, tau, d, xi, 64 * tau), eta).unwrap();
        prop_assert!(b.terms.iter().all(|t| *t >= 0.0 && t.is_finite()));
    }
}
