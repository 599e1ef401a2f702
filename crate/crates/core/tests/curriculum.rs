mod common;

use std::f64::consts::E;

use common::{bisect_w, halley_w};
use proptest::prelude::*;
use unlearnkit::curriculum::superloss::superloss_value;
use unlearnkit::curriculum::{apply_curriculum, lambert_w0, superloss_sigma, SuperLossParams};

#[test]
fn lambert_residual_on_dense_grid() {
    let lo = -1.0 / E;
    let n = 10_000;
    for i in 0..n {
        let x = lo + (1000.0 - lo) * i as f64 / (n - 1) as f64;
        let w = lambert_w0(x).unwrap();
        assert!(w >= -1.0, "principal branch at {x}");
        assert!((w * w.exp() - x).abs() < 1e-10, "residual at {x}");
    }
}

#[test]
fn lambert_agrees_with_independent_oracles() {
    assert!((lambert_w0(1.0).unwrap() - 0.5671432904).abs() < 1e-9);
    for x in [0.01, 0.5, 1.0, 2.0, 10.0, 123.0, 999.0] {
        let w = lambert_w0(x).unwrap();
        assert!((w - halley_w(x)).abs() < 1e-12, "halley at {x}");
        assert!((w - bisect_w(x)).abs() < 1e-10, "bisection at {x}");
    }
    assert!((halley_w(1.0) - bisect_w(1.0)).abs() < 1e-12);
}

/// Minimizes `(l - tau) * s + lam * ln(s)^2` over `s` by golden-section search on `ln s`.
fn sigma_oracle(l: f64, tau: f64, lam: f64) -> f64 {
    let f = |u: f64| superloss_value(l, u.exp(), &SuperLossParams { tau, lam });
    let (mut a, mut b) = (-30.0f64, 1.0f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (0.5 * (a + b)).exp()
}

#[test]
fn sigma_minimizes_the_superloss_objective() {
    for &(l, tau, lam) in &[(1.0, 0.0, 1.0), (0.2, 0.7, 0.5), (3.0, 1.0, 2.0), (0.5, 0.5, 1.0), (5.0, 0.1, 0.3)] {
        let s = superloss_sigma(l, &SuperLossParams::new(tau, lam).unwrap());
        assert!((s - sigma_oracle(l, tau, lam)).abs() < 1e-6, "l={l} tau={tau} lam={lam}");
    }
}

#[test]
fn sigma_reference_points() {
    let p = SuperLossParams::new(0.4, 2.0).unwrap();
    assert_eq!(superloss_sigma(0.4, &p), 1.0);
    let at_one = superloss_sigma(0.4 + 2.0, &p);
    assert!((at_one - (-halley_w(0.5)).exp()).abs() < 1e-12);
    assert!((at_one - 0.7035).abs() < 1e-4);
}

#[test]
fn sigma_is_monotone_on_a_thousand_point_grid() {
    let p = SuperLossParams::new(1.0, 0.7).unwrap();
    let mut prev = f64::INFINITY;
    for i in 0..1000 {
        let l = -3.0 + 20.0 * i as f64 / 999.0;
        let s = superloss_sigma(l, &p);
        assert!(s > 0.0 && s <= prev, "at l={l}");
        prev = s;
    }
}

proptest! {
    #[test]
    fn sigma_positive_and_non_increasing(
        tau in -5.0f64..5.0,
        lam in 0.01f64..10.0,
        a in -20.0f64..50.0,
        b in -20.0f64..50.0,
    ) {
        let p = SuperLossParams::new(tau, lam).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (s_lo, s_hi) = (superloss_sigma(lo, &p), superloss_sigma(hi, &p));
        prop_assert!(s_hi > 0.0);
        prop_assert!(s_hi <= s_lo);
    }

    #[test]
    fn at_baseline_batch_has_zero_value(tau in -3.0f64..3.0, n in 1usize..10) {
        let w = apply_curriculum(&vec![tau; n], &SuperLossParams::new(tau, 1.0).unwrap()).unwrap();
        prop_assert_eq!(w.value, 0.0);
        prop_assert!(w.sigma.iter().all(|&s| s == 1.0));
    }
}
