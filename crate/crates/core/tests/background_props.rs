use std::sync::OnceLock;

use mkdv_core::lattice::build_lattice;
use mkdv_core::series::solve_coefficients;
use mkdv_core::smoothstep::{smoothstep, Cutoff};
use mkdv_core::{Background, Rational, Side};
use proptest::prelude::*;

/// Square-root growth on both sides, truncated after two terms.
fn half_bg() -> &'static Background<f64> {
    static BG: OnceLock<Background<f64>> = OnceLock::new();
    BG.get_or_init(|| {
        let lat = build_lattice(&[Rational::half()], Rational::new(-29, 2).unwrap()).unwrap();
        let mut init = vec![0.0; lat.len()];
        init[0] = 1.0;
        let t_end = 0.5;
        let p = solve_coefficients(&lat, Side::Plus, &init, t_end, t_end / 4096.0).unwrap();
        let m = solve_coefficients(&lat, Side::Minus, &init, t_end, t_end / 4096.0).unwrap();
        Background::new(p, m, 2, Cutoff::new(1.0, 2.0)).unwrap()
    })
}

fn signed(mag: f64, neg: bool) -> f64 {
    if neg {
        -mag
    } else {
        mag
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn space_derivatives_match_differences(mag in 1.05f64..40.0, neg: bool, t in 0.0f64..0.5, n in 1usize..=3) {
        let bg = half_bg();
        let x = signed(mag, neg);
        let d = 1e-4 * mag.max(1.0);
        let fd = (bg.eval(x + d, t, n - 1, 0).unwrap() - bg.eval(x - d, t, n - 1, 0).unwrap()) / (2.0 * d);
        let ex = bg.eval(x, t, n, 0).unwrap();
        prop_assert!((fd - ex).abs() < 1e-5 * (1.0 + ex.abs()), "x={x} t={t} n={n}: {fd} vs {ex}");
    }

    #[test]
    fn time_derivative_matches_differences(mag in 1.05f64..40.0, neg: bool, t in 0.01f64..0.49) {
        let bg = half_bg();
        let x = signed(mag, neg);
        let d = 1e-4;
        let fd = (bg.eval(x, t + d, 0, 0).unwrap() - bg.eval(x, t - d, 0, 0).unwrap()) / (2.0 * d);
        let ex = bg.eval(x, t, 0, 1).unwrap();
        prop_assert!((fd - ex).abs() < 1e-6 * (1.0 + ex.abs()), "x={x} t={t}: {fd} vs {ex}");
    }

    #[test]
    fn tail_formula_equals_direct_substitution(mag in 2.0f64..200.0, neg: bool, t in 0.0f64..0.5) {
        let snap = half_bg().at_time(t).unwrap();
        let x = signed(mag, neg);
        let (a, b) = (snap.g_tail(x), snap.g_direct(x));
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "x={x} t={t}: {a} vs {b}");
    }

    #[test]
    fn background_vanishes_inside_the_cutoff(x in -1.0f64..=1.0, t in 0.0f64..0.5, n in 0usize..=3) {
        let bg = half_bg();
        prop_assert_eq!(bg.eval(x, t, n, 0).unwrap(), 0.0);
        prop_assert_eq!(bg.residual_g(x, t).unwrap(), 0.0);
    }

    #[test]
    fn smoothstep_is_continuous_across_the_reflection(eps in 1e-12f64..1e-6, n in 0usize..=3) {
        let (lo, hi) = (smoothstep(0.5 - eps, n), smoothstep(0.5 + eps, n));
        // |S⁽ⁿ⁺¹⁾| stays below 10⁴ on [0, 1]; a jump at the seam would be O(1)
        prop_assert!((lo - hi).abs() < 2e4 * eps, "n={n}: {lo} vs {hi}");
    }

    #[test]
    fn smoothstep_derivatives_match_differences(s in 0.01f64..0.99, n in 1usize..=3) {
        let d = 1e-6;
        let fd = (smoothstep(s + d, n - 1) - smoothstep(s - d, n - 1)) / (2.0 * d);
        let ex = smoothstep(s, n);
        prop_assert!((fd - ex).abs() < 1e-4 * (1.0 + ex.abs()), "s={s} n={n}: {fd} vs {ex}");
    }

    #[test]
    fn smoothstep_is_antisymmetric_about_the_midpoint(s in 0.0f64..1.0) {
        prop_assert!((smoothstep(s, 0) + smoothstep(1.0 - s, 0) - 1.0).abs() < 1e-14);
        prop_assert!((smoothstep(s, 1) - smoothstep(1.0 - s, 1)).abs() < 1e-11);
    }
}
