use proptest::prelude::*;
use solidify::schedule::{alpha_delta, elementary_lemma_check, intervals, lambert_w_check, scale_sets};

/// W₋₁(z) for z ∈ (−1/e, 0) by Halley iteration from a series start on the lower branch.
fn lambert_wm1(z: f64) -> f64 {
    let p = -(2.0 * (1.0 + std::f64::consts::E * z)).sqrt();
    let mut w = if z < -0.25 { -1.0 + p - p * p / 3.0 } else { (-z).ln() - (-(-z).ln()).ln() };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - z;
        let next = w - f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
        if (next - w).abs() < 1e-15 * w.abs() {
            return next;
        }
        w = next;
    }
    w
}

#[test]
fn alpha_matches_the_raw_formula() {
    for j in 1..=64u32 {
        let raw = 0.5 * (1.0 - 2.0 / ((10.0f64 / 9.0).powf(1.0 / j as f64) + 1.0));
        let (a, d) = alpha_delta(j).unwrap();
        assert!((a - raw).abs() <= 1e-15, "J = {j}");
        assert_eq!(d, a / 4.0);
    }
}

#[test]
fn interval_zero_is_centred() {
    for j in [1u32, 2, 5, 20] {
        let (a, _) = alpha_delta(j).unwrap();
        let iv = intervals(j).unwrap();
        assert!((iv[0].0 - (0.5 - a / 4.0)).abs() < 1e-15 && (iv[0].1 - (0.5 + a / 4.0)).abs() < 1e-15);
        assert!(iv.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 > w[0].1));
    }
}

#[test]
fn lambert_bracket_contains_halley_value() {
    for k in 0..200 {
        let u = 0.01 + 0.25 * k as f64;
        let r = lambert_w_check(u).unwrap();
        let w = if u < 30.0 { lambert_wm1(-(-u - 1.0).exp()) } else { continue };
        assert!(w >= r.w_lo - 1e-9 && w <= r.w_hi + 1e-9, "u = {u}: {w} vs [{}, {}]", r.w_lo, r.w_hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Float evaluation of the two alternatives, away from exact ties.
    #[test]
    fn alternatives_agree_with_float_evaluation(counts in prop::collection::vec(0u64..50, 101), dn in 1u64..25) {
        let m: u64 = counts.iter().sum();
        prop_assume!(m > 0);
        let mf = m as f64;
        let mu = counts.iter().enumerate().map(|(k, &c)| k as f64 / 100.0 * c as f64).sum::<f64>() / mf;
        let delta = dn as f64 / 100.0;
        prop_assume!(delta < mu.min(1.0 - mu) - 1e-9);
        let near = counts.iter().enumerate().any(|(k, _)| ((k as f64 / 100.0 - mu).abs() - delta).abs() < 1e-9);
        prop_assume!(!near);
        let up = counts.iter().enumerate().filter(|(k, _)| *k as f64 / 100.0 > mu + delta).map(|(_, c)| *c).sum::<u64>() as f64 / mf;
        let low = counts.iter().enumerate().filter(|(k, _)| (*k as f64 / 100.0) < mu - delta).map(|(_, c)| *c).sum::<u64>() as f64 / mf;
        let mid = 1.0 - up - low;
        let r = elementary_lemma_check(&counts, dn, 100).unwrap();
        prop_assert!((r.upper_tail - up).abs() < 1e-12 && (r.lower_tail - low).abs() < 1e-12);
        if (up.min(low) - delta / 2.0).abs() > 1e-9 {
            prop_assert_eq!(r.tails, up >= delta / 2.0 && low >= delta / 2.0);
        }
        if (mid - (0.25 - delta / 2.0)).abs() > 1e-9 {
            prop_assert_eq!(r.center, mid >= 0.25 - delta / 2.0);
        }
        prop_assert!(r.holds());
    }

    #[test]
    fn scale_sets_shape(i in 1u64..30, j in 1u32..6, l in 1u32..9, extra in 0u64..500) {
        let ell_star = i * (j as u64 + 1) * l as u64 + extra;
        let (a_star, a) = scale_sets(ell_star, i, j, l).unwrap();
        prop_assert_eq!(a_star.len() as u64, (j as u64 + 1) * i);
        prop_assert_eq!(a.len() as u64, i);
        prop_assert!(a_star.windows(2).all(|w| w[0] - w[1] == l as u64));
        prop_assert!(a.iter().all(|x| a_star.contains(x) && x % ((j as u64 + 1) * l as u64) == 0));
        prop_assert!(a_star[0] <= ell_star);
    }
}
