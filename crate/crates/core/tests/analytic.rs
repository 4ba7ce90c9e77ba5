//! Cross-route and frozen-value tests for the special-function layer.

use loopmaps::analytic::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

/// 12-point r grid spanning (-1, 1], chosen with small denominators so the
/// exact-rational oracle stays fast.
const R_GRID: [(i64, i64); 12] = [
    (-9, 10),
    (-3, 4),
    (-1, 2),
    (-1, 4),
    (-1, 10),
    (0, 1),
    (1, 10),
    (1, 4),
    (2, 5),
    (1, 2),
    (3, 4),
    (1, 1),
];

#[test]
fn h0_fixed_small_values() {
    for &(num, den) in &R_GRID {
        let r = num as f64 / den as f64;
        assert_eq!(h0(r, 0).unwrap(), 1.0);
        assert!((h0(r, 1).unwrap() - (1.0 - r) / 2.0).abs() < 1e-15);
        assert_eq!(h0(r, -3).unwrap(), 0.0);
    }
    // r = 0 collapses to central binomials over 4^p
    assert!((h0(0.0, 2).unwrap() - 3.0 / 8.0).abs() < 1e-15);
    assert!((h0(0.0, 3).unwrap() - 5.0 / 16.0).abs() < 1e-15);
    // r = 1: coefficients of (1-z^2)^{-1/2} vanish at odd orders
    let t = h0_series(1.0, 6).unwrap();
    let expect = [1.0, 0.0, 0.5, 0.0, 0.375, 0.0, 0.3125];
    for (p, &e) in expect.iter().enumerate() {
        assert!((t.values[p] - e).abs() < 1e-15, "p = {p}");
    }
}

#[test]
fn h0_recurrence_matches_exact_hypergeometric_route() {
    // the two routes share no code path: a float three-term recurrence vs a
    // terminating 2F1 sum in exact rational arithmetic
    for &(num, den) in &R_GRID {
        let r_exact = BigRational::new(BigInt::from(num), BigInt::from(den));
        let r = num as f64 / den as f64;
        let table = h0_series(r, 400).unwrap();
        for p in 0..=400 {
            let exact = h0_hypergeometric_rational(&r_exact, p)
                .to_f64()
                .expect("fits f64");
            let diff = (table.values[p] - exact).abs();
            // at r = 1 odd coefficients are exactly zero on both routes
            let rel = if exact == 0.0 { diff } else { diff / exact.abs() };
            assert!(rel < 1e-12, "r = {num}/{den}, p = {p}: rel = {rel:.3e}");
        }
    }
}

#[test]
fn h0_float_wrapper_agrees_at_small_p() {
    for &(num, den) in &R_GRID {
        let r = num as f64 / den as f64;
        for p in 0..12 {
            let a = h0(r, p).unwrap();
            let b = h0_hypergeometric(r, p).unwrap();
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0), "r={r} p={p}");
        }
    }
}

#[test]
fn h0_square_root_asymptote() {
    // h0(p) ~ p^{-1/2} / (sqrt(pi) sqrt(1+r)), with an O(1/p) correction
    for &r in &[-0.5, 0.0, 0.4, 0.9] {
        let t = h0_series(r, 40_000).unwrap();
        let norm = |p: usize| {
            t.values[p] * (p as f64).sqrt() * std::f64::consts::PI.sqrt() * (1.0 + r).sqrt()
        };
        let d1 = (norm(10_000) - 1.0).abs();
        let d2 = (norm(40_000) - 1.0).abs();
        assert!(d1 < 1e-3, "r = {r}: {d1}");
        assert!(d2 < d1, "r = {r}: no convergence ({d1} -> {d2})");
    }
}

#[test]
fn hitting_kernel_rows_are_probabilities() {
    // Σ_l H_l(p) = 1; with l truncated at L the missing mass decays like
    // p L^{-1/2} up to constants, so generous L gives tight row sums
    let coarse = hitting_kernel(0.4, 10_000, 6).unwrap();
    let kernel = hitting_kernel(0.4, 40_000, 6).unwrap();
    for p in 0..=6 {
        let mass = kernel.row_mass(p);
        assert!(mass <= 1.0 + 1e-12, "p = {p}: {mass}");
        assert!(1.0 - mass < 0.02, "p = {p}: {mass}");
        // quadrupling the cutoff must roughly halve the missing mass
        let gap_ratio = (1.0 - coarse.row_mass(p)) / (1.0 - mass);
        if p > 0 {
            assert!((1.7..2.3).contains(&gap_ratio), "p = {p}: ratio {gap_ratio}");
        }
    }
    // and every entry is a probability
    assert!(kernel.get(0, 0) == 1.0);
    assert!(kernel.get(3, 0) == 0.0);
    assert!((0.0..=1.0).contains(&kernel.get(5, 3)));
}

#[test]
fn hitting_kernel_generating_function_identity() {
    for &r in &[-0.6, 0.0, 0.4, 1.0] {
        for &(x, y) in &[(0.3, 0.5), (0.9, 0.2), (-0.5, 0.7), (0.6, 0.6), (1.0, 0.4)] {
            let rep = hitting_gf_check(r, x, y, 400).unwrap();
            assert!(
                rep.residual <= rep.truncation_bound + 1e-10,
                "r={r} x={x} y={y}: residual {:.3e} vs bound {:.3e}",
                rep.residual,
                rep.truncation_bound
            );
        }
    }
}

#[test]
fn rate_function_vanishes_at_the_mean() {
    for &fp in &[0.25, 0.5, 0.75, 0.95] {
        let x_star = fp / (1.0 - fp * fp as f64).sqrt();
        assert!(rate_j(fp, x_star).unwrap().abs() < 1e-14, "frak_p = {fp}");
        // nonnegative and growing away from the zero
        let mut last = 0.0;
        for i in 1..30 {
            let j = rate_j(fp, x_star + 0.1 * i as f64).unwrap();
            assert!(j >= last - 1e-15);
            last = j;
        }
        let mut last = 0.0;
        for i in 1..10 {
            let x = x_star * (1.0 - 0.1 * i as f64 / 10.0);
            let j = rate_j(fp, x).unwrap();
            assert!(j >= last - 1e-15);
            last = j;
        }
    }
}

#[test]
fn exponent_b_reference_points() {
    assert!((exponent_b(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(exponent_b(1.0).unwrap().abs() < 1e-15);
    assert!((exponent_b(0.0).unwrap() - 0.5).abs() < 1e-15);
    assert!(exponent_b(1.5).is_err());
}

#[test]
fn amplitude_collapses_at_zero_loop_weight() {
    // at frak_p = 0 with u = (17+sqrt 33)/128 the amplitude reduces to
    // Γ(1/2)/(pi sqrt(1+r))
    let u = u_at_zero();
    for &r in &[-0.5, 0.0, 0.4, 1.0] {
        let c = amplitude_c(0.0, r, u).unwrap();
        let expect = std::f64::consts::PI.sqrt() / (std::f64::consts::PI * (1.0 + r).sqrt());
        assert!((c - expect).abs() < 1e-12 * expect, "r = {r}: {c} vs {expect}");
    }
}

#[test]
fn gamma_reference_values() {
    assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    assert!((gamma(5.0) - 24.0).abs() < 1e-12);
    assert!((gamma(1.0) - 1.0).abs() < 1e-14);
    // reflection: Γ(-1/2) = -2 sqrt(pi)
    assert!((gamma(-0.5) + 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    // ln_gamma against statrs on a positive grid
    for i in 1..300 {
        let x = 0.1 * i as f64;
        let mine = ln_gamma(x);
        let theirs = statrs::function::gamma::ln_gamma(x);
        assert!(
            (mine - theirs).abs() <= 1e-12 * mine.abs().max(1.0),
            "x = {x}: {mine} vs {theirs}"
        );
    }
}
