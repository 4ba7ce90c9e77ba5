//! Small internal numeric helpers shared across modules: binomials, power
//! tail sums, and regression with a finite-size correction term.

use nalgebra::{Matrix3, Vector3};

/// Binomial coefficient as f64 via a running product; exact for small
/// arguments, relative error O(k eps) in general.
pub(crate) fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// log of the binomial coefficient, safe for large arguments.
pub(crate) fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    crate::analytic::ln_gamma(n as f64 + 1.0)
        - crate::analytic::ln_gamma(k as f64 + 1.0)
        - crate::analytic::ln_gamma((n - k) as f64 + 1.0)
}

/// `Σ_{k >= k0} k^{-s}` for `s > 1`, via direct summation up to a cutoff and
/// an Euler–Maclaurin tail.  Absolute accuracy ~1e-14 for s >= 1.5.
pub(crate) fn power_sum_from(k0: u64, s: f64) -> f64 {
    let cutoff = k0.max(20_000);
    let mut acc = 0.0;
    for k in k0..cutoff {
        acc += (k as f64).powf(-s);
    }
    let m = cutoff as f64;
    // ∫_m^∞ + f(m)/2 − f'(m)/12 with f(x) = x^{-s}
    acc + m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s) - s / 12.0 * m.powf(-s - 1.0)
}

/// Least-squares fit of `log v = log C − a log l + beta l^{−corr}` over the
/// given (l, v) data.  The correction basis absorbs the leading finite-size
/// deviation from a pure power law; with `corr = 0` beta is aliased into
/// log C and the fit degrades to plain log-log regression.
/// Returns (amplitude C, exponent a).
pub(crate) fn fit_power_corrected(data: &[(f64, f64)], corr: f64) -> (f64, f64) {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(l, v) in data {
        let row = Vector3::new(1.0, -l.ln(), if corr > 0.0 { l.powf(-corr) } else { 0.0 });
        ata += row * row.transpose();
        atb += row * v.ln();
    }
    if corr <= 0.0 {
        // rank-2 system: drop the correction column
        let a2 = nalgebra::Matrix2::new(ata[(0, 0)], ata[(0, 1)], ata[(1, 0)], ata[(1, 1)]);
        let b2 = nalgebra::Vector2::new(atb[0], atb[1]);
        let sol = a2.lu().solve(&b2).expect("regression system solvable");
        return (sol[0].exp(), sol[1]);
    }
    let sol = ata.lu().solve(&atb).expect("regression system solvable");
    (sol[0].exp(), sol[1])
}

/// Plain log-log regression returning (amplitude, exponent).
pub(crate) fn fit_power(data: &[(f64, f64)]) -> (f64, f64) {
    fit_power_corrected(data, 0.0)
}

/// Spectral radius of a 3×3 matrix via the characteristic cubic in closed
/// form (Cardano / trigonometric).  Iterative Schur decompositions can fail
/// to converge on the near-nilpotent matrices that arise from degenerate
/// weight systems, so we avoid them here.
pub(crate) fn spectral_radius_3x3(m: &Matrix3<f64>) -> f64 {
    // det(λI − M) = λ³ − c2 λ² + c1 λ − c0
    let c2 = m.trace();
    let c1 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
    let c0 = m.determinant();
    // depressed cubic t³ + p t + q with λ = t + c2/3
    let s = c2 / 3.0;
    let p = c1 - 3.0 * s * s;
    let q = -2.0 * s * s * s + c1 * s - c0;
    let d = 0.25 * q * q + p * p * p / 27.0;
    let radius_sq = if d > 0.0 {
        // one real root u+v, complex pair −(u+v)/2 ± i√3(u−v)/2
        let u = (-0.5 * q + d.sqrt()).cbrt();
        let v = (-0.5 * q - d.sqrt()).cbrt();
        let real = (u + v + s).powi(2);
        let pair = (0.5 * (u + v) - s).powi(2) + 0.75 * (u - v) * (u - v);
        real.max(pair)
    } else if p == 0.0 {
        // triple root at t = 0
        s * s
    } else {
        // three real roots, trigonometric form
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                let t = r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                (t + s) * (t + s)
            })
            .fold(0.0, f64::max)
    };
    radius_sq.sqrt()
}

/// Golden-section minimization of a unimodal function on [lo, hi].
pub(crate) fn golden_min(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
    }

    #[test]
    fn power_sum_matches_zeta_two() {
        // ζ(2) = π²/6
        let z2 = power_sum_from(1, 2.0);
        assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn corrected_fit_recovers_exponent() {
        let data: Vec<(f64, f64)> = (100..1000)
            .step_by(7)
            .map(|l| {
                let l = l as f64;
                (l, 2.0 * l.powf(-2.25) * (3.0 * l.powf(-0.5)).exp())
            })
            .collect();
        let (c, a) = fit_power_corrected(&data, 0.5);
        assert!((a - 2.25).abs() < 1e-3, "a = {a}");
        assert!((c - 2.0).abs() < 0.05, "c = {c}");
    }

    #[test]
    fn golden_finds_parabola_min() {
        let x = golden_min(-1.0, 2.0, 1e-10, |x| (x - 0.3).powi(2));
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn cubic_spectral_radius_known_matrices() {
        let diag = Matrix3::new(1.0, 0.0, 0.0, 0.0, -4.0, 0.0, 0.0, 0.0, 3.0);
        assert!((spectral_radius_3x3(&diag) - 4.0).abs() < 1e-12);
        // block diag(2, rotation-scale): eigenvalues 2, 1 ± 2i
        let mixed = Matrix3::new(2.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, -2.0, 1.0);
        assert!((spectral_radius_3x3(&mixed) - 5.0_f64.sqrt()).abs() < 1e-12);
        // near-nilpotent: the case that stalls iterative Schur
        let nil = Matrix3::new(0.0, 0.0, 1e-16, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(spectral_radius_3x3(&nil) < 1e-5);
        assert_eq!(spectral_radius_3x3(&Matrix3::zeros()), 0.0);
    }
}
