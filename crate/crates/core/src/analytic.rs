//! Special functions for the walk analysis: the harmonic sequence `h0`,
//! the hitting kernel `H_l(p)` of the negative half-line, the nesting rate
//! function `J`, and the decay constants `b` and `C`.
//!
//! Everything in this module is a pure function of its arguments.  The
//! workhorse is the coefficient sequence of the generating function
//!
//! ```text
//!   S(z) = 1 / sqrt((1 - z)(1 + r z)),   r in (-1, 1],
//! ```
//!
//! computed by a three-term recurrence (stable, O(p)) and cross-checkable
//! against a terminating hypergeometric sum evaluated in exact rational
//! arithmetic ([`h0_hypergeometric`]).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::LoopMapError;

/// Default absolute error target for table entries.
pub const DEFAULT_PRECISION: f64 = 1e-12;

fn check_r(r: f64) -> Result<(), LoopMapError> {
    if !(r > -1.0 && r <= 1.0) || !r.is_finite() {
        return Err(LoopMapError::Domain(format!(
            "r = {r} outside the admissible interval (-1, 1]"
        )));
    }
    Ok(())
}

/// Table of `h0(p)` values for `p = 0..=p_max` at a fixed `r`.
///
/// Entries are Taylor coefficients of `1/sqrt((1-z)(1+rz))`; they satisfy
/// `values[0] = 1`, `values[p] ∈ (0, 1]`, and the convention that the
/// extension to negative indices is zero.
#[derive(Debug, Clone)]
pub struct HFunctionTable {
    pub r: f64,
    pub values: Vec<f64>,
    /// Absolute error bound per entry (accumulated rounding estimate).
    pub precision: f64,
}

impl HFunctionTable {
    /// Value at an arbitrary integer index, zero for `p < 0`.
    pub fn get(&self, p: i64) -> f64 {
        if p < 0 {
            0.0
        } else {
            self.values[p as usize]
        }
    }
}

/// Coefficients of `1/sqrt((1-z)(1+rz))` for `p = 0..=p_max`.
///
/// Derived from `Q(z) S'(z) = -Q'(z) S(z) / 2` with `Q = (1-z)(1+rz)`:
///
/// ```text
///   (p+1) c_{p+1} = (1-r)(p + 1/2) c_p + r p c_{p-1}.
/// ```
///
/// For `r >= 0` all terms are nonnegative, so no cancellation occurs; for
/// `r < 0` the subtraction is mild (the result stays within a factor of the
/// dominant term) and the accumulated relative error grows at most linearly
/// in `p`.
pub fn h0_series(r: f64, p_max: usize) -> Result<HFunctionTable, LoopMapError> {
    check_r(r)?;
    let mut values = vec![0.0; p_max + 1];
    values[0] = 1.0;
    if p_max >= 1 {
        values[1] = (1.0 - r) / 2.0;
    }
    for p in 1..p_max {
        values[p + 1] =
            ((1.0 - r) * (p as f64 + 0.5) * values[p] + r * p as f64 * values[p - 1])
                / (p + 1) as f64;
    }
    // Linear-in-p rounding growth; the cross-route acceptance test pins this
    // down empirically to ~1e-13 relative at p = 400.
    let precision = (p_max as f64).max(1.0) * f64::EPSILON * 4.0;
    Ok(HFunctionTable { r, values, precision })
}

/// `h0(p)` at a single index; zero for `p < 0`, one at `p = 0`.
pub fn h0(r: f64, p: i64) -> Result<f64, LoopMapError> {
    check_r(r)?;
    if p < 0 {
        return Ok(0.0);
    }
    Ok(h0_series(r, p as usize)?.values[p as usize])
}

/// `h0(p)` evaluated through the terminating hypergeometric sum
///
/// ```text
///   h0(p) = (-r/4)^p C(2p, p) 2F1(1/2, -p; 1/2 - p; -1/r),
/// ```
///
/// carried out in exact rational arithmetic (`r` is first converted to the
/// exact rational its floating representation denotes).  The sum alternates
/// in sign for `r > 0` with enormous intermediate terms, which is precisely
/// why this route exists only as an oracle: exactness here, speed in
/// [`h0_series`].
pub fn h0_hypergeometric(r: f64, p: i64) -> Result<f64, LoopMapError> {
    check_r(r)?;
    if p < 0 {
        return Ok(0.0);
    }
    let r_exact = BigRational::from_float(r)
        .ok_or_else(|| LoopMapError::Domain("r not finite".into()))?;
    Ok(h0_hypergeometric_rational(&r_exact, p as usize)
        .to_f64()
        .expect("rational fits in f64 range"))
}

/// Exact-rational version of [`h0_hypergeometric`].  `r = 0` degenerates to
/// the central binomial coefficients `C(2p,p)/4^p`.
pub fn h0_hypergeometric_rational(r: &BigRational, p: usize) -> BigRational {
    let binom_2p_p = binomial_big(2 * p, p);
    let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
    if r.is_zero() {
        // (-0/4)^p would wrongly kill every p >= 1; the limit of the product
        // is the r = 0 coefficient of (1-z)^{-1/2}.
        return BigRational::from(binom_2p_p) * quarter.pow(p as i32);
    }
    // Terminating 2F1 sum: term ratio
    //   t_{n+1}/t_n = (2n+1)(n-p) / ((2n-2p+1)(n+1)) * (-1/r).
    //
    // Terms and partial sum are kept as raw integers over one running
    // denominator (every step multiplies the denominator, never divides),
    // avoiding the per-operation gcd a rational type would pay: the sum has
    // massive cancellation, so intermediate reduction buys nothing.
    let a = r.numer().clone();
    let b = r.denom().clone();
    let mut term = BigInt::one();
    let mut sum = BigInt::one();
    for n in 0..p {
        let ni = n as i64;
        let pi = p as i64;
        let num_fac = BigInt::from((2 * ni + 1) * (ni - pi)) * -&b;
        let den_fac = BigInt::from((2 * ni - 2 * pi + 1) * (ni + 1)) * &a;
        term *= num_fac;
        sum = sum * &den_fac + &term;
        // keep the running denominator implicit: term and sum now both sit
        // over Π den_fac, which the final BigRational::new normalizes away
        if n + 1 == p {
            let mut denom = BigInt::one();
            // reconstruct Π den_fac once, cheaply, for the final quotient
            for m in 0..p {
                let mi = m as i64;
                denom *= BigInt::from((2 * mi - 2 * pi + 1) * (mi + 1)) * &a;
            }
            let prefactor = (-r * quarter).pow(p as i32) * BigRational::from(binom_2p_p);
            return prefactor * BigRational::new(sum, denom);
        }
    }
    BigRational::from(binom_2p_p) * quarter.pow(p as i32) // p = 0: empty sum
}

fn binomial_big(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k.min(n - k) {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Kernel of final positions: `table[l][p]` is the probability that the
/// walk started at `p` first enters the nonpositive integers exactly at
/// `-l`, for an admissible step law with parameter `r`.
#[derive(Debug, Clone)]
pub struct HittingKernel {
    pub r: f64,
    /// `table[l][p]`, for `l <= l_max`, `p <= p_max`.
    pub table: Vec<Vec<f64>>,
}

impl HittingKernel {
    pub fn get(&self, l: usize, p: usize) -> f64 {
        self.table[l][p]
    }

    /// Sum over landing points for a fixed start, `Σ_l H_l(p)`.
    pub fn row_mass(&self, p: usize) -> f64 {
        self.table.iter().map(|row| row[p]).sum()
    }
}

/// Single kernel value
///
/// ```text
///   H_l(p) = p/(l+p) (h0(p) h0(l) + r h0(p-1) h0(l-1))  for p > 0,
///   H_l(0) = 1{l = 0}.
/// ```
pub fn hitting_value(h: &HFunctionTable, l: usize, p: usize) -> f64 {
    if p == 0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    let pf = p as f64;
    let lf = l as f64;
    pf / (lf + pf)
        * (h.get(p as i64) * h.get(l as i64) + h.r * h.get(p as i64 - 1) * h.get(l as i64 - 1))
}

/// Tabulate `H_l(p)` for `l <= l_max`, `p <= p_max`.
pub fn hitting_kernel(r: f64, l_max: usize, p_max: usize) -> Result<HittingKernel, LoopMapError> {
    let h = h0_series(r, l_max.max(p_max))?;
    let table = (0..=l_max)
        .map(|l| (0..=p_max).map(|p| hitting_value(&h, l, p)).collect())
        .collect();
    Ok(HittingKernel { r, table })
}

/// Outcome of the generating-function identity check for the hitting kernel.
#[derive(Debug, Clone)]
pub struct GfCheckReport {
    /// Truncated double sum `Σ_{l,p <= n_max} H_l(p) x^l y^p`.
    pub partial_sum: f64,
    /// Closed form `(x - y sqrt((1-x)(1+rx)/((1-y)(1+ry)))) / (x - y)`,
    /// with the `x = y` limit `(1/(1-x) + 1/(1+rx))/2`.
    pub closed_form: f64,
    pub residual: f64,
    /// Bound on the truncation tail of the double sum.
    pub truncation_bound: f64,
}

/// Compares the truncated kernel generating function against its closed form.
///
/// The `x == y` branch uses the exact limit formula rather than the 0/0
/// quotient.
pub fn hitting_gf_check(
    r: f64,
    x: f64,
    y: f64,
    n_max: usize,
) -> Result<GfCheckReport, LoopMapError> {
    check_r(r)?;
    if x.abs() > 1.0 || y.abs() >= 1.0 {
        return Err(LoopMapError::Domain(format!(
            "generating function requires |x| <= 1, |y| < 1 (got x={x}, y={y})"
        )));
    }
    let kernel = hitting_kernel(r, n_max, n_max)?;
    let mut partial_sum = 0.0;
    // Sum p-major with Horner-like accumulation in l for mild rounding.
    for p in 0..=n_max {
        let mut row = 0.0;
        for l in (0..=n_max).rev() {
            row = row * x + kernel.get(l, p);
        }
        partial_sum += row * y.powi(p as i32);
    }
    let closed_form = if (x - y).abs() < 1e-14 {
        0.5 * (1.0 / (1.0 - x) + 1.0 / (1.0 + r * x))
    } else {
        (x - y * ((1.0 - x) * (1.0 + r * x) / ((1.0 - y) * (1.0 + r * y))).sqrt()) / (x - y)
    };
    // Rows satisfy Σ_l H_l(p) <= 1 and each entry is at most
    // h0(l) + h0(l-1) <= 2, giving geometric tail bounds in both indices.
    let ax = x.abs();
    let ay = y.abs();
    let truncation_bound = ay.powi(n_max as i32 + 1) / (1.0 - ay) / (1.0 - ax).max(f64::MIN_POSITIVE)
        + 2.0 * ax.powi(n_max as i32 + 1) / (1.0 - ax).max(f64::MIN_POSITIVE) / (1.0 - ay);
    Ok(GfCheckReport {
        partial_sum,
        closed_form,
        residual: (partial_sum - closed_form).abs(),
        truncation_bound,
    })
}

/// Large-deviation rate function of the nesting statistic,
///
/// ```text
///   J(x) = x log( x / (p sqrt(1+x^2)) ) + arccot(x) - arccos(p),
/// ```
///
/// with `arccot(x) = pi/2 - arctan(x)` mapping `x > 0` into `(0, pi/2)`.
/// Nonnegative, strictly convex, vanishing exactly at `x = p/sqrt(1-p^2)`.
pub fn rate_j(frak_p: f64, x: f64) -> Result<f64, LoopMapError> {
    if !(frak_p > 0.0 && frak_p < 1.0) {
        return Err(LoopMapError::Domain(format!("frak_p = {frak_p} not in (0,1)")));
    }
    if x <= 0.0 {
        return Err(LoopMapError::Domain(format!("rate function needs x > 0 (got {x})")));
    }
    let log_term = x * (x / (frak_p * (1.0 + x * x).sqrt())).ln();
    Ok(log_term + (std::f64::consts::FRAC_PI_2 - x.atan()) - frak_p.acos())
}

/// Decay exponent `b = arccos(p)/pi ∈ [0, 1/2]` of the trapping probability.
pub fn exponent_b(frak_p: f64) -> Result<f64, LoopMapError> {
    if !(0.0..=1.0).contains(&frak_p) {
        return Err(LoopMapError::Domain(format!("frak_p = {frak_p} not in [0,1]")));
    }
    Ok(frak_p.acos() / std::f64::consts::PI)
}

/// Amplitude of the trapping-probability asymptotics `h_p(p) ~ C p^{-b}`:
///
/// ```text
///   C = (8 sqrt 2 / pi) u sqrt(1-p) Γ(b) sin(b arccos(sqrt u))
///       / ( sqrt(1-u) (8u(1+r))^b ).
/// ```
///
/// The free parameter `u ∈ (0,1)` is only known in closed form at `p = 0`,
/// where `u = (17 + sqrt 33)/128` collapses the expression to
/// `Γ(1/2)/(pi sqrt(1+r))`.
pub fn amplitude_c(frak_p: f64, r: f64, u: f64) -> Result<f64, LoopMapError> {
    if !(0.0..1.0).contains(&frak_p) {
        return Err(LoopMapError::Domain(format!("frak_p = {frak_p} not in [0,1)")));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(LoopMapError::Domain(format!("u = {u} not in (0,1)")));
    }
    check_r(r)?;
    let b = exponent_b(frak_p)?;
    Ok(8.0 * std::f64::consts::SQRT_2 / std::f64::consts::PI
        * u
        * (1.0 - frak_p).sqrt()
        * gamma(b)
        * (b * u.sqrt().acos()).sin()
        / ((1.0 - u).sqrt() * (8.0 * u * (1.0 + r)).powf(b)))
}

/// The `u` value that makes [`amplitude_c`] exact at `frak_p = 0`.
pub fn u_at_zero() -> f64 {
    (17.0 + 33.0_f64.sqrt()) / 128.0
}

/// Gamma function via the Lanczos approximation (g = 7, n = 9), accurate to
/// well below 1e-13 relative on the positive real axis.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + G + 0.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Natural log of the gamma function (positive arguments), for ratios whose
/// direct evaluation would overflow.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Exact rational used by oracle tests: `|h0_exact - h0_float|` must stay
/// within the table's stated precision.
pub fn h0_abs_error(r: &BigRational, table: &HFunctionTable, p: usize) -> f64 {
    let exact = h0_hypergeometric_rational(r, p);
    let float = BigRational::from_float(table.values[p]).unwrap();
    (exact - float).abs().to_f64().unwrap()
}
