//! The accelerated ricocheted random walk.
//!
//! A walk on ℤ with step law ν is reflected off ℤ≤0 in a peculiar way: a
//! jump that would land at −v < 0 either traps the walk there (probability
//! 1−𝔭) or "ricochets" it back to l ≥ 0 with the negative-binomial law
//! binom(v+l−1, l)·2^{−(l+v)}.  Landing on 0 traps.  This module simulates
//! the walk, computes the trap-at-zero probability h^r_𝔭 by three
//! independent routes, builds the walk conditioned to be trapped at zero,
//! and measures nesting (ricochet-count) statistics.

use crate::analytic::{self, HFunctionTable, HittingKernel};
use crate::weights::{StepLaw, TailModel};
use crate::{LoopMapError, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Hard ceiling on simulation steps when the caller does not supply one.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

// ---------------------------------------------------------------------------
// state and parameters
// ---------------------------------------------------------------------------

/// One point of the walk: position, ricochet count, and whether the walk
/// has stopped moving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrwState {
    pub position: i64,
    pub nesting: u64,
    pub trapped: bool,
}

impl ArrwState {
    pub fn start(p0: i64) -> ArrwState {
        ArrwState { position: p0, nesting: 0, trapped: p0 <= 0 }
    }
}

/// Step law plus ricochet probability, with the sampling caches that make
/// per-step work O(1) in the typical case.
#[derive(Debug, Clone)]
pub struct ArrwParams {
    pub nu: StepLaw,
    pub frak_p: f64,
    sampler: CdfSampler,
}

impl ArrwParams {
    pub fn new(nu: StepLaw, frak_p: f64) -> Result<ArrwParams> {
        if !(0.0..=1.0).contains(&frak_p) {
            return Err(LoopMapError::Domain(format!(
                "ricochet probability {frak_p} outside [0, 1]"
            )));
        }
        let sampler = CdfSampler::new(&nu)?;
        Ok(ArrwParams { nu, frak_p, sampler })
    }

    /// One ν-distributed increment.
    pub fn sample_increment<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.sampler.sample(rng)
    }

    /// Landing point after a ricochet with overshoot `v ≥ 1`: the number of
    /// tails seen before the v-th head in fair coin flips, which realizes
    /// binom(v+l−1, l)·2^{−(l+v)} exactly.
    pub fn sample_landing<R: Rng + ?Sized>(&self, v: u64, rng: &mut R) -> i64 {
        debug_assert!(v >= 1);
        let mut heads = 0u64;
        let mut tails = 0i64;
        while heads < v {
            if rng.gen::<bool>() {
                heads += 1;
            } else {
                tails += 1;
            }
        }
        tails
    }

    /// `|1 − Σ_{l ≤ l_cap} binom(v+l−1,l) 2^{−(l+v)}|`, the numerical defect
    /// of one landing-kernel row.
    pub fn landing_row_defect(&self, v: usize, l_cap: usize) -> f64 {
        (1.0 - landing_row(v, l_cap).iter().sum::<f64>()).abs()
    }
}

// ---------------------------------------------------------------------------
// step-law sampling: CDF inversion on a core window, analytic tails outside
// ---------------------------------------------------------------------------

const CORE_ESCAPE_TARGET: f64 = 1e-10;
const CORE_HALF_WIDTH_CAP: usize = 1 << 20;

/// Cached cumulative distribution of ν on a window `[−k_neg, k_pos]`, with
/// the two tail models sampled analytically when a draw escapes the window.
#[derive(Debug, Clone)]
struct CdfSampler {
    k_neg: usize,
    cdf: Vec<f64>, // cumulative over k = −k_neg .. k_pos
    core_mass: f64,
    pos_escape: f64,
    neg_escape: f64,
    total: f64,
    pos_tail: TailModel,
    neg_tail: TailModel,
}

impl CdfSampler {
    fn new(nu: &StepLaw) -> Result<CdfSampler> {
        // the window must at least cover the explicit tables so the escape
        // masses are pure tail-model quantities
        let mut half = nu
            .pos_table
            .len()
            .max(nu.neg_table.len() + 1)
            .max(256)
            .next_power_of_two();
        while half < CORE_HALF_WIDTH_CAP
            && nu.pos_tail.mass_beyond(half as u64) + nu.neg_tail.mass_beyond(half as u64)
                > CORE_ESCAPE_TARGET
        {
            half *= 2;
        }
        for tail in [&nu.pos_tail, &nu.neg_tail] {
            if let TailModel::Power { exponent, .. } = tail {
                if *exponent <= 1.0 {
                    return Err(LoopMapError::Domain(
                        "power tail with exponent ≤ 1 has infinite mass".into(),
                    ));
                }
            }
        }
        let (k_neg, k_pos) = (half, half);
        let mut cdf = Vec::with_capacity(k_neg + k_pos + 1);
        let mut acc = 0.0;
        for k in -(k_neg as i64)..=(k_pos as i64) {
            acc += nu.nu(k);
            cdf.push(acc);
        }
        let pos_escape = nu.pos_tail.mass_beyond(k_pos as u64);
        let neg_escape = nu.neg_tail.mass_beyond(k_neg as u64);
        Ok(CdfSampler {
            k_neg,
            core_mass: acc,
            total: acc + pos_escape + neg_escape,
            cdf,
            pos_escape,
            neg_escape,
            pos_tail: nu.pos_tail.clone(),
            neg_tail: nu.neg_tail.clone(),
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u = rng.gen::<f64>() * self.total;
        if u < self.core_mass {
            let idx = self.cdf.partition_point(|&c| c <= u);
            idx as i64 - self.k_neg as i64
        } else if u < self.core_mass + self.pos_escape {
            sample_tail(&self.pos_tail, self.k_neg as u64, rng) as i64
        } else {
            -(sample_tail(&self.neg_tail, self.k_neg as u64, rng) as i64)
        }
    }
}

/// Draws a depth `d > from` with probability proportional to the tail model.
fn sample_tail<R: Rng + ?Sized>(tail: &TailModel, from: u64, rng: &mut R) -> u64 {
    match *tail {
        TailModel::Zero => unreachable!("zero tail has no escape mass"),
        TailModel::Geometric { ratio, .. } => {
            // memoryless continuation of the geometric profile
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            from + 1 + (u.ln() / ratio.ln()).floor() as u64
        }
        TailModel::Power { exponent: e, shift: s, .. } => {
            // Propose a continuous x with density ∝ (x+s)^{−e} on
            // [from+1/2, ∞), take the integer cell containing it, and accept
            // with ratio (point mass)/(cell integral) ≤ 1 (the integrand is
            // convex).  Exact for the power model, O(1) expected time.
            let base = from as f64 + 0.5 + s;
            loop {
                let u: f64 = rng.gen();
                let x = base * (1.0 - u).powf(-1.0 / (e - 1.0)) - s;
                let d = (x + 0.5).floor();
                let cell =
                    ((d - 0.5 + s).powf(1.0 - e) - (d + 0.5 + s).powf(1.0 - e)) / (e - 1.0);
                if rng.gen::<f64>() * cell <= (d + s).powf(-e) {
                    return d as u64;
                }
            }
        }
    }
}

/// Negative-binomial landing weights `binom(v+l−1, l)·2^{−(l+v)}` for a fixed
/// overshoot `v`, `l = 0..=l_max`.  Run in log space: the row entries near
/// its peak are fine even when the l = 0 entry `2^{−v}` underflows.
fn landing_row(v: usize, l_max: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(l_max + 1);
    let mut lw = -(v as f64) * std::f64::consts::LN_2;
    for l in 0..=l_max {
        row.push(lw.exp());
        lw += ((v + l) as f64 / (2.0 * (l + 1) as f64)).ln();
    }
    row
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

/// One transition of the walk.  Trapped states are absorbing.
pub fn arrw_step<R: Rng + ?Sized>(s: &ArrwState, par: &ArrwParams, rng: &mut R) -> ArrwState {
    if s.position <= 0 {
        return ArrwState { trapped: true, ..*s };
    }
    let w = s.position + par.sample_increment(rng);
    if w > 0 {
        ArrwState { position: w, nesting: s.nesting, trapped: false }
    } else if w == 0 {
        ArrwState { position: 0, nesting: s.nesting, trapped: true }
    } else if rng.gen::<f64>() < par.frak_p {
        let l = par.sample_landing((-w) as u64, rng);
        ArrwState { position: l, nesting: s.nesting + 1, trapped: l == 0 }
    } else {
        ArrwState { position: w, nesting: s.nesting, trapped: true }
    }
}

/// Summary of one full trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySummary {
    pub p0: i64,
    pub w_final: i64,
    pub n_final: u64,
    pub steps: u64,
    /// The step cap fired before trapping; `w_final`/`n_final` then hold the
    /// state at the cap and must not enter trapping statistics silently.
    pub cap_exceeded: bool,
}

/// Runs the walk until it traps or `step_cap` transitions have been taken.
pub fn run_until_trapped<R: Rng + ?Sized>(
    p0: i64,
    par: &ArrwParams,
    rng: &mut R,
    step_cap: u64,
) -> Result<TrajectorySummary> {
    if par.frak_p >= 1.0 {
        return Err(LoopMapError::Domain(
            "the walk with certain ricochets need not trap".into(),
        ));
    }
    let mut s = ArrwState::start(p0);
    let mut steps = 0u64;
    while !s.trapped && steps < step_cap {
        s = arrw_step(&s, par, rng);
        steps += 1;
    }
    Ok(TrajectorySummary {
        p0,
        w_final: s.position,
        n_final: s.nesting,
        steps,
        cap_exceeded: !s.trapped,
    })
}

/// Tab-separated trajectory dump; one row per run.
pub fn trajectory_table(seed: u64, runs: &[TrajectorySummary]) -> String {
    let mut out = String::from("p0\tseed\tW_final\tN_final\tsteps\n");
    for r in runs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.p0, seed, r.w_final, r.n_final, r.steps
        ));
    }
    out
}

/// Tab-separated histogram dump with a named value column.
pub fn histogram_table(column: &str, counts: &[(i64, u64)]) -> String {
    let mut out = format!("{column}\tcount\n");
    for (v, c) in counts {
        out.push_str(&format!("{v}\t{c}\n"));
    }
    out
}

/// First strict-descent depth of the plain ν-walk started at 0 (the walk is
/// run until its position goes negative; the depth is the ladder height).
/// `None` when the cap fires first.
pub fn sample_ladder_height<R: Rng + ?Sized>(
    par: &ArrwParams,
    step_cap: u64,
    rng: &mut R,
) -> Option<u64> {
    let mut pos: i64 = 0;
    for _ in 0..step_cap {
        pos += par.sample_increment(rng);
        if pos < 0 {
            return Some((-pos) as u64);
        }
    }
    None
}

/// Numerical one-step mass of the transition kernel from `p > 0`, summing the
/// direct channel, the trap channel, and the ricochet channel (whose landing
/// rows each have mass one).  Equals the total mass of ν up to tail-model
/// remainders, which are included analytically.
pub fn one_step_mass(p: i64, par: &ArrwParams) -> f64 {
    assert!(p > 0);
    let nu = &par.nu;
    let horizon = 1 << 16;
    // l > 0 and l = 0
    let mut mass = 0.0;
    for l in 0..=horizon {
        mass += nu.nu(l - p);
    }
    mass += nu.pos_tail.mass_beyond((horizon - p) as u64);
    // jumps below zero: (1−𝔭) trap + 𝔭 · (landing row mass)
    let mut below = 0.0;
    for v in 1..=horizon {
        below += nu.nu(-p - v);
    }
    below += nu.neg_tail.mass_beyond((horizon + p) as u64);
    let mut ricochet = 0.0;
    for v in 1..=horizon {
        let row_mass = if v <= 4096 {
            let l_cap = v as usize + 40 * (v as f64).sqrt() as usize + 64;
            landing_row(v as usize, l_cap).iter().sum::<f64>()
        } else {
            // beyond 40 standard deviations the landing row is complete to
            // well under 1e-12; summing it directly is O(v) per overshoot
            1.0
        };
        ricochet += nu.nu(-p - v) * row_mass;
    }
    ricochet += nu.neg_tail.mass_beyond((horizon + p) as u64);
    mass + (1.0 - par.frak_p) * below + par.frak_p * ricochet
}

// ---------------------------------------------------------------------------
// the ricochet sequence (landing-point chain)
// ---------------------------------------------------------------------------

/// One step of the landing-point chain: sample the depth at which the plain
/// walk hits ℤ≤0 from the hitting kernel, then trap or ricochet.
///
/// The kernel table is finite, so the hit depth is conditioned on being
/// within the tabulated range; callers size `kernel` so the excluded mass is
/// far below their statistical resolution.
pub fn ricochet_sequence_step<R: Rng + ?Sized>(
    l_n: i64,
    par: &ArrwParams,
    kernel: &HittingKernel,
    rng: &mut R,
) -> Result<i64> {
    if l_n <= 0 {
        return Ok(l_n);
    }
    let p = l_n as usize;
    if p >= kernel.table[0].len() {
        return Err(LoopMapError::Domain(format!(
            "hitting kernel tabulated to p < {}, needed p = {p}",
            kernel.table[0].len()
        )));
    }
    let n = sample_hit_depth(kernel, p, rng);
    if n == 0 {
        Ok(0)
    } else if rng.gen::<f64>() < par.frak_p {
        Ok(par.sample_landing(n as u64, rng))
    } else {
        Ok(-(n as i64))
    }
}

fn sample_hit_depth<R: Rng + ?Sized>(kernel: &HittingKernel, p: usize, rng: &mut R) -> usize {
    let mut u = rng.gen::<f64>() * kernel.row_mass(p);
    for l in 0..kernel.table.len() {
        u -= kernel.get(l, p);
        if u < 0.0 {
            return l;
        }
    }
    kernel.table.len() - 1
}

/// Outcome of iterating the landing-point chain until it leaves ℤ>0.
#[derive(Debug, Clone, Copy)]
pub struct RicochetRun {
    pub final_point: i64,
    pub ricochets: u64,
    /// The chain visited a point beyond the kernel table and was stopped.
    pub out_of_range: bool,
}

pub fn run_ricochet_sequence<R: Rng + ?Sized>(
    p0: i64,
    par: &ArrwParams,
    kernel: &HittingKernel,
    chain_cap: u64,
    rng: &mut R,
) -> Result<RicochetRun> {
    let mut point = p0;
    let mut ricochets = 0u64;
    for _ in 0..chain_cap {
        if point <= 0 {
            return Ok(RicochetRun { final_point: point, ricochets, out_of_range: false });
        }
        if point as usize >= kernel.table[0].len() {
            return Ok(RicochetRun { final_point: point, ricochets, out_of_range: true });
        }
        let n = sample_hit_depth(kernel, point as usize, rng);
        if n == 0 {
            point = 0;
        } else if rng.gen::<f64>() < par.frak_p {
            point = par.sample_landing(n as u64, rng);
            ricochets += 1;
        } else {
            point = -(n as i64);
        }
    }
    Err(LoopMapError::Convergence(format!(
        "landing-point chain from {p0} still positive after {chain_cap} ricochets"
    )))
}

// ---------------------------------------------------------------------------
// h^r_𝔭 route 1: Monte Carlo
// ---------------------------------------------------------------------------

/// Score interval at three standard deviations.
const WILSON_Z: f64 = 3.0;

fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let ph = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (ph + z2 / (2.0 * n)) / denom;
    let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct HpEstimate {
    pub p: usize,
    pub estimate: f64,
    /// Wilson score interval at three standard deviations.
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    /// All trajectories, capped ones included; the estimate is over these.
    pub trials: u64,
    /// Trajectories that hit the step cap.  These count as failures: a
    /// capped walk sits at a high position and its residual trap-at-zero
    /// probability is h of that position, so the omitted mass is at most
    /// `cap_hits/trials · h(large)`.  Dropping capped walks instead would
    /// condition on fast trapping and bias the estimate upward by the whole
    /// cap fraction.
    pub cap_hits: u64,
}

/// Direct simulation estimate of the trap-at-zero probability from `p`.
pub fn h_p_montecarlo<R: Rng + ?Sized>(
    p: usize,
    par: &ArrwParams,
    samples: u64,
    step_cap: u64,
    rng: &mut R,
) -> Result<HpEstimate> {
    if p == 0 {
        return Ok(HpEstimate {
            p,
            estimate: 1.0,
            ci_low: 1.0,
            ci_high: 1.0,
            successes: samples,
            trials: samples,
            cap_hits: 0,
        });
    }
    let mut successes = 0u64;
    let mut cap_hits = 0u64;
    for _ in 0..samples {
        let run = run_until_trapped(p as i64, par, rng, step_cap)?;
        if run.cap_exceeded {
            cap_hits += 1;
        } else if run.w_final == 0 {
            successes += 1;
        }
    }
    let (ci_low, ci_high) = wilson(successes, samples, WILSON_Z);
    Ok(HpEstimate {
        p,
        estimate: successes as f64 / samples.max(1) as f64,
        ci_low,
        ci_high,
        successes,
        trials: samples,
        cap_hits,
    })
}

// ---------------------------------------------------------------------------
// h^r_𝔭 route 2: the ricochet-count expansion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct SeriesEstimate {
    pub p: usize,
    pub value: f64,
    /// Geometric bound on the dropped orders: 𝔭^{N_max+1}/(1−𝔭); the
    /// coefficients are all ≤ 1.
    pub tail_bound: f64,
    pub n_max: usize,
    /// Intermediate landing points were restricted to `1..=state_cap`.
    pub state_cap: usize,
    /// Size of the geometric extrapolation applied to remove the state-cap
    /// truncation (see `h_p_series`); the residual error after extrapolation
    /// is an order smaller than this.
    pub cap_sensitivity: f64,
}

/// Expansion of the trap-at-zero probability in powers of 𝔭: the coefficient
/// of 𝔭^N sums over paths of the landing-point chain with exactly N
/// ricochets, ending with a direct hit of 0.
pub fn h_p_series(p: usize, par: &ArrwParams, n_max: usize, state_cap: usize) -> Result<SeriesEstimate> {
    if par.frak_p >= 1.0 {
        return Err(LoopMapError::Domain(
            "the expansion has no geometric tail bound at 𝔭 = 1".into(),
        ));
    }
    if p == 0 {
        return Ok(SeriesEstimate { p, value: 1.0, tail_bound: 0.0, n_max, state_cap, cap_sensitivity: 0.0 });
    }
    let fp = par.frak_p;
    let big = state_cap.max(p).max(16);
    let n_cap = 2 * big + 64;
    let kernel = analytic::hitting_kernel(par.nu.r, n_cap, big)?;
    // pstar[l-1][m] = Σ_{n≥1} binom(n+m−1,m) 2^{−(n+m)} H_n(l), the
    // one-ricochet transition p → m of the landing-point chain, m = 0..=big
    let mut pstar = vec![vec![0.0f64; big + 1]; big];
    for m in 0..=big {
        // negative-binomial weights in the overshoot n at fixed landing m
        let mut w = 0.5f64.powi(1 + m as i32);
        let mut weights = Vec::with_capacity(n_cap);
        for n in 1..=n_cap {
            weights.push(w);
            w *= (n + m) as f64 / (2.0 * n as f64);
        }
        for l in 1..=big {
            let mut acc = 0.0;
            for n in 1..=n_cap {
                acc += weights[n - 1] * kernel.get(n, l);
            }
            pstar[l - 1][m] = acc;
        }
    }
    let h0: Vec<f64> = (0..=big).map(|m| kernel.get(0, m)).collect(); // h0[0] = 1
    let eval = |cap: usize| -> f64 {
        // y_N[l] = coefficient of 𝔭^N starting from l; value via the start p
        let mut y: Vec<f64> = (1..=cap)
            .map(|l| (0..=cap).map(|m| pstar[l - 1][m] * h0[m]).sum())
            .collect();
        let mut val = h0[p];
        let mut fp_pow = fp;
        for _ in 1..=n_max {
            val += fp_pow * y[p - 1];
            fp_pow *= fp;
            let next: Vec<f64> = (1..=cap)
                .map(|l| (1..=cap).map(|m| pstar[l - 1][m] * y[m - 1]).sum())
                .collect();
            y = next;
        }
        val
    };
    // The cap truncation vanishes like a power of the cap, so three dyadic
    // levels pin the geometric decay ratio and the remaining bias can be
    // extrapolated away (Richardson in the cap).
    let v2 = eval(big);
    let mid = (big / 2).max(p).max(8);
    let lo = (big / 4).max(p).max(8);
    let (value, correction) = if lo < mid && mid < big {
        let v1 = eval(mid);
        let v0 = eval(lo);
        let e1 = v2 - v1;
        let e0 = v1 - v0;
        let rho = if e0.abs() > 0.0 { e1 / e0 } else { 0.0 };
        if rho > 0.0 && rho < 0.95 {
            let bias = e1 * rho / (1.0 - rho);
            (v2 + bias, bias.abs())
        } else {
            (v2, e1.abs())
        }
    } else {
        // the cap leaves no room for the dyadic probes: no error estimate
        (v2, v2)
    };
    if !(value <= 1.0 + 1e-9) {
        return Err(LoopMapError::Convergence(format!(
            "expansion value {value} exceeds 1; kernel tables inconsistent"
        )));
    }
    Ok(SeriesEstimate {
        p,
        value,
        tail_bound: fp.powi(n_max as i32 + 1) / (1.0 - fp),
        n_max,
        state_cap: big,
        cap_sensitivity: correction,
    })
}

// ---------------------------------------------------------------------------
// h^r_𝔭 route 3: the one-step recursion on a window
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpRoute {
    MonteCarlo,
    Series,
    FixedPoint,
}

/// Table of trap-at-zero probabilities `h(0..=p_max)` with per-entry error
/// bounds and a power-law continuation beyond the table.
#[derive(Debug, Clone)]
pub struct HpTable {
    pub frak_p: f64,
    pub r: f64,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub route: HpRoute,
    /// Fitted amplitude of the leading `C·p^{−b}` continuation term.
    pub tail_amplitude: f64,
    /// Decay exponent `b = arccos(𝔭)/π`.
    pub tail_exponent: f64,
    /// Full continuation beyond the table: `h(p) ≈ Σ_j amp_j · p^{−exp_j}`,
    /// with `(tail_amplitude, tail_exponent)` as the leading pair and
    /// subleading correction terms after it.
    pub tail_components: Vec<(f64, f64)>,
    /// Halving the solve window moved some tabulated entry by more than 1e−8.
    pub window_warning: bool,
}

impl HpTable {
    /// `h(p)`: 0 on negatives, 1 at 0, tabulated values, then the fitted
    /// power continuation.
    pub fn get(&self, p: i64) -> f64 {
        if p < 0 {
            0.0
        } else if p == 0 {
            1.0
        } else if (p as usize) < self.values.len() {
            self.values[p as usize]
        } else {
            self.tail_components
                .iter()
                .map(|&(a, e)| a * (p as f64).powf(-e))
                .sum()
        }
    }

    pub fn p_max(&self) -> usize {
        self.values.len() - 1
    }
}

/// Exponent basis for the boundary closure `h(l) ≈ Σ_j c_j l^{−e_j}` beyond
/// the window.  The leading exponent is `b`; the corrections `b+1, b+2` come
/// from the integer-step expansion of the trap probability, and `3b` carries
/// the next singular term when it is distinct from those.
fn closure_exponents(b: f64, fp: f64) -> Vec<f64> {
    let mut exps = vec![b, b + 1.0, b + 2.0, b + 3.0];
    let triple = 3.0 * b;
    if fp > 0.0
        && triple < b + 3.0
        && exps.iter().all(|&e| (e - triple).abs() > 0.1)
    {
        exps.push(triple);
    }
    exps
}

/// Truncation geometry shared by the window solver and the residual /
/// normalization checks, so "residual under the recursion" means the same
/// operator in both places.
struct OperatorEnv {
    fp: f64,
    w: usize,
    horizon: usize,
    exps: Vec<f64>,      // closure exponents e_j
    nupos: Vec<f64>,     // ν(j), j = 0..=horizon
    nuneg: Vec<f64>,     // ν(−j), j = 1..=horizon + w   (index j−1)
    le: Vec<Vec<f64>>,   // le[j][l−1] = l^{−e_j}, l = 1..=horizon
}

impl OperatorEnv {
    fn new(par: &ArrwParams, exps: &[f64], w: usize) -> OperatorEnv {
        let horizon = (8 * w).clamp(1 << 17, 400_000);
        let nupos: Vec<f64> = (0..=horizon as i64).map(|j| par.nu.nu(j)).collect();
        let nuneg: Vec<f64> = (1..=(horizon + w) as i64).map(|j| par.nu.nu(-j)).collect();
        let le: Vec<Vec<f64>> = exps
            .iter()
            .map(|&e| (1..=horizon).map(|l| (l as f64).powf(-e)).collect())
            .collect();
        OperatorEnv { fp: par.frak_p, w, horizon, exps: exps.to_vec(), nupos, nuneg, le }
    }

    fn nu(&self, k: i64) -> f64 {
        if k >= 0 {
            self.nupos[k as usize]
        } else {
            self.nuneg[(-k) as usize - 1]
        }
    }

    /// Transition-to-zero column: ν(−p) + 𝔭 Σ_k 2^{−k} ν(−k−p).
    fn a0(&self, p: usize) -> f64 {
        let mut acc = self.nuneg[p - 1];
        if self.fp > 0.0 {
            let mut coin = 0.5;
            for k in 1..=(1074.min(self.horizon + self.w - p)) {
                acc += self.fp * coin * self.nuneg[k + p - 1];
                coin *= 0.5;
            }
        }
        acc
    }

    /// Direct-channel closure coefficient for basis exponent `j`:
    /// Σ_{l>w} ν(l−p) l^{−e_j} plus an analytic remainder for l beyond the
    /// summation horizon.
    fn t_nu(&self, p: usize, j: usize, par: &ArrwParams) -> f64 {
        let mut acc = 0.0;
        for l in (self.w + 1)..=self.horizon {
            acc += self.nupos[l - p] * self.le[j][l - 1];
        }
        acc + par.nu.pos_tail.mass_beyond((self.horizon - p) as u64)
            * ((self.horizon + 1) as f64).powf(-self.exps[j])
    }

    /// Landing average over the closure for overshoots beyond the window:
    /// the landing law at overshoot k has mean k and variance 2k, so
    /// E[L^{−e}] ≈ k^{−e}(1 + e(e+1)/k).
    fn t_ric(&self, p: usize, j: usize, par: &ArrwParams) -> f64 {
        let e = self.exps[j];
        let mut acc = 0.0;
        for k in (self.w + 1)..=self.horizon {
            acc += self.nuneg[k + p - 1] * self.le[j][k - 1] * (1.0 + e * (e + 1.0) / k as f64);
        }
        acc + par.nu.neg_tail.mass_beyond((self.horizon + p) as u64)
            * ((self.horizon + 1) as f64).powf(-e)
    }

    /// Closure mass of one landing row beyond the window for exponent `j`:
    /// Σ_{l>w} binom(k+l−1,l) 2^{−(k+l)} l^{−e_j}.
    fn tau(&self, k: usize, j: usize) -> f64 {
        let e = self.exps[j];
        let spread = 40 * ((2 * k) as f64).sqrt() as usize + 64;
        let l_hi = (k + spread).max(self.w + spread);
        let row = landing_row(k, l_hi);
        let mut acc = 0.0;
        for l in (self.w + 1)..=l_hi {
            let le = if l <= self.horizon { self.le[j][l - 1] } else { (l as f64).powf(-e) };
            acc += row[l] * le;
        }
        acc
    }

    /// Applies the full (truncated) one-step operator to the table
    /// `h(1..=w)` with closure amplitudes `amps` (aligned with `exps`),
    /// at row `p`.
    fn apply(&self, par: &ArrwParams, h: &[f64], amps: &[f64], p: usize) -> f64 {
        let mut val = self.a0(p);
        for l in 1..=self.w {
            val += self.nu(l as i64 - p as i64) * h[l - 1];
        }
        for (j, &c) in amps.iter().enumerate() {
            val += c * self.t_nu(p, j, par);
        }
        if self.fp > 0.0 {
            let mut ric = 0.0;
            for k in 1..=self.w {
                let row = landing_row(k, self.w);
                let mut rho: f64 = 0.0;
                for l in 1..=self.w {
                    rho += row[l] * h[l - 1];
                }
                for (j, &c) in amps.iter().enumerate() {
                    rho += c * self.tau(k, j);
                }
                ric += self.nuneg[k + p - 1] * rho;
            }
            for (j, &c) in amps.iter().enumerate() {
                ric += c * self.t_ric(p, j, par);
            }
            val += self.fp * ric;
        }
        val
    }
}

/// Solves `h = A h` on the window `1..=w` with the boundary closure
/// `h(l) = Σ_j c_j l^{−e_j}` for `l > w`, `h(0) = 1`.  Returns the window
/// values and the fitted closure components `(c_j, e_j)`.
///
/// The solution is affine in the closure amplitudes, so the window system is
/// factorized once and solved for one right-hand side per basis term; the
/// amplitudes that make the window solution match its own closure over the
/// outer half of the window are then a small least-squares problem.  Direct
/// Picard iteration is avoided on purpose: at criticality the window
/// operator has spectral radius 1 and the iteration stalls.
fn solve_window(par: &ArrwParams, exps: &[f64], w: usize) -> Result<(Vec<f64>, Vec<(f64, f64)>)> {
    let env = OperatorEnv::new(par, exps, w);
    let fp = par.frak_p;
    let nexp = exps.len();
    let mut m = DMatrix::<f64>::zeros(w, w);
    for p in 1..=w {
        for l in 1..=w {
            m[(p - 1, l - 1)] = env.nu(l as i64 - p as i64);
        }
    }
    // rhs_c[j]: coefficient vector of the j-th closure amplitude in the RHS
    let mut rhs_c: Vec<DVector<f64>> = (0..nexp)
        .map(|j| DVector::from_iterator(w, (1..=w).map(|p| env.t_nu(p, j, par))))
        .collect();
    if fp > 0.0 {
        let mut bm = DMatrix::<f64>::zeros(w, w); // landing rows, l ≥ 1
        let mut tau: Vec<DVector<f64>> = vec![DVector::zeros(w); nexp];
        for k in 1..=w {
            let row = landing_row(k, w);
            for l in 1..=w {
                bm[(k - 1, l - 1)] = row[l];
            }
            for (j, t) in tau.iter_mut().enumerate() {
                t[k - 1] = env.tau(k, j);
            }
        }
        let mut v = DMatrix::<f64>::zeros(w, w);
        for p in 1..=w {
            for k in 1..=w {
                v[(p - 1, k - 1)] = env.nuneg[k + p - 1];
            }
        }
        m += fp * (&v * bm);
        for (j, rc) in rhs_c.iter_mut().enumerate() {
            *rc += fp * (&v * &tau[j]);
            for p in 1..=w {
                rc[p - 1] += fp * env.t_ric(p, j, par);
            }
        }
    }
    let a0 = DVector::<f64>::from_iterator(w, (1..=w).map(|p| env.a0(p)));
    let system = DMatrix::<f64>::identity(w, w) - m;
    let lu = system.lu();
    let h_a = lu
        .solve(&a0)
        .ok_or_else(|| LoopMapError::Convergence("window system is singular".into()))?;
    let h_t: Vec<DVector<f64>> = rhs_c
        .iter()
        .map(|rc| {
            lu.solve(rc)
                .ok_or_else(|| LoopMapError::Convergence("window system is singular".into()))
        })
        .collect::<Result<_>>()?;
    // self-consistency fit over the outer half of the window: the solution
    // h_a + Σ c_j h_t[j] should equal the closure Σ c_j l^{−e_j} there
    let lo = w / 2;
    let rows = w - lo;
    let mut design = DMatrix::<f64>::zeros(rows, nexp);
    let mut target = DVector::<f64>::zeros(rows);
    for i in 0..rows {
        let l = (lo + i + 1) as f64;
        for j in 0..nexp {
            design[(i, j)] = l.powf(-exps[j]) - h_t[j][lo + i];
        }
        target[i] = h_a[lo + i];
    }
    // column scaling keeps the normal equations well conditioned despite the
    // narrow dynamic range of the basis over the fit interval
    let scales: Vec<f64> = (0..nexp)
        .map(|j| design.column(j).norm().max(f64::MIN_POSITIVE))
        .collect();
    for j in 0..nexp {
        design.column_mut(j).scale_mut(1.0 / scales[j]);
    }
    let sol = design
        .svd(true, true)
        .solve(&target, 1e-13)
        .map_err(|e| LoopMapError::Convergence(format!("boundary closure fit failed: {e}")))?;
    let amps: Vec<f64> = (0..nexp).map(|j| sol[j] / scales[j]).collect();
    let h: Vec<f64> = (0..w)
        .map(|i| h_a[i] + (0..nexp).map(|j| amps[j] * h_t[j][i]).sum::<f64>())
        .collect();
    for (i, &v) in h.iter().enumerate() {
        if !(v > -1e-12 && v <= 1.0 + 1e-9) {
            return Err(LoopMapError::Convergence(format!(
                "window solution leaves (0, 1] at p = {}: {v}",
                i + 1
            )));
        }
    }
    let components: Vec<(f64, f64)> = amps.iter().zip(exps).map(|(&a, &e)| (a, e)).collect();
    Ok((h, components))
}

/// Builds the trap-at-zero probability table by solving the one-step
/// recursion on a truncated window with the power-law boundary closure.
///
/// Window-halving sensitivity is computed unconditionally and folded into
/// the per-entry error bounds; entries that move more than 1e−8 set
/// `window_warning`.
pub fn h_p_fixed_point(par: &ArrwParams, p_max: usize, window: usize) -> Result<HpTable> {
    if par.frak_p >= 1.0 {
        // trapping at zero is certain once every wall contact ricochets
        return Ok(HpTable {
            frak_p: par.frak_p,
            r: par.nu.r,
            values: vec![1.0; p_max + 1],
            errors: vec![0.0; p_max + 1],
            route: HpRoute::FixedPoint,
            tail_amplitude: 1.0,
            tail_exponent: 0.0,
            tail_components: vec![(1.0, 0.0)],
            window_warning: false,
        });
    }
    let b = analytic::exponent_b(par.frak_p)?;
    let exps = closure_exponents(b, par.frak_p);
    let w = window.max(p_max).max(64);
    let (h, components) = solve_window(par, &exps, w)?;
    let w_half = w / 2;
    let (h_half, _) = solve_window(par, &exps, w_half)?;
    // keep the whole solved window in the table: lookups beyond `p_max` stay
    // exact up to the window, and the residual check below re-applies the
    // operator of exactly this window
    let mut values = Vec::with_capacity(w + 1);
    let mut errors = Vec::with_capacity(w + 1);
    values.push(1.0);
    errors.push(0.0);
    // relative drift in the deepest comparable region, used to extrapolate
    // the sensitivity to entries beyond the half window
    let probe = w_half.saturating_sub(1).max(1);
    let rel_drift = ((h[probe - 1] - h_half[probe - 1]) / h_half[probe - 1]).abs();
    let mut warning = false;
    for p in 1..=w {
        let sens = if p <= w_half {
            (h[p - 1] - h_half[p - 1]).abs()
        } else {
            rel_drift * h[p - 1]
        };
        if p <= p_max && sens > 1e-8 {
            warning = true;
        }
        values.push(h[p - 1].clamp(0.0, 1.0));
        errors.push(sens);
    }
    Ok(HpTable {
        frak_p: par.frak_p,
        r: par.nu.r,
        values,
        errors,
        route: HpRoute::FixedPoint,
        tail_amplitude: components[0].0,
        tail_exponent: b,
        tail_components: components,
        window_warning: warning,
    })
}

/// `|h(p) − (A h)(p)|` for a fixed-point table, by direct substitution into
/// the same truncated operator the solver used.
pub fn recursion_residual(par: &ArrwParams, hp: &HpTable, p: usize) -> Result<f64> {
    residual_impl(par, hp, p).map(|(res, _)| res)
}

/// Row-normalization drift of the conditioned kernel at `p`:
/// `|Σ_l h(l) A(p,l) / h(p) − 1|`.  Drift above 1e−8 means the table is
/// inconsistent with ν and conditioned sampling would be biased.
pub fn conditioned_row_drift(par: &ArrwParams, hp: &HpTable, p: usize) -> Result<f64> {
    let (res, hr) = residual_impl(par, hp, p)?;
    Ok(res / hr)
}

fn residual_impl(par: &ArrwParams, hp: &HpTable, p: usize) -> Result<(f64, f64)> {
    if p == 0 || p > hp.p_max() {
        return Err(LoopMapError::Domain(format!("p = {p} outside the table")));
    }
    if hp.route != HpRoute::FixedPoint {
        return Err(LoopMapError::Domain(
            "residual is defined for fixed-point tables".into(),
        ));
    }
    let w = hp.p_max();
    let exps: Vec<f64> = hp.tail_components.iter().map(|&(_, e)| e).collect();
    let amps: Vec<f64> = hp.tail_components.iter().map(|&(a, _)| a).collect();
    let env = OperatorEnv::new(par, &exps, w);
    let h: Vec<f64> = (1..=w).map(|l| hp.values[l]).collect();
    let applied = env.apply(par, &h, &amps, p);
    Ok(((hp.values[p] - applied).abs(), hp.values[p]))
}

// ---------------------------------------------------------------------------
// the walk conditioned to be trapped at zero
// ---------------------------------------------------------------------------

/// One transition of the conditioned walk, by rejection: propose an
/// unconditioned step and accept with probability `h(l) ≤ 1`.  Acceptance
/// renormalizes the row, so the sampled law is the h-transform of the
/// unconditioned kernel; the transform is exact wherever the table is.
pub fn conditioned_step<R: Rng + ?Sized>(
    s: &ArrwState,
    par: &ArrwParams,
    hp: &HpTable,
    rng: &mut R,
) -> Result<ArrwState> {
    if s.trapped || s.position <= 0 {
        return Ok(ArrwState { trapped: true, ..*s });
    }
    if (hp.frak_p - par.frak_p).abs() > 1e-12 {
        return Err(LoopMapError::Domain(format!(
            "table is for 𝔭 = {}, walk has 𝔭 = {}",
            hp.frak_p, par.frak_p
        )));
    }
    if hp.get(s.position) <= 0.0 {
        return Err(LoopMapError::Domain(format!(
            "h vanishes at the current position {}",
            s.position
        )));
    }
    const REJECTION_CAP: u64 = 50_000_000;
    for _ in 0..REJECTION_CAP {
        let cand = arrw_step(s, par, rng);
        let weight = hp.get(cand.position);
        if weight > 0.0 && rng.gen::<f64>() < weight {
            return Ok(cand);
        }
    }
    Err(LoopMapError::Convergence(format!(
        "rejection sampler starved at position {}",
        s.position
    )))
}

/// Runs the conditioned walk until it traps (necessarily at 0).
pub fn run_conditioned<R: Rng + ?Sized>(
    p0: i64,
    par: &ArrwParams,
    hp: &HpTable,
    rng: &mut R,
    step_cap: u64,
) -> Result<TrajectorySummary> {
    let mut s = ArrwState::start(p0);
    let mut steps = 0u64;
    while !s.trapped && steps < step_cap {
        s = conditioned_step(&s, par, hp, rng)?;
        steps += 1;
    }
    Ok(TrajectorySummary {
        p0,
        w_final: s.position,
        n_final: s.nesting,
        steps,
        cap_exceeded: !s.trapped,
    })
}

// ---------------------------------------------------------------------------
// nesting statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct PgfCheck {
    pub x: f64,
    pub empirical: f64,
    /// One standard error of the empirical mean.
    pub sigma: f64,
    /// `h_{x𝔭}(p)/h_𝔭(p)` from the supplied tables.
    pub formula: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LdpCheck {
    pub lambda: f64,
    /// `log ℙ[N ≶ λ log p] / log p` from the sample (NaN when the event was
    /// never seen).
    pub empirical_slope: f64,
    pub theory: f64,
}

#[derive(Debug, Clone)]
pub struct NestingReport {
    pub p: usize,
    pub samples: u64,
    pub cap_hits: u64,
    pub mean_nesting: f64,
    pub mean_over_log_p: f64,
    /// `𝔭/(π √(1−𝔭²))`.
    pub lln_theory: f64,
    pub pgf: Vec<PgfCheck>,
    pub ldp: Vec<LdpCheck>,
}

/// Simulates the conditioned walk from `p` and compares the ricochet-count
/// generating function against the ratio of tilted tables.
///
/// `tilted[i]` must be the table at ricochet probability `x_grid[i] · 𝔭`;
/// for `x = 0` that is the zero-ricochet table.  The grid must stay within
/// `[0, min(1/𝔭 − 0.05, 1.5)]`: tables with `x𝔭` near 1 have vanishing decay
/// exponent and degrade.
pub fn nesting_experiment<R: Rng + ?Sized>(
    p: usize,
    par: &ArrwParams,
    hp: &HpTable,
    x_grid: &[f64],
    tilted: &[&HpTable],
    samples: u64,
    step_cap: u64,
    rng: &mut R,
) -> Result<NestingReport> {
    if x_grid.len() != tilted.len() {
        return Err(LoopMapError::Domain("one tilted table per grid point".into()));
    }
    let fp = par.frak_p;
    let x_cap = if fp > 0.0 { (1.0 / fp - 0.05).min(1.5) } else { 1.5 };
    for (&x, t) in x_grid.iter().zip(tilted) {
        if !(0.0..=x_cap).contains(&x) {
            return Err(LoopMapError::Domain(format!(
                "tilt x = {x} outside [0, {x_cap:.3}]"
            )));
        }
        if (t.frak_p - x * fp).abs() > 1e-9 {
            return Err(LoopMapError::Domain(format!(
                "table tagged 𝔭 = {} supplied for tilt x·𝔭 = {}",
                t.frak_p,
                x * fp
            )));
        }
    }
    let mut nestings: Vec<u64> = Vec::with_capacity(samples as usize);
    let mut cap_hits = 0u64;
    for _ in 0..samples {
        let run = run_conditioned(p as i64, par, hp, rng, step_cap)?;
        if run.cap_exceeded {
            cap_hits += 1;
        } else {
            nestings.push(run.n_final);
        }
    }
    let n = nestings.len() as f64;
    let mean_nesting = nestings.iter().map(|&v| v as f64).sum::<f64>() / n;
    let log_p = (p as f64).ln();
    let hp_at_p = hp.get(p as i64);
    let pgf = x_grid
        .iter()
        .zip(tilted)
        .map(|(&x, t)| {
            let (mut acc, mut acc2) = (0.0, 0.0);
            for &nv in &nestings {
                let v = if x == 0.0 {
                    if nv == 0 { 1.0 } else { 0.0 }
                } else {
                    x.powf(nv as f64)
                };
                acc += v;
                acc2 += v * v;
            }
            let mean = acc / n;
            let var = (acc2 / n - mean * mean).max(0.0);
            PgfCheck {
                x,
                empirical: mean,
                sigma: (var / n).sqrt(),
                formula: t.get(p as i64) / hp_at_p,
            }
        })
        .collect();
    let lln_theory = fp / (std::f64::consts::PI * (1.0 - fp * fp).sqrt());
    let ldp = [0.5, 1.5, 2.0]
        .iter()
        .filter(|_| fp > 0.0 && p > 1)
        .map(|&scale| {
            let lambda = scale * lln_theory;
            let threshold = lambda * log_p;
            let count = if scale < 1.0 {
                nestings.iter().filter(|&&v| (v as f64) < threshold).count()
            } else {
                nestings.iter().filter(|&&v| (v as f64) > threshold).count()
            };
            let empirical_slope = if count == 0 {
                f64::NAN
            } else {
                (count as f64 / n).ln() / log_p
            };
            let theory = analytic::rate_j(fp, std::f64::consts::PI * lambda)
                .map(|j| -j / std::f64::consts::PI)
                .unwrap_or(f64::NAN);
            LdpCheck { lambda, empirical_slope, theory }
        })
        .collect();
    Ok(NestingReport {
        p,
        samples: nestings.len() as u64,
        cap_hits,
        mean_nesting,
        mean_over_log_p: mean_nesting / log_p,
        lln_theory,
        pgf,
        ldp,
    })
}

// ---------------------------------------------------------------------------

/// Zero-ricochet reference table `h^r_0(p) = h0-series`, used as the 𝔭 = 0
/// route cross-check and for the x = 0 point of the nesting generating
/// function.
pub fn zero_ricochet_table(h: &HFunctionTable, p_max: usize) -> HpTable {
    let values: Vec<f64> = (0..=p_max as i64).map(|p| h.get(p)).collect();
    // deep asymptote of the h0 sequence: p^{−1/2}/(√π √(1+r))
    let amp = 1.0 / (std::f64::consts::PI.sqrt() * (1.0 + h.r).sqrt());
    HpTable {
        frak_p: 0.0,
        r: h.r,
        values,
        errors: vec![h.precision; p_max + 1],
        route: HpRoute::Series,
        tail_amplitude: amp,
        tail_exponent: 0.5,
        tail_components: vec![(amp, 0.5)],
        window_warning: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::h0_series;
    use crate::weights::{synthesize_critical_law, SynthesisOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn critical_params(frak_p: f64) -> ArrwParams {
        static LAW: OnceLock<StepLaw> = OnceLock::new();
        let law = LAW.get_or_init(|| {
            synthesize_critical_law(0.4, 1.25, &SynthesisOptions::default()).unwrap()
        });
        ArrwParams::new(law.clone(), frak_p).unwrap()
    }

    /// A small hand-made law exercising both tail branches of the sampler.
    fn toy_law() -> StepLaw {
        StepLaw {
            family: "toy".into(),
            r: 0.0,
            theta: None,
            frak_p: None,
            mass_defect: 0.0,
            pos_table: vec![0.10, 0.08, 0.05],
            pos_tail: TailModel::Power { amplitude: 0.30, exponent: 2.2, shift: 0.0 },
            neg_table: vec![0.20, 0.10],
            neg_tail: TailModel::Geometric { amplitude: 0.40, ratio: 0.5 },
        }
    }

    #[test]
    fn trapped_states_are_absorbing() {
        let par = ArrwParams::new(toy_law(), 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p0 in [0i64, -3] {
            let s = ArrwState::start(p0);
            assert!(s.trapped);
            for _ in 0..50 {
                let next = arrw_step(&s, &par, &mut rng);
                assert_eq!(next.position, p0);
                assert_eq!(next.nesting, 0);
                assert!(next.trapped);
            }
        }
    }

    #[test]
    fn immediate_trap_from_nonpositive_start() {
        let par = ArrwParams::new(toy_law(), 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let run = run_until_trapped(0, &par, &mut rng, 1000).unwrap();
        assert_eq!(run.w_final, 0);
        assert_eq!(run.n_final, 0);
        assert_eq!(run.steps, 0);
        assert!(!run.cap_exceeded);
    }

    #[test]
    fn landing_law_matches_negative_binomial_row() {
        let par = ArrwParams::new(toy_law(), 1.0).unwrap();
        for v in 1..=8 {
            assert!(par.landing_row_defect(v, 400) < 1e-12, "row mass defect at v = {v}");
        }
        // χ² of sampled landings against the formula row at v = 3
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = 3u64;
        let trials = 40_000u64;
        let bins = 15usize;
        let mut counts = vec![0u64; bins + 1]; // last bin = overflow
        for _ in 0..trials {
            let l = par.sample_landing(v, &mut rng) as usize;
            counts[l.min(bins)] += 1;
        }
        let row = landing_row(v as usize, bins);
        let mut chi2 = 0.0;
        for l in 0..bins {
            let expect = row[l] * trials as f64;
            chi2 += (counts[l] as f64 - expect).powi(2) / expect;
        }
        let tail_mass = 1.0 - row[..bins].iter().sum::<f64>();
        let expect_tail = tail_mass * trials as f64;
        chi2 += (counts[bins] as f64 - expect_tail).powi(2) / expect_tail;
        // 15 degrees of freedom, far beyond the 99.9% point (37.7)
        assert!(chi2 < 40.0, "landing χ² = {chi2}");
    }

    #[test]
    fn increment_sampler_matches_the_step_law() {
        let law = toy_law();
        let total = law.total_mass();
        let par = ArrwParams::new(law.clone(), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 200_000usize;
        let mut freq = std::collections::HashMap::<i64, u64>::new();
        let mut deep_pos = 0u64; // k > 50 checks the analytic power-tail branch
        for _ in 0..trials {
            let k = par.sample_increment(&mut rng);
            *freq.entry(k).or_default() += 1;
            if k > 50 {
                deep_pos += 1;
            }
        }
        for k in [-2i64, -1, 0, 1, 2, 5, -6] {
            let p = law.nu(k) / total;
            let observed = *freq.get(&k).unwrap_or(&0) as f64 / trials as f64;
            let sd = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (observed - p).abs() < 5.0 * sd + 1e-9,
                "k = {k}: observed {observed}, expected {p}"
            );
        }
        let p_deep = law.pos_tail.mass_beyond(50) / total;
        let sd = (p_deep * (1.0 - p_deep) / trials as f64).sqrt();
        let observed = deep_pos as f64 / trials as f64;
        assert!(
            (observed - p_deep).abs() < 5.0 * sd,
            "deep tail: observed {observed}, expected {p_deep}"
        );
    }

    #[test]
    fn one_step_transition_mass_is_complete() {
        let par = critical_params(0.5);
        for p in [1i64, 5, 17] {
            let mass = one_step_mass(p, &par);
            assert!(
                (mass - par.nu.total_mass()).abs() < 1e-9,
                "one-step mass {mass} at p = {p}"
            );
        }
    }

    #[test]
    fn series_zero_order_is_the_direct_hit_mass() {
        let par = critical_params(0.5);
        let kernel = analytic::hitting_kernel(par.nu.r, 4, 32).unwrap();
        for p in [1usize, 4, 12] {
            let est = h_p_series(p, &par, 0, 64).unwrap();
            assert!((est.value - kernel.get(0, p)).abs() < 1e-12);
            assert!((est.tail_bound - 0.5_f64.powi(1) / 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn series_collapses_to_zero_ricochet_limit() {
        // 𝔭 → 0 pointwise: already at 𝔭 = 1e−3 the correction is O(𝔭)
        let par_small = critical_params(1e-3);
        let par_zero = critical_params(0.0);
        for p in [2usize, 9] {
            let small = h_p_series(p, &par_small, 8, 64).unwrap().value;
            let zero = h_p_series(p, &par_zero, 8, 64).unwrap().value;
            assert!((small - zero).abs() < 2e-3, "p = {p}: {small} vs {zero}");
            assert!(small >= zero - 1e-12); // extra ricochet routes only add mass
        }
    }

    #[test]
    fn fixed_point_zero_ricochet_column_matches_the_analytic_sequence() {
        let par = critical_params(0.0);
        let table = h_p_fixed_point(&par, 64, 512).unwrap();
        let h0 = h0_series(par.nu.r, 64).unwrap();
        let mut worst: f64 = 0.0;
        for p in 1..=64i64 {
            worst = worst.max((table.get(p) - h0.get(p)).abs());
        }
        // The gate budgets for the synthesized law, not the solver: the law
        // satisfies the trap recursion only to ~1e-10 (its own truncation),
        // and the near-critical resolvent amplifies that by roughly the
        // expected exit time of the window.  Measured deviation is ~8e-8 and
        // is a pure growing-mode admixture (it scales like √p); solver
        // self-consistency is held to 1e-10 by the residual test.
        assert!(worst < 5e-7, "max deviation from the analytic sequence: {worst:.3e}");
        assert!((table.tail_exponent - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_residual_vanishes_on_the_window() {
        let par = critical_params(0.5);
        let table = h_p_fixed_point(&par, 64, 256).unwrap();
        for p in 1..=32 {
            let res = recursion_residual(&par, &table, p).unwrap();
            assert!(res < 1e-10, "residual {res:.3e} at p = {p}");
        }
        assert!(table.values[1..].iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn series_and_fixed_point_agree() {
        let par = critical_params(0.5);
        let table = h_p_fixed_point(&par, 20, 512).unwrap();
        for p in 1..=20usize {
            let est = h_p_series(p, &par, 70, 256).unwrap();
            let diff = (est.value - table.get(p as i64)).abs();
            // the residual after the series' cap extrapolation is an order
            // below the applied correction
            assert!(
                diff < 1e-6 + est.tail_bound + 0.15 * est.cap_sensitivity,
                "p = {p}: series {} vs window {} (diff {diff:.2e})",
                est.value,
                table.get(p as i64)
            );
        }
    }

    #[test]
    fn conditioned_rows_normalize() {
        let par = critical_params(0.5);
        let table = h_p_fixed_point(&par, 40, 256).unwrap();
        for p in 1..=20 {
            let drift = conditioned_row_drift(&par, &table, p).unwrap();
            assert!(drift < 1e-8, "row drift {drift:.3e} at p = {p}");
        }
    }

    #[test]
    fn table_lookup_conventions() {
        let par = critical_params(0.25);
        let table = h_p_fixed_point(&par, 16, 128).unwrap();
        assert_eq!(table.get(-4), 0.0);
        assert_eq!(table.get(0), 1.0);
        assert!(table.get(16) > 0.0 && table.get(16) < 1.0);
        // beyond the table: the power continuation, decreasing in p
        assert!(table.get(1000) > table.get(5000));
        assert_eq!(table.route, HpRoute::FixedPoint);
        let b = (0.25f64).acos() / std::f64::consts::PI;
        assert!((table.tail_exponent - b).abs() < 1e-15);
    }

    #[test]
    fn conditioned_walks_end_at_zero() {
        let par = critical_params(0.5);
        let table = h_p_fixed_point(&par, 64, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let run = run_conditioned(12, &par, &table, &mut rng, 1_000_000).unwrap();
            assert!(!run.cap_exceeded);
            assert_eq!(run.w_final, 0);
        }
    }

    #[test]
    fn trajectory_dump_is_parseable() {
        let runs = vec![
            TrajectorySummary { p0: 7, w_final: 0, n_final: 2, steps: 31, cap_exceeded: false },
            TrajectorySummary { p0: 7, w_final: -4, n_final: 0, steps: 9, cap_exceeded: false },
        ];
        let text = trajectory_table(42, &runs);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "p0\tseed\tW_final\tN_final\tsteps");
        let row: Vec<i64> = lines.next().unwrap().split('\t').map(|t| t.parse().unwrap()).collect();
        assert_eq!(row, vec![7, 42, 0, 2, 31]);
    }
}
