//! Face-weight sequences and everything derived from them: the effective
//! (loop-absorbed) weights via the fixed-point equation, partition-function
//! providers, the growth constant `γ₊`, the walk step law `ν`, admissibility
//! and criticality diagnostics, synthesis of non-generic critical laws, and
//! the pointed-admissibility solver.

use crate::analytic::{h0_series, HFunctionTable};
use crate::numeric::{binomial, fit_power_corrected, golden_min, power_sum_from};
use crate::{LoopMapError, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// Model parameters: face weights `q_k` (finitely supported, `q[0]` is
/// `q_1`), ring-edge fugacity `g`, loop fugacity `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTriplet {
    pub q: Vec<f64>,
    pub g: f64,
    pub n: f64,
}

impl WeightTriplet {
    pub fn new(q: Vec<f64>, g: f64, n: f64) -> Result<Self> {
        if q.iter().any(|&x| !(x >= 0.0)) || !(g >= 0.0) || !(0.0..=2.0).contains(&n) {
            return Err(LoopMapError::Domain(
                "weights must be nonnegative, n in [0,2]".into(),
            ));
        }
        Ok(WeightTriplet { q, g, n })
    }

    /// `q_k`, zero outside the support.
    pub fn qk(&self, k: usize) -> f64 {
        if k >= 1 && k <= self.q.len() {
            self.q[k - 1]
        } else {
            0.0
        }
    }

    /// Reference subcritical triplet used throughout the test and demo
    /// commands.  All entries are dyadic, so exact-rational enumeration
    /// with it stays cheap, and the weights are small enough that
    /// truncated partition sums converge to machine-visible precision
    /// within budgets around a dozen edges.
    pub fn builtin_subcritical() -> WeightTriplet {
        WeightTriplet {
            q: vec![0.03125, 0.015625, 0.0078125],
            g: 0.125,
            n: 1.0,
        }
    }

    /// Largest k with `q_k > 0`.
    pub fn support_bound(&self) -> usize {
        self.q.iter().rposition(|&x| x > 0.0).map_or(0, |i| i + 1)
    }

    /// Structured-text serialization (decimal round-trip exact).
    pub fn to_text(&self) -> String {
        let mut s = String::from("family triplet\n");
        s.push_str(&format!("g {}\n", self.g));
        s.push_str(&format!("n {}\n", self.n));
        let entries: Vec<(usize, f64)> = self
            .q
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i + 1, v))
            .collect();
        s.push_str(&format!("q {}\n", entries.len()));
        for (k, v) in entries {
            s.push_str(&format!("{k} {v}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().unwrap_or("");
        if head.trim() != "family triplet" {
            return Err(LoopMapError::Format("expected `family triplet`".into()));
        }
        let mut g = None;
        let mut n = None;
        let mut q: Vec<f64> = Vec::new();
        while let Some(line) = lines.next() {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("g") => g = Some(parse_f64(it.next())?),
                Some("n") => n = Some(parse_f64(it.next())?),
                Some("q") => {
                    let cnt: usize = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| LoopMapError::Format("bad q count".into()))?;
                    for _ in 0..cnt {
                        let row = lines
                            .next()
                            .ok_or_else(|| LoopMapError::Format("truncated q table".into()))?;
                        let mut cols = row.split_whitespace();
                        let k: usize = cols
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| LoopMapError::Format("bad q index".into()))?;
                        let v = parse_f64(cols.next())?;
                        if q.len() < k {
                            q.resize(k, 0.0);
                        }
                        q[k - 1] = v;
                    }
                }
                Some(other) => {
                    return Err(LoopMapError::Format(format!("unknown key `{other}`")))
                }
                None => {}
            }
        }
        WeightTriplet::new(
            q,
            g.ok_or_else(|| LoopMapError::Format("missing g".into()))?,
            n.ok_or_else(|| LoopMapError::Format("missing n".into()))?,
        )
    }
}

fn parse_f64(tok: Option<&str>) -> Result<f64> {
    tok.and_then(|s| s.parse().ok())
        .ok_or_else(|| LoopMapError::Format("bad float".into()))
}

/// Source of disk partition-function values `W^(p)` with error bounds.
///
/// Three interchangeable backends exist: truncated enumeration (module
/// [`crate::enumerate`], certified lower bounds), the step-law backdoor
/// ([`NuBackdoorProvider`], inverting `ν(−l−2) = 2 γ₊^{−l−2} W^(l)`), and
/// user closed forms ([`ClosedFormProvider`]).
pub trait PartitionProvider {
    /// `(W^(p), absolute error bound)`.
    fn w(&self, p: usize) -> (f64, f64);
    /// Largest index served.
    fn p_max(&self) -> usize;
}

/// Closed-form backend wrapping a user function.
pub struct ClosedFormProvider<F: Fn(usize) -> (f64, f64)> {
    pub f: F,
    pub p_max: usize,
}

impl<F: Fn(usize) -> (f64, f64)> PartitionProvider for ClosedFormProvider<F> {
    fn w(&self, p: usize) -> (f64, f64) {
        (self.f)(p)
    }
    fn p_max(&self) -> usize {
        self.p_max
    }
}

/// Backend that reads `W^(l) = ν(−l−2) γ₊^{l+2} / 2` off a step law.
pub struct NuBackdoorProvider {
    law: StepLaw,
    gamma_plus: f64,
    p_max: usize,
}

impl NuBackdoorProvider {
    pub fn new(law: StepLaw, p_max: usize) -> Result<Self> {
        let nu_m2 = law.nu(-2);
        if nu_m2 <= 0.0 {
            return Err(LoopMapError::Domain("step law needs ν(−2) > 0".into()));
        }
        let gamma_plus = (2.0 / nu_m2).sqrt();
        Ok(NuBackdoorProvider { law, gamma_plus, p_max })
    }

    pub fn gamma_plus(&self) -> f64 {
        self.gamma_plus
    }
}

impl PartitionProvider for NuBackdoorProvider {
    fn w(&self, p: usize) -> (f64, f64) {
        let v = self.law.nu(-(p as i64) - 2) * self.gamma_plus.powi(p as i32 + 2) / 2.0;
        (v, v * 1e-9 + 1e-300)
    }
    fn p_max(&self) -> usize {
        self.p_max
    }
}

/// Effective weights `q̂` produced by the fixed-point equation, together
/// with per-entry truncation bounds and the growth constant estimate.
#[derive(Debug, Clone)]
pub struct EffectiveWeights {
    /// `qhat[0]` is `q̂_1`.
    pub qhat: Vec<f64>,
    /// Absolute truncation/tail bound per entry.
    pub tail_bound: Vec<f64>,
    pub gamma_plus: f64,
    pub gamma_plus_err: f64,
    pub bipartite: bool,
}

impl EffectiveWeights {
    pub fn qhat_k(&self, k: usize) -> f64 {
        if k >= 1 && k <= self.qhat.len() {
            self.qhat[k - 1]
        } else {
            0.0
        }
    }
}

/// `q̂_k = q_k + n Σ_{k'≥0} C(k+k'−1, k') g^{k+k'} F^(k')`, truncated at the
/// provider's range with a geometric tail bound when one can be certified.
pub fn effective_weights(
    t: &WeightTriplet,
    provider: &dyn PartitionProvider,
    k_max: usize,
) -> Result<EffectiveWeights> {
    let (gamma_plus, gamma_plus_err) = gamma_plus_estimate(provider)?;
    let mut qhat = Vec::with_capacity(k_max);
    let mut tail_bound = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if t.n == 0.0 || t.g == 0.0 {
            qhat.push(t.qk(k));
            tail_bound.push(0.0);
            continue;
        }
        let mut sum = 0.0;
        let mut coeff = t.g.powi(k as i32); // C(k+k'-1,k') g^{k+k'} at k'=0
        let mut last_term = 0.0;
        let mut last_ratio = f64::INFINITY;
        let mut truncated_at = provider.p_max();
        for kp in 0..=provider.p_max() {
            let (w, _werr) = provider.w(kp);
            let term = coeff * w;
            if kp > 0 && last_term > 0.0 {
                last_ratio = term / last_term;
            }
            sum += t.n * term;
            last_term = term;
            if term != 0.0 && t.n * term < 1e-18 * (sum + t.qk(k)).max(1e-300) && kp > k {
                truncated_at = kp;
                break;
            }
            coeff *= t.g * (k + kp) as f64 / (kp + 1) as f64;
        }
        // Certify the tail when the term ratio has dropped below 1; the
        // ratio converges to g·γ₊ < 1 in the admissible regime.
        let bound = if last_ratio < 1.0 {
            t.n * last_term * last_ratio / (1.0 - last_ratio)
        } else if truncated_at >= provider.p_max() && t.g * gamma_plus >= 1.0 {
            return Err(LoopMapError::Convergence(format!(
                "fixed-point sum for q̂_{k} cannot be certified: gγ₊ = {} ≥ 1",
                t.g * gamma_plus
            )));
        } else {
            f64::INFINITY
        };
        qhat.push(t.qk(k) + sum);
        tail_bound.push(bound);
    }
    let bipartite = qhat.iter().enumerate().all(|(i, &v)| i % 2 == 1 || v == 0.0);
    Ok(EffectiveWeights { qhat, tail_bound, gamma_plus, gamma_plus_err, bipartite })
}

/// Outcome of inverting the fixed-point equation: either the recovered
/// triplet or a structured negativity rejection.
#[derive(Debug, Clone)]
pub enum InverseOutcome {
    Triplet(WeightTriplet),
    /// Some `q_k` came out negative: `(k, value)`.
    Negative { k: usize, value: f64 },
}

/// `q_k = q̂_k − n Σ C(k+k'−1,k') g^{k+k'} W^(k')`; rejects (with a witness)
/// when any entry goes negative.
pub fn inverse_weights(
    ew: &EffectiveWeights,
    provider: &dyn PartitionProvider,
    g: f64,
    n: f64,
) -> Result<InverseOutcome> {
    let mut q = Vec::with_capacity(ew.qhat.len());
    for k in 1..=ew.qhat.len() {
        let mut sub = 0.0;
        if n != 0.0 && g != 0.0 {
            let mut coeff = g.powi(k as i32);
            for kp in 0..=provider.p_max() {
                let term = coeff * provider.w(kp).0;
                sub += n * term;
                if term != 0.0 && n * term < 1e-18 * sub.max(1e-300) && kp > k {
                    break;
                }
                coeff *= g * (k + kp) as f64 / (kp + 1) as f64;
            }
        }
        let qk = ew.qhat_k(k) - sub;
        if qk < -1e-12 {
            return Ok(InverseOutcome::Negative { k, value: qk });
        }
        q.push(qk.max(0.0));
    }
    Ok(InverseOutcome::Triplet(WeightTriplet { q, g, n }))
}

/// Richardson-accelerated estimate of `γ₊ = lim W^(p+1)/W^(p)`.
///
/// With the generic model `W^(p+2)/W^(p) = γ² (1 − 2a/p + o(1/p))`, the
/// combination `(p·ratio²_p − (p−2)·ratio²_{p−2})/2` kills the `1/p` term;
/// the reported error is the spread of the accelerated sequence.  Two-step
/// ratios are used because one-step ratios oscillate whenever odd
/// perimeters are suppressed (bipartite weights, or small odd q's).
pub fn gamma_plus_estimate(provider: &dyn PartitionProvider) -> Result<(f64, f64)> {
    let p_max = provider.p_max();
    if p_max < 4 {
        return Err(LoopMapError::Domain("need W^(p) up to p ≥ 4".into()));
    }
    let ratio2 = |p: usize| provider.w(p + 2).0 / provider.w(p).0;
    let accel = |p: usize| {
        (p as f64 * ratio2(p) - (p - 2) as f64 * ratio2(p - 2)) / 2.0
    };
    let hi = p_max - 2;
    let g2_hi = accel(hi);
    if hi < 6 {
        // Too few points for a spread estimate; be honest about it.
        let g = g2_hi.max(0.0).sqrt();
        return Ok((g, (g2_hi - ratio2(hi)).abs().sqrt() + 1e-6));
    }
    let g2_lo = accel((hi / 2).max(hi.saturating_sub(8)));
    let g2_mid = accel((3 * hi / 4).max(hi.saturating_sub(4)));
    let err2 = (g2_hi - g2_lo).abs().max((g2_hi - g2_mid).abs());
    if err2 > 0.05 * g2_hi.abs() || g2_hi <= 0.0 {
        return Err(LoopMapError::Convergence(format!(
            "γ₊² ratios have not settled: {g2_lo} vs {g2_mid} vs {g2_hi}"
        )));
    }
    let g = g2_hi.sqrt();
    // first-order error propagation through the square root
    Ok((g, err2 / (2.0 * g)))
}

/// Tail model for a step-law side beyond its explicit table.
#[derive(Debug, Clone, PartialEq)]
pub enum TailModel {
    Zero,
    /// `amplitude · (|k| + shift)^{−exponent}`
    Power { amplitude: f64, exponent: f64, shift: f64 },
    /// `amplitude · ratio^{|k|}`
    Geometric { amplitude: f64, ratio: f64 },
}

impl TailModel {
    fn eval(&self, depth: u64) -> f64 {
        match *self {
            TailModel::Zero => 0.0,
            TailModel::Power { amplitude, exponent, shift } => {
                amplitude * (depth as f64 + shift).powf(-exponent)
            }
            TailModel::Geometric { amplitude, ratio } => amplitude * ratio.powi(depth as i32),
        }
    }

    /// `Σ_{depth > from}` of the model.
    pub(crate) fn mass_beyond(&self, from: u64) -> f64 {
        match *self {
            TailModel::Zero => 0.0,
            TailModel::Power { amplitude, exponent, shift } => {
                // Σ_{d > from} (d+shift)^{-e}; shift absorbed by index change
                amplitude * power_sum_from((from as f64 + shift).ceil() as u64 + 1, exponent)
            }
            TailModel::Geometric { amplitude, ratio } => {
                amplitude * ratio.powi(from as i32 + 1) / (1.0 - ratio)
            }
        }
    }

    fn to_text(&self) -> String {
        match *self {
            TailModel::Zero => "zero".into(),
            TailModel::Power { amplitude, exponent, shift } => {
                format!("power {amplitude} {exponent} {shift}")
            }
            TailModel::Geometric { amplitude, ratio } => format!("geometric {amplitude} {ratio}"),
        }
    }

    fn from_tokens(toks: &[&str]) -> Result<Self> {
        match toks.first() {
            Some(&"zero") => Ok(TailModel::Zero),
            Some(&"power") if toks.len() == 4 => Ok(TailModel::Power {
                amplitude: parse_f64(Some(toks[1]))?,
                exponent: parse_f64(Some(toks[2]))?,
                shift: parse_f64(Some(toks[3]))?,
            }),
            Some(&"geometric") if toks.len() == 3 => Ok(TailModel::Geometric {
                amplitude: parse_f64(Some(toks[1]))?,
                ratio: parse_f64(Some(toks[2]))?,
            }),
            _ => Err(LoopMapError::Format("bad tail model".into())),
        }
    }
}

/// A probability measure on ℤ driving all walks: explicit tables around the
/// origin plus tail models on both sides.
#[derive(Debug, Clone)]
pub struct StepLaw {
    pub family: String,
    /// Parameter of the harmonic sequence `h0` this law is tuned to.
    pub r: f64,
    /// Tail index when the law is non-generic critical.
    pub theta: Option<f64>,
    /// Ricochet parameter `n/2` when derived from a triplet.
    pub frak_p: Option<f64>,
    /// Certified bound on `|1 − Σν|` under the stored tail models.
    pub mass_defect: f64,
    /// `ν(0), ν(1), …`
    pub pos_table: Vec<f64>,
    pub pos_tail: TailModel,
    /// `ν(−1), ν(−2), …`
    pub neg_table: Vec<f64>,
    pub neg_tail: TailModel,
}

impl StepLaw {
    /// Point mass `ν(k)`.
    pub fn nu(&self, k: i64) -> f64 {
        if k >= 0 {
            let k = k as usize;
            if k < self.pos_table.len() {
                self.pos_table[k]
            } else {
                self.pos_tail.eval(k as u64)
            }
        } else {
            let l = (-k) as usize;
            if l <= self.neg_table.len() {
                self.neg_table[l - 1]
            } else {
                self.neg_tail.eval(l as u64)
            }
        }
    }

    /// `γ₊ = √(2/ν(−2))`, from `ν(−2) = 2γ₊^{−2} W^(0)`.
    pub fn gamma_plus(&self) -> f64 {
        (2.0 / self.nu(-2)).sqrt()
    }

    /// Total mass of the explicit tables plus the tail models.
    pub fn total_mass(&self) -> f64 {
        let explicit: f64 =
            self.pos_table.iter().sum::<f64>() + self.neg_table.iter().sum::<f64>();
        let pos_tail_mass = if self.pos_table.is_empty() {
            self.pos_tail.eval(0) + self.pos_tail.mass_beyond(0)
        } else {
            self.pos_tail.mass_beyond(self.pos_table.len() as u64 - 1)
        };
        explicit + pos_tail_mass + self.neg_tail.mass_beyond(self.neg_table.len() as u64)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("family {}\n", self.family));
        s.push_str(&format!("r {}\n", self.r));
        s.push_str(&format!(
            "theta {}\n",
            self.theta.map_or("none".into(), |v| format!("{v}"))
        ));
        s.push_str(&format!(
            "frak_p {}\n",
            self.frak_p.map_or("none".into(), |v| format!("{v}"))
        ));
        s.push_str(&format!("mass_defect {}\n", self.mass_defect));
        s.push_str(&format!("pos_table {}\n", self.pos_table.len()));
        for v in &self.pos_table {
            s.push_str(&format!("{v}\n"));
        }
        s.push_str(&format!("pos_tail {}\n", self.pos_tail.to_text()));
        s.push_str(&format!("neg_table {}\n", self.neg_table.len()));
        for v in &self.neg_table {
            s.push_str(&format!("{v}\n"));
        }
        s.push_str(&format!("neg_tail {}\n", self.neg_tail.to_text()));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let take = |lines: &mut std::str::Lines, key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| LoopMapError::Format(format!("missing `{key}`")))?;
            let mut toks = line.split_whitespace();
            if toks.next() != Some(key) {
                return Err(LoopMapError::Format(format!("expected `{key}` in `{line}`")));
            }
            Ok(toks.map(String::from).collect())
        };
        let family = take(&mut lines, "family")?.join(" ");
        let r = parse_f64(take(&mut lines, "r")?.first().map(|s| s.as_str()))?;
        let theta_tok = take(&mut lines, "theta")?;
        let theta = match theta_tok.first().map(|s| s.as_str()) {
            Some("none") => None,
            tok => Some(parse_f64(tok)?),
        };
        let fp_tok = take(&mut lines, "frak_p")?;
        let frak_p = match fp_tok.first().map(|s| s.as_str()) {
            Some("none") => None,
            tok => Some(parse_f64(tok)?),
        };
        let mass_defect =
            parse_f64(take(&mut lines, "mass_defect")?.first().map(|s| s.as_str()))?;
        let read_table = |lines: &mut std::str::Lines, n: usize| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| parse_f64(lines.next()))
                .collect::<Result<Vec<f64>>>()
        };
        let n_pos: usize = take(&mut lines, "pos_table")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| LoopMapError::Format("bad pos_table count".into()))?;
        let pos_table = read_table(&mut lines, n_pos)?;
        let pt = take(&mut lines, "pos_tail")?;
        let pos_tail = TailModel::from_tokens(&pt.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
        let n_neg: usize = take(&mut lines, "neg_table")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| LoopMapError::Format("bad neg_table count".into()))?;
        let neg_table = read_table(&mut lines, n_neg)?;
        let nt = take(&mut lines, "neg_tail")?;
        let neg_tail = TailModel::from_tokens(&nt.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
        Ok(StepLaw {
            family,
            r,
            theta,
            frak_p,
            mass_defect,
            pos_table,
            pos_tail,
            neg_table,
            neg_tail,
        })
    }
}

/// Residual of the harmonicity equation `Σ_k h0(l+k) ν(k) = h0(l)` at one
/// level, using the explicit tables plus an asymptotic tail remainder for
/// the positive side (`h0(p) ≈ p^{−1/2}/(√π √(1+r))` deep in the tail).
pub fn harmonicity_residual(nu: &StepLaw, h: &HFunctionTable, l: usize) -> f64 {
    let k_pos = (h.values.len() - 1 - l).min(200_000);
    let mut sum = 0.0;
    for i in (1..=l).rev() {
        sum += h.values[l - i] * nu.nu(-(i as i64));
    }
    for k in 0..=k_pos {
        sum += h.values[l + k] * nu.nu(k as i64);
    }
    // analytic remainder for k > k_pos under a power positive tail
    if let TailModel::Power { amplitude, exponent, shift } = nu.pos_tail {
        if (k_pos as u64) >= nu.pos_table.len() as u64 {
            let a_asym = 1.0 / (std::f64::consts::PI.sqrt() * (1.0 + h.r).sqrt());
            let e = exponent + 0.5;
            let j = k_pos as f64 + shift;
            let lf = l as f64;
            sum += amplitude
                * a_asym
                * (j.powf(1.0 - e) / (e - 1.0) - 0.5 * lf * j.powf(-e) / e
                    + 0.375 * lf * lf * j.powf(-e - 1.0) / (e + 1.0));
        }
    }
    sum - h.values[l]
}

/// Verdict of the admissibility check: best-fit `r`, harmonicity residuals,
/// and the ladder-height generating-function comparison.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub best_r: f64,
    /// residuals at l = 1..=l_max for the best r
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub admissible: bool,
    pub degenerate: bool,
    /// `max_h |DP ladder-height mass − GF coefficient|` (analytic route).
    pub ladder_gap: Option<f64>,
}

/// Checks criterion: existence of `r ∈ (−1,1]` making `h0` harmonic for ν.
///
/// Searches `r` on a coarse grid, refines by golden section on the summed
/// squared residual over small levels, then evaluates residuals up to
/// `l_max`.
pub fn check_admissibility(nu: &StepLaw, l_max: usize, tol: f64) -> Result<AdmissibilityReport> {
    if nu.nu(-2) > 1.0 - 1e-12 {
        return Ok(AdmissibilityReport {
            best_r: f64::NAN,
            residuals: vec![],
            max_residual: f64::NAN,
            admissible: false,
            degenerate: true,
            ladder_gap: None,
        });
    }
    let k_span = 20_000.max(nu.pos_table.len());
    let objective = |r: f64| -> f64 {
        let h = h0_series(r, 24 + k_span).expect("r in domain");
        (1..=24)
            .map(|l| {
                let res = harmonicity_residual_window(nu, &h, l, k_span);
                res * res
            })
            .sum::<f64>()
    };
    // coarse grid then local refinement
    let mut best_r = 0.0;
    let mut best_val = f64::INFINITY;
    let mut r = -0.95;
    while r <= 0.996 {
        let v = objective(r);
        if v < best_val {
            best_val = v;
            best_r = r;
        }
        r += 0.05;
    }
    let lo = (best_r - 0.05).max(-0.999);
    let hi = (best_r + 0.05).min(0.9999);
    let best_r = golden_min(lo, hi, 1e-9, objective);
    let h = h0_series(best_r, l_max + k_span)?;
    let residuals: Vec<f64> = (1..=l_max)
        .map(|l| harmonicity_residual(nu, &h, l))
        .collect();
    let max_residual = residuals.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let ladder_gap = ladder_gf_gap(nu, best_r, 12);
    Ok(AdmissibilityReport {
        best_r,
        residuals,
        max_residual,
        admissible: max_residual < tol,
        degenerate: false,
        ladder_gap: Some(ladder_gap),
    })
}

// residual with a caller-chosen positive truncation (cheap inner loop for
// the r search)
fn harmonicity_residual_window(nu: &StepLaw, h: &HFunctionTable, l: usize, k_span: usize) -> f64 {
    let mut sum = 0.0;
    for i in (1..=l).rev() {
        sum += h.values[l - i] * nu.nu(-(i as i64));
    }
    for k in 0..=k_span.min(h.values.len() - 1 - l) {
        sum += h.values[l + k] * nu.nu(k as i64);
    }
    sum - h.values[l]
}

/// Coefficients `g_h` of the strict-descending-ladder-height generating
/// function `G(z) = 1 − √((1−z)(1+rz))`, for h = 1..=h_max.
pub fn ladder_height_coefficients(r: f64, h_max: usize) -> Vec<f64> {
    // d_p = [z^p] √((1−z)(1+rz)) from (1−z)(1+rz) S' = ½((r−1) − 2rz) S
    let mut d = vec![0.0; h_max + 1];
    d[0] = 1.0;
    if h_max >= 1 {
        d[1] = (r - 1.0) / 2.0;
    }
    for p in 1..h_max {
        d[p + 1] = ((r - 1.0) * (0.5 - p as f64) * d[p] + r * (p as f64 - 2.0) * d[p - 1])
            / (p + 1) as f64;
    }
    (1..=h_max).map(|h| -d[h]).collect()
}

/// Gap between the ν-walk's first-entry law into the strictly negative
/// half-line (dynamic programming from 0, truncated in time and space) and
/// the ladder GF coefficients at parameter r.
///
/// The DP yields a certified interval `[absorbed_h, absorbed_h + unresolved]`
/// for each first-entry probability; the returned value is the worst
/// distance from a coefficient to its interval (0 for a consistent law).
fn ladder_gf_gap(nu: &StepLaw, r: f64, h_max: usize) -> f64 {
    let coeffs = ladder_height_coefficients(r, h_max);
    let span = 384usize;
    let steps = 384usize;
    // suffix mass of ν for the jump range the DP does not iterate
    let pos_total: f64 = nu.pos_table.iter().sum::<f64>()
        + nu.pos_tail.mass_beyond(nu.pos_table.len().saturating_sub(1) as u64);
    let mass_at_or_above = |threshold: i64| -> f64 {
        // Σ_{k ≥ threshold} ν(k) for threshold ≥ 0
        let mut acc = pos_total;
        for k in 0..(threshold as usize).min(nu.pos_table.len()) {
            acc -= nu.pos_table[k];
        }
        for k in nu.pos_table.len()..(threshold as usize) {
            acc -= nu.pos_tail.eval(k as u64);
        }
        acc.max(0.0)
    };
    let mut cur = vec![0.0; span];
    cur[0] = 1.0;
    let mut absorbed = vec![0.0; h_max + 1];
    let mut escaped_up = 0.0; // left the position window; destination unknown
    for _ in 0..steps {
        let mut next = vec![0.0; span];
        for (p, &mass) in cur.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for dk in (-(p as i64) - h_max as i64)..(span as i64 - p as i64) {
                let prob = nu.nu(dk);
                if prob == 0.0 {
                    continue;
                }
                let dest = p as i64 + dk;
                if dest >= 0 {
                    next[dest as usize] += mass * prob;
                } else {
                    absorbed[(-dest) as usize] += mass * prob;
                }
            }
            escaped_up += mass * mass_at_or_above(span as i64 - p as i64);
        }
        cur = next;
    }
    // walkers still alive or out of the window could yet be absorbed at any
    // height, so their mass widens every interval upward
    let unresolved = cur.iter().sum::<f64>() + escaped_up;
    let mut gap = 0.0_f64;
    for h in 1..=h_max {
        let low = absorbed[h];
        let high = absorbed[h] + unresolved;
        let c = coeffs[h - 1];
        gap = gap.max((low - c).max(c - high).max(0.0));
    }
    gap
}

/// Options for [`synthesize_critical_law`].
#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    /// Negative entries are solved explicitly down to `ν(−l_max)`.
    pub l_max: usize,
    /// Positive-side terms summed explicitly in the template moments.
    pub j_terms: usize,
    /// Levels computed by direct high-accuracy summation (the rest use FFT).
    pub direct_levels: usize,
    pub mass_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            l_max: 10_000,
            j_terms: 1_000_000,
            direct_levels: 64,
            mass_tol: 1e-10,
        }
    }
}

/// Builds a non-generic critical step law with parameters `(r, θ)`.
///
/// The positive side is the pure power template `ν(k) = s·(k+1)^{−θ−1}`
/// (k ≥ 0).  The harmonicity equation at level l,
/// `Σ_k h0(l+k) ν(k) = h0(l)`, involves `ν(−l)` only through entries already
/// fixed (the system is lower-triangular in the negative entries), so the
/// negative side is solved level by level:
///
/// ```text
///   ν(−l) = h0(l) − Σ_{i<l} h0(l−i) ν(−i) − s·T(l),
///   T(l)  = Σ_{k≥0} h0(l+k) (k+1)^{−θ−1}.
/// ```
///
/// Every template scale `s` yields a harmonic, unit-mass solution; what
/// distinguishes the non-generic critical law is that the generic `l^{−3/2}`
/// component of the harmonic solution space is cancelled, leaving the
/// `l^{−θ−1}` tail.  The solution is affine in `s`, so it is computed once at
/// `s = 0` and once at `s = 1`; the generic-tail amplitudes of the two are
/// separated from the target component by least squares on the deepest
/// levels, and the cancellation point is their closed-form zero.  The
/// measured mass defect shrinks like `l_max^{−3/2}`.
///
/// `T(l)` is evaluated by direct summation for small l (accuracy for the
/// harmonicity gates) and by one FFT cross-correlation for the rest, with an
/// analytic integral correction for the truncated template tail.
pub fn synthesize_critical_law(
    r: f64,
    theta: f64,
    opts: &SynthesisOptions,
) -> Result<StepLaw> {
    if !(r > -1.0 && r < 1.0) {
        return Err(LoopMapError::Domain(format!("r = {r} not in (−1,1)")));
    }
    if !(theta > 0.5 && theta < 1.5) {
        return Err(LoopMapError::Domain(format!("theta = {theta} not in (1/2,3/2)")));
    }
    let l_max = opts.l_max;
    let j = opts.j_terms;
    let h = h0_series(r, l_max + j)?;
    let a_asym = 1.0 / (std::f64::consts::PI.sqrt() * (1.0 + r).sqrt());
    let e = theta + 1.5; // decay of the summand h0(l+k)·t(k) in k
    let tail_corr = |l: usize| -> f64 {
        let jf = j as f64;
        let lf = l as f64;
        a_asym
            * (jf.powf(1.0 - e) / (e - 1.0) - 0.5 * lf * jf.powf(-e) / e
                + 0.375 * lf * lf * jf.powf(-e - 1.0) / (e + 1.0))
    };
    let template: Vec<f64> = (0..j).map(|k| ((k + 1) as f64).powf(-theta - 1.0)).collect();

    // T(l) for l = 0..=l_max: direct summation on small levels…
    let mut t_mom = vec![0.0; l_max + 1];
    for (l, tm) in t_mom.iter_mut().enumerate().take(opts.direct_levels.min(l_max) + 1) {
        let mut acc = 0.0;
        for (k, &tk) in template.iter().enumerate() {
            acc += h.values[l + k] * tk;
        }
        *tm = acc + tail_corr(l);
    }
    // …and one FFT cross-correlation for the rest.
    if l_max > opts.direct_levels {
        let n = l_max + j;
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let mut a: Vec<Complex<f64>> =
            h.values[..n].iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut b: Vec<Complex<f64>> = template
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(n)
            .collect();
        fft.process(&mut a);
        fft.process(&mut b);
        for (ai, bi) in a.iter_mut().zip(&b) {
            *ai *= bi.conj();
        }
        ifft.process(&mut a);
        let scale = 1.0 / n as f64;
        for (l, tm) in t_mom.iter_mut().enumerate().skip(opts.direct_levels + 1) {
            *tm = a[l].re * scale + tail_corr(l);
        }
    }

    // Solve the lower-triangular system at s = 0 and s = 1.
    let solve = |s: f64| -> Vec<f64> {
        let mut nu_neg = vec![0.0; l_max]; // nu_neg[l-1] = ν(−l)
        for l in 1..=l_max {
            let mut acc = h.values[l] - s * t_mom[l];
            for i in 1..l {
                acc -= h.values[l - i] * nu_neg[i - 1];
            }
            nu_neg[l - 1] = acc;
        }
        nu_neg
    };
    let nu0 = solve(0.0);
    let nu1 = solve(1.0);
    let template_mass = power_sum_from(1, theta + 1.0); // Σ (k+1)^{−θ−1}, k ≥ 0

    let combine = |s: f64, l: usize| nu0[l] + s * (nu1[l] - nu0[l]);

    // Choose the template scale that cancels the generic l^{−3/2} component
    // of the solved negative tail, leaving the l^{−θ−1} decay.  (Any scale
    // gives a harmonic, unit-mass solution; the scale only moves the
    // amplitude of the generic component, and the solved entries are affine
    // in s, so the cancellation point is a closed-form zero.)  The two
    // components are separated by least squares on the deepest levels:
    // rescale g(l) = ν_s(−l)·l^{θ+1} and fit on the basis {1, l^{θ−1/2}};
    // the second coefficient is the generic amplitude.
    // returns (target amplitude, generic amplitude)
    let tail_components = |nu: &[f64]| -> (f64, f64) {
        let lo = l_max / 2;
        let step = 1 + l_max / 4000;
        let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in (lo..l_max).step_by(step) {
            let lf = (i + 1) as f64;
            let u2 = lf.powf(theta - 0.5);
            let g = nu[i] * lf.powf(theta + 1.0);
            s11 += 1.0;
            s12 += u2;
            s22 += u2 * u2;
            b1 += g;
            b2 += g * u2;
        }
        let det = s11 * s22 - s12 * s12;
        ((s22 * b1 - s12 * b2) / det, (s11 * b2 - s12 * b1) / det)
    };
    let (c0, a0) = tail_components(&nu0);
    let (c1, a1) = tail_components(&nu1);
    if !((a1 - a0).is_finite() && (a1 - a0).abs() > 0.0) {
        return Err(LoopMapError::Convergence(
            "template does not move the generic tail component".into(),
        ));
    }
    let s_star = -a0 / (a1 - a0);
    if !(s_star > 0.0 && s_star.is_finite()) {
        return Err(LoopMapError::Convergence(format!(
            "tail cancellation wants a nonpositive template scale ({s_star:e})"
        )));
    }

    let neg_table: Vec<f64> = (0..l_max).map(|i| combine(s_star, i)).collect();
    if let Some(&min) = neg_table
        .iter()
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .filter(|&&m| m < 0.0)
    {
        return Err(LoopMapError::Convergence(format!(
            "template rejected: recursion produced a negative entry ({min:e})"
        )));
    }
    // Tail continuation with the exact decay exponent and the least-squares
    // amplitude at the cancellation point.
    let c_star = c0 + s_star * (c1 - c0);
    if !(c_star > 0.0) {
        return Err(LoopMapError::Convergence(format!(
            "negative-tail amplitude is not positive ({c_star:e})"
        )));
    }
    let neg_tail = TailModel::Power { amplitude: c_star, exponent: theta + 1.0, shift: 0.0 };
    let explicit_mass: f64 = neg_table.iter().sum();
    let mass = s_star * template_mass + explicit_mass + neg_tail.mass_beyond(l_max as u64);
    let law = StepLaw {
        family: format!("synthetic-critical r={r} theta={theta}"),
        r,
        theta: Some(theta),
        frak_p: None,
        mass_defect: (mass - 1.0).abs() + opts.mass_tol,
        pos_table: template.iter().take(4096).map(|&t| s_star * t).collect(),
        pos_tail: TailModel::Power {
            amplitude: s_star,
            exponent: theta + 1.0,
            shift: 1.0,
        },
        neg_table,
        neg_tail,
    };
    Ok(law)
}

/// `ν_q̂` from effective weights: `ν(k) = γ₊^k q̂_{k+2}` for k ≥ −1 and
/// `ν(k) = 2 γ₊^k W^(−k−2)` for k < −1; `r` is recovered from the
/// harmonicity fit.
pub fn step_law_from_effective(
    ew: &EffectiveWeights,
    provider: &dyn PartitionProvider,
    frak_p: Option<f64>,
) -> Result<StepLaw> {
    let gp = ew.gamma_plus;
    let pos_table: Vec<f64> = (0..ew.qhat.len().saturating_sub(2))
        .map(|k| gp.powi(k as i32) * ew.qhat_k(k + 2))
        .collect();
    let mut neg_table = vec![gp.powi(-1) * ew.qhat_k(1)];
    for l in 2..=(provider.p_max() + 2) {
        neg_table.push(2.0 * gp.powi(-(l as i32)) * provider.w(l - 2).0);
    }
    // power tail continuation fitted on the deepest available entries
    let fit_lo = neg_table.len() * 2 / 3;
    let data: Vec<(f64, f64)> = (fit_lo..neg_table.len())
        .filter_map(|i| (neg_table[i] > 0.0).then_some(((i + 1) as f64, neg_table[i])))
        .collect();
    let neg_tail = if data.len() >= 4 {
        let (_, a) = crate::numeric::fit_power(&data);
        let last_l = neg_table.len() as f64;
        TailModel::Power {
            amplitude: neg_table[neg_table.len() - 1] * last_l.powf(a),
            exponent: a,
            shift: 0.0,
        }
    } else {
        TailModel::Zero
    };
    let mut law = StepLaw {
        family: "from-effective-weights".into(),
        r: 0.0,
        theta: None,
        frak_p,
        mass_defect: f64::NAN,
        pos_table,
        pos_tail: TailModel::Zero,
        neg_table,
        neg_tail,
    };
    let report = check_admissibility(&law, 30, 1e-6)?;
    if report.degenerate {
        return Err(LoopMapError::Domain("degenerate step law".into()));
    }
    law.r = report.best_r;
    law.mass_defect = (law.total_mass() - 1.0).abs();
    if report.max_residual > 1e-4 {
        return Err(LoopMapError::Convergence(format!(
            "no r makes h0 harmonic: best residual {:.3e}",
            report.max_residual
        )));
    }
    Ok(law)
}

/// Pointed-admissibility report from the two-variable solver.
#[derive(Debug, Clone)]
pub struct MiermontReport {
    pub z_plus: f64,
    pub z_diamond: f64,
    pub spectral_radius: f64,
    pub admissible_bullet: bool,
    /// `Z• = 2z⁺ + (z◇)² − 1`, the pointed partition function minus one.
    pub z_bullet: f64,
    pub residual: f64,
}

fn miermont_f(qhat: &[f64], x: f64, y: f64) -> (f64, f64, [f64; 4]) {
    // returns (f_bullet, f_diamond, [∂x f•, ∂y f•, ∂x f◇, ∂y f◇])
    let d = qhat.len();
    let mut fb = 0.0;
    let mut fd = 0.0;
    let mut grad = [0.0; 4];
    for k in 0.. {
        if 2 + 2 * k > d && 1 + 2 * k > d {
            break;
        }
        for kp in 0.. {
            let m_b = 2 + 2 * k + kp;
            let m_d = 1 + 2 * k + kp;
            if m_d > d {
                break;
            }
            let xy = x.powi(k as i32) * y.powi(kp as i32);
            if m_b <= d && qhat[m_b - 1] != 0.0 {
                let c = binomial((2 * k + kp + 1) as u64, (k + 1) as u64)
                    * binomial((k + kp) as u64, k as u64);
                let term = c * qhat[m_b - 1];
                fb += xy * term;
                if k > 0 {
                    grad[0] += k as f64 * x.powi(k as i32 - 1) * y.powi(kp as i32) * term;
                }
                if kp > 0 {
                    grad[1] += kp as f64 * x.powi(k as i32) * y.powi(kp as i32 - 1) * term;
                }
            }
            if qhat[m_d - 1] != 0.0 {
                let c = binomial((2 * k + kp) as u64, k as u64)
                    * binomial((k + kp) as u64, k as u64);
                let term = c * qhat[m_d - 1];
                fd += xy * term;
                if k > 0 {
                    grad[2] += k as f64 * x.powi(k as i32 - 1) * y.powi(kp as i32) * term;
                }
                if kp > 0 {
                    grad[3] += kp as f64 * x.powi(k as i32) * y.powi(kp as i32 - 1) * term;
                }
            }
        }
    }
    (fb, fd, grad)
}

/// Solves the pointed-admissibility system
/// `f•(z⁺,z◇) = 1 − 1/z⁺`, `f◇(z⁺,z◇) = z◇` by damped Newton and evaluates
/// the spectral radius of the associated 3×3 matrix.  Only finitely
/// supported `q̂` are accepted here (the double series is then polynomial).
pub fn miermont_solve(qhat: &[f64]) -> Result<MiermontReport> {
    let (mut x, mut y) = (1.0 + 1e-3, 1e-3);
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let (fb, fd, grad) = miermont_f(qhat, x, y);
        let r1 = fb - 1.0 + 1.0 / x;
        let r2 = fd - y;
        residual = r1.abs().max(r2.abs());
        if residual < 1e-13 {
            break;
        }
        // Jacobian of (r1, r2)
        let j11 = grad[0] - 1.0 / (x * x);
        let j12 = grad[1];
        let j21 = grad[2];
        let j22 = grad[3] - 1.0;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            return Err(LoopMapError::Convergence("singular Jacobian".into()));
        }
        let dx = (r1 * j22 - r2 * j12) / det;
        let dy = (r2 * j11 - r1 * j21) / det;
        // damping: halve until the residual does not increase
        let mut step = 1.0;
        loop {
            let (nx, ny) = (x - step * dx, y - step * dy);
            if nx > 0.0 && ny >= 0.0 {
                let (fb2, fd2, _) = miermont_f(qhat, nx, ny);
                let nr = (fb2 - 1.0 + 1.0 / nx).abs().max((fd2 - ny).abs());
                if nr <= residual || step < 1e-8 {
                    x = nx;
                    y = ny;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(LoopMapError::Convergence(
                    "Newton stalled on the pointed system".into(),
                ));
            }
        }
    }
    if residual > 1e-9 {
        return Ok(MiermontReport {
            z_plus: x,
            z_diamond: y,
            spectral_radius: f64::INFINITY,
            admissible_bullet: false,
            z_bullet: f64::NAN,
            residual,
        });
    }
    let (_, _, grad) = miermont_f(qhat, x, y);
    let safe = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let m = nalgebra::Matrix3::new(
        0.0,
        0.0,
        x - 1.0,
        safe(grad[2] * x, y),
        grad[3],
        0.0,
        safe(grad[0] * x * x, x - 1.0),
        safe(grad[1] * x * y, x - 1.0),
        0.0,
    );
    let spectral_radius = crate::numeric::spectral_radius_3x3(&m);
    let admissible_bullet = spectral_radius <= 1.0 + 1e-8;
    Ok(MiermontReport {
        z_plus: x,
        z_diamond: y,
        spectral_radius,
        admissible_bullet,
        z_bullet: 2.0 * x + y * y - 1.0,
        residual,
    })
}

/// Phase label attached by [`criticality_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseLabel {
    Subcritical,
    GenericCritical,
    NonGenericCritical { fitted_a: f64 },
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct CriticalityReport {
    pub g_gamma_gap: f64,
    pub g_gamma_err: f64,
    pub fitted_exponent: Option<f64>,
    pub label: PhaseLabel,
}

/// Reports `|gγ₊ − 1/2|` and a fitted exponent from
/// `W^(p) ≈ C γ₊^{p} p^{−a}` as a phase diagnostic.
pub fn criticality_check(
    ew: &EffectiveWeights,
    provider: &dyn PartitionProvider,
    g: f64,
) -> CriticalityReport {
    let gap = (g * ew.gamma_plus - 0.5).abs();
    let gap_err = g * ew.gamma_plus_err;
    let p_hi = provider.p_max();
    let fitted_exponent = if p_hi >= 64 {
        let data: Vec<(f64, f64)> = (p_hi / 4..p_hi)
            .step_by(1 + p_hi / 512)
            .filter_map(|p| {
                let v = provider.w(p).0 * ew.gamma_plus.powi(-(p as i32));
                (v > 0.0).then_some((p as f64, v))
            })
            .collect();
        (data.len() >= 16).then(|| crate::numeric::fit_power(&data).1)
    } else {
        None
    };
    let label = if gap > 3.0 * gap_err.max(1e-9) + 1e-6 {
        PhaseLabel::Subcritical
    } else {
        match fitted_exponent {
            Some(a) if (a - 1.5).abs() < 0.15 => PhaseLabel::Subcritical,
            Some(a) if (a - 2.5).abs() < 0.15 => PhaseLabel::GenericCritical,
            Some(a) if a > 1.5 && a < 2.5 => PhaseLabel::NonGenericCritical { fitted_a: a },
            _ => PhaseLabel::Inconclusive,
        }
    };
    CriticalityReport {
        g_gamma_gap: gap,
        g_gamma_err: gap_err,
        fitted_exponent,
        label,
    }
}

/// Deep-tail diagnostics of a step law.
#[derive(Debug, Clone)]
pub struct TailReport {
    /// `ν(−l−1)/ν(−l)` at the deepest explicit level.
    pub neg_ratio: f64,
    /// Fitted exponents (with finite-size correction when θ is known).
    pub neg_exponent: f64,
    pub pos_exponent: f64,
    /// positive/negative amplitude ratio; `→ −cos(πθ)` for critical laws.
    pub amplitude_ratio: f64,
    /// true when the negative ratio stays bounded away from 1 (geometric
    /// tail, subcritical signature).
    pub geometric_flag: bool,
}

/// Computes tail ratio and amplitude diagnostics: critical laws have
/// `ν(−l−1)/ν(−l) → 1` and tail-amplitude ratio `→ −cos(πθ)`.
pub fn tail_checks(nu: &StepLaw) -> TailReport {
    let depth = nu.neg_table.len();
    let l = depth.saturating_sub(2).max(1);
    let neg_ratio = nu.nu(-(l as i64) - 1) / nu.nu(-(l as i64));
    let corr = nu.theta.map_or(0.5, |t| t - 1.0);
    let fit_side = |values: &dyn Fn(usize) -> f64, lo: usize, hi: usize| -> (f64, f64) {
        let data: Vec<(f64, f64)> = (lo..hi)
            .step_by(1 + (hi - lo) / 2000)
            .filter_map(|i| {
                let v = values(i);
                (v > 0.0).then_some((i as f64, v))
            })
            .collect();
        if data.len() < 8 {
            return (f64::NAN, f64::NAN);
        }
        fit_power_corrected(&data, corr)
    };
    let (neg_amp, neg_exponent) =
        fit_side(&|i| nu.nu(-(i as i64)), (depth / 10).max(10), depth);
    let pos_hi = nu.pos_table.len().max(depth);
    let (pos_amp, pos_exponent) = fit_side(&|i| nu.nu(i as i64), (pos_hi / 10).max(10), pos_hi);
    TailReport {
        neg_ratio,
        neg_exponent,
        pos_exponent,
        amplitude_ratio: pos_amp / neg_amp,
        geometric_flag: neg_ratio < 0.99 && neg_ratio > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_roundtrips_text() {
        let t = WeightTriplet::new(vec![0.1, 0.0, 0.037_500_000_000_000_1], 0.07, 1.0).unwrap();
        let back = WeightTriplet::from_text(&t.to_text()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn gamma_estimate_exact_on_geometric_provider() {
        let p = ClosedFormProvider { f: |p: usize| (3.0 * 1.7_f64.powi(p as i32), 0.0), p_max: 40 };
        let (g, err) = gamma_plus_estimate(&p).unwrap();
        assert!((g - 1.7).abs() < 1e-12, "g = {g}");
        assert!(err < 1e-10);
    }

    #[test]
    fn gamma_estimate_power_correction() {
        // W^(p) = γ^p p^{-a}: plain ratios converge like 1/p, Richardson like 1/p².
        let p = ClosedFormProvider {
            f: |p: usize| (2.0_f64.powi(p as i32) * (p.max(1) as f64).powf(-1.5), 0.0),
            p_max: 400,
        };
        let (g, _) = gamma_plus_estimate(&p).unwrap();
        assert!((g - 2.0).abs() < 1e-4, "g = {g}");
    }

    #[test]
    fn effective_weights_suppress_loops_when_n_zero() {
        let t = WeightTriplet::new(vec![0.2, 0.1], 0.3, 0.0).unwrap();
        let p = ClosedFormProvider { f: |_| (1.0, 0.0), p_max: 10 };
        let ew = effective_weights(&t, &p, 4).unwrap();
        assert_eq!(ew.qhat, vec![0.2, 0.1, 0.0, 0.0]);
    }

    #[test]
    fn effective_weights_first_order_term() {
        // with F^(0)=1 and all higher F tiny, q̂₁ ≥ q₁ + n·g
        let t = WeightTriplet::new(vec![0.05], 0.1, 2.0).unwrap();
        let p = ClosedFormProvider {
            f: |p: usize| if p == 0 { (1.0, 0.0) } else { (1e-30, 0.0) },
            p_max: 16,
        };
        let ew = effective_weights(&t, &p, 2).unwrap();
        assert!(ew.qhat[0] >= 0.05 + 2.0 * 0.1 - 1e-12);
        assert!((ew.qhat[0] - (0.05 + 2.0 * 0.1)).abs() < 1e-10);
    }

    #[test]
    fn miermont_degenerate_vertex_map() {
        let rep = miermont_solve(&[]).unwrap();
        assert!((rep.z_plus - 1.0).abs() < 1e-10);
        assert!(rep.z_diamond.abs() < 1e-10);
        assert!((rep.z_bullet - 1.0).abs() < 1e-9);
        assert!(rep.admissible_bullet);
    }

    #[test]
    fn miermont_pure_quadrangulation_closed_form() {
        // with only q̂₂ = c the system collapses to z⁺ = 1/(1−c), z◇ = 0
        for &c in &[0.05_f64, 0.1, 0.2] {
            let rep = miermont_solve(&[0.0, c]).unwrap();
            assert!((rep.z_plus - 1.0 / (1.0 - c)).abs() < 1e-9, "z+ = {}", rep.z_plus);
            assert!(rep.z_diamond.abs() < 1e-9);
        }
    }

    #[test]
    fn miermont_monotone_in_scaling() {
        // scaling all of q̂ up moves the principal solution up
        let base = [0.02, 0.05, 0.01, 0.008];
        let mut prev = (0.0, 0.0);
        for i in 0..5 {
            let c = 0.5 + 0.125 * i as f64;
            let scaled: Vec<f64> = base.iter().map(|&q| q * c).collect();
            let rep = miermont_solve(&scaled).unwrap();
            assert!(rep.spectral_radius <= 1.0 + 1e-8, "rho = {}", rep.spectral_radius);
            assert!(rep.z_plus >= prev.0 - 1e-12 && rep.z_diamond >= prev.1 - 1e-12);
            prev = (rep.z_plus, rep.z_diamond);
        }
    }

    #[test]
    fn ladder_coefficients_match_square_root_series() {
        // squaring Σ d_p z^p must give (1−z)(1+rz)
        let r = 0.37;
        let g = ladder_height_coefficients(r, 12);
        let mut d = vec![1.0];
        d.extend(g.iter().map(|&x| -x));
        for p in 0..=12 {
            let conv: f64 = (0..=p).map(|i| d[i] * d[p - i]).sum();
            let expect = match p {
                0 => 1.0,
                1 => r - 1.0,
                2 => -r,
                _ => 0.0,
            };
            assert!((conv - expect).abs() < 1e-12, "p = {p}: {conv} vs {expect}");
        }
    }
}
