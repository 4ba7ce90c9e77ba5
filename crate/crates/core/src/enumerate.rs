//! Exhaustive enumeration of small loop-decorated maps by depth-first
//! search over peeling-event trees, plus an exact budget-resolved recursion
//! for truncated partition functions.  These are the ground-truth backends
//! the stochastic modules are tested against.
//!
//! Weights are carried as exact rationals (an `f64` input denotes the exact
//! rational it rounds to), so completed-map masses and truncated partition
//! sums are free of accumulation error.  The DFS and the recursion count
//! the same objects; their sums agree exactly, which the tests check.

use crate::peeling::{LoopDecoratedMap, LoopSide, PeelingEvent};
use crate::weights::WeightTriplet;
use crate::{LoopMapError, Result};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite weight")
}

fn rat_pow(x: &BigRational, n: usize) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..n {
        out *= x;
    }
    out
}

/// Exact binomial coefficient.
fn rat_binomial(n: usize, k: usize) -> BigRational {
    if k > n {
        return BigRational::zero();
    }
    let mut out = BigRational::one();
    for i in 0..k {
        out *= BigRational::from_integer(((n - i) as i64).into());
        out /= BigRational::from_integer(((i + 1) as i64).into());
    }
    out
}

/// One fully explored map: its event sequence under the canonical peeling
/// order, exact weight, replayed-map statistics, and the event sequence of
/// its gasket (rings and their interiors contracted away).
#[derive(Debug, Clone)]
pub struct CompletedMap {
    pub events: Vec<PeelingEvent>,
    pub weight: BigRational,
    pub num_vertices: usize,
    pub num_edges: usize,
    pub num_loops: usize,
    /// Events attached to the root component of the gasket, with each ring
    /// of `v` outer bases recorded as the `v`-gon it contracts to.
    pub gasket_events: Vec<PeelingEvent>,
}

impl CompletedMap {
    pub fn weight_f64(&self) -> f64 {
        self.weight.to_f64().unwrap_or(f64::NAN)
    }
}

/// Tuning knobs for the exhaustive search.
#[derive(Debug, Clone)]
pub struct EnumerationOptions {
    /// Maximum number of peeling events (= non-loop edges of the map).
    pub edge_budget: usize,
    /// Rings longer than this are dropped; when `2g < 1` their total event
    /// mass is charged to `pending_mass`, otherwise it is unaccounted.
    pub ring_length_cap: usize,
    /// Branches whose weight falls below this floor are cut and charged to
    /// `pending_mass` (sound because every event weight here is ≤ 1 only
    /// when the triplet is; the caller picks a floor appropriate for it).
    pub weight_floor: Option<BigRational>,
}

impl EnumerationOptions {
    pub fn new(edge_budget: usize) -> Self {
        EnumerationOptions {
            edge_budget,
            ring_length_cap: edge_budget,
            weight_floor: None,
        }
    }
}

/// Full enumeration result at a given perimeter and edge budget.
#[derive(Debug, Clone)]
pub struct Census {
    pub perimeter: usize,
    pub options: EnumerationOptions,
    pub completed: Vec<CompletedMap>,
    /// Cumulative weight, at the moment of the cut, of branches removed by
    /// the budget, the ring cap, or the weight floor.
    pub pending_mass: BigRational,
    pub pending_count: u64,
}

impl Census {
    pub fn total_mass(&self) -> BigRational {
        self.completed
            .iter()
            .fold(BigRational::zero(), |acc, m| acc + &m.weight)
    }

    pub fn total_mass_f64(&self) -> f64 {
        self.total_mass().to_f64().unwrap_or(f64::NAN)
    }

    pub fn pending_mass_f64(&self) -> f64 {
        self.pending_mass.to_f64().unwrap_or(f64::NAN)
    }

    /// Pointed count: Σ over completed maps of (#vertices × weight).
    pub fn pointed_mass_f64(&self) -> f64 {
        self.completed
            .iter()
            .map(|m| m.num_vertices as f64 * m.weight_f64())
            .sum()
    }

    /// Plain-text census report: one line per completed map.
    pub fn to_report(&self) -> String {
        let mut s = format!(
            "census perimeter={} budget={} completed={} pending_mass={:.6e}\n",
            self.perimeter,
            self.options.edge_budget,
            self.completed.len(),
            self.pending_mass_f64()
        );
        for m in &self.completed {
            s.push_str(&format!(
                "{:.12e} V={} E={} loops={} events={}\n",
                m.weight_f64(),
                m.num_vertices,
                m.num_edges,
                m.num_loops,
                format_events(&m.events),
            ));
        }
        s
    }
}

pub fn format_events(events: &[PeelingEvent]) -> String {
    let toks: Vec<String> = events
        .iter()
        .map(|e| match e {
            PeelingEvent::C { k } => format!("C{k}"),
            PeelingEvent::G { k1, k2 } => format!("G{k1},{k2}"),
            PeelingEvent::L { config } => {
                let bits: String = config
                    .iter()
                    .map(|s| if *s == LoopSide::Out { 'o' } else { 'i' })
                    .collect();
                format!("L{bits}")
            }
        })
        .collect();
    toks.join(" ")
}

/// Exact rational event weight under a triplet: q_k for a revealed k-gon,
/// 1 for a gluing, n g^m for a ring of m triangles.
fn event_weight(t: &WeightTriplet, ev: &PeelingEvent) -> BigRational {
    match ev {
        PeelingEvent::C { k } => rat(t.qk(*k)),
        PeelingEvent::G { .. } => BigRational::one(),
        PeelingEvent::L { config } => rat(t.n) * rat_pow(&rat(t.g), config.len()),
    }
}

/// At most two boundary edges disappear per event, so a hole of degree l
/// needs at least ⌈l/2⌉ more events before it can close.
fn min_closing_cost(l: usize) -> usize {
    l.div_ceil(2)
}

struct DfsState {
    map: LoopDecoratedMap,
    /// Per-face flag: true while the face lies inside some ring's interior
    /// (such faces are absent from the gasket's root component).
    inside: Vec<bool>,
    events: Vec<PeelingEvent>,
    gasket_events: Vec<PeelingEvent>,
    weight: BigRational,
    num_loops: usize,
}

struct Enumerator<'a> {
    t: &'a WeightTriplet,
    opts: &'a EnumerationOptions,
    support: usize,
    n_rat: BigRational,
    g_rat: BigRational,
    completed: Vec<CompletedMap>,
    pending_mass: BigRational,
    pending_count: u64,
}

impl Enumerator<'_> {
    fn prune(&mut self, weight: BigRational) {
        self.pending_mass += weight;
        self.pending_count += 1;
    }

    fn dfs(&mut self, state: &DfsState) {
        if state.map.is_closed() {
            self.completed.push(CompletedMap {
                events: state.events.clone(),
                weight: state.weight.clone(),
                num_vertices: state.map.num_vertices(),
                num_edges: state.map.num_edges(),
                num_loops: state.num_loops,
                gasket_events: state.gasket_events.clone(),
            });
            return;
        }
        let used = state.events.len();
        if used == self.opts.edge_budget {
            self.prune(state.weight.clone());
            return;
        }
        let holes = state.map.holes();
        let l = state.map.hole_degree(holes[0]);
        // events on other holes that any completion must still pay for
        let cost_other: usize = holes[1..]
            .iter()
            .map(|&h| min_closing_cost(state.map.hole_degree(h)))
            .sum();
        let slack = self.opts.edge_budget - used - 1; // events left after this one
        let peeling_inside = state.inside[holes[0]];

        // C_k for every k in the support of q
        for k in 1..=self.support {
            if self.t.qk(k) > 0.0 {
                let cost = cost_other + min_closing_cost(l + k - 2);
                self.try_apply(state, PeelingEvent::C { k }, peeling_inside, cost, slack);
            }
        }
        // G splits
        if l >= 2 {
            for k1 in 0..=l - 2 {
                let k2 = l - 2 - k1;
                let cost = cost_other + min_closing_cost(k1) + min_closing_cost(k2);
                self.try_apply(state, PeelingEvent::G { k1, k2 }, peeling_inside, cost, slack);
            }
        }
        // rings of every admissible length and in/out pattern
        if self.t.n > 0.0 && self.t.g > 0.0 {
            let cap = self.opts.ring_length_cap;
            for m in 1..=cap {
                // every class at this length or beyond is infeasible: the
                // two offspring holes carry l+m-2 boundary edges in total
                if cost_other + (l + m - 2).div_ceil(2) > slack {
                    self.pending_mass += &state.weight * self.ring_mass_range(m, cap);
                    self.pending_count += 1;
                    break;
                }
                let base = &self.n_rat * rat_pow(&self.g_rat, m);
                for u in 0..m {
                    let v = m - u;
                    let cost = cost_other + min_closing_cost(l + v - 2) + min_closing_cost(u);
                    if cost > slack {
                        self.pending_mass += &state.weight * rat_binomial(m - 1, u) * &base;
                        self.pending_count += 1;
                        continue;
                    }
                    let mut config = vec![LoopSide::Out; m];
                    self.ring_patterns(state, &mut config, 1, u, peeling_inside, cost, slack);
                }
            }
            // geometric tail of all rings beyond the cap, when it converges
            if 2.0 * self.t.g < 1.0 {
                self.pending_mass += &state.weight * self.ring_mass_range(cap + 1, usize::MAX);
            }
        }
    }

    /// Total event mass n Σ_{m_lo ≤ m ≤ m_hi} 2^{m-1} g^m of all ring
    /// configurations in a length window; `m_hi = usize::MAX` means the
    /// full geometric tail (finite only when 2g < 1).
    fn ring_mass_range(&self, m_lo: usize, m_hi: usize) -> BigRational {
        let two_g = rat(2.0) * &self.g_rat;
        let head = &self.n_rat * rat_pow(&self.g_rat, m_lo) * rat_pow(&rat(2.0), m_lo - 1);
        if m_hi == usize::MAX {
            return head / (BigRational::one() - two_g);
        }
        if two_g == BigRational::one() {
            return head * BigRational::from_integer(((m_hi - m_lo + 1) as i64).into());
        }
        let len = m_hi - m_lo + 1;
        head * (BigRational::one() - rat_pow(&two_g, len)) / (BigRational::one() - two_g)
    }

    /// Emits every in/out pattern with exactly `u` inner triangles among
    /// positions 1..m (position 0 is always outer).
    #[allow(clippy::too_many_arguments)]
    fn ring_patterns(
        &mut self,
        state: &DfsState,
        config: &mut Vec<LoopSide>,
        idx: usize,
        ins_left: usize,
        peeling_inside: bool,
        min_cost_after: usize,
        slack: usize,
    ) {
        let m = config.len();
        if idx == m {
            self.try_apply(
                state,
                PeelingEvent::L { config: config.clone() },
                peeling_inside,
                min_cost_after,
                slack,
            );
            return;
        }
        if m - idx > ins_left {
            config[idx] = LoopSide::Out;
            self.ring_patterns(state, config, idx + 1, ins_left, peeling_inside, min_cost_after, slack);
        }
        if ins_left > 0 {
            config[idx] = LoopSide::In;
            self.ring_patterns(state, config, idx + 1, ins_left - 1, peeling_inside, min_cost_after, slack);
        }
    }

    fn try_apply(
        &mut self,
        state: &DfsState,
        ev: PeelingEvent,
        peeling_inside: bool,
        min_cost_after: usize,
        slack: usize,
    ) {
        let weight = &state.weight * event_weight(self.t, &ev);
        if min_cost_after > slack {
            self.prune(weight);
            return;
        }
        if let Some(floor) = &self.opts.weight_floor {
            if &weight < floor {
                self.prune(weight);
                return;
            }
        }
        let mut next = DfsState {
            map: state.map.clone(),
            inside: state.inside.clone(),
            events: state.events.clone(),
            gasket_events: state.gasket_events.clone(),
            weight,
            num_loops: state.num_loops,
        };
        let e = next.map.peel_edge().expect("open hole");
        let outcome = next.map.apply_event(e, &ev).expect("enumerated event is valid");
        next.events.push(ev.clone());
        next.inside.resize(next.map.num_faces_allocated(), peeling_inside);
        if let Some(inner) = outcome.inner_hole {
            next.inside[inner] = true;
        }
        if let Some(split) = outcome.split_hole {
            next.inside[split] = peeling_inside;
        }
        if let PeelingEvent::L { ref config } = ev {
            next.num_loops += 1;
            if !peeling_inside {
                let v = config.iter().filter(|&&s| s == LoopSide::Out).count();
                next.gasket_events.push(PeelingEvent::C { k: v });
            }
        } else if !peeling_inside {
            next.gasket_events.push(ev.clone());
        }
        self.dfs(&next);
    }
}

/// Enumerates every loop-decorated map of the given perimeter whose peeling
/// exploration fits the options.  Exhaustive within the budget: intended
/// for small budgets (the census is the full map count, which grows like
/// 12^budget even before decorations).
pub fn enumerate_maps(p: usize, t: &WeightTriplet, opts: &EnumerationOptions) -> Result<Census> {
    if p == 0 {
        return Err(LoopMapError::Domain("perimeter must be >= 1".into()));
    }
    let map = LoopDecoratedMap::hollow(p)?;
    let inside = vec![false; map.num_faces_allocated()];
    let mut en = Enumerator {
        t,
        opts,
        support: t.support_bound(),
        n_rat: rat(t.n),
        g_rat: rat(t.g),
        completed: Vec::new(),
        pending_mass: BigRational::zero(),
        pending_count: 0,
    };
    en.dfs(&DfsState {
        map,
        inside,
        events: Vec::new(),
        gasket_events: Vec::new(),
        weight: BigRational::one(),
        num_loops: 0,
    });
    Ok(Census {
        perimeter: p,
        options: opts.clone(),
        completed: en.completed,
        pending_mass: en.pending_mass,
        pending_count: en.pending_count,
    })
}

/// Replays an event sequence from a hollow map; errors if any event is
/// invalid at its step.
pub fn replay(p: usize, events: &[PeelingEvent]) -> Result<LoopDecoratedMap> {
    let mut map = LoopDecoratedMap::hollow(p)?;
    for ev in events {
        let e = map
            .peel_edge()
            .ok_or_else(|| LoopMapError::Structure("event after closure".into()))?;
        map.apply_event(e, ev)?;
    }
    Ok(map)
}

/// Budget-resolved partition functions, computed by the peeling recursion
/// rather than explicit search.  `coeff(l, e)` is the exact total weight of
/// maps of perimeter `l` whose exploration takes exactly `e` events; these
/// are the same numbers the DFS census sums, but obtained in polynomial
/// time, so budgets in the tens are cheap.
pub struct PartitionTable {
    pub e_max: usize,
    pub ring_cap: usize,
    l_max: usize,
    /// closed[l][e]
    closed: Vec<Vec<BigRational>>,
    /// open[l][b]: weight of explorations of a hole of degree l (and all
    /// its offspring, offspring of a split explored depth-first) that are
    /// still open after exactly b events.
    open: Vec<Vec<BigRational>>,
}

impl PartitionTable {
    /// Builds the table up to budget `e_max`.  Ring lengths are capped at
    /// `2·e_max + 2`, beyond which no ring fits any budget ≤ `e_max`.
    pub fn new(t: &WeightTriplet, e_max: usize) -> PartitionTable {
        // a hole of degree > 2e can't close within e events
        let support = t.support_bound();
        let ring_cap = 2 * e_max + 2;
        let l_max = 2 * e_max + support + ring_cap;
        let zero_poly = vec![BigRational::zero(); e_max + 1];
        let mut closed = vec![zero_poly.clone(); l_max + 1];
        let mut open = vec![zero_poly; l_max + 1];
        closed[0][0] = BigRational::one();
        for op in open.iter_mut().skip(1) {
            op[0] = BigRational::one();
        }
        let q_rat: Vec<BigRational> = (0..=support).map(|k| rat(t.qk(k))).collect();
        let n_rat = rat(t.n);
        let g_rat = rat(t.g);
        let has_rings = t.n > 0.0 && t.g > 0.0;
        // class weights C(m-1,u) n g^m for every (u, v≥1), m = u+v ≤ cap
        let mut ring_classes: Vec<(usize, usize, BigRational)> = Vec::new();
        if has_rings {
            for m in 1..=ring_cap {
                let gm = &n_rat * rat_pow(&g_rat, m);
                for u in 0..m {
                    let v = m - u;
                    ring_classes.push((u, v, rat_binomial(m - 1, u) * &gm));
                }
            }
        }
        // grouped ring mass hitting a given outer-base count:
        // a_v = n Σ_u C(u+v-1, u) g^{u+v}
        let mut a_v = vec![BigRational::zero(); ring_cap + 1];
        for (u, v, w) in &ring_classes {
            let _ = u;
            a_v[*v] += w;
        }
        let zero = BigRational::zero();
        fn get<'a>(
            tab: &'a [Vec<BigRational>],
            l_max: usize,
            zero: &'a BigRational,
            l: usize,
            e: usize,
        ) -> &'a BigRational {
            if l <= l_max {
                &tab[l][e]
            } else {
                zero
            }
        }
        // coefficients vanish below the closing cost ⌈l/2⌉, which the
        // convolution windows below exploit
        for e in 1..=e_max {
            for l in 1..=l_max {
                let mut c_le = BigRational::zero();
                let mut o_le = BigRational::zero();
                for (k, qk) in q_rat.iter().enumerate().skip(1) {
                    if qk.is_zero() {
                        continue;
                    }
                    c_le += qk * get(&closed, l_max, &zero, l + k - 2, e - 1);
                    o_le += qk * get(&open, l_max, &zero, l + k - 2, e - 1);
                }
                let mut convolve_closed = |a: usize, b: usize, w: &BigRational, acc: &mut BigRational| {
                    let (ca, cb) = (min_closing_cost(a), min_closing_cost(b));
                    if ca + cb + 1 > e {
                        return;
                    }
                    let mut s = BigRational::zero();
                    for e1 in ca..=e - 1 - cb {
                        s += get(&closed, l_max, &zero, a, e1) * get(&closed, l_max, &zero, b, e - 1 - e1);
                    }
                    *acc += w * s;
                };
                if l >= 2 {
                    for k1 in 0..=l - 2 {
                        let k2 = l - 2 - k1;
                        convolve_closed(k1, k2, &BigRational::one(), &mut c_le);
                        // first side still open, or closed and second open
                        o_le += get(&open, l_max, &zero, k1, e - 1);
                        let ck1 = min_closing_cost(k1);
                        for b in ck1..e {
                            o_le += get(&closed, l_max, &zero, k1, b) * get(&open, l_max, &zero, k2, e - 1 - b);
                        }
                    }
                }
                if has_rings {
                    for (u, v, w) in &ring_classes {
                        convolve_closed(l + v - 2, *u, w, &mut c_le);
                    }
                    for v in 1..=ring_cap {
                        if !a_v[v].is_zero() {
                            o_le += &a_v[v] * get(&open, l_max, &zero, l + v - 2, e - 1);
                        }
                    }
                    for (u, v, w) in &ring_classes {
                        let lo = l + v - 2;
                        let clo = min_closing_cost(lo);
                        if clo + 1 > e {
                            continue;
                        }
                        let mut s = BigRational::zero();
                        for b in clo..e {
                            s += get(&closed, l_max, &zero, lo, b) * get(&open, l_max, &zero, *u, e - 1 - b);
                        }
                        o_le += w * s;
                    }
                }
                closed[l][e] = c_le;
                open[l][e] = o_le;
            }
        }
        PartitionTable { e_max, ring_cap, l_max, closed, open }
    }

    /// Exact weight of maps of perimeter `l` closing in exactly `e` events.
    pub fn coeff(&self, l: usize, e: usize) -> BigRational {
        if l <= self.l_max && e <= self.e_max {
            self.closed[l][e].clone()
        } else {
            BigRational::zero()
        }
    }

    /// Exact weight of all maps of perimeter `l` with at most `budget`
    /// events; `l = 0` is the empty map with mass 1.
    pub fn lower_bound(&self, l: usize, budget: usize) -> BigRational {
        let mut out = BigRational::zero();
        for e in 0..=budget.min(self.e_max) {
            out += self.coeff(l, e);
        }
        out
    }

    pub fn lower_bound_f64(&self, l: usize, budget: usize) -> f64 {
        self.lower_bound(l, budget).to_f64().unwrap_or(f64::NAN)
    }

    pub fn open_mass_f64(&self, l: usize, budget: usize) -> f64 {
        self.open_mass(l, budget).to_f64().unwrap_or(f64::NAN)
    }

    /// Mass of the open frontier after exactly `budget` events, summed over
    /// perimeters within the table's window (extreme perimeters beyond it
    /// are not tracked, a negligible undercount for subcritical weights).
    pub fn open_mass(&self, l: usize, budget: usize) -> BigRational {
        if l <= self.l_max && budget <= self.e_max {
            self.open[l][budget].clone()
        } else {
            BigRational::zero()
        }
    }
}

/// Float twin of `PartitionTable` for budgets where exact rationals are
/// needlessly expensive; same recursion, same truncation semantics.
pub struct FloatPartitionTable {
    pub e_max: usize,
    pub ring_cap: usize,
    l_max: usize,
    closed: Vec<Vec<f64>>,
    open: Vec<Vec<f64>>,
}

impl FloatPartitionTable {
    pub fn new(t: &WeightTriplet, e_max: usize) -> FloatPartitionTable {
        let support = t.support_bound();
        let ring_cap = 2 * e_max + 2;
        let l_max = 2 * e_max + support + ring_cap;
        let mut closed = vec![vec![0.0; e_max + 1]; l_max + 1];
        let mut open = vec![vec![0.0; e_max + 1]; l_max + 1];
        closed[0][0] = 1.0;
        for op in open.iter_mut().skip(1) {
            op[0] = 1.0;
        }
        let has_rings = t.n > 0.0 && t.g > 0.0;
        let mut ring_classes: Vec<(usize, usize, f64)> = Vec::new();
        let mut a_v = vec![0.0; ring_cap + 1];
        if has_rings {
            for m in 1..=ring_cap {
                let gm = t.n * t.g.powi(m as i32);
                for u in 0..m {
                    let w = crate::numeric::binomial((m - 1) as u64, u as u64) * gm;
                    ring_classes.push((u, m - u, w));
                    a_v[m - u] += w;
                }
            }
        }
        let get = |tab: &[Vec<f64>], l: usize, e: usize| -> f64 {
            if l <= l_max {
                tab[l][e]
            } else {
                0.0
            }
        };
        for e in 1..=e_max {
            for l in 1..=l_max {
                let mut c_le = 0.0;
                let mut o_le = 0.0;
                for k in 1..=support {
                    let qk = t.qk(k);
                    if qk > 0.0 {
                        c_le += qk * get(&closed, l + k - 2, e - 1);
                        o_le += qk * get(&open, l + k - 2, e - 1);
                    }
                }
                let convolve_closed = |a: usize, b: usize, closed: &[Vec<f64>]| -> f64 {
                    let (ca, cb) = (min_closing_cost(a), min_closing_cost(b));
                    if ca + cb + 1 > e {
                        return 0.0;
                    }
                    let mut s = 0.0;
                    for e1 in ca..=e - 1 - cb {
                        s += get(closed, a, e1) * get(closed, b, e - 1 - e1);
                    }
                    s
                };
                if l >= 2 {
                    for k1 in 0..=l - 2 {
                        let k2 = l - 2 - k1;
                        c_le += convolve_closed(k1, k2, &closed);
                        o_le += get(&open, k1, e - 1);
                        for b in min_closing_cost(k1)..e {
                            o_le += get(&closed, k1, b) * get(&open, k2, e - 1 - b);
                        }
                    }
                }
                if has_rings {
                    for (u, v, w) in &ring_classes {
                        c_le += w * convolve_closed(l + v - 2, *u, &closed);
                    }
                    for v in 1..=ring_cap {
                        if a_v[v] > 0.0 {
                            o_le += a_v[v] * get(&open, l + v - 2, e - 1);
                        }
                    }
                    for (u, v, w) in &ring_classes {
                        let lo = l + v - 2;
                        let clo = min_closing_cost(lo);
                        if clo + 1 > e {
                            continue;
                        }
                        let mut s = 0.0;
                        for b in clo..e {
                            s += get(&closed, lo, b) * get(&open, *u, e - 1 - b);
                        }
                        o_le += w * s;
                    }
                }
                closed[l][e] = c_le;
                open[l][e] = o_le;
            }
        }
        FloatPartitionTable { e_max, ring_cap, l_max, closed, open }
    }

    pub fn coeff(&self, l: usize, e: usize) -> f64 {
        if l <= self.l_max && e <= self.e_max {
            self.closed[l][e]
        } else {
            0.0
        }
    }

    pub fn lower_bound(&self, l: usize, budget: usize) -> f64 {
        (0..=budget.min(self.e_max)).map(|e| self.coeff(l, e)).sum()
    }

    pub fn open_mass(&self, l: usize, budget: usize) -> f64 {
        if l <= self.l_max && budget <= self.e_max {
            self.open[l][budget]
        } else {
            0.0
        }
    }
}

/// Truncated partition function at perimeter `p` and budget `edge_budget`.
#[derive(Debug, Clone)]
pub struct TruncatedPartition {
    pub perimeter: usize,
    pub edge_budget: usize,
    /// Exact weight of all maps explorable within the budget; nondecreasing
    /// in the budget and bounded by the full partition function.
    pub lower_bound: BigRational,
    /// Mass of explorations still open when the budget runs out.
    pub pending_mass: BigRational,
}

impl TruncatedPartition {
    pub fn lower_bound_f64(&self) -> f64 {
        self.lower_bound.to_f64().unwrap_or(f64::NAN)
    }
    pub fn pending_mass_f64(&self) -> f64 {
        self.pending_mass.to_f64().unwrap_or(f64::NAN)
    }
}

pub fn truncated_partition(p: usize, edge_budget: usize, t: &WeightTriplet) -> Result<TruncatedPartition> {
    if p == 0 {
        return Err(LoopMapError::Domain("perimeter must be >= 1".into()));
    }
    let table = PartitionTable::new(t, edge_budget);
    Ok(TruncatedPartition {
        perimeter: p,
        edge_budget,
        lower_bound: table.lower_bound(p, edge_budget),
        pending_mass: table.open_mass(p, edge_budget),
    })
}

/// Event-class key used by the transition-law comparison.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventClass {
    C { k: usize },
    G { k1: usize, k2: usize },
    /// Ring class by (inner, outer) base counts; configs are merged.
    L { u: usize, v: usize },
}

impl EventClass {
    pub fn of(ev: &PeelingEvent) -> EventClass {
        match ev {
            PeelingEvent::C { k } => EventClass::C { k: *k },
            PeelingEvent::G { k1, k2 } => EventClass::G { k1: *k1, k2: *k2 },
            PeelingEvent::L { config } => {
                let u = config.iter().filter(|&&s| s == LoopSide::In).count();
                EventClass::L { u, v: config.len() - u }
            }
        }
    }
}

/// Conditional law of the first peeling event at hole degree `l`, computed
/// by exhaustive enumeration; masses are exact, conditioned on the map
/// closing within the budget.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub l: usize,
    pub edge_budget: usize,
    pub classes: Vec<(EventClass, BigRational)>,
    pub total_mass: BigRational,
    pub pending_mass: BigRational,
}

impl TransitionTable {
    pub fn probabilities(&self) -> Vec<(EventClass, f64)> {
        self.classes
            .iter()
            .map(|(c, w)| (c.clone(), (w / &self.total_mass).to_f64().unwrap()))
            .collect()
    }

    pub fn probability(&self, class: &EventClass) -> f64 {
        self.classes
            .iter()
            .find(|(c, _)| c == class)
            .map(|(_, w)| (w / &self.total_mass).to_f64().unwrap())
            .unwrap_or(0.0)
    }
}

pub fn empirical_transitions(l: usize, edge_budget: usize, t: &WeightTriplet) -> Result<TransitionTable> {
    let census = enumerate_maps(l, t, &EnumerationOptions::new(edge_budget))?;
    transitions_from_census(&census)
}

/// Groups an existing census by first event.
pub fn transitions_from_census(census: &Census) -> Result<TransitionTable> {
    let total = census.total_mass();
    if total.is_zero() {
        return Err(LoopMapError::Domain(
            "no completed maps at this budget; transitions undefined".into(),
        ));
    }
    let mut acc: HashMap<EventClass, BigRational> = HashMap::new();
    for m in &census.completed {
        let class = EventClass::of(&m.events[0]);
        *acc.entry(class).or_insert_with(BigRational::zero) += &m.weight;
    }
    let mut classes: Vec<(EventClass, BigRational)> = acc.into_iter().collect();
    classes.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(TransitionTable {
        l: census.perimeter,
        edge_budget: census.options.edge_budget,
        classes,
        total_mass: total,
        pending_mass: census.pending_mass.clone(),
    })
}

/// First-event law predicted by the one-step peeling formulas with the
/// partition functions replaced by their truncations at `budget`:
/// q_k F(l+k−2)/F(l) for faces, F(k1)F(k2)/F(l) for gluings, and
/// C(m−1,u) n g^m F(l+v−2) F(u)/F(l) for ring classes.
pub fn transition_closed_forms(
    l: usize,
    t: &WeightTriplet,
    table: &PartitionTable,
    budget: usize,
) -> Vec<(EventClass, f64)> {
    let f = |p: usize| table.lower_bound_f64(p, budget);
    let fl = f(l);
    let mut out = Vec::new();
    for k in 1..=t.support_bound() {
        if t.qk(k) > 0.0 {
            out.push((EventClass::C { k }, t.qk(k) * f(l + k - 2) / fl));
        }
    }
    if l >= 2 {
        for k1 in 0..=l - 2 {
            let k2 = l - 2 - k1;
            out.push((EventClass::G { k1, k2 }, f(k1) * f(k2) / fl));
        }
    }
    if t.n > 0.0 && t.g > 0.0 {
        for m in 1..=table.ring_cap.min(2 * budget + 2) {
            for u in 0..m {
                let v = m - u;
                let w = crate::numeric::binomial((m - 1) as u64, u as u64)
                    * t.n
                    * t.g.powi(m as i32);
                out.push((EventClass::L { u, v }, w * f(l + v - 2) * f(u) / fl));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Gasket-law comparison: the enumerated marginal of the gasket against the
/// product of effective weights along the gasket's own event sequence.
#[derive(Debug, Clone)]
pub struct GasketReport {
    /// (gasket signature, enumerated mass, q̂-product mass)
    pub rows: Vec<(String, f64, f64)>,
    pub max_abs_discrepancy: f64,
    pub truncation_tolerance: f64,
}

/// Marginalizes the enumeration over ring interiors and compares each
/// gasket's mass with the weight the effective (hatted) sequence assigns
/// to it.  `qhat[k-1]` is the effective weight of a k-gon.
pub fn gasket_law_check(
    p: usize,
    edge_budget: usize,
    t: &WeightTriplet,
    qhat: &[f64],
) -> Result<GasketReport> {
    let census = enumerate_maps(p, t, &EnumerationOptions::new(edge_budget))?;
    let mut acc: HashMap<String, (f64, Vec<PeelingEvent>)> = HashMap::new();
    for m in &census.completed {
        let key = format_events(&m.gasket_events);
        let entry = acc.entry(key).or_insert_with(|| (0.0, m.gasket_events.clone()));
        entry.0 += m.weight_f64();
    }
    let mut rows = Vec::new();
    let mut max_abs = 0.0_f64;
    for (key, (mass, events)) in acc {
        let mut hat = 1.0;
        for ev in &events {
            if let PeelingEvent::C { k } = ev {
                hat *= qhat.get(*k - 1).copied().unwrap_or(0.0);
            }
        }
        max_abs = max_abs.max((mass - hat).abs());
        rows.push((key, mass, hat));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(GasketReport {
        rows,
        max_abs_discrepancy: max_abs,
        truncation_tolerance: census.pending_mass.to_f64().unwrap(),
    })
}

/// `PartitionProvider` backend computed by the budget-resolved recursion;
/// `w(0) = 1` by the usual convention, the open-frontier mass is reported
/// as the error bar.
pub struct EnumerationProvider {
    values: Vec<(f64, f64)>,
}

impl EnumerationProvider {
    /// `edge_budget` is on top of the ⌈p/2⌉-and-then-some events a map of
    /// perimeter p needs just to close: each W^(p) is truncated at p +
    /// `edge_budget` events so the relative truncation error is uniform
    /// across perimeters.
    pub fn new(t: &WeightTriplet, p_max: usize, edge_budget: usize) -> Result<Self> {
        let table = FloatPartitionTable::new(t, edge_budget + p_max);
        let mut values = vec![(1.0, 0.0)];
        for p in 1..=p_max {
            values.push((
                table.lower_bound(p, edge_budget + p),
                table.open_mass(p, edge_budget + p),
            ));
        }
        Ok(EnumerationProvider { values })
    }
}

impl crate::weights::PartitionProvider for EnumerationProvider {
    fn w(&self, p: usize) -> (f64, f64) {
        self.values.get(p).copied().unwrap_or((0.0, f64::INFINITY))
    }
    fn p_max(&self) -> usize {
        self.values.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightTriplet;

    fn loopless(q: &[f64]) -> WeightTriplet {
        WeightTriplet::new(q.to_vec(), 0.0, 0.0).unwrap()
    }

    #[test]
    fn perimeter_one_tiny_budget_hand_count() {
        // maps of perimeter 1 with ≤ 2 edges: the lone loop-edge map, the
        // loop with a loop inside, and the loop with a pendant edge
        let t = loopless(&[2.0, 3.0, 5.0]);
        let census = enumerate_maps(1, &t, &EnumerationOptions::new(2)).unwrap();
        let mut weights: Vec<f64> = census.completed.iter().map(|m| m.weight_f64()).collect();
        weights.sort_by(f64::total_cmp);
        assert_eq!(weights, vec![2.0, 5.0, 6.0]); // q₁, q₃, q₁q₂
        for m in &census.completed {
            let replayed = replay(1, &m.events).unwrap();
            replayed.check_invariants().unwrap();
            assert!(replayed.is_closed());
            assert_eq!(replayed.num_edges(), m.events.len());
        }
    }

    #[test]
    fn no_loop_events_when_n_is_zero() {
        let t = loopless(&[1.0, 1.0, 1.0, 1.0]);
        let census = enumerate_maps(2, &t, &EnumerationOptions::new(4)).unwrap();
        assert!(census
            .completed
            .iter()
            .all(|m| m.num_loops == 0 && m.events.iter().all(|e| !matches!(e, PeelingEvent::L { .. }))));
        assert!(!census.completed.is_empty());
    }

    #[test]
    fn replay_reconstructs_valid_decorated_maps() {
        let t = WeightTriplet::new(vec![0.5, 0.25, 0.125], 0.5, 1.5).unwrap();
        let census = enumerate_maps(2, &t, &EnumerationOptions::new(3)).unwrap();
        assert!(census.completed.iter().any(|m| m.num_loops > 0));
        for m in &census.completed {
            let replayed = replay(2, &m.events).unwrap();
            replayed.check_invariants().unwrap();
            assert!(replayed.is_closed());
            assert_eq!(replayed.loops.len(), m.num_loops);
            assert_eq!(replayed.num_vertices(), m.num_vertices);
        }
    }

    #[test]
    fn recursion_matches_exhaustive_search_exactly() {
        // the two backends must produce identical rationals, budget by
        // budget and perimeter by perimeter
        let t = WeightTriplet::new(vec![0.5, 0.25], 0.5, 2.0).unwrap();
        let table = PartitionTable::new(&t, 5);
        // the cap must clear 2·budget+2 or long rings with fast-closing
        // offspring are missed
        let mut opts = EnumerationOptions::new(5);
        opts.ring_length_cap = 12;
        for p in 1..=3usize {
            let census = enumerate_maps(p, &t, &opts).unwrap();
            for e in 0..=5usize {
                let dfs_mass = census
                    .completed
                    .iter()
                    .filter(|m| m.events.len() == e)
                    .fold(BigRational::zero(), |acc, m| acc + &m.weight);
                assert_eq!(dfs_mass, table.coeff(p, e), "p={p} e={e}");
            }
        }
    }

    #[test]
    fn partition_is_monotone_in_budget() {
        let t = WeightTriplet::new(vec![0.125, 0.0625], 0.1875, 1.0).unwrap();
        let table = PartitionTable::new(&t, 8);
        let mut last = BigRational::zero();
        for budget in 1..=8 {
            let lb = table.lower_bound(1, budget);
            assert!(lb >= last);
            last = lb;
        }
        assert!(table.open_mass(1, 8) < table.open_mass(1, 2));
    }

    #[test]
    fn first_event_masses_match_budget_resolved_recursion() {
        // mass of maps whose first event is C_k equals q_k times the
        // truncated partition one budget unit down, and similarly for
        // gluings and ring classes with the budget convolved across the
        // two offspring holes — exact rational identities
        let t = WeightTriplet::new(vec![0.5, 0.25], 0.375, 1.5).unwrap();
        let l = 2;
        let budget = 5;
        let mut opts = EnumerationOptions::new(budget);
        opts.ring_length_cap = 2 * budget + 2;
        let census = enumerate_maps(l, &t, &opts).unwrap();
        let trans = transitions_from_census(&census).unwrap();
        let table = PartitionTable::new(&t, budget);
        let pair_mass = |a: usize, b: usize| {
            let mut out = BigRational::zero();
            for e1 in 0..budget {
                for e2 in 0..budget - e1 {
                    out += table.coeff(a, e1) * table.coeff(b, e2);
                }
            }
            out
        };
        for (class, mass) in &trans.classes {
            let predicted = match class {
                EventClass::C { k } => rat(t.qk(*k)) * table.lower_bound(l + k - 2, budget - 1),
                EventClass::G { k1, k2 } => pair_mass(*k1, *k2),
                EventClass::L { u, v } => {
                    rat_binomial(u + v - 1, *u)
                        * rat(t.n)
                        * rat_pow(&rat(t.g), u + v)
                        * pair_mass(l + v - 2, *u)
                }
            };
            assert_eq!(*mass, predicted, "class {class:?}");
        }
        // all first-event probabilities sum to 1 (same normalizer)
        let sum: f64 = trans.probabilities().iter().map(|&(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_transitions_converge_to_enumeration() {
        // the budget-resolved first-event masses (convolved across the two
        // offspring holes) converge to the factorized one-step formulas as
        // the budget grows
        let t = WeightTriplet::new(vec![0.03125, 0.015625], 0.125, 1.25).unwrap();
        let l = 2;
        let e_ref = 14;
        let budget = 10;
        let table = PartitionTable::new(&t, e_ref);
        let predicted = transition_closed_forms(l, &t, &table, e_ref);
        let pair_mass = |a: usize, b: usize| -> f64 {
            let mut out = BigRational::zero();
            for e1 in 0..budget {
                for e2 in 0..budget - e1 {
                    out += table.coeff(a, e1) * table.coeff(b, e2);
                }
            }
            out.to_f64().unwrap()
        };
        let fl = table.lower_bound_f64(l, budget);
        for (class, p_pred) in predicted {
            if p_pred < 1e-6 {
                continue;
            }
            let mass = match class {
                EventClass::C { k } => t.qk(k) * table.lower_bound_f64(l + k - 2, budget - 1),
                EventClass::G { k1, k2 } => pair_mass(k1, k2),
                EventClass::L { u, v } => {
                    crate::numeric::binomial((u + v - 1) as u64, u as u64)
                        * t.n
                        * t.g.powi((u + v) as i32)
                        * pair_mass(l + v - 2, u)
                }
            };
            let p_got = mass / fl;
            assert!(
                (p_got - p_pred).abs() < 0.01 * p_pred,
                "{class:?}: {p_got} vs {p_pred}"
            );
        }
    }

    #[test]
    fn gasket_reduces_to_identity_without_loops() {
        let t = loopless(&[0.1, 0.05, 0.02]);
        let census = enumerate_maps(1, &t, &EnumerationOptions::new(4)).unwrap();
        for m in &census.completed {
            assert_eq!(m.gasket_events, m.events);
        }
    }
}
