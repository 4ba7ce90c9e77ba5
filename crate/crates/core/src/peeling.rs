//! Combinatorial loop-decorated planar maps and the peeling machinery on
//! them: the half-edge representation, the three event types (glue a
//! boundary edge pair, reveal a plain face, reveal a ring of loop
//! triangles), Boltzmann reconstruction samplers, targeted peeling with
//! perimeter/nesting extraction, and the vertex-count supermartingale.
//!
//! # Representation
//!
//! Half-edge `h` is paired with `twin[h]`; `next[h]` is the following
//! half-edge of the same face, traversed with the face on the left.  The
//! vertex rotation is the derived permutation `σ(h) = next(twin(h))`
//! (half-edges sharing the origin of `h`); faces are `next`-orbits,
//! vertices are `σ`-orbits.  Holes and the root face are ordinary faces
//! with a kind tag; each hole carries a distinguished boundary half-edge,
//! which is the edge the canonical peeling algorithm peels next.

use crate::{LoopMapError, Result};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Which side of a loop-crossed triangle its base lies on, relative to the
/// exploration that revealed it: `Out` bases touch the revealing hole,
/// `In` bases touch the ring's inner region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopSide {
    In,
    Out,
}

/// A peeling event.
#[derive(Debug, Clone, PartialEq)]
pub enum PeelingEvent {
    /// Glue the peeled edge to the boundary edge `k1` positions ahead of it
    /// on the same hole; the hole splits into holes of degree `k1` and `k2`
    /// (degree-0 parts close).
    G { k1: usize, k2: usize },
    /// Reveal a fresh `k`-gon behind the peeled edge.
    C { k: usize },
    /// Reveal a ring of loop triangles; `config[i]` is the base side of the
    /// i-th triangle and `config[0]` must be `Out` (the peeled edge is the
    /// base of the first triangle).
    L { config: Vec<LoopSide> },
}

impl PeelingEvent {
    /// Ring statistics `(u, v)` = (#In, #Out) for an L event.
    pub fn ring_uv(&self) -> Option<(usize, usize)> {
        match self {
            PeelingEvent::L { config } => {
                let u = config.iter().filter(|&&s| s == LoopSide::In).count();
                Some((u, config.len() - u))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaceKind {
    Root,
    Hole { distinguished: usize },
    Inner,
    LoopTriangle { loop_id: usize, side: LoopSide },
    Dead,
}

/// Rooted planar map with simple holes and triangular loop rings.
#[derive(Debug, Clone)]
pub struct LoopDecoratedMap {
    twin: Vec<usize>,
    next: Vec<usize>,
    face_of: Vec<usize>,
    alive: Vec<bool>,
    faces: Vec<FaceKind>,
    pub root: usize,
    /// For each loop, the ring's triangles in cyclic order with base sides.
    pub loops: Vec<Vec<(usize, LoopSide)>>,
}

/// What an event did, for samplers and process traces.
#[derive(Debug, Clone, Default)]
pub struct EventOutcome {
    /// Hole that absorbed the outer side (None if it closed).
    pub outer_hole: Option<usize>,
    /// Inner hole created by an L event with u ≥ 1.
    pub inner_hole: Option<usize>,
    /// Second hole created by a G split (the `k2` side), if it stayed open.
    pub split_hole: Option<usize>,
    /// Holes that reached degree 0 and closed.
    pub closed_holes: Vec<usize>,
    /// A half-edge whose origin is the vertex sealed by an all-out ring.
    pub sealed_vertex_edge: Option<usize>,
}

impl LoopDecoratedMap {
    /// The hollow map of perimeter p: a root face and a hole sharing a
    /// p-cycle.  Half-edges `0..p` bound the root face, `p..2p` the hole;
    /// the hole's distinguished edge is `p` (opposite the root edge `0`).
    pub fn hollow(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(LoopMapError::Domain("perimeter must be ≥ 1".into()));
        }
        let mut twin = vec![0; 2 * p];
        let mut next = vec![0; 2 * p];
        let mut face_of = vec![0; 2 * p];
        for i in 0..p {
            twin[i] = p + i;
            twin[p + i] = i;
            next[i] = (i + 1) % p;
            next[p + (i + 1) % p] = p + i;
            face_of[p + i] = 1;
        }
        Ok(LoopDecoratedMap {
            twin,
            next,
            face_of,
            alive: vec![true; 2 * p],
            faces: vec![FaceKind::Root, FaceKind::Hole { distinguished: p }],
            root: 0,
            loops: vec![],
        })
    }

    pub fn twin(&self, h: usize) -> usize {
        self.twin[h]
    }
    pub fn next(&self, h: usize) -> usize {
        self.next[h]
    }
    pub fn face(&self, h: usize) -> usize {
        self.face_of[h]
    }
    pub fn face_kind(&self, f: usize) -> &FaceKind {
        &self.faces[f]
    }
    pub fn num_half_edges_alive(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Active hole face ids, ascending (the canonical peeling order).
    pub fn holes(&self) -> Vec<usize> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k, FaceKind::Hole { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    /// The boundary cycle of a face, starting from a canonical edge (the
    /// distinguished edge for holes, lowest-id edge otherwise).
    pub fn face_cycle(&self, f: usize) -> Vec<usize> {
        let start = match &self.faces[f] {
            FaceKind::Hole { distinguished } => *distinguished,
            _ => (0..self.twin.len())
                .find(|&h| self.alive[h] && self.face_of[h] == f)
                .expect("face has an edge"),
        };
        let mut cycle = vec![start];
        let mut h = self.next[start];
        while h != start {
            cycle.push(h);
            h = self.next[h];
        }
        cycle
    }

    /// Total face slots ever allocated, including dead ones; face ids are
    /// always below this bound.
    pub fn num_faces_allocated(&self) -> usize {
        self.faces.len()
    }

    pub fn hole_degree(&self, f: usize) -> usize {
        self.face_cycle(f).len()
    }

    /// The edge the canonical algorithm peels next: the distinguished edge
    /// of the lowest-numbered hole.
    pub fn peel_edge(&self) -> Option<usize> {
        self.holes().first().map(|&f| match self.faces[f] {
            FaceKind::Hole { distinguished } => distinguished,
            _ => unreachable!(),
        })
    }

    fn prev_in_face(&self, h: usize) -> usize {
        let mut cur = h;
        while self.next[cur] != h {
            cur = self.next[cur];
        }
        cur
    }

    fn alloc_halfedges(&mut self, count: usize, face: usize) -> Vec<usize> {
        let start = self.twin.len();
        for _ in 0..count {
            self.twin.push(usize::MAX);
            self.next.push(usize::MAX);
            self.face_of.push(face);
            self.alive.push(true);
        }
        (start..start + count).collect()
    }

    fn close_hole(&mut self, f: usize) {
        self.faces[f] = FaceKind::Dead;
    }

    /// Applies a peeling event at the distinguished (or caller-chosen) hole
    /// edge `e`.  Exactly one non-loop edge becomes inactive: `e` itself
    /// (for C and L it is absorbed into the revealed face; for G the pair
    /// `e`, `e₂` is identified into one edge).
    pub fn apply_event(&mut self, e: usize, ev: &PeelingEvent) -> Result<EventOutcome> {
        let hole = self.face_of[e];
        if !matches!(self.faces[hole], FaceKind::Hole { .. }) {
            return Err(LoopMapError::Structure(format!(
                "peeled edge {e} is not on a hole"
            )));
        }
        let l = self.hole_degree(hole);
        let mut out = EventOutcome::default();
        match ev {
            PeelingEvent::C { k } => {
                let k = *k;
                if k == 0 {
                    return Err(LoopMapError::Domain("C event needs k ≥ 1".into()));
                }
                let a = self.prev_in_face(e);
                let b = self.next[e];
                // new inner k-gon: e → n₁ → … → n_{k−1} → e
                let fid = self.faces.len();
                self.faces.push(FaceKind::Inner);
                let n = self.alloc_halfedges(k - 1, fid);
                let m = self.alloc_halfedges(k - 1, hole);
                for i in 0..k - 1 {
                    self.twin[n[i]] = m[i];
                    self.twin[m[i]] = n[i];
                }
                self.face_of[e] = fid;
                let mut prev = e;
                for &ni in &n {
                    self.next[prev] = ni;
                    prev = ni;
                }
                self.next[prev] = e;
                // hole: a → m_{k−1} → … → m₁ → b
                if l == 1 && k == 1 {
                    self.close_hole(hole);
                    out.closed_holes.push(hole);
                } else {
                    let mut cur = if l == 1 { *m.last().unwrap() } else { a };
                    for &mi in m.iter().rev() {
                        if cur != mi {
                            self.next[cur] = mi;
                        }
                        cur = mi;
                    }
                    self.next[cur] = if l == 1 { m[k - 2] } else { b };
                    let dist = if k > 1 { m[k - 2] } else { b };
                    self.faces[hole] = FaceKind::Hole { distinguished: dist };
                    out.outer_hole = Some(hole);
                }
            }
            PeelingEvent::G { k1, k2 } => {
                let (k1, k2) = (*k1, *k2);
                if k1 + k2 + 2 != l {
                    return Err(LoopMapError::Domain(format!(
                        "G({k1},{k2}) invalid on hole of degree {l}"
                    )));
                }
                // hole cycle: e → x₁ … x_{k1} → e₂ → y₁ … y_{k2} → e
                let cycle = {
                    let mut c = vec![e];
                    let mut h = self.next[e];
                    while h != e {
                        c.push(h);
                        h = self.next[h];
                    }
                    c
                };
                let e2 = cycle[k1 + 1];
                let t1 = self.twin[e];
                let t2 = self.twin[e2];
                self.twin[t1] = t2;
                self.twin[t2] = t1;
                self.alive[e] = false;
                self.alive[e2] = false;
                self.close_hole(hole);
                // side A: x₁..x_{k1}
                if k1 > 0 {
                    let fa = self.faces.len();
                    self.faces.push(FaceKind::Hole { distinguished: cycle[1] });
                    for i in 1..=k1 {
                        self.face_of[cycle[i]] = fa;
                        self.next[cycle[i]] = cycle[if i == k1 { 1 } else { i + 1 }];
                    }
                    out.outer_hole = Some(fa);
                } else {
                    out.closed_holes.push(hole);
                }
                // side B: y₁..y_{k2}
                if k2 > 0 {
                    let fb = self.faces.len();
                    self.faces.push(FaceKind::Hole { distinguished: cycle[k1 + 2] });
                    for i in k1 + 2..=k1 + 1 + k2 {
                        self.face_of[cycle[i]] = fb;
                        self.next[cycle[i]] =
                            cycle[if i == k1 + 1 + k2 { k1 + 2 } else { i + 1 }];
                    }
                    out.split_hole = Some(fb);
                } else if k1 > 0 {
                    out.closed_holes.push(hole);
                }
            }
            PeelingEvent::L { config } => {
                let m_len = config.len();
                if m_len == 0 || config[0] != LoopSide::Out {
                    return Err(LoopMapError::Domain(
                        "ring config must be nonempty and start with an out-triangle".into(),
                    ));
                }
                let a = self.prev_in_face(e);
                let b = self.next[e];
                let loop_id = self.loops.len();
                // Triangles T_0..T_{m−1}; each face cycle base → sp → sq,
                // twin(sp_i) = sq_{i+1}.
                let mut bases = Vec::with_capacity(m_len);
                let mut sps = Vec::with_capacity(m_len);
                let mut sqs = Vec::with_capacity(m_len);
                let mut ring = Vec::with_capacity(m_len);
                for (i, &side) in config.iter().enumerate() {
                    let fid = self.faces.len();
                    self.faces.push(FaceKind::LoopTriangle { loop_id, side });
                    ring.push((fid, side));
                    let base = if i == 0 {
                        self.face_of[e] = fid;
                        e
                    } else {
                        self.alloc_halfedges(1, fid)[0]
                    };
                    let sp = self.alloc_halfedges(1, fid)[0];
                    let sq = self.alloc_halfedges(1, fid)[0];
                    // the triangle cycle winds oppositely depending on which
                    // boundary of the annulus carries the base
                    if side == LoopSide::Out {
                        self.next[base] = sp;
                        self.next[sp] = sq;
                        self.next[sq] = base;
                    } else {
                        self.next[base] = sq;
                        self.next[sq] = sp;
                        self.next[sp] = base;
                    }
                    bases.push(base);
                    sps.push(sp);
                    sqs.push(sq);
                }
                for i in 0..m_len {
                    let j = (i + 1) % m_len;
                    self.twin[sps[i]] = sqs[j];
                    self.twin[sqs[j]] = sps[i];
                }
                self.loops.push(ring);
                // twins of the bases: outer bases join the peeling hole,
                // inner bases bound the ring's interior.
                let mut outer_new = Vec::new();
                let mut inner_new = Vec::new();
                for (i, &side) in config.iter().enumerate() {
                    if i == 0 {
                        continue;
                    }
                    let w = self.alloc_halfedges(1, usize::MAX)[0];
                    self.twin[w] = bases[i];
                    self.twin[bases[i]] = w;
                    match side {
                        LoopSide::Out => outer_new.push(w),
                        LoopSide::In => inner_new.push(w),
                    }
                }
                // outer hole: a → w_last … w_first → b (reverse ring order)
                if outer_new.is_empty() && l == 1 {
                    self.close_hole(hole);
                    out.closed_holes.push(hole);
                } else {
                    for &w in &outer_new {
                        self.face_of[w] = hole;
                    }
                    let mut cur = if l == 1 { *outer_new.last().unwrap() } else { a };
                    for &w in outer_new.iter().rev() {
                        if cur != w {
                            self.next[cur] = w;
                        }
                        cur = w;
                    }
                    self.next[cur] = if l == 1 { *outer_new.last().unwrap() } else { b };
                    let dist = outer_new.last().copied().unwrap_or(b);
                    self.faces[hole] = FaceKind::Hole { distinguished: dist };
                    out.outer_hole = Some(hole);
                }
                // inner hole: w's in ring order
                if inner_new.is_empty() {
                    // all-out ring seals a vertex at the ring's hub
                    out.sealed_vertex_edge = Some(sps[0]);
                } else {
                    let fid = self.faces.len();
                    self.faces.push(FaceKind::Hole { distinguished: inner_new[0] });
                    for (idx, &w) in inner_new.iter().enumerate() {
                        self.face_of[w] = fid;
                        self.next[w] = inner_new[(idx + 1) % inner_new.len()];
                    }
                    out.inner_hole = Some(fid);
                }
            }
        }
        Ok(out)
    }

    /// Number of vertices (orbits of the derived rotation).
    pub fn num_vertices(&self) -> usize {
        self.vertex_ids().1
    }

    /// Per-half-edge origin-vertex ids and the vertex count.
    pub fn vertex_ids(&self) -> (Vec<usize>, usize) {
        let n = self.twin.len();
        let mut id = vec![usize::MAX; n];
        let mut count = 0;
        for h in 0..n {
            if !self.alive[h] || id[h] != usize::MAX {
                continue;
            }
            let mut cur = h;
            loop {
                id[cur] = count;
                cur = self.next[self.twin[cur]];
                if cur == h {
                    break;
                }
            }
            count += 1;
        }
        (id, count)
    }

    pub fn num_edges(&self) -> usize {
        self.num_half_edges_alive() / 2
    }

    pub fn num_faces(&self) -> usize {
        self.faces.iter().filter(|k| !matches!(k, FaceKind::Dead)).count()
    }

    /// True when no holes remain.
    pub fn is_closed(&self) -> bool {
        self.holes().is_empty()
    }

    /// Structural sanity: involution/permutation consistency, face labels
    /// matching `next`-orbits, the Euler relation on closed maps, and hole
    /// simplicity / pairwise vertex-disjointness.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.twin.len();
        for h in 0..n {
            if !self.alive[h] {
                continue;
            }
            if self.twin[h] == h || !self.alive[self.twin[h]] || self.twin[self.twin[h]] != h {
                return Err(LoopMapError::Structure(format!("bad involution at {h}")));
            }
            if !self.alive[self.next[h]] {
                return Err(LoopMapError::Structure(format!("next({h}) is dead")));
            }
            if self.face_of[self.next[h]] != self.face_of[h] {
                return Err(LoopMapError::Structure(format!(
                    "face mismatch along {h} → {}",
                    self.next[h]
                )));
            }
        }
        // next must be a permutation of the alive set
        let mut seen = vec![false; n];
        for h in 0..n {
            if self.alive[h] {
                if seen[self.next[h]] {
                    return Err(LoopMapError::Structure("next is not injective".into()));
                }
                seen[self.next[h]] = true;
            }
        }
        // Euler characteristic of the (partially explored) sphere
        let v = self.num_vertices() as i64;
        let e = self.num_edges() as i64;
        let f = self.num_faces() as i64;
        if v - e + f != 2 {
            return Err(LoopMapError::Structure(format!(
                "Euler relation violated: V−E+F = {}",
                v - e + f
            )));
        }
        // holes simple and pairwise vertex-disjoint
        let (vid, _) = self.vertex_ids();
        let mut owner: HashMap<usize, usize> = HashMap::new();
        for hole in self.holes() {
            for h in self.face_cycle(hole) {
                let vtx = vid[h];
                if let Some(&prev) = owner.get(&vtx) {
                    if prev == hole {
                        return Err(LoopMapError::Structure(format!(
                            "hole {hole} is not simple at vertex {vtx}"
                        )));
                    }
                    return Err(LoopMapError::Structure(format!(
                        "holes {prev} and {hole} share vertex {vtx}"
                    )));
                }
                owner.insert(vtx, hole);
            }
        }
        Ok(())
    }

    /// Renumber half-edges densely (dropping dead ones) and faces in
    /// first-appearance order; canonical form used by serialization.
    pub fn compact(&self) -> LoopDecoratedMap {
        let n = self.twin.len();
        let mut remap = vec![usize::MAX; n];
        let mut count = 0;
        for h in 0..n {
            if self.alive[h] {
                remap[h] = count;
                count += 1;
            }
        }
        let mut twin = vec![0; count];
        let mut next = vec![0; count];
        let mut face_tmp = vec![usize::MAX; count];
        let mut face_remap: HashMap<usize, usize> = HashMap::new();
        let mut faces = Vec::new();
        for h in 0..n {
            if !self.alive[h] {
                continue;
            }
            let nh = remap[h];
            twin[nh] = remap[self.twin[h]];
            next[nh] = remap[self.next[h]];
            let of = self.face_of[h];
            let nf = *face_remap.entry(of).or_insert_with(|| {
                let kind = match &self.faces[of] {
                    FaceKind::Hole { distinguished } => FaceKind::Hole {
                        distinguished: remap[*distinguished],
                    },
                    k => k.clone(),
                };
                faces.push(kind);
                faces.len() - 1
            });
            face_tmp[nh] = nf;
        }
        let loops = self
            .loops
            .iter()
            .map(|ring| {
                ring.iter()
                    .map(|&(f, s)| (*face_remap.get(&f).expect("ring face alive"), s))
                    .collect()
            })
            .collect();
        LoopDecoratedMap {
            twin,
            next,
            face_of: face_tmp,
            alive: vec![true; count],
            faces,
            root: remap[self.root],
            loops,
        }
    }

    /// `LDM v1` serialization: involution and derived vertex rotation as
    /// newline-separated integers, then root, holes, loops.
    pub fn to_text(&self) -> String {
        let m = self.compact();
        let n = m.twin.len();
        let mut s = String::from("LDM v1\n");
        let _ = writeln!(s, "half_edges {n}");
        for h in 0..n {
            let _ = writeln!(s, "{}", m.twin[h]);
        }
        for h in 0..n {
            // rotation: next half-edge counterclockwise around origin(h)
            let _ = writeln!(s, "{}", m.next[m.twin[h]]);
        }
        let _ = writeln!(s, "root {}", m.root);
        let holes = m.holes();
        let _ = writeln!(s, "holes {}", holes.len());
        for f in holes {
            let dist = match m.faces[f] {
                FaceKind::Hole { distinguished } => distinguished,
                _ => unreachable!(),
            };
            let _ = writeln!(s, "{f} {dist}");
        }
        let _ = writeln!(s, "loops {}", m.loops.len());
        for ring in &m.loops {
            let toks: Vec<String> = ring
                .iter()
                .map(|&(f, side)| {
                    format!("{f} {}", if side == LoopSide::In { "in" } else { "out" })
                })
                .collect();
            let _ = writeln!(s, "{}", toks.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("LDM v1") {
            return Err(LoopMapError::Format("expected `LDM v1` header".into()));
        }
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("half_edges "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| LoopMapError::Format("bad half_edges line".into()))?;
        let mut read_int = |what: &str| -> Result<usize> {
            lines
                .next()
                .and_then(|l| l.trim().parse().ok())
                .ok_or_else(|| LoopMapError::Format(format!("bad {what}")))
        };
        let twin: Vec<usize> = (0..n)
            .map(|_| read_int("involution entry"))
            .collect::<Result<_>>()?;
        let rot: Vec<usize> = (0..n)
            .map(|_| read_int("rotation entry"))
            .collect::<Result<_>>()?;
        // rotation σ(h) = next(twin(h))  ⇒  next(h) = σ(twin(h))
        let mut next = vec![0; n];
        for h in 0..n {
            next[h] = rot[twin[h]];
        }
        let root: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("root "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| LoopMapError::Format("bad root line".into()))?;
        // rebuild faces as next-orbits, numbered in first-appearance order
        let mut face_of = vec![usize::MAX; n];
        let mut nfaces = 0;
        for h in 0..n {
            if face_of[h] != usize::MAX {
                continue;
            }
            let mut cur = h;
            loop {
                face_of[cur] = nfaces;
                cur = next[cur];
                if cur == h {
                    break;
                }
            }
            nfaces += 1;
        }
        let mut faces = vec![FaceKind::Inner; nfaces];
        faces[face_of[root]] = FaceKind::Root;
        let nholes: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("holes "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| LoopMapError::Format("bad holes line".into()))?;
        for _ in 0..nholes {
            let line = lines
                .next()
                .ok_or_else(|| LoopMapError::Format("truncated holes".into()))?;
            let mut it = line.split_whitespace();
            let f: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| LoopMapError::Format("bad hole face".into()))?;
            let dist: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| LoopMapError::Format("bad hole edge".into()))?;
            faces[f] = FaceKind::Hole { distinguished: dist };
        }
        let nloops: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("loops "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| LoopMapError::Format("bad loops line".into()))?;
        let mut loops = Vec::with_capacity(nloops);
        for loop_id in 0..nloops {
            let line = lines
                .next()
                .ok_or_else(|| LoopMapError::Format("truncated loops".into()))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let mut ring = Vec::new();
            for pair in toks.chunks(2) {
                let f: usize = pair[0]
                    .parse()
                    .map_err(|_| LoopMapError::Format("bad ring face".into()))?;
                let side = match pair.get(1) {
                    Some(&"in") => LoopSide::In,
                    Some(&"out") => LoopSide::Out,
                    _ => return Err(LoopMapError::Format("bad ring flag".into())),
                };
                faces[f] = FaceKind::LoopTriangle { loop_id, side };
                ring.push((f, side));
            }
            loops.push(ring);
        }
        Ok(LoopDecoratedMap {
            twin,
            next,
            face_of,
            alive: vec![true; n],
            faces,
            root,
            loops,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hollow_map_is_consistent() {
        for p in 1..6 {
            let m = LoopDecoratedMap::hollow(p).unwrap();
            m.check_invariants().unwrap();
            assert_eq!(m.num_vertices(), p);
            assert_eq!(m.num_edges(), p);
            assert_eq!(m.hole_degree(1), p);
        }
    }

    #[test]
    fn monogon_closes_perimeter_one() {
        // p=1, C₁ seals the hole in one event; the closed map is the
        // single edge with a monogon on each side: V=1, E=1, F=2.
        let mut m = LoopDecoratedMap::hollow(1).unwrap();
        let e = m.peel_edge().unwrap();
        let out = m.apply_event(e, &PeelingEvent::C { k: 1 }).unwrap();
        assert_eq!(out.closed_holes, vec![1]);
        assert!(m.is_closed());
        m.check_invariants().unwrap();
        assert_eq!(m.num_vertices(), 1);
        assert_eq!(m.num_edges(), 1);
    }

    #[test]
    fn g00_closes_perimeter_two() {
        let mut m = LoopDecoratedMap::hollow(2).unwrap();
        let e = m.peel_edge().unwrap();
        m.apply_event(e, &PeelingEvent::G { k1: 0, k2: 0 }).unwrap();
        assert!(m.is_closed());
        m.check_invariants().unwrap();
        assert_eq!(m.num_vertices(), 2);
        assert_eq!(m.num_edges(), 1);
    }

    #[test]
    fn c_event_degree_bookkeeping() {
        let mut m = LoopDecoratedMap::hollow(3).unwrap();
        let e = m.peel_edge().unwrap();
        let out = m.apply_event(e, &PeelingEvent::C { k: 4 }).unwrap();
        let hole = out.outer_hole.unwrap();
        assert_eq!(m.hole_degree(hole), 3 + 4 - 2);
        m.check_invariants().unwrap();
    }

    #[test]
    fn all_out_ring_seals_vertex() {
        // p=2, ring of 3 all-out triangles: perimeter 2 → 2+3−2 = 3,
        // a vertex sealed at the hub
        let mut m = LoopDecoratedMap::hollow(2).unwrap();
        let e = m.peel_edge().unwrap();
        let out = m
            .apply_event(
                e,
                &PeelingEvent::L {
                    config: vec![LoopSide::Out, LoopSide::Out, LoopSide::Out],
                },
            )
            .unwrap();
        assert!(out.sealed_vertex_edge.is_some());
        assert!(out.inner_hole.is_none());
        assert_eq!(m.hole_degree(out.outer_hole.unwrap()), 3);
        m.check_invariants().unwrap();
        assert_eq!(m.loops.len(), 1);
    }

    #[test]
    fn mixed_ring_opens_inner_hole() {
        let mut m = LoopDecoratedMap::hollow(3).unwrap();
        let e = m.peel_edge().unwrap();
        let config = vec![LoopSide::Out, LoopSide::In, LoopSide::Out, LoopSide::In];
        let out = m.apply_event(e, &PeelingEvent::L { config }).unwrap();
        let inner = out.inner_hole.unwrap();
        assert_eq!(m.hole_degree(inner), 2);
        assert_eq!(m.hole_degree(out.outer_hole.unwrap()), 3 + 2 - 2);
        m.check_invariants().unwrap();
    }

    #[test]
    fn g_split_partitions_hole() {
        let mut m = LoopDecoratedMap::hollow(4).unwrap();
        // grow the hole to degree 6 first
        let e = m.peel_edge().unwrap();
        let out = m.apply_event(e, &PeelingEvent::C { k: 4 }).unwrap();
        let hole = out.outer_hole.unwrap();
        assert_eq!(m.hole_degree(hole), 6);
        let e = m.peel_edge().unwrap();
        let out = m.apply_event(e, &PeelingEvent::G { k1: 3, k2: 1 }).unwrap();
        m.check_invariants().unwrap();
        assert_eq!(m.hole_degree(out.outer_hole.unwrap()), 3);
        assert_eq!(m.hole_degree(out.split_hole.unwrap()), 1);
    }

    #[test]
    fn long_mixed_rings_stay_planar() {
        for pattern in [
            vec![LoopSide::Out, LoopSide::In, LoopSide::In, LoopSide::Out, LoopSide::In],
            vec![LoopSide::Out, LoopSide::In],
            vec![
                LoopSide::Out,
                LoopSide::Out,
                LoopSide::In,
                LoopSide::In,
                LoopSide::In,
                LoopSide::Out,
                LoopSide::In,
            ],
        ] {
            let u = pattern.iter().filter(|&&s| s == LoopSide::In).count();
            let v = pattern.len() - u;
            let mut m = LoopDecoratedMap::hollow(4).unwrap();
            let e = m.peel_edge().unwrap();
            let out = m.apply_event(e, &PeelingEvent::L { config: pattern }).unwrap();
            m.check_invariants().unwrap();
            assert_eq!(m.hole_degree(out.inner_hole.unwrap()), u);
            assert_eq!(m.hole_degree(out.outer_hole.unwrap()), 4 + v - 2);
        }
    }

    #[test]
    fn serialization_roundtrip_preserves_structure() {
        let mut m = LoopDecoratedMap::hollow(3).unwrap();
        let e = m.peel_edge().unwrap();
        m.apply_event(
            e,
            &PeelingEvent::L {
                config: vec![LoopSide::Out, LoopSide::In, LoopSide::Out],
            },
        )
        .unwrap();
        let text = m.to_text();
        let back = LoopDecoratedMap::from_text(&text).unwrap();
        back.check_invariants().unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.num_vertices(), m.num_vertices());
        assert_eq!(back.loops.len(), 1);
        assert_eq!(back.holes().len(), m.holes().len());
    }
}
