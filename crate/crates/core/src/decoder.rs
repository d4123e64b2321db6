//! Minimum-weight perfect matching decoder and an exhaustive reference decoder.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::dem::{DetectorErrorModel, BOUNDARY};
use crate::error::{Error, Result};
use crate::matching::max_weight_matching;

/// Fixed-point scale of integer edge weights.
pub const WEIGHT_SCALE: f64 = 1.0e4;

/// Integer weight `ln((1 - p) / p)`, zero at `p = 1/2`.
pub fn edge_weight(p: f64) -> Result<i64> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::Decode(format!("edge probability {p} outside [0, 1/2]")));
    }
    if p <= 0.0 {
        // Never-occurring edges still need a finite, very large weight.
        return Ok((60.0 * WEIGHT_SCALE) as i64);
    }
    Ok((((1.0 - p) / p).ln() * WEIGHT_SCALE).round() as i64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Correction {
    pub observables: u32,
    pub logical: u8,
    pub weight: i64,
}

/// Decoding graph over the edges of a detector error model.
#[derive(Clone, Debug)]
pub struct Decoder {
    num_nodes: usize,
    adjacency: Vec<Vec<(u32, u32)>>,
    weights: Vec<i64>,
    observables: Vec<u32>,
    logical: Vec<u8>,
    boundary_edges: Vec<Vec<u32>>,
    to_boundary: Vec<Option<Reach>>,
    /// Number of nearest fired detectors each search looks for.
    pub neighbours: usize,
}

#[derive(Clone, Copy, Debug, Default)]
struct Reach {
    dist: i64,
    obs: u32,
    logical: u8,
}

/// Per-thread search buffers, reset by epoch counters instead of clearing.
#[derive(Default)]
struct Scratch {
    epoch: u64,
    shot: u64,
    best: Vec<(u64, Reach)>,
    done: Vec<u64>,
    fired: Vec<(u64, usize)>,
    erased: Vec<u64>,
    heap: BinaryHeap<Reverse<(i64, u32)>>,
}

impl Scratch {
    fn prepare(&mut self, n: usize, edges: usize) {
        if self.erased.len() < edges {
            self.erased.resize(edges, 0);
        }
        if self.best.len() < n {
            self.best.resize(n, (0, Reach::default()));
            self.done.resize(n, 0);
            self.fired.resize(n, (0, 0));
        }
    }
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Scratch> = std::cell::RefCell::new(Scratch::default());
}

impl Decoder {
    pub fn new(dem: &DetectorErrorModel) -> Result<Self> {
        let n = dem.num_detectors;
        let mut adjacency = vec![Vec::new(); n];
        let mut boundary_edges = vec![Vec::new(); n];
        let mut weights = Vec::with_capacity(dem.edges.len());
        for (k, e) in dem.edges.iter().enumerate() {
            weights.push(edge_weight(e.probability.min(0.5))?);
            if e.b == BOUNDARY {
                boundary_edges[e.a as usize].push(k as u32);
            } else {
                adjacency[e.a as usize].push((e.b, k as u32));
                adjacency[e.b as usize].push((e.a, k as u32));
            }
        }
        let mut dec = Decoder {
            num_nodes: n,
            adjacency,
            weights,
            observables: dem.edges.iter().map(|e| e.observables).collect(),
            logical: dem.edges.iter().map(|e| e.logical).collect(),
            boundary_edges,
            to_boundary: Vec::new(),
            neighbours: 10,
        };
        let ctx = Scratch { erased: vec![0; dec.weights.len()], shot: 1, ..Scratch::default() };
        dec.to_boundary = dec.boundary_paths(&ctx);
        Ok(dec)
    }

    pub fn with_neighbours(mut self, k: usize) -> Self {
        self.neighbours = k.max(1);
        self
    }

    fn weight(&self, k: u32, ctx: &Scratch) -> i64 {
        if ctx.erased[k as usize] == ctx.shot {
            0
        } else {
            self.weights[k as usize]
        }
    }

    /// Shortest path from every node to the boundary, by a multi-source search.
    fn boundary_paths(&self, ctx: &Scratch) -> Vec<Option<Reach>> {
        let mut best: Vec<Option<Reach>> = vec![None; self.num_nodes];
        let mut heap = BinaryHeap::new();
        for (u, ks) in self.boundary_edges.iter().enumerate() {
            for &k in ks {
                let d = self.weight(k, ctx);
                if best[u].is_none_or(|b| d < b.dist) {
                    best[u] = Some(Reach { dist: d, obs: self.observables[k as usize], logical: self.logical[k as usize] });
                    heap.push(Reverse((d, u as u32)));
                }
            }
        }
        let mut done = vec![false; self.num_nodes];
        while let Some(Reverse((d, u))) = heap.pop() {
            let ui = u as usize;
            if done[ui] {
                continue;
            }
            done[ui] = true;
            let r = best[ui].expect("queued nodes have a path");
            for &(v, k) in &self.adjacency[ui] {
                let vi = v as usize;
                let nd = d + self.weight(k, ctx);
                if !done[vi] && best[vi].is_none_or(|b| nd < b.dist) {
                    best[vi] = Some(Reach {
                        dist: nd,
                        obs: r.obs ^ self.observables[k as usize],
                        logical: r.logical ^ self.logical[k as usize],
                    });
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        best
    }

    /// Shortest paths from `src` to at most `want` fired detectors within `radius`.
    fn search(&self, src: u32, want: usize, radius: i64, ctx: &mut Scratch) -> Vec<(usize, Reach)> {
        ctx.epoch += 1;
        let epoch = ctx.epoch;
        let mut heap = std::mem::take(&mut ctx.heap);
        heap.clear();
        ctx.best[src as usize] = (epoch, Reach::default());
        heap.push(Reverse((0i64, src)));
        let mut found = Vec::new();
        while let Some(Reverse((d, u))) = heap.pop() {
            let ui = u as usize;
            if ctx.done[ui] == epoch {
                continue;
            }
            if found.len() >= want || d > radius {
                break;
            }
            ctx.done[ui] = epoch;
            let r = ctx.best[ui].1;
            if u != src && ctx.fired[ui].0 == ctx.shot {
                found.push((ctx.fired[ui].1, r));
            }
            for &(v, k) in &self.adjacency[ui] {
                let vi = v as usize;
                if ctx.done[vi] == epoch {
                    continue;
                }
                let nd = d + self.weight(k, ctx);
                let (seen, b) = ctx.best[vi];
                if seen != epoch || nd < b.dist {
                    ctx.best[vi] = (
                        epoch,
                        Reach {
                            dist: nd,
                            obs: r.obs ^ self.observables[k as usize],
                            logical: r.logical ^ self.logical[k as usize],
                        },
                    );
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        ctx.heap = heap;
        found
    }

    /// Decode fired detectors; `erased_edges` carry weight zero for this shot.
    pub fn decode(&self, detectors: &[u32], erased_edges: &[u32]) -> Result<Correction> {
        let m = detectors.len();
        if m == 0 {
            return Ok(Correction::default());
        }
        SCRATCH.with(|cell| {
            let mut ctx = cell.borrow_mut();
            ctx.prepare(self.num_nodes, self.weights.len());
            ctx.shot += 1;
            let shot = ctx.shot;
            for &k in erased_edges {
                if k as usize >= self.weights.len() {
                    return Err(Error::Decode(format!("erased edge {k} is not in the model")));
                }
                ctx.erased[k as usize] = shot;
            }
            for (slot, &d) in detectors.iter().enumerate() {
                if d as usize >= self.num_nodes {
                    return Err(Error::Decode(format!("detector {d} is not in the model")));
                }
                ctx.fired[d as usize] = (shot, slot);
            }
            let fresh;
            let bnd = if erased_edges.is_empty() {
                &self.to_boundary
            } else {
                fresh = self.boundary_paths(&ctx);
                &fresh
            };
            self.match_fired(detectors, bnd, &mut ctx)
        })
    }

    fn match_fired(&self, detectors: &[u32], bnd: &[Option<Reach>], ctx: &mut Scratch) -> Result<Correction> {
        let m = detectors.len();
        let to_boundary: Vec<Option<Reach>> = detectors.iter().map(|&d| bnd[d as usize]).collect();
        // A pair is only worth matching when it beats sending both ends to the boundary.
        let far = to_boundary.iter().map(|b| b.map_or(i64::MAX / 4, |r| r.dist)).max().unwrap_or(0);
        let mut pair: HashMap<(usize, usize), Reach> = HashMap::new();
        for (i, &d) in detectors.iter().enumerate() {
            let own = to_boundary[i].map_or(i64::MAX / 4, |r| r.dist);
            let found = self.search(d, self.neighbours.min(m - 1), own.saturating_add(far), ctx);
            for (j, r) in found {
                let key = (i.min(j), i.max(j));
                let e = pair.entry(key).or_insert(r);
                if r.dist < e.dist {
                    *e = r;
                }
            }
        }
        if m <= 2 {
            return self.small_case(detectors, &pair, &to_boundary);
        }
        // Two detectors sent to the boundary separately cost the same as one
        // edge between them, so the boundary reduces to a single virtual node
        // that only exists when the number of fired detectors is odd.
        let mut edges = Vec::with_capacity(m * (m + 1) / 2);
        let mut info: Vec<Reach> = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                let both = match (to_boundary[i], to_boundary[j]) {
                    (Some(a), Some(b)) => {
                        Some(Reach { dist: a.dist + b.dist, obs: a.obs ^ b.obs, logical: a.logical ^ b.logical })
                    }
                    _ => None,
                };
                let best = match (pair.get(&(i, j)).copied(), both) {
                    (Some(d), Some(b)) => Some(if b.dist < d.dist { b } else { d }),
                    (d, b) => d.or(b),
                };
                if let Some(r) = best {
                    edges.push((i, j, r.dist));
                    info.push(r);
                }
            }
            if m % 2 == 1 {
                if let Some(r) = to_boundary[i] {
                    edges.push((i, m, r.dist));
                    info.push(r);
                }
            }
        }
        let big = edges.iter().map(|e| e.2).max().unwrap_or(0) + 1;
        let weighted: Vec<(usize, usize, i64)> = edges.iter().map(|&(i, j, w)| (i, j, big - w)).collect();
        let mate = max_weight_matching(&weighted, true);
        let mut out = Correction::default();
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            if mate.get(i).copied().flatten() == Some(j) {
                out.observables ^= info[k].obs;
                out.logical ^= info[k].logical;
                out.weight += info[k].dist;
            }
        }
        if (0..m).any(|i| mate.get(i).copied().flatten().is_none()) {
            let stuck: Vec<u32> = (0..m).filter(|&i| mate.get(i).copied().flatten().is_none()).map(|i| detectors[i]).collect();
            return Err(Error::Decode(format!("no perfect matching; unmatched detectors {stuck:?}")));
        }
        Ok(out)
    }
}

impl Decoder {
    /// One or two fired detectors: compare the direct path with both boundary paths.
    fn small_case(
        &self,
        detectors: &[u32],
        pair: &HashMap<(usize, usize), Reach>,
        to_boundary: &[Option<Reach>],
    ) -> Result<Correction> {
        let as_corr = |r: Reach| Correction { observables: r.obs, logical: r.logical, weight: r.dist };
        let via_boundary = match to_boundary {
            [Some(a)] => Some(as_corr(*a)),
            [Some(a), Some(b)] => {
                Some(Correction { observables: a.obs ^ b.obs, logical: a.logical ^ b.logical, weight: a.dist + b.dist })
            }
            _ => None,
        };
        let direct = pair.get(&(0, 1)).map(|r| as_corr(*r));
        match (direct, via_boundary) {
            (Some(d), Some(b)) => Ok(if b.weight < d.weight { b } else { d }),
            (Some(d), None) => Ok(d),
            (None, Some(b)) => Ok(b),
            (None, None) => Err(Error::Decode(format!("no perfect matching; unmatched detectors {detectors:?}"))),
        }
    }
}

/// Result of the exhaustive decoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub weight: i64,
    /// The lexicographically first optimal subset of edges.
    pub edges: Vec<u32>,
    /// Observable masks reached by any optimal subset.
    pub optimal_observables: Vec<u32>,
}

/// Minimum-weight subset of edges whose boundary equals the syndrome, by exhaustion.
pub fn oracle_decode(dem: &DetectorErrorModel, detectors: &[u32], erased_edges: &[u32]) -> Result<OracleResult> {
    let n = dem.edges.len();
    if n > 24 {
        return Err(Error::Decode(format!("oracle limited to 24 edges, model has {n}")));
    }
    let mut target = 0u64;
    for &d in detectors {
        target ^= 1 << d;
    }
    let mut masks = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for (k, e) in dem.edges.iter().enumerate() {
        let mut m = 1u64 << e.a;
        if e.b != BOUNDARY {
            m ^= 1 << e.b;
        }
        masks.push(m);
        w.push(if erased_edges.contains(&(k as u32)) { 0 } else { edge_weight(e.probability)? });
    }
    let mut best: Option<(i64, u32)> = None;
    let mut optimal = Vec::new();
    for subset in 0u32..(1u32 << n) {
        let mut s = 0u64;
        let mut wt = 0i64;
        let mut obs = 0u32;
        let mut rest = subset;
        while rest != 0 {
            let k = rest.trailing_zeros() as usize;
            s ^= masks[k];
            wt += w[k];
            obs ^= dem.edges[k].observables;
            rest &= rest - 1;
        }
        if s != target {
            continue;
        }
        match best {
            Some((bw, _)) if wt > bw => {}
            Some((bw, _)) if wt == bw => {
                if !optimal.contains(&obs) {
                    optimal.push(obs);
                }
            }
            _ => {
                best = Some((wt, subset));
                optimal = vec![obs];
            }
        }
    }
    let (weight, subset) = best.ok_or_else(|| Error::Decode("no subset of mechanisms explains the syndrome".into()))?;
    optimal.sort_unstable();
    // Lexicographic order on edge index lists.
    let edges = (0..n as u32).filter(|&k| subset >> k & 1 == 1).collect();
    Ok(OracleResult { weight, edges, optimal_observables: optimal })
}
