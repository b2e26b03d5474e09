//! Initial placement: min-cut partitioning of the interaction graph,
//! partition-to-chip assignment, and id-ordered packing within chips.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{ChipId, Topology};
use crate::circuit::{GateDag, QubitId};
use crate::error::{Error, Result};
use crate::layout::Layout;

/// Qubits as nodes, CNOT multiplicity as edge weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    adj: Vec<Vec<(usize, u64)>>,
}

impl InteractionGraph {
    pub fn from_dag(dag: &GateDag) -> Self {
        let edges: Vec<_> = dag
            .gates
            .iter()
            .filter(|g| g.is_cnot())
            .map(|g| {
                let (a, b) = g.pair();
                (a, b, 1)
            })
            .collect();
        Self::from_edges(dag.qubit_count, &edges)
    }

    /// Parallel edges accumulate; self loops are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize, u64)]) -> Self {
        let mut adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            if u == v || w == 0 {
                continue;
            }
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            let mut merged: Vec<(usize, u64)> = Vec::with_capacity(list.len());
            for &(v, w) in list.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == v => last.1 += w,
                    _ => merged.push((v, w)),
                }
            }
            *list = merged;
        }
        InteractionGraph { adj }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, u64)] {
        &self.adj[u]
    }

    pub fn weight(&self, u: usize, v: usize) -> u64 {
        self.adj[u]
            .binary_search_by_key(&v, |e| e.0)
            .map(|i| self.adj[u][i].1)
            .unwrap_or(0)
    }

    pub fn cut_weight(&self, part: &[usize]) -> u64 {
        let mut cut = 0;
        for (u, list) in self.adj.iter().enumerate() {
            for &(v, w) in list {
                if u < v && part[u] != part[v] {
                    cut += w;
                }
            }
        }
        cut
    }

    /// Total weight between each pair of parts.
    pub fn part_weights(&self, part: &[usize], parts: usize) -> Vec<Vec<u64>> {
        let mut m = vec![vec![0u64; parts]; parts];
        for (u, list) in self.adj.iter().enumerate() {
            for &(v, w) in list {
                if u < v && part[u] != part[v] {
                    m[part[u]][part[v]] += w;
                    m[part[v]][part[u]] += w;
                }
            }
        }
        m
    }
}

/// Weighted graph used inside the multilevel bisection.
#[derive(Debug, Clone)]
struct Level {
    vw: Vec<u64>,
    adj: Vec<Vec<(usize, u64)>>,
}

impl Level {
    fn induced(g: &InteractionGraph, nodes: &[usize]) -> Self {
        let mut local = vec![usize::MAX; g.node_count()];
        for (i, &u) in nodes.iter().enumerate() {
            local[u] = i;
        }
        let adj = nodes
            .iter()
            .map(|&u| {
                g.neighbors(u)
                    .iter()
                    .filter(|&&(v, _)| local[v] != usize::MAX)
                    .map(|&(v, w)| (local[v], w))
                    .collect()
            })
            .collect();
        Level {
            vw: vec![1; nodes.len()],
            adj,
        }
    }

    fn len(&self) -> usize {
        self.vw.len()
    }

    fn cut(&self, side: &[u8]) -> u64 {
        let mut cut = 0;
        for (u, list) in self.adj.iter().enumerate() {
            for &(v, w) in list {
                if u < v && side[u] != side[v] {
                    cut += w;
                }
            }
        }
        cut
    }

    /// Heavy-edge matching. Returns the coarse level and fine→coarse map.
    fn coarsen(&self, max_vw: u64, rng: &mut ChaCha8Rng) -> (Level, Vec<usize>) {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut mate = vec![usize::MAX; n];
        for &u in &order {
            if mate[u] != usize::MAX {
                continue;
            }
            let best = self.adj[u]
                .iter()
                .filter(|&&(v, _)| mate[v] == usize::MAX && v != u && self.vw[u] + self.vw[v] <= max_vw)
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
            match best {
                Some(&(v, _)) => {
                    mate[u] = v;
                    mate[v] = u;
                }
                None => mate[u] = u,
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut vw = Vec::new();
        for u in 0..n {
            if map[u] == usize::MAX {
                map[u] = vw.len();
                map[mate[u]] = vw.len();
                vw.push(self.vw[u] + if mate[u] != u { self.vw[mate[u]] } else { 0 });
            }
        }
        let mut adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); vw.len()];
        for u in 0..n {
            for &(v, w) in &self.adj[u] {
                let (cu, cv) = (map[u], map[v]);
                if cu != cv {
                    adj[cu].push((cv, w));
                }
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            let mut merged: Vec<(usize, u64)> = Vec::with_capacity(list.len());
            for &(v, w) in list.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == v => last.1 += w,
                    _ => merged.push((v, w)),
                }
            }
            *list = merged;
        }
        (Level { vw, adj }, map)
    }
}

fn violation(w: u64, lo: u64, hi: u64) -> u64 {
    if w < lo {
        lo - w
    } else {
        w.saturating_sub(hi)
    }
}

/// Greedy graph growing: side 0 grows from a random seed by best gain until
/// it reaches `target` weight.
fn grow(level: &Level, target: u64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = level.len();
    let mut side = vec![1u8; n];
    let mut w0 = 0;
    let mut gain = vec![0i64; n];
    for (u, g) in gain.iter_mut().enumerate() {
        *g = -(level.adj[u].iter().map(|e| e.1 as i64).sum::<i64>());
    }
    let mut frontier = vec![false; n];
    let seed = rng.gen_range(0..n);
    frontier[seed] = true;
    while w0 < target {
        let pick = (0..n)
            .filter(|&u| side[u] == 1 && w0 + level.vw[u] <= target)
            .max_by(|&a, &b| (frontier[a], gain[a]).cmp(&(frontier[b], gain[b])).then(b.cmp(&a)));
        let Some(u) = pick else { break };
        side[u] = 0;
        w0 += level.vw[u];
        for &(v, w) in &level.adj[u] {
            gain[v] += 2 * w as i64;
            frontier[v] = true;
        }
    }
    side
}

/// Fiduccia–Mattheyses passes with rollback to the best prefix. Side-0
/// weight must end in `[lo, hi]` whenever it can.
fn refine(level: &Level, side: &mut [u8], lo: u64, hi: u64) {
    let n = level.len();
    let slack = level.vw.iter().copied().max().unwrap_or(1);
    for _ in 0..12 {
        let mut w0: u64 = (0..n).filter(|&u| side[u] == 0).map(|u| level.vw[u]).sum();
        let mut gain = vec![0i64; n];
        for u in 0..n {
            for &(v, w) in &level.adj[u] {
                gain[u] += if side[u] != side[v] { w as i64 } else { -(w as i64) };
            }
        }
        let mut cut = level.cut(side) as i64;
        let mut locked = vec![false; n];
        let mut moves = Vec::new();
        let start = (violation(w0, lo, hi), cut);
        let mut best = start;
        let mut best_len = 0;
        loop {
            let cur_v = violation(w0, lo, hi);
            let mut pick: Option<(usize, i64)> = None;
            for u in 0..n {
                if locked[u] {
                    continue;
                }
                let nw = if side[u] == 0 {
                    w0 - level.vw[u]
                } else {
                    w0 + level.vw[u]
                };
                let nv = violation(nw, lo, hi);
                if nv > slack && nv >= cur_v {
                    continue;
                }
                if pick.is_none_or(|(_, g)| gain[u] > g) {
                    pick = Some((u, gain[u]));
                }
            }
            let Some((u, g)) = pick else { break };
            locked[u] = true;
            cut -= g;
            if side[u] == 0 {
                w0 -= level.vw[u];
            } else {
                w0 += level.vw[u];
            }
            side[u] ^= 1;
            gain[u] = -gain[u];
            for &(v, w) in &level.adj[u] {
                gain[v] += if side[u] == side[v] {
                    -2 * w as i64
                } else {
                    2 * w as i64
                };
            }
            moves.push(u);
            let state = (violation(w0, lo, hi), cut);
            if state < best {
                best = state;
                best_len = moves.len();
            }
        }
        for &u in moves[best_len..].iter().rev() {
            side[u] ^= 1;
        }
        if best >= start {
            break;
        }
    }
}

/// Multilevel bisection of `level` with side-0 weight in `[lo, hi]`.
fn bisect(level: &Level, lo: u64, hi: u64, target: u64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let total: u64 = level.vw.iter().sum();
    let mut levels = vec![level.clone()];
    let mut maps = Vec::new();
    let max_vw = (total / 12).max(1);
    while levels.last().unwrap().len() > 24 {
        let (coarse, map) = levels.last().unwrap().coarsen(max_vw, rng);
        if coarse.len() * 20 > levels.last().unwrap().len() * 19 {
            break;
        }
        levels.push(coarse);
        maps.push(map);
    }
    let coarsest = levels.last().unwrap();
    let mut best: Option<(u64, u64, Vec<u8>)> = None;
    for _ in 0..4 {
        let mut side = grow(coarsest, target, rng);
        refine(coarsest, &mut side, lo, hi);
        let w0: u64 = (0..coarsest.len())
            .filter(|&u| side[u] == 0)
            .map(|u| coarsest.vw[u])
            .sum();
        let key = (violation(w0, lo, hi), coarsest.cut(&side));
        if best.as_ref().is_none_or(|b| key < (b.0, b.1)) {
            best = Some((key.0, key.1, side));
        }
    }
    let mut side = best.unwrap().2;
    for i in (0..maps.len()).rev() {
        let fine = &levels[i];
        side = (0..fine.len()).map(|u| side[maps[i][u]]).collect();
        refine(fine, &mut side, lo, hi);
    }
    side
}

fn split_rec(
    g: &InteractionGraph,
    nodes: Vec<usize>,
    first_part: usize,
    parts: usize,
    capacity: usize,
    rng: &mut ChaCha8Rng,
    out: &mut [usize],
) {
    if parts == 1 || nodes.is_empty() {
        for u in nodes {
            out[u] = first_part;
        }
        return;
    }
    let p1 = parts / 2;
    let p2 = parts - p1;
    let m = nodes.len() as u64;
    let cap1 = (p1 * capacity) as u64;
    let cap2 = (p2 * capacity) as u64;
    let lo = m.saturating_sub(cap2);
    let hi = cap1.min(m);
    let target = ((m * p1 as u64 + parts as u64 / 2) / parts as u64).clamp(lo, hi);
    let level = Level::induced(g, &nodes);
    let mut best: Option<(u64, u64, Vec<u8>)> = None;
    for _ in 0..3 {
        let side = bisect(&level, lo, hi, target, rng);
        let w0 = side.iter().filter(|&&s| s == 0).count() as u64;
        let key = (violation(w0, lo, hi), level.cut(&side));
        if best.as_ref().is_none_or(|b| key < (b.0, b.1)) {
            best = Some((key.0, key.1, side));
        }
    }
    let side = best.unwrap().2;
    let (a, b): (Vec<_>, Vec<_>) = nodes.iter().enumerate().partition(|(i, _)| side[*i] == 0);
    let a: Vec<usize> = a.into_iter().map(|(_, &u)| u).collect();
    let b: Vec<usize> = b.into_iter().map(|(_, &u)| u).collect();
    split_rec(g, a, first_part, p1, capacity, rng, out);
    split_rec(g, b, first_part + p1, p2, capacity, rng, out);
}

/// Greedy k-way polish after recursive bisection: apply the best
/// cut-reducing single move or pairwise swap until none is left.
fn refine_kway(g: &InteractionGraph, part: &mut [usize], parts: usize, capacity: usize) {
    let n = part.len();
    let mut conn = vec![vec![0i64; parts]; n];
    let mut size = vec![0usize; parts];
    for u in 0..n {
        size[part[u]] += 1;
        for &(v, w) in g.neighbors(u) {
            conn[u][part[v]] += w as i64;
        }
    }
    let relocate = |conn: &mut Vec<Vec<i64>>, part: &mut [usize], u: usize, to: usize| {
        let from = part[u];
        part[u] = to;
        for &(v, w) in g.neighbors(u) {
            conn[v][from] -= w as i64;
            conn[v][to] += w as i64;
        }
    };
    for _ in 0..4 * n {
        let mut best: (i64, usize, usize, Option<usize>) = (0, 0, 0, None);
        for u in 0..n {
            let p = part[u];
            for q in 0..parts {
                if q != p && size[q] < capacity {
                    let gain = conn[u][q] - conn[u][p];
                    if gain > best.0 {
                        best = (gain, u, q, None);
                    }
                }
            }
            for v in u + 1..n {
                let q = part[v];
                if q == p {
                    continue;
                }
                let gain = conn[u][q] - conn[u][p] + conn[v][p] - conn[v][q] - 2 * g.weight(u, v) as i64;
                if gain > best.0 {
                    best = (gain, u, q, Some(v));
                }
            }
        }
        if best.0 <= 0 {
            break;
        }
        let (_, u, q, swap) = best;
        let p = part[u];
        relocate(&mut conn, part, u, q);
        match swap {
            Some(v) => relocate(&mut conn, part, v, p),
            None => {
                size[p] -= 1;
                size[q] += 1;
            }
        }
    }
}

/// Split qubits into `parts` groups of at most `capacity`, heuristically
/// minimizing cut weight. Deterministic for a given seed.
pub fn partition_mincut(g: &InteractionGraph, parts: usize, capacity: usize, seed: u64) -> Result<Vec<usize>> {
    let n = g.node_count();
    if parts == 0 || parts * capacity < n {
        return Err(Error::Mapping(format!(
            "{n} qubits do not fit in {parts} parts of capacity {capacity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; n];
    split_rec(g, (0..n).collect(), 0, parts, capacity, &mut rng, &mut out);
    if parts > 2 {
        refine_kway(g, &mut out, parts, capacity);
    }
    let mut sizes = vec![0; parts];
    for &p in &out {
        sizes[p] += 1;
    }
    if sizes.iter().any(|&s| s > capacity) {
        return Err(Error::Mapping("partitioner could not meet part capacities".into()));
    }
    Ok(out)
}

/// Σ w(p,q)·hops(chip(p), chip(q)) over part pairs.
pub fn assignment_cost(weights: &[Vec<u64>], assign: &[ChipId], topo: &Topology) -> u64 {
    let mut cost = 0;
    for p in 0..assign.len() {
        for q in p + 1..assign.len() {
            cost += weights[p][q] * topo.hops(assign[p], assign[q]) as u64;
        }
    }
    cost
}

/// Place parts on distinct chips minimizing weighted hop distance: exact
/// branch and bound up to 9 chips, simulated annealing beyond.
pub fn assign_chips(weights: &[Vec<u64>], topo: &Topology, seed: u64) -> Result<Vec<ChipId>> {
    let parts = weights.len();
    let chips = topo.chip_count();
    if parts > chips {
        return Err(Error::Mapping(format!("{parts} parts but only {chips} chips")));
    }
    if chips <= 9 {
        Ok(assign_exact(weights, topo))
    } else {
        Ok(assign_anneal(weights, topo, seed))
    }
}

struct Bnb<'a> {
    weights: &'a [Vec<u64>],
    topo: &'a Topology,
    order: Vec<usize>,
    assign: Vec<ChipId>,
    used: Vec<bool>,
    best: u64,
    best_assign: Vec<ChipId>,
}

impl Bnb<'_> {
    fn search(&mut self, depth: usize, partial: u64) {
        if depth == self.order.len() {
            if partial < self.best {
                self.best = partial;
                self.best_assign = self.assign.clone();
            }
            return;
        }
        // Each pair still open costs at least one hop.
        let mut bound = partial;
        for i in depth..self.order.len() {
            for j in 0..self.order.len() {
                if j < depth || j > i {
                    bound += self.weights[self.order[i]][self.order[j]];
                }
            }
        }
        if bound >= self.best {
            return;
        }
        let p = self.order[depth];
        for chip in 0..self.topo.chip_count() {
            if self.used[chip] {
                continue;
            }
            let mut add = 0;
            for &q in &self.order[..depth] {
                add += self.weights[p][q] * self.topo.hops(chip, self.assign[q]) as u64;
            }
            self.used[chip] = true;
            self.assign[p] = chip;
            self.search(depth + 1, partial + add);
            self.used[chip] = false;
        }
    }
}

fn assign_exact(weights: &[Vec<u64>], topo: &Topology) -> Vec<ChipId> {
    let parts = weights.len();
    let mut order: Vec<usize> = (0..parts).collect();
    order.sort_by_key(|&p| (std::cmp::Reverse(weights[p].iter().sum::<u64>()), p));
    let identity: Vec<ChipId> = (0..parts).collect();
    let mut bnb = Bnb {
        weights,
        topo,
        order,
        assign: vec![0; parts],
        used: vec![false; topo.chip_count()],
        best: assignment_cost(weights, &identity, topo) + 1,
        best_assign: identity,
    };
    bnb.search(0, 0);
    bnb.best_assign
}

fn assign_anneal(weights: &[Vec<u64>], topo: &Topology, seed: u64) -> Vec<ChipId> {
    let parts = weights.len();
    let chips = topo.chip_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a551);
    // slot_of[chip] = part or usize::MAX
    let mut perm: Vec<usize> = (0..chips).collect();
    let cost_of = |perm: &[usize]| assignment_cost(weights, &perm[..parts], topo) as f64;
    let mut cur = cost_of(&perm);
    let mut best = (cur, perm.clone());
    let iters = 20_000 * chips;
    let mut temp = (cur / parts.max(1) as f64).max(1.0);
    let cooling = (1e-3f64 / temp).powf(1.0 / iters as f64);
    for _ in 0..iters {
        let i = rng.gen_range(0..parts.max(1));
        let j = rng.gen_range(0..chips);
        if i == j {
            continue;
        }
        perm.swap(i, j);
        let next = cost_of(&perm);
        if next <= cur || rng.gen::<f64>() < ((cur - next) / temp).exp() {
            cur = next;
            if cur < best.0 {
                best = (cur, perm.clone());
            }
        } else {
            perm.swap(i, j);
        }
        temp *= cooling;
    }
    best.1[..parts].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mapper {
    #[default]
    Mincut,
    Trivial,
}

impl FromStr for Mapper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mincut" => Ok(Mapper::Mincut),
            "trivial" => Ok(Mapper::Trivial),
            other => Err(Error::Config(format!("unknown mapper `{other}`"))),
        }
    }
}

/// Qubits each chip receives: an even share, capped by compute capacity.
pub fn part_capacity(qubits: usize, topo: &Topology) -> Result<usize> {
    let chips = topo.chip_count();
    let cap = qubits.div_ceil(chips).min(topo.compute_qubits(0));
    if cap * chips < qubits {
        return Err(Error::Mapping(format!(
            "{qubits} qubits exceed {} compute qubits",
            chips * topo.compute_qubits(0)
        )));
    }
    Ok(cap)
}

/// Home chip of every qubit.
pub fn assign_qubits(dag: &GateDag, topo: &Topology, mapper: Mapper, seed: u64) -> Result<Vec<ChipId>> {
    let n = dag.qubit_count;
    let cap = part_capacity(n, topo)?;
    match mapper {
        Mapper::Trivial => Ok((0..n).map(|q: QubitId| q / cap.max(1)).collect()),
        Mapper::Mincut => {
            let g = InteractionGraph::from_dag(dag);
            let chips = topo.chip_count();
            let part = partition_mincut(&g, chips, cap, seed)?;
            let chip_of = assign_chips(&g.part_weights(&part, chips), topo, seed)?;
            Ok(part.iter().map(|&p| chip_of[p]).collect())
        }
    }
}

pub fn initial_layout(assignment: &[ChipId], topo: &Topology) -> Result<Layout> {
    Layout::initial(assignment, topo)
}

pub fn map_program(dag: &GateDag, topo: &Topology, mapper: Mapper, seed: u64) -> Result<Layout> {
    initial_layout(&assign_qubits(dag, topo, mapper, seed)?, topo)
}
