//! Multi-candidate block scheduling with a utility-driven lookahead window.
//!
//! The beam holds up to `w` partial schedules. Every CNOT is scheduled in
//! every candidate; a non-local CNOT branches each candidate once per
//! teleportation plan, plans are ranked by accumulated cost plus a decayed
//! estimate of what the remaining gates of the scheduling group will cost,
//! and the layer is pruned back to `w`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arch::{ChipId, Topology};
use crate::blockform::{block_cost_at, gate_qubits, min_block_cost, Blocks, CostParams};
use crate::circuit::{GateDag, GateId};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::layout::Layout;
use crate::route::{relocate, Program, Routing, Upcoming};
use crate::schedule::{Instr, Schedule};

/// Current block followed by up to `k` later blocks that share a qubit
/// with it. Non-overlapping blocks are skipped, not a reason to stop.
pub fn lookahead_window(blocks: &Blocks, current: usize, k: usize) -> Vec<usize> {
    let mut group = vec![current];
    let cur = &blocks.blocks[current];
    for b in &blocks.blocks[current + 1..] {
        if group.len() > k {
            break;
        }
        if b.qubits.iter().any(|q| cur.qubits.binary_search(q).is_ok()) {
            group.push(b.id);
        }
    }
    group
}

/// Frozen run of instructions shared by every candidate that descends
/// from it.
struct Segment {
    parent: Option<Arc<Segment>>,
    ops: Vec<Instr>,
}

impl Drop for Segment {
    fn drop(&mut self) {
        // Unlink iteratively so long chains do not overflow the stack.
        let mut next = self.parent.take();
        while let Some(seg) = next {
            match Arc::try_unwrap(seg) {
                Ok(mut s) => next = s.parent.take(),
                Err(_) => break,
            }
        }
    }
}

#[derive(Clone)]
struct Candidate {
    layout: Layout,
    cost: f64,
    key: f64,
    trail: Option<Arc<Segment>>,
    tail: Vec<Instr>,
    preferred: ChipId,
}

impl Candidate {
    fn freeze(&mut self) {
        if !self.tail.is_empty() {
            self.trail = Some(Arc::new(Segment {
                parent: self.trail.take(),
                ops: std::mem::take(&mut self.tail),
            }));
        }
    }

    fn instructions(&self) -> Vec<Instr> {
        let mut segs = Vec::new();
        let mut at = self.trail.as_deref();
        while let Some(s) = at {
            segs.push(&s.ops);
            at = s.parent.as_deref();
        }
        let mut out: Vec<Instr> = segs.into_iter().rev().flatten().cloned().collect();
        out.extend(self.tail.iter().cloned());
        out
    }
}

/// One scheduled layer, for plotting cumulative cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub layer: usize,
    pub gate: GateId,
    pub block: usize,
    pub expanded: usize,
    /// Accumulated cost of each surviving candidate, in beam order (lowest
    /// cost plus lookahead estimate first).
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct UmsOutcome {
    pub schedule: Schedule,
    /// Accumulated teleportation cost of the returned candidate.
    pub cost: f64,
    /// Width of the beam that produced it.
    pub width: usize,
    /// Final accumulated cost of every surviving candidate.
    pub finalists: Vec<f64>,
    pub trace: Vec<LayerTrace>,
}

/// A run of upcoming CNOTs priced together, with its decay weight.
struct Unit {
    gates: Vec<GateId>,
    weight: f64,
}

/// Decayed cost estimate of the upcoming units. Units are priced in
/// order, each at its cheapest chip given where the earlier units left
/// their qubits.
fn unit_cost(layout: &Layout, prog: &Program, units: &[Unit], upcoming: &[Upcoming], alpha: f64) -> f64 {
    let topo = prog.topo;
    let mut pos = layout.positions().to_vec();
    let mut at = 0;
    let mut total = 0.0;
    for u in units {
        let gates = &upcoming[at..at + u.gates.len()];
        at += u.gates.len();
        let mut best = (f64::INFINITY, None);
        let mut loose = (f64::INFINITY, 0);
        for chip in 0..topo.chip_count() {
            let (c, visitors) = block_cost_at(prog.dag, &u.gates, &pos, layout, chip, topo, alpha);
            if visitors <= topo.epr_capacity(chip) && c < best.0 {
                best = (c, Some(chip));
            }
            if c < loose.0 {
                loose = (c, chip);
            }
        }
        let (c, chip) = match best {
            (c, Some(chip)) => (c, chip),
            _ => (loose.0.min(future_cost_at(&pos, topo, gates, alpha)), loose.1),
        };
        total += u.weight * c;
        for q in gate_qubits(prog.dag, &u.gates) {
            pos[q] = chip;
        }
    }
    total
}

/// Decayed cost estimate of the upcoming gates under `layout`.
#[cfg(test)]
fn future_cost(layout: &Layout, topo: &Topology, upcoming: &[Upcoming], alpha: f64) -> f64 {
    future_cost_at(layout.positions(), topo, upcoming, alpha)
}

fn future_cost_at(pos: &[ChipId], topo: &Topology, upcoming: &[Upcoming], alpha: f64) -> f64 {
    upcoming
        .iter()
        .map(|u| {
            let (ca, cb) = (pos[u.a], pos[u.b]);
            if ca == cb {
                return 0.0;
            }
            let hops = topo.hops(ca, cb) as f64;
            let c = if topo.adjacent(ca, cb) && alpha < hops {
                alpha
            } else {
                hops
            };
            u.weight * c
        })
        .sum()
}

struct Child {
    cand: Candidate,
    key: f64,
}

struct GateStep<'p> {
    gate: GateId,
    pos: usize,
    block: usize,
    upcoming: &'p [Upcoming],
    units: &'p [Unit],
}

fn expand(prog: &Program, params: &CostParams, parent: &Candidate, step: &GateStep, homes: bool) -> Vec<Child> {
    let topo = prog.topo;
    let (a, b) = prog.dag.gate(step.gate).pair();
    let (pa, pb) = (parent.layout.chip_of(a), parent.layout.chip_of(b));
    let finish = |mut cand: Candidate, routing: Routing, extra: f64, last: Instr| {
        cand.cost += routing.hops as f64 + routing.release_hops as f64 + extra;
        cand.layout = routing.layout;
        cand.tail = routing.ops;
        cand.tail.push(last);
        let key = cand.cost + unit_cost(&cand.layout, prog, step.units, step.upcoming, params.alpha);
        cand.key = key;
        Child { cand, key }
    };
    let base = Candidate {
        trail: parent.trail.clone(),
        tail: Vec::new(),
        ..parent.clone()
    };
    if pa == pb {
        let r = Routing::new(parent.layout.clone());
        return vec![finish(base, r, 0.0, Instr::local_cnot(step.gate, a, b, pa, step.block))];
    }
    let mut targets: Vec<ChipId> = if homes {
        vec![parent.layout.home(a), parent.layout.home(b)]
    } else {
        let mut t: Vec<ChipId> = vec![pa, pb];
        for u in step.upcoming {
            t.push(parent.layout.chip_of(u.a));
            t.push(parent.layout.chip_of(u.b));
        }
        t.sort_unstable();
        t
    };
    targets.dedup();
    if let Some(i) = targets.iter().position(|&c| c == parent.preferred) {
        targets.remove(i);
        targets.insert(0, parent.preferred);
    }
    let mut out = Vec::new();
    for t in targets {
        let mut r = Routing::new(parent.layout.clone());
        let ok = relocate(&mut r, prog, a, t, &[a, b], step.upcoming, step.pos, step.block)
            && relocate(&mut r, prog, b, t, &[a, b], step.upcoming, step.pos, step.block);
        if ok {
            out.push(finish(
                base.clone(),
                r,
                0.0,
                Instr::local_cnot(step.gate, a, b, t, step.block),
            ));
        }
    }
    if topo.adjacent(pa, pb) {
        let r = Routing::new(parent.layout.clone());
        out.push(finish(
            base,
            r,
            params.alpha,
            Instr::recnot(step.gate, a, b, pa, pb, step.block),
        ));
    }
    out
}

/// Quantized ranking key so float noise never reorders equal plans.
fn rank(key: f64) -> i64 {
    (key * 1e9).round() as i64
}

/// Beam widths tried for a requested width: `w, w/2, w/4, ..., 1`.
pub fn width_ladder(w: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut x = w.max(1);
    loop {
        out.push(x);
        if x == 1 {
            return out;
        }
        x /= 2;
    }
}

/// Schedule every block, keeping the best of one beam per width in
/// [`width_ladder`] so a wider request never does worse than a narrower
/// one. `params.beam = 1` and `params.window = 0` give the greedy
/// block-at-a-time baseline.
pub fn schedule_ums(
    dag: &GateDag,
    blocks: &Blocks,
    initial: &Layout,
    topo: &Topology,
    params: &CostParams,
    exec: Exec,
) -> Result<UmsOutcome> {
    params.validate()?;
    let ladder = width_ladder(params.beam);
    let runs = exec.map(&ladder, |&w| {
        let p = CostParams { beam: w, ..*params };
        schedule_beam(dag, blocks, initial, topo, &p, exec)
    });
    let mut best: Option<UmsOutcome> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| rank(run.cost) < rank(b.cost)) {
            best = Some(run);
        }
    }
    Ok(best.expect("ladder is never empty"))
}

/// A single beam of width `params.beam`.
pub fn schedule_beam(
    dag: &GateDag,
    blocks: &Blocks,
    initial: &Layout,
    topo: &Topology,
    params: &CostParams,
    exec: Exec,
) -> Result<UmsOutcome> {
    params.validate()?;
    let prog = Program::new(dag, topo, blocks);
    let pow: Vec<f64> = (0..=blocks.len()).map(|d| params.beta.powi(d as i32)).collect();
    let mut beam = vec![Candidate {
        layout: initial.clone(),
        cost: 0.0,
        key: 0.0,
        trail: None,
        tail: Vec::new(),
        preferred: 0,
    }];
    let mut trace = Vec::new();
    for (bi, block) in blocks.blocks.iter().enumerate() {
        let group = lookahead_window(blocks, bi, params.window);
        let mut ahead: Vec<(GateId, usize)> = Vec::new();
        for &gb in &group[1..] {
            ahead.extend(
                blocks.blocks[gb]
                    .gates
                    .iter()
                    .filter(|&&h| dag.gate(h).qubits.iter().any(|q| block.qubits.binary_search(q).is_ok()))
                    .map(|&g| (g, gb)),
            );
        }
        for cand in beam.iter_mut() {
            cand.preferred = min_block_cost(dag, &block.gates, &cand.layout, topo, params.alpha).1;
        }
        for (gi, &g) in block.gates.iter().enumerate() {
            let upcoming: Vec<Upcoming> = block.gates[gi + 1..]
                .iter()
                .map(|&h| (h, bi))
                .chain(ahead.iter().copied())
                .map(|(h, hb)| {
                    let (a, b) = dag.gate(h).pair();
                    Upcoming {
                        a,
                        b,
                        weight: pow[hb - bi],
                    }
                })
                .collect();
            let mut units = Vec::with_capacity(group.len());
            if gi + 1 < block.gates.len() {
                units.push(Unit {
                    gates: block.gates[gi + 1..].to_vec(),
                    weight: 1.0,
                });
            }
            for &gb in &group[1..] {
                let gates: Vec<GateId> = blocks.blocks[gb]
                    .gates
                    .iter()
                    .copied()
                    .filter(|&h| dag.gate(h).qubits.iter().any(|q| block.qubits.binary_search(q).is_ok()))
                    .collect();
                units.push(Unit {
                    gates,
                    weight: pow[gb - bi],
                });
            }
            for cand in beam.iter_mut() {
                for &u in &prog.before[g] {
                    let q = dag.gate(u).qubits[0];
                    cand.tail.push(Instr::unary(u, q, cand.layout.chip_of(q), bi));
                }
            }
            let (a, b) = dag.gate(g).pair();
            if beam.iter().all(|c| c.layout.chip_of(a) == c.layout.chip_of(b)) {
                for cand in beam.iter_mut() {
                    let chip = cand.layout.chip_of(a);
                    cand.tail.push(Instr::local_cnot(g, a, b, chip, bi));
                }
                continue;
            }
            for cand in beam.iter_mut() {
                cand.freeze();
            }
            let step = GateStep {
                gate: g,
                pos: prog.seq_pos[g],
                block: bi,
                upcoming: &upcoming,
                units: &units,
            };
            let mut children: Vec<(usize, usize, Child)> = Vec::new();
            for homes in [false, true] {
                let expanded = exec.map(&beam, |cand| expand(&prog, params, cand, &step, homes));
                for (pi, kids) in expanded.into_iter().enumerate() {
                    children.extend(kids.into_iter().enumerate().map(|(ci, c)| (pi, ci, c)));
                }
                if !children.is_empty() {
                    break;
                }
            }
            if children.is_empty() {
                let chip = beam[0].layout.chip_of(b);
                return Err(Error::Deadlock { chip, gate: g });
            }
            let expanded = children.len();
            children.sort_by_key(|(pi, ci, c)| (rank(c.key), *pi, *ci));
            let mut next: Vec<Candidate> = Vec::with_capacity(params.beam);
            for (_, _, child) in children {
                if next.len() == params.beam {
                    break;
                }
                if next
                    .iter()
                    .any(|n| n.layout.positions() == child.cand.layout.positions())
                {
                    continue;
                }
                next.push(child.cand);
            }
            beam = next;
            trace.push(LayerTrace {
                layer: trace.len(),
                gate: g,
                block: bi,
                expanded,
                costs: beam.iter().map(|c| c.cost).collect(),
            });
        }
    }
    let best = beam
        .iter()
        .enumerate()
        .min_by_key(|(i, c)| (rank(c.cost), *i))
        .map(|(i, _)| i)
        .expect("beam never empties");
    let finalists = beam.iter().map(|c| c.cost).collect();
    let mut winner = beam.swap_remove(best);
    drop(beam);
    let last = prog.last_block();
    for &u in &prog.trailing {
        let q = dag.gate(u).qubits[0];
        winner.tail.push(Instr::unary(u, q, winner.layout.chip_of(q), last));
    }
    let schedule = Schedule::new(initial.homes().to_vec(), winner.instructions());
    Ok(UmsOutcome {
        schedule,
        cost: winner.cost,
        width: params.beam,
        finalists,
        trace,
    })
}
