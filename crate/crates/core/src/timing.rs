//! Latency model: instruction durations, resource dependencies, and the
//! list-scheduling simulator that assigns start times.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arch::{effective_epr_overhead, ChipId, Nanos, Topology};
use crate::error::{Error, Result};
use crate::schedule::{Instr, InstrKind, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Start as soon as qubits, slots, and links allow.
    Asap,
    /// Additionally hold each block until every earlier block finished.
    #[default]
    BlockOrder,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asap" => Ok(Policy::Asap),
            "block-order" => Ok(Policy::BlockOrder),
            other => Err(Error::Config(format!("unknown timing policy `{other}`"))),
        }
    }
}

/// What each instruction waits on, derived by replaying the stream in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deps {
    /// Earlier instructions that must finish first: the previous instruction
    /// on each operand and, for a RELOCATE into a communication slot, the
    /// RELOCATE that last vacated that slot.
    pub preds: Vec<Vec<usize>>,
    /// Local CNOTs whose operands sit in neighboring home compute slots and
    /// so need no atom movement.
    pub adjacent_slots: Vec<bool>,
    /// Link index used by each teleportation.
    pub link: Vec<Option<usize>>,
}

pub fn dependencies(schedule: &Schedule, topo: &Topology) -> Deps {
    let n_qubits = schedule.initial.len();
    let mut last_on: Vec<Option<usize>> = vec![None; n_qubits];
    let mut comm: Vec<Option<(ChipId, usize)>> = vec![None; n_qubits];
    let mut vacated: Vec<Vec<Option<usize>>> = (0..topo.chip_count())
        .map(|c| vec![None; topo.epr_capacity(c)])
        .collect();
    let mut preds = Vec::with_capacity(schedule.len());
    let mut adjacent_slots = Vec::with_capacity(schedule.len());
    let mut link = Vec::with_capacity(schedule.len());
    for ins in &schedule.instructions {
        let mut p: Vec<usize> = ins
            .qubits
            .iter()
            .filter_map(|&q| last_on.get(q).copied().flatten())
            .collect();
        let mut adjacent = false;
        match ins.kind {
            InstrKind::Relocate => {
                let q = ins.qubits[0];
                if let Some(s) = ins.slot {
                    if let Some(prev) = vacated.get(ins.to).and_then(|v| v.get(s)).copied().flatten() {
                        p.push(prev);
                    }
                }
                if let Some((c, s)) = comm[q].take() {
                    if let Some(v) = vacated.get_mut(c).and_then(|v| v.get_mut(s)) {
                        *v = Some(ins.id);
                    }
                }
                comm[q] = ins.slot.map(|s| (ins.to, s));
            }
            InstrKind::LocalCnot => {
                let (a, b) = (ins.qubits[0], ins.qubits[1]);
                if comm[a].is_none() && comm[b].is_none() {
                    let (ha, hb) = (schedule.initial[a], schedule.initial[b]);
                    adjacent = ha.chip == hb.chip && ha.slot.abs_diff(hb.slot) == 1;
                }
            }
            _ => {}
        }
        p.sort_unstable();
        p.dedup();
        preds.push(p);
        adjacent_slots.push(adjacent);
        link.push(if ins.kind.is_teleport() {
            topo.edge_index(ins.from, ins.to)
        } else {
            None
        });
        for &q in &ins.qubits {
            if q < n_qubits {
                last_on[q] = Some(ins.id);
            }
        }
    }
    Deps {
        preds,
        adjacent_slots,
        link,
    }
}

pub fn duration(ins: &Instr, adjacent_slots: bool, topo: &Topology) -> Nanos {
    let t = &topo.timing;
    match ins.kind {
        InstrKind::Unary => t.t_1q,
        InstrKind::LocalCnot => t.t_2q + if adjacent_slots { 0 } else { t.t_atom_move },
        InstrKind::Relocate => effective_epr_overhead(t) + t.t_relocate,
        InstrKind::ReCnot => effective_epr_overhead(t) + t.t_recnot,
    }
}

/// Busy intervals of one link, sorted by start.
#[derive(Debug, Clone, Default)]
pub(crate) struct LinkBook {
    busy: Vec<(Nanos, Nanos)>,
}

impl LinkBook {
    /// Most intervals alive at once within `[start, end)`, ignoring `skip`.
    pub(crate) fn peak(&self, start: Nanos, end: Nanos, skip: Option<(Nanos, Nanos)>) -> usize {
        let mut events: Vec<(Nanos, i32)> = Vec::new();
        let mut skipped = false;
        for &(s, e) in &self.busy {
            if s >= end {
                break;
            }
            if e <= start {
                continue;
            }
            if !skipped && Some((s, e)) == skip {
                skipped = true;
                continue;
            }
            events.push((s.max(start), 1));
            events.push((e, -1));
        }
        events.sort_unstable();
        let mut cur = 0;
        let mut peak = 0;
        for (_, d) in events {
            cur += d;
            peak = peak.max(cur);
        }
        peak as usize
    }

    /// Earliest start ≥ `ready` with fewer than `links` intervals alive
    /// throughout `[start, start + dur)`.
    pub(crate) fn earliest(&self, ready: Nanos, dur: Nanos, links: usize) -> Nanos {
        let mut candidates: Vec<Nanos> = vec![ready];
        candidates.extend(self.busy.iter().map(|b| b.1).filter(|&e| e > ready));
        candidates.sort_unstable();
        candidates.dedup();
        for t in candidates {
            if self.peak(t, t + dur.max(1), None) < links {
                return t;
            }
        }
        unreachable!("the last interval end always leaves the link free")
    }

    pub(crate) fn insert(&mut self, s: Nanos, e: Nanos) {
        let at = self.busy.partition_point(|b| *b < (s, e));
        self.busy.insert(at, (s, e));
    }

    pub(crate) fn remove(&mut self, s: Nanos, e: Nanos) {
        if let Ok(at) = self.busy.binary_search(&(s, e)) {
            self.busy.remove(at);
        }
    }
}

/// Prefix-maximum tree over block indices.
struct MaxTree {
    t: Vec<Nanos>,
}

impl MaxTree {
    fn new(n: usize) -> Self {
        MaxTree { t: vec![0; n + 1] }
    }

    fn update(&mut self, i: usize, v: Nanos) {
        let mut i = i + 1;
        while i < self.t.len() {
            self.t[i] = self.t[i].max(v);
            i += i & i.wrapping_neg();
        }
    }

    /// Max over indices `< i`.
    fn prefix(&self, i: usize) -> Nanos {
        let mut i = i.min(self.t.len() - 1);
        let mut m = 0;
        while i > 0 {
            m = m.max(self.t[i]);
            i -= i & i.wrapping_neg();
        }
        m
    }
}

/// Assign durations and start times in list order.
pub fn simulate_latency(schedule: &Schedule, topo: &Topology, policy: Policy) -> Schedule {
    let deps = dependencies(schedule, topo);
    let mut out = schedule.clone();
    let blocks = schedule.instructions.iter().map(|i| i.block + 1).max().unwrap_or(0);
    let mut barrier = MaxTree::new(blocks);
    let mut links = vec![LinkBook::default(); topo.edges().len()];
    for i in 0..out.instructions.len() {
        let dur = duration(&out.instructions[i], deps.adjacent_slots[i], topo);
        let mut ready = deps.preds[i]
            .iter()
            .map(|&p| out.instructions[p].end())
            .max()
            .unwrap_or(0);
        let block = out.instructions[i].block;
        if policy == Policy::BlockOrder {
            ready = ready.max(barrier.prefix(block));
        }
        let start = match deps.link[i] {
            Some(l) => links[l].earliest(ready, dur, topo.links_per_edge),
            None => ready,
        };
        if let Some(l) = deps.link[i] {
            links[l].insert(start, start + dur);
        }
        let ins = &mut out.instructions[i];
        ins.start = start;
        ins.duration = dur;
        barrier.update(block, ins.end());
    }
    out
}

/// Time at which each instruction's dependencies resolve.
pub fn resolution_times(schedule: &Schedule, deps: &Deps) -> Vec<Nanos> {
    deps.preds
        .iter()
        .map(|p| p.iter().map(|&j| schedule.instructions[j].end()).max().unwrap_or(0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Placement;

    fn homes(chips: &[ChipId]) -> Vec<Placement> {
        let mut used = [0; 8];
        chips
            .iter()
            .map(|&c| {
                used[c] += 1;
                Placement {
                    chip: c,
                    slot: used[c] - 1,
                }
            })
            .collect()
    }

    #[test]
    fn single_relocate_hidden_epr() {
        let topo = Topology::line(2, 4, 0.5).unwrap();
        let s = Schedule::new(homes(&[0, 1]), vec![Instr::relocate(0, 0, 1, Some(0), 0, false)]);
        assert_eq!(simulate_latency(&s, &topo, Policy::Asap).makespan(), 1_300_000);
    }

    #[test]
    fn single_recnot_exposed_epr() {
        let mut topo = Topology::line(2, 4, 0.5).unwrap();
        topo.timing.epr_hide = 0.0;
        let s = Schedule::new(homes(&[0, 1]), vec![Instr::recnot(0, 0, 1, 0, 1, 0)]);
        assert_eq!(
            simulate_latency(&s, &topo, Policy::Asap).makespan(),
            2_300_000 + 259_000
        );
    }

    #[test]
    fn disjoint_relocates_run_in_parallel() {
        let topo = Topology::grid(2, 2, 4, 0.5).unwrap();
        let s = Schedule::new(
            homes(&[0, 3]),
            vec![
                Instr::relocate(0, 0, 1, Some(0), 0, false),
                Instr::relocate(1, 3, 2, Some(0), 0, false),
            ],
        );
        assert_eq!(simulate_latency(&s, &topo, Policy::Asap).makespan(), 1_300_000);
    }

    #[test]
    fn shared_link_serializes_unless_doubled() {
        let topo = Topology::line(2, 6, 0.5).unwrap();
        let s = Schedule::new(
            homes(&[0, 0]),
            vec![
                Instr::relocate(0, 0, 1, Some(0), 0, false),
                Instr::relocate(1, 0, 1, Some(1), 0, false),
            ],
        );
        assert_eq!(simulate_latency(&s, &topo, Policy::Asap).makespan(), 2_600_000);
        let wide = topo.with_links_per_edge(2);
        assert_eq!(simulate_latency(&s, &wide, Policy::Asap).makespan(), 1_300_000);
    }

    #[test]
    fn block_order_holds_later_blocks() {
        let topo = Topology::line(2, 4, 0.5).unwrap();
        let s = Schedule::new(
            homes(&[0, 0, 1, 1]),
            vec![
                Instr::relocate(0, 0, 1, Some(0), 0, false),
                Instr::local_cnot(1, 2, 3, 1, 1),
            ],
        );
        let asap = simulate_latency(&s, &topo, Policy::Asap);
        let held = simulate_latency(&s, &topo, Policy::BlockOrder);
        assert_eq!(asap.instructions[1].start, 0);
        assert_eq!(held.instructions[1].start, 1_300_000);
        // Neighboring home slots skip atom movement.
        assert_eq!(held.instructions[1].duration, 360);
    }

    #[test]
    fn slot_reuse_waits_for_vacate() {
        let topo = Topology::line(2, 3, 0.67).unwrap();
        let s = Schedule::new(
            homes(&[0, 0, 1]),
            vec![
                Instr::relocate(0, 0, 1, Some(0), 0, false),
                Instr::relocate(0, 1, 0, None, 0, true),
                Instr::relocate(1, 0, 1, Some(0), 0, false),
            ],
        );
        let d = dependencies(&s, &topo);
        assert_eq!(d.preds[2], vec![1]);
        let t = simulate_latency(&s, &topo, Policy::Asap);
        assert_eq!(t.instructions[2].start, 2_600_000);
    }

    #[test]
    fn max_tree_prefix() {
        let mut m = MaxTree::new(5);
        m.update(0, 10);
        m.update(3, 40);
        m.update(1, 5);
        assert_eq!(m.prefix(0), 0);
        assert_eq!(m.prefix(1), 10);
        assert_eq!(m.prefix(3), 10);
        assert_eq!(m.prefix(4), 40);
    }
}
