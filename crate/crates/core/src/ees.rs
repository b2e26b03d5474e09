//! Early scheduling: pull instructions of a timed schedule toward the
//! moment their dependencies resolve, as long as no link is overbooked and
//! an early RELOCATE never fills its destination's EPR capacity.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::arch::{Nanos, Topology};
use crate::schedule::{InstrKind, Schedule};
use crate::timing::{dependencies, resolution_times, LinkBook};

/// Instructions that start later than their dependencies allow.
pub fn collect_early(schedule: &Schedule, topo: &Topology) -> Vec<usize> {
    let deps = dependencies(schedule, topo);
    let ready = resolution_times(schedule, &deps);
    schedule
        .instructions
        .iter()
        .filter(|i| i.start > ready[i.id])
        .map(|i| i.id)
        .collect()
}

/// A stay of a qubit on a chip other than its home.
#[derive(Debug, Clone, Copy)]
struct Visit {
    arrival: usize,
    departure: Option<usize>,
}

struct Occupancy {
    visits: Vec<Vec<Visit>>,
}

impl Occupancy {
    fn new(schedule: &Schedule, topo: &Topology) -> (Self, Vec<Option<(usize, usize)>>) {
        let mut visits: Vec<Vec<Visit>> = vec![Vec::new(); topo.chip_count()];
        let mut open: Vec<Option<(usize, usize)>> = vec![None; schedule.initial.len()];
        let mut visit_of = vec![None; schedule.len()];
        for ins in &schedule.instructions {
            if ins.kind != InstrKind::Relocate {
                continue;
            }
            let q = ins.qubits[0];
            if let Some((chip, idx)) = open[q].take() {
                visits[chip][idx].departure = Some(ins.id);
            }
            if ins.to != schedule.initial[q].chip {
                visits[ins.to].push(Visit {
                    arrival: ins.id,
                    departure: None,
                });
                let idx = visits[ins.to].len() - 1;
                open[q] = Some((ins.to, idx));
                visit_of[ins.id] = Some((ins.to, idx));
            }
        }
        (Occupancy { visits }, visit_of)
    }

    /// Peak number of visits on `chip` alive within `[from, to)`, other
    /// than visit `skip`.
    fn peak(&self, schedule: &Schedule, chip: usize, skip: usize, from: Nanos, to: Nanos) -> usize {
        let mut events: Vec<(Nanos, i32)> = Vec::new();
        for (i, v) in self.visits[chip].iter().enumerate() {
            if i == skip {
                continue;
            }
            let s = schedule.instructions[v.arrival].start;
            let e = v
                .departure
                .map(|d| schedule.instructions[d].end())
                .unwrap_or(Nanos::MAX);
            if s < to && e > from {
                events.push((s.max(from), 1));
                events.push((e, -1));
            }
        }
        events.sort_unstable();
        let (mut cur, mut peak) = (0, 0);
        for (_, d) in events {
            cur += d;
            peak = peak.max(cur);
        }
        peak as usize
    }
}

fn bump(points: &mut BTreeMap<Nanos, u32>, t: Nanos, add: bool) {
    if add {
        *points.entry(t).or_insert(0) += 1;
    } else if let Some(c) = points.get_mut(&t) {
        *c -= 1;
        if *c == 0 {
            points.remove(&t);
        }
    }
}

/// One pass of early scheduling. Instruction order, kinds, and count are
/// unchanged; only start times move, and only earlier.
pub fn run_ees(schedule: &Schedule, topo: &Topology) -> Schedule {
    let deps = dependencies(schedule, topo);
    let mut out = schedule.clone();
    let n = out.len();
    let mut succs = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for (i, p) in deps.preds.iter().enumerate() {
        indeg[i] = p.len();
        for &j in p {
            succs[j].push(i);
        }
    }
    let mut links = vec![LinkBook::default(); topo.edges().len()];
    let mut points = BTreeMap::new();
    for ins in &out.instructions {
        if let Some(l) = deps.link[ins.id] {
            links[l].insert(ins.start, ins.end());
        }
        bump(&mut points, ins.start, true);
        bump(&mut points, ins.end(), true);
    }
    let (occupancy, visit_of) = Occupancy::new(schedule, topo);

    let mut heap: BinaryHeap<Reverse<(Nanos, usize)>> =
        (0..n).filter(|&i| indeg[i] == 0).map(|i| Reverse((0, i))).collect();
    while let Some(Reverse((t_e, id))) = heap.pop() {
        let (t_f, dur) = (out.instructions[id].start, out.instructions[id].duration);
        if t_f > t_e {
            let link = deps.link[id];
            if let Some(l) = link {
                links[l].remove(t_f, t_f + dur);
            }
            let steps: Vec<Nanos> = points
                .range(t_e..t_f)
                .rev()
                .map(|(&t, _)| t)
                .chain(std::iter::once(t_e))
                .collect();
            // Capacity ends the walk; a busy link only rules out that start.
            let mut best = t_f;
            for t in steps {
                if t >= best {
                    continue;
                }
                if let Some((chip, idx)) = visit_of[id] {
                    let others = occupancy.peak(&out, chip, idx, t, t_f);
                    if others + 1 >= topo.epr_capacity(chip) {
                        break;
                    }
                }
                if let Some(l) = link {
                    if links[l].peak(t, t + dur, None) >= topo.links_per_edge {
                        continue;
                    }
                }
                best = t;
            }
            if let Some(l) = link {
                links[l].insert(best, best + dur);
            }
            if best < t_f {
                bump(&mut points, t_f, false);
                bump(&mut points, t_f + dur, false);
                bump(&mut points, best, true);
                bump(&mut points, best + dur, true);
                out.instructions[id].start = best;
            }
        }
        for &s in &succs[id] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                let ready = deps.preds[s]
                    .iter()
                    .map(|&p| out.instructions[p].end())
                    .max()
                    .unwrap_or(0);
                heap.push(Reverse((ready, s)));
            }
        }
    }
    out
}
