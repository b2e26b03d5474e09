//! Exact minimum-T_eff scheduling for tiny instances.
//!
//! Shortest path over states (chip of every qubit, set of executed CNOTs).
//! Moves are single RELOCATE hops (cost 1) and Re-CNOTs between adjacent
//! chips (cost α). Every ready CNOT whose operands share a chip is executed
//! for free as soon as it becomes local, which never hurts: it frees
//! nothing and blocks nothing. Comm slots are interchangeable so a state
//! only records chips.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::arch::{ChipId, Topology};
use crate::circuit::{GateDag, GateId};
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::schedule::{Instr, InstrKind, Schedule};
use crate::timing::{simulate_latency, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_chips: usize,
    pub max_qubits: usize,
    pub max_cnots: usize,
    pub max_capacity: usize,
    /// Give up after settling this many states.
    pub max_states: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_chips: 3,
            max_qubits: 8,
            max_cnots: 12,
            max_capacity: 2,
            max_states: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub t_eff: f64,
    pub n_relocate: usize,
    pub n_recnot: usize,
    /// An optimal schedule, timed ASAP.
    pub witness: Schedule,
    pub states: usize,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Hop(usize, ChipId),
    ReCnot(usize),
}

struct Problem<'a> {
    dag: &'a GateDag,
    topo: &'a Topology,
    cnots: Vec<GateId>,
    pairs: Vec<(usize, usize)>,
    preds: Vec<u16>,
    home: Vec<ChipId>,
    /// CNOT mask touching each qubit.
    touches: Vec<u16>,
}

type Key = u64;

fn pack(pos: &[ChipId], done: u16) -> Key {
    let mut k = 0u64;
    for (q, &c) in pos.iter().enumerate() {
        k |= (c as u64) << (16 + 2 * q);
    }
    k | done as u64
}

fn unpack(key: Key, n: usize) -> (Vec<ChipId>, u16) {
    let pos = (0..n).map(|q| ((key >> (16 + 2 * q)) & 3) as ChipId).collect();
    (pos, (key & 0xffff) as u16)
}

impl Problem<'_> {
    fn ready(&self, j: usize, done: u16) -> bool {
        done & (1 << j) == 0 && self.preds[j] & !done == 0
    }

    /// Execute ready local CNOTs until none is left; returns them in order.
    fn close(&self, pos: &[ChipId], done: &mut u16) -> Vec<usize> {
        let mut ran = Vec::new();
        loop {
            let before = ran.len();
            for j in 0..self.cnots.len() {
                let (a, b) = self.pairs[j];
                if self.ready(j, *done) && pos[a] == pos[b] {
                    *done |= 1 << j;
                    ran.push(j);
                }
            }
            if ran.len() == before {
                return ran;
            }
        }
    }

    fn externals(&self, pos: &[ChipId], chip: ChipId) -> usize {
        pos.iter()
            .enumerate()
            .filter(|&(q, &c)| c == chip && self.home[q] != chip)
            .count()
    }

    fn successors(&self, key: Key, alpha: f64) -> Vec<(f64, Action, Key)> {
        let (pos, done) = unpack(key, self.home.len());
        let mut out = Vec::new();
        for j in 0..self.cnots.len() {
            let (a, b) = self.pairs[j];
            if self.ready(j, done) && self.topo.adjacent(pos[a], pos[b]) {
                let mut d = done | (1 << j);
                self.close(&pos, &mut d);
                out.push((alpha, Action::ReCnot(j), pack(&pos, d)));
            }
        }
        for q in 0..pos.len() {
            if self.touches[q] & !done == 0 && pos[q] == self.home[q] {
                continue;
            }
            for &n in self.topo.neighbors(pos[q]) {
                if n != self.home[q] && self.externals(&pos, n) >= self.topo.epr_capacity(n) {
                    continue;
                }
                let mut p = pos.clone();
                p[q] = n;
                let mut d = done;
                self.close(&p, &mut d);
                out.push((1.0, Action::Hop(q, n), pack(&p, d)));
            }
        }
        out
    }
}

pub fn check_limits(dag: &GateDag, topo: &Topology, limits: &OracleLimits) -> Result<()> {
    let cap = (0..topo.chip_count()).map(|c| topo.epr_capacity(c)).max().unwrap_or(0);
    let checks = [
        (topo.chip_count(), limits.max_chips.min(4), "chips"),
        (dag.qubit_count, limits.max_qubits.min(24), "qubits"),
        (dag.cnot_count(), limits.max_cnots.min(16), "CNOTs"),
        (cap, limits.max_capacity, "EPR capacity"),
    ];
    for (have, max, what) in checks {
        if have > max {
            return Err(Error::OracleLimits(format!("{have} {what} exceeds the limit of {max}")));
        }
    }
    Ok(())
}

/// Minimum N_RELOCATE + α·N_Re-CNOT over every schedule that starts from
/// `initial`, plus a witness reaching it.
pub fn optimal_teff(
    dag: &GateDag,
    initial: &Layout,
    topo: &Topology,
    alpha: f64,
    limits: &OracleLimits,
) -> Result<OracleResult> {
    check_limits(dag, topo, limits)?;
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Config("alpha must be positive".into()));
    }
    let cnots: Vec<GateId> = dag.gates.iter().filter(|g| g.is_cnot()).map(|g| g.id).collect();
    let pairs: Vec<(usize, usize)> = cnots.iter().map(|&g| dag.gate(g).pair()).collect();
    let mut last: Vec<Option<usize>> = vec![None; dag.qubit_count];
    let mut preds = vec![0u16; cnots.len()];
    let mut touches = vec![0u16; dag.qubit_count];
    for (j, &(a, b)) in pairs.iter().enumerate() {
        for q in [a, b] {
            if let Some(i) = last[q] {
                preds[j] |= 1 << i;
            }
            last[q] = Some(j);
            touches[q] |= 1 << j;
        }
    }
    let prob = Problem {
        dag,
        topo,
        cnots,
        pairs,
        preds,
        home: (0..dag.qubit_count).map(|q| initial.home(q)).collect(),
        touches,
    };
    let full: u16 = if prob.cnots.is_empty() {
        0
    } else {
        u16::MAX >> (16 - prob.cnots.len())
    };
    let start_pos = initial.positions().to_vec();
    let mut d0 = 0u16;
    prob.close(&start_pos, &mut d0);
    let start = pack(&start_pos, d0);

    // Costs are non-negative, so bit patterns order like the values.
    let mut best: HashMap<Key, (f64, Option<(Key, Action)>)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(start, (0.0, None));
    heap.push(Reverse((0f64.to_bits(), start)));
    let mut settled = 0usize;
    let goal = loop {
        let Some(Reverse((bits, key))) = heap.pop() else {
            let gate = prob.cnots.first().copied().unwrap_or(0);
            return Err(Error::Deadlock { chip: 0, gate });
        };
        let cost = f64::from_bits(bits);
        if cost > best[&key].0 {
            continue;
        }
        if key & 0xffff == full as u64 {
            break key;
        }
        settled += 1;
        if settled > limits.max_states {
            return Err(Error::OracleLimits(format!(
                "search exceeded {} states",
                limits.max_states
            )));
        }
        for (step, action, next) in prob.successors(key, alpha) {
            let c = cost + step;
            if best.get(&next).is_none_or(|&(old, _)| c < old) {
                best.insert(next, (c, Some((key, action))));
                heap.push(Reverse((c.to_bits(), next)));
            }
        }
    };
    let mut actions = Vec::new();
    let mut at = goal;
    while let Some((prev, action)) = best[&at].1 {
        actions.push(action);
        at = prev;
    }
    actions.reverse();
    let witness = replay(&prob, initial, &actions)?;
    let timed = simulate_latency(&witness, topo, Policy::Asap);
    let n_relocate = timed.count(InstrKind::Relocate);
    let n_recnot = timed.count(InstrKind::ReCnot);
    Ok(OracleResult {
        t_eff: best[&goal].0,
        n_relocate,
        n_recnot,
        witness: timed,
        states: settled,
    })
}

fn replay(prob: &Problem, initial: &Layout, actions: &[Action]) -> Result<Schedule> {
    let dag = prob.dag;
    let mut before: Vec<Vec<GateId>> = vec![Vec::new(); dag.len()];
    let mut pending: Vec<Vec<GateId>> = vec![Vec::new(); dag.qubit_count];
    for g in &dag.gates {
        if g.is_cnot() {
            for &q in &g.qubits {
                before[g.id].append(&mut pending[q]);
            }
            before[g.id].sort_unstable();
        } else {
            pending[g.qubits[0]].push(g.id);
        }
    }
    let mut layout = initial.clone();
    let mut ops = Vec::new();
    let mut done = 0u16;
    let emit_unaries = |ops: &mut Vec<Instr>, layout: &Layout, g: GateId| {
        for &u in &before[g] {
            let q = dag.gate(u).qubits[0];
            ops.push(Instr::unary(u, q, layout.chip_of(q), 0));
        }
    };
    let close = |ops: &mut Vec<Instr>, layout: &Layout, done: &mut u16| {
        for j in prob.close(layout.positions(), done) {
            let g = prob.cnots[j];
            emit_unaries(ops, layout, g);
            let (a, b) = prob.pairs[j];
            ops.push(Instr::local_cnot(g, a, b, layout.chip_of(a), 0));
        }
    };
    close(&mut ops, &layout, &mut done);
    for &action in actions {
        match action {
            Action::Hop(q, to) => {
                let from = layout.chip_of(q);
                let slot = layout.move_to(q, to)?;
                ops.push(Instr::relocate(q, from, to, slot, 0, false));
            }
            Action::ReCnot(j) => {
                let g = prob.cnots[j];
                emit_unaries(&mut ops, &layout, g);
                let (a, b) = prob.pairs[j];
                ops.push(Instr::recnot(g, a, b, layout.chip_of(a), layout.chip_of(b), 0));
                done |= 1 << j;
            }
        }
        close(&mut ops, &layout, &mut done);
    }
    for q_list in pending {
        for u in q_list {
            let q = dag.gate(u).qubits[0];
            ops.push(Instr::unary(u, q, layout.chip_of(q), 0));
        }
    }
    Ok(Schedule::new(initial.homes().to_vec(), ops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_dag, Gate};
    use crate::validate::validate;

    #[test]
    fn all_local_is_free() {
        let topo = Topology::line(2, 4, 0.5).unwrap();
        let dag = build_dag(
            4,
            vec![Gate::cnot(0, 0, 1), Gate::unary(1, 0, "h"), Gate::cnot(2, 2, 3)],
        );
        let layout = Layout::initial(&[0, 0, 1, 1], &topo).unwrap();
        let r = optimal_teff(&dag, &layout, &topo, 1.77, &OracleLimits::default()).unwrap();
        assert_eq!(r.t_eff, 0.0);
        assert_eq!(r.witness.kind_string(), "CC");
        validate(&r.witness, &dag, &topo).unwrap();
    }

    #[test]
    fn shared_control_costs_one() {
        let topo = Topology::line(2, 4, 0.5).unwrap();
        let dag = build_dag(4, vec![Gate::cnot(0, 2, 0), Gate::cnot(1, 3, 0)]);
        let layout = Layout::initial(&[0, 0, 1, 1], &topo).unwrap();
        let r = optimal_teff(&dag, &layout, &topo, 1.77, &OracleLimits::default()).unwrap();
        assert_eq!(r.t_eff, 1.0);
        assert_eq!(r.witness.kind_string(), "RCC");
        validate(&r.witness, &dag, &topo).unwrap();
    }

    #[test]
    fn recnot_wins_when_cheap() {
        let topo = Topology::line(2, 4, 0.5).unwrap();
        let dag = build_dag(2, vec![Gate::cnot(0, 0, 1)]);
        let layout = Layout::initial(&[0, 1], &topo).unwrap();
        let cheap = optimal_teff(&dag, &layout, &topo, 0.5, &OracleLimits::default()).unwrap();
        assert_eq!((cheap.t_eff, cheap.n_recnot), (0.5, 1));
        let dear = optimal_teff(&dag, &layout, &topo, 1.77, &OracleLimits::default()).unwrap();
        assert_eq!((dear.t_eff, dear.n_relocate), (1.0, 1));
    }

    #[test]
    fn limits_are_enforced() {
        let topo = Topology::line(4, 4, 0.5).unwrap();
        let dag = build_dag(2, vec![Gate::cnot(0, 0, 1)]);
        let layout = Layout::initial(&[0, 1], &topo).unwrap();
        let err = optimal_teff(&dag, &layout, &topo, 1.77, &OracleLimits::default()).unwrap_err();
        assert!(matches!(err, Error::OracleLimits(_)));
    }
}
