//! Reference schedulers.

use crate::arch::Topology;
use crate::blockform::{Blocks, CostParams};
use crate::circuit::GateDag;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::layout::Layout;
use crate::route::{relocate, Program, Routing};
use crate::schedule::{Instr, Schedule};
use crate::ums::{schedule_ums, UmsOutcome};

/// Gate-by-gate teleportation: each non-local CNOT moves its control to
/// the target's chip (or the target to the control's if that path is
/// stuck). Full chips evict the resident used farthest in the future.
/// No lookahead and no Re-CNOT.
pub fn schedule_pergate(dag: &GateDag, blocks: &Blocks, initial: &Layout, topo: &Topology) -> Result<Schedule> {
    let prog = Program::new(dag, topo, blocks);
    let mut r = Routing::new(initial.clone());
    for (bi, block) in blocks.blocks.iter().enumerate() {
        for &g in &block.gates {
            for &u in &prog.before[g] {
                let q = dag.gate(u).qubits[0];
                r.ops.push(Instr::unary(u, q, r.layout.chip_of(q), bi));
            }
            let (c, t) = dag.gate(g).pair();
            let pos = prog.seq_pos[g];
            if r.layout.chip_of(c) != r.layout.chip_of(t) {
                let snapshot = (r.layout.clone(), r.ops.len(), r.hops, r.release_hops);
                let to = r.layout.chip_of(t);
                if !relocate(&mut r, &prog, c, to, &[c, t], &[], pos, bi) {
                    r.layout = snapshot.0;
                    r.ops.truncate(snapshot.1);
                    r.hops = snapshot.2;
                    r.release_hops = snapshot.3;
                    let to = r.layout.chip_of(c);
                    if !relocate(&mut r, &prog, t, to, &[c, t], &[], pos, bi) {
                        return Err(Error::Deadlock { chip: to, gate: g });
                    }
                }
            }
            r.ops.push(Instr::local_cnot(g, c, t, r.layout.chip_of(c), bi));
        }
    }
    let last = prog.last_block();
    for &u in &prog.trailing {
        let q = dag.gate(u).qubits[0];
        r.ops.push(Instr::unary(u, q, r.layout.chip_of(q), last));
    }
    Ok(Schedule::new(initial.homes().to_vec(), r.ops))
}

/// One candidate, no lookahead: block-at-a-time greedy scheduling.
pub fn schedule_blockgreedy(
    dag: &GateDag,
    blocks: &Blocks,
    initial: &Layout,
    topo: &Topology,
    params: &CostParams,
) -> Result<UmsOutcome> {
    let greedy = CostParams {
        beam: 1,
        window: 0,
        ..*params
    };
    schedule_ums(dag, blocks, initial, topo, &greedy, Exec::Sequential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockform::form_blocks;
    use crate::circuit::{build_dag, Gate};
    use crate::schedule::InstrKind;
    use crate::timing::{simulate_latency, Policy};
    use crate::validate::validate;

    /// Qubit 0 alone on one chip, 2 and 3 on the next; both CNOTs target 0.
    fn fan_in() -> (GateDag, Layout, Topology) {
        let topo = Topology::line(2, 4, 0.5).unwrap();
        let dag = build_dag(4, vec![Gate::cnot(0, 2, 0), Gate::cnot(1, 3, 0)]);
        let layout = Layout::initial(&[0, 0, 1, 1], &topo).unwrap();
        (dag, layout, topo)
    }

    #[test]
    fn pergate_moves_each_control() {
        let (dag, layout, topo) = fan_in();
        let params = CostParams::default();
        let blocks = form_blocks(&dag, &layout, &topo, &params);
        let s = schedule_pergate(&dag, &blocks, &layout, &topo).unwrap();
        assert_eq!(s.count(InstrKind::Relocate), 2);
        assert_eq!(s.kind_string(), "RCRC");
        let g = schedule_blockgreedy(&dag, &blocks, &layout, &topo, &params).unwrap();
        assert_eq!(g.schedule.count(InstrKind::Relocate), 1);
        assert_eq!(g.cost, 1.0);
        for s in [s, g.schedule] {
            let timed = simulate_latency(&s, &topo, Policy::BlockOrder);
            validate(&timed, &dag, &topo).unwrap();
        }
    }

    #[test]
    fn pergate_falls_back_to_target() {
        // One comm slot per chip. After the first gate qubit 0 holds chip 1's
        // slot and is an operand of the second gate, so control 1 cannot
        // get in and the target goes home instead.
        let topo = Topology::line(2, 3, 0.67).unwrap();
        let dag = build_dag(4, vec![Gate::cnot(0, 0, 2), Gate::cnot(1, 1, 0)]);
        let layout = Layout::initial(&[0, 0, 1, 1], &topo).unwrap();
        let blocks = form_blocks(&dag, &layout, &topo, &CostParams::default());
        let s = schedule_pergate(&dag, &blocks, &layout, &topo).unwrap();
        let moves: Vec<_> = s
            .instructions
            .iter()
            .filter(|i| i.kind == InstrKind::Relocate)
            .map(|i| (i.qubits[0], i.from, i.to))
            .collect();
        assert_eq!(moves, vec![(0, 0, 1), (0, 1, 0)]);
        let timed = simulate_latency(&s, &topo, Policy::BlockOrder);
        validate(&timed, &dag, &topo).unwrap();
    }
}
