//! Routing primitives shared by every scheduler: program order, hop-by-hop
//! relocation, and EPR release.

use crate::arch::{ChipId, Topology};
use crate::blockform::Blocks;
use crate::circuit::{GateDag, GateId, QubitId};
use crate::layout::Layout;
use crate::schedule::Instr;

/// CNOT execution order (block by block) plus bookkeeping derived from it.
pub struct Program<'a> {
    pub dag: &'a GateDag,
    pub topo: &'a Topology,
    pub blocks: &'a Blocks,
    /// CNOTs in execution order.
    pub seq: Vec<GateId>,
    /// Position of each CNOT in `seq`.
    pub seq_pos: Vec<usize>,
    /// Sorted `seq` positions of the CNOTs touching each qubit.
    uses: Vec<Vec<usize>>,
    /// Unary gates to emit right before each CNOT.
    pub before: Vec<Vec<GateId>>,
    /// Unary gates after the last CNOT on their qubit.
    pub trailing: Vec<GateId>,
}

impl<'a> Program<'a> {
    pub fn new(dag: &'a GateDag, topo: &'a Topology, blocks: &'a Blocks) -> Self {
        let seq: Vec<GateId> = blocks.blocks.iter().flat_map(|b| b.gates.iter().copied()).collect();
        let mut seq_pos = vec![usize::MAX; dag.len()];
        for (i, &g) in seq.iter().enumerate() {
            seq_pos[g] = i;
        }
        let mut uses = vec![Vec::new(); dag.qubit_count];
        for (i, &g) in seq.iter().enumerate() {
            for &q in &dag.gate(g).qubits {
                uses[q].push(i);
            }
        }
        let mut before = vec![Vec::new(); dag.len()];
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
        let mut trailing: Vec<GateId> = pending.into_iter().flatten().collect();
        trailing.sort_unstable();
        Program {
            dag,
            topo,
            blocks,
            seq,
            seq_pos,
            uses,
            before,
            trailing,
        }
    }

    /// Position of the first CNOT on `q` strictly after position `pos`.
    pub fn next_use(&self, q: QubitId, pos: usize) -> Option<usize> {
        let u = &self.uses[q];
        u.get(u.partition_point(|&p| p <= pos)).copied()
    }

    pub fn last_block(&self) -> usize {
        self.blocks.len().saturating_sub(1)
    }
}

/// A future CNOT that the cost model looks ahead to.
#[derive(Debug, Clone, Copy)]
pub struct Upcoming {
    pub a: QubitId,
    pub b: QubitId,
    /// β^d for block distance d.
    pub weight: f64,
}

/// Moves accumulated while routing one plan.
pub struct Routing {
    pub layout: Layout,
    pub ops: Vec<Instr>,
    /// RELOCATE hops serving the gate itself.
    pub hops: u32,
    /// RELOCATE hops spent on EPR releases.
    pub release_hops: u32,
}

impl Routing {
    pub fn new(layout: Layout) -> Self {
        Routing {
            layout,
            ops: Vec::new(),
            hops: 0,
            release_hops: 0,
        }
    }

    fn hop(&mut self, q: QubitId, to: ChipId, block: usize, release: bool) {
        let from = self.layout.chip_of(q);
        let slot = self.layout.move_to(q, to).expect("hop checked for a free slot");
        self.ops.push(Instr::relocate(q, from, to, slot, block, release));
        if release {
            self.release_hops += 1;
        } else {
            self.hops += 1;
        }
    }
}

/// Shortest path for `q` to `to` through chips that can take it right now,
/// preferring lowest ids. `None` if every shortest path is blocked.
pub fn free_path(layout: &Layout, topo: &Topology, q: QubitId, to: ChipId) -> Option<Vec<ChipId>> {
    let mut path = Vec::new();
    if walk(layout, topo, q, layout.chip_of(q), to, &mut path) {
        Some(path)
    } else {
        None
    }
}

fn walk(layout: &Layout, topo: &Topology, q: QubitId, at: ChipId, to: ChipId, path: &mut Vec<ChipId>) -> bool {
    if at == to {
        return true;
    }
    for n in topo.next_hops(at, to) {
        if layout.can_enter(q, n) {
            path.push(n);
            if walk(layout, topo, q, n, to, path) {
                return true;
            }
            path.pop();
        }
    }
    false
}

/// Relocate `q` to `to` along a shortest path, releasing EPR capacity on
/// full chips. Returns false if some hop could not be freed.
#[allow(clippy::too_many_arguments)]
pub fn relocate(
    r: &mut Routing,
    prog: &Program,
    q: QubitId,
    to: ChipId,
    protected: &[QubitId],
    upcoming: &[Upcoming],
    pos: usize,
    block: usize,
) -> bool {
    if let Some(path) = free_path(&r.layout, prog.topo, q, to) {
        for chip in path {
            r.hop(q, chip, block, false);
        }
        return true;
    }
    while r.layout.chip_of(q) != to {
        let at = r.layout.chip_of(q);
        let hops: Vec<ChipId> = prog.topo.next_hops(at, to).collect();
        let next = hops.iter().copied().find(|&n| r.layout.can_enter(q, n)).or_else(|| {
            hops.iter()
                .copied()
                .find(|&n| release(r, prog, n, protected, upcoming, pos, block))
        });
        match next {
            Some(n) => r.hop(q, n, block, false),
            None => return false,
        }
    }
    true
}

/// Free one communication slot on `chip`. First choice is an external
/// resident whose next use in `upcoming` has its partner on another chip it
/// can reach directly; otherwise the resident used farthest in the future
/// (lowest id on ties) goes home, or as far toward home as free slots
/// allow, clearing a slot on a neighbor if it must.
pub fn release(
    r: &mut Routing,
    prog: &Program,
    chip: ChipId,
    protected: &[QubitId],
    upcoming: &[Upcoming],
    pos: usize,
    block: usize,
) -> bool {
    release_at(r, prog, chip, protected, upcoming, pos, block, 2)
}

#[allow(clippy::too_many_arguments)]
fn release_at(
    r: &mut Routing,
    prog: &Program,
    chip: ChipId,
    protected: &[QubitId],
    upcoming: &[Upcoming],
    pos: usize,
    block: usize,
    depth: u32,
) -> bool {
    let victims: Vec<QubitId> = r.layout.externals(chip).filter(|v| !protected.contains(v)).collect();
    let mut best: Option<(u32, usize, QubitId, Vec<ChipId>)> = None;
    for &v in &victims {
        let Some((idx, up)) = upcoming.iter().enumerate().find(|(_, u)| u.a == v || u.b == v) else {
            continue;
        };
        let partner = if up.a == v { up.b } else { up.a };
        let dest = r.layout.chip_of(partner);
        if dest == chip {
            continue;
        }
        if let Some(path) = free_path(&r.layout, prog.topo, v, dest) {
            let key = (path.len() as u32, idx, v);
            if best.as_ref().is_none_or(|b| key < (b.0, b.1, b.2)) {
                best = Some((key.0, key.1, key.2, path));
            }
        }
    }
    if let Some((_, _, v, path)) = best {
        for c in path {
            r.hop(v, c, block, true);
        }
        return true;
    }
    let mut order: Vec<(std::cmp::Reverse<usize>, QubitId)> = victims
        .iter()
        .map(|&v| (std::cmp::Reverse(prog.next_use(v, pos).unwrap_or(usize::MAX)), v))
        .collect();
    order.sort_unstable();
    for &(_, v) in &order {
        if let Some(path) = free_path(&r.layout, prog.topo, v, r.layout.home(v)) {
            for c in path {
                r.hop(v, c, block, true);
            }
            return true;
        }
    }
    // Park one hop away, toward home when possible.
    for &(_, v) in &order {
        let home = r.layout.home(v);
        let mut spots: Vec<ChipId> = prog.topo.next_hops(chip, home).collect();
        for &n in prog.topo.neighbors(chip) {
            if !spots.contains(&n) {
                spots.push(n);
            }
        }
        if let Some(&n) = spots.iter().find(|&&n| r.layout.can_enter(v, n)) {
            r.hop(v, n, block, true);
            return true;
        }
        if depth > 0 {
            let mut keep = protected.to_vec();
            keep.push(v);
            for &n in &spots {
                if release_at(r, prog, n, &keep, upcoming, pos, block, depth - 1) {
                    r.hop(v, n, block, true);
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockform::{form_blocks, CostParams};
    use crate::fixtures::three_chip_share;

    #[test]
    fn unaries_attach_to_next_cnot() {
        use crate::circuit::{build_dag, Gate};
        let topo = Topology::line(2, 4, 0.5).unwrap();
        let dag = build_dag(
            3,
            vec![
                Gate::unary(0, 0, "h"),
                Gate::cnot(1, 0, 1),
                Gate::unary(2, 1, "x"),
                Gate::cnot(3, 1, 2),
                Gate::unary(4, 2, "z"),
            ],
        );
        let layout = Layout::initial(&[0, 0, 1], &topo).unwrap();
        let blocks = form_blocks(&dag, &layout, &topo, &CostParams::default());
        let p = Program::new(&dag, &topo, &blocks);
        assert_eq!(p.before[1], vec![0]);
        assert_eq!(p.before[3], vec![2]);
        assert_eq!(p.trailing, vec![4]);
        assert_eq!(p.next_use(1, 0), Some(1));
        assert_eq!(p.next_use(0, 0), None);
    }

    #[test]
    fn release_sends_farthest_home() {
        let (dag, layout, topo) = three_chip_share();
        let blocks = form_blocks(&dag, &layout, &topo, &CostParams::default());
        let prog = Program::new(&dag, &topo, &blocks);
        let mut r = Routing::new(layout);
        assert!(relocate(&mut r, &prog, 0, 1, &[0, 2], &[], 0, 0));
        assert!(relocate(&mut r, &prog, 4, 1, &[0, 4], &[], 1, 0));
        assert_eq!(r.layout.free_comm(1), 0);
        assert!(relocate(&mut r, &prog, 1, 1, &[1, 3], &[], 2, 1));
        let kinds: Vec<_> = r.ops.iter().map(|i| (i.qubits[0], i.from, i.to, i.release)).collect();
        assert_eq!(
            kinds,
            vec![(0, 0, 1, false), (4, 2, 1, false), (0, 1, 0, true), (1, 0, 1, false)]
        );
        assert_eq!((r.hops, r.release_hops), (3, 1));
    }
}
