//! Block formation: fuse CNOTs that share qubits into blocks whenever the
//! fused block is no more expensive than its parts and still fits some
//! chip's EPR capacity.

use serde::{Deserialize, Serialize};

use crate::arch::{ChipId, Topology};
use crate::circuit::{GateDag, GateId, QubitId};
use crate::layout::Layout;

/// Scheduling knobs shared by block formation and the schedulers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    pub alpha: f64,
    pub beta: f64,
    pub beam: usize,
    pub window: usize,
    pub max_block: usize,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            alpha: 1.77,
            beta: 0.871,
            beam: 16,
            window: 4,
            max_block: 64,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.to_string()));
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if self.beam == 0 {
            return bad("beam width must be at least 1");
        }
        if self.max_block == 0 {
            return bad("max block size must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: usize,
    pub gates: Vec<GateId>,
    /// Sorted, distinct.
    pub qubits: Vec<QubitId>,
    /// Cheapest chip under the layout the block was formed against.
    pub chip: ChipId,
    /// Per-chip cost under that layout; `None` where infeasible.
    pub costs: Vec<Option<f64>>,
}

/// One fusion attempt, kept for auditing the merge rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fusion {
    pub block: usize,
    pub c_cost: f64,
    pub d_cost: f64,
    pub merged_cost: f64,
    pub d_len: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub blocks: Vec<Block>,
    /// Block index per gate; `usize::MAX` for unary gates.
    pub block_of: Vec<usize>,
    pub trace: Vec<Fusion>,
}

impl Blocks {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn to_json(&self) -> String {
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .map(|b| {
                serde_json::json!({
                    "id": b.id,
                    "gates": b.gates,
                    "qubits": b.qubits,
                    "chip": b.chip,
                    "costs": b.costs,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "schema": 1, "blocks": blocks })).expect("blocks serialize")
    }
}

pub fn overlap_qubits(a: &Block, b: &Block) -> Vec<QubitId> {
    a.qubits
        .iter()
        .copied()
        .filter(|q| b.qubits.binary_search(q).is_ok())
        .collect()
}

pub(crate) fn gate_qubits(dag: &GateDag, gates: &[GateId]) -> Vec<QubitId> {
    let mut qs: Vec<QubitId> = gates.iter().flat_map(|&g| dag.gate(g).qubits.iter().copied()).collect();
    qs.sort_unstable();
    qs.dedup();
    qs
}

/// Teleportation cost of running `gates` on `chip`: hops for every operand
/// that must relocate there, or `alpha` for a single-use operand on an
/// adjacent chip whose partner already sits on `chip` when a Re-CNOT is
/// cheaper. Infinite when the visitors would exceed the chip's EPR capacity.
pub fn block_cost(dag: &GateDag, gates: &[GateId], layout: &Layout, chip: ChipId, topo: &Topology, alpha: f64) -> f64 {
    let (cost, visitors) = block_cost_parts(dag, gates, layout, chip, topo, alpha);
    if visitors > topo.epr_capacity(chip) {
        f64::INFINITY
    } else {
        cost
    }
}

fn block_cost_parts(
    dag: &GateDag,
    gates: &[GateId],
    layout: &Layout,
    chip: ChipId,
    topo: &Topology,
    alpha: f64,
) -> (f64, usize) {
    block_cost_at(dag, gates, layout.positions(), layout, chip, topo, alpha)
}

/// Cost and visitor count of running `gates` on `chip` with qubits at
/// `pos` (homes still come from `layout`).
pub(crate) fn block_cost_at(
    dag: &GateDag,
    gates: &[GateId],
    pos: &[ChipId],
    layout: &Layout,
    chip: ChipId,
    topo: &Topology,
    alpha: f64,
) -> (f64, usize) {
    let qubits = gate_qubits(dag, gates);
    let mut cost = 0.0;
    let mut visitors = 0;
    for &q in &qubits {
        let at = pos[q];
        if at == chip {
            if !layout.is_home(q) {
                visitors += 1;
            }
            continue;
        }
        let hops = topo.hops(at, chip) as f64;
        let mut uses = gates.iter().filter(|&&g| dag.gate(g).touches(q));
        let single = uses.next().zip(uses.next().is_none().then_some(())).map(|(g, _)| *g);
        let remote = single.is_some_and(|g| {
            let (a, b) = dag.gate(g).pair();
            let partner = if a == q { b } else { a };
            pos[partner] == chip && topo.adjacent(at, chip)
        });
        if remote && alpha < hops {
            cost += alpha;
        } else {
            cost += hops;
            if layout.home(q) != chip {
                visitors += 1;
            }
        }
    }
    (cost, visitors)
}

/// Cheapest chip for `gates` (ties to the lowest id).
pub fn min_block_cost(dag: &GateDag, gates: &[GateId], layout: &Layout, topo: &Topology, alpha: f64) -> (f64, ChipId) {
    let mut best = (f64::INFINITY, 0);
    for chip in 0..topo.chip_count() {
        let c = block_cost(dag, gates, layout, chip, topo, alpha);
        if c < best.0 {
            best = (c, chip);
        }
    }
    best
}

/// The CNOT immediately preceding each CNOT on each of its qubits.
struct CnotOrder {
    on_qubit: Vec<Vec<GateId>>,
}

impl CnotOrder {
    fn new(dag: &GateDag) -> Self {
        let mut on_qubit = vec![Vec::new(); dag.qubit_count];
        for g in dag.gates.iter().filter(|g| g.is_cnot()) {
            for &q in &g.qubits {
                on_qubit[q].push(g.id);
            }
        }
        CnotOrder { on_qubit }
    }

    fn next(&self, cursor: &[usize], q: QubitId) -> Option<GateId> {
        self.on_qubit[q].get(cursor[q]).copied()
    }

    fn ready(&self, cursor: &[usize], dag: &GateDag, g: GateId) -> bool {
        dag.gate(g).qubits.iter().all(|&q| self.next(cursor, q) == Some(g))
    }

    fn advance(&self, cursor: &mut [usize], dag: &GateDag, g: GateId) {
        for &q in &dag.gate(g).qubits {
            debug_assert_eq!(self.next(cursor, q), Some(g));
            cursor[q] += 1;
        }
    }
}

/// Group every CNOT into exactly one block. Blocks come out in an order
/// that respects all dependencies.
pub fn form_blocks(dag: &GateDag, layout: &Layout, topo: &Topology, params: &CostParams) -> Blocks {
    let alpha = params.alpha;
    let order = CnotOrder::new(dag);
    let mut cursor = vec![0usize; dag.qubit_count];
    let mut assigned = vec![false; dag.len()];
    let mut block_of = vec![usize::MAX; dag.len()];
    let mut blocks = Vec::new();
    let mut trace = Vec::new();
    let cost = |gates: &[GateId]| min_block_cost(dag, gates, layout, topo, alpha).0;
    let mut next_id = 0;
    loop {
        while next_id < dag.len() && (assigned[next_id] || !dag.gate(next_id).is_cnot()) {
            next_id += 1;
        }
        if next_id == dag.len() {
            break;
        }
        let first = next_id;
        let mut c = vec![first];
        order.advance(&mut cursor, dag, first);
        assigned[first] = true;
        let mut c_cost = cost(&c);
        'grow: loop {
            let qc = gate_qubits(dag, &c);
            let mut tentative = cursor.clone();
            let mut d: Vec<GateId> = Vec::new();
            while c.len() + d.len() < params.max_block {
                let pick = qc
                    .iter()
                    .filter_map(|&q| order.next(&tentative, q))
                    .filter(|&g| order.ready(&tentative, dag, g))
                    .min();
                let Some(g) = pick else { break };
                order.advance(&mut tentative, dag, g);
                d.push(g);
            }
            while !d.is_empty() {
                let merged: Vec<GateId> = c.iter().chain(d.iter()).copied().collect();
                let merged_cost = cost(&merged);
                let d_cost = cost(&d);
                let accepted = merged_cost.is_finite() && merged_cost <= c_cost + d_cost;
                trace.push(Fusion {
                    block: blocks.len(),
                    c_cost,
                    d_cost,
                    merged_cost,
                    d_len: d.len(),
                    accepted,
                });
                if accepted {
                    for &g in &d {
                        order.advance(&mut cursor, dag, g);
                        assigned[g] = true;
                    }
                    c = merged;
                    c_cost = merged_cost;
                    continue 'grow;
                }
                d.pop();
            }
            break;
        }
        c.sort_unstable();
        let costs: Vec<Option<f64>> = (0..topo.chip_count())
            .map(|chip| Some(block_cost(dag, &c, layout, chip, topo, alpha)).filter(|v| v.is_finite()))
            .collect();
        let (_, chip) = min_block_cost(dag, &c, layout, topo, alpha);
        for &g in &c {
            block_of[g] = blocks.len();
        }
        blocks.push(Block {
            id: blocks.len(),
            qubits: gate_qubits(dag, &c),
            gates: c,
            chip,
            costs,
        });
    }
    Blocks {
        blocks,
        block_of,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_dag, Gate};
    use crate::fixtures::{single_slot_pair, three_chip_share};

    #[test]
    fn single_slot_costs_and_fusion() {
        let (dag, layout, topo) = single_slot_pair();
        assert_eq!(topo.epr_capacity(0), 1);
        assert_eq!(block_cost(&dag, &[0], &layout, 0, &topo, 1.77), 1.0);
        assert_eq!(block_cost(&dag, &[0], &layout, 1, &topo, 1.77), 1.0);
        assert_eq!(min_block_cost(&dag, &[0, 1], &layout, &topo, 1.77).0, 1.0);
        assert!(min_block_cost(&dag, &[0, 1, 2], &layout, &topo, 1.77).0.is_infinite());
        let b = form_blocks(&dag, &layout, &topo, &CostParams::default());
        assert_eq!(b.blocks[0].gates, vec![0, 1]);
        assert_eq!(b.blocks[1].gates, vec![2]);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn resident_and_recnot_costs() {
        let (dag, layout, topo) = single_slot_pair();
        let local = build_dag(4, vec![Gate::cnot(0, 0, 1)]);
        assert_eq!(block_cost(&local, &[0], &layout, 0, &topo, 1.77), 0.0);
        // Re-CNOT (alpha) versus one RELOCATE hop: the hop wins at 1.77, the
        // Re-CNOT wins once alpha drops below one hop.
        assert_eq!(block_cost(&dag, &[0], &layout, 1, &topo, 1.77), 1.0);
        assert_eq!(block_cost(&dag, &[0], &layout, 1, &topo, 0.5), 0.5);
    }

    #[test]
    fn share_fixture_two_blocks() {
        let (dag, layout, topo) = three_chip_share();
        let b = form_blocks(&dag, &layout, &topo, &CostParams::default());
        let gates: Vec<_> = b.blocks.iter().map(|b| b.gates.clone()).collect();
        assert_eq!(gates, vec![vec![0, 1], vec![2, 3, 4]]);
        assert_eq!(b.blocks[0].chip, 1);
        assert_eq!(b.blocks[0].costs[1], Some(2.0));
    }

    #[test]
    fn disjoint_gates_stay_apart() {
        let topo = Topology::line(2, 5, 0.8).unwrap();
        let dag = build_dag(8, vec![Gate::cnot(0, 0, 4), Gate::cnot(1, 1, 5), Gate::cnot(2, 2, 6)]);
        let layout = Layout::initial(&[0, 0, 0, 0, 1, 1, 1, 1], &topo).unwrap();
        let b = form_blocks(&dag, &layout, &topo, &CostParams::default());
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn overlap() {
        let mk = |qubits: Vec<QubitId>| Block {
            id: 0,
            gates: vec![],
            qubits,
            chip: 0,
            costs: vec![],
        };
        assert!(overlap_qubits(&mk(vec![0, 1]), &mk(vec![2, 3])).is_empty());
        assert_eq!(overlap_qubits(&mk(vec![0, 1]), &mk(vec![0, 1])), vec![0, 1]);
        assert_eq!(overlap_qubits(&mk(vec![0, 3, 5]), &mk(vec![0, 4])), vec![0]);
    }

    mod props {
        use super::*;
        use crate::circuit::tests::random_gates;
        use crate::mapping::{map_program, Mapper};
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn blocks_partition_and_order(seed in 0u64..10_000, n in 4usize..12, m in 1usize..60, cap in 1usize..3) {
                let dag = build_dag(n, random_gates(n, m, seed));
                let topo = Topology::grid(2, 2, n.div_ceil(4) + cap + 1, 0.5).ok();
                prop_assume!(topo.is_some());
                let topo = topo.unwrap();
                let layout = map_program(&dag, &topo, Mapper::Trivial, 0);
                prop_assume!(layout.is_ok());
                let layout = layout.unwrap();
                let params = CostParams { max_block: 8, ..CostParams::default() };
                let b = form_blocks(&dag, &layout, &topo, &params);
                let mut seen = vec![0; dag.len()];
                for blk in &b.blocks {
                    prop_assert!(blk.gates.len() <= 8);
                    prop_assert!(blk.costs.iter().any(|c| c.is_some()));
                    for &g in &blk.gates {
                        seen[g] += 1;
                    }
                }
                for g in &dag.gates {
                    prop_assert_eq!(seen[g.id], usize::from(g.is_cnot()));
                }
                // Earlier-in-program dependencies never land in later blocks.
                for g in dag.gates.iter().filter(|g| g.is_cnot()) {
                    for &p in dag.preds(g.id) {
                        if dag.gate(p).is_cnot() {
                            prop_assert!(b.block_of[p] <= b.block_of[g.id]);
                        }
                    }
                }
                for f in &b.trace {
                    if f.accepted {
                        prop_assert!(f.merged_cost <= f.c_cost + f.d_cost);
                    }
                }
            }
        }
    }
}
