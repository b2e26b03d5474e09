//! Small hand-built instances shared by tests and examples.

use crate::arch::Topology;
use crate::circuit::{build_dag, Gate, GateDag};
use crate::layout::Layout;

/// Two chips, one comm slot each; 0,1 on A and 2,3 on B.
pub fn single_slot_pair() -> (GateDag, Layout, Topology) {
    let topo = Topology::line(2, 3, 0.67).expect("valid line");
    let dag = build_dag(4, vec![Gate::cnot(0, 0, 2), Gate::cnot(1, 1, 2), Gate::cnot(2, 1, 3)]);
    let layout = Layout::initial(&[0, 0, 1, 1], &topo).expect("fits");
    (dag, layout, topo)
}

/// Three chips in a line, two compute and two comm qubits each. The first
/// block (gates 0 and 1) is cheapest on the middle chip; the second then
/// needs qubit 1 there while qubit 0 still holds a slot.
pub fn three_chip_share() -> (GateDag, Layout, Topology) {
    let topo = Topology::line(3, 4, 0.5).expect("valid line");
    let gates = vec![
        Gate::cnot(0, 0, 2),
        Gate::cnot(1, 0, 4),
        Gate::cnot(2, 1, 3),
        Gate::cnot(3, 1, 2),
        Gate::cnot(4, 2, 3),
    ];
    let dag = build_dag(6, gates);
    let layout = Layout::initial(&[0, 0, 1, 1, 2, 2], &topo).expect("fits");
    (dag, layout, topo)
}

/// Instruction kinds block-greedy emits on [`three_chip_share`].
pub const THREE_CHIP_SHARE_KINDS: &str = "RCRCRRCCC";
