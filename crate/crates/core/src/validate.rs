//! Independent schedule checker. Replays a timed schedule event by event
//! from the home layout and reports every rule it breaks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arch::{Nanos, Topology};
use crate::circuit::{GateDag, GateKind};
use crate::schedule::{InstrKind, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Capacity,
    Dependency,
    NonLocalCnot,
    NotAdjacent,
    WrongPosition,
    QubitOverlap,
    SlotConflict,
    LinkOverload,
    MissingGate,
    DuplicateGate,
    Malformed,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Capacity => "EPR capacity",
            ViolationKind::Dependency => "dependency",
            ViolationKind::NonLocalCnot => "non-local CNOT",
            ViolationKind::NotAdjacent => "non-adjacent chips",
            ViolationKind::WrongPosition => "wrong qubit position",
            ViolationKind::QubitOverlap => "qubit overlap",
            ViolationKind::SlotConflict => "slot conflict",
            ViolationKind::LinkOverload => "link overload",
            ViolationKind::MissingGate => "missing gate",
            ViolationKind::DuplicateGate => "duplicate gate",
            ViolationKind::Malformed => "malformed instruction",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub instr: Option<usize>,
    pub time: Nanos,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Report {
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            match v.instr {
                Some(i) => writeln!(f, "t={}ns instr {}: {}: {}", v.time, i, v.kind, v.message)?,
                None => writeln!(f, "{}: {}", v.kind, v.message)?,
            }
        }
        Ok(())
    }
}

/// Check a timed schedule against the DAG and machine. `Ok` means no
/// violations; otherwise the report lists them in time order.
pub fn validate(schedule: &Schedule, dag: &GateDag, topo: &Topology) -> Result<(), Report> {
    let report = check(schedule, dag, topo);
    if report.is_ok() {
        Ok(())
    } else {
        Err(report)
    }
}

fn bad(out: &mut Vec<Violation>, kind: ViolationKind, instr: Option<usize>, time: Nanos, message: String) {
    out.push(Violation {
        kind,
        instr,
        time,
        message,
    });
}

pub fn check(schedule: &Schedule, dag: &GateDag, topo: &Topology) -> Report {
    let mut out = Vec::new();
    let nq = dag.qubit_count;
    if schedule.initial.len() != nq {
        bad(
            &mut out,
            ViolationKind::Malformed,
            None,
            0,
            format!("initial layout has {} qubits, circuit has {nq}", schedule.initial.len()),
        );
        return Report { violations: out };
    }
    let chips = topo.chip_count();
    let home: Vec<usize> = schedule.initial.iter().map(|p| p.chip).collect();
    let mut seen_home = std::collections::HashSet::new();
    for (q, p) in schedule.initial.iter().enumerate() {
        if p.chip >= chips || p.slot >= topo.compute_qubits(p.chip) || !seen_home.insert((p.chip, p.slot)) {
            bad(
                &mut out,
                ViolationKind::Malformed,
                None,
                0,
                format!("bad home placement for qubit {q}"),
            );
        }
    }
    if !out.is_empty() {
        return Report { violations: out };
    }

    let mut events: Vec<(Nanos, u8, usize)> = Vec::with_capacity(2 * schedule.len());
    for ins in &schedule.instructions {
        let ok_shape = match ins.kind {
            InstrKind::LocalCnot | InstrKind::ReCnot => ins.qubits.len() == 2 && ins.qubits[0] != ins.qubits[1],
            InstrKind::Unary | InstrKind::Relocate => ins.qubits.len() == 1,
        } && ins.qubits.iter().all(|&q| q < nq)
            && ins.from < chips
            && ins.to < chips
            && ins.duration > 0;
        let gate_ok = match (ins.kind, ins.gate) {
            (InstrKind::Relocate, None) => true,
            (InstrKind::Relocate, Some(_)) => false,
            (_, Some(g)) => {
                g < dag.len()
                    && dag.gate(g).qubits == ins.qubits
                    && (dag.gate(g).kind == GateKind::Unary) == (ins.kind == InstrKind::Unary)
            }
            (_, None) => false,
        };
        if !ok_shape || !gate_ok {
            bad(
                &mut out,
                ViolationKind::Malformed,
                Some(ins.id),
                ins.start,
                format!("{:?} is malformed", ins.kind),
            );
            continue;
        }
        events.push((ins.start, 1, ins.id));
        events.push((ins.end(), 0, ins.id));
    }
    // Ends before starts at equal times.
    events.sort_unstable();

    let mut loc = home.clone();
    let mut moving = vec![false; nq];
    let mut busy: Vec<Option<usize>> = vec![None; nq];
    let mut comm: Vec<Option<usize>> = vec![None; nq];
    let mut slots: Vec<Vec<Option<usize>>> = (0..chips).map(|c| vec![None; topo.epr_capacity(c)]).collect();
    let mut visitors = vec![0usize; chips];
    let mut link_use = vec![0usize; topo.edges().len()];
    let mut done = vec![false; dag.len()];
    let mut count = vec![0usize; dag.len()];

    for (time, is_start, id) in events {
        let ins = &schedule.instructions[id];
        let link = if ins.kind.is_teleport() {
            topo.edge_index(ins.from, ins.to)
        } else {
            None
        };
        if is_start == 0 {
            for &q in &ins.qubits {
                busy[q] = None;
            }
            if let Some(g) = ins.gate {
                done[g] = true;
            }
            if let Some(l) = link {
                link_use[l] -= 1;
            }
            if ins.kind == InstrKind::Relocate {
                let q = ins.qubits[0];
                if let Some(s) = comm[q].take() {
                    slots[ins.from][s] = None;
                    visitors[ins.from] -= 1;
                }
                comm[q] = ins.slot.filter(|_| ins.to != home[q]);
                loc[q] = ins.to;
                moving[q] = false;
            }
            continue;
        }

        for &q in &ins.qubits {
            if let Some(other) = busy[q] {
                bad(
                    &mut out,
                    ViolationKind::QubitOverlap,
                    Some(id),
                    time,
                    format!("qubit {q} still busy with instr {other}"),
                );
            }
            busy[q] = Some(id);
        }
        if let Some(g) = ins.gate {
            count[g] += 1;
            if count[g] > 1 {
                bad(
                    &mut out,
                    ViolationKind::DuplicateGate,
                    Some(id),
                    time,
                    format!("gate {g} executed again"),
                );
            }
            for &p in dag.preds(g) {
                if !done[p] {
                    bad(
                        &mut out,
                        ViolationKind::Dependency,
                        Some(id),
                        time,
                        format!("gate {g} starts before gate {p} finished"),
                    );
                }
            }
        }
        if ins.kind.is_teleport() {
            match link {
                Some(l) => {
                    link_use[l] += 1;
                    if link_use[l] > topo.links_per_edge {
                        bad(
                            &mut out,
                            ViolationKind::LinkOverload,
                            Some(id),
                            time,
                            format!(
                                "link {}-{} over {} concurrent uses",
                                ins.from, ins.to, topo.links_per_edge
                            ),
                        );
                    }
                }
                None => bad(
                    &mut out,
                    ViolationKind::NotAdjacent,
                    Some(id),
                    time,
                    format!("chips {} and {} are not adjacent", ins.from, ins.to),
                ),
            }
        }
        match ins.kind {
            InstrKind::Unary => {
                let q = ins.qubits[0];
                if loc[q] != ins.from || moving[q] {
                    bad(
                        &mut out,
                        ViolationKind::WrongPosition,
                        Some(id),
                        time,
                        format!("qubit {q} is not on chip {}", ins.from),
                    );
                }
            }
            InstrKind::LocalCnot => {
                let (a, b) = (ins.qubits[0], ins.qubits[1]);
                if moving[a] || moving[b] || loc[a] != ins.from || loc[b] != ins.from {
                    bad(
                        &mut out,
                        ViolationKind::NonLocalCnot,
                        Some(id),
                        time,
                        format!("qubits {a}, {b} are not both settled on chip {}", ins.from),
                    );
                }
            }
            InstrKind::ReCnot => {
                let (a, b) = (ins.qubits[0], ins.qubits[1]);
                if moving[a] || moving[b] || loc[a] != ins.from || loc[b] != ins.to {
                    bad(
                        &mut out,
                        ViolationKind::WrongPosition,
                        Some(id),
                        time,
                        format!("Re-CNOT operands not on chips {} and {}", ins.from, ins.to),
                    );
                }
            }
            InstrKind::Relocate => {
                let q = ins.qubits[0];
                if moving[q] || loc[q] != ins.from {
                    bad(
                        &mut out,
                        ViolationKind::WrongPosition,
                        Some(id),
                        time,
                        format!("qubit {q} is not on chip {}", ins.from),
                    );
                }
                moving[q] = true;
                if ins.to != home[q] {
                    visitors[ins.to] += 1;
                    if visitors[ins.to] > topo.epr_capacity(ins.to) {
                        bad(
                            &mut out,
                            ViolationKind::Capacity,
                            Some(id),
                            time,
                            format!("chip {} would host {} external qubits", ins.to, visitors[ins.to]),
                        );
                    }
                    match ins.slot {
                        Some(s) if s < slots[ins.to].len() => {
                            if let Some(other) = slots[ins.to][s] {
                                bad(
                                    &mut out,
                                    ViolationKind::SlotConflict,
                                    Some(id),
                                    time,
                                    format!("slot {s} on chip {} still holds qubit {other}", ins.to),
                                );
                            }
                            slots[ins.to][s] = Some(q);
                        }
                        _ => bad(
                            &mut out,
                            ViolationKind::Malformed,
                            Some(id),
                            time,
                            "foreign arrival needs a comm slot".into(),
                        ),
                    }
                } else if ins.slot.is_some() {
                    bad(
                        &mut out,
                        ViolationKind::Malformed,
                        Some(id),
                        time,
                        "homecoming must not take a comm slot".into(),
                    );
                }
            }
        }
    }
    for g in &dag.gates {
        if count[g.id] == 0 {
            bad(
                &mut out,
                ViolationKind::MissingGate,
                None,
                0,
                format!("gate {} never executes", g.id),
            );
        }
    }
    out.sort_by_key(|v| (v.instr.is_none(), v.time, v.instr));
    Report { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_dag, Gate};
    use crate::layout::Placement;
    use crate::schedule::Instr;
    use crate::timing::{simulate_latency, Policy};

    fn setup() -> (GateDag, Topology, Vec<Placement>) {
        // Two chips, one comm slot each; 0,1 home on chip 0, 2,3 on chip 1.
        let topo = Topology::line(2, 3, 0.67).unwrap();
        let dag = build_dag(4, vec![Gate::cnot(0, 0, 2), Gate::cnot(1, 1, 2)]);
        let initial = vec![
            Placement { chip: 0, slot: 0 },
            Placement { chip: 0, slot: 1 },
            Placement { chip: 1, slot: 0 },
            Placement { chip: 1, slot: 1 },
        ];
        (dag, topo, initial)
    }

    fn timed(initial: Vec<Placement>, instrs: Vec<Instr>, topo: &Topology) -> Schedule {
        simulate_latency(&Schedule::new(initial, instrs), topo, Policy::Asap)
    }

    #[test]
    fn accepts_a_clean_schedule() {
        let (dag, topo, initial) = setup();
        let s = timed(
            initial,
            vec![
                Instr::relocate(2, 1, 0, Some(0), 0, false),
                Instr::local_cnot(0, 0, 2, 0, 0),
                Instr::local_cnot(1, 1, 2, 0, 0),
            ],
            &topo,
        );
        assert!(validate(&s, &dag, &topo).is_ok());
    }

    #[test]
    fn capacity_breach() {
        let (dag, topo, initial) = setup();
        let topo = topo.with_links_per_edge(2);
        let mut s = timed(
            initial,
            vec![
                Instr::relocate(0, 0, 1, Some(0), 0, false),
                Instr::relocate(1, 0, 1, Some(1), 0, false),
                Instr::local_cnot(0, 0, 2, 1, 0),
                Instr::local_cnot(1, 1, 2, 1, 0),
            ],
            &topo,
        );
        // Force both arrivals to overlap.
        s.instructions[1].start = s.instructions[0].start;
        let r = validate(&s, &dag, &topo).unwrap_err();
        assert!(r.has(ViolationKind::Capacity), "{r}");
        assert_eq!(r.first().unwrap().to_string_kind(), "EPR capacity");
    }

    #[test]
    fn dependency_breach() {
        let (dag, topo, initial) = setup();
        let mut s = timed(
            initial,
            vec![
                Instr::relocate(2, 1, 0, Some(0), 0, false),
                Instr::local_cnot(0, 0, 2, 0, 0),
                Instr::local_cnot(1, 1, 2, 0, 0),
            ],
            &topo,
        );
        // Gate 1 runs before gate 0 even though both use qubit 2.
        let t = s.instructions[1].start;
        s.instructions[2].start = t;
        s.instructions[1].start = s.instructions[2].end();
        let r = validate(&s, &dag, &topo).unwrap_err();
        assert!(r.has(ViolationKind::Dependency), "{r}");
    }

    #[test]
    fn cnot_before_relocate_lands() {
        let (dag, topo, initial) = setup();
        let mut s = timed(
            initial,
            vec![
                Instr::relocate(2, 1, 0, Some(0), 0, false),
                Instr::local_cnot(0, 0, 2, 0, 0),
                Instr::local_cnot(1, 1, 2, 0, 0),
            ],
            &topo,
        );
        s.instructions[1].start = 1000;
        let r = validate(&s, &dag, &topo).unwrap_err();
        assert!(r.has(ViolationKind::NonLocalCnot), "{r}");
    }

    #[test]
    fn missing_and_nonadjacent() {
        let topo = Topology::line(3, 4, 0.5).unwrap();
        let dag = build_dag(2, vec![Gate::cnot(0, 0, 1)]);
        let initial = vec![Placement { chip: 0, slot: 0 }, Placement { chip: 2, slot: 0 }];
        let mut s = Schedule::new(initial, vec![Instr::recnot(0, 0, 1, 0, 2, 0)]);
        s.instructions[0].duration = 10;
        let r = validate(&s, &dag, &topo).unwrap_err();
        assert!(r.has(ViolationKind::NotAdjacent));
        let empty = Schedule::new(s.initial.clone(), vec![]);
        assert!(validate(&empty, &dag, &topo)
            .unwrap_err()
            .has(ViolationKind::MissingGate));
    }

    impl Violation {
        fn to_string_kind(&self) -> String {
            self.kind.to_string()
        }
    }
}
