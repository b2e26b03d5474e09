//! Timed instruction streams.

use serde::{Deserialize, Serialize};

use crate::arch::{ChipId, Nanos};
use crate::circuit::{GateId, QubitId};
use crate::error::{Error, Result};
use crate::layout::Placement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrKind {
    LocalCnot,
    Unary,
    Relocate,
    ReCnot,
}

impl InstrKind {
    pub fn is_teleport(self) -> bool {
        matches!(self, InstrKind::Relocate | InstrKind::ReCnot)
    }

    pub fn letter(self) -> char {
        match self {
            InstrKind::LocalCnot => 'C',
            InstrKind::Unary => 'U',
            InstrKind::Relocate => 'R',
            InstrKind::ReCnot => 'X',
        }
    }
}

/// One instruction. `from`/`to` are the source and destination chip of a
/// RELOCATE, the two operand chips of a Re-CNOT, and the executing chip
/// (twice) for local gates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instr {
    pub id: usize,
    pub kind: InstrKind,
    pub qubits: Vec<QubitId>,
    pub from: ChipId,
    pub to: ChipId,
    /// Communication slot taken at `to` by a RELOCATE into a foreign chip.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateId>,
    pub block: usize,
    /// RELOCATE issued to free a communication slot.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub release: bool,
    pub start: Nanos,
    pub duration: Nanos,
}

impl Instr {
    pub fn end(&self) -> Nanos {
        self.start + self.duration
    }

    pub fn local_cnot(gate: GateId, a: QubitId, b: QubitId, chip: ChipId, block: usize) -> Self {
        Self::untimed(InstrKind::LocalCnot, vec![a, b], chip, chip, Some(gate), block)
    }

    pub fn unary(gate: GateId, q: QubitId, chip: ChipId, block: usize) -> Self {
        Self::untimed(InstrKind::Unary, vec![q], chip, chip, Some(gate), block)
    }

    pub fn recnot(gate: GateId, a: QubitId, b: QubitId, chip_a: ChipId, chip_b: ChipId, block: usize) -> Self {
        Self::untimed(InstrKind::ReCnot, vec![a, b], chip_a, chip_b, Some(gate), block)
    }

    pub fn relocate(q: QubitId, from: ChipId, to: ChipId, slot: Option<usize>, block: usize, release: bool) -> Self {
        let mut i = Self::untimed(InstrKind::Relocate, vec![q], from, to, None, block);
        i.slot = slot;
        i.release = release;
        i
    }

    fn untimed(
        kind: InstrKind,
        qubits: Vec<QubitId>,
        from: ChipId,
        to: ChipId,
        gate: Option<GateId>,
        block: usize,
    ) -> Self {
        Instr {
            id: 0,
            kind,
            qubits,
            from,
            to,
            slot: None,
            gate,
            block,
            release: false,
            start: 0,
            duration: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub schema: u32,
    /// Home placement of every program qubit; the replay starting point.
    pub initial: Vec<Placement>,
    pub instructions: Vec<Instr>,
}

impl Schedule {
    pub fn new(initial: Vec<Placement>, mut instructions: Vec<Instr>) -> Self {
        for (i, ins) in instructions.iter_mut().enumerate() {
            ins.id = i;
        }
        Schedule {
            schema: 1,
            initial,
            instructions,
        }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn makespan(&self) -> Nanos {
        self.instructions.iter().map(Instr::end).max().unwrap_or(0)
    }

    pub fn count(&self, kind: InstrKind) -> usize {
        self.instructions.iter().filter(|i| i.kind == kind).count()
    }

    /// Instruction kinds as a compact string, e.g. `"RCRC"`, skipping unary gates.
    pub fn kind_string(&self) -> String {
        self.instructions
            .iter()
            .filter(|i| i.kind != InstrKind::Unary)
            .map(|i| i.kind.letter())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Schedule = serde_json::from_str(text)?;
        if s.schema != 1 {
            return Err(Error::Invalid(format!("unsupported schedule schema {}", s.schema)));
        }
        if s.instructions.iter().enumerate().any(|(i, ins)| ins.id != i) {
            return Err(Error::Invalid("instruction ids must be dense and ordered".into()));
        }
        Ok(s)
    }

    /// One CSV row per instruction.
    pub fn to_gantt_csv(&self) -> String {
        let mut out = String::from("id,kind,qubits,from,to,gate,block,release,start_ns,duration_ns,end_ns\n");
        for i in &self.instructions {
            let qubits: Vec<String> = i.qubits.iter().map(|q| q.to_string()).collect();
            out.push_str(&format!(
                "{},{:?},{},{},{},{},{},{},{},{},{}\n",
                i.id,
                i.kind,
                qubits.join(" "),
                i.from,
                i.to,
                i.gate.map(|g| g.to_string()).unwrap_or_default(),
                i.block,
                i.release,
                i.start,
                i.duration,
                i.end()
            ));
        }
        out
    }
}
