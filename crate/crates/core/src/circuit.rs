//! Circuit intermediate representation and dependency DAG.
//!
//! Two input formats are accepted: a small OpenQASM 2.0 subset ("qasm-lite")
//! and a canonical JSON form. Gate ids follow textual order and stay stable
//! through every later stage, so schedules can point back at the gates they
//! execute.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type QubitId = usize;
pub type GateId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Cnot,
    Unary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub id: GateId,
    pub kind: GateKind,
    /// `[control, target]` for a CNOT, a single qubit for a unary gate.
    pub qubits: Vec<QubitId>,
    pub label: Option<String>,
}

impl Gate {
    pub fn cnot(id: GateId, control: QubitId, target: QubitId) -> Self {
        Gate {
            id,
            kind: GateKind::Cnot,
            qubits: vec![control, target],
            label: None,
        }
    }

    pub fn unary(id: GateId, qubit: QubitId, label: &str) -> Self {
        Gate {
            id,
            kind: GateKind::Unary,
            qubits: vec![qubit],
            label: Some(label.to_string()),
        }
    }

    pub fn is_cnot(&self) -> bool {
        self.kind == GateKind::Cnot
    }

    /// Both operands of a CNOT. Panics on unary gates.
    pub fn pair(&self) -> (QubitId, QubitId) {
        assert!(self.is_cnot(), "gate {} is not a CNOT", self.id);
        (self.qubits[0], self.qubits[1])
    }

    pub fn touches(&self, q: QubitId) -> bool {
        self.qubits.contains(&q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    QasmLite,
    Json,
}

impl Format {
    /// Guess the format from a file name, defaulting to JSON.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("qasm") => Format::QasmLite,
            _ => Format::Json,
        }
    }
}

/// Dependency DAG over gates. Edges link each gate to the previous gate on
/// each of its qubits (last-writer chaining); no transitive reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDag {
    pub gates: Vec<Gate>,
    pub qubit_count: usize,
    preds: Vec<Vec<GateId>>,
    succs: Vec<Vec<GateId>>,
}

impl GateDag {
    pub fn new(qubit_count: usize, gates: Vec<Gate>) -> Result<Self> {
        for (i, g) in gates.iter().enumerate() {
            if g.id != i {
                return Err(Error::Circuit(format!(
                    "gate ids must be dense: position {i} has id {}",
                    g.id
                )));
            }
            let arity = match g.kind {
                GateKind::Cnot => 2,
                GateKind::Unary => 1,
            };
            if g.qubits.len() != arity {
                return Err(Error::Circuit(format!(
                    "gate {i} has {} operands, expected {arity}",
                    g.qubits.len()
                )));
            }
            if arity == 2 && g.qubits[0] == g.qubits[1] {
                return Err(Error::Circuit(format!("gate {i} uses qubit {} twice", g.qubits[0])));
            }
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= qubit_count) {
                return Err(Error::Circuit(format!(
                    "gate {i} uses qubit {q} but only {qubit_count} qubits exist"
                )));
            }
        }
        Ok(build_dag(qubit_count, gates))
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id]
    }

    pub fn preds(&self, id: GateId) -> &[GateId] {
        &self.preds[id]
    }

    pub fn succs(&self, id: GateId) -> &[GateId] {
        &self.succs[id]
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cnot()).count()
    }

    pub fn edge_count(&self) -> usize {
        self.preds.iter().map(Vec::len).sum()
    }

    /// Gates not in `done` whose predecessors are all in `done`.
    pub fn frontier(&self, done: &[bool]) -> Result<Vec<GateId>> {
        if done.len() != self.len() {
            return Err(Error::Circuit(format!(
                "done set has {} entries for {} gates",
                done.len(),
                self.len()
            )));
        }
        let mut out = Vec::new();
        for id in 0..self.len() {
            let ready = self.preds[id].iter().all(|&p| done[p]);
            if done[id] {
                if !ready {
                    return Err(Error::Circuit(format!(
                        "done set is not dependency-closed at gate {id}"
                    )));
                }
            } else if ready {
                out.push(id);
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let doc = JsonCircuit {
            qubits: self.qubit_count,
            gates: self
                .gates
                .iter()
                .map(|g| JsonGate {
                    kind: match g.kind {
                        GateKind::Cnot => "cnot".into(),
                        GateKind::Unary => "u".into(),
                    },
                    q: g.qubits.clone(),
                    label: g.label.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("circuit serializes")
    }

    pub fn to_qasm(&self) -> String {
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        out.push_str(&format!("qreg q[{}];\n", self.qubit_count));
        for g in &self.gates {
            match g.kind {
                GateKind::Cnot => out.push_str(&format!("cx q[{}],q[{}];\n", g.qubits[0], g.qubits[1])),
                GateKind::Unary => {
                    out.push_str(&format!("{} q[{}];\n", g.label.as_deref().unwrap_or("u"), g.qubits[0]))
                }
            }
        }
        out
    }
}

/// Immediate last-writer edges per qubit.
pub fn build_dag(qubit_count: usize, gates: Vec<Gate>) -> GateDag {
    let mut last: Vec<Option<GateId>> = vec![None; qubit_count];
    let mut preds = vec![Vec::new(); gates.len()];
    let mut succs = vec![Vec::new(); gates.len()];
    for g in &gates {
        for &q in &g.qubits {
            if let Some(p) = last[q] {
                if !preds[g.id].contains(&p) {
                    preds[g.id].push(p);
                    succs[p].push(g.id);
                }
            }
            last[q] = Some(g.id);
        }
    }
    GateDag {
        gates,
        qubit_count,
        preds,
        succs,
    }
}

pub fn parse_circuit(source: &str, format: Format) -> Result<GateDag> {
    match format {
        Format::Json => parse_json(source),
        Format::QasmLite => parse_qasm(source),
    }
}

#[derive(Serialize, Deserialize)]
struct JsonCircuit {
    qubits: usize,
    gates: Vec<JsonGate>,
}

#[derive(Serialize, Deserialize)]
struct JsonGate {
    kind: String,
    q: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

fn parse_json(source: &str) -> Result<GateDag> {
    let doc: JsonCircuit =
        serde_json::from_str(source).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
    let mut gates = Vec::with_capacity(doc.gates.len());
    for (id, g) in doc.gates.into_iter().enumerate() {
        if let Some(&q) = g.q.iter().find(|&&q| q >= doc.qubits) {
            return Err(Error::Circuit(format!(
                "gate {id}: qubit id {q} is not dense in 0..{}",
                doc.qubits
            )));
        }
        let gate = match (g.kind.as_str(), g.q.as_slice()) {
            ("cnot" | "cx", &[a, b]) => Gate::cnot(id, a, b),
            ("u", &[a]) => Gate::unary(id, a, g.label.as_deref().unwrap_or("u")),
            (kind, q) => {
                return Err(Error::Circuit(format!(
                    "gate {id}: unsupported kind {kind:?} with {} operands",
                    q.len()
                )))
            }
        };
        gates.push(gate);
    }
    GateDag::new(doc.qubits, gates)
}

struct Register {
    name: String,
    offset: usize,
    size: usize,
}

fn parse_qasm(source: &str) -> Result<GateDag> {
    let mut registers: Vec<Register> = Vec::new();
    let mut qubits = 0usize;
    let mut gates = Vec::new();

    for stmt in statements(source) {
        let text = stmt.text.trim();
        if text.is_empty() {
            continue;
        }
        if !stmt.terminated {
            return Err(stmt.error("missing `;`"));
        }
        let (head, rest) = match text.find(|c: char| c.is_whitespace()) {
            Some(i) => (&text[..i], text[i..].trim()),
            None => (text, ""),
        };
        // Drop a parameter list such as `rz(0.5)`.
        let word = head.split('(').next().unwrap_or(head);
        match word {
            "OPENQASM" | "include" | "creg" | "measure" | "barrier" | "reset" => {}
            "qreg" => {
                let (name, size) = parse_indexed(rest).ok_or_else(|| stmt.error("expected `qreg name[size]`"))?;
                let size = size.ok_or_else(|| stmt.error("qreg needs a size"))?;
                if registers.iter().any(|r| r.name == name) {
                    return Err(stmt.error(format!("register {name} declared twice")));
                }
                registers.push(Register {
                    name: name.to_string(),
                    offset: qubits,
                    size,
                });
                qubits += size;
            }
            "gate" | "opaque" | "if" => {
                return Err(stmt.error(format!("`{word}` is not supported by qasm-lite")));
            }
            _ => {
                if !word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || word.is_empty() {
                    return Err(stmt.error(format!("unexpected token `{head}`")));
                }
                let args: Vec<&str> = rest.split(',').map(str::trim).collect();
                if rest.is_empty() || args.iter().any(|a| a.is_empty()) {
                    return Err(stmt.error("missing operand"));
                }
                let operands = args
                    .iter()
                    .map(|a| resolve(a, &registers, &stmt))
                    .collect::<Result<Vec<_>>>()?;
                match (word, operands.as_slice()) {
                    ("cx" | "CX", [a, b]) => {
                        let (a, b) = (single(a, &stmt)?, single(b, &stmt)?);
                        if a == b {
                            return Err(stmt.error("cx operands must differ"));
                        }
                        gates.push(Gate::cnot(gates.len(), a, b));
                    }
                    ("cx" | "CX", _) => return Err(stmt.error("cx takes two operands")),
                    (_, [targets]) => {
                        for &q in targets {
                            gates.push(Gate::unary(gates.len(), q, word));
                        }
                    }
                    _ => return Err(stmt.error(format!("unsupported multi-qubit gate `{word}`"))),
                }
            }
        }
    }
    GateDag::new(qubits, gates)
}

struct Statement<'a> {
    text: &'a str,
    line: usize,
    column: usize,
    terminated: bool,
}

impl Statement<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(self.line, self.column, message)
    }
}

/// Split on `;`, stripping `//` comments and tracking where each statement
/// starts. Statements may not span lines; a fragment without `;` is kept and
/// flagged so the parser can report it.
fn statements(source: &str) -> Vec<Statement<'_>> {
    let mut out = Vec::new();
    for (lineno, raw) in source.lines().enumerate() {
        let line = raw.find("//").map_or(raw, |i| &raw[..i]);
        let mut start = 0;
        for (i, c) in line.char_indices() {
            if c == ';' {
                out.push(make_stmt(line, start, i, lineno, true));
                start = i + 1;
            }
        }
        if !line[start..].trim().is_empty() {
            out.push(make_stmt(line, start, line.len(), lineno, false));
        }
    }
    out
}

fn make_stmt(line: &str, start: usize, end: usize, lineno: usize, terminated: bool) -> Statement<'_> {
    let text = &line[start..end];
    let lead = text.len() - text.trim_start().len();
    Statement {
        text,
        line: lineno + 1,
        column: start + lead + 1,
        terminated,
    }
}

/// `name[index]` or bare `name`.
fn parse_indexed(s: &str) -> Option<(&str, Option<usize>)> {
    let s = s.trim();
    match s.find('[') {
        Some(open) => {
            let close = s.rfind(']')?;
            if close != s.len() - 1 || close < open {
                return None;
            }
            let name = s[..open].trim();
            let idx = s[open + 1..close].trim().parse().ok()?;
            valid_ident(name).then_some((name, Some(idx)))
        }
        None => valid_ident(s).then_some((s, None)),
    }
}

fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn resolve(arg: &str, registers: &[Register], stmt: &Statement<'_>) -> Result<Vec<QubitId>> {
    let (name, idx) = parse_indexed(arg).ok_or_else(|| stmt.error(format!("bad operand `{arg}`")))?;
    let reg = registers
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| stmt.error(format!("unknown register `{name}`")))?;
    match idx {
        Some(i) if i >= reg.size => Err(stmt.error(format!(
            "qubit index {i} out of range for register {name}[{}]",
            reg.size
        ))),
        Some(i) => Ok(vec![reg.offset + i]),
        None => Ok((reg.offset..reg.offset + reg.size).collect()),
    }
}

fn single(qs: &[QubitId], stmt: &Statement<'_>) -> Result<QubitId> {
    match qs {
        [q] => Ok(*q),
        _ => Err(stmt.error("register broadcast is only supported for single-qubit gates")),
    }
}
