//! Synthetic benchmark circuits.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_dag, Gate, GateDag, QubitId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "qaoa-3reg")]
    Qaoa3Reg,
    #[serde(rename = "qaoa-fc")]
    QaoaFc,
    #[serde(rename = "qft-like")]
    QftLike,
    #[serde(rename = "qv-like")]
    QvLike,
    #[serde(rename = "bv-like")]
    BvLike,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Qaoa3Reg,
        Family::QaoaFc,
        Family::QftLike,
        Family::QvLike,
        Family::BvLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Qaoa3Reg => "qaoa-3reg",
            Family::QaoaFc => "qaoa-fc",
            Family::QftLike => "qft-like",
            Family::QvLike => "qv-like",
            Family::BvLike => "bv-like",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Benchmark(format!("unknown family `{s}`")))
    }
}

/// QAOA cost and mixer layers.
pub const QAOA_LAYERS: usize = 2;

struct Builder {
    gates: Vec<Gate>,
}

impl Builder {
    fn cx(&mut self, c: QubitId, t: QubitId) {
        let id = self.gates.len();
        self.gates.push(Gate::cnot(id, c, t));
    }

    fn u(&mut self, q: QubitId, label: &str) {
        let id = self.gates.len();
        self.gates.push(Gate::unary(id, q, label));
    }
}

/// Deterministic circuit for `(family, qubits, seed)`.
pub fn generate(family: Family, qubits: usize, seed: u64) -> Result<GateDag> {
    if qubits < 4 {
        return Err(Error::Benchmark(format!(
            "{family} needs at least 4 qubits, got {qubits}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder { gates: Vec::new() };
    match family {
        Family::Qaoa3Reg | Family::QaoaFc => {
            let edges = if family == Family::Qaoa3Reg {
                if qubits % 2 == 1 {
                    return Err(Error::Benchmark(format!(
                        "a 3-regular graph needs an even qubit count, got {qubits}"
                    )));
                }
                random_3_regular(qubits, &mut rng)
            } else {
                (0..qubits).flat_map(|i| (i + 1..qubits).map(move |j| (i, j))).collect()
            };
            for q in 0..qubits {
                b.u(q, "h");
            }
            for _ in 0..QAOA_LAYERS {
                for &(i, j) in &edges {
                    b.cx(i, j);
                    b.u(j, "rz");
                }
                for q in 0..qubits {
                    b.u(q, "rx");
                }
            }
        }
        Family::QftLike => {
            for i in 0..qubits {
                b.u(i, "h");
                for j in i + 1..qubits {
                    b.cx(j, i);
                    b.u(i, "rz");
                }
            }
        }
        Family::QvLike => {
            let mut order: Vec<QubitId> = (0..qubits).collect();
            for _ in 0..qubits {
                order.shuffle(&mut rng);
                for pair in order.chunks_exact(2) {
                    let (x, y) = (pair[0], pair[1]);
                    for k in 0..3 {
                        b.u(x, "u3");
                        b.u(y, "u3");
                        if k == 1 {
                            b.cx(y, x);
                        } else {
                            b.cx(x, y);
                        }
                    }
                }
            }
        }
        Family::BvLike => {
            b.u(0, "x");
            for q in 0..qubits {
                b.u(q, "h");
            }
            for q in 1..qubits {
                b.cx(q, 0);
            }
            for q in 1..qubits {
                b.u(q, "h");
            }
        }
    }
    Ok(build_dag(qubits, b.gates))
}

/// Configuration model with restarts until the pairing is simple.
fn random_3_regular(n: usize, rng: &mut ChaCha8Rng) -> Vec<(QubitId, QubitId)> {
    loop {
        let mut stubs: Vec<QubitId> = (0..n).flat_map(|q| [q, q, q]).collect();
        stubs.shuffle(rng);
        let mut edges: Vec<(QubitId, QubitId)> = stubs
            .chunks_exact(2)
            .map(|p| (p[0].min(p[1]), p[0].max(p[1])))
            .collect();
        let simple = edges.iter().all(|&(a, b)| a != b) && {
            let mut sorted = edges.clone();
            sorted.sort_unstable();
            sorted.windows(2).all(|w| w[0] != w[1])
        };
        if simple {
            edges.shuffle(rng);
            return edges;
        }
    }
}
