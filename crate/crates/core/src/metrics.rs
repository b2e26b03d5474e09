//! Schedule statistics and a simple fidelity estimate.

use serde::{Deserialize, Serialize};

use crate::arch::{Nanos, Topology};
use crate::error::{Error, Result};
use crate::schedule::{InstrKind, Schedule};
use crate::timing::{dependencies, resolution_times};

/// Averages over every pair of consecutive RELOCATEs on the same qubit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub gaps: usize,
    pub cnots: f64,
    pub blocks: f64,
    pub local_only_blocks: f64,
    pub epr_releases: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_relocate: usize,
    pub n_recnot: usize,
    pub n_local_cnot: usize,
    pub n_release: usize,
    pub t_eff: f64,
    pub makespan_ns: Nanos,
    /// RELOCATEs per millisecond of makespan.
    pub relocate_concurrency: f64,
    pub delayed_teleport_fraction: f64,
    /// Mean gap between dependency resolution and start, over delayed
    /// teleports only.
    pub mean_wait_ns: f64,
    pub gap: GapStats,
}

pub fn compute_metrics(schedule: &Schedule, topo: &Topology, alpha: f64) -> Metrics {
    let n_relocate = schedule.count(InstrKind::Relocate);
    let n_recnot = schedule.count(InstrKind::ReCnot);
    let makespan = schedule.makespan();
    let deps = dependencies(schedule, topo);
    let ready = resolution_times(schedule, &deps);
    let waits: Vec<Nanos> = schedule
        .instructions
        .iter()
        .filter(|i| i.kind.is_teleport())
        .map(|i| i.start - ready[i.id].min(i.start))
        .collect();
    let delayed: Vec<Nanos> = waits.iter().copied().filter(|&w| w > 0).collect();
    let teleports = waits.len();
    Metrics {
        n_relocate,
        n_recnot,
        n_local_cnot: schedule.count(InstrKind::LocalCnot),
        n_release: schedule.instructions.iter().filter(|i| i.release).count(),
        t_eff: n_relocate as f64 + alpha * n_recnot as f64,
        makespan_ns: makespan,
        relocate_concurrency: if makespan == 0 {
            0.0
        } else {
            n_relocate as f64 / (makespan as f64 / 1e6)
        },
        delayed_teleport_fraction: if teleports == 0 {
            0.0
        } else {
            delayed.len() as f64 / teleports as f64
        },
        mean_wait_ns: if delayed.is_empty() {
            0.0
        } else {
            delayed.iter().sum::<Nanos>() as f64 / delayed.len() as f64
        },
        gap: gap_stats(schedule),
    }
}

/// Gaps are measured in listing order, which is the order the scheduler
/// committed instructions.
fn gap_stats(schedule: &Schedule) -> GapStats {
    let ins = &schedule.instructions;
    let blocks = ins.iter().map(|i| i.block + 1).max().unwrap_or(0);
    let mut teleport_blocks = vec![false; blocks];
    for i in ins.iter().filter(|i| i.kind.is_teleport()) {
        teleport_blocks[i.block] = true;
    }
    // Prefix counts over the listing.
    let mut cnots = vec![0usize; ins.len() + 1];
    let mut releases = vec![0usize; ins.len() + 1];
    for (k, i) in ins.iter().enumerate() {
        let cx = matches!(i.kind, InstrKind::LocalCnot | InstrKind::ReCnot);
        cnots[k + 1] = cnots[k] + cx as usize;
        releases[k + 1] = releases[k] + i.release as usize;
    }
    let mut local_only = vec![0usize; blocks + 1];
    for b in 0..blocks {
        local_only[b + 1] = local_only[b] + !teleport_blocks[b] as usize;
    }
    let mut last: Vec<Option<usize>> = vec![None; schedule.initial.len()];
    let mut out = GapStats::default();
    let (mut c, mut b, mut l, mut r) = (0usize, 0usize, 0usize, 0usize);
    for (k, i) in ins.iter().enumerate() {
        if i.kind != InstrKind::Relocate {
            continue;
        }
        let q = i.qubits[0];
        if let Some(p) = last[q] {
            let prev = &ins[p];
            out.gaps += 1;
            c += cnots[k] - cnots[p + 1];
            r += releases[k] - releases[p + 1];
            b += i.block - prev.block;
            if i.block > prev.block + 1 {
                l += local_only[i.block] - local_only[prev.block + 1];
            }
        }
        last[q] = Some(k);
    }
    if out.gaps > 0 {
        let n = out.gaps as f64;
        out.cnots = c as f64 / n;
        out.blocks = b as f64 / n;
        out.local_only_blocks = l as f64 / n;
        out.epr_releases = r as f64 / n;
    }
    out
}

/// Error rates and coherence time for the fidelity estimate. The defaults
/// are placeholders: only the teleport-to-local ratio is meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorConfig {
    pub eps_1q: f64,
    pub eps_cnot: f64,
    pub eps_relocate: f64,
    pub eps_recnot: f64,
    /// Coherence time in microseconds; `None` means no decoherence.
    pub t_coh_us: Option<f64>,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig {
            eps_1q: 1e-4,
            eps_cnot: 5e-3,
            eps_relocate: 2e-2,
            eps_recnot: 2e-2,
            t_coh_us: Some(1.5e6),
        }
    }
}

impl ErrorConfig {
    pub fn noiseless() -> Self {
        ErrorConfig {
            eps_1q: 0.0,
            eps_cnot: 0.0,
            eps_relocate: 0.0,
            eps_recnot: 0.0,
            t_coh_us: None,
        }
    }

    /// Teleports `ratio` times as error-prone as a local CNOT.
    pub fn with_teleport_ratio(mut self, ratio: f64) -> Self {
        self.eps_relocate = ratio * self.eps_cnot;
        self.eps_recnot = ratio * self.eps_cnot;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.eps_1q, self.eps_cnot, self.eps_relocate, self.eps_recnot];
        if rates.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::Config("error rates must lie in [0, 1]".into()));
        }
        if self.t_coh_us.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return Err(Error::Config("coherence time must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub one_qubit: f64,
    pub local_cnot: f64,
    pub relocate: f64,
    pub recnot: f64,
    pub idle: f64,
    pub total: f64,
}

/// F = Π(1 − ε) over operations × Π exp(−idle / T_coh) over qubits, where
/// a qubit idles whenever it is not an operand of a running instruction.
pub fn fidelity_estimate(schedule: &Schedule, cfg: &ErrorConfig) -> Fidelity {
    let ops = |k: InstrKind, eps: f64| (1.0 - eps).powi(schedule.count(k) as i32);
    let makespan = schedule.makespan();
    let mut busy = vec![0 as Nanos; schedule.initial.len()];
    for i in &schedule.instructions {
        for &q in &i.qubits {
            busy[q] += i.duration;
        }
    }
    let idle = match cfg.t_coh_us {
        None => 1.0,
        Some(t) => {
            let total: f64 = busy.iter().map(|&b| makespan.saturating_sub(b) as f64).sum();
            (-total / (t * 1e3)).exp()
        }
    };
    let mut f = Fidelity {
        one_qubit: ops(InstrKind::Unary, cfg.eps_1q),
        local_cnot: ops(InstrKind::LocalCnot, cfg.eps_cnot),
        relocate: ops(InstrKind::Relocate, cfg.eps_relocate),
        recnot: ops(InstrKind::ReCnot, cfg.eps_recnot),
        idle,
        total: 0.0,
    };
    f.total = f.one_qubit * f.local_cnot * f.relocate * f.recnot * f.idle;
    f
}
