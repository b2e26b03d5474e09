//! Chip topology, resource budgets, and the hardware timing model.
//!
//! Config files give durations in microseconds; everything internal is in
//! integer nanoseconds so the timing simulation stays exact.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ChipId = usize;
/// Nanoseconds.
pub type Nanos = u64;

pub const NS_PER_US: f64 = 1_000.0;
pub const NS_PER_MS: f64 = 1_000_000.0;

fn us(v: f64) -> Nanos {
    (v * NS_PER_US).round() as Nanos
}

/// Operation latencies for a neutral-atom DQC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub t_1q: Nanos,
    pub t_2q: Nanos,
    pub t_atom_transfer: Nanos,
    pub t_atom_move: Nanos,
    pub t_measure: Nanos,
    pub t_epr_gen: Nanos,
    pub t_relocate: Nanos,
    pub t_recnot: Nanos,
    /// Fraction of EPR generation latency overlapped with other work, in [0, 1].
    pub epr_hide: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            t_1q: us(52.0),
            t_2q: 360,
            t_atom_transfer: us(15.0),
            t_atom_move: us(300.0),
            t_measure: us(1_000.0),
            t_epr_gen: us(259.0),
            t_relocate: us(1_300.0),
            t_recnot: us(2_300.0),
            epr_hide: 1.0,
        }
    }
}

impl TimingModel {
    /// Re-CNOT to RELOCATE latency ratio; the natural choice for the Re-CNOT
    /// weight in teleportation costs.
    pub fn alpha_derived(&self) -> f64 {
        self.t_recnot as f64 / self.t_relocate as f64
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.t_1q,
            self.t_2q,
            self.t_atom_transfer,
            self.t_atom_move,
            self.t_measure,
            self.t_epr_gen,
            self.t_relocate,
            self.t_recnot,
        ];
        if all.contains(&0) {
            return Err(Error::Config("all durations must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epr_hide) {
            return Err(Error::Config(format!(
                "epr_hide must lie in [0, 1], got {}",
                self.epr_hide
            )));
        }
        Ok(())
    }
}

/// Unhidden part of EPR generation, paid on the critical path of every
/// teleportation.
pub fn effective_epr_overhead(timing: &TimingModel) -> Nanos {
    ((1.0 - timing.epr_hide) * timing.t_epr_gen as f64).round() as Nanos
}

/// Repeat-until-success EPR generation: Bernoulli attempts plus fixed
/// cavity load/pump/depump/unload steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EprModel {
    pub p_attempt: f64,
    pub n_attempts: u32,
    pub t_load: Nanos,
    pub t_pump: Nanos,
    pub t_attempt: Nanos,
    pub t_depump: Nanos,
    pub t_unload: Nanos,
}

impl Default for EprModel {
    fn default() -> Self {
        EprModel {
            p_attempt: 1.0 / 8.0,
            n_attempts: 52,
            t_load: us(100.0),
            t_pump: us(1.1),
            t_attempt: us(1.0),
            t_depump: us(6.0),
            t_unload: us(100.0),
        }
    }
}

pub fn epr_success_prob(model: &EprModel, n: u32) -> f64 {
    1.0 - (1.0 - model.p_attempt).powi(n as i32)
}

pub fn epr_generation_latency(model: &EprModel) -> Nanos {
    model.t_load + model.t_pump + model.n_attempts as Nanos * model.t_attempt + model.t_depump + model.t_unload
}

/// A grid (or explicitly wired) set of chips with uniform qubit budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub rows: usize,
    pub cols: usize,
    pub qubits_per_chip: usize,
    pub compute_fraction: f64,
    pub links_per_edge: usize,
    pub timing: TimingModel,
    pub epr: EprModel,
    compute: usize,
    epr_capacity: usize,
    adjacency: Vec<Vec<ChipId>>,
    edges: Vec<(ChipId, ChipId)>,
    dist: Vec<Vec<u32>>,
}

impl Topology {
    pub fn grid(rows: usize, cols: usize, qubits_per_chip: usize, compute_fraction: f64) -> Result<Self> {
        let edges = grid_edges(rows, cols);
        Self::build(rows, cols, qubits_per_chip, compute_fraction, edges)
    }

    /// Chips `0..n` wired in a line.
    pub fn line(n: usize, qubits_per_chip: usize, compute_fraction: f64) -> Result<Self> {
        Self::grid(1, n, qubits_per_chip, compute_fraction)
    }

    /// Grid sized so each chip's compute budget holds its share of
    /// `program_qubits` at the default 90% compute fraction.
    pub fn for_program(rows: usize, cols: usize, program_qubits: usize) -> Result<Self> {
        let chips = rows * cols;
        let budget = program_qubits.div_ceil(chips.max(1)).max(1);
        let mut q = budget + 1;
        while compute_of(q, 0.9) < budget || q - compute_of(q, 0.9) < 1 {
            q += 1;
        }
        Self::grid(rows, cols, q, 0.9)
    }

    pub fn with_edges(
        rows: usize,
        cols: usize,
        qubits_per_chip: usize,
        compute_fraction: f64,
        edges: Vec<(ChipId, ChipId)>,
    ) -> Result<Self> {
        Self::build(rows, cols, qubits_per_chip, compute_fraction, edges)
    }

    fn build(
        rows: usize,
        cols: usize,
        qubits_per_chip: usize,
        compute_fraction: f64,
        mut edges: Vec<(ChipId, ChipId)>,
    ) -> Result<Self> {
        let n = rows * cols;
        if n == 0 {
            return Err(Error::Config("topology needs at least one chip".into()));
        }
        if !(compute_fraction > 0.0 && compute_fraction < 1.0) {
            return Err(Error::Config(format!(
                "compute_fraction must be in (0, 1), got {compute_fraction}"
            )));
        }
        let compute = compute_of(qubits_per_chip, compute_fraction);
        if compute < 1 {
            return Err(Error::Config("chips have no compute qubits".into()));
        }
        if qubits_per_chip <= compute {
            return Err(Error::Config("chips have zero EPR capacity".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in edges.iter_mut() {
            if e.0 >= n || e.1 >= n || e.0 == e.1 {
                return Err(Error::Config(format!("bad edge {e:?} for {n} chips")));
            }
            *e = (e.0.min(e.1), e.0.max(e.1));
        }
        edges.sort_unstable();
        edges.dedup();
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in adjacency.iter_mut() {
            adj.sort_unstable();
        }
        let dist: Vec<Vec<u32>> = (0..n).map(|s| bfs(&adjacency, s)).collect();
        if dist[0].contains(&u32::MAX) {
            return Err(Error::Config("chip graph is disconnected".into()));
        }
        Ok(Topology {
            rows,
            cols,
            qubits_per_chip,
            compute_fraction,
            links_per_edge: 1,
            timing: TimingModel::default(),
            epr: EprModel::default(),
            compute,
            epr_capacity: qubits_per_chip - compute,
            adjacency,
            edges,
            dist,
        })
    }

    pub fn chip_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn compute_qubits(&self, _chip: ChipId) -> usize {
        self.compute
    }

    pub fn epr_capacity(&self, _chip: ChipId) -> usize {
        self.epr_capacity
    }

    pub fn hops(&self, a: ChipId, b: ChipId) -> u32 {
        self.dist[a][b]
    }

    pub fn adjacent(&self, a: ChipId, b: ChipId) -> bool {
        self.dist[a][b] == 1
    }

    pub fn neighbors(&self, chip: ChipId) -> &[ChipId] {
        &self.adjacency[chip]
    }

    pub fn edges(&self) -> &[(ChipId, ChipId)] {
        &self.edges
    }

    /// Index of the link between two adjacent chips.
    pub fn edge_index(&self, a: ChipId, b: ChipId) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).ok()
    }

    /// Neighbors of `from` that lie on some shortest path to `to`, by id.
    pub fn next_hops(&self, from: ChipId, to: ChipId) -> impl Iterator<Item = ChipId> + '_ {
        let d = self.dist[from][to];
        self.adjacency[from]
            .iter()
            .copied()
            .filter(move |&n| d > 0 && self.dist[n][to] + 1 == d)
    }

    /// Deterministic shortest path (lowest-id neighbor at each step),
    /// excluding `from`.
    pub fn shortest_path(&self, from: ChipId, to: ChipId) -> Vec<ChipId> {
        let mut path = Vec::new();
        let mut at = from;
        while at != to {
            at = self.next_hops(at, to).next().expect("connected topology");
            path.push(at);
        }
        path
    }

    pub fn with_timing(mut self, timing: TimingModel) -> Self {
        self.timing = timing;
        self
    }

    pub fn with_links_per_edge(mut self, links: usize) -> Self {
        self.links_per_edge = links.max(1);
        self
    }

    pub fn to_config(&self) -> TopologyConfig {
        let grid = grid_edges(self.rows, self.cols);
        let custom = (self.edges != grid).then(|| self.edges.iter().map(|&(a, b)| [a, b]).collect());
        TopologyConfig {
            rows: self.rows,
            cols: self.cols,
            qubits_per_chip: self.qubits_per_chip,
            compute_fraction: self.compute_fraction,
            links_per_edge: self.links_per_edge,
            edges: custom,
            timing: TimingConfig::from(&self.timing),
            epr: EprConfig::from(&self.epr),
        }
    }
}

fn compute_of(qubits_per_chip: usize, fraction: f64) -> usize {
    (qubits_per_chip as f64 * fraction + 1e-9).floor() as usize
}

fn grid_edges(rows: usize, cols: usize) -> Vec<(ChipId, ChipId)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                edges.push((id, id + 1));
            }
            if r + 1 < rows {
                edges.push((id, id + cols));
            }
        }
    }
    edges.sort_unstable();
    edges
}

fn bfs(adjacency: &[Vec<ChipId>], src: ChipId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adjacency.len()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(a) = queue.pop_front() {
        for &b in &adjacency[a] {
            if dist[b] == u32::MAX {
                dist[b] = dist[a] + 1;
                queue.push_back(b);
            }
        }
    }
    dist
}

/// On-disk topology description. Durations are microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub rows: usize,
    pub cols: usize,
    pub qubits_per_chip: usize,
    #[serde(default = "default_fraction")]
    pub compute_fraction: f64,
    #[serde(default = "default_links")]
    pub links_per_edge: usize,
    /// Overrides nearest-neighbor grid wiring when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[ChipId; 2]>>,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default)]
    pub epr: EprConfig,
}

fn default_fraction() -> f64 {
    0.9
}

fn default_links() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub t_1q: f64,
    pub t_2q: f64,
    pub t_atom_transfer: f64,
    pub t_atom_move: f64,
    pub t_measure: f64,
    pub t_epr_gen: f64,
    pub t_relocate: f64,
    pub t_recnot: f64,
    pub epr_hide: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig::from(&TimingModel::default())
    }
}

impl From<&TimingModel> for TimingConfig {
    fn from(t: &TimingModel) -> Self {
        let f = |v: Nanos| v as f64 / NS_PER_US;
        TimingConfig {
            t_1q: f(t.t_1q),
            t_2q: f(t.t_2q),
            t_atom_transfer: f(t.t_atom_transfer),
            t_atom_move: f(t.t_atom_move),
            t_measure: f(t.t_measure),
            t_epr_gen: f(t.t_epr_gen),
            t_relocate: f(t.t_relocate),
            t_recnot: f(t.t_recnot),
            epr_hide: t.epr_hide,
        }
    }
}

impl From<&TimingConfig> for TimingModel {
    fn from(c: &TimingConfig) -> Self {
        TimingModel {
            t_1q: us(c.t_1q),
            t_2q: us(c.t_2q),
            t_atom_transfer: us(c.t_atom_transfer),
            t_atom_move: us(c.t_atom_move),
            t_measure: us(c.t_measure),
            t_epr_gen: us(c.t_epr_gen),
            t_relocate: us(c.t_relocate),
            t_recnot: us(c.t_recnot),
            epr_hide: c.epr_hide,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EprConfig {
    pub p_attempt: f64,
    pub n_attempts: u32,
    pub t_load: f64,
    pub t_pump: f64,
    pub t_attempt: f64,
    pub t_depump: f64,
    pub t_unload: f64,
}

impl Default for EprConfig {
    fn default() -> Self {
        EprConfig::from(&EprModel::default())
    }
}

impl From<&EprModel> for EprConfig {
    fn from(m: &EprModel) -> Self {
        let f = |v: Nanos| v as f64 / NS_PER_US;
        EprConfig {
            p_attempt: m.p_attempt,
            n_attempts: m.n_attempts,
            t_load: f(m.t_load),
            t_pump: f(m.t_pump),
            t_attempt: f(m.t_attempt),
            t_depump: f(m.t_depump),
            t_unload: f(m.t_unload),
        }
    }
}

impl From<&EprConfig> for EprModel {
    fn from(c: &EprConfig) -> Self {
        EprModel {
            p_attempt: c.p_attempt,
            n_attempts: c.n_attempts,
            t_load: us(c.t_load),
            t_pump: us(c.t_pump),
            t_attempt: us(c.t_attempt),
            t_depump: us(c.t_depump),
            t_unload: us(c.t_unload),
        }
    }
}

impl TopologyConfig {
    pub fn build(&self) -> Result<Topology> {
        let edges = match &self.edges {
            Some(list) => list.iter().map(|e| (e[0], e[1])).collect(),
            None => grid_edges(self.rows, self.cols),
        };
        let timing = TimingModel::from(&self.timing);
        timing.validate()?;
        let epr = EprModel::from(&self.epr);
        if !(epr.p_attempt > 0.0 && epr.p_attempt <= 1.0) {
            return Err(Error::Config(format!(
                "p_attempt must be in (0, 1], got {}",
                epr.p_attempt
            )));
        }
        if self.links_per_edge == 0 {
            return Err(Error::Config("links_per_edge must be at least 1".into()));
        }
        let mut topo = Topology::build(self.rows, self.cols, self.qubits_per_chip, self.compute_fraction, edges)?;
        topo.links_per_edge = self.links_per_edge;
        topo.timing = timing;
        topo.epr = epr;
        Ok(topo)
    }
}

/// Parse a TOML or JSON topology config (JSON when the text starts with `{`).
pub fn load_topology(source: &str) -> Result<Topology> {
    let config: TopologyConfig = if source.trim_start().starts_with('{') {
        serde_json::from_str(source).map_err(|e| Error::Config(e.to_string()))?
    } else {
        toml::from_str(source).map_err(|e| Error::Config(e.to_string()))?
    };
    config.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_split() {
        let t = load_topology("rows = 2\ncols = 2\nqubits_per_chip = 5\ncompute_fraction = 0.8\n").unwrap();
        assert_eq!(t.compute_qubits(0), 4);
        assert_eq!(t.epr_capacity(0), 1);
        assert_eq!(t.chip_count(), 4);
    }

    #[test]
    fn json_config_and_timing_units() {
        let t =
            load_topology(r#"{"rows":1,"cols":3,"qubits_per_chip":10,"timing":{"t_relocate":1000.0,"epr_hide":0.5}}"#)
                .unwrap();
        assert_eq!(t.timing.t_relocate, 1_000_000);
        assert_eq!(t.timing.t_recnot, 2_300_000);
        assert_eq!(effective_epr_overhead(&t.timing), 129_500);
    }

    #[test]
    fn line_of_three_needs_two_hops_end_to_end() {
        let t = Topology::line(3, 4, 0.5).unwrap();
        assert_eq!(t.hops(0, 2), 2);
        assert!(!t.adjacent(0, 2));
        assert_eq!(t.shortest_path(0, 2), vec![1, 2]);
    }

    #[test]
    fn grid_combinatorics() {
        let t = Topology::grid(3, 3, 10, 0.9).unwrap();
        assert_eq!(t.chip_count(), 9);
        assert_eq!(t.edges().len(), 12);
        assert_eq!(t.hops(0, 8), 4);
        assert_eq!(t.hops(0, 1), 1);
        assert_eq!(t.hops(4, 4), 0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(Topology::grid(2, 2, 1, 0.5), Err(Error::Config(_))));
        assert!(matches!(Topology::grid(2, 2, 5, 1.0), Err(Error::Config(_))));
        assert!(matches!(
            Topology::with_edges(1, 4, 5, 0.8, vec![(0, 1), (2, 3)]),
            Err(Error::Config(_))
        ));
        assert!(load_topology("rows = 2\ncols = 2\nqubits_per_chip = 5\nbogus = 1\n").is_err());
        assert!(load_topology("rows = 0\ncols = 2\nqubits_per_chip = 5\n").is_err());
    }

    #[test]
    fn config_round_trip() {
        let t = Topology::grid(2, 3, 12, 0.75).unwrap().with_links_per_edge(2);
        let text = toml::to_string(&t.to_config()).unwrap();
        assert_eq!(load_topology(&text).unwrap(), t);
    }

    #[test]
    fn for_program_budget() {
        let t = Topology::for_program(2, 2, 100).unwrap();
        assert!(t.compute_qubits(0) >= 25);
        assert!(t.epr_capacity(0) >= 1);
    }

    #[test]
    fn epr_probability() {
        let m = EprModel::default();
        assert_eq!(epr_success_prob(&m, 0), 0.0);
        assert!((epr_success_prob(&m, 1) - 0.125).abs() < 1e-12);
        let p52 = epr_success_prob(&m, 52);
        assert!((0.999..=0.9995).contains(&p52), "{p52}");
        // 51 attempts fall short of 99.9%.
        assert!(epr_success_prob(&m, 51) < 0.999);
        let mut prev = 0.0;
        for n in 0..200 {
            let p = epr_success_prob(&m, n);
            let product: f64 = (0..n).map(|_| 1.0 - m.p_attempt).product();
            assert!((p - (1.0 - product)).abs() < 1e-12);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn epr_latency() {
        let mut m = EprModel::default();
        assert_eq!(epr_generation_latency(&m), 259_100);
        m.n_attempts = 0;
        assert_eq!(epr_generation_latency(&m), 207_100);
        m.n_attempts = 104;
        assert_eq!(epr_generation_latency(&m), 311_100);
    }

    #[test]
    fn epr_overhead_hiding() {
        let mut t = TimingModel::default();
        assert_eq!(effective_epr_overhead(&t), 0);
        t.epr_hide = 0.0;
        assert_eq!(effective_epr_overhead(&t), 259_000);
        t.epr_hide = 0.5;
        assert_eq!(effective_epr_overhead(&t), 129_500);
    }

    #[test]
    fn alpha_matches_latency_ratio() {
        let a = TimingModel::default().alpha_derived();
        assert!((a - 1.769).abs() < 0.001);
        assert!((a - 1.77).abs() < 0.01);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hops_is_a_metric(rows in 1usize..4, cols in 1usize..4, a in 0usize..16, b in 0usize..16, c in 0usize..16) {
                let t = Topology::grid(rows, cols, 10, 0.9).unwrap();
                let n = t.chip_count();
                let (a, b, c) = (a % n, b % n, c % n);
                prop_assert_eq!(t.hops(a, b), t.hops(b, a));
                prop_assert!(t.hops(a, c) <= t.hops(a, b) + t.hops(b, c));
                prop_assert_eq!(t.hops(a, a), 0);
                prop_assert_eq!(t.shortest_path(a, b).len() as u32, t.hops(a, b));
            }
        }
    }
}
