//! Benchmark suites: generated instances compiled by several schedulers and
//! tabulated against the block-greedy baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::arch::{Topology, TopologyConfig, NS_PER_US};
use crate::blockform::CostParams;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::generate::{generate, Family};
use crate::mapping::Mapper;
use crate::pipeline::{compile, Options, Scheduler};

/// A suite file, e.g.
///
/// ```toml
/// schedulers = ["ums", "blockgreedy"]
/// [arch]
/// rows = 2
/// cols = 2
/// qubits_per_chip = 16
/// compute_fraction = 0.75
/// [[instance]]
/// family = "qaoa-3reg"
/// qubits = [16, 24]
/// seeds = [1, 2]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    #[serde(default = "desk_arch")]
    pub arch: TopologyConfig,
    #[serde(default = "all_schedulers")]
    pub schedulers: Vec<Scheduler>,
    #[serde(default)]
    pub params: CostParams,
    #[serde(default = "yes")]
    pub ees: bool,
    #[serde(default)]
    pub mapper: Mapper,
    #[serde(default, rename = "instance")]
    pub instances: Vec<InstanceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub family: Family,
    pub qubits: Vec<usize>,
    #[serde(default = "first_seed")]
    pub seeds: Vec<u64>,
}

/// 2x2 grid, 16 qubits per chip, 4 of them communication slots.
pub fn desk_topology() -> Topology {
    Topology::grid(2, 2, 16, 0.75).expect("desk topology is valid")
}

fn desk_arch() -> TopologyConfig {
    desk_topology().to_config()
}

fn all_schedulers() -> Vec<Scheduler> {
    Scheduler::ALL.to_vec()
}

fn yes() -> bool {
    true
}

fn first_seed() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub family: Family,
    pub qubits: usize,
    pub seed: u64,
}

impl Instance {
    pub fn name(&self) -> String {
        format!("{}-{}-s{}", self.family, self.qubits, self.seed)
    }
}

impl Suite {
    pub fn new(instances: Vec<InstanceSpec>) -> Self {
        Suite {
            arch: desk_arch(),
            schedulers: all_schedulers(),
            params: CostParams::default(),
            ees: true,
            mapper: Mapper::default(),
            instances,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let suite: Suite = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        suite.params.validate()?;
        Ok(suite)
    }

    pub fn topology(&self) -> Result<Topology> {
        self.arch.build()
    }

    pub fn expand(&self) -> Vec<Instance> {
        let mut out = Vec::new();
        for spec in &self.instances {
            for &qubits in &spec.qubits {
                for &seed in &spec.seeds {
                    out.push(Instance {
                        family: spec.family,
                        qubits,
                        seed,
                    });
                }
            }
        }
        out
    }

    pub fn options(&self, scheduler: Scheduler, seed: u64, exec: Exec) -> Options {
        Options {
            mapper: self.mapper,
            scheduler,
            params: self.params,
            ees: self.ees,
            epr_hide: None,
            seed,
            exec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub benchmark: String,
    pub scheduler: Scheduler,
    pub qubits: usize,
    pub cnots: usize,
    pub t_eff: f64,
    pub latency_us: f64,
    pub n_relocate: usize,
    pub n_recnot: usize,
    /// Set when generation or compilation failed; the numbers are zero.
    pub error: Option<String>,
}

/// Mean per-instance ratio against block-greedy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relative {
    pub scheduler: Scheduler,
    pub t_eff: f64,
    pub latency: f64,
    /// Instances where both compiled and the baseline value was nonzero.
    pub t_eff_pairs: usize,
    pub latency_pairs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub rows: Vec<Row>,
    pub relative: Vec<Relative>,
}

pub fn run_suite(suite: &Suite, exec: Exec) -> Result<Table> {
    let topo = suite.topology()?;
    let instances = suite.expand();
    let jobs: Vec<(Instance, Scheduler)> = instances
        .iter()
        .flat_map(|&i| suite.schedulers.iter().map(move |&s| (i, s)))
        .collect();
    let rows = exec.map(&jobs, |&(inst, s)| {
        let mut row = Row {
            benchmark: inst.name(),
            scheduler: s,
            qubits: inst.qubits,
            cnots: 0,
            t_eff: 0.0,
            latency_us: 0.0,
            n_relocate: 0,
            n_recnot: 0,
            error: None,
        };
        let dag = match generate(inst.family, inst.qubits, inst.seed) {
            Ok(d) => d,
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        };
        row.cnots = dag.cnot_count();
        match compile(&dag, &topo, &suite.options(s, inst.seed, Exec::Sequential)) {
            Ok(c) => {
                let m = &c.stats.metrics;
                row.t_eff = m.t_eff;
                row.latency_us = m.makespan_ns as f64 / NS_PER_US;
                row.n_relocate = m.n_relocate;
                row.n_recnot = m.n_recnot;
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    });
    let relative = relative_rows(&rows, &suite.schedulers, instances.len());
    Ok(Table { rows, relative })
}

fn relative_rows(rows: &[Row], schedulers: &[Scheduler], instances: usize) -> Vec<Relative> {
    let Some(base) = schedulers.iter().position(|&s| s == Scheduler::Blockgreedy) else {
        return Vec::new();
    };
    if instances == 0 {
        return Vec::new();
    }
    let per = schedulers.len();
    schedulers
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            let (mut t, mut tn, mut l, mut ln) = (0.0, 0, 0.0, 0);
            for i in 0..instances {
                let (row, b) = (&rows[i * per + si], &rows[i * per + base]);
                if row.error.is_some() || b.error.is_some() {
                    continue;
                }
                if b.t_eff > 0.0 {
                    t += row.t_eff / b.t_eff;
                    tn += 1;
                }
                if b.latency_us > 0.0 {
                    l += row.latency_us / b.latency_us;
                    ln += 1;
                }
            }
            Relative {
                scheduler: s,
                t_eff: if tn == 0 { f64::NAN } else { t / tn as f64 },
                latency: if ln == 0 { f64::NAN } else { l / ln as f64 },
                t_eff_pairs: tn,
                latency_pairs: ln,
            }
        })
        .collect()
}

const HEADER: [&str; 9] = [
    "benchmark",
    "scheduler",
    "qubits",
    "cnots",
    "t_eff",
    "latency_us",
    "relocates",
    "recnots",
    "status",
];

impl Table {
    fn cells(&self) -> Vec<[String; 9]> {
        let mut out: Vec<[String; 9]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.benchmark.clone(),
                    r.scheduler.to_string(),
                    r.qubits.to_string(),
                    r.cnots.to_string(),
                    format!("{:.2}", r.t_eff),
                    format!("{:.1}", r.latency_us),
                    r.n_relocate.to_string(),
                    r.n_recnot.to_string(),
                    r.error.clone().unwrap_or_else(|| "ok".into()),
                ]
            })
            .collect();
        for r in &self.relative {
            out.push([
                "relative".into(),
                r.scheduler.to_string(),
                String::new(),
                String::new(),
                format!("{:.3}", r.t_eff),
                format!("{:.3}", r.latency),
                String::new(),
                String::new(),
                format!("n={}", r.t_eff_pairs),
            ]);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = HEADER.join(",");
        s.push('\n');
        for row in self.cells() {
            let quoted: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
            s.push_str(&quoted.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {} |\n", HEADER.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(HEADER.len()));
        for row in self.cells() {
            let _ = writeln!(s, "| {} |", row.join(" | "));
        }
        s
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_three_plus_relative() {
        let mut suite = Suite::parse(
            r#"
            [params]
            beam = 4
            [[instance]]
            family = "qaoa-3reg"
            qubits = [12]
            [[instance]]
            family = "qft-like"
            qubits = [10]
            [[instance]]
            family = "bv-like"
            qubits = [10]
            seeds = [3]
            "#,
        )
        .unwrap();
        assert_eq!(suite.params.beam, 4);
        assert_eq!(suite.params.window, 4);
        let table = run_suite(&suite, Exec::default()).unwrap();
        assert_eq!(table.rows.len(), 9);
        assert!(table.rows.iter().all(|r| r.error.is_none()));
        assert_eq!(table.relative.len(), 3);
        let greedy = table
            .relative
            .iter()
            .find(|r| r.scheduler == Scheduler::Blockgreedy)
            .unwrap();
        assert_eq!(greedy.t_eff, 1.0);
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 1 + 9 + 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("qaoa-3reg-12-s0,ums,12,36,"));
        assert_eq!(table.to_markdown().lines().count(), 2 + 9 + 3);

        suite.schedulers = vec![Scheduler::Ums];
        assert!(run_suite(&suite, Exec::Sequential).unwrap().relative.is_empty());
    }

    #[test]
    fn empty_suite_is_header_only() {
        let table = run_suite(&Suite::parse("").unwrap(), Exec::Sequential).unwrap();
        assert_eq!(table.to_csv(), format!("{}\n", HEADER.join(",")));
    }

    #[test]
    fn bad_instances_become_error_rows() {
        let suite = Suite::new(vec![InstanceSpec {
            family: Family::Qaoa3Reg,
            qubits: vec![9],
            seeds: vec![0],
        }]);
        let table = run_suite(&suite, Exec::Sequential).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.rows.iter().all(|r| r.error.is_some()));
        assert_eq!(table.relative[0].t_eff_pairs, 0);
        assert!(Suite::parse("bogus = 1").is_err());
        assert!(Suite::parse("[[instance]]\nfamily = \"ghz\"\nqubits = [4]").is_err());
    }
}
