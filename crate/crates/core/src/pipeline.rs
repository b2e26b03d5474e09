//! End-to-end compilation: map, form blocks, schedule, time, shift early,
//! validate, measure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arch::{Nanos, Topology};
use crate::baseline::{schedule_blockgreedy, schedule_pergate};
use crate::blockform::{form_blocks, Blocks, CostParams};
use crate::circuit::GateDag;
use crate::ees::run_ees;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::layout::Layout;
use crate::mapping::{map_program, Mapper};
use crate::metrics::{compute_metrics, Metrics};
use crate::schedule::Schedule;
use crate::timing::{simulate_latency, Policy};
use crate::ums::{schedule_ums, LayerTrace};
use crate::validate::check;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheduler {
    #[default]
    Ums,
    Blockgreedy,
    Pergate,
}

impl Scheduler {
    pub const ALL: [Scheduler; 3] = [Scheduler::Ums, Scheduler::Blockgreedy, Scheduler::Pergate];

    pub fn name(self) -> &'static str {
        match self {
            Scheduler::Ums => "ums",
            Scheduler::Blockgreedy => "blockgreedy",
            Scheduler::Pergate => "pergate",
        }
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheduler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheduler::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheduler `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Options {
    pub mapper: Mapper,
    pub scheduler: Scheduler,
    pub params: CostParams,
    /// Early scheduling; only the UMS scheduler uses it.
    pub ees: bool,
    /// Overrides the topology's EPR hiding fraction.
    pub epr_hide: Option<f64>,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            mapper: Mapper::Mincut,
            scheduler: Scheduler::Ums,
            params: CostParams::default(),
            ees: true,
            epr_hide: None,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl Options {
    pub fn scheduler(scheduler: Scheduler) -> Self {
        Options {
            scheduler,
            ..Options::default()
        }
    }

    fn uses_ees(&self) -> bool {
        self.ees && self.scheduler == Scheduler::Ums
    }
}

/// Everything `stats.json` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub schema: u32,
    pub scheduler: Scheduler,
    pub mapper: Mapper,
    pub ees: bool,
    pub epr_hide: f64,
    pub params: CostParams,
    pub seed: u64,
    pub qubits: usize,
    pub gates: usize,
    pub cnots: usize,
    pub blocks: usize,
    /// Accumulated cost tracked by the beam scheduler, if used.
    pub scheduler_cost: Option<f64>,
    /// Width of the beam whose result was kept.
    pub beam_width_used: Option<usize>,
    pub makespan_before_ees_ns: Nanos,
    pub relocate_concurrency_before_ees: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub topo: Topology,
    pub layout: Layout,
    pub blocks: Blocks,
    /// Timed with block-order barriers, before early scheduling.
    pub scheduled: Schedule,
    /// Final timed schedule.
    pub schedule: Schedule,
    pub trace: Vec<LayerTrace>,
    pub stats: Stats,
}

pub fn compile(dag: &GateDag, topo: &Topology, opts: &Options) -> Result<Compiled> {
    opts.params.validate()?;
    let mut topo = topo.clone();
    if let Some(h) = opts.epr_hide {
        topo.timing.epr_hide = h;
    }
    topo.timing.validate()?;
    let layout = map_program(dag, &topo, opts.mapper, opts.seed)?;
    compile_with_layout(dag, &topo, layout, opts)
}

/// Same as [`compile`] with a given initial layout; `opts.epr_hide` and
/// `opts.mapper` are ignored.
pub fn compile_with_layout(dag: &GateDag, topo: &Topology, layout: Layout, opts: &Options) -> Result<Compiled> {
    let blocks = form_blocks(dag, &layout, topo, &opts.params);
    let (untimed, beam) = match opts.scheduler {
        Scheduler::Ums => {
            let out = schedule_ums(dag, &blocks, &layout, topo, &opts.params, opts.exec)?;
            (out.schedule.clone(), Some(out))
        }
        Scheduler::Blockgreedy => {
            let out = schedule_blockgreedy(dag, &blocks, &layout, topo, &opts.params)?;
            (out.schedule.clone(), Some(out))
        }
        Scheduler::Pergate => (schedule_pergate(dag, &blocks, &layout, topo)?, None),
    };
    let scheduled = simulate_latency(&untimed, topo, Policy::BlockOrder);
    let schedule = if opts.uses_ees() {
        run_ees(&scheduled, topo)
    } else {
        scheduled.clone()
    };
    let report = check(&schedule, dag, topo);
    if !report.is_ok() {
        return Err(Error::Invalid(report.to_string()));
    }
    let before = compute_metrics(&scheduled, topo, opts.params.alpha);
    let metrics = compute_metrics(&schedule, topo, opts.params.alpha);
    let stats = Stats {
        schema: 1,
        scheduler: opts.scheduler,
        mapper: opts.mapper,
        ees: opts.uses_ees(),
        epr_hide: topo.timing.epr_hide,
        params: opts.params,
        seed: opts.seed,
        qubits: dag.qubit_count,
        gates: dag.len(),
        cnots: dag.cnot_count(),
        blocks: blocks.len(),
        scheduler_cost: beam.as_ref().map(|b| b.cost),
        beam_width_used: beam.as_ref().map(|b| b.width),
        makespan_before_ees_ns: before.makespan_ns,
        relocate_concurrency_before_ees: before.relocate_concurrency,
        metrics,
    };
    Ok(Compiled {
        topo: topo.clone(),
        layout,
        blocks,
        scheduled,
        schedule,
        trace: beam.map(|b| b.trace).unwrap_or_default(),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, Family};

    fn desk() -> Topology {
        Topology::grid(2, 2, 10, 0.7).unwrap()
    }

    #[test]
    fn every_scheduler_compiles_clean() {
        let dag = generate(Family::Qaoa3Reg, 16, 3).unwrap();
        for s in Scheduler::ALL {
            let c = compile(&dag, &desk(), &Options::scheduler(s)).unwrap();
            assert_eq!(c.stats.scheduler, s);
            assert!(c.stats.metrics.t_eff > 0.0);
            if let Some(cost) = c.stats.scheduler_cost {
                assert!(
                    (cost - c.stats.metrics.t_eff).abs() < 1e-9,
                    "{s}: {cost} vs {}",
                    c.stats.metrics.t_eff
                );
            }
        }
    }

    #[test]
    fn ees_keeps_teff_and_never_slows() {
        let dag = generate(Family::QftLike, 12, 0).unwrap();
        let off = compile(
            &dag,
            &desk(),
            &Options {
                ees: false,
                ..Options::default()
            },
        )
        .unwrap();
        let on = compile(&dag, &desk(), &Options::default()).unwrap();
        assert_eq!(on.stats.metrics.t_eff, off.stats.metrics.t_eff);
        assert!(on.stats.metrics.makespan_ns <= off.stats.metrics.makespan_ns);
        assert_eq!(on.stats.makespan_before_ees_ns, off.stats.metrics.makespan_ns);
    }

    #[test]
    fn scheduler_names_round_trip() {
        for s in Scheduler::ALL {
            assert_eq!(s.name().parse::<Scheduler>().unwrap(), s);
        }
        assert!("quantum".parse::<Scheduler>().is_err());
    }
}
