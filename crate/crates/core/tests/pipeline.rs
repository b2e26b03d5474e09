use proptest::prelude::*;

use dqcc_core::arch::Topology;
use dqcc_core::blockform::CostParams;
use dqcc_core::circuit::{build_dag, Gate, GateDag};
use dqcc_core::ees::run_ees;
use dqcc_core::exec::Exec;
use dqcc_core::layout::Layout;
use dqcc_core::metrics::compute_metrics;
use dqcc_core::oracle::{optimal_teff, OracleLimits};
use dqcc_core::pipeline::{compile, compile_with_layout, Options, Scheduler};
use dqcc_core::schedule::Schedule;
use dqcc_core::timing::{simulate_latency, Policy};
use dqcc_core::validate::check;

/// Gate list over `n` qubits: `(a, b)` with `a == b` is a unary on `a`.
fn circuit(n: usize, max_gates: usize) -> impl Strategy<Value = GateDag> {
    prop::collection::vec((0..n, 0..n), 1..max_gates).prop_map(move |pairs| {
        let gates = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (a, b))| {
                if a == b {
                    Gate::unary(id, a, "h")
                } else {
                    Gate::cnot(id, a, b)
                }
            })
            .collect();
        build_dag(n, gates)
    })
}

fn small_machine() -> impl Strategy<Value = Topology> {
    prop_oneof![
        Just(Topology::grid(2, 2, 8, 0.75).unwrap()),
        Just(Topology::line(3, 8, 0.5).unwrap()),
        Just(Topology::grid(1, 2, 10, 0.8).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_scheduler_emits_valid_schedules(dag in circuit(10, 60), topo in small_machine(), seed in 0u64..4) {
        for s in Scheduler::ALL {
            let opts = Options { scheduler: s, seed, params: CostParams { beam: 4, ..CostParams::default() }, ..Options::default() };
            let c = compile(&dag, &topo, &opts).unwrap();
            prop_assert!(check(&c.schedule, &dag, &topo).is_ok());
            prop_assert!(check(&c.scheduled, &dag, &topo).is_ok());
            if let Some(cost) = c.stats.scheduler_cost {
                prop_assert!((cost - c.stats.metrics.t_eff).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ees_keeps_cost_and_never_slows(dag in circuit(10, 60), topo in small_machine()) {
        let opts = Options { params: CostParams { beam: 4, ..CostParams::default() }, ees: false, ..Options::default() };
        let c = compile(&dag, &topo, &opts).unwrap();
        let shifted = run_ees(&c.scheduled, &topo);
        prop_assert!(check(&shifted, &dag, &topo).is_ok());
        let (a, b) = (compute_metrics(&c.scheduled, &topo, 1.77), compute_metrics(&shifted, &topo, 1.77));
        prop_assert_eq!(a.t_eff, b.t_eff);
        prop_assert!(b.makespan_ns <= a.makespan_ns);
    }

    #[test]
    fn wider_beam_never_worse(dag in circuit(12, 80), topo in small_machine(), k in 0usize..5) {
        let t = |beam| {
            let opts = Options { params: CostParams { beam, window: k, ..CostParams::default() }, ..Options::default() };
            compile(&dag, &topo, &opts).unwrap().stats.metrics.t_eff
        };
        let (w1, w4, w8) = (t(1), t(4), t(8));
        prop_assert!(w8 <= w4 + 1e-9 && w4 <= w1 + 1e-9, "{} {} {}", w1, w4, w8);
    }

    #[test]
    fn oracle_bounds_every_scheduler(dag in circuit(6, 12), chips in prop::sample::subsequence((0..9).collect::<Vec<usize>>(), 6)) {
        let topo = Topology::line(3, 5, 0.6).unwrap();
        let assign: Vec<usize> = chips.iter().map(|s| s / 3).collect();
        let layout = Layout::initial(&assign, &topo).unwrap();
        prop_assume!(dag.cnot_count() <= 12);
        let best = optimal_teff(&dag, &layout, &topo, 1.77, &OracleLimits::default()).unwrap();
        prop_assert!(check(&best.witness, &dag, &topo).is_ok());
        for s in Scheduler::ALL {
            let opts = Options { scheduler: s, ..Options::default() };
            let c = compile_with_layout(&dag, &topo, layout.clone(), &opts).unwrap();
            prop_assert!(best.t_eff <= c.stats.metrics.t_eff + 1e-9, "{}: {} > {}", s, best.t_eff, c.stats.metrics.t_eff);
        }
    }

    #[test]
    fn retiming_is_stable_and_json_round_trips(dag in circuit(10, 40), topo in small_machine()) {
        let c = compile(&dag, &topo, &Options { ees: false, ..Options::default() }).unwrap();
        let again = simulate_latency(&c.scheduled, &topo, Policy::BlockOrder);
        prop_assert_eq!(again.makespan(), c.scheduled.makespan());
        let back = Schedule::from_json(&c.schedule.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), c.schedule.to_json());
    }
}

#[test]
fn sequential_and_parallel_compile_identically() {
    let dag = dqcc_core::generate::generate(dqcc_core::generate::Family::QvLike, 16, 4).unwrap();
    let topo = dqcc_core::bench::desk_topology();
    let a = compile(
        &dag,
        &topo,
        &Options {
            exec: Exec::Sequential,
            ..Options::default()
        },
    )
    .unwrap();
    let b = compile(
        &dag,
        &topo,
        &Options {
            exec: Exec::Parallel,
            ..Options::default()
        },
    )
    .unwrap();
    assert_eq!(a.schedule.to_json(), b.schedule.to_json());
    assert_eq!(a.stats, b.stats);
}
