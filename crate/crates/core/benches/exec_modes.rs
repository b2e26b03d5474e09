use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dqcc_core::bench::{desk_topology, run_suite, InstanceSpec, Suite};
use dqcc_core::exec::Exec;
use dqcc_core::generate::{generate, Family};
use dqcc_core::pipeline::{compile, Options};

fn ums_beam(c: &mut Criterion) {
    let topo = desk_topology();
    let dag = generate(Family::QvLike, 24, 1).unwrap();
    let mut g = c.benchmark_group("ums_qv24");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let opts = Options {
            exec,
            ..Options::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &opts, |b, o| {
            b.iter(|| compile(&dag, &topo, o).unwrap())
        });
    }
    g.finish();
}

fn suite_fanout(c: &mut Criterion) {
    let suite = Suite::new(vec![
        InstanceSpec {
            family: Family::Qaoa3Reg,
            qubits: vec![16, 24],
            seeds: vec![1],
        },
        InstanceSpec {
            family: Family::QftLike,
            qubits: vec![16, 24],
            seeds: vec![1],
        },
    ]);
    let mut g = c.benchmark_group("suite");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &e| {
            b.iter(|| run_suite(&suite, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ums_beam, suite_fanout);
criterion_main!(benches);
