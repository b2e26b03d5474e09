use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dqcc_core::arch::{load_topology, Topology};
use dqcc_core::bench::{desk_topology, run_suite, Suite};
use dqcc_core::blockform::CostParams;
use dqcc_core::circuit::{parse_circuit, Format, GateDag};
use dqcc_core::exec::Exec;
use dqcc_core::generate::{generate, Family};
use dqcc_core::mapping::{map_program, Mapper};
use dqcc_core::metrics::{fidelity_estimate, ErrorConfig};
use dqcc_core::oracle::{optimal_teff, OracleLimits};
use dqcc_core::pipeline::{compile, compile_with_layout, Options, Scheduler};
use dqcc_core::schedule::Schedule;
use dqcc_core::validate::check;

#[derive(Parser)]
#[command(
    name = "athena",
    version,
    about = "Teleportation scheduling for distributed quantum computers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Map, schedule and time a circuit; write schedule.json, stats.json, gantt.csv.
    Compile(CompileArgs),
    /// Run a benchmark suite and print a comparison table.
    Bench(BenchArgs),
    /// Check a timed schedule against its circuit and machine.
    Validate(ValidateArgs),
    /// Exhaustive minimum T_eff for a tiny instance, with each scheduler's gap.
    Oracle(OracleArgs),
    /// Write a synthetic benchmark circuit.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Machine {
    /// Circuit file (.json, or .qasm for the QASM subset).
    #[arg(long)]
    circuit: PathBuf,
    /// Topology config (TOML or JSON). Defaults to the 2x2 desk machine.
    #[arg(long)]
    arch: Option<PathBuf>,
}

#[derive(Args)]
struct Knobs {
    #[arg(long, value_enum, default_value_t = MapperArg::Mincut)]
    mapper: MapperArg,
    #[arg(long, default_value_t = 16)]
    beam: usize,
    #[arg(long, default_value_t = 4)]
    window: usize,
    #[arg(long, default_value_t = 1.77)]
    alpha: f64,
    #[arg(long, default_value_t = 0.871)]
    beta: f64,
    #[arg(long, default_value_t = 64)]
    max_block: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Knobs {
    fn params(&self) -> CostParams {
        CostParams {
            alpha: self.alpha,
            beta: self.beta,
            beam: self.beam,
            window: self.window,
            max_block: self.max_block,
        }
    }
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    machine: Machine,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long, value_enum, default_value_t = SchedulerArg::Ums)]
    scheduler: SchedulerArg,
    /// Shift teleports earlier after timing (UMS only).
    #[arg(long, overrides_with = "no_ees")]
    ees: bool,
    #[arg(long, overrides_with = "ees")]
    no_ees: bool,
    /// Fraction of EPR generation hidden behind computation, in [0, 1].
    #[arg(long)]
    epr_hide: Option<f64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Also write the block partition here.
    #[arg(long)]
    dump_blocks: Option<PathBuf>,
    /// Also write the initial layout here.
    #[arg(long)]
    dump_layout: Option<PathBuf>,
    /// Per-layer beam costs, one JSON record per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Error-rate config (TOML); writes fidelity.json.
    #[arg(long)]
    errors: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, value_enum, default_value_t = TableFormat::Markdown)]
    format: TableFormat,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    schedule: PathBuf,
    #[command(flatten)]
    machine: Machine,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    machine: Machine,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long, default_value_t = 2_000_000)]
    max_states: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    qubits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; `.qasm` writes the QASM subset, anything else JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapperArg {
    Mincut,
    Trivial,
}

impl From<MapperArg> for Mapper {
    fn from(m: MapperArg) -> Self {
        match m {
            MapperArg::Mincut => Mapper::Mincut,
            MapperArg::Trivial => Mapper::Trivial,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedulerArg {
    Ums,
    Blockgreedy,
    Pergate,
}

impl From<SchedulerArg> for Scheduler {
    fn from(s: SchedulerArg) -> Self {
        match s {
            SchedulerArg::Ums => Scheduler::Ums,
            SchedulerArg::Blockgreedy => Scheduler::Blockgreedy,
            SchedulerArg::Pergate => Scheduler::Pergate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Markdown,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let run = match cli.cmd {
        Cmd::Compile(a) => cmd_compile(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Generate(a) => cmd_generate(a),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `ATHENA_THREADS` caps the worker pool.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("ATHENA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("ATHENA_THREADS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        bail!("ATHENA_THREADS must be a positive integer, got `{raw}`");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load(m: &Machine) -> Result<(GateDag, Topology)> {
    let dag = parse_circuit(&read(&m.circuit)?, Format::from_path(&m.circuit))
        .with_context(|| format!("parsing {}", m.circuit.display()))?;
    let topo = match &m.arch {
        Some(p) => load_topology(&read(p)?).with_context(|| format!("loading {}", p.display()))?,
        None => desk_topology(),
    };
    Ok((dag, topo))
}

fn cmd_compile(a: CompileArgs) -> Result<ExitCode> {
    let (dag, topo) = load(&a.machine)?;
    let errors = match &a.errors {
        Some(p) => {
            let cfg: ErrorConfig = toml::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?;
            cfg.validate()?;
            Some(cfg)
        }
        None => None,
    };
    let opts = Options {
        mapper: a.knobs.mapper.into(),
        scheduler: a.scheduler.into(),
        params: a.knobs.params(),
        ees: !a.no_ees,
        epr_hide: a.epr_hide,
        seed: a.knobs.seed,
        exec: Exec::default(),
    };
    let c = compile(&dag, &topo, &opts)?;
    let out = &a.out_dir;
    write(&out.join("schedule.json"), &c.schedule.to_json())?;
    write(&out.join("stats.json"), &serde_json::to_string_pretty(&c.stats)?)?;
    write(&out.join("gantt.csv"), &c.schedule.to_gantt_csv())?;
    if let Some(p) = &a.dump_blocks {
        write(p, &c.blocks.to_json())?;
    }
    if let Some(p) = &a.dump_layout {
        write(p, &serde_json::to_string_pretty(&c.layout.to_json(&c.topo))?)?;
    }
    if let Some(p) = &a.trace {
        let mut lines = String::new();
        for t in &c.trace {
            lines.push_str(&serde_json::to_string(t)?);
            lines.push('\n');
        }
        write(p, &lines)?;
    }
    if let Some(cfg) = &errors {
        let f = fidelity_estimate(&c.schedule, cfg);
        write(&out.join("fidelity.json"), &serde_json::to_string_pretty(&f)?)?;
    }
    let m = &c.stats.metrics;
    println!(
        "{}: t_eff {:.2} ({} relocate, {} re-cnot), makespan {:.1} us, {} blocks",
        c.stats.scheduler,
        m.t_eff,
        m.n_relocate,
        m.n_recnot,
        m.makespan_ns as f64 / 1e3,
        c.stats.blocks
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(a: BenchArgs) -> Result<ExitCode> {
    let suite = Suite::parse(&read(&a.suite)?).with_context(|| format!("parsing {}", a.suite.display()))?;
    let table = run_suite(&suite, Exec::default())?;
    let text = match a.format {
        TableFormat::Csv => table.to_csv(),
        TableFormat::Markdown => table.to_markdown(),
    };
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(a: ValidateArgs) -> Result<ExitCode> {
    let (dag, topo) = load(&a.machine)?;
    let schedule =
        Schedule::from_json(&read(&a.schedule)?).with_context(|| format!("parsing {}", a.schedule.display()))?;
    let report = check(&schedule, &dag, &topo);
    if report.is_ok() {
        println!(
            "ok: {} instructions, makespan {} ns",
            schedule.len(),
            schedule.makespan()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        print!("{report}");
        println!("{} violation(s)", report.violations.len());
        Ok(ExitCode::from(1))
    }
}

fn cmd_oracle(a: OracleArgs) -> Result<ExitCode> {
    let (dag, topo) = load(&a.machine)?;
    let params = a.knobs.params();
    params.validate()?;
    let layout = map_program(&dag, &topo, a.knobs.mapper.into(), a.knobs.seed)?;
    let limits = OracleLimits {
        max_states: a.max_states,
        ..OracleLimits::default()
    };
    let best = optimal_teff(&dag, &layout, &topo, params.alpha, &limits)?;
    println!(
        "optimum t_eff {:.2} ({} relocate, {} re-cnot; {} states)",
        best.t_eff, best.n_relocate, best.n_recnot, best.states
    );
    for s in Scheduler::ALL {
        let opts = Options {
            scheduler: s,
            params,
            seed: a.knobs.seed,
            ..Options::default()
        };
        match compile_with_layout(&dag, &topo, layout.clone(), &opts) {
            Ok(c) => {
                let t = c.stats.metrics.t_eff;
                println!("{s:<12} t_eff {t:.2} gap {:.2}", t - best.t_eff);
            }
            Err(e) => println!("{s:<12} failed: {e}"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(a: GenerateArgs) -> Result<ExitCode> {
    let family: Family = a.family.parse()?;
    let dag = generate(family, a.qubits, a.seed)?;
    let text = match Format::from_path(&a.out) {
        Format::QasmLite => dag.to_qasm(),
        Format::Json => dag.to_json(),
    };
    write(&a.out, &text)?;
    println!(
        "{family}: {} qubits, {} gates, {} cnots",
        dag.qubit_count,
        dag.len(),
        dag.cnot_count()
    );
    Ok(ExitCode::SUCCESS)
}
