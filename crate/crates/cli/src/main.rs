use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ope_bench::lstd::{lstd_baseline, lstd_csv, Weighting};
use ope_bench::oracle::oracle_files;
use ope_bench::report::{render, Figure};
use ope_bench::sweep::config::validate_config;
use ope_bench::sweep::execute::execute_with;
use ope_bench::sweep::plan::{parse_algorithms, DEFAULT_SEED, DEFAULT_STEPS};
use ope_bench::sweep::store::write_atomic;
use ope_bench::sweep::{build_plan, Context, Overrides, Profile, Store};
use ope_bench::trajectory::{generate_run, run_seed, DEFAULT_START};
use ope_bench::{build_grid, Error, Variant};

#[derive(Parser)]
#[command(name = "ope-bench", version, about = "Off-policy prediction benchmark on the four-rooms gridworld")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump behavior trajectories, one file per run.
    Gen(GenArgs),
    /// Run a parameter sweep into the result store, resuming any earlier progress.
    Sweep(SweepArgs),
    /// Least-squares baselines, written to `<out>/<task>/lstd.csv`.
    Lstd(LstdArgs),
    /// True values, visitation and target policies, written to `<out>/<task>/oracles/`.
    Oracles(OracleArgs),
    /// Print the data behind one figure as CSV, read from the result store.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Rooms,
    HvRooms,
}

impl From<TaskArg> for Variant {
    fn from(t: TaskArg) -> Variant {
        match t {
            TaskArg::Rooms => Variant::Rooms,
            TaskArg::HvRooms => Variant::HighVarianceRooms,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "rooms")]
    task: TaskArg,
    /// Result store root.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Plan file; command-line flags override its values.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk", conflicts_with = "plan")]
    profile: ProfileArg,
    /// Comma-separated algorithm names; all eleven when omitted.
    #[arg(long, value_delimiter = ',', conflicts_with = "plan")]
    algorithms: Vec<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "OPE_BENCH_WORKERS")]
    workers: Option<usize>,
    /// Keep a learning curve point every this many steps.
    #[arg(long)]
    curves: Option<usize>,
}

#[derive(Args)]
struct LstdArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    lambda: Vec<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_figure)]
    figure: Figure,
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Sweep(a) => sweep(a),
        Command::Lstd(a) => lstd(a),
        Command::Oracles(a) => oracles(a),
        Command::Report(a) => {
            let csv = render(&Store::new(&a.common.out), a.common.task.into(), a.figure)?;
            let mut out = BufWriter::new(std::io::stdout().lock());
            out.write_all(csv.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::Format(e.to_string()))
        }
    }
}

fn gen(a: GenArgs) -> Result<(), Error> {
    let task: Variant = a.common.task.into();
    let grid = build_grid(task);
    let dir = Store::new(&a.common.out).task_dir(task).join("trajectories");
    for r in 0..a.runs {
        let traj = generate_run(&grid, run_seed(a.seed, r as u64), a.steps, DEFAULT_START)?;
        let mut bytes = Vec::with_capacity(8 + 3 * a.steps);
        traj.write_to(&mut bytes).map_err(|e| Error::Format(e.to_string()))?;
        let path = dir.join(format!("run-{r}.traj"));
        write_atomic(&path, &bytes)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Error> {
    let task: Variant = a.common.task.into();
    let mut plan = match &a.plan {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            let mut p = validate_config(&text)?;
            p.task = task;
            p
        }
        None => {
            let names: Vec<&str> = a.algorithms.iter().map(String::as_str).collect();
            let profile = match a.profile {
                ProfileArg::Desk => Profile::Desk,
                ProfileArg::Paper => Profile::Paper,
            };
            build_plan(task, &parse_algorithms(&names)?, profile, Overrides::default())
        }
    };
    plan.runs = a.runs.unwrap_or(plan.runs);
    plan.steps = a.steps.unwrap_or(plan.steps);
    plan.base_seed = a.seed.unwrap_or(plan.base_seed);
    plan.curve_every = a.curves.or(plan.curve_every);
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let store = Store::new(&a.common.out);
    let total = plan.num_instances() * plan.runs;
    eprintln!("{task}: {} instances x {} runs x {} steps on {workers} worker(s)", plan.num_instances(), plan.runs, plan.steps);
    let t0 = Instant::now();
    let every = (total / 100).max(1);
    let report = execute_with(&plan, &store, workers, |done| {
        if done % every == 0 {
            eprintln!("  {done} new runs, {:.0} s", t0.elapsed().as_secs_f64());
        }
    })?;
    eprintln!(
        "done: {} computed, {} reused, {} quarantined, {} diverged; summary at {}",
        report.computed,
        report.reused,
        report.quarantined,
        report.diverged,
        store.summary_path(task).display()
    );
    if !report.failures.is_empty() {
        return Err(Error::Format(format!("{} runs could not be stored:\n{}", report.failures.len(), report.failures.join("\n"))));
    }
    Ok(())
}

fn lstd(a: LstdArgs) -> Result<(), Error> {
    let task: Variant = a.common.task.into();
    if let Some(l) = a.lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::Config(vec![format!("lambda: {l} out of [0,1]")]));
    }
    let ctx = Context::new(task)?;
    let mut rows = Vec::new();
    for &lambda in &a.lambda {
        for w in [Weighting::Standard, Weighting::Emphatic { beta: None }] {
            let row = lstd_baseline(&ctx.task, &ctx.model, lambda, w, a.runs, a.steps, a.seed)?;
            eprintln!("lambda {lambda} {w:?}: ave {:.4}, {} of 8 systems singular", row.ave, row.singular);
            rows.push(row);
        }
    }
    let path = Store::new(&a.common.out).lstd_path(task);
    write_atomic(&path, lstd_csv(&rows).as_bytes())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn oracles(a: OracleArgs) -> Result<(), Error> {
    let task: Variant = a.common.task.into();
    let ctx = Context::new(task)?;
    let dir = Store::new(&a.common.out).oracle_dir(task);
    for (name, body) in oracle_files(&ctx.task.grid, &ctx.task.subtasks, &ctx.oracles) {
        let path: &Path = &dir.join(name);
        write_atomic(path, body.as_bytes())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
