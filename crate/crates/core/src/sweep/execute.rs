use std::fmt::Write as _;
use std::sync::OnceLock;

use super::plan::{Instance, SweepPlan};
use super::store::{write_atomic, Lookup, RunRecord, Store};
use crate::error::Result;
use crate::grid::{Action, Variant};
use crate::learners::{Algorithm, AlgorithmParams, LearnerBank};
use crate::metrics::{summarize_instance, AveCache, ErrorModel, InstanceSummary};
use crate::oracle::Oracles;
use crate::task::Task;
use crate::trajectory::{generate_indices, run_seed, DEFAULT_START};

/// Everything a run needs that does not depend on the instance.
#[derive(Clone, Debug)]
pub struct Context {
    pub task: Task,
    pub oracles: Oracles,
    pub model: ErrorModel,
}

impl Context {
    pub fn new(variant: Variant) -> Result<Context> {
        Context::from_task(Task::new(variant))
    }

    pub fn from_task(task: Task) -> Result<Context> {
        let oracles = Oracles::compute(&task.grid, &task.subtasks)?;
        let model = ErrorModel::new(&task, &oracles);
        Ok(Context { task, oracles, model })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub mean_ave: f64,
    pub final_ave: f64,
    pub diverged: bool,
    pub curve: Vec<f64>,
}

/// Learns from one behavior stream, recording the error after every update.
pub fn run_instance(ctx: &Context, params: AlgorithmParams, stream: &[[u8; 3]], curve_every: Option<usize>) -> RunOutcome {
    let mut bank = LearnerBank::new(params, &ctx.task);
    let mut cache = AveCache::new(&ctx.model, &bank);
    let mut curve = Vec::new();
    if curve_every.is_some() {
        curve.push(cache.ave());
    }
    let mut sum = 0.0;
    let mut last = cache.ave();
    for (t, &[s, a, n]) in stream.iter().enumerate() {
        let action = Action::from_index(a as usize).expect("valid action");
        let rep = bank.step(&ctx.task, s as usize, action, n as usize);
        last = cache.update(&ctx.model, &rep.updated, &bank);
        if !last.is_finite() {
            if let Some(k) = curve_every {
                curve.resize(stream.len() / k + 1, f64::INFINITY);
            }
            return RunOutcome { mean_ave: f64::INFINITY, final_ave: f64::INFINITY, diverged: true, curve };
        }
        sum += last;
        if let Some(k) = curve_every {
            if (t + 1) % k == 0 {
                curve.push(last);
            }
        }
    }
    RunOutcome { mean_ave: sum / stream.len().max(1) as f64, final_ave: last, diverged: false, curve }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemStatus {
    Pending,
    Done,
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkItem {
    pub instance: Instance,
    pub run: u32,
    pub status: ItemStatus,
}

/// Classifies every (instance, run) of the plan against the store. Corrupt entries are
/// quarantined and come back as pending.
pub fn resume(plan: &SweepPlan, store: &Store) -> Result<(Vec<WorkItem>, usize)> {
    let mut items = Vec::new();
    let mut quarantined = 0;
    for instance in plan.instances() {
        for run in 0..plan.runs as u32 {
            let status = match store.lookup(plan.task, &instance.params, run, plan.steps as u64, plan.base_seed)? {
                Lookup::Found(r) if r.diverged => ItemStatus::Diverged,
                Lookup::Found(_) => ItemStatus::Done,
                Lookup::Missing => ItemStatus::Pending,
                Lookup::Quarantined { .. } => {
                    quarantined += 1;
                    ItemStatus::Pending
                }
            };
            items.push(WorkItem { instance, run, status });
        }
    }
    Ok((items, quarantined))
}

pub fn pending(items: &[WorkItem]) -> Vec<WorkItem> {
    items.iter().copied().filter(|i| i.status == ItemStatus::Pending).collect()
}

#[derive(Clone, Debug, Default)]
pub struct ExecuteReport {
    pub computed: usize,
    pub reused: usize,
    pub quarantined: usize,
    pub diverged: usize,
    /// Items that could not be stored, with the reason.
    pub failures: Vec<String>,
}

/// Runs every pending item of the plan on `workers` threads and writes `summary.csv`.
pub fn execute(plan: &SweepPlan, store: &Store, workers: usize) -> Result<ExecuteReport> {
    execute_with(plan, store, workers, |_| {})
}

/// Like [`execute`], calling `progress` with the number of finished items.
pub fn execute_with(
    plan: &SweepPlan,
    store: &Store,
    workers: usize,
    progress: impl Fn(usize) + Sync,
) -> Result<ExecuteReport> {
    let ctx = Context::new(plan.task)?;
    let (items, quarantined) = resume(plan, store)?;
    let todo = pending(&items);
    let streams: Vec<OnceLock<Result<Vec<[u8; 3]>, String>>> = (0..plan.runs).map(|_| OnceLock::new()).collect();
    let done = std::sync::atomic::AtomicUsize::new(0);

    let work = |item: &WorkItem| -> std::result::Result<bool, String> {
        let stream = streams[item.run as usize]
            .get_or_init(|| {
                generate_indices(&ctx.task.grid, run_seed(plan.base_seed, item.run as u64), plan.steps, DEFAULT_START)
                    .map_err(|e| e.to_string())
            })
            .as_ref()?;
        let out = run_instance(&ctx, item.instance.params, stream, plan.curve_every);
        let rec = RunRecord {
            params: item.instance.params,
            run: item.run,
            steps: plan.steps as u64,
            base_seed: plan.base_seed,
            diverged: out.diverged,
            mean_ave: out.mean_ave,
            final_ave: out.final_ave,
            curve_every: plan.curve_every.unwrap_or(0) as u32,
            curve: out.curve,
        };
        store.write_record(plan.task, &rec).map_err(|e| e.to_string())?;
        progress(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1);
        Ok(out.diverged)
    };

    let results = run_parallel(&todo, workers.max(1), work)?;
    let mut report = ExecuteReport {
        reused: items.len() - todo.len(),
        quarantined,
        ..Default::default()
    };
    for (item, r) in todo.iter().zip(results) {
        match r {
            Ok(div) => {
                report.computed += 1;
                report.diverged += div as usize;
            }
            Err(e) => report.failures.push(format!("{} run {}: {e}", item.instance.key(), item.run)),
        }
    }
    report.diverged += items.iter().filter(|i| i.status == ItemStatus::Diverged).count();
    finalize(plan, store)?;
    Ok(report)
}

#[cfg(feature = "parallel")]
fn run_parallel<T: Send>(
    items: &[WorkItem],
    workers: usize,
    f: impl Fn(&WorkItem) -> T + Sync,
) -> Result<Vec<T>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::Error::Format(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<T: Send>(items: &[WorkItem], _workers: usize, f: impl Fn(&WorkItem) -> T + Sync) -> Result<Vec<T>> {
    Ok(items.iter().map(f).collect())
}

/// Summaries of the plan's instances, read back from the store in plan order.
pub fn collect_summaries(plan: &SweepPlan, store: &Store) -> Result<Vec<InstanceSummary>> {
    let mut out = Vec::new();
    for instance in plan.instances() {
        let mut per_run = Vec::with_capacity(plan.runs);
        for run in 0..plan.runs as u32 {
            let path = store.record_path(plan.task, &instance.params, run);
            if path.exists() {
                let r = Store::read_record(&path)?;
                per_run.push(r.mean_ave);
            }
        }
        if !per_run.is_empty() {
            out.push(summarize_instance(instance.params, per_run));
        }
    }
    Ok(out)
}

pub const SUMMARY_HEADER: &str = "task,alg,alpha,lambda,eta,beta,zeta,runs,mean_ave,stderr,diverged";

/// One CSV row; parameters an algorithm does not use are left empty.
pub fn summary_row(task: Variant, s: &InstanceSummary) -> String {
    let p = &s.params;
    let opt = |used: bool, v: f64| if used { v.to_string() } else { String::new() };
    let zeta = p.alg == Algorithm::Abtd;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        task.slug(),
        p.alg.slug(),
        p.alpha,
        opt(!zeta, p.lambda),
        opt(p.alg.uses_eta(), p.eta),
        opt(p.alg.uses_beta(), p.beta),
        opt(zeta, p.lambda),
        s.runs(),
        s.mean,
        s.stderr,
        s.diverged_runs
    )
}

pub fn summary_csv(task: Variant, summaries: &[InstanceSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        writeln!(out, "{}", summary_row(task, s)).unwrap();
    }
    out
}

/// Writes the merged `summary.csv`, a deterministic fold over (instance, run).
pub fn finalize(plan: &SweepPlan, store: &Store) -> Result<()> {
    let summaries = collect_summaries(plan, store)?;
    write_atomic(&store.summary_path(plan.task), summary_csv(plan.task, &summaries).as_bytes())
}
