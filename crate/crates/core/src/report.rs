//! Plot-ready CSV for every figure, built only from what the store holds: run records,
//! the oracle tables and `lstd.csv`.
//!
//! | figure | columns |
//! |---|---|
//! | `u-curves` | `alg,lambda,alpha,eta,beta,runs,mean_ave,stderr,diverged` |
//! | `emphatic-beta` | `alg,beta,alpha,runs,mean_ave,stderr,diverged` |
//! | `emphatic-curves` | `series,alpha,beta,step,mean_ave,stderr` |
//! | `gradient-eta` | `alg,eta,alpha,runs,mean_ave,stderr,diverged` |
//! | `best-curves` | `alg,alpha,lambda,eta,beta,step,mean_ave,stderr` |
//! | `target-policy` | `subtask,room,target_x,target_y,cell_x,cell_y,state,left,right,up,down` |
//! | `visitation` | `subtask,cell_x,cell_y,state,mu,mu_in_region` |
//!
//! `u-curves` keeps, for each `(alg, lambda, alpha)`, the best `eta` or `beta`. ABTD's
//! `zeta` is reported in the `lambda` column. `mean_ave` is over non-diverged runs; an
//! instance with any diverged run is never picked as a best instance. In
//! `emphatic-curves` the least-squares baselines are rows with an empty `step`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{build_grid, Cell, Variant};
use crate::learners::{Algorithm, AlgorithmParams};
use crate::metrics::{best_instance, curve_summary, summarize_instance, Criterion, InstanceSummary};
use crate::sweep::{RunRecord, Store};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    UCurves,
    EmphaticBeta,
    EmphaticCurves,
    GradientEta,
    BestCurves,
    TargetPolicy,
    Visitation,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::UCurves,
        Figure::EmphaticBeta,
        Figure::EmphaticCurves,
        Figure::GradientEta,
        Figure::BestCurves,
        Figure::TargetPolicy,
        Figure::Visitation,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Figure::UCurves => "u-curves",
            Figure::EmphaticBeta => "emphatic-beta",
            Figure::EmphaticCurves => "emphatic-curves",
            Figure::GradientEta => "gradient-eta",
            Figure::BestCurves => "best-curves",
            Figure::TargetPolicy => "target-policy",
            Figure::Visitation => "visitation",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.slug() == s).ok_or_else(|| {
            let names: Vec<&str> = Figure::ALL.iter().map(|f| f.slug()).collect();
            Error::Format(format!("unknown figure `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

/// Records of one instance with their aggregate.
#[derive(Clone, Debug)]
pub struct InstanceData {
    pub summary: InstanceSummary,
    pub records: Vec<RunRecord>,
}

/// Every instance of a task in the store; fails if any record is unreadable.
pub fn load_instances(store: &Store, task: Variant) -> Result<Vec<InstanceData>> {
    let (groups, bad) = store.load_task(task)?;
    if let Some(e) = bad.into_iter().next() {
        return Err(e);
    }
    Ok(groups
        .into_iter()
        .map(|records| {
            let summary = summarize_instance(records[0].params, records.iter().map(|r| r.mean_ave).collect());
            InstanceData { summary, records }
        })
        .collect())
}

pub fn render(store: &Store, task: Variant, figure: Figure) -> Result<String> {
    match figure {
        Figure::TargetPolicy => read_table(&store.oracle_dir(task).join("policy.csv"), "oracles"),
        Figure::Visitation => visitation(store, task),
        _ => {
            let data = load_instances(store, task)?;
            if data.is_empty() {
                return Err(Error::MissingData(format!("no run records for {task} under {}", store.root().display())));
            }
            match figure {
                Figure::UCurves => Ok(u_curves(&data)),
                Figure::EmphaticBeta => Ok(emphatic_beta(&data)),
                Figure::GradientEta => Ok(gradient_eta(&data)),
                Figure::EmphaticCurves => emphatic_curves(store, task, &data),
                Figure::BestCurves => best_curves(&data),
                Figure::TargetPolicy | Figure::Visitation => unreachable!(),
            }
        }
    }
}

fn stats(s: &InstanceSummary) -> String {
    format!("{},{},{},{}", s.runs(), s.mean, s.stderr, s.diverged_runs)
}

pub fn u_curves(data: &[InstanceData]) -> String {
    let mut best: BTreeMap<(usize, u64, u64), &InstanceSummary> = BTreeMap::new();
    for d in data {
        let p = &d.summary.params;
        let key = (alg_index(p.alg), p.lambda.to_bits(), (-p.alpha).to_bits());
        let slot = best.entry(key).or_insert(&d.summary);
        if d.summary.score() < slot.score() {
            *slot = &d.summary;
        }
    }
    let mut out = String::from("alg,lambda,alpha,eta,beta,runs,mean_ave,stderr,diverged\n");
    let mut rows: Vec<&InstanceSummary> = best.into_values().collect();
    rows.sort_by(|a, b| {
        alg_index(a.params.alg)
            .cmp(&alg_index(b.params.alg))
            .then(a.params.lambda.total_cmp(&b.params.lambda))
            .then(b.params.alpha.total_cmp(&a.params.alpha))
    });
    for s in rows {
        let p = &s.params;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.alg.slug(),
            p.lambda,
            p.alpha,
            opt(p.alg.uses_eta(), p.eta),
            opt(p.alg.uses_beta(), p.beta),
            stats(s)
        )
        .unwrap();
    }
    out
}

pub fn emphatic_beta(data: &[InstanceData]) -> String {
    let mut out = String::from("alg,beta,alpha,runs,mean_ave,stderr,diverged\n");
    for d in data {
        let p = &d.summary.params;
        if p.lambda == 0.0 && matches!(p.alg, Algorithm::EmphaticTd | Algorithm::EmphaticTdBeta) {
            writeln!(out, "{},{},{},{}", p.alg.slug(), opt(p.alg.uses_beta(), p.beta), p.alpha, stats(&d.summary)).unwrap();
        }
    }
    out
}

pub fn gradient_eta(data: &[InstanceData]) -> String {
    let mut out = String::from("alg,eta,alpha,runs,mean_ave,stderr,diverged\n");
    for d in data {
        let p = &d.summary.params;
        if p.lambda == 0.0 && p.alg.uses_eta() {
            writeln!(out, "{},{},{},{}", p.alg.slug(), p.eta, p.alpha, stats(&d.summary)).unwrap();
        }
    }
    out
}

/// Mean learning curve of an instance as `(step, mean, stderr)`.
fn mean_curve(d: &InstanceData) -> Result<Vec<(usize, f64, f64)>> {
    let every = d.records[0].curve_every as usize;
    if every == 0 || d.records.iter().any(|r| r.curve.is_empty()) {
        return Err(Error::MissingData(format!(
            "no learning curves stored for {}; rerun the sweep with --curves",
            d.summary.params.alg
        )));
    }
    let curves: Vec<&[f64]> = d.records.iter().map(|r| r.curve.as_slice()).collect();
    Ok(curve_summary(&curves).into_iter().enumerate().map(|(k, (m, s))| (k * every, m, s)).collect())
}

/// Lowest-AUC instance among `candidates`.
fn best_of<'a>(candidates: &[&'a InstanceData]) -> Option<&'a InstanceData> {
    let summaries: Vec<InstanceSummary> = candidates.iter().map(|d| d.summary.clone()).collect();
    let steps = candidates.first()?.records[0].steps as usize;
    best_instance(&summaries, Criterion::Auc { steps }).map(|i| candidates[i])
}

pub fn emphatic_curves(store: &Store, task: Variant, data: &[InstanceData]) -> Result<String> {
    let mut out = String::from("series,alpha,beta,step,mean_ave,stderr\n");
    for alg in [Algorithm::EmphaticTd, Algorithm::EmphaticTdBeta] {
        let pool: Vec<&InstanceData> =
            data.iter().filter(|d| d.summary.params.alg == alg && d.summary.params.lambda == 0.0).collect();
        let Some(best) = best_of(&pool) else { continue };
        let p = &best.summary.params;
        for (step, m, s) in mean_curve(best)? {
            writeln!(out, "{},{},{},{step},{m},{s}", alg.slug(), p.alpha, opt(alg.uses_beta(), p.beta)).unwrap();
        }
    }
    let lstd = read_table(&store.lstd_path(task), "lstd")?;
    for line in lstd.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if let [lambda, weighting, beta, ave, ..] = f[..] {
            if lambda.parse::<f64>().ok() == Some(0.0) {
                writeln!(out, "lstd-{weighting},,{beta},,{ave},").unwrap();
            }
        }
    }
    Ok(out)
}

pub fn best_curves(data: &[InstanceData]) -> Result<String> {
    let mut out = String::from("alg,alpha,lambda,eta,beta,step,mean_ave,stderr\n");
    for alg in Algorithm::ALL {
        let pool: Vec<&InstanceData> = data.iter().filter(|d| d.summary.params.alg == alg).collect();
        let Some(best) = best_of(&pool) else { continue };
        let p: &AlgorithmParams = &best.summary.params;
        let eta = opt(alg.uses_eta(), p.eta);
        let beta = opt(alg.uses_beta(), p.beta);
        for (step, m, s) in mean_curve(best)? {
            writeln!(out, "{},{},{},{eta},{beta},{step},{m},{s}", alg.slug(), p.alpha, p.lambda).unwrap();
        }
    }
    Ok(out)
}

/// Behavior visitation over the whole grid (`subtask` empty) and renormalized within
/// each sub-task region.
pub fn visitation(store: &Store, task: Variant) -> Result<String> {
    let dir = store.oracle_dir(task);
    let mu_text = read_table(&dir.join("mu.csv"), "oracles")?;
    let values_text = read_table(&dir.join("values.csv"), "oracles")?;
    let grid = build_grid(task);
    let mut mu: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    for line in mu_text.lines().skip(1) {
        let [x, y, v] = fields::<3>(line)?;
        mu.insert((parse(x)?, parse(y)?), parse(v)?);
    }
    let mut regions: BTreeMap<usize, Vec<(u8, u8)>> = BTreeMap::new();
    for line in values_text.lines().skip(1) {
        let [j, x, y, _] = fields::<4>(line)?;
        regions.entry(parse(j)?).or_default().push((parse(x)?, parse(y)?));
    }
    let state = |x: u8, y: u8| grid.state_number(Cell::new(x, y));
    let mut out = String::from("subtask,cell_x,cell_y,state,mu,mu_in_region\n");
    for (&(x, y), &m) in &mu {
        writeln!(out, ",{x},{y},{},{m},{m}", state(x, y)).unwrap();
    }
    for (j, cells) in &regions {
        let total: f64 = cells.iter().map(|c| mu.get(c).copied().unwrap_or(0.0)).sum();
        for &(x, y) in cells {
            let m = mu.get(&(x, y)).copied().ok_or_else(|| Error::Format(format!("mu.csv lacks cell ({x}, {y})")))?;
            writeln!(out, "{j},{x},{y},{},{m},{}", state(x, y), m / total).unwrap();
        }
    }
    Ok(out)
}

fn read_table(path: &Path, producer: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::MissingData(format!("{} not found; run `{producer}` first", path.display()))
        }
        _ => Error::Format(format!("{}: {e}", path.display())),
    })
}

fn fields<const N: usize>(line: &str) -> Result<[&str; N]> {
    let v: Vec<&str> = line.split(',').collect();
    v.try_into().map_err(|_| Error::Format(format!("expected {N} fields in `{line}`")))
}

fn parse<T: FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format(format!("bad number `{s}`")))
}

fn opt(used: bool, v: f64) -> String {
    if used {
        v.to_string()
    } else {
        String::new()
    }
}

fn alg_index(a: Algorithm) -> usize {
    Algorithm::ALL.iter().position(|&b| b == a).unwrap()
}
