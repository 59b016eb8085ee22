//! Browser front end: every export takes plain arguments and returns a JSON string.

use std::sync::OnceLock;

use ope_bench::learners::AlgorithmParams;
use ope_bench::sweep::{run_instance, Context};
use ope_bench::trajectory::{generate_indices, run_seed, DEFAULT_START};
use ope_bench::{Algorithm, Cell, Variant};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Runs in a sweep are capped so the page stays responsive.
pub const MAX_STEPS: usize = 200_000;

fn context(task: Variant) -> Result<&'static Context, String> {
    static CELLS: [OnceLock<Context>; 2] = [OnceLock::new(), OnceLock::new()];
    let slot = &CELLS[task as usize];
    if let Some(ctx) = slot.get() {
        return Ok(ctx);
    }
    let ctx = Context::new(task).map_err(|e| e.to_string())?;
    Ok(slot.get_or_init(|| ctx))
}

fn parse_task(task: &str) -> Result<Variant, String> {
    task.parse().map_err(|e: ope_bench::Error| e.to_string())
}

fn params(alg: &str, alpha_exponent: i32, lambda: f64, eta: f64, beta: f64) -> Result<AlgorithmParams, String> {
    let alg: Algorithm = alg.parse().map_err(|e: ope_bench::Error| e.to_string())?;
    if !(0.0..=1.0).contains(&lambda) || !(0.0..=1.0).contains(&beta) || eta <= 0.0 {
        return Err("lambda and beta must lie in [0,1] and eta must be positive".into());
    }
    Ok(AlgorithmParams::new(alg, 2f64.powi(-alpha_exponent), lambda).with_eta(eta).with_beta(beta))
}

fn stream(ctx: &Context, steps: usize, seed: u64) -> Result<Vec<[u8; 3]>, String> {
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must be in 1..={MAX_STEPS}"));
    }
    generate_indices(&ctx.task.grid, run_seed(seed, 0), steps, DEFAULT_START).map_err(|e| e.to_string())
}

/// Layout, behavior visitation, and one sub-task's true values and target policy.
pub fn grid_view(task: &str, subtask: usize) -> Result<Value, String> {
    let ctx = context(parse_task(task)?)?;
    let grid = &ctx.task.grid;
    let sub = ctx.task.subtasks.get(subtask).ok_or_else(|| format!("sub-task must be below {}", ctx.task.subtasks.len()))?;
    let blue: Vec<Value> = grid.blue_states().iter().map(|(c, a)| json!({"x": c.x, "y": c.y, "action": format!("{a:?}")})).collect();
    let mut cells = Vec::new();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let c = Cell::new(x, y);
            let Some(i) = grid.state_index(c) else {
                cells.push(json!({"x": x, "y": y, "open": false}));
                continue;
            };
            cells.push(json!({
                "x": x,
                "y": y,
                "open": true,
                "hallway": grid.is_hallway(c),
                "mu": ctx.oracles.mu.mu[i],
                "value": ctx.oracles.values.get(subtask, i),
                "policy": sub.contains_index(i).then(|| sub.policy_index(i).to_vec()),
            }));
        }
    }
    Ok(json!({
        "width": grid.width(),
        "height": grid.height(),
        "subtasks": ctx.task.subtasks.len(),
        "target": {"x": sub.target_hallway.x, "y": sub.target_hallway.y},
        "blue": blue,
        "cells": cells,
    }))
}

/// One learning run's error curve, sampled every `every` steps.
#[allow(clippy::too_many_arguments)]
pub fn learning_curve(
    task: &str,
    alg: &str,
    alpha_exponent: i32,
    lambda: f64,
    eta: f64,
    beta: f64,
    steps: usize,
    seed: u64,
    every: usize,
) -> Result<Value, String> {
    let ctx = context(parse_task(task)?)?;
    let p = params(alg, alpha_exponent, lambda, eta, beta)?;
    let s = stream(ctx, steps, seed)?;
    let out = run_instance(ctx, p, &s, Some(every.max(1)));
    let points: Vec<Value> = out
        .curve
        .iter()
        .enumerate()
        .map(|(k, &e)| json!({"step": k * every.max(1), "ave": e.is_finite().then_some(e)}))
        .collect();
    Ok(json!({"mean_ave": finite(out.mean_ave), "final_ave": finite(out.final_ave), "diverged": out.diverged, "curve": points}))
}

/// Mean error over one run for each step size `2^-x`, `x` in `lo..=hi`.
#[allow(clippy::too_many_arguments)]
pub fn alpha_sweep(task: &str, alg: &str, lambda: f64, eta: f64, beta: f64, lo: i32, hi: i32, steps: usize, seed: u64) -> Result<Value, String> {
    if lo > hi || hi - lo > 24 {
        return Err("expected lo <= hi with at most 25 step sizes".into());
    }
    let ctx = context(parse_task(task)?)?;
    let s = stream(ctx, steps, seed)?;
    let mut rows = Vec::new();
    for x in lo..=hi {
        let p = params(alg, x, lambda, eta, beta)?;
        let out = run_instance(ctx, p, &s, None);
        rows.push(json!({"alpha_exponent": x, "alpha": p.alpha, "mean_ave": finite(out.mean_ave), "diverged": out.diverged}));
    }
    Ok(json!({"alg": alg, "lambda": lambda, "points": rows}))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = gridView)]
pub fn grid_view_js(task: &str, subtask: usize) -> Result<String, JsError> {
    to_js(grid_view(task, subtask))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = learningCurve)]
pub fn learning_curve_js(
    task: &str,
    alg: &str,
    alpha_exponent: i32,
    lambda: f64,
    eta: f64,
    beta: f64,
    steps: usize,
    seed: u64,
    every: usize,
) -> Result<String, JsError> {
    to_js(learning_curve(task, alg, alpha_exponent, lambda, eta, beta, steps, seed, every))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = alphaSweep)]
pub fn alpha_sweep_js(
    task: &str,
    alg: &str,
    lambda: f64,
    eta: f64,
    beta: f64,
    lo: i32,
    hi: i32,
    steps: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_js(alpha_sweep(task, alg, lambda, eta, beta, lo, hi, steps, seed))
}
