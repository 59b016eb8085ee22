//! Plan files: TOML with every field optional.
//!
//! ```toml
//! task = "hv-rooms"
//! algorithms = ["td", "gtd"]
//! profile = "desk"
//! runs = 10
//! steps = 50000
//! base_seed = 7
//! curve_every = 100
//! alpha_exponents = "0..18"   # or a list of integers
//! lambda = [0.0, 0.5, 1.0]    # or a single number; also the zeta grid
//! eta_exponents = [-2, 0, 2]
//! beta = 0.4
//! ```

use toml::{Table, Value};

use super::plan::{build_plan, Overrides, Profile, SweepPlan};
use crate::error::{Error, Result};
use crate::grid::Variant;
use crate::learners::Algorithm;

const KNOWN: [&str; 11] = [
    "task",
    "algorithms",
    "profile",
    "runs",
    "steps",
    "base_seed",
    "curve_every",
    "alpha_exponents",
    "lambda",
    "eta_exponents",
    "beta",
];

/// Parses and validates a plan file, filling defaults. All problems are reported
/// together, each prefixed by the offending field.
pub fn validate_config(text: &str) -> Result<SweepPlan> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
    let mut errs = Vec::new();

    for key in table.keys() {
        if !KNOWN.contains(&key.as_str()) {
            errs.push(format!("{key}: unknown field"));
        }
    }

    let task = match table.get("task") {
        None => Variant::Rooms,
        Some(Value::String(s)) => s.parse().unwrap_or_else(|e: Error| {
            errs.push(format!("task: {e}"));
            Variant::Rooms
        }),
        Some(_) => {
            errs.push("task: expected a string".into());
            Variant::Rooms
        }
    };

    let mut algorithms = Vec::new();
    match table.get("algorithms") {
        None => {}
        Some(Value::Array(items)) => {
            if items.is_empty() {
                errs.push("algorithms: must not be empty".into());
            }
            for (i, v) in items.iter().enumerate() {
                match v.as_str().map(str::parse::<Algorithm>) {
                    Some(Ok(a)) if algorithms.contains(&a) => errs.push(format!("algorithms[{i}]: duplicate `{a}`")),
                    Some(Ok(a)) => algorithms.push(a),
                    Some(Err(e)) => errs.push(format!("algorithms[{i}]: {e}")),
                    None => errs.push(format!("algorithms[{i}]: expected a string")),
                }
            }
        }
        Some(_) => errs.push("algorithms: expected a list of names".into()),
    }

    let profile = match table.get("profile") {
        None => Profile::Paper,
        Some(Value::String(s)) => s.parse().unwrap_or_else(|_| {
            errs.push(format!("profile: expected \"desk\" or \"paper\", got {s:?}"));
            Profile::Paper
        }),
        Some(_) => {
            errs.push("profile: expected a string".into());
            Profile::Paper
        }
    };

    let positive = |key: &str, errs: &mut Vec<String>| -> Option<usize> {
        match table.get(key)? {
            Value::Integer(n) if *n >= 1 => Some(*n as usize),
            Value::Integer(_) => {
                errs.push(format!("{key}: must be at least 1"));
                None
            }
            _ => {
                errs.push(format!("{key}: expected an integer"));
                None
            }
        }
    };
    let runs = positive("runs", &mut errs);
    let steps = positive("steps", &mut errs);
    let curve_every = positive("curve_every", &mut errs);
    let base_seed = match table.get("base_seed") {
        None => None,
        Some(Value::Integer(n)) if *n >= 0 => Some(*n as u64),
        Some(_) => {
            errs.push("base_seed: expected a non-negative integer".into());
            None
        }
    };

    let mut grid = match profile {
        Profile::Desk => super::plan::ParamGrid::desk(),
        Profile::Paper => super::plan::ParamGrid::full(),
    };
    let mut touched = false;
    if let Some(v) = table.get("alpha_exponents") {
        touched = true;
        if let Some(x) = integers("alpha_exponents", v, &mut errs) {
            grid.alpha_exponents = x;
        }
    }
    if let Some(v) = table.get("eta_exponents") {
        touched = true;
        if let Some(x) = integers("eta_exponents", v, &mut errs) {
            grid.eta_exponents = x;
        }
    }
    if let Some(v) = table.get("lambda") {
        touched = true;
        if let Some(x) = unit_numbers("lambda", v, &mut errs) {
            grid.lambdas = x;
        }
    }
    if let Some(v) = table.get("beta") {
        touched = true;
        if let Some(x) = unit_numbers("beta", v, &mut errs) {
            grid.betas = x;
        }
    }

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let overrides = Overrides { runs, steps, base_seed, curve_every, grid: touched.then_some(grid) };
    Ok(build_plan(task, &algorithms, profile, overrides))
}

/// A list of integers or an inclusive range written `"a..b"`.
fn integers(key: &str, v: &Value, errs: &mut Vec<String>) -> Option<Vec<i32>> {
    let out = match v {
        Value::String(s) => {
            let parsed = s.split_once("..").and_then(|(a, b)| Some((a.trim().parse::<i32>().ok()?, b.trim().parse::<i32>().ok()?)));
            match parsed {
                Some((a, b)) if a <= b => (a..=b).collect(),
                _ => {
                    errs.push(format!("{key}: expected a range like \"0..18\", got {s:?}"));
                    return None;
                }
            }
        }
        Value::Array(items) => {
            let mut out = Vec::new();
            for (i, item) in items.iter().enumerate() {
                match item {
                    Value::Integer(n) if (-64..=64).contains(n) => out.push(*n as i32),
                    Value::Integer(_) => errs.push(format!("{key}[{i}]: exponent out of [-64,64]")),
                    _ => errs.push(format!("{key}[{i}]: expected an integer")),
                }
            }
            out
        }
        _ => {
            errs.push(format!("{key}: expected a list of integers or a range"));
            return None;
        }
    };
    if out.is_empty() {
        errs.push(format!("{key}: must not be empty"));
    }
    Some(out)
}

/// A number or list of numbers, each in `[0, 1]`.
fn unit_numbers(key: &str, v: &Value, errs: &mut Vec<String>) -> Option<Vec<f64>> {
    let check = |path: String, v: &Value, errs: &mut Vec<String>| -> Option<f64> {
        let x = match v {
            Value::Float(f) => *f,
            Value::Integer(n) => *n as f64,
            _ => {
                errs.push(format!("{path}: expected a number"));
                return None;
            }
        };
        if !(0.0..=1.0).contains(&x) {
            errs.push(format!("{path}: {key} out of [0,1]"));
            return None;
        }
        Some(x)
    };
    match v {
        Value::Array(items) => {
            if items.is_empty() {
                errs.push(format!("{key}: must not be empty"));
            }
            Some(items.iter().enumerate().filter_map(|(i, x)| check(format!("{key}[{i}]"), x, errs)).collect())
        }
        other => check(key.to_string(), other, errs).map(|x| vec![x]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::plan::ParamGrid;

    #[test]
    fn empty_file_is_the_full_default_plan() {
        let plan = validate_config("").unwrap();
        assert_eq!(plan.task, Variant::Rooms);
        assert_eq!(plan.algorithms, Algorithm::ALL.to_vec());
        assert_eq!(plan.grid, ParamGrid::full());
        assert_eq!((plan.runs, plan.steps), (50, 50_000));
        assert_eq!(plan.curve_every, None);
    }

    #[test]
    fn alpha_range_expands() {
        let plan = validate_config("alpha_exponents = \"0..18\"").unwrap();
        assert_eq!(plan.grid.alphas().len(), 19);
        let plan = validate_config("alpha_exponents = [2, 4]\nprofile = \"desk\"").unwrap();
        assert_eq!(plan.grid.alpha_exponents, vec![2, 4]);
        assert_eq!(plan.runs, 10);
    }

    #[test]
    fn beta_out_of_range() {
        let err = validate_config("beta = 1.5").unwrap_err().to_string();
        assert!(err.contains("beta out of [0,1]"), "{err}");
    }

    #[test]
    fn errors_are_exhaustive() {
        let text = r#"
            task = "cliff"
            algorithms = ["td", "sarsa", "td"]
            runs = 0
            beta = [0.2, -1.0]
            lambda = "x"
            colour = 3
        "#;
        let Err(Error::Config(errs)) = validate_config(text) else { panic!("expected errors") };
        for needle in ["task:", "algorithms[1]", "algorithms[2]", "runs:", "beta[1]", "lambda:", "colour: unknown"] {
            assert!(errs.iter().any(|e| e.contains(needle)), "missing {needle} in {errs:?}");
        }
        assert_eq!(errs.len(), 7);
    }

    #[test]
    fn full_configuration() {
        let text = r#"
            task = "hv-rooms"
            algorithms = ["tdrc", "etdb"]
            runs = 3
            steps = 1000
            base_seed = 11
            curve_every = 50
            lambda = 0
            beta = [0.2, 0.4]
            eta_exponents = "-1..1"
        "#;
        let plan = validate_config(text).unwrap();
        assert_eq!(plan.task, Variant::HighVarianceRooms);
        assert_eq!(plan.grid.lambdas, vec![0.0]);
        assert_eq!(plan.grid.eta_exponents, vec![-1, 0, 1]);
        assert_eq!(plan.num_instances(), 19 + 2 * 19);
        assert_eq!((plan.runs, plan.steps, plan.base_seed, plan.curve_every), (3, 1000, 11, Some(50)));
    }
}
