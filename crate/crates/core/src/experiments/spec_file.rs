//! Plain-text experiment specs: flat `key = value` lines, `#` comments, one
//! key per line. List values are comma- or whitespace-separated. Exactly one
//! of `t_final` and `n_steps` must be present.
//!
//! ```text
//! kind = eps_scaling
//! a = 0.1
//! b = 1.0
//! dt_micro = 1e-6
//! dt_macro = 1e-4
//! num_micro = 100
//! sweep = 1.25e-4, 2.5e-4, 5e-4, 1e-3
//! y0 = 5.0
//! n_steps = 50
//! ledger_preset = fig3
//! ```

use std::collections::BTreeMap;

use super::{ExperimentKind, ExperimentSpec, Horizon};
use crate::error::{Error, Result};
use crate::system::ToySystemParams;

const KNOWN_KEYS: [&str; 13] = [
    "kind",
    "a",
    "b",
    "eps",
    "dt_micro",
    "dt_macro",
    "num_micro",
    "sweep",
    "y0",
    "x0_offsets",
    "t_final",
    "n_steps",
    "ledger_preset",
];

fn parse_float(key: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::Spec(format!("`{key}` is not a number: `{raw}`")))
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|tok| !tok.is_empty())
        .map(|tok| parse_float(key, tok))
        .collect()
}

/// Parse a spec from the plain-text format.
pub fn parse(text: &str) -> Result<ExperimentSpec> {
    let mut map: BTreeMap<&str, String> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Spec(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let canonical = KNOWN_KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| Error::Spec(format!("line {}: unknown key `{key}`", lineno + 1)))?;
        if map.insert(canonical, value.to_string()).is_some() {
            return Err(Error::Spec(format!("duplicate key `{key}`")));
        }
    }

    let required = |key: &str| -> Result<String> {
        map.get(key)
            .cloned()
            .ok_or_else(|| Error::Spec(format!("missing required key `{key}`")))
    };

    let kind: ExperimentKind = required("kind")?.parse()?;
    let a = parse_float("a", &required("a")?)?;
    let b = parse_float("b", &required("b")?)?;
    let dt_micro = parse_float("dt_micro", &required("dt_micro")?)?;
    let num_micro = {
        let raw = required("num_micro")?;
        raw.parse::<usize>()
            .map_err(|_| Error::Spec(format!("`num_micro` is not a nonnegative integer: `{raw}`")))?
    };
    let y0 = parse_float("y0", &required("y0")?)?;
    let ledger_preset = required("ledger_preset")?;

    let sweep = match map.get("sweep") {
        Some(raw) => parse_list("sweep", raw)?,
        None => Vec::new(),
    };
    let x0_offsets = match map.get("x0_offsets") {
        Some(raw) => parse_list("x0_offsets", raw)?,
        None => Vec::new(),
    };

    let horizon = match (map.get("t_final"), map.get("n_steps")) {
        (Some(t), None) => Horizon::FinalTime(parse_float("t_final", t)?),
        (None, Some(n)) => Horizon::Steps(n.parse::<usize>().map_err(|_| {
            Error::Spec(format!("`n_steps` is not a nonnegative integer: `{n}`"))
        })?),
        (Some(_), Some(_)) => {
            return Err(Error::Spec("specify exactly one of `t_final` and `n_steps`".into()))
        }
        (None, None) => {
            return Err(Error::Spec("missing horizon: specify `t_final` or `n_steps`".into()))
        }
    };

    let eps = match map.get("eps") {
        Some(raw) => parse_float("eps", raw)?,
        None if kind == ExperimentKind::EpsScaling && !sweep.is_empty() => sweep[0],
        None => return Err(Error::Spec("missing required key `eps`".into())),
    };
    let dt_macro = match map.get("dt_macro") {
        Some(raw) => parse_float("dt_macro", raw)?,
        None if kind == ExperimentKind::DtMacroScaling && !sweep.is_empty() => sweep[0],
        None => return Err(Error::Spec("missing required key `dt_macro`".into())),
    };

    let spec = ExperimentSpec {
        kind,
        toy: ToySystemParams { a, b },
        eps,
        dt_micro,
        dt_macro,
        num_micro,
        sweep,
        y0,
        x0_offsets,
        horizon,
        ledger_preset,
    };
    spec.validate()?;
    Ok(spec)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render a spec as the lines of the plain-text format (without trailing
/// newline), suitable both for files and for CSV header echoes.
pub fn to_lines(spec: &ExperimentSpec) -> Vec<String> {
    let mut lines = vec![
        format!("kind = {}", spec.kind),
        format!("a = {}", fmt17(spec.toy.a)),
        format!("b = {}", fmt17(spec.toy.b)),
        format!("eps = {}", fmt17(spec.eps)),
        format!("dt_micro = {}", fmt17(spec.dt_micro)),
        format!("dt_macro = {}", fmt17(spec.dt_macro)),
        format!("num_micro = {}", spec.num_micro),
    ];
    if !spec.sweep.is_empty() {
        let vals: Vec<String> = spec.sweep.iter().map(|v| fmt17(*v)).collect();
        lines.push(format!("sweep = {}", vals.join(", ")));
    }
    lines.push(format!("y0 = {}", fmt17(spec.y0)));
    if !spec.x0_offsets.is_empty() {
        let vals: Vec<String> = spec.x0_offsets.iter().map(|v| fmt17(*v)).collect();
        lines.push(format!("x0_offsets = {}", vals.join(", ")));
    }
    match spec.horizon {
        Horizon::FinalTime(t) => lines.push(format!("t_final = {}", fmt17(t))),
        Horizon::Steps(n) => lines.push(format!("n_steps = {n}")),
    }
    lines.push(format!("ledger_preset = {}", spec.ledger_preset));
    lines
}

/// Render a spec as a complete file body.
pub fn to_string(spec: &ExperimentSpec) -> String {
    let mut s = to_lines(spec).join("\n");
    s.push('\n');
    s
}
