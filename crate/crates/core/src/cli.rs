//! Command-line front end.
//!
//! Exit codes: 0 success, 1 violations found or a verification failed,
//! 2 invalid input (unreadable dataset, bad `--set`, inconsistent system).

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde_json::{json, Value};

use crate::affine::Rational;
use crate::dataset::{bundled_f4a3, load_dataset, validate_dataset, Dataset, Violation};
use crate::packets::{
    basic_arthur_packet, micro_packet, simplified_arthur_parameters, transpose_closed, verify_weak_equals_union,
    weak_arthur_packet,
};
use crate::report;
use crate::solver::{solve_dataset, Localization, SolveReport};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Debug, Parser)]
#[command(name = "microlocal", version, about = "Characteristic cycles and micro-packets from orbit data")]
pub struct Cli {
    /// Dataset JSON file; the bundled F4 dataset when omitted.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Fix a free parameter, e.g. `--set c=2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "NAME=INT", value_parser = parse_assignment)]
    pub set: Vec<(String, i64)>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the dataset for structural violations.
    Validate,
    /// Solve for the coefficient matrix and report free parameters and bounds.
    Solve,
    /// Print the characteristic-cycle table.
    Cc,
    /// Print micro-packets, basic and weak Arthur packets.
    Packets,
    /// Run all identity checks.
    Verify,
    /// Everything above in one document.
    Report,
}

fn parse_assignment(s: &str) -> Result<(String, i64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=INT, got {s:?}"))?;
    let v: i64 = v.trim().parse().map_err(|_| format!("{v:?} is not an integer"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
}

fn failure(msg: impl Into<String>) -> Outcome {
    Outcome {
        code: 2,
        output: msg.into(),
    }
}

struct Context {
    ds: Dataset,
    sr: SolveReport,
    loc: Option<Localization>,
}

fn load(cli: &Cli) -> Result<Dataset, Outcome> {
    match &cli.dataset {
        None => Ok(bundled_f4a3()),
        Some(p) => load_dataset(p).map_err(|e| failure(format!("error: cannot load {}: {e}", p.display()))),
    }
}

fn solve_ctx(cli: &Cli, ds: Dataset, violations: &[Violation]) -> Result<Context, Outcome> {
    let (_, sr, loc) = solve_dataset(&ds).map_err(|e| {
        let mut msg = format!("error: {e}");
        if !violations.is_empty() {
            msg = format!("{msg}\ndataset has {}", report::violations_text(violations));
        }
        failure(msg)
    })?;
    let sr = apply_assignments(&sr, &cli.set)?;
    Ok(Context { ds, sr, loc })
}

fn apply_assignments(sr: &SolveReport, set: &[(String, i64)]) -> Result<SolveReport, Outcome> {
    if set.is_empty() {
        return Ok(sr.clone());
    }
    let mut values = BTreeMap::new();
    for (name, v) in set {
        if !sr.free_parameters.iter().any(|p| &p.name == name) {
            let known = sr.parameter_names().join(", ");
            return Err(failure(format!("error: {name} is not a free parameter (free: {known})")));
        }
        if let Some(b) = sr.parameter_bounds.iter().find(|b| &b.parameter == name) {
            if !b.admits(&BigInt::from(*v)) {
                return Err(failure(format!("error: {name} = {v} violates the derived bound {b}")));
            }
        }
        values.insert(name.clone(), Rational::from_integer(BigInt::from(*v)));
    }
    Ok(substitute_report(sr, &values))
}

/// Substitutes integer parameter values into every determined cell.
fn substitute_report(sr: &SolveReport, values: &BTreeMap<String, Rational>) -> SolveReport {
    let mut out = sr.clone();
    for cc in &mut out.cc_table {
        for cell in &mut cc.mult {
            if let Some(v) = &cell.value {
                cell.value = Some(v.substitute(values));
            }
        }
    }
    for e in &mut out.cmatrix.entries {
        if let Some(v) = &e.value {
            e.value = Some(v.substitute(values));
        }
    }
    out.free_parameters.retain(|p| !values.contains_key(&p.name));
    out.refresh_bounds();
    out
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn envelope(command: &str, ds: &Dataset, set: &[(String, i64)], body: Value) -> Value {
    let assigned: BTreeMap<&str, i64> = set.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    json!({
        "command": command,
        "dataset": ds.name,
        "assignments": assigned,
        "result": body,
    })
}

fn packets_json(ds: &Dataset, sr: &SolveReport) -> Value {
    let micro: Vec<Value> = ds.poset.ids().map(|o| to_json(&micro_packet(ds, sr, o))).collect();
    let params = simplified_arthur_parameters(ds).ok();
    json!({
        "micro": micro,
        "basic": basic_arthur_packet(ds, sr).ok().map(|b| to_json(&b)),
        "weak": weak_arthur_packet(ds).ok().map(|w| to_json(&w)),
        "weak_union": verify_weak_equals_union(ds, sr).ok().map(|r| to_json(&r)),
        "simplified_arthur_parameters": params.as_ref().map(to_json),
        "transpose_closed": params.as_deref().map(transpose_closed),
    })
}

fn solve_json(sr: &SolveReport) -> Value {
    json!({
        "equations": sr.equations,
        "skipped_equations": sr.skipped_equations,
        "free_parameters": to_json(&sr.free_parameters),
        "parameter_bounds": to_json(&sr.parameter_bounds),
        "bound_error": sr.bound_error,
        "residual_unknowns": to_json(&sr.residual_unknowns),
        "cmatrix": to_json(&sr.cmatrix),
    })
}

fn cc_json(ds: &Dataset, sr: &SolveReport, loc: Option<&Localization>) -> Value {
    let rows: Vec<Value> = report::table_rows(ds, sr)
        .into_iter()
        .map(|cc| {
            let mut v = to_json(cc);
            v["formula"] = Value::String(report::cycle_formula(ds, cc));
            v["localized"] = Value::Bool(sr.localized.contains(&cc.source));
            v
        })
        .collect();
    json!({
        "rows": rows,
        "localization": loc.map(|l| {
            let mut v = to_json(l);
            v["constant_arithmetic"] = to_json(&l.pairings.iter().map(|p| p.constant_arithmetic()).collect::<Vec<_>>());
            v
        }),
    })
}

/// Runs one command and renders its output; never prints.
pub fn run(cli: &Cli) -> Outcome {
    match run_inner(cli) {
        Ok(o) | Err(o) => o,
    }
}

fn run_inner(cli: &Cli) -> Result<Outcome, Outcome> {
    let ds = load(cli)?;
    let machine = cli.format == Format::Machine;
    let violations = validate_dataset(&ds);
    let invalid = i32::from(!violations.is_empty());

    if cli.command == Command::Validate {
        let output = if machine {
            pretty(&envelope("validate", &ds, &cli.set, json!({ "violations": to_json(&violations) })))
        } else {
            format!(
                "dataset {}: {} orbits, {} local systems, {} representations\n{}",
                ds.name,
                ds.poset.len(),
                ds.local_systems().len(),
                ds.catalog.len(),
                report::violations_text(&violations)
            )
        };
        return Ok(Outcome { code: invalid, output });
    }

    let ctx = solve_ctx(cli, ds, &violations)?;
    let (ds, sr, loc) = (&ctx.ds, &ctx.sr, ctx.loc.as_ref());
    let warn = if violations.is_empty() {
        String::new()
    } else {
        format!("WARNING: {}\n", report::violations_text(&violations).trim_end())
    };

    let (code, output) = match cli.command {
        Command::Validate => unreachable!(),
        Command::Solve => (
            invalid,
            if machine {
                pretty(&envelope("solve", ds, &cli.set, solve_json(sr)))
            } else {
                warn + &report::solve_text(ds, sr)
            },
        ),
        Command::Cc => (
            invalid,
            if machine {
                pretty(&envelope("cc", ds, &cli.set, cc_json(ds, sr, loc)))
            } else {
                warn + &report::cc_table_text(ds, sr, loc)
            },
        ),
        Command::Packets => (
            invalid,
            if machine {
                pretty(&envelope("packets", ds, &cli.set, packets_json(ds, sr)))
            } else {
                warn + &report::packets_text(ds, sr)
            },
        ),
        Command::Verify => {
            let checks = report::verification_checks(ds, sr, loc);
            let code = i32::from(checks.iter().any(|c| !c.passed));
            let out = if machine {
                pretty(&envelope("verify", ds, &cli.set, json!({ "checks": to_json(&checks) })))
            } else {
                report::checks_text(&checks)
            };
            (code.max(invalid), out)
        }
        Command::Report => {
            let checks = report::verification_checks(ds, sr, loc);
            let code = i32::from(checks.iter().any(|c| !c.passed)).max(invalid);
            let banner = report::assumption_banner(ds);
            let out = if machine {
                pretty(&envelope(
                    "report",
                    ds,
                    &cli.set,
                    json!({
                        "assumption": banner,
                        "violations": to_json(&violations),
                        "solve": solve_json(sr),
                        "cc": cc_json(ds, sr, loc),
                        "packets": packets_json(ds, sr),
                        "checks": to_json(&checks),
                    }),
                ))
            } else {
                let mut s = format!("Dataset: {}\n", ds.name);
                if let Some(b) = banner {
                    s += &format!("{b}\n");
                }
                s += "\n== Validation ==\n";
                s += &report::violations_text(&violations);
                s += "\n== Solve ==\n";
                s += &report::solve_text(ds, sr);
                s += "\n== Characteristic cycles ==\n";
                s += &report::cc_table_text(ds, sr, loc);
                s += "\n== Packets ==\n";
                s += &report::packets_text(ds, sr);
                s += "\n== Verification ==\n";
                s += &report::checks_text(&checks);
                s
            };
            (code, out)
        }
    };
    Ok(Outcome { code, output })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}
