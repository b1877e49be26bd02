//! Command-line front end. Machine output is JSON on stdout; summaries go
//! to stderr. Exit codes: 1 invalid input, 2 solver or transport failure,
//! 3 decode or replay integrity failure.

use crate::encode;
use crate::gens::{alp, two_counter};
use crate::lipschitz::{self, ApproxConfig};
use crate::model::{LocationSelection, Network, Query};
use crate::oracle;
use crate::parser::{self, ModelDocument};
use crate::pwl2lpta;
use crate::rational::{self, Rational};
use crate::semantics::{self, Configuration};
use crate::solve::{self, DecisionVerdict, SolveError, SolverConfig};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Parser)]
#[command(name = "pta", version, about = "Priced timed automata with nonlinear prices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct SolverArgs {
    /// Solver executable (defaults to $PTA_SOLVER, then `z3`).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-query wall-clock limit in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Decimal digits requested for nonlinear model values.
    #[arg(long, default_value_t = 20)]
    precision: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report diagnostics; exit 0 iff the model is clean.
    Validate { model: PathBuf },
    /// Replay a run file and report its cost and final configuration.
    Simulate { model: PathBuf, run: PathBuf },
    /// Rewrite a piecewise-priced automaton into a linearly priced one.
    Transform {
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the location/edge correspondence here.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Write the lower and upper sandwich automata of a Lipschitz-priced model.
    Sandwich {
        model: PathBuf,
        #[arg(long)]
        epsilon: String,
        /// Number of delay steps the error budget is spread over.
        #[arg(long)]
        steps: u32,
        #[arg(short, long, num_args = 2, value_names = ["LOWER", "UPPER"])]
        output: Vec<PathBuf>,
    },
    /// Write the SMT-LIB2 script of a query.
    Encode {
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        query: usize,
        /// Step bound overriding the query's.
        #[arg(short = 'N', long = "steps")]
        steps: Option<u32>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Decide a query with the solver and print a replay-checked witness.
    Check {
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        query: usize,
        #[arg(short = 'N', long = "steps")]
        steps: Option<u32>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Bracket the step-bounded optimal cost by binary search.
    Optimize {
        model: PathBuf,
        /// Source locations: `l`, `A.l` or a comma-separated list of `A.l`.
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(short = 'N', long = "steps")]
        steps: u32,
        #[arg(long, default_value = "0")]
        lo: String,
        #[arg(long)]
        hi: String,
        #[arg(long, default_value = "1/1000")]
        gamma: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Exact optimum over integer-delay runs (closed guards, constant rates).
    Oracle {
        model: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(short = 'N', long = "steps")]
        steps: u32,
        /// Largest guard constant; defaults to the model's.
        #[arg(long)]
        max_const: Option<u64>,
    },
    /// Generate an airport landing model.
    GenAlp {
        /// JSON file `{"planes": [...], "separation": [[...]]}`.
        #[arg(long, conflicts_with = "desk")]
        planes: Option<PathBuf>,
        /// Use the built-in instance with this many planes.
        #[arg(long)]
        desk: Option<usize>,
        #[arg(long, default_value_t = 1)]
        runways: usize,
        #[arg(long, default_value = "800")]
        budget: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compile a two-counter program (`inc c 2`, `dec d 4`, `ifz c 3 5`, `halt`).
    #[command(name = "gen-2cm")]
    Gen2cm {
        program: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Integrity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Integrity(_) => 3,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Decode(_) => CliError::Integrity(e.to_string()),
            SolveError::Encode(_) | SolveError::Interval(_) => CliError::Input(e.to_string()),
            SolveError::Spawn { .. } | SolveError::Transport { .. } => CliError::Solver(e.to_string()),
        }
    }
}

fn input(msg: impl ToString) -> CliError {
    CliError::Input(msg.to_string())
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Input {
    text: String,
    hash: String,
}

fn read(path: &Path) -> Result<Input, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let hash = sha256(text.as_bytes());
    Ok(Input { text, hash })
}

fn write(path: &Path, text: &str) -> Result<String, CliError> {
    std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(sha256(text.as_bytes()))
}

fn load_model(path: &Path) -> Result<(ModelDocument, String), CliError> {
    let inp = read(path)?;
    let doc = parser::parse_model(&inp.text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok((doc, inp.hash))
}

fn number(text: &str, what: &str) -> Result<Rational, CliError> {
    rational::parse(text).map_err(|e| input(format!("--{what}: {e}")))
}

/// Splits on commas outside brackets, since sub-location names contain `(a,b)`.
fn split_top_level(text: &str) -> Vec<&str> {
    let (mut parts, mut depth, mut start) = (Vec::new(), 0i32, 0);
    for (i, ch) in text.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

/// `l` (single automaton), `A.l`, or `A.l,B.m`.
pub fn parse_selection(net: &Network, text: &str) -> Result<LocationSelection, CliError> {
    let mut sel = LocationSelection::new();
    for part in split_top_level(text)
        .into_iter()
        .map(str::trim)
        .filter(|p| !p.is_empty())
    {
        let (aut, loc) = match part.split_once('.') {
            Some((a, l)) if net.automaton(a).is_some() => (a.to_string(), l.to_string()),
            _ if net.automata.len() == 1 => (net.automata[0].name.clone(), part.to_string()),
            _ => return Err(input(format!("location `{part}` must be written `Automaton.location`"))),
        };
        let a = net
            .automaton(&aut)
            .ok_or_else(|| input(format!("unknown automaton `{aut}`")))?;
        if a.location(&loc).is_none() {
            return Err(input(format!("unknown location `{aut}.{loc}`")));
        }
        sel.insert(aut, loc);
    }
    if sel.is_empty() {
        return Err(input("empty location selection"));
    }
    Ok(sel)
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig, CliError> {
    if args.timeout == 0 {
        return Err(input("--timeout must be positive"));
    }
    let mut cfg = SolverConfig::default().with_timeout(Duration::from_secs(args.timeout));
    if let Some(p) = &args.solver {
        cfg.executable = p.clone();
    }
    cfg.model_precision = args.precision;
    Ok(cfg)
}

fn pick_query(doc: &ModelDocument, index: usize, steps: Option<u32>) -> Result<Query, CliError> {
    let mut q = doc
        .queries
        .get(index)
        .cloned()
        .ok_or_else(|| input(format!("model has {} queries, no query {index}", doc.queries.len())))?;
    if let Some(n) = steps {
        q.steps = n;
    }
    Ok(q)
}

fn verdict_name(v: DecisionVerdict) -> &'static str {
    match v {
        DecisionVerdict::Yes => "yes",
        DecisionVerdict::No => "no",
        DecisionVerdict::Unknown => "unknown",
        DecisionVerdict::Timeout => "timeout",
    }
}

fn witness_json(net: &Network, w: &encode::Witness) -> Value {
    json!({
        "cost": rational::to_json(&w.cost),
        "model_cost": rational::to_json(&w.model_cost),
        "run": semantics::run_to_json(net, &w.run),
    })
}

fn opt(q: &Option<Rational>) -> Value {
    q.as_ref().map_or(Value::Null, rational::to_json)
}

/// Runs one command and returns its JSON output.
pub fn execute(cmd: &Command) -> Result<Value, CliError> {
    match cmd {
        Command::Validate { model } => {
            let inp = read(model)?;
            let diagnostics: Vec<Value> = match parser::parse_model_unchecked(&inp.text) {
                Ok(doc) => doc
                    .diagnostics()
                    .iter()
                    .map(|d| json!({"path": d.path, "message": d.message}))
                    .collect(),
                Err(e) => vec![json!({"path": "$", "message": e.to_string()})],
            };
            let out = json!({"input_sha256": inp.hash, "ok": diagnostics.is_empty(), "diagnostics": diagnostics});
            if diagnostics.is_empty() {
                Ok(out)
            } else {
                emit(&out);
                Err(input(format!("{} diagnostic(s)", diagnostics.len())))
            }
        }
        Command::Simulate { model, run } => {
            let (doc, hash) = load_model(model)?;
            let net = &doc.network;
            let run_in = read(run)?;
            let v: Value = serde_json::from_str(&run_in.text).map_err(|e| input(format!("{}: {e}", run.display())))?;
            let r = semantics::run_from_json(net, &v, || {
                let locs = net
                    .automata
                    .iter()
                    .map(|a| a.initial.clone())
                    .collect::<Option<Vec<_>>>()?;
                Configuration::initial(net, locs).ok()
            })
            .map_err(|e| input(format!("{}: {e}", run.display())))?;
            let (end, cost) = semantics::replay(net, &r).map_err(input)?;
            Ok(json!({
                "input_sha256": hash,
                "run_sha256": run_in.hash,
                "steps": r.steps.len(),
                "cost": rational::to_json(&cost),
                "final": semantics::configuration_to_json(net, &end),
            }))
        }
        Command::Transform { model, output, map } => {
            let (doc, hash) = load_model(model)?;
            let (image, tmap) = pwl2lpta::transform(&doc.network).map_err(input)?;
            let mut out = ModelDocument::new(image);
            out.metadata = doc.metadata.clone();
            out.metadata.insert("transformed_from".into(), hash.clone());
            let aut = &doc.network.automata[0].name;
            for q in &doc.queries {
                let (Some(from), Some(to)) = (q.source_locations(&doc.network), q.target.get(aut)) else {
                    continue;
                };
                for (f, t) in tmap.query_map(&from[0], to).map_err(input)? {
                    out.queries.push(Query {
                        source: [(aut.clone(), f)].into(),
                        target: [(aut.clone(), t)].into(),
                        ..q.clone()
                    });
                }
            }
            let out_hash = write(output, &parser::serialize_model(&out))?;
            let map_json = tmap.to_json();
            if let Some(p) = map {
                write(p, &(serde_json::to_string_pretty(&map_json).expect("json") + "\n"))?;
            }
            eprintln!(
                "wrote {} ({} locations)",
                output.display(),
                out.network.automata[0].locations.len()
            );
            Ok(json!({
                "input_sha256": hash,
                "output": output.display().to_string(),
                "output_sha256": out_hash,
                "queries": out.queries.len(),
                "map": map_json,
            }))
        }
        Command::Sandwich {
            model,
            epsilon,
            steps,
            output,
        } => {
            let (doc, hash) = load_model(model)?;
            let cfg = ApproxConfig::for_network(&doc.network, number(epsilon, "epsilon")?, *steps).map_err(input)?;
            let (lower, upper) = lipschitz::build_bounding_automata(&doc.network, &cfg).map_err(input)?;
            let mut hashes = Vec::new();
            for (net, path, side) in [(lower, &output[0], "lower"), (upper, &output[1], "upper")] {
                let mut d = ModelDocument::new(net);
                d.queries = doc.queries.clone();
                d.metadata = doc.metadata.clone();
                d.metadata.insert("sandwich".into(), side.into());
                hashes.push(write(path, &parser::serialize_model(&d))?);
            }
            Ok(json!({
                "input_sha256": hash,
                "epsilon": rational::to_json(&cfg.epsilon),
                "lipschitz": rational::to_json(&cfg.lipschitz),
                "clock_bound": rational::to_json(&cfg.clock_bound),
                "delay_steps": cfg.delay_steps,
                "delta": rational::to_json(&cfg.delta),
                "lower": {"path": output[0].display().to_string(), "sha256": hashes[0]},
                "upper": {"path": output[1].display().to_string(), "sha256": hashes[1]},
            }))
        }
        Command::Encode {
            model,
            query,
            steps,
            output,
        } => {
            let (doc, hash) = load_model(model)?;
            let q = pick_query(&doc, *query, *steps)?;
            let script = encode::encode(&doc.network, &q).map_err(input)?;
            let script_hash = write(output, &script.text)?;
            Ok(json!({
                "input_sha256": hash,
                "query": query,
                "steps": q.steps,
                "logic": script.instance.logic.name(),
                "script": output.display().to_string(),
                "script_sha256": script_hash,
            }))
        }
        Command::Check {
            model,
            query,
            steps,
            solver,
        } => {
            let (doc, hash) = load_model(model)?;
            let q = pick_query(&doc, *query, *steps)?;
            let cfg = solver_config(solver)?;
            let d = solve::decide(&doc.network, &q, &cfg)?;
            eprintln!("{} in {:.3}s", verdict_name(d.verdict), d.seconds);
            let out = json!({
                "input_sha256": hash,
                "query": query,
                "steps": q.steps,
                "logic": d.logic.name(),
                "verdict": verdict_name(d.verdict),
                "solver_seconds": d.seconds,
                "witness": d.witness.as_ref().map_or(Value::Null, |w| witness_json(&doc.network, w)),
            });
            match d.verdict {
                DecisionVerdict::Yes | DecisionVerdict::No => Ok(out),
                DecisionVerdict::Unknown | DecisionVerdict::Timeout => {
                    emit(&out);
                    Err(CliError::Solver(format!("solver answered {}", verdict_name(d.verdict))))
                }
            }
        }
        Command::Optimize {
            model,
            from,
            to,
            steps,
            lo,
            hi,
            gamma,
            solver,
        } => {
            let (doc, hash) = load_model(model)?;
            let net = &doc.network;
            let (from, to) = (parse_selection(net, from)?, parse_selection(net, to)?);
            let cfg = solver_config(solver)?;
            let (lo, hi, gamma) = (number(lo, "lo")?, number(hi, "hi")?, number(gamma, "gamma")?);
            let r = solve::minimize(net, &from, &to, *steps, &cfg, &lo, &hi, &gamma)?;
            eprintln!("{} after {} probes", r.status.name(), r.probes.len());
            Ok(json!({
                "input_sha256": hash,
                "status": r.status.name(),
                "lower": opt(&r.lower),
                "upper": opt(&r.upper),
                "witness": r.witness.as_ref().map_or(Value::Null, |w| witness_json(net, w)),
                "solver_seconds": r.solver_seconds,
                "probes": r.probes.iter().map(|p| json!({
                    "cmp": p.cmp.symbol(),
                    "budget": rational::to_json(&p.budget),
                    "verdict": verdict_name(p.verdict),
                })).collect::<Vec<_>>(),
            }))
        }
        Command::Oracle {
            model,
            from,
            to,
            steps,
            max_const,
        } => {
            let (doc, hash) = load_model(model)?;
            let net = &doc.network;
            let (from, to) = (parse_selection(net, from)?, parse_selection(net, to)?);
            let max_const = max_const.unwrap_or_else(|| net.max_constant());
            let best = oracle::opt_cost_exhaustive(net, &from, &to, *steps, max_const).map_err(input)?;
            Ok(json!({
                "input_sha256": hash,
                "max_const": max_const,
                "optimum": best.as_ref().map_or(Value::Null, |b| rational::to_json(&b.cost)),
                "run": best.as_ref().map_or(Value::Null, |b| semantics::run_to_json(net, &b.run)),
            }))
        }
        Command::GenAlp {
            planes,
            desk,
            runways,
            budget,
            output,
        } => {
            let budget = number(budget, "budget")?;
            let (inst, hash) = match (planes, desk) {
                (Some(path), _) => {
                    let inp = read(path)?;
                    (alp_from_json(&inp.text, *runways)?, Value::from(inp.hash))
                }
                (None, Some(n)) => (alp::desk_instance(*n, *runways), Value::Null),
                (None, None) => return Err(input("one of --planes or --desk is required")),
            };
            let doc = alp::gen_alp(&inst, budget).map_err(input)?;
            let out_hash = write(output, &parser::serialize_model(&doc))?;
            Ok(json!({
                "input_sha256": hash,
                "output": output.display().to_string(),
                "output_sha256": out_hash,
                "planes": inst.planes.len(),
                "runways": inst.runways,
                "steps": inst.steps(),
            }))
        }
        Command::Gen2cm { program, output } => {
            let inp = read(program)?;
            let p = two_counter::parse_program(&inp.text).map_err(input)?;
            let doc = two_counter::gen_two_counter(&p).map_err(input)?;
            let out_hash = write(output, &parser::serialize_model(&doc))?;
            Ok(json!({
                "input_sha256": inp.hash,
                "output": output.display().to_string(),
                "output_sha256": out_hash,
                "locations": doc.network.automata[0].locations.len(),
                "steps": doc.queries[0].steps,
            }))
        }
    }
}

fn alp_from_json(text: &str, runways: usize) -> Result<alp::AlpInstance, CliError> {
    let v: Value = serde_json::from_str(text).map_err(input)?;
    let num = |p: &Value, k: &str| {
        p.get(k)
            .and_then(Value::as_u64)
            .ok_or_else(|| input(format!("plane field `{k}` must be a non-negative integer")))
    };
    let planes = v
        .get("planes")
        .and_then(Value::as_array)
        .ok_or_else(|| input("expected a `planes` array"))?
        .iter()
        .map(|p| {
            Ok(alp::PlaneSpec {
                earliest: num(p, "earliest")?,
                target: num(p, "target")?,
                latest: num(p, "latest")?,
                early_rate: num(p, "early_rate")?,
                late_rate: num(p, "late_rate")?,
                class: num(p, "class")? as usize,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let separation = v
        .get("separation")
        .and_then(Value::as_array)
        .ok_or_else(|| input("expected a `separation` matrix"))?
        .iter()
        .map(|row| {
            row.as_array()
                .and_then(|r| r.iter().map(Value::as_u64).collect::<Option<Vec<_>>>())
                .ok_or_else(|| input("separation rows must hold non-negative integers"))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(alp::AlpInstance {
        planes,
        runways,
        separation,
    })
}

/// Prints `out` to stdout; a closed pipe is not an error.
fn emit(out: &Value) {
    let text = serde_json::to_string_pretty(out).expect("json");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            emit(&out);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
