use std::fmt::Display;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use stratos::douts::{format_rational, score, DoutsInput};
use stratos::dsl::{self, ParseDiagnostic, Scenario, ScriptAction};
use stratos::model::{UnitId, WorldState};
use stratos::patterns::select_fit;
use stratos::runner::{self, History, RunOptions};
use stratos::transformations::{apply, classify, labels, TransformationSpec};
use stratos::transitions::{execute_step, plan_with_log, verify_plan_with_log, TransitionPlan};

#[derive(Parser)]
#[command(name = "stratos", version, about = "Check, run and query sourcing scenario files")]
struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Suppress non-essential output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate scenario files without running their scripts.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Execute a scenario script and evaluate its assertions.
    Run {
        path: PathBuf,
        /// Print the digest of every intermediate state.
        #[arg(long)]
        trace: bool,
        /// Continue past rejected transformations and steps.
        #[arg(long)]
        keep_going: bool,
    },
    /// Evaluate a query, e.g. `selfsourcing U S`, against a scenario.
    Query {
        path: PathBuf,
        #[arg(required = true, num_args = 1.., trailing_var_arg = true, allow_hyphen_values = true)]
        query: Vec<String>,
        /// Replay the script before evaluating.
        #[arg(long)]
        after: bool,
    },
    /// Classify the delta between the worlds of two scenarios.
    Classify {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long)]
        unit: String,
    },
    /// Score a degree-of-outsourcingness input (JSON or a scenario with a douts block).
    Score {
        #[arg(long)]
        input: PathBuf,
        /// Which douts block to score when the scenario declares several.
        #[arg(long)]
        id: Option<String>,
    },
    /// Plan the transition for an `apply` item of a scenario.
    Plan {
        path: PathBuf,
        /// 1-based index among the scenario's `apply` items.
        #[arg(long, default_value_t = 1)]
        item: usize,
    },
    /// Verify a JSON plan against an `apply` item of a scenario.
    Verify {
        path: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 1)]
        item: usize,
    },
    /// Validate and rank the bids on a lot.
    Match {
        path: PathBuf,
        #[arg(long)]
        lot: String,
    },
}

/// Outcome of a command that did not succeed.
enum Failure {
    /// Diagnostics, failed assertions, rejected operations.
    Domain,
    /// I/O and other problems outside the scenario.
    Environment(String),
}

type Outcome = Result<(), Failure>;

struct Out {
    json: bool,
    quiet: bool,
    color: bool,
}

impl Out {
    fn emit_json<T: Serialize>(&self, value: &T) {
        println!("{}", serde_json::to_string(value).expect("report types serialize"));
    }

    fn note(&self, text: impl Display) {
        if !self.quiet && !self.json {
            println!("{text}");
        }
    }

    fn error(&self, text: impl Display) {
        let text = text.to_string();
        if self.color {
            eprintln!("{}", text.replacen("error[", "\x1b[31merror\x1b[0m[", 1));
        } else {
            eprintln!("{text}");
        }
    }

    fn diagnostics(&self, path: &Path, diagnostics: &[ParseDiagnostic]) {
        for d in diagnostics {
            self.error(format_args!("{}:{d}", path.display()));
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let color = std::env::var("STRATOS_COLOR").map_or(true, |v| v != "0") && std::io::stderr().is_terminal();
    let out = Out { json: cli.json, quiet: cli.quiet, color };
    let outcome = match cli.command {
        Command::Check { paths } => check(&out, &paths),
        Command::Run { path, trace, keep_going } => run(&out, &path, trace, keep_going),
        Command::Query { path, query, after } => query_cmd(&out, &path, &query.join(" "), after),
        Command::Classify { pre, post, unit } => classify_cmd(&out, &pre, &post, &unit),
        Command::Score { input, id } => score_cmd(&out, &input, id.as_deref()),
        Command::Plan { path, item } => plan_cmd(&out, &path, item),
        Command::Verify { path, plan, item } => verify_cmd(&out, &path, &plan, item),
        Command::Match { path, lot } => match_cmd(&out, &path, &lot),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain) => ExitCode::from(1),
        Err(Failure::Environment(message)) => {
            eprintln!("stratos: {message}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Environment(format!("cannot read {}: {e}", path.display())))
}

fn load(out: &Out, path: &Path) -> Result<Scenario, Failure> {
    dsl::parse_bytes(&read(path)?).map_err(|diagnostics| {
        out.diagnostics(path, &diagnostics);
        Failure::Domain
    })
}

#[derive(Serialize)]
struct CheckResult<'a> {
    path: String,
    ok: bool,
    diagnostics: &'a [ParseDiagnostic],
}

fn check(out: &Out, paths: &[PathBuf]) -> Outcome {
    let mut results = Vec::new();
    let mut failed = false;
    for path in paths {
        let diagnostics = match dsl::parse_bytes(&read(path)?) {
            Ok(_) => Vec::new(),
            Err(d) => d,
        };
        if diagnostics.is_empty() {
            out.note(format_args!("{}: ok", path.display()));
        } else {
            failed = true;
            out.diagnostics(path, &diagnostics);
        }
        results.push((path.display().to_string(), diagnostics));
    }
    if out.json {
        let view: Vec<_> = results
            .iter()
            .map(|(path, d)| CheckResult { path: path.clone(), ok: d.is_empty(), diagnostics: d })
            .collect();
        out.emit_json(&view);
    }
    if failed {
        Err(Failure::Domain)
    } else {
        Ok(())
    }
}

fn run(out: &Out, path: &Path, trace: bool, keep_going: bool) -> Outcome {
    let scenario = load(out, path)?;
    let mut report = runner::run(&scenario, RunOptions { keep_going });
    report.scenario = path.display().to_string();
    if out.json {
        out.emit_json(&report);
    } else {
        for d in &report.diagnostics {
            if !out.quiet {
                eprintln!("{}: {d}", path.display());
            }
        }
        if trace {
            println!("{:>5}  {:<28} {}", 0, "initial", report.initial_digest);
            for t in &report.trace {
                println!("{:>5}  {:<28} {}", t.line, t.op, t.digest);
            }
        }
        for f in &report.assertions_failed {
            out.error(format_args!(
                "{}:{}: error[ASSERTION_FAILED]: {}\n    expected {}, got {}",
                path.display(),
                f.line,
                f.item,
                f.expected,
                f.actual
            ));
        }
        if report.items_skipped > 0 {
            out.error(format_args!("{}: stopped, {} item(s) skipped", path.display(), report.items_skipped));
        }
        let status = if report.success { "ok" } else { "FAILED" };
        out.note(format_args!(
            "{}: {status}, {} step(s), {} passed, {} failed, final {}",
            path.display(),
            report.steps_executed,
            report.assertions_passed,
            report.assertions_failed.len(),
            report.final_digest
        ));
    }
    if report.success {
        Ok(())
    } else {
        Err(Failure::Domain)
    }
}

/// Replay script items that change the world, stopping before the
/// `stop`-th (1-based) `apply` item if given.
fn replay(scenario: &Scenario, stop: Option<usize>) -> Result<(History, Option<TransformationSpec>), String> {
    let mut history = History::new(scenario.world.clone());
    let mut applies = 0;
    for item in &scenario.script {
        let result = match &item.action {
            ScriptAction::Assert(_) => continue,
            ScriptAction::Apply { spec, expect } => {
                applies += 1;
                if Some(applies) == stop {
                    return Ok((history, Some(spec.clone())));
                }
                if expect.is_some() {
                    continue;
                }
                apply(history.current(), spec, &history.log)
            }
            ScriptAction::Step { step, expect } => {
                if expect.is_some() {
                    continue;
                }
                execute_step(history.current(), step, &history.log)
            }
        };
        let (next, log) = result.map_err(|e| format!("line {}: {e}", item.span.line))?;
        history.states.push(next);
        history.log = log;
    }
    match stop {
        Some(n) => Err(format!("scenario has {applies} apply item(s), not {n}")),
        None => Ok((history, None)),
    }
}

fn replay_or_fail(
    out: &Out,
    path: &Path,
    scenario: &Scenario,
    stop: Option<usize>,
) -> Result<(History, Option<TransformationSpec>), Failure> {
    replay(scenario, stop).map_err(|message| {
        out.error(format_args!("{}: error[REPLAY_FAILED]: {message}", path.display()));
        Failure::Domain
    })
}

#[derive(Serialize)]
struct QueryResult<'a> {
    query: &'a dsl::Query,
    value: &'a dsl::Value,
}

fn query_cmd(out: &Out, path: &Path, text: &str, after: bool) -> Outcome {
    let bytes = read(path)?;
    let source = String::from_utf8_lossy(&bytes);
    let (scenario, query) = dsl::parse_with_query(&source, text).map_err(|diagnostics| {
        out.diagnostics(path, &diagnostics);
        Failure::Domain
    })?;
    let history =
        if after { replay_or_fail(out, path, &scenario, None)?.0 } else { History::new(scenario.world.clone()) };
    let value = runner::evaluate(&scenario, &history, &query);
    if out.json {
        out.emit_json(&QueryResult { query: &query, value: &value });
    } else {
        println!("{value}");
    }
    Ok(())
}

fn classify_cmd(out: &Out, pre: &Path, post: &Path, unit: &str) -> Outcome {
    let before = load(out, pre)?;
    let after = load(out, post)?;
    match classify(&before.world, &after.world, &UnitId::from(unit)) {
        Ok(result) => {
            if out.json {
                out.emit_json(&result);
            } else {
                for tag in result.tags() {
                    println!("{tag}");
                }
                for label in labels(&before.world, &after.world, &UnitId::from(unit)).unwrap_or_default() {
                    println!("label {label}");
                }
            }
            Ok(())
        }
        Err(e) => {
            out.error(format_args!("error[{}]: {e}", e.code()));
            Err(Failure::Domain)
        }
    }
}

fn douts_input(out: &Out, path: &Path, id: Option<&str>) -> Result<DoutsInput, Failure> {
    let bytes = read(path)?;
    if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        return serde_json::from_slice(&bytes).map_err(|e| {
            out.error(format_args!("{}: error[INVALID_INPUT]: {e}", path.display()));
            Failure::Domain
        });
    }
    let scenario = load(out, path)?;
    let decl = match id {
        Some(id) => scenario.douts.iter().find(|d| d.id == id),
        None if scenario.douts.len() == 1 => scenario.douts.first(),
        None => None,
    };
    match decl {
        Some(d) => Ok(d.input.clone()),
        None => {
            let wanted = id.map_or("exactly one douts block".to_owned(), |id| format!("douts block `{id}`"));
            out.error(format_args!("{}: error[UNKNOWN_ENTITY]: expected {wanted}", path.display()));
            Err(Failure::Domain)
        }
    }
}

fn score_cmd(out: &Out, path: &Path, id: Option<&str>) -> Outcome {
    let input = douts_input(out, path, id)?;
    match score(&input) {
        Ok(s) => {
            if out.json {
                out.emit_json(&s);
            } else {
                println!("value {}", format_rational(&s.value));
                for t in &s.rule_trace {
                    println!("{:<6} {}", t.rule.to_string(), t.detail);
                }
            }
            Ok(())
        }
        Err(e) => {
            out.error(format_args!("error[{}]: {e}", e.code()));
            Err(Failure::Domain)
        }
    }
}

fn plan_cmd(out: &Out, path: &Path, item: usize) -> Outcome {
    let scenario = load(out, path)?;
    let (history, spec) = replay_or_fail(out, path, &scenario, Some(item))?;
    let spec = spec.expect("replay stops at an apply item");
    match plan_with_log(history.current(), &spec, &history.log) {
        Ok(p) => {
            if out.json {
                out.emit_json(&p);
            } else {
                print_plan(&p);
            }
            Ok(())
        }
        Err(e) => {
            out.error(format_args!("error[{}]: {e}", e.code()));
            Err(Failure::Domain)
        }
    }
}

fn print_plan(p: &TransitionPlan) {
    println!("pre  {}", p.declared_pre);
    println!("post {}", p.declared_post);
    for step in &p.steps {
        println!("{}", dsl::script_item(&ScriptAction::Step { step: step.clone(), expect: None }));
    }
    for note in &p.annotations {
        println!("# {note}");
    }
}

fn verify_cmd(out: &Out, path: &Path, plan_path: &Path, item: usize) -> Outcome {
    let scenario = load(out, path)?;
    let plan: TransitionPlan = serde_json::from_slice(&read(plan_path)?).map_err(|e| {
        out.error(format_args!("{}: error[INVALID_INPUT]: {e}", plan_path.display()));
        Failure::Domain
    })?;
    let (history, spec) = replay_or_fail(out, path, &scenario, Some(item))?;
    let spec = spec.expect("replay stops at an apply item");
    let verification = verify_plan_with_log(history.current(), &plan, &spec, &history.log);
    if out.json {
        out.emit_json(&verification);
    } else {
        for d in &verification.diagnostics {
            out.error(d);
        }
        out.note(if verification.valid { "valid" } else { "invalid" });
    }
    if verification.valid {
        Ok(())
    } else {
        Err(Failure::Domain)
    }
}

fn match_cmd(out: &Out, path: &Path, lot_id: &str) -> Outcome {
    let scenario = load(out, path)?;
    let Some(lot) = scenario.lot(lot_id) else {
        out.error(format_args!("{}: error[UNKNOWN_ENTITY]: no lot `{lot_id}`", path.display()));
        return Err(Failure::Domain);
    };
    let world: &WorldState = &scenario.world;
    let ranking = select_fit(&lot, &scenario.bids_on(lot_id), world);
    if out.json {
        out.emit_json(&ranking);
    } else {
        let width = ranking.ranked.iter().map(|r| r.bid.id.len()).max().unwrap_or(3).max(3);
        println!("{:<4} {:<width$} {:<7} {:>12}  diagnostics", "rank", "bid", "valid", "counterparts");
        for (i, r) in ranking.ranked.iter().enumerate() {
            let codes: Vec<&str> = r.diagnostics.iter().map(|d| d.code.as_str()).collect();
            let line = format!(
                "{:<4} {:<width$} {:<7} {:>12}  {}",
                i + 1,
                r.bid.id,
                r.valid,
                r.counterparty_units,
                codes.join(", ")
            );
            println!("{}", line.trim_end());
        }
    }
    Ok(())
}
