//! The `binsos` command line.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use binsos_core::checker::{thm2_instance, witness_thm2, witness_thm3, Safety, Verdict};
use binsos_core::{
    classify_line, replay, run, table_rows, tight_condition, AlgorithmInstance, ExecutionTrace, Kernel, RunOptions,
    SystemConfig, Termination, Timing,
};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Exit};
use crate::parallel::{check_table_parallel, explore_parallel};
use crate::report::{render_mask, CellRecord, CheckDocument, TableDocument};
use crate::spec::{CommandName, RunSpec, WitnessKind};
use crate::trace_io::{read_trace, write_trace};

#[derive(Debug, Parser)]
#[command(name = "binsos", version, about = "Simulate and check binary-output tasks under crash faults")]
pub struct Cli {
    /// JSON run spec; command-line flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one execution and write its trace.
    Run(#[command(flatten)] RunSpec),
    /// Re-run a trace file from its header and compare.
    Replay(#[command(flatten)] RunSpec),
    /// Explore an instance against the output sets it claims.
    Check(#[command(flatten)] RunSpec),
    /// Check every solvable table cell up to --n-max.
    Table(#[command(flatten)] RunSpec),
    /// Build a counterexample schedule outside a tight condition.
    Witness {
        construction: Option<WitnessKind>,
        #[command(flatten)]
        spec: RunSpec,
    },
}

/// What a command printed and how the process should exit.
#[derive(Debug)]
pub struct Outcome {
    pub exit: Exit,
    pub lines: Vec<String>,
}

impl Outcome {
    fn new(exit: Exit, summary: String) -> Self {
        Outcome { exit, lines: vec![summary] }
    }
}

impl Cli {
    /// The effective spec: command-line flags over the config file.
    pub fn resolve(self) -> Result<RunSpec, Error> {
        let file = match &self.config {
            Some(p) => RunSpec::load(p)?,
            None => RunSpec::default(),
        };
        let flags = match self.command {
            None => RunSpec::default(),
            Some(Command::Run(s)) => RunSpec { command: Some(CommandName::Run), ..s },
            Some(Command::Replay(s)) => RunSpec { command: Some(CommandName::Replay), ..s },
            Some(Command::Check(s)) => RunSpec { command: Some(CommandName::Check), ..s },
            Some(Command::Table(s)) => RunSpec { command: Some(CommandName::Table), ..s },
            Some(Command::Witness { construction, spec }) => RunSpec {
                command: Some(CommandName::Witness),
                construction: construction.or(spec.construction),
                ..spec
            },
        };
        Ok(flags.or(file))
    }
}

pub fn execute(spec: &RunSpec) -> Result<Outcome, Error> {
    match spec.command {
        Some(CommandName::Run) => cmd_run(spec),
        Some(CommandName::Replay) => cmd_replay(spec),
        Some(CommandName::Check) => cmd_check(spec),
        Some(CommandName::Table) => cmd_table(spec),
        Some(CommandName::Witness) => cmd_witness(spec),
        None => Err(Error::usage("no command given (run, replay, check, table, witness)")),
    }
}

fn config(spec: &RunSpec) -> Result<SystemConfig, Error> {
    let n = RunSpec::need(&spec.n, "-n")?;
    let t = RunSpec::need(&spec.t, "-t")?;
    let timing = RunSpec::need(&spec.timing, "--timing")?;
    Ok(SystemConfig::new(n, t, timing)?)
}

fn instance(spec: &RunSpec, cfg: SystemConfig) -> Result<AlgorithmInstance, Error> {
    let kind = spec.algorithm()?;
    if !kind.supports(cfg.timing) {
        return Err(binsos_core::Error::TimingMismatch { algorithm: kind.id().into(), timing: cfg.timing }.into());
    }
    Ok(AlgorithmInstance::new(kind, cfg.n, cfg.t)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn save_trace(spec: &RunSpec, tr: &ExecutionTrace) -> Result<(), Error> {
    if let Some(path) = &spec.out {
        write_trace(create(path)?, tr)?;
    }
    Ok(())
}

fn save_json(path: Option<&PathBuf>, value: &impl Serialize) -> Result<(), Error> {
    match path {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, value)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, value)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::AllDone => "ALL_DONE",
        Termination::Quiescent => "QUIESCENT",
        Termination::Horizon => "HORIZON",
    }
}

fn outputs(tr: &ExecutionTrace) -> String {
    let vals: Vec<String> = tr.outputs.0.iter().map(|o| o.map_or("⊥".into(), |b| b.to_string())).collect();
    format!("({})", vals.join(","))
}

/// One-line summary shared by `run` and `replay`.
pub fn summary(tr: &ExecutionTrace) -> String {
    format!(
        "output_set={} termination={} outputs={} events={}",
        tr.output_set(),
        termination_name(tr.termination),
        outputs(tr),
        tr.events.len()
    )
}

fn trace_exit(tr: &ExecutionTrace) -> Exit {
    if tr.termination == Termination::Horizon {
        Exit::Exhausted
    } else {
        Exit::Success
    }
}

fn cmd_run(spec: &RunSpec) -> Result<Outcome, Error> {
    let cfg = config(spec)?;
    let inst = instance(spec, cfg)?;
    let opts = RunOptions { horizon: spec.horizon, deadline: None };
    let kernel = Kernel::new(inst, cfg, opts)?;
    let fp = spec.failure_pattern()?;
    let dp = match cfg.timing {
        Timing::Sync if spec.dp.is_some() => return Err(Error::usage("--dp applies to asynchronous runs only")),
        Timing::Sync => binsos_core::sync_canonical_delay(),
        Timing::Async => spec.delay_pattern()?,
    };
    let tr = run(&kernel, spec.seed.unwrap_or(0), &fp, &dp)?;
    save_trace(spec, &tr)?;
    Ok(Outcome::new(trace_exit(&tr), summary(&tr)))
}

fn cmd_replay(spec: &RunSpec) -> Result<Outcome, Error> {
    let path = RunSpec::need(&spec.replay, "--replay FILE")?;
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let recorded = read_trace(BufReader::new(file))?;
    let again = replay(&recorded.header)?;
    save_trace(spec, &again)?;
    let mut out = Outcome::new(trace_exit(&again), summary(&again));
    if again == recorded {
        out.lines.push("replay: identical".into());
    } else {
        let at = recorded.events.iter().zip(&again.events).position(|(a, b)| a != b);
        out.lines.push(match at {
            Some(i) => format!("replay: diverges at event {i}"),
            None => "replay: event logs differ in length or outcome".into(),
        });
        out.exit = Exit::VerdictFailure;
    }
    Ok(out)
}

fn verdict_exit(v: &Verdict) -> Exit {
    match v.safety() {
        Safety::Violated => Exit::VerdictFailure,
        Safety::Indeterminate => Exit::Exhausted,
        Safety::Ok if v.completeness_ok() => Exit::Success,
        Safety::Ok if v.exhaustive && !v.budget_exhausted => Exit::VerdictFailure,
        Safety::Ok => Exit::Exhausted,
    }
}

fn verdict_line(v: &Verdict) -> String {
    let completeness = if v.completeness_ok() {
        "complete".to_string()
    } else if v.exhaustive && !v.budget_exhausted {
        format!("missing {}", render_mask(v.target.difference(v.observed).mask()))
    } else {
        format!("not witnessed within budget: {}", render_mask(v.target.difference(v.observed).mask()))
    };
    format!(
        "observed={} target={} safety={} completeness={} mode={} executions={} states={} horizon_hits={}",
        render_mask(v.observed.mask()),
        render_mask(v.target.mask()),
        match v.safety() {
            Safety::Ok => "ok",
            Safety::Violated => "violated",
            Safety::Indeterminate => "indeterminate",
        },
        completeness,
        if v.exhaustive { "exhaustive" } else { "sampled" },
        v.executions,
        v.states,
        v.horizon_hits
    )
}

fn cmd_check(spec: &RunSpec) -> Result<Outcome, Error> {
    let cfg = config(spec)?;
    let inst = instance(spec, cfg)?;
    let target = inst.kind.claimed_set();
    let v = explore_parallel(&inst, cfg, target, spec.exploration_budget()?)?;
    let line = classify_line(target);
    let holds = tight_condition(line, cfg.timing)?.holds(cfg.n, cfg.t);
    let doc = CheckDocument {
        algorithm: inst.kind,
        target_mask: target.mask(),
        cell: CellRecord::new(line, cfg, holds, Some(&v)),
    };
    if spec.out.is_some() {
        save_json(spec.out.as_ref(), &doc)?;
    }
    let mut out = Outcome::new(verdict_exit(&v), verdict_line(&v));
    if !holds {
        out.lines.push(format!("note: line {line} condition does not hold at n={} t={}", cfg.n, cfg.t));
    }
    for x in &v.violations {
        out.lines.push(match &x.header {
            Some(h) => format!("violation {} seed={} fp={}", x.output_set, h.seed, h.fp),
            None => format!("violation {} (no replay seed found)", x.output_set),
        });
    }
    Ok(out)
}

fn cmd_table(spec: &RunSpec) -> Result<Outcome, Error> {
    if spec.export_rows {
        save_json(spec.out.as_ref(), &table_rows())?;
        return Ok(Outcome { exit: Exit::Success, lines: Vec::new() });
    }
    let n_max = spec.n_max.unwrap_or(4);
    if n_max < 2 {
        return Err(Error::usage(format!("--n-max must be at least 2, got {n_max}")));
    }
    let report = check_table_parallel(spec.exploration_budget()?, n_max)?;
    let doc = TableDocument::from(&report);
    if spec.out.is_some() {
        save_json(spec.out.as_ref(), &doc)?;
    }
    let checked: Vec<&CellRecord> = doc.cells.iter().filter(|c| c.condition_holds).collect();
    let failed: Vec<&&CellRecord> = checked.iter().filter(|c| !c.passed()).collect();
    let mut out = Outcome::new(
        Exit::Success,
        format!("n_max={n_max} cells={} checked={} failed={}", doc.cells.len(), checked.len(), failed.len()),
    );
    for c in &failed {
        out.lines.push(format!(
            "FAIL line {} {:?} n={} t={} observed={} safety={:?}",
            c.line,
            c.timing,
            c.n,
            c.t,
            render_mask(c.observed_mask.unwrap_or(0)),
            c.safety
        ));
    }
    let violated = failed.iter().any(|c| c.safety == Some(Safety::Violated));
    let complete_search = failed.iter().all(|c| c.exhaustive && !c.budget_exhausted);
    out.exit = match (failed.is_empty(), violated || complete_search) {
        (true, _) => Exit::Success,
        (false, true) => Exit::VerdictFailure,
        (false, false) => Exit::Exhausted,
    };
    Ok(out)
}

fn cmd_witness(spec: &RunSpec) -> Result<Outcome, Error> {
    let construction = RunSpec::need(&spec.construction, "construction (thm2 or thm3)")?;
    let n = RunSpec::need(&spec.n, "-n")?;
    let t = RunSpec::need(&spec.t, "-t")?;
    let budget = spec.exploration_budget()?;
    let (w, tr) = match construction {
        WitnessKind::Thm2 => {
            let timing = spec.timing.unwrap_or(Timing::Async);
            let cfg = SystemConfig::new(n, t, timing)?;
            let inst = match &spec.alg {
                Some(_) => AlgorithmInstance::permissive(spec.algorithm()?, n, t)?,
                None => {
                    let no_out = crate::spec::split_params(&spec.params)?
                        .iter()
                        .any(|(k, v)| k == "no_out" && matches!(v.as_str(), "true" | "1"));
                    thm2_instance(timing, n, t, no_out)?
                }
            };
            witness_thm2(&inst, cfg, budget)?
        }
        WitnessKind::Thm3 => {
            if spec.timing == Some(Timing::Sync) {
                return Err(binsos_core::Error::Precondition("the construction is asynchronous".into()).into());
            }
            witness_thm3(SystemConfig::new(n, t, Timing::Async)?, budget)?
        }
    };
    save_trace(spec, &tr)?;
    let o = tr.output_set();
    let exit = if o.is_singleton() && o == w.expected { Exit::Success } else { Exit::VerdictFailure };
    let mut out = Outcome::new(
        exit,
        format!(
            "counterexample witness: output_set={o} expected={} against {} (n={n}, t={t})",
            w.expected, w.header.instance.kind
        ),
    );
    out.lines.extend(w.steps.iter().map(|s| format!("  {s}")));
    out.lines.push(format!("caveat: {}", w.caveat));
    Ok(out)
}

/// Parses, runs, prints; returns the process exit status.
pub fn main_with(cli: Cli) -> Exit {
    let result = cli.resolve().and_then(|spec| execute(&spec));
    match result {
        Ok(out) => {
            for l in &out.lines {
                println!("{l}");
            }
            out.exit
        }
        Err(e) => {
            let exit = e.exit();
            let label = if exit == Exit::Rejected { "rejected" } else { "error" };
            eprintln!("{label}: {e}");
            exit
        }
    }
}
