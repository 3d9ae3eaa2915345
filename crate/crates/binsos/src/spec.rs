//! Parsing of algorithm selectors, pattern literals, budgets and the
//! run-spec config file.

use std::fs;
use std::path::{Path, PathBuf};

use binsos_core::checker::ExplorationBudget;
use binsos_core::{AlgorithmKind, Bit, DelayPattern, Delivery, FailurePattern, ItemId, ProcessId, Timing, ValueSet};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Environment variable holding the budget used when none is given.
pub const BUDGET_ENV: &str = "BINSOS_BUDGET";

pub fn parse_timing(s: &str) -> Result<Timing, String> {
    match s.to_ascii_lowercase().as_str() {
        "async" | "asynchronous" => Ok(Timing::Async),
        "sync" | "synchronous" => Ok(Timing::Sync),
        _ => Err(format!("unknown timing '{s}' (expected async or sync)")),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, Error> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "t" | "1" | "yes" => Ok(true),
        "false" | "f" | "0" | "no" => Ok(false),
        _ => Err(Error::usage(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

fn parse_bit(key: &str, v: &str) -> Result<Bit, Error> {
    v.parse::<u8>()
        .ok()
        .and_then(Bit::from_u8)
        .ok_or_else(|| Error::usage(format!("{key}: expected 0 or 1, got '{v}'")))
}

/// Splits `--params` values into `key=value` pairs. Pairs are separated by
/// `;` or whitespace, so value sets may contain commas.
pub fn split_params(params: &[String]) -> Result<Vec<(String, String)>, Error> {
    params
        .iter()
        .flat_map(|p| p.split(|c: char| c == ';' || c.is_whitespace()))
        .filter(|s| !s.is_empty())
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
            None => Err(Error::usage(format!("parameter '{kv}' is not key=value"))),
        })
        .collect()
}

/// Resolves an algorithm name (`alg1`..`alg6` or its identifier) and its
/// parameters. `no_out` defaults to false and `v` to 0; `V` is required.
pub fn parse_algorithm(alg: &str, params: &[String]) -> Result<AlgorithmKind, Error> {
    let params = split_params(params)?;
    let mut no_out = None;
    let mut v = None;
    let mut values = None;
    for (k, val) in &params {
        match k.as_str() {
            "no_out" => no_out = Some(parse_bool(k, val)?),
            "v" => v = Some(parse_bit(k, val)?),
            "V" | "values" => values = Some(ValueSet::parse(val.trim_matches(|c| c == '{' || c == '}'))?),
            _ => return Err(Error::usage(format!("unknown parameter '{k}'"))),
        }
    }
    let name = alg.to_ascii_lowercase();
    let kind = match name.as_str() {
        "alg1" | "async_disagreement" => AlgorithmKind::AsyncDisagreement { no_out: no_out.unwrap_or(false) },
        "alg2" | "sync_disagreement" => AlgorithmKind::SyncDisagreement { no_out: no_out.unwrap_or(false) },
        "alg3" | "all_output" => AlgorithmKind::AllOutput {
            values: values.ok_or_else(|| Error::usage("all_output needs V=<values>, e.g. V=0,1,⊥"))?,
        },
        "alg4" | "single_output" => AlgorithmKind::SingleOutput { no_out: no_out.unwrap_or(false) },
        "alg5" | "timing_adaptive" => {
            AlgorithmKind::TimingAdaptive { v: v.unwrap_or(Bit::Zero), no_out: no_out.unwrap_or(false) }
        }
        "alg6" | "sync_consensus" => AlgorithmKind::SyncConsensus,
        _ => return Err(Error::usage(format!("unknown algorithm '{alg}'"))),
    };
    let unused = |key: &str, set: bool| {
        if set {
            Err(Error::usage(format!("{} takes no parameter '{key}'", kind.id())))
        } else {
            Ok(())
        }
    };
    match kind {
        AlgorithmKind::AllOutput { .. } => {
            unused("no_out", no_out.is_some())?;
            unused("v", v.is_some())?;
        }
        AlgorithmKind::TimingAdaptive { .. } => unused("V", values.is_some())?,
        AlgorithmKind::SyncConsensus => {
            unused("no_out", no_out.is_some())?;
            unused("v", v.is_some())?;
            unused("V", values.is_some())?;
        }
        _ => {
            unused("v", v.is_some())?;
            unused("V", values.is_some())?;
        }
    }
    Ok(kind)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn parse_pid(s: &str) -> Result<ProcessId, Error> {
    let digits = s.strip_prefix('p').unwrap_or(s);
    match digits.parse::<u16>() {
        Ok(id) if id >= 1 => Ok(ProcessId::new(id)),
        _ => Err(Error::usage(format!("bad process id '{s}'"))),
    }
}

/// `none`, `p1@3,p2@0`, inline JSON, or `@file.json`.
pub fn parse_fp(s: &str) -> Result<FailurePattern, Error> {
    let s = s.trim();
    if let Some(path) = s.strip_prefix('@') {
        return read_json(Path::new(path));
    }
    if s.starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    let mut fp = FailurePattern::none();
    if matches!(s, "" | "-" | "none") {
        return Ok(fp);
    }
    for entry in s.split(',') {
        let (pid, slot) =
            entry.split_once('@').ok_or_else(|| Error::usage(format!("crash '{entry}' is not pid@slot")))?;
        let pid = parse_pid(pid.trim())?;
        let slot = slot.trim().parse().map_err(|_| Error::usage(format!("bad crash slot in '{entry}'")))?;
        if fp.slot(pid).is_some() {
            return Err(Error::usage(format!("{pid} crashes twice")));
        }
        fp = fp.crash(pid, slot);
    }
    Ok(fp)
}

fn parse_delivery(s: &str) -> Result<Delivery, Error> {
    match s {
        "immediate" | "now" => Ok(Delivery::Immediate),
        "mid" => Ok(Delivery::Mid),
        "latest" | "late" => Ok(Delivery::Latest),
        _ => s
            .strip_prefix("step:")
            .unwrap_or(s)
            .parse()
            .map(Delivery::Step)
            .map_err(|_| Error::usage(format!("unknown delivery '{s}'"))),
    }
}

/// `immediate|mid|latest|step:K` as the default, optionally followed by
/// edges such as `p1#0>p2=latest`; or inline JSON, or `@file.json`.
pub fn parse_dp(s: &str) -> Result<DelayPattern, Error> {
    let s = s.trim();
    if let Some(path) = s.strip_prefix('@') {
        return read_json(Path::new(path));
    }
    if s.starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    let mut dp = DelayPattern::default();
    for entry in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        match entry.split_once('=') {
            None => dp.default = Some(parse_delivery(entry)?),
            Some((edge, d)) => {
                let bad = || Error::usage(format!("edge '{entry}' is not sender#slot>receiver=delivery"));
                let (item, receiver) = edge.split_once('>').ok_or_else(bad)?;
                let (sender, slot) = item.split_once('#').ok_or_else(bad)?;
                let item = ItemId { sender: parse_pid(sender)?, slot: slot.parse().map_err(|_| bad())? };
                dp = dp.with(item, parse_pid(receiver)?, parse_delivery(d)?);
            }
        }
    }
    Ok(dp)
}

/// `auto[:CAP]`, `exhaustive[:CAP]`, `sampled[:N[:SEED]]`.
pub fn parse_budget(s: &str) -> Result<ExplorationBudget, Error> {
    let mut parts = s.trim().split(':');
    let mode = parts.next().unwrap_or_default().to_ascii_lowercase();
    let num = |p: Option<&str>, what: &str| -> Result<Option<u64>, Error> {
        p.map(|x| x.replace('_', "").parse::<u64>().map_err(|_| Error::usage(format!("bad {what} '{x}' in budget"))))
            .transpose()
    };
    let mut b = ExplorationBudget::default();
    match mode.as_str() {
        "auto" => {
            if let Some(cap) = num(parts.next(), "state cap")? {
                b.state_cap = cap as usize;
            }
        }
        "exhaustive" => {
            b.exhaustive = Some(true);
            if let Some(cap) = num(parts.next(), "state cap")? {
                b.state_cap = cap as usize;
            }
        }
        "sampled" => {
            b.exhaustive = Some(false);
            if let Some(n) = num(parts.next(), "sample count")? {
                b.samples = n as usize;
            }
            if let Some(seed) = num(parts.next(), "sample seed")? {
                b.sample_seed = seed;
            }
        }
        _ => return Err(Error::usage(format!("unknown budget '{s}' (auto, exhaustive[:cap], sampled[:n[:seed]])"))),
    }
    if parts.next().is_some() {
        return Err(Error::usage(format!("too many fields in budget '{s}'")));
    }
    Ok(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Run,
    Replay,
    Check,
    Table,
    Witness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    Thm2,
    Thm3,
}

/// Every flag of every command. A JSON config file with the same field
/// names fills in whatever the command line leaves unset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    /// alg1..alg6 or async_disagreement, sync_disagreement, all_output,
    /// single_output, timing_adaptive, sync_consensus
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alg: Option<String>,
    /// key=value pairs: no_out=true, v=1, V=0,⊥
    #[arg(long)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<String>,
    #[arg(short = 'n')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(short = 't')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[arg(long, value_parser = parse_timing)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// none, p1@3,p2@0, JSON, or @file
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp: Option<String>,
    /// immediate|mid|latest|step:K[,p1#0>p2=latest...], JSON, or @file
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp: Option<String>,
    /// auto[:cap], exhaustive[:cap], sampled[:n[:seed]]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Trace file to replay.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<PathBuf>,
    /// Largest n in the table check.
    #[arg(long = "n-max")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction: Option<WitnessKind>,
    /// Write the condition table instead of checking it.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub export_rows: bool,
}

impl RunSpec {
    pub fn load(path: &Path) -> Result<RunSpec, Error> {
        read_json(path)
    }

    /// Fields set here win; the rest come from `base`.
    pub fn or(self, base: RunSpec) -> RunSpec {
        RunSpec {
            command: self.command.or(base.command),
            alg: self.alg.or(base.alg),
            params: if self.params.is_empty() { base.params } else { self.params },
            n: self.n.or(base.n),
            t: self.t.or(base.t),
            timing: self.timing.or(base.timing),
            seed: self.seed.or(base.seed),
            fp: self.fp.or(base.fp),
            dp: self.dp.or(base.dp),
            budget: self.budget.or(base.budget),
            horizon: self.horizon.or(base.horizon),
            out: self.out.or(base.out),
            replay: self.replay.or(base.replay),
            n_max: self.n_max.or(base.n_max),
            construction: self.construction.or(base.construction),
            export_rows: self.export_rows || base.export_rows,
        }
    }

    pub fn need<T: Clone>(field: &Option<T>, flag: &str) -> Result<T, Error> {
        field.clone().ok_or_else(|| Error::usage(format!("missing {flag}")))
    }

    pub fn algorithm(&self) -> Result<AlgorithmKind, Error> {
        parse_algorithm(&Self::need(&self.alg, "--alg")?, &self.params)
    }

    pub fn failure_pattern(&self) -> Result<FailurePattern, Error> {
        self.fp.as_deref().map_or(Ok(FailurePattern::none()), parse_fp)
    }

    pub fn delay_pattern(&self) -> Result<DelayPattern, Error> {
        self.dp.as_deref().map_or(Ok(DelayPattern::all_immediate()), parse_dp)
    }

    /// `--budget`, else the config file, else `$BINSOS_BUDGET`, else the
    /// default; `--horizon` applies to all of them.
    pub fn exploration_budget(&self) -> Result<ExplorationBudget, Error> {
        let mut b = match &self.budget {
            Some(s) => parse_budget(s)?,
            None => match std::env::var(BUDGET_ENV) {
                Ok(s) if !s.trim().is_empty() => parse_budget(&s)?,
                _ => ExplorationBudget::default(),
            },
        };
        b.horizon = self.horizon;
        Ok(b)
    }
}
