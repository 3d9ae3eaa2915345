//! Crash constructions that break the disagreement algorithms outside
//! their tight region. They exhibit counterexamples against the shipped
//! algorithms; they do not prove impossibility for every algorithm.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{explore_against, ExplorationBudget};
use crate::algorithms::{AlgorithmInstance, AlgorithmKind};
use crate::error::Error;
use crate::kernel::{run, EventKind, ExecutionTrace, Kernel, ProcessId, RunOptions, TraceHeader};
use crate::outputsets::{Bit, OutputSet, SetOfOutputSets, SystemConfig, Timing};
use crate::patterns::{DelayPattern, Delivery, FailurePattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Construction {
    /// Everyone but the first outputter crashes before outputting.
    Thm2CrashAllButFirst,
    /// Minority outputters and the remaining processes crash before
    /// outputting, after a chain of second-outputter crashes.
    Thm3ECrash,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessSchedule {
    pub construction: Construction,
    pub header: TraceHeader,
    /// Singleton the construction predicts.
    pub expected: OutputSet,
    /// Intermediate executions, one line each.
    pub steps: Vec<String>,
    pub caveat: String,
}

const CAVEAT: &str = "counterexample witness against the shipped algorithm, not an impossibility theorem";

/// Disagreement instance for the given timing, with roles filled as far as
/// `n` allows.
pub fn thm2_instance(timing: Timing, n: usize, t: usize, no_out: bool) -> Result<AlgorithmInstance, Error> {
    let kind = match timing {
        Timing::Async => AlgorithmKind::AsyncDisagreement { no_out },
        Timing::Sync => AlgorithmKind::SyncDisagreement { no_out },
    };
    AlgorithmInstance::permissive(kind, n, t)
}

/// Output events `(pid, value, seq)` in log order.
fn outputters(tr: &ExecutionTrace) -> Vec<(ProcessId, Bit, u64)> {
    tr.events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Output { value } => Some((e.pid, value, e.seq)),
            _ => None,
        })
        .collect()
}

/// Counted steps `pid` completed before log position `seq`.
fn steps_before(tr: &ExecutionTrace, pid: ProcessId, seq: u64) -> u32 {
    tr.events.iter().filter(|e| e.seq < seq && e.pid == pid && matches!(e.kind, EventKind::Step { .. })).count() as u32
}

/// Crash slot right before `pid`'s output step.
fn before_output(tr: &ExecutionTrace, pid: ProcessId, out_seq: u64) -> u32 {
    // the output's own step event precedes the output event
    steps_before(tr, pid, out_seq).saturating_sub(1)
}

fn kernel_for(instance: &AlgorithmInstance, cfg: SystemConfig, budget: &ExplorationBudget) -> Result<Kernel, Error> {
    Kernel::new(instance.clone(), cfg, RunOptions { horizon: budget.horizon, deadline: budget.deadline })
}

/// Runs the crash-all-but-the-first-outputter construction.
pub fn witness_thm2(
    instance: &AlgorithmInstance,
    cfg: SystemConfig,
    budget: ExplorationBudget,
) -> Result<(WitnessSchedule, ExecutionTrace), Error> {
    if cfg.n >= cfg.t + 2 {
        return Err(Error::Precondition(format!("condition satisfied: n−t = {} ≥ 2", cfg.n - cfg.t)));
    }
    let both = SetOfOutputSets::of(&[OutputSet::Both]);
    let claimed = instance.kind.claimed_set();
    if claimed != both && claimed != both.with(OutputSet::Empty) {
        return Err(Error::Inapplicable(format!("{} does not target {{∅,{{0,1}}}} or {{{{0,1}}}}", instance.kind)));
    }
    let kernel = kernel_for(instance, cfg, &budget)?;

    let mut steps = Vec::new();
    let mut found = None;
    for seed in 0..256 {
        let tr = run(&kernel, seed, &FailurePattern::none(), &DelayPattern::all_immediate())?;
        if tr.output_set() == OutputSet::Both {
            found = Some(tr);
            break;
        }
    }
    let e = match found {
        Some(tr) => tr,
        None => {
            let v = explore_against(instance, cfg, both, budget)?;
            let Some(h) = v.witness(OutputSet::Both) else {
                return Err(Error::Inapplicable("no execution outputs both values within budget".into()));
            };
            run(&kernel, h.seed, &h.fp, &h.dp)?
        }
    };
    let (p, v, tau) = outputters(&e)[0];
    steps.push(format!(
        "E: seed {} fp [{}] has output set {}; first outputter {p} outputs {v}",
        e.header.seed,
        e.header.fp,
        e.output_set()
    ));

    let mut fp = FailurePattern::none();
    for q in (0..cfg.n).map(ProcessId::from_index).filter(|&q| q != p) {
        fp = fp.crash(q, steps_before(&e, q, tau));
    }
    steps.push(format!("crash every process except {p} where it stood when {p} output: [{fp}]"));
    let tr = run(&kernel, e.header.seed, &fp, &e.header.dp)?;
    let expected = OutputSet::singleton(v);
    if tr.output_set() != expected {
        return Err(Error::ReplayDiverged(format!("construction produced {} instead of {expected}", tr.output_set())));
    }
    let schedule = WitnessSchedule {
        construction: Construction::Thm2CrashAllButFirst,
        header: tr.header.clone(),
        expected,
        steps,
        caveat: CAVEAT.into(),
    };
    Ok((schedule, tr))
}

fn second_outputter(tr: &ExecutionTrace) -> Option<(ProcessId, Bit, u64)> {
    outputters(tr).get(1).copied()
}

/// Runs the asynchronous chain-of-crashes construction against the
/// asynchronous disagreement algorithm (outputs always required).
pub fn witness_thm3(cfg: SystemConfig, budget: ExplorationBudget) -> Result<(WitnessSchedule, ExecutionTrace), Error> {
    let (n, t) = (cfg.n, cfg.t);
    if cfg.timing != Timing::Async {
        return Err(Error::Precondition("the construction is asynchronous".into()));
    }
    if 2 * n > 3 * t + 2 {
        return Err(Error::Precondition(format!("condition satisfied: 2n = {} > 3t+2 = {}", 2 * n, 3 * t + 2)));
    }
    if t == 0 {
        return Err(Error::Precondition("no crashes available (t = 0)".into()));
    }
    if n < t + 1 {
        return Err(Error::Precondition(format!("needs n ≥ t+1 = {} processes", t + 1)));
    }
    let instance = AlgorithmInstance::permissive(AlgorithmKind::AsyncDisagreement { no_out: false }, n, t)?;
    let kernel = kernel_for(&instance, cfg, &budget)?;
    let seed = 0;
    let immediate = DelayPattern::all_immediate();
    let mut steps = Vec::new();

    let e0 = run(&kernel, seed, &FailurePattern::none(), &immediate)?;
    if e0.output_set() != OutputSet::Both {
        return Err(Error::Inapplicable(format!("crash-free execution has output set {}", e0.output_set())));
    }
    let (p1, v1, s1) = outputters(&e0)[0];
    // (process, value) of p1..p_{t+1}
    let mut chain = alloc::vec![(p1, v1)];
    let mut fp = FailurePattern::none().crash(p1, steps_before(&e0, p1, s1));
    steps.push(format!("E0: crash-free, first outputter {p1} outputs {v1}"));
    let mut e = run(&kernel, seed, &fp, &immediate)?;
    steps.push(format!("E1: {p1} crashes right after its output"));
    for i in 1..=t {
        let Some((q, v, s)) = second_outputter(&e) else {
            return Err(Error::Inapplicable(format!("E{i} has no second outputter")));
        };
        if chain.iter().any(|(p, _)| *p == q) {
            return Err(Error::Inapplicable(format!("E{i} repeats outputter {q}")));
        }
        chain.push((q, v));
        if i == t {
            steps.push(format!("E{i}: second outputter {q} outputs {v}"));
            break;
        }
        fp = fp.crash(q, before_output(&e, q, s));
        e = run(&kernel, seed, &fp, &immediate)?;
        steps.push(format!("E{}: second outputter {q} of E{i} crashes just before outputting {v}", i + 1));
    }

    // crash-free run where p1..pt's post-output communications arrive last
    let mut late = immediate.clone();
    for &(p, _) in &chain[..t] {
        let (_, _, out_seq) = *outputters(&e0).iter().find(|o| o.0 == p).expect("outputs in E0");
        let before = e0
            .events
            .iter()
            .filter(|ev| ev.seq < out_seq && ev.pid == p && matches!(ev.kind, EventKind::Communicate { .. }))
            .count();
        let total = kernel.program(p).max_emissions();
        for slot in before..total {
            for r in 0..n {
                let item = crate::kernel::ItemId { sender: p, slot: slot as u8 };
                late = late.with(item, ProcessId::from_index(r), Delivery::Latest);
            }
        }
    }
    let crash_free = run(&kernel, seed, &FailurePattern::none(), &late)?;
    steps.push(format!("E_crash-free: output set {}", crash_free.output_set()));

    let zeros: Vec<ProcessId> = chain.iter().filter(|c| c.1 == Bit::Zero).map(|c| c.0).collect();
    let ones: Vec<ProcessId> = chain.iter().filter(|c| c.1 == Bit::One).map(|c| c.0).collect();
    let (minority, majority_value) = if ones.len() < zeros.len() { (ones, Bit::Zero) } else { (zeros, Bit::One) };
    let others: Vec<ProcessId> =
        (0..n).map(ProcessId::from_index).filter(|p| !chain.iter().any(|c| c.0 == *p)).collect();
    let victims: Vec<ProcessId> = minority.iter().chain(&others).copied().collect();
    if victims.len() > t {
        return Err(Error::Inapplicable(format!("|Pmin|+|P?| = {} exceeds t = {t}", victims.len())));
    }
    let outs = outputters(&crash_free);
    let mut crash = FailurePattern::none();
    for &p in &victims {
        let slot = outs.iter().find(|o| o.0 == p).map_or(0, |&(_, _, s)| before_output(&crash_free, p, s));
        crash = crash.crash(p, slot);
    }
    steps.push(format!("E_crash: Pmin ∪ P? = {victims:?} crash before their output step: [{crash}]"));
    let tr = run(&kernel, seed, &crash, &late)?;
    let expected = OutputSet::singleton(majority_value);
    if tr.output_set() != expected {
        return Err(Error::ReplayDiverged(format!("construction produced {} instead of {expected}", tr.output_set())));
    }
    let schedule = WitnessSchedule {
        construction: Construction::Thm3ECrash,
        header: tr.header.clone(),
        expected,
        steps,
        caveat: CAVEAT.into(),
    };
    Ok((schedule, tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::replay;

    fn cfg(n: usize, t: usize, timing: Timing) -> SystemConfig {
        SystemConfig::new(n, t, timing).unwrap()
    }

    #[test]
    fn thm2_sync_two_processes() {
        let inst = thm2_instance(Timing::Sync, 2, 1, false).unwrap();
        let (w, tr) = witness_thm2(&inst, cfg(2, 1, Timing::Sync), ExplorationBudget::default()).unwrap();
        assert!(tr.output_set().is_singleton());
        assert_eq!(replay(&w.header).unwrap(), tr);
    }

    #[test]
    fn thm2_async_three_processes() {
        let inst = thm2_instance(Timing::Async, 3, 2, false).unwrap();
        let (_, tr) = witness_thm2(&inst, cfg(3, 2, Timing::Async), ExplorationBudget::default()).unwrap();
        assert!(tr.output_set().is_singleton());
    }

    #[test]
    fn thm2_rejects_satisfied_condition() {
        let inst = thm2_instance(Timing::Sync, 3, 1, false).unwrap();
        assert!(matches!(
            witness_thm2(&inst, cfg(3, 1, Timing::Sync), ExplorationBudget::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn thm3_four_two() {
        let (w, tr) = witness_thm3(cfg(4, 2, Timing::Async), ExplorationBudget::default()).unwrap();
        assert_eq!(tr.output_set(), OutputSet::Zero);
        assert_eq!(w.expected, OutputSet::Zero);
        assert_eq!(replay(&w.header).unwrap(), tr);
    }

    #[test]
    fn thm3_guards() {
        assert!(matches!(
            witness_thm3(cfg(5, 2, Timing::Async), ExplorationBudget::default()),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            witness_thm3(cfg(1, 0, Timing::Async), ExplorationBudget::default()),
            Err(Error::Precondition(_))
        ));
    }
}
