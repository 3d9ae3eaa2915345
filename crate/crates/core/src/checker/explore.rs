use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExplorationBudget, Verdict};
use crate::algorithms::AlgorithmInstance;
use crate::choice::splitmix64;
use crate::error::Error;
use crate::kernel::{
    delivery_for, find_seed, run_outputs, Answer, Kernel, Next, ProcessId, Request, RunOptions, State, Termination,
    TraceHeader,
};
use crate::outputsets::{OutputSet, SetOfOutputSets, SystemConfig, Timing};
use crate::patterns::{delay_edges, sync_canonical_delay, DelayPattern, Delivery, FailurePattern};

/// Seeds tried when turning an explored pick sequence into a run seed.
const SEED_SEARCH_LIMIT: u64 = 1 << 24;

/// Explores `instance` against the set of output sets it claims.
pub fn explore(instance: &AlgorithmInstance, cfg: SystemConfig, budget: ExplorationBudget) -> Result<Verdict, Error> {
    explore_against(instance, cfg, instance.kind.claimed_set(), budget)
}

pub fn explore_against(
    instance: &AlgorithmInstance,
    cfg: SystemConfig,
    target: SetOfOutputSets,
    budget: ExplorationBudget,
) -> Result<Verdict, Error> {
    let kernel = Kernel::new(instance.clone(), cfg, RunOptions { horizon: budget.horizon, deadline: budget.deadline })?;
    let sampled = |k: &Kernel| explore_samples(k, target, 0..budget.samples as u64 + 2, budget.sample_seed);
    match budget.exhaustive {
        Some(true) => explore_exhaustive(&kernel, target, budget.state_cap),
        Some(false) => sampled(&kernel),
        None => {
            let v = explore_exhaustive(&kernel, target, budget.state_cap)?;
            if v.budget_exhausted {
                sampled(&kernel)
            } else {
                Ok(v)
            }
        }
    }
}

/// Depth-first search over every decision an execution depends on.
///
/// Picks branch over all candidates, each process may crash after any of
/// its counted steps while fewer than `t` have crashed, and every item
/// reaches every receiver that may still read it immediately, at
/// mid-horizon or at the horizon. States are deduplicated by fingerprint, so executions that
/// reach the same state share their continuation.
pub struct Explorer<'k> {
    kernel: &'k Kernel,
    target: SetOfOutputSets,
    state_cap: usize,
}

impl<'k> Explorer<'k> {
    pub fn new(kernel: &'k Kernel, target: SetOfOutputSets, state_cap: usize) -> Self {
        Explorer { kernel, target, state_cap }
    }

    fn branches(&self, r: &Request, crashes: usize) -> Vec<Answer> {
        match *r {
            Request::Pick { options, .. } => (0..options).map(Answer::Pick).collect(),
            Request::Crash { at_end, .. } => {
                if at_end || crashes >= self.kernel.t() {
                    alloc::vec![Answer::Crash(false)]
                } else {
                    alloc::vec![Answer::Crash(false), Answer::Crash(true)]
                }
            }
            Request::Delay { emitted, relevant, .. } => {
                if !relevant {
                    return alloc::vec![Answer::Deliver(emitted)];
                }
                let mut steps: Vec<u32> =
                    Delivery::LATTICE.iter().map(|d| d.resolve(emitted, self.kernel.horizon)).collect();
                steps.sort_unstable();
                steps.dedup();
                steps.into_iter().map(Answer::Deliver).collect()
            }
        }
    }

    pub fn run(&self) -> Result<Verdict, Error> {
        let mut verdict = Verdict::empty(self.target);
        verdict.exhaustive = true;
        let mut visited: BTreeSet<u128> = BTreeSet::new();
        let mut found: Vec<(OutputSet, Vec<Answer>)> = Vec::new();
        let mut stack: Vec<(State, Vec<Answer>)> = alloc::vec![(self.kernel.start(false), Vec::new())];

        'search: while let Some((mut state, mut path)) = stack.pop() {
            loop {
                match state.resume(self.kernel) {
                    Next::Finished(Termination::Horizon) => {
                        verdict.horizon_hits += 1;
                        break;
                    }
                    Next::Finished(_) => {
                        let o = state.outputs().output_set();
                        if !found.iter().any(|(x, _)| *x == o) {
                            found.push((o, path.clone()));
                        }
                        verdict.record(o, || None);
                        break;
                    }
                    Next::Choice(r) => {
                        let answers = self.branches(&r, state.crashes());
                        if let [a] = answers[..] {
                            state.answer(a);
                            path.push(a);
                            continue;
                        }
                        if !visited.insert(state.view_fingerprint(self.kernel)) {
                            break;
                        }
                        if visited.len() > self.state_cap {
                            verdict.budget_exhausted = true;
                            break 'search;
                        }
                        for &a in answers.iter().rev() {
                            let mut s = state.clone();
                            s.answer(a);
                            let mut p = path.clone();
                            p.push(a);
                            stack.push((s, p));
                        }
                        break;
                    }
                }
            }
        }
        verdict.states = visited.len() as u64;
        verdict.violations.clear();

        for (o, path) in found {
            let header = concretize(self.kernel, &path);
            let header = match header {
                Ok(h) => {
                    let (outputs, _) = run_outputs(self.kernel, h.seed, &h.fp, &h.dp)?;
                    if outputs.output_set() != o {
                        return Err(Error::ReplayDiverged(format!(
                            "explored output set {o} replayed as {}",
                            outputs.output_set()
                        )));
                    }
                    Some(h)
                }
                Err(Error::SeedSearch(_)) if !self.target.contains(o) => None,
                Err(e) => return Err(e),
            };
            if self.target.contains(o) {
                verdict.witnesses.push(super::Witness { output_set: o, header: header.expect("witness header") });
            } else {
                verdict.violations.push(super::Violation { output_set: o, header });
            }
        }
        verdict.witnesses.sort_by_key(|w| w.output_set);
        verdict.violations.sort_by_key(|v| v.output_set);
        Ok(verdict)
    }
}

pub fn explore_exhaustive(kernel: &Kernel, target: SetOfOutputSets, state_cap: usize) -> Result<Verdict, Error> {
    Explorer::new(kernel, target, state_cap).run()
}

/// Replays a decision path and turns it into a concrete `(seed, fp, dp)`.
pub fn concretize(kernel: &Kernel, path: &[Answer]) -> Result<TraceHeader, Error> {
    let mut state = kernel.start(false);
    let mut picks = Vec::new();
    let mut fp = FailurePattern::none();
    let mut dp = DelayPattern::all_immediate();
    for &a in path {
        let Next::Choice(r) = state.resume(kernel) else {
            return Err(Error::ReplayDiverged("decision path outlives the execution".into()));
        };
        match (r, a) {
            (Request::Pick { pid, counter, options, .. }, Answer::Pick(ix)) => picks.push((pid, counter, options, ix)),
            (Request::Crash { pid, slot, .. }, Answer::Crash(true)) => fp = fp.crash(pid, slot),
            (Request::Crash { .. }, Answer::Crash(false)) => {}
            (Request::Delay { item, receiver, emitted, .. }, Answer::Deliver(step)) => {
                if step != emitted {
                    dp = dp.with(item, receiver, delivery_for(step, emitted, kernel.horizon));
                }
            }
            (r, a) => return Err(Error::ReplayDiverged(format!("answer {a:?} does not fit {r:?}"))),
        }
        state.answer(a);
    }
    let seed = find_seed(&picks, SEED_SEARCH_LIMIT)?;
    if kernel.timing() == Timing::Sync {
        dp = sync_canonical_delay();
    }
    Ok(kernel.header(seed, fp, dp))
}

/// The `index`-th sampled triple. Indices 0 and 1 are the crash-free
/// all-immediate and all-latest extremes.
pub fn sample_triple(kernel: &Kernel, sample_seed: u64, index: u64) -> (u64, FailurePattern, DelayPattern) {
    match index {
        0 => return (0, FailurePattern::none(), DelayPattern::all_immediate()),
        1 => return (1, FailurePattern::none(), DelayPattern::all_latest()),
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(sample_seed) ^ splitmix64(index.wrapping_mul(0x2545_f491)));
    let seed = rng.gen::<u64>();
    let n = kernel.n();
    let f = rng.gen_range(0..=kernel.t());
    let mut fp = FailurePattern::none();
    for i in sample(&mut rng, n, f) {
        fp = fp.crash(ProcessId::from_index(i), rng.gen_range(0..kernel.crash_slots()) as u32);
    }
    let dp = match kernel.timing() {
        Timing::Sync => sync_canonical_delay(),
        Timing::Async => DelayPattern {
            default: None,
            edges: delay_edges(&kernel.instance.emission_slots(), n)
                .into_iter()
                .map(|e| (e, Delivery::LATTICE[rng.gen_range(0..3)]))
                .collect(),
        },
    };
    (seed, fp, dp)
}

/// Runs the sampled triples with indices in `range`.
pub fn explore_samples(
    kernel: &Kernel,
    target: SetOfOutputSets,
    range: Range<u64>,
    sample_seed: u64,
) -> Result<Verdict, Error> {
    let mut verdict = Verdict::empty(target);
    for i in range {
        let (seed, fp, dp) = sample_triple(kernel, sample_seed, i);
        let (outputs, termination) = run_outputs(kernel, seed, &fp, &dp)?;
        if termination == Termination::Horizon {
            verdict.horizon_hits += 1;
            continue;
        }
        verdict.record(outputs.output_set(), || Some(kernel.header(seed, fp, dp)));
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{AlgorithmKind, ValueSet};
    use crate::kernel::replay;

    fn cfg(n: usize, t: usize, timing: Timing) -> SystemConfig {
        SystemConfig::new(n, t, timing).unwrap()
    }

    #[test]
    fn bottom_only_all_output() {
        let kind = AlgorithmKind::AllOutput { values: ValueSet::new(false, false, true).unwrap() };
        for timing in Timing::ALL {
            let inst = AlgorithmInstance::new(kind, 1, 1).unwrap();
            let v = explore(&inst, cfg(1, 1, timing), ExplorationBudget::exhaustive(1000)).unwrap();
            assert_eq!(v.observed, SetOfOutputSets::of(&[OutputSet::Empty]));
            assert!(v.passed());
        }
    }

    #[test]
    fn sync_consensus_two_processes() {
        let inst = AlgorithmInstance::new(AlgorithmKind::SyncConsensus, 2, 1).unwrap();
        let v = explore(&inst, cfg(2, 1, Timing::Sync), ExplorationBudget::exhaustive(100_000)).unwrap();
        assert_eq!(v.observed, SetOfOutputSets::of(&[OutputSet::Zero, OutputSet::One]));
        assert!(v.passed());
        for w in &v.witnesses {
            assert_eq!(replay(&w.header).unwrap().output_set(), w.output_set);
        }
    }

    #[test]
    fn out_of_envelope_violation_carries_header() {
        // line 10 under asynchrony needs t = 0
        let inst = AlgorithmInstance::new(AlgorithmKind::SingleOutput { no_out: false }, 2, 1).unwrap();
        let v = explore(&inst, cfg(2, 1, Timing::Async), ExplorationBudget::exhaustive(1000)).unwrap();
        assert!(!v.safety_ok());
        let bad = &v.violations[0];
        assert_eq!(bad.output_set, OutputSet::Empty);
        assert_eq!(replay(bad.header.as_ref().unwrap()).unwrap().output_set(), OutputSet::Empty);
    }

    #[test]
    fn sampled_mode_includes_extremes() {
        let inst =
            AlgorithmInstance::new(AlgorithmKind::TimingAdaptive { v: crate::Bit::One, no_out: false }, 3, 1).unwrap();
        let v = explore(&inst, cfg(3, 1, Timing::Async), ExplorationBudget::sampled(200, 5)).unwrap();
        assert!(!v.exhaustive);
        assert_eq!(v.executions, 202);
        assert!(v.passed());
    }
}
