mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use binsos_core::checker::{explore_samples, sample_triple};
use binsos_core::kernel::Status;
use binsos_core::{
    enum_failure_patterns, medium_check, run, EventKind, FailurePattern, Kernel, ProcessId, Termination,
};
use proptest::prelude::*;

fn kernels() -> &'static [Kernel] {
    static K: OnceLock<Vec<Kernel>> = OnceLock::new();
    K.get_or_init(common::kernels)
}

fn sampled_trace(k: usize, ix: u64, seed: u64) -> (usize, binsos_core::ExecutionTrace) {
    let ks = kernels();
    let k = k % ks.len();
    let (s, fp, dp) = sample_triple(&ks[k], seed, ix);
    (k, run(&ks[k], s, &fp, &dp).unwrap())
}

fn blocked(s: &Status) -> bool {
    matches!(s, Status::Blocked { .. })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn runs_are_deterministic(k in 0usize..1000, ix in 0u64..1000, seed in any::<u64>()) {
        let (_, a) = sampled_trace(k, ix, seed);
        let (_, b) = sampled_trace(k, ix, seed);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn at_most_one_output(k in 0usize..1000, ix in 0u64..1000, seed in any::<u64>()) {
        let (_, tr) = sampled_trace(k, ix, seed);
        for pid in 0..tr.outputs.len() {
            let pid = ProcessId::from_index(pid);
            let outs: Vec<_> = tr.events.iter()
                .filter(|e| e.pid == pid)
                .filter_map(|e| match e.kind { EventKind::Output { value } => Some(value), _ => None })
                .collect();
            prop_assert!(outs.len() <= 1);
            prop_assert_eq!(outs.first().copied(), tr.outputs.0[pid.index()]);
        }
    }

    #[test]
    fn crashed_processes_stay_silent(k in 0usize..1000, ix in 0u64..1000, seed in any::<u64>()) {
        let (_, tr) = sampled_trace(k, ix, seed);
        let mut crashed = BTreeSet::new();
        for e in &tr.events {
            prop_assert!(!crashed.contains(&e.pid), "{} acted after crashing", e.pid);
            if let EventKind::Crash { slot } = e.kind {
                prop_assert_eq!(tr.header.fp.slot(e.pid), Some(slot));
                crashed.insert(e.pid);
            }
        }
        prop_assert!(crashed.len() <= tr.header.config.t);
        for pid in 0..tr.statuses.len() {
            let pid = ProcessId::from_index(pid);
            prop_assert_eq!(tr.crashed(pid), crashed.contains(&pid));
        }
    }

    #[test]
    fn medium_properties_hold(k in 0usize..1000, ix in 0u64..1000, seed in any::<u64>()) {
        let (_, tr) = sampled_trace(k, ix, seed);
        prop_assert_eq!(medium_check(&tr), vec![]);
    }

    #[test]
    fn termination_matches_statuses(k in 0usize..1000, ix in 0u64..1000, seed in any::<u64>()) {
        let (_, tr) = sampled_trace(k, ix, seed);
        let live = || tr.statuses.iter().filter(|s| **s != Status::Crashed);
        match tr.termination {
            Termination::AllDone => prop_assert!(live().all(|s| *s == Status::Done)),
            Termination::Quiescent => {
                prop_assert!(live().all(|s| *s == Status::Done || blocked(s)));
                prop_assert!(live().any(blocked));
                // nothing is left in flight to a process that is still waiting
                let sent: BTreeSet<_> = tr.events.iter().filter_map(|e| match e.kind {
                    EventKind::Communicate { item, .. } => Some(item), _ => None }).collect();
                for (i, s) in tr.statuses.iter().enumerate() {
                    if blocked(s) {
                        let pid = ProcessId::from_index(i);
                        let seen: BTreeSet<_> = tr.events.iter().filter(|e| e.pid == pid).filter_map(|e| match e.kind {
                            EventKind::Observe { item, .. } => Some(item), _ => None }).collect();
                        prop_assert_eq!(&seen, &sent);
                    }
                }
            }
            Termination::Horizon => {}
        }
    }

    #[test]
    fn failure_patterns_match_brute_force(n in 0usize..5, t in 0usize..5, slots in 1usize..4) {
        let got: Vec<FailurePattern> = enum_failure_patterns(n, t, slots).collect();
        let unique: BTreeSet<String> = got.iter().map(|f| f.to_string()).collect();
        prop_assert_eq!(unique.len(), got.len());
        // each process independently survives or crashes at one of the slots
        let mut want = BTreeSet::new();
        for code in 0..(slots + 1).pow(n as u32) {
            let mut fp = FailurePattern::none();
            let mut c = code;
            for i in 0..n {
                let d = c % (slots + 1);
                c /= slots + 1;
                if d > 0 {
                    fp = fp.crash(ProcessId::from_index(i), d as u32 - 1);
                }
            }
            if fp.crashes.len() <= t {
                want.insert(fp.to_string());
            }
        }
        prop_assert_eq!(unique, want);
    }

    #[test]
    fn sampling_more_never_sees_less(k in 0usize..1000, seed in any::<u64>(), a in 0u64..60, extra in 0u64..60) {
        let ks = kernels();
        let kernel = &ks[k % ks.len()];
        let target = kernel.instance.kind.claimed_set();
        let small = explore_samples(kernel, target, 0..a, seed).unwrap();
        let large = explore_samples(kernel, target, 0..a + extra, seed).unwrap();
        prop_assert!(small.observed.is_subset(large.observed));
        prop_assert!(small.violation_count <= large.violation_count);
        prop_assert!(small.executions + small.horizon_hits <= large.executions + large.horizon_hits);
        let split = explore_samples(kernel, target, a..a + extra, seed).unwrap();
        prop_assert_eq!(small.merge(split).observed, large.observed);
    }
}
