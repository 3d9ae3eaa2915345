use binsos_core::checker::{explore, ExplorationBudget};
use binsos_core::{
    run_async, AlgorithmInstance, AlgorithmKind, DelayPattern, FailurePattern, OutputSet, RunOptions, SetOfOutputSets,
    SystemConfig, Termination, Timing,
};

#[test]
fn async_disagreement_no_out_five_two() {
    let inst = AlgorithmInstance::new(AlgorithmKind::AsyncDisagreement { no_out: true }, 5, 2).unwrap();
    let cfg = SystemConfig::new(5, 2, Timing::Async).unwrap();
    let v = explore(&inst, cfg, ExplorationBudget::exhaustive(1_000_000)).unwrap();
    assert!(v.exhaustive && !v.budget_exhausted);
    assert_eq!(v.observed, SetOfOutputSets::of(&[OutputSet::Empty, OutputSet::Both]));
    assert!(v.passed());
}

#[test]
fn out_of_envelope_disagreement_loses_both() {
    // 2n ≤ 3t+2 at (4,2): the permissive instance is not safe
    let inst = AlgorithmInstance::permissive(AlgorithmKind::AsyncDisagreement { no_out: false }, 4, 2).unwrap();
    let cfg = SystemConfig::new(4, 2, Timing::Async).unwrap();
    let v = explore(&inst, cfg, ExplorationBudget::exhaustive(1_000_000)).unwrap();
    assert!(!v.safety_ok());
    assert!(v.violations.iter().all(|x| x.output_set.is_singleton()));
}

#[test]
fn immediate_delivery_completes() {
    let inst = AlgorithmInstance::new(AlgorithmKind::AsyncDisagreement { no_out: false }, 5, 2).unwrap();
    let cfg = SystemConfig::new(5, 2, Timing::Async).unwrap();
    let tr = run_async(&inst, cfg, 0, &FailurePattern::none(), &DelayPattern::all_immediate(), RunOptions::default())
        .unwrap();
    assert_eq!(tr.termination, Termination::AllDone);
}
