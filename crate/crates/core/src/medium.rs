//! Independent audit of the communicate/observe properties over a trace.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::{EventKind, ExecutionTrace, ItemId, ProcessId, Termination};
use crate::outputsets::Timing;
use crate::program::Msg;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "property", rename_all = "snake_case")]
pub enum MediumViolation {
    /// Observation of something never communicated (or with another payload).
    Validity { observer: ProcessId, item: ItemId },
    /// A correct sender's item reached no correct process.
    LocalTermination { item: ItemId },
    /// An item some process observed never reached this correct process.
    GlobalTermination { item: ItemId, missing: ProcessId },
    /// Synchronous item not observed in its own round by a live process.
    Synchrony { item: ItemId, process: ProcessId },
}

impl fmt::Display for MediumViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MediumViolation::Validity { observer, item } => {
                write!(f, "C-Validity: {observer} observed {item}, which was never communicated")
            }
            MediumViolation::LocalTermination { item } => {
                write!(f, "C-Local-Termination: no correct process observed {item}")
            }
            MediumViolation::GlobalTermination { item, missing } => {
                write!(f, "C-Global-Termination: correct {missing} never observed {item}")
            }
            MediumViolation::Synchrony { item, process } => {
                write!(f, "C-Synchrony: {process} did not observe {item} in its round")
            }
        }
    }
}

struct Emission {
    seq: u64,
    time: u32,
    msg: Msg,
}

/// Scans the event log for violations of the medium's properties.
/// Termination properties are only checked on finalized traces.
pub fn medium_check(trace: &ExecutionTrace) -> Vec<MediumViolation> {
    let n = trace.statuses.len();
    let correct: Vec<ProcessId> = (0..n).map(ProcessId::from_index).filter(|p| !trace.crashed(*p)).collect();
    let mut emitted: BTreeMap<ItemId, Emission> = BTreeMap::new();
    // item -> (observer -> (seq, time))
    let mut observed: BTreeMap<ItemId, BTreeMap<ProcessId, (u64, u32)>> = BTreeMap::new();
    let mut crash_at: BTreeMap<ProcessId, (u64, u32)> = BTreeMap::new();
    let mut out = Vec::new();

    for e in &trace.events {
        match e.kind {
            EventKind::Communicate { item, msg } => {
                emitted.insert(item, Emission { seq: e.seq, time: e.time, msg });
            }
            EventKind::Observe { item, msg } => {
                let valid = matches!(emitted.get(&item), Some(em) if em.msg == msg && em.seq < e.seq);
                if !valid {
                    out.push(MediumViolation::Validity { observer: e.pid, item });
                }
                observed.entry(item).or_default().entry(e.pid).or_insert((e.seq, e.time));
            }
            EventKind::Crash { .. } => {
                crash_at.insert(e.pid, (e.seq, e.time));
            }
            _ => {}
        }
    }

    if trace.termination == Termination::Horizon {
        return out;
    }

    let empty = BTreeMap::new();
    for (&item, em) in &emitted {
        let seen = observed.get(&item).unwrap_or(&empty);
        let sender_correct = correct.contains(&item.sender);
        if sender_correct && !correct.is_empty() && !correct.iter().any(|p| seen.contains_key(p)) {
            out.push(MediumViolation::LocalTermination { item });
        }
        if !seen.is_empty() {
            for &p in &correct {
                if !seen.contains_key(&p) {
                    out.push(MediumViolation::GlobalTermination { item, missing: p });
                }
            }
        }
        if trace.header.config.timing == Timing::Sync {
            let mut late: BTreeSet<ProcessId> =
                seen.iter().filter(|(_, &(_, t))| t != em.time).map(|(&p, _)| p).collect();
            let first = seen.values().map(|&(s, _)| s).min();
            for p in (0..n).map(ProcessId::from_index) {
                if seen.contains_key(&p) {
                    continue;
                }
                let must = match (first, crash_at.get(&p)) {
                    (_, None) => true,
                    (Some(s), Some(&(cs, _))) => cs > s,
                    (None, Some(&(_, ct))) => ct > em.time,
                };
                if must {
                    late.insert(p);
                }
            }
            out.extend(late.into_iter().map(|process| MediumViolation::Synchrony { item, process }));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{AlgorithmInstance, AlgorithmKind};
    use crate::kernel::{run_sync, Event};
    use crate::outputsets::SystemConfig;
    use crate::patterns::FailurePattern;

    fn consensus_trace() -> ExecutionTrace {
        let inst = AlgorithmInstance::new(AlgorithmKind::SyncConsensus, 2, 1).unwrap();
        run_sync(&inst, SystemConfig::new(2, 1, Timing::Sync).unwrap(), 3, &FailurePattern::none()).unwrap()
    }

    #[test]
    fn kernel_trace_is_clean() {
        assert_eq!(medium_check(&consensus_trace()), []);
    }

    #[test]
    fn forged_observation_breaks_validity() {
        let mut tr = consensus_trace();
        let item = ItemId { sender: ProcessId::new(2), slot: 5 };
        let seq = tr.events.len() as u64;
        tr.events.push(Event {
            seq,
            time: 1,
            pid: ProcessId::new(1),
            kind: EventKind::Observe { item, msg: Msg::Init },
        });
        assert!(medium_check(&tr).contains(&MediumViolation::Validity { observer: ProcessId::new(1), item }));
    }

    #[test]
    fn forged_late_round_breaks_synchrony() {
        let mut tr = consensus_trace();
        let ev = tr
            .events
            .iter_mut()
            .find(|e| matches!(e.kind, EventKind::Observe { .. }) && e.pid == ProcessId::new(2))
            .unwrap();
        ev.time = 2;
        let v = medium_check(&tr);
        assert!(v.iter().any(|x| matches!(x, MediumViolation::Synchrony { .. })), "{v:?}");
    }

    #[test]
    fn dropped_observation_breaks_global_termination() {
        let mut tr = consensus_trace();
        let pos = tr
            .events
            .iter()
            .position(|e| matches!(e.kind, EventKind::Observe { .. }) && e.pid == ProcessId::new(2))
            .unwrap();
        tr.events.remove(pos);
        let v = medium_check(&tr);
        assert!(v.iter().any(|x| matches!(x, MediumViolation::GlobalTermination { .. })), "{v:?}");
    }
}
