//! Failure patterns, communication-delay patterns, and their enumeration.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::{ItemId, ProcessId};

/// Which processes crash, and at which crash slot.
///
/// Slot `k` crashes the process once it has executed `k` counted steps:
/// before its next step, while it waits, or right after its last step.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FailurePattern {
    pub crashes: BTreeMap<ProcessId, u32>,
}

impl FailurePattern {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn crash(mut self, pid: ProcessId, slot: u32) -> Self {
        self.crashes.insert(pid, slot);
        self
    }

    /// Effective number of crashes.
    pub fn f(&self) -> usize {
        self.crashes.len()
    }

    pub fn slot(&self, pid: ProcessId) -> Option<u32> {
        self.crashes.get(&pid).copied()
    }

    pub fn validate(&self, n: usize, t: usize, slots: usize) -> Result<(), Error> {
        if self.f() > t {
            return Err(Error::TooManyCrashes { f: self.f(), t });
        }
        for (&pid, &slot) in &self.crashes {
            if pid.index() >= n {
                return Err(Error::UnknownProcess { pid: pid.get(), n });
            }
            if slot as usize >= slots {
                return Err(Error::InvalidCrashSlot { pid: pid.get(), slot, slots });
            }
        }
        Ok(())
    }
}

impl fmt::Display for FailurePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.crashes.is_empty() {
            return f.write_str("-");
        }
        let mut first = true;
        for (pid, slot) in &self.crashes {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{pid}@{slot}")?;
        }
        Ok(())
    }
}

/// Delivery point of one item to one receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    /// The step the item was communicated in.
    Immediate,
    /// `max(⌈H/2⌉, emit step)`.
    Mid,
    /// The horizon `H`.
    Latest,
    Step(u32),
}

impl Delivery {
    pub const LATTICE: [Delivery; 3] = [Delivery::Immediate, Delivery::Mid, Delivery::Latest];

    /// Logical delivery step; `Step` is returned as given.
    pub fn resolve(self, emitted: u32, horizon: u32) -> u32 {
        match self {
            Delivery::Immediate => emitted,
            Delivery::Mid => horizon.div_ceil(2).max(emitted),
            Delivery::Latest => horizon,
            Delivery::Step(k) => k,
        }
    }
}

/// `(sender, emission slot, receiver)`.
pub type Edge = (ProcessId, u8, ProcessId);

/// Delivery step of every (item, receiver) pair. Items are addressed by
/// sender and emission slot; `default` covers edges not listed.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DelayPattern {
    pub default: Option<Delivery>,
    pub edges: BTreeMap<Edge, Delivery>,
}

impl DelayPattern {
    pub fn uniform(d: Delivery) -> Self {
        DelayPattern { default: Some(d), edges: BTreeMap::new() }
    }

    pub fn all_immediate() -> Self {
        Self::uniform(Delivery::Immediate)
    }

    pub fn all_latest() -> Self {
        Self::uniform(Delivery::Latest)
    }

    pub fn with(mut self, item: ItemId, receiver: ProcessId, d: Delivery) -> Self {
        self.edges.insert((item.sender, item.slot, receiver), d);
        self
    }

    pub fn get(&self, item: ItemId, receiver: ProcessId) -> Option<Delivery> {
        self.edges.get(&(item.sender, item.slot, receiver)).copied().or(self.default)
    }

    /// Delivery point of every edge in `edges`, for semantic comparison.
    pub fn points(&self, edges: &[Edge]) -> Vec<Option<Delivery>> {
        edges.iter().map(|&(s, slot, r)| self.get(ItemId { sender: s, slot }, r)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct DelayPatternRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<Delivery>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    edges: Vec<(ProcessId, u8, ProcessId, Delivery)>,
}

impl Serialize for DelayPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DelayPatternRepr {
            default: self.default,
            edges: self.edges.iter().map(|(&(a, k, b), &d)| (a, k, b, d)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DelayPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = DelayPatternRepr::deserialize(d)?;
        Ok(DelayPattern { default: r.default, edges: r.edges.into_iter().map(|(a, k, b, d)| ((a, k, b), d)).collect() })
    }
}

/// The same-round pattern every synchronous execution uses.
pub fn sync_canonical_delay() -> DelayPattern {
    DelayPattern::all_immediate()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `Σ_{f=0..t} C(n,f)·slots^f`.
pub fn failure_pattern_count(n: usize, t: usize, slots: usize) -> usize {
    (0..=t.min(n)).map(|f| binomial(n, f) * slots.pow(f as u32)).sum()
}

/// Every failure pattern with at most `t` crashes over `slots` positions.
pub fn enum_failure_patterns(n: usize, t: usize, slots: usize) -> impl Iterator<Item = FailurePattern> {
    let t = t.min(n);
    let mut out = Vec::with_capacity(failure_pattern_count(n, t, slots));
    fn rec(n: usize, t: usize, slots: usize, from: usize, cur: &mut FailurePattern, out: &mut Vec<FailurePattern>) {
        out.push(cur.clone());
        if cur.f() == t {
            return;
        }
        for i in from..n {
            let pid = ProcessId::from_index(i);
            for slot in 0..slots {
                cur.crashes.insert(pid, slot as u32);
                rec(n, t, slots, i + 1, cur, out);
            }
            cur.crashes.remove(&pid);
        }
    }
    rec(n, t, slots, 0, &mut FailurePattern::none(), &mut out);
    out.into_iter()
}

/// Every `(item, receiver)` edge of the given emission slots.
pub fn delay_edges(emission_slots: &[(ProcessId, u8)], n: usize) -> Vec<Edge> {
    let mut v = Vec::with_capacity(emission_slots.len() * n);
    for &(s, k) in emission_slots {
        for r in 0..n {
            v.push((s, k, ProcessId::from_index(r)));
        }
    }
    v
}

fn from_choices(edges: &[Edge], choices: &[u8]) -> DelayPattern {
    DelayPattern {
        default: None,
        edges: edges.iter().zip(choices).map(|(&e, &c)| (e, Delivery::LATTICE[c as usize])).collect(),
    }
}

/// Representative delay patterns over the three-point lattice
/// (immediate, mid, latest) per edge: exhaustive when `3^edges ≤ budget`,
/// otherwise `budget` distinct samples drawn from `seed`, plus the two
/// extremes.
pub fn enum_delay_patterns(
    emission_slots: &[(ProcessId, u8)],
    n: usize,
    budget: usize,
    seed: u64,
) -> Vec<DelayPattern> {
    let edges = delay_edges(emission_slots, n);
    if edges.is_empty() {
        return alloc::vec![DelayPattern::default()];
    }
    let size = 3usize.checked_pow(edges.len() as u32);
    match size {
        Some(size) if size <= budget => {
            let mut out = Vec::with_capacity(size);
            let mut choices = alloc::vec![0u8; edges.len()];
            loop {
                out.push(from_choices(&edges, &choices));
                let mut i = 0;
                loop {
                    if i == choices.len() {
                        return out;
                    }
                    choices[i] += 1;
                    if choices[i] < 3 {
                        break;
                    }
                    choices[i] = 0;
                    i += 1;
                }
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
            let mut out = Vec::with_capacity(budget + 2);
            while seen.len() < budget {
                let choices: Vec<u8> = (0..edges.len()).map(|_| rng.gen_range(0..3u8)).collect();
                if seen.insert(choices.clone()) {
                    out.push(from_choices(&edges, &choices));
                }
            }
            for (c, extreme) in [(0u8, DelayPattern::all_immediate()), (2u8, DelayPattern::all_latest())] {
                if !seen.contains(&alloc::vec![c; edges.len()]) {
                    out.push(extreme);
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet as Set;

    fn p(i: u16) -> ProcessId {
        ProcessId::new(i)
    }

    #[test]
    fn failure_counts() {
        assert_eq!(enum_failure_patterns(2, 0, 5).count(), 1);
        assert_eq!(enum_failure_patterns(2, 1, 2).count(), 5);
        assert_eq!(enum_failure_patterns(3, 3, 1).count(), 8);
        assert_eq!(failure_pattern_count(2, 1, 2), 5);
        assert_eq!(failure_pattern_count(4, 2, 3), 1 + 4 * 3 + 6 * 9);
    }

    #[test]
    fn failure_patterns_are_distinct_and_bounded() {
        let all: Vec<_> = enum_failure_patterns(4, 2, 3).collect();
        let set: Set<_> = all.iter().cloned().collect();
        assert_eq!(all.len(), set.len());
        assert!(all.iter().all(|fp| fp.validate(4, 2, 3).is_ok()));
    }

    #[test]
    fn delay_counts() {
        assert_eq!(enum_delay_patterns(&[], 3, 100, 0).len(), 1);
        assert_eq!(enum_delay_patterns(&[(p(1), 0)], 2, 100, 0).len(), 9);
        // 2 items x 3 receivers: 729 > 100
        let slots = [(p(1), 0), (p(2), 0)];
        let edges = delay_edges(&slots, 3);
        for seed in 0..20 {
            let v = enum_delay_patterns(&slots, 3, 100, seed);
            assert!((100..=102).contains(&v.len()));
            let points: Set<_> = v.iter().map(|d| d.points(&edges)).collect();
            assert_eq!(points.len(), v.len());
            assert!(points.contains(&DelayPattern::all_immediate().points(&edges)));
            assert!(points.contains(&DelayPattern::all_latest().points(&edges)));
        }
    }

    #[test]
    fn exhaustive_stream_contains_extremes() {
        let slots = [(p(1), 0)];
        let edges = delay_edges(&slots, 2);
        let v = enum_delay_patterns(&slots, 2, 100, 0);
        let imm = DelayPattern::all_immediate().points(&edges);
        let late = DelayPattern::all_latest().points(&edges);
        assert!(v.iter().any(|d| d.points(&edges) == imm));
        assert!(v.iter().any(|d| d.points(&edges) == late));
    }

    #[test]
    fn resolution() {
        assert_eq!(Delivery::Immediate.resolve(3, 8), 3);
        assert_eq!(Delivery::Mid.resolve(1, 8), 4);
        assert_eq!(Delivery::Mid.resolve(6, 8), 6);
        assert_eq!(Delivery::Mid.resolve(0, 5), 3);
        assert_eq!(Delivery::Latest.resolve(0, 8), 8);
    }

    #[test]
    fn failure_validation() {
        let fp = FailurePattern::none().crash(p(1), 0).crash(p(2), 1);
        assert_eq!(fp.validate(3, 1, 3), Err(Error::TooManyCrashes { f: 2, t: 1 }));
        assert!(fp.validate(3, 2, 3).is_ok());
        assert!(FailurePattern::none().crash(p(4), 0).validate(3, 2, 3).is_err());
        assert!(FailurePattern::none().crash(p(1), 3).validate(3, 2, 3).is_err());
    }
}
