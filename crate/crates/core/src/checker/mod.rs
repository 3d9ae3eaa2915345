//! Safety and completeness verdicts over explored executions.

mod explore;
mod table;
mod witness;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::TraceHeader;
use crate::outputsets::{observation1_bounds, OutputSet, SetOfOutputSets, SystemConfig};

pub use explore::{concretize, explore, explore_against, explore_exhaustive, explore_samples, sample_triple, Explorer};
pub use table::{check_cell, check_table, table_cells, CellReport, TableReport};
pub use witness::{thm2_instance, witness_thm2, witness_thm3, Construction, WitnessSchedule};

/// How much of the execution space [`explore`] may visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationBudget {
    /// `Some(true)` forces exhaustive search, `Some(false)` sampling; `None`
    /// searches exhaustively and falls back to sampling past `state_cap`.
    pub exhaustive: Option<bool>,
    /// Distinct branching states the exhaustive search may expand.
    pub state_cap: usize,
    /// Random `(seed, fp, dp)` triples drawn in sampled mode.
    pub samples: usize,
    pub sample_seed: u64,
    pub horizon: Option<u32>,
    pub deadline: Option<u32>,
}

impl Default for ExplorationBudget {
    fn default() -> Self {
        ExplorationBudget {
            exhaustive: None,
            state_cap: 1_000_000,
            samples: 10_000,
            sample_seed: 0,
            horizon: None,
            deadline: None,
        }
    }
}

impl ExplorationBudget {
    pub fn exhaustive(state_cap: usize) -> Self {
        ExplorationBudget { exhaustive: Some(true), state_cap, ..Self::default() }
    }

    pub fn sampled(samples: usize, sample_seed: u64) -> Self {
        ExplorationBudget { exhaustive: Some(false), samples, sample_seed, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Safety {
    Ok,
    Violated,
    /// No violation seen, but some execution hit the horizon.
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Completeness {
    Complete,
    NotWitnessed { missing: SetOfOutputSets },
}

/// An execution producing `output_set`, replayable from `header`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub output_set: OutputSet,
    pub header: TraceHeader,
}

/// Offending output set; `header` is absent only if no seed reproducing
/// the execution's picks was found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub output_set: OutputSet,
    pub header: Option<TraceHeader>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub target: SetOfOutputSets,
    pub observed: SetOfOutputSets,
    pub violations: Vec<Violation>,
    /// Executions whose output set lies outside the target.
    pub violation_count: u64,
    pub witnesses: Vec<Witness>,
    pub horizon_hits: u64,
    /// Finalized executions (or, exhaustively, distinct execution leaves).
    pub executions: u64,
    pub states: u64,
    pub exhaustive: bool,
    pub budget_exhausted: bool,
}

fn header_key(h: &TraceHeader) -> impl Ord + '_ {
    (h.seed, &h.fp, &h.dp)
}

impl Verdict {
    pub fn empty(target: SetOfOutputSets) -> Self {
        Verdict {
            target,
            observed: SetOfOutputSets::EMPTY,
            violations: Vec::new(),
            violation_count: 0,
            witnesses: Vec::new(),
            horizon_hits: 0,
            executions: 0,
            states: 0,
            exhaustive: false,
            budget_exhausted: false,
        }
    }

    pub fn safety(&self) -> Safety {
        if self.violation_count > 0 {
            Safety::Violated
        } else if self.horizon_hits > 0 {
            Safety::Indeterminate
        } else {
            Safety::Ok
        }
    }

    pub fn completeness(&self) -> Completeness {
        let missing = self.target.difference(self.observed);
        if missing.is_empty() {
            Completeness::Complete
        } else {
            Completeness::NotWitnessed { missing }
        }
    }

    pub fn safety_ok(&self) -> bool {
        self.safety() == Safety::Ok
    }

    pub fn completeness_ok(&self) -> bool {
        self.completeness() == Completeness::Complete
    }

    pub fn passed(&self) -> bool {
        self.safety_ok() && self.completeness_ok()
    }

    pub fn witness(&self, o: OutputSet) -> Option<&TraceHeader> {
        self.witnesses.iter().find(|w| w.output_set == o).map(|w| &w.header)
    }

    /// Records one finalized execution.
    pub fn record(&mut self, o: OutputSet, header: impl FnOnce() -> Option<TraceHeader>) {
        self.executions += 1;
        let fresh = !self.observed.contains(o);
        self.observed = self.observed.with(o);
        if !self.target.contains(o) {
            self.violation_count += 1;
            if fresh {
                self.violations.push(Violation { output_set: o, header: header() });
            }
        } else if fresh {
            if let Some(header) = header() {
                self.witnesses.push(Witness { output_set: o, header });
            }
        }
    }

    /// Combines verdicts over disjoint parts of one exploration.
    pub fn merge(mut self, other: Verdict) -> Verdict {
        debug_assert_eq!(self.target, other.target);
        self.observed = self.observed.union(other.observed);
        self.violation_count += other.violation_count;
        self.horizon_hits += other.horizon_hits;
        self.executions += other.executions;
        self.states += other.states;
        self.exhaustive &= other.exhaustive;
        self.budget_exhausted |= other.budget_exhausted;
        for w in other.witnesses {
            match self.witnesses.iter_mut().find(|x| x.output_set == w.output_set) {
                Some(x) => {
                    if header_key(&w.header) < header_key(&x.header) {
                        *x = w;
                    }
                }
                None => self.witnesses.push(w),
            }
        }
        for v in other.violations {
            match self.violations.iter_mut().find(|x| x.output_set == v.output_set) {
                Some(x) => {
                    let better = match (&v.header, &x.header) {
                        (Some(a), Some(b)) => header_key(a) < header_key(b),
                        (Some(_), None) => true,
                        _ => false,
                    };
                    if better {
                        *x = v;
                    }
                }
                None => self.violations.push(v),
            }
        }
        self.witnesses.sort_by_key(|w| w.output_set);
        self.violations.sort_by_key(|v| v.output_set);
        self
    }
}

/// Outcome of the cardinality pre-check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "screen", content = "reason", rename_all = "snake_case")]
pub enum Screen {
    Pass,
    Fail(String),
}

/// Fails fast when `cfg` has too few processes, or too few correct ones,
/// for the largest and smallest output sets of `o`.
pub fn bounds_screen(o: SetOfOutputSets, cfg: SystemConfig) -> Result<Screen, Error> {
    let (max, min) = observation1_bounds(o)?;
    if cfg.n < max {
        return Ok(Screen::Fail(format!("n ≥ {max} required, n={}", cfg.n)));
    }
    if cfg.n - cfg.t < min {
        return Ok(Screen::Fail(format!("n−t ≥ {min} required, n−t={}", cfg.n - cfg.t)));
    }
    Ok(Screen::Pass)
}
