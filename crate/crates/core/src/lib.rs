//! Simulator and solvability checker for binary-output tasks in
//! crash-prone systems.
//!
//! Six algorithms run over an abstract communicate/observe medium, in both
//! a synchronous round model and an asynchronous model with discretized
//! delivery delays. The [`checker`] explores their executions and compares
//! the set of output sets they produce against the characterization table.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algorithms;
pub mod checker;
pub mod choice;
pub mod error;
pub mod kernel;
pub mod medium;
pub mod outputsets;
pub mod patterns;
pub mod program;

pub use algorithms::{instance_for_line, make_roles, AlgorithmInstance, AlgorithmKind, RoleAssignment, ValueSet};
pub use error::Error;
pub use kernel::{
    replay, run, run_async, run_sync, Event, EventKind, ExecutionTrace, ItemId, Kernel, ProcessId, RunOptions,
    Termination, TraceHeader,
};
pub use medium::{medium_check, MediumViolation};
pub use outputsets::{
    classify_line, line_members, observation1_bounds, output_set, table_rows, tight_condition, Bit, Condition, Output,
    OutputSet, OutputVector, SetOfOutputSets, SystemConfig, Timing,
};
pub use patterns::{
    enum_delay_patterns, enum_failure_patterns, sync_canonical_delay, DelayPattern, Delivery, FailurePattern,
};
