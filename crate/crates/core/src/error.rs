use alloc::string::String;

use crate::outputsets::Timing;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("crash bound t={t} exceeds process count n={n}")]
    CrashBoundExceedsProcesses { n: usize, t: usize },

    #[error("mask {0:#x} is not a set of output sets")]
    InvalidMask(u8),

    #[error("line {0} is outside 1..=16")]
    InvalidLine(u8),

    #[error("line 16 has no implementing algorithm")]
    UnsolvableLine,

    #[error("the empty set of output sets is excluded")]
    EmptyTarget,

    #[error("{algorithm} does not run under {timing} timing")]
    TimingMismatch { algorithm: String, timing: Timing },

    #[error("failure pattern crashes {f} processes but t={t}")]
    TooManyCrashes { f: usize, t: usize },

    #[error("process p{pid} is outside 1..={n}")]
    UnknownProcess { pid: u16, n: usize },

    #[error("crash slot {slot} of p{pid} is outside 0..{slots}")]
    InvalidCrashSlot { pid: u16, slot: u32, slots: usize },

    #[error("no delivery scheduled for item {item} to p{receiver}")]
    MissingDelivery { item: String, receiver: u16 },

    #[error("item {item} delivered to p{receiver} at step {step}, before it was communicated at step {emitted}")]
    DeliveryBeforeEmission { item: String, receiver: u16, step: u32, emitted: u32 },

    #[error("item {item} delivered to p{receiver} at step {step}, past the horizon {horizon}")]
    DeliveryPastHorizon { item: String, receiver: u16, step: u32, horizon: u32 },

    #[error("roles cannot be assigned for n={n} t={t}: {reason}")]
    Roles { n: usize, t: usize, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exploration exceeded its budget of {0} states")]
    BudgetExhausted(usize),

    #[error("no seed below {0} reproduces the requested picks")]
    SeedSearch(u64),

    #[error("replay diverged: {0}")]
    ReplayDiverged(String),

    #[error("construction not applicable: {0}")]
    Inapplicable(String),
}
