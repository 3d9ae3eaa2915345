//! The six implementing algorithms, their instantiation parameters, role
//! assignments, and compilation to step programs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::ProcessId;
use crate::outputsets::{line_members, Bit, Output, OutputSet, SetOfOutputSets, Timing};
use crate::program::{Cond, Expr, Instr, MsgExpr, Pattern, Phase, Program, ProgramBuilder};

/// Non-empty subset of `{0, 1, ⊥}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ValueSet(u8);

impl ValueSet {
    const ZERO: u8 = 1;
    const ONE: u8 = 2;
    const BOTTOM: u8 = 4;

    pub fn new(zero: bool, one: bool, bottom: bool) -> Result<Self, Error> {
        let bits = u8::from(zero) * Self::ZERO + u8::from(one) * Self::ONE + u8::from(bottom) * Self::BOTTOM;
        if bits == 0 {
            return Err(Error::Precondition("the value set V must be non-empty".into()));
        }
        Ok(ValueSet(bits))
    }

    pub fn contains(self, v: Output) -> bool {
        let bit = match v {
            Some(Bit::Zero) => Self::ZERO,
            Some(Bit::One) => Self::ONE,
            None => Self::BOTTOM,
        };
        self.0 & bit != 0
    }

    /// Members in the order 0, 1, ⊥.
    pub fn options(self) -> Vec<Output> {
        [Some(Bit::Zero), Some(Bit::One), None].into_iter().filter(|v| self.contains(*v)).collect()
    }

    pub fn has_bottom(self) -> bool {
        self.contains(None)
    }

    /// Parses `"0,1,⊥"`-style lists; `_` and `bot` are accepted for ⊥.
    pub fn parse(s: &str) -> Result<Self, Error> {
        let (mut z, mut o, mut b) = (false, false, false);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "0" => z = true,
                "1" => o = true,
                "⊥" | "_" | "bot" | "none" => b = true,
                other => return Err(Error::Precondition(format!("unknown value '{other}' in V"))),
            }
        }
        ValueSet::new(z, o, b)
    }
}

impl fmt::Display for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in self.options() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            match v {
                Some(b) => write!(f, "{b}")?,
                None => f.write_str("⊥")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl TryFrom<String> for ValueSet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        ValueSet::parse(&s)
    }
}

impl From<ValueSet> for String {
    fn from(v: ValueSet) -> String {
        format!("{v}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmKind {
    /// Communication-less; every process picks from `values`.
    AllOutput {
        values: ValueSet,
    },
    /// Communication-less; only the distinguished process acts.
    SingleOutput {
        no_out: bool,
    },
    /// Default value `v`; the distinguished process may flip it.
    TimingAdaptive {
        v: Bit,
        no_out: bool,
    },
    AsyncDisagreement {
        no_out: bool,
    },
    SyncDisagreement {
        no_out: bool,
    },
    SyncConsensus,
}

impl AlgorithmKind {
    pub fn supports(self, timing: Timing) -> bool {
        match self {
            AlgorithmKind::AsyncDisagreement { .. } => timing == Timing::Async,
            AlgorithmKind::SyncDisagreement { .. } | AlgorithmKind::SyncConsensus => timing == Timing::Sync,
            _ => true,
        }
    }

    /// Short identifier used on the command line and in trace headers.
    pub fn id(self) -> &'static str {
        match self {
            AlgorithmKind::AllOutput { .. } => "all_output",
            AlgorithmKind::SingleOutput { .. } => "single_output",
            AlgorithmKind::TimingAdaptive { .. } => "timing_adaptive",
            AlgorithmKind::AsyncDisagreement { .. } => "async_disagreement",
            AlgorithmKind::SyncDisagreement { .. } => "sync_disagreement",
            AlgorithmKind::SyncConsensus => "sync_consensus",
        }
    }

    /// The set of output sets this instance is proven to implement (when
    /// run under its tight condition).
    pub fn claimed_set(self) -> SetOfOutputSets {
        use OutputSet::*;
        match self {
            AlgorithmKind::AllOutput { values } => {
                let zero = values.contains(Some(Bit::Zero));
                let one = values.contains(Some(Bit::One));
                let mut o = SetOfOutputSets::EMPTY;
                if values.has_bottom() {
                    o = o.with(Empty);
                }
                if zero {
                    o = o.with(Zero);
                }
                if one {
                    o = o.with(One);
                }
                if zero && one {
                    o = o.with(Both);
                }
                o
            }
            AlgorithmKind::SingleOutput { no_out } => {
                let o = SetOfOutputSets::of(&[Zero, One]);
                if no_out {
                    o.with(Empty)
                } else {
                    o
                }
            }
            AlgorithmKind::TimingAdaptive { v, no_out } => {
                let o = SetOfOutputSets::of(&[OutputSet::singleton(v), Both]);
                if no_out {
                    o.with(Empty)
                } else {
                    o
                }
            }
            AlgorithmKind::AsyncDisagreement { no_out } | AlgorithmKind::SyncDisagreement { no_out } => {
                let o = SetOfOutputSets::of(&[Both]);
                if no_out {
                    o.with(Empty)
                } else {
                    o
                }
            }
            AlgorithmKind::SyncConsensus => SetOfOutputSets::of(&[Zero, One]),
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmKind::AllOutput { values } => write!(f, "all_output(V={{{values}}})"),
            AlgorithmKind::SingleOutput { no_out } => write!(f, "single_output(no_out={no_out})"),
            AlgorithmKind::TimingAdaptive { v, no_out } => write!(f, "timing_adaptive(v={v}, no_out={no_out})"),
            AlgorithmKind::AsyncDisagreement { no_out } => write!(f, "async_disagreement(no_out={no_out})"),
            AlgorithmKind::SyncDisagreement { no_out } => write!(f, "sync_disagreement(no_out={no_out})"),
            AlgorithmKind::SyncConsensus => f.write_str("sync_consensus"),
        }
    }
}

/// Deterministic role assignment of an instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "roles", rename_all = "snake_case")]
pub enum RoleAssignment {
    Symmetric,
    Distinguished { p: ProcessId },
    Partition { p0: Vec<ProcessId>, p1: Vec<ProcessId>, unknown: Vec<ProcessId>, init: Vec<ProcessId> },
    Sequences { s0: Vec<ProcessId>, s1: Vec<ProcessId>, init: Vec<ProcessId> },
}

fn ids(range: core::ops::Range<usize>) -> Vec<ProcessId> {
    range.map(ProcessId::from_index).collect()
}

/// Partition block sizes `(|P0|, |P1|, |P?|)` before the surplus is added.
fn partition_sizes(t: usize) -> (usize, usize, usize) {
    if t.is_multiple_of(2) {
        (t / 2 + 1, t / 2, t / 2 + 1)
    } else {
        ((t - 1) / 2 + 1, t.div_ceil(2), (t - 1) / 2 + 1)
    }
}

fn partition(n: usize, t: usize, (a, b, c): (usize, usize, usize)) -> RoleAssignment {
    let a = a + (n - a - b - c);
    RoleAssignment::Partition { p0: ids(0..a), p1: ids(a..a + b), unknown: ids(a + b..n), init: ids(0..(t + 1).min(n)) }
}

fn sequences(n: usize, t: usize) -> RoleAssignment {
    let (mut s0, mut s1) = (Vec::new(), Vec::new());
    for i in 0..n {
        // p1, p3, ... form the longer sequence
        if i % 2 == 0 {
            s1.push(ProcessId::from_index(i));
        } else {
            s0.push(ProcessId::from_index(i));
        }
    }
    RoleAssignment::Sequences { s0, s1, init: ids(0..(t + 1).min(n)) }
}

/// Canonical lowest-index role assignment; rejects `(n, t)` where the
/// required block sizes cannot be met.
pub fn make_roles(kind: AlgorithmKind, n: usize, t: usize) -> Result<RoleAssignment, Error> {
    let reject = |reason: &str| Error::Roles { n, t, reason: reason.into() };
    if t > n {
        return Err(Error::CrashBoundExceedsProcesses { n, t });
    }
    match kind {
        AlgorithmKind::AllOutput { .. } | AlgorithmKind::SyncConsensus => Ok(RoleAssignment::Symmetric),
        AlgorithmKind::SingleOutput { .. } | AlgorithmKind::TimingAdaptive { .. } => {
            if n == 0 {
                return Err(reject("a distinguished process needs n >= 1"));
            }
            Ok(RoleAssignment::Distinguished { p: ProcessId::from_index(0) })
        }
        AlgorithmKind::AsyncDisagreement { .. } => {
            if 2 * n <= 3 * t + 2 || n < 2 {
                return Err(reject("2n > 3t+2 and n >= 2 are required"));
            }
            Ok(partition(n, t, partition_sizes(t)))
        }
        AlgorithmKind::SyncDisagreement { .. } => {
            if n < t + 2 || n < 2 {
                return Err(reject("n >= t+2 and n >= 2 are required"));
            }
            Ok(sequences(n, t))
        }
    }
}

/// Role assignment that fills the same blocks as far as `n` allows, for
/// running an algorithm outside its tight region.
pub fn make_roles_permissive(kind: AlgorithmKind, n: usize, t: usize) -> Result<RoleAssignment, Error> {
    if t > n {
        return Err(Error::CrashBoundExceedsProcesses { n, t });
    }
    match kind {
        AlgorithmKind::AsyncDisagreement { .. } => {
            if n < 2 {
                return Err(Error::Roles { n, t, reason: "n >= 2 is required".into() });
            }
            let (mut a, mut b, mut c) = partition_sizes(t);
            while a + b + c > n {
                if c > 0 && c >= a {
                    c -= 1;
                } else if a > 1 {
                    a -= 1;
                } else if b > 1 {
                    b -= 1;
                } else {
                    c -= 1;
                }
            }
            Ok(partition(n, t, (a, b, c)))
        }
        AlgorithmKind::SyncDisagreement { .. } => {
            if n == 0 {
                return Err(Error::Roles { n, t, reason: "n >= 1 is required".into() });
            }
            Ok(sequences(n, t))
        }
        other => make_roles(other, n, t),
    }
}

/// An algorithm together with its role assignment for a given `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgorithmInstance {
    #[serde(flatten)]
    pub kind: AlgorithmKind,
    pub n: usize,
    pub assignment: RoleAssignment,
}

impl AlgorithmInstance {
    pub fn new(kind: AlgorithmKind, n: usize, t: usize) -> Result<Self, Error> {
        Ok(AlgorithmInstance { kind, n, assignment: make_roles(kind, n, t)? })
    }

    pub fn permissive(kind: AlgorithmKind, n: usize, t: usize) -> Result<Self, Error> {
        Ok(AlgorithmInstance { kind, n, assignment: make_roles_permissive(kind, n, t)? })
    }

    /// The instance the characterization table names for `line`, with roles
    /// for `(n, t)`.
    pub fn for_line(line: u8, timing: Timing, n: usize, t: usize) -> Result<Self, Error> {
        AlgorithmInstance::new(instance_for_line(line, timing)?, n, t)
    }

    /// Compiled program of every process, in id order.
    pub fn programs(&self) -> Vec<Program> {
        (0..self.n).map(|i| step_program(self, ProcessId::from_index(i))).collect()
    }

    /// Number of synchronous rounds the algorithm runs for.
    pub fn rounds(&self) -> u32 {
        match self.kind {
            AlgorithmKind::SyncDisagreement { .. } => (self.n.div_ceil(2) as u32).max(1),
            _ => 1,
        }
    }

    /// Crash positions per process: every counted step plus "after the last".
    pub fn crash_slots(&self) -> usize {
        self.programs().iter().map(Program::max_steps).max().unwrap_or(0) + 1
    }

    /// Potential emissions `(sender, slot)` of the instance.
    pub fn emission_slots(&self) -> Vec<(ProcessId, u8)> {
        let mut out = Vec::new();
        for (i, p) in self.programs().iter().enumerate() {
            for slot in 0..p.max_emissions() {
                out.push((ProcessId::from_index(i), slot as u8));
            }
        }
        out
    }
}

/// Algorithm the table's sufficiency column names for `line`.
pub fn instance_for_line(line: u8, timing: Timing) -> Result<AlgorithmKind, Error> {
    use AlgorithmKind::*;
    let v = |z, o, b| ValueSet::new(z, o, b).expect("non-empty");
    Ok(match line {
        1 => AllOutput { values: v(true, true, true) },
        2 => AllOutput { values: v(true, true, false) },
        3 => TimingAdaptive { v: Bit::One, no_out: true },
        4 => TimingAdaptive { v: Bit::One, no_out: false },
        5 => TimingAdaptive { v: Bit::Zero, no_out: true },
        6 => TimingAdaptive { v: Bit::Zero, no_out: false },
        7 | 8 => {
            let no_out = line == 7;
            match timing {
                Timing::Async => AsyncDisagreement { no_out },
                Timing::Sync => SyncDisagreement { no_out },
            }
        }
        9 => SingleOutput { no_out: true },
        10 => match timing {
            Timing::Async => SingleOutput { no_out: false },
            Timing::Sync => SyncConsensus,
        },
        11 => AllOutput { values: v(false, true, true) },
        12 => AllOutput { values: v(false, true, false) },
        13 => AllOutput { values: v(true, false, true) },
        14 => AllOutput { values: v(true, false, false) },
        15 => AllOutput { values: v(false, false, true) },
        16 => return Err(Error::UnsolvableLine),
        _ => return Err(Error::InvalidLine(line)),
    })
}

/// Target set of output sets of a line, for checking an instance built by
/// [`instance_for_line`].
pub fn line_target(line: u8) -> Result<SetOfOutputSets, Error> {
    line_members(line)
}

const R_PICK: u8 = 0;
const R_VALUE: u8 = 1;

fn coin() -> Vec<Output> {
    alloc::vec![Some(Bit::Zero), Some(Bit::One)]
}

fn picked_zero() -> Cond {
    Cond::Equals(Expr::Reg(R_PICK), Some(Bit::Zero))
}

/// Compiles the code `pid` runs under `instance`.
pub fn step_program(instance: &AlgorithmInstance, pid: ProcessId) -> Program {
    let mut b = ProgramBuilder::new();
    match (instance.kind, &instance.assignment) {
        (AlgorithmKind::AllOutput { values }, _) => {
            b.push("all_output:pick", Instr::Pick { dst: R_VALUE, from: values.options() });
            b.if_then("all_output:output", Cond::Defined(Expr::Reg(R_VALUE)), |b| {
                b.push("all_output:output", Instr::Output(Expr::Reg(R_VALUE)));
            });
        }
        (AlgorithmKind::SingleOutput { no_out }, RoleAssignment::Distinguished { p }) => {
            if *p == pid {
                let values = ValueSet::new(true, true, no_out).expect("non-empty");
                b.push("single_output:pick", Instr::Pick { dst: R_VALUE, from: values.options() });
                b.if_then("single_output:output", Cond::Defined(Expr::Reg(R_VALUE)), |b| {
                    b.push("single_output:output", Instr::Output(Expr::Reg(R_VALUE)));
                });
            }
        }
        (AlgorithmKind::TimingAdaptive { v, no_out }, RoleAssignment::Distinguished { p }) => {
            let body = |b: &mut ProgramBuilder| {
                if *p == pid {
                    b.push("timing_adaptive:wait", Instr::WaitTimer);
                    b.if_else(
                        "timing_adaptive:observed",
                        Cond::Observed(Pattern::Output(v)),
                        |b| {
                            b.push("timing_adaptive:flip", Instr::Pick { dst: R_VALUE, from: coin() });
                            b.push("timing_adaptive:flip", Instr::Output(Expr::Reg(R_VALUE)));
                        },
                        |b| {
                            b.push("timing_adaptive:default", Instr::Output(Expr::bit(v)));
                        },
                    );
                } else {
                    b.push("timing_adaptive:output", Instr::Output(Expr::bit(v)));
                    b.push("timing_adaptive:communicate", Instr::Communicate(MsgExpr::Output(Expr::bit(v))));
                }
            };
            if no_out {
                b.push("timing_adaptive:gate", Instr::Pick { dst: R_PICK, from: coin() });
                b.if_then("timing_adaptive:gate", picked_zero(), body);
            } else {
                body(&mut b);
            }
        }
        (AlgorithmKind::AsyncDisagreement { no_out }, RoleAssignment::Partition { p0, p1, unknown, init }) => {
            if no_out && init.contains(&pid) {
                b.push("async_disagreement:init", Instr::Pick { dst: R_PICK, from: coin() });
                b.if_then("async_disagreement:init", picked_zero(), |b| {
                    b.push("async_disagreement:init", Instr::Communicate(MsgExpr::Init));
                });
            }
            let side = if p0.contains(&pid) {
                Some(Bit::Zero)
            } else if p1.contains(&pid) {
                Some(Bit::One)
            } else {
                None
            };
            if let Some(v) = side {
                if no_out {
                    b.push("async_disagreement:wait_init", Instr::WaitUntil(Cond::Observed(Pattern::Init)));
                }
                b.push("async_disagreement:output", Instr::Output(Expr::bit(v)));
                b.push("async_disagreement:communicate", Instr::Communicate(MsgExpr::Output(Expr::bit(v))));
            } else if unknown.contains(&pid) {
                b.push("async_disagreement:wait_output", Instr::WaitUntil(Cond::Observed(Pattern::AnyOutput)));
                b.push(
                    "async_disagreement:output_opposite",
                    Instr::Output(Expr::complement(Expr::FirstObservedOutput)),
                );
            }
        }
        (AlgorithmKind::SyncDisagreement { no_out }, RoleAssignment::Sequences { s0, s1, init }) => {
            if no_out && init.contains(&pid) {
                b.push("sync_disagreement:init", Instr::AwaitRound { round: 1, phase: Phase::Communication });
                b.push("sync_disagreement:init", Instr::Pick { dst: R_PICK, from: coin() });
                b.if_then("sync_disagreement:init", picked_zero(), |b| {
                    b.push("sync_disagreement:init", Instr::Communicate(MsgExpr::Init));
                });
            }
            let position = |s: &[ProcessId]| s.iter().position(|q| *q == pid);
            let (v, i) = match (position(s0), position(s1)) {
                (Some(i), _) => (Bit::Zero, i + 1),
                (None, Some(i)) => (Bit::One, i + 1),
                (None, None) => return b.build(),
            };
            let rounds = instance.rounds() as usize;
            b.push("sync_disagreement:round_i", Instr::AwaitRound { round: i as u32, phase: Phase::Computation });
            let choose = |b: &mut ProgramBuilder| {
                b.push(
                    "sync_disagreement:choose",
                    Instr::Assign {
                        dst: R_VALUE,
                        expr: Expr::if_observed(Pattern::Output(v), Expr::bit(v.complement()), Expr::bit(v)),
                    },
                );
                b.push("sync_disagreement:output", Instr::Output(Expr::Reg(R_VALUE)));
            };
            if no_out {
                b.if_then("sync_disagreement:cond", Cond::Observed(Pattern::Init), choose);
            } else {
                choose(&mut b);
            }
            if i < rounds {
                b.push(
                    "sync_disagreement:round_i+1",
                    Instr::AwaitRound { round: i as u32 + 1, phase: Phase::Communication },
                );
                b.if_then("sync_disagreement:communicate", Cond::Defined(Expr::Reg(R_VALUE)), |b| {
                    b.push("sync_disagreement:communicate", Instr::Communicate(MsgExpr::Output(Expr::Reg(R_VALUE))));
                });
            }
        }
        (AlgorithmKind::SyncConsensus, _) => {
            b.push("sync_consensus:pick", Instr::Pick { dst: R_VALUE, from: coin() });
            b.push("sync_consensus:propose", Instr::Communicate(MsgExpr::Propose(Expr::Reg(R_VALUE))));
            b.push("sync_consensus:compute", Instr::AwaitRound { round: 1, phase: Phase::Computation });
            b.if_else(
                "sync_consensus:decide",
                Cond::Observed(Pattern::Propose(Bit::Zero)),
                |b| {
                    b.push("sync_consensus:output_0", Instr::Output(Expr::bit(Bit::Zero)));
                },
                |b| {
                    b.push("sync_consensus:output_1", Instr::Output(Expr::bit(Bit::One)));
                },
            );
        }
        // role shape does not match the kind; the process does nothing
        _ => {}
    }
    b.build()
}
