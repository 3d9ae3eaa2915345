//! Deterministic execution engine.
//!
//! A [`State`] is a resumable interpreter: [`State::resume`] runs until the
//! execution needs an outside decision (a pick, whether to crash a process
//! here, when an item reaches a receiver) and hands back a [`Request`].
//! The run-mode drivers answer requests from a seed, a failure pattern and
//! a delay pattern; the explorer in [`crate::checker`] branches on them.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::algorithms::AlgorithmInstance;
use crate::choice::{ChoiceStream, Fingerprinter};
use crate::error::Error;
use crate::outputsets::{Bit, Output, OutputSet, OutputVector, SystemConfig, Timing};
use crate::patterns::{sync_canonical_delay, DelayPattern, Delivery, FailurePattern};
use crate::program::{Cond, Expr, Instr, Msg, MsgExpr, Phase, Program, REGISTERS};

/// One-based process identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(u16);

impl ProcessId {
    pub fn new(id: u16) -> Self {
        debug_assert!(id >= 1, "process ids start at 1");
        ProcessId(id)
    }

    pub fn from_index(i: usize) -> Self {
        ProcessId(i as u16 + 1)
    }

    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    pub fn get(self) -> u16 {
        self.0
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Debug for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A communicated item, addressed by sender and emission slot.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemId {
    pub sender: ProcessId,
    pub slot: u8,
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.sender, self.slot)
    }
}

impl fmt::Debug for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    /// Every non-crashed process ran to the end of its code.
    AllDone,
    /// Nothing left to deliver and every remaining process waits forever.
    Quiescent,
    /// Logical time ran past the horizon.
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Running,
    /// Waiting at the given program line.
    Blocked {
        line: u16,
    },
    Done,
    Crashed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// A counted program line completed.
    Step {
        line: u16,
    },
    Pick {
        line: u16,
        value: Output,
    },
    Communicate {
        item: ItemId,
        msg: Msg,
    },
    Observe {
        item: ItemId,
        msg: Msg,
    },
    Output {
        value: Bit,
    },
    Crash {
        slot: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    /// Delivery step under asynchrony, round under synchrony.
    pub time: u32,
    pub pid: ProcessId,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Everything needed to reproduce an execution.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceHeader {
    pub instance: AlgorithmInstance,
    pub config: SystemConfig,
    pub seed: u64,
    pub fp: FailurePattern,
    pub dp: DelayPattern,
    pub horizon: u32,
    pub deadline: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub header: TraceHeader,
    pub events: Vec<Event>,
    pub outputs: OutputVector,
    pub termination: Termination,
    pub statuses: Vec<Status>,
}

impl ExecutionTrace {
    pub fn output_set(&self) -> OutputSet {
        self.outputs.output_set()
    }

    pub fn crashed(&self, pid: ProcessId) -> bool {
        self.statuses[pid.index()] == Status::Crashed
    }
}

/// Logical-time parameters of asynchronous runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Last logical delivery step; defaults to `max(4n, 1)`.
    pub horizon: Option<u32>,
    /// Step at which timed waits expire; defaults to the horizon.
    pub deadline: Option<u32>,
}

/// Immutable per-instance context shared by every execution.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub instance: AlgorithmInstance,
    pub config: SystemConfig,
    pub horizon: u32,
    pub deadline: u32,
    pub rounds: u32,
    programs: Vec<Program>,
    reads: Vec<Vec<u8>>,
    slots: usize,
}

impl Kernel {
    pub fn new(instance: AlgorithmInstance, config: SystemConfig, opts: RunOptions) -> Result<Self, Error> {
        if config.t > config.n {
            return Err(Error::CrashBoundExceedsProcesses { n: config.n, t: config.t });
        }
        if instance.n != config.n {
            return Err(Error::Precondition(format!("instance built for n={} run with n={}", instance.n, config.n)));
        }
        if !instance.kind.supports(config.timing) {
            return Err(Error::TimingMismatch { algorithm: format!("{}", instance.kind), timing: config.timing });
        }
        let horizon = opts.horizon.unwrap_or((4 * config.n as u32).max(1));
        let programs = instance.programs();
        let slots = programs.iter().map(Program::max_steps).max().unwrap_or(0) + 1;
        Ok(Kernel {
            reads: programs.iter().map(Program::reads_from).collect(),
            rounds: instance.rounds(),
            deadline: opts.deadline.unwrap_or(horizon),
            horizon,
            instance,
            config,
            programs,
            slots,
        })
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn t(&self) -> usize {
        self.config.t
    }

    pub fn timing(&self) -> Timing {
        self.config.timing
    }

    /// Number of crash slots (counted steps of the longest program, plus one).
    pub fn crash_slots(&self) -> usize {
        self.slots
    }

    pub fn program(&self, pid: ProcessId) -> &Program {
        &self.programs[pid.index()]
    }

    pub fn start(&self, logging: bool) -> State {
        State {
            now: if self.timing() == Timing::Sync { 1 } else { 0 },
            phase: Phase::Communication,
            cursor: Cursor::Run(0),
            procs: alloc::vec![Proc::default(); self.n()],
            fresh: Vec::new(),
            pending: Vec::new(),
            crashes: 0,
            answer: None,
            log: if logging { Some(Vec::new()) } else { None },
        }
    }

    pub fn header(&self, seed: u64, fp: FailurePattern, dp: DelayPattern) -> TraceHeader {
        TraceHeader {
            instance: self.instance.clone(),
            config: self.config,
            seed,
            fp,
            dp,
            horizon: self.horizon,
            deadline: self.deadline,
        }
    }
}

/// A decision the execution needs before it can continue.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    /// Index into `options` candidates for the `counter`-th pick of `pid`.
    Pick { pid: ProcessId, line: u16, counter: u32, options: usize },
    /// Whether `pid` crashes now, having executed `slot` counted steps.
    Crash { pid: ProcessId, slot: u32, at_end: bool },
    /// Delivery step of `item` at `receiver`.
    /// `relevant` is false when the receiver's remaining code never reads
    /// payloads of this kind, so the delivery time cannot affect it.
    Delay { item: ItemId, receiver: ProcessId, emitted: u32, relevant: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Answer {
    Pick(usize),
    Crash(bool),
    Deliver(u32),
}

pub enum Next {
    Choice(Request),
    Finished(Termination),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Cursor {
    Run(u16),
    Schedule { item: u16, receiver: u16 },
    Deliver,
    SyncDeliver,
    Finished(Termination),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Proc {
    pc: u16,
    executed: u32,
    regs: [Output; REGISTERS],
    output: Output,
    status: Status,
    observed: Vec<(ItemId, Msg)>,
    emitted: u8,
    picks: u32,
    /// Executed-step count at which the crash decision was last taken.
    crash_checked: Option<u32>,
}

impl Default for Proc {
    fn default() -> Self {
        Proc {
            pc: 0,
            executed: 0,
            regs: [None; REGISTERS],
            output: None,
            status: Status::Running,
            observed: Vec::new(),
            emitted: 0,
            picks: 0,
            crash_checked: None,
        }
    }
}

impl Proc {
    fn live(&self) -> bool {
        !matches!(self.status, Status::Done | Status::Crashed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Pending {
    due: u32,
    receiver: ProcessId,
    item: ItemId,
    msg: Msg,
}

enum Flow {
    Need(Request),
    Yield,
}

/// Interpretation state of one execution.
#[derive(Clone, Debug)]
pub struct State {
    now: u32,
    phase: Phase,
    cursor: Cursor,
    procs: Vec<Proc>,
    /// Emitted this pass and not yet scheduled: (item, msg, emit time).
    fresh: Vec<(ItemId, Msg, u32)>,
    pending: Vec<Pending>,
    crashes: u32,
    answer: Option<Answer>,
    log: Option<Vec<Event>>,
}

impl Hash for State {
    fn hash<H: Hasher>(&self, h: &mut H) {
        // the log is excluded: equal states have equal futures
        self.now.hash(h);
        self.phase.hash(h);
        self.cursor.hash(h);
        self.procs.hash(h);
        self.fresh.hash(h);
        self.pending.hash(h);
        self.crashes.hash(h);
        self.answer.hash(h);
    }
}

fn first_output(observed: &[(ItemId, Msg)]) -> Output {
    observed.iter().find_map(|(_, m)| match m {
        Msg::Output(b) => Some(*b),
        _ => None,
    })
}

fn eval(p: &Proc, e: &Expr) -> Output {
    match e {
        Expr::Const(v) => *v,
        Expr::Reg(r) => p.regs[usize::from(*r)],
        Expr::Complement(e) => eval(p, e).map(Bit::complement),
        Expr::FirstObservedOutput => first_output(&p.observed),
        Expr::IfObserved(pat, a, b) => {
            if p.observed.iter().any(|(_, m)| pat.matches(*m)) {
                eval(p, a)
            } else {
                eval(p, b)
            }
        }
    }
}

fn holds(p: &Proc, c: &Cond) -> bool {
    match c {
        Cond::True => true,
        Cond::Observed(pat) => p.observed.iter().any(|(_, m)| pat.matches(*m)),
        Cond::Defined(e) => eval(p, e).is_some(),
        Cond::Equals(e, v) => eval(p, e) == *v,
        Cond::Or(a, b) => holds(p, a) || holds(p, b),
    }
}

fn message(p: &Proc, m: &MsgExpr) -> Msg {
    let bit = |e| eval(p, e).expect("communicated value must not be ⊥");
    match m {
        MsgExpr::Init => Msg::Init,
        MsgExpr::Output(e) => Msg::Output(bit(e)),
        MsgExpr::Propose(e) => Msg::Propose(bit(e)),
    }
}

impl State {
    pub fn now(&self) -> u32 {
        self.now
    }

    pub fn crashes(&self) -> usize {
        self.crashes as usize
    }

    pub fn outputs(&self) -> OutputVector {
        OutputVector(self.procs.iter().map(|p| p.output).collect())
    }

    pub fn statuses(&self) -> Vec<Status> {
        self.procs.iter().map(|p| p.status).collect()
    }

    pub fn events(&self) -> &[Event] {
        self.log.as_deref().unwrap_or(&[])
    }

    /// 128-bit digest of everything that determines the future.
    pub fn fingerprint(&self) -> u128 {
        Fingerprinter::of(self)
    }

    /// Coarser digest that forgets what no process will read again: items
    /// a receiver's remaining code ignores, duplicate observations, and the
    /// pick counters. States with equal digests reach the same output sets.
    pub fn view_fingerprint(&self, k: &Kernel) -> u128 {
        let mask = |i: usize| k.reads[i][usize::from(self.procs[i].pc)];
        let procs: Vec<_> = self
            .procs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut seen: Vec<Msg> = Vec::new();
                for (_, m) in &p.observed {
                    if mask(i) & m.kind_bit() != 0 && !seen.contains(m) {
                        seen.push(*m);
                    }
                }
                (p.pc, p.executed, p.regs, p.output, p.status, p.emitted, p.crash_checked, seen)
            })
            .collect();
        let pending: Vec<_> = self
            .pending
            .iter()
            .filter(|d| {
                let r = d.receiver.index();
                self.procs[r].live() && mask(r) & d.msg.kind_bit() != 0
            })
            .collect();
        Fingerprinter::of(&(self.now, self.phase, &self.cursor, procs, &self.fresh, pending, self.crashes, self.answer))
    }

    pub fn answer(&mut self, a: Answer) {
        debug_assert!(self.answer.is_none());
        self.answer = Some(a);
    }

    fn emit(&mut self, pid: ProcessId, kind: EventKind) {
        if let Some(log) = &mut self.log {
            log.push(Event { seq: log.len() as u64, time: self.now, pid, kind });
        }
    }

    fn emit_at(&mut self, time: u32, pid: ProcessId, kind: EventKind) {
        if let Some(log) = &mut self.log {
            log.push(Event { seq: log.len() as u64, time, pid, kind });
        }
    }

    fn crash(&mut self, i: usize, slot: u32) {
        self.procs[i].status = Status::Crashed;
        self.crashes += 1;
        self.emit(ProcessId::from_index(i), EventKind::Crash { slot });
    }

    /// Runs until the next decision or the end of the execution.
    pub fn resume(&mut self, k: &Kernel) -> Next {
        let n = k.n() as u16;
        loop {
            match self.cursor {
                Cursor::Finished(t) => return Next::Finished(t),
                Cursor::Run(i) if i < n => match self.exec(k, usize::from(i)) {
                    Flow::Need(r) => return Next::Choice(r),
                    Flow::Yield => self.cursor = Cursor::Run(i + 1),
                },
                Cursor::Run(_) => {
                    self.cursor = match (k.timing(), self.phase) {
                        (Timing::Async, _) => Cursor::Schedule { item: 0, receiver: 0 },
                        (Timing::Sync, Phase::Communication) => Cursor::SyncDeliver,
                        (Timing::Sync, Phase::Computation) => self.next_round(k),
                    }
                }
                Cursor::Schedule { item, receiver } => {
                    if usize::from(item) == self.fresh.len() {
                        self.fresh.clear();
                        self.cursor = Cursor::Deliver;
                    } else if receiver == n {
                        self.cursor = Cursor::Schedule { item: item + 1, receiver: 0 };
                    } else {
                        let r = usize::from(receiver);
                        let next = Cursor::Schedule { item, receiver: receiver + 1 };
                        if self.procs[r].status == Status::Crashed {
                            self.cursor = next;
                            continue;
                        }
                        let (id, msg, emitted) = self.fresh[usize::from(item)];
                        match self.answer.take() {
                            Some(Answer::Deliver(due)) => {
                                debug_assert!(due >= emitted);
                                let p = Pending { due, receiver: ProcessId::from_index(r), item: id, msg };
                                let at = self.pending.partition_point(|q| *q < p);
                                self.pending.insert(at, p);
                                self.cursor = next;
                            }
                            Some(other) => panic!("answer {other:?} given to a delay request"),
                            None => {
                                return Next::Choice(Request::Delay {
                                    item: id,
                                    receiver: ProcessId::from_index(r),
                                    emitted,
                                    relevant: self.procs[r].live()
                                        && k.reads[r][usize::from(self.procs[r].pc)] & msg.kind_bit() != 0,
                                })
                            }
                        }
                    }
                }
                Cursor::Deliver => {
                    let delivered = self.deliver_due();
                    self.cursor = if delivered { Cursor::Run(0) } else { self.advance(k) };
                }
                Cursor::SyncDeliver => {
                    let mut batch: Vec<(ItemId, Msg)> = self.fresh.drain(..).map(|(i, m, _)| (i, m)).collect();
                    batch.sort_by_key(|(i, m)| (i.sender, *m, i.slot));
                    for r in 0..k.n() {
                        if self.procs[r].status == Status::Crashed {
                            continue;
                        }
                        for &(item, msg) in &batch {
                            self.procs[r].observed.push((item, msg));
                            self.emit(ProcessId::from_index(r), EventKind::Observe { item, msg });
                        }
                    }
                    self.phase = Phase::Computation;
                    self.cursor = Cursor::Run(0);
                }
            }
        }
    }

    fn next_round(&mut self, k: &Kernel) -> Cursor {
        if self.now >= k.rounds {
            return Cursor::Finished(self.settle(false));
        }
        self.now += 1;
        self.phase = Phase::Communication;
        Cursor::Run(0)
    }

    fn settle(&self, horizon: bool) -> Termination {
        if horizon {
            Termination::Horizon
        } else if self.procs.iter().all(|p| !p.live()) {
            Termination::AllDone
        } else {
            Termination::Quiescent
        }
    }

    /// Delivers every pending item due now to its live receivers.
    fn deliver_due(&mut self) -> bool {
        let split = self.pending.partition_point(|p| p.due <= self.now);
        if split == 0 {
            return false;
        }
        let mut batch: Vec<Pending> = self.pending.drain(..split).collect();
        batch.sort_by_key(|p| (p.receiver, p.item.sender, p.msg, p.item.slot));
        let mut any = false;
        for p in batch {
            let r = p.receiver.index();
            if self.procs[r].status == Status::Crashed {
                continue;
            }
            any = true;
            self.procs[r].observed.push((p.item, p.msg));
            self.emit(p.receiver, EventKind::Observe { item: p.item, msg: p.msg });
        }
        any
    }

    fn advance(&mut self, k: &Kernel) -> Cursor {
        let waiting = |s: &State, r: ProcessId| s.procs[r.index()].live();
        let mut next = self.pending.iter().filter(|p| waiting(self, p.receiver)).map(|p| p.due).min();
        let timed = self.procs.iter().enumerate().any(|(i, p)| {
            p.live() && matches!(k.programs[i].lines.get(usize::from(p.pc)), Some(l) if l.instr == Instr::WaitTimer)
        });
        if timed && k.deadline > self.now {
            next = Some(next.map_or(k.deadline, |d| d.min(k.deadline)));
        }
        match next {
            Some(t) if t > k.horizon => {
                self.flush();
                Cursor::Finished(Termination::Horizon)
            }
            Some(t) => {
                self.now = t;
                Cursor::Run(0)
            }
            None => {
                self.flush();
                Cursor::Finished(self.settle(false))
            }
        }
    }

    /// Hands remaining items to processes that can no longer react to them.
    fn flush(&mut self) {
        for p in core::mem::take(&mut self.pending) {
            let r = p.receiver.index();
            if self.procs[r].status == Status::Crashed {
                continue;
            }
            self.procs[r].observed.push((p.item, p.msg));
            self.emit_at(p.due.max(self.now), p.receiver, EventKind::Observe { item: p.item, msg: p.msg });
        }
    }

    fn timer_expired(&self, k: &Kernel) -> bool {
        match k.timing() {
            Timing::Async => self.now >= k.deadline,
            Timing::Sync => (self.now, self.phase) >= (1, Phase::Computation),
        }
    }

    fn exec(&mut self, k: &Kernel, i: usize) -> Flow {
        let prog = &k.programs[i];
        let pid = ProcessId::from_index(i);
        loop {
            if !self.procs[i].live() {
                return Flow::Yield;
            }
            let (pc, executed) = (usize::from(self.procs[i].pc), self.procs[i].executed);
            if self.procs[i].crash_checked != Some(executed) {
                match self.answer.take() {
                    Some(Answer::Crash(c)) => {
                        self.procs[i].crash_checked = Some(executed);
                        if c {
                            self.crash(i, executed);
                            return Flow::Yield;
                        }
                    }
                    Some(other) => panic!("answer {other:?} given to a crash request"),
                    None => {
                        return Flow::Need(Request::Crash { pid, slot: executed, at_end: pc >= prog.len() });
                    }
                }
            }
            let Some(line) = prog.lines.get(pc) else {
                self.procs[i].status = Status::Done;
                return Flow::Yield;
            };
            let line_no = pc as u16;
            let p = &self.procs[i];
            // Some(next pc) when the instruction completes as a counted step
            let advance: Option<usize> = match &line.instr {
                Instr::Pick { dst, from } => match self.answer.take() {
                    Some(Answer::Pick(ix)) => {
                        let value = from[ix];
                        let p = &mut self.procs[i];
                        p.regs[usize::from(*dst)] = value;
                        p.picks += 1;
                        self.emit(pid, EventKind::Step { line: line_no });
                        self.emit(pid, EventKind::Pick { line: line_no, value });
                        self.finish_step(i, pc + 1);
                        continue;
                    }
                    Some(other) => panic!("answer {other:?} given to a pick request"),
                    None => {
                        return Flow::Need(Request::Pick { pid, line: line_no, counter: p.picks, options: from.len() })
                    }
                },
                Instr::Assign { dst, expr } => {
                    let v = eval(p, expr);
                    self.procs[i].regs[usize::from(*dst)] = v;
                    Some(pc + 1)
                }
                Instr::Communicate(m) => {
                    let msg = message(p, m);
                    let item = ItemId { sender: pid, slot: p.emitted };
                    self.procs[i].emitted += 1;
                    self.fresh.push((item, msg, self.now));
                    self.emit(pid, EventKind::Step { line: line_no });
                    self.emit(pid, EventKind::Communicate { item, msg });
                    self.finish_step(i, pc + 1);
                    continue;
                }
                Instr::Output(e) => {
                    let v = eval(p, e);
                    self.emit(pid, EventKind::Step { line: line_no });
                    if let Some(b) = v {
                        debug_assert!(self.procs[i].output.is_none(), "{pid} outputs twice");
                        if self.procs[i].output.is_none() {
                            self.procs[i].output = Some(b);
                            self.emit(pid, EventKind::Output { value: b });
                        }
                    }
                    self.finish_step(i, pc + 1);
                    continue;
                }
                Instr::WaitUntil(c) => holds(p, c).then_some(pc + 1),
                Instr::WaitTimer => self.timer_expired(k).then_some(pc + 1),
                Instr::AwaitRound { round, phase } => {
                    if (self.now, self.phase) >= (*round, *phase) {
                        self.procs[i].pc += 1;
                        continue;
                    }
                    None
                }
                Instr::Branch { cond, otherwise } => Some(if holds(p, cond) { pc + 1 } else { *otherwise }),
                Instr::Jump(to) => {
                    self.procs[i].pc = *to as u16;
                    continue;
                }
            };
            match advance {
                Some(to) => {
                    self.emit(pid, EventKind::Step { line: line_no });
                    self.finish_step(i, to);
                }
                None => {
                    self.procs[i].status = Status::Blocked { line: line_no };
                    return Flow::Yield;
                }
            }
        }
    }

    fn finish_step(&mut self, i: usize, to: usize) {
        let p = &mut self.procs[i];
        p.pc = to as u16;
        p.executed += 1;
        p.status = Status::Running;
    }

    /// Crashes that `fp` places beyond the point a process stopped at.
    fn late_crashes(&mut self, fp: &FailurePattern) {
        for (&pid, &slot) in &fp.crashes {
            let i = pid.index();
            if self.procs[i].status != Status::Crashed {
                self.procs[i].status = Status::Crashed;
                self.crashes += 1;
                self.emit(pid, EventKind::Crash { slot });
            }
        }
    }
}

/// Answers requests from a seed and patterns.
struct Driver<'a> {
    kernel: &'a Kernel,
    picks: ChoiceStream,
    fp: &'a FailurePattern,
    dp: &'a DelayPattern,
}

impl Driver<'_> {
    fn answer(&self, r: &Request) -> Result<Answer, Error> {
        Ok(match *r {
            Request::Pick { pid, counter, options, .. } => Answer::Pick(self.picks.pick(pid, counter, options)),
            Request::Crash { pid, slot, .. } => Answer::Crash(self.fp.slot(pid) == Some(slot)),
            Request::Delay { item, receiver, emitted, .. } => {
                let Some(d) = self.dp.get(item, receiver) else {
                    return Err(Error::MissingDelivery { item: format!("{item}"), receiver: receiver.get() });
                };
                let horizon = self.kernel.horizon;
                let step = d.resolve(emitted, horizon);
                if step < emitted {
                    return Err(Error::DeliveryBeforeEmission {
                        item: format!("{item}"),
                        receiver: receiver.get(),
                        step,
                        emitted,
                    });
                }
                if step > horizon {
                    return Err(Error::DeliveryPastHorizon {
                        item: format!("{item}"),
                        receiver: receiver.get(),
                        step,
                        horizon,
                    });
                }
                Answer::Deliver(step)
            }
        })
    }
}

fn execute(
    kernel: &Kernel,
    seed: u64,
    fp: &FailurePattern,
    dp: &DelayPattern,
    logging: bool,
) -> Result<(State, Termination, DelayPattern), Error> {
    fp.validate(kernel.n(), kernel.t(), kernel.crash_slots())?;
    let dp = match kernel.timing() {
        Timing::Sync => sync_canonical_delay(),
        Timing::Async => dp.clone(),
    };
    let driver = Driver { kernel, picks: ChoiceStream::new(seed), fp, dp: &dp };
    let mut state = kernel.start(logging);
    let termination = loop {
        match state.resume(kernel) {
            Next::Finished(t) => break t,
            Next::Choice(r) => state.answer(driver.answer(&r)?),
        }
    };
    state.late_crashes(fp);
    let termination = match termination {
        Termination::Quiescent => state.settle(false),
        t => t,
    };
    Ok((state, termination, dp))
}

/// Runs one execution fully determined by `(seed, fp, dp)`. Synchronous
/// kernels ignore `dp` and record the canonical pattern.
pub fn run(kernel: &Kernel, seed: u64, fp: &FailurePattern, dp: &DelayPattern) -> Result<ExecutionTrace, Error> {
    let (mut state, termination, dp) = execute(kernel, seed, fp, dp, true)?;
    Ok(ExecutionTrace {
        outputs: state.outputs(),
        statuses: state.statuses(),
        events: state.log.take().unwrap_or_default(),
        termination,
        header: kernel.header(seed, fp.clone(), dp),
    })
}

/// Like [`run`], without recording events.
pub fn run_outputs(
    kernel: &Kernel,
    seed: u64,
    fp: &FailurePattern,
    dp: &DelayPattern,
) -> Result<(OutputVector, Termination), Error> {
    let (state, termination, _) = execute(kernel, seed, fp, dp, false)?;
    Ok((state.outputs(), termination))
}

pub fn run_sync(
    instance: &AlgorithmInstance,
    cfg: SystemConfig,
    seed: u64,
    fp: &FailurePattern,
) -> Result<ExecutionTrace, Error> {
    if cfg.timing != Timing::Sync {
        return Err(Error::Precondition("run_sync needs a synchronous configuration".into()));
    }
    let kernel = Kernel::new(instance.clone(), cfg, RunOptions::default())?;
    run(&kernel, seed, fp, &sync_canonical_delay())
}

pub fn run_async(
    instance: &AlgorithmInstance,
    cfg: SystemConfig,
    seed: u64,
    fp: &FailurePattern,
    dp: &DelayPattern,
    opts: RunOptions,
) -> Result<ExecutionTrace, Error> {
    if cfg.timing != Timing::Async {
        return Err(Error::Precondition("run_async needs an asynchronous configuration".into()));
    }
    let kernel = Kernel::new(instance.clone(), cfg, opts)?;
    run(&kernel, seed, fp, dp)
}

/// Re-executes the run a header describes.
pub fn replay(header: &TraceHeader) -> Result<ExecutionTrace, Error> {
    let opts = RunOptions { horizon: Some(header.horizon), deadline: Some(header.deadline) };
    let kernel = Kernel::new(header.instance.clone(), header.config, opts)?;
    run(&kernel, header.seed, &header.fp, &header.dp)
}

/// Seed whose picks under `stream` reproduce `picks` (pid, counter,
/// options, index), searching `0..limit`.
pub fn find_seed(picks: &[(ProcessId, u32, usize, usize)], limit: u64) -> Result<u64, Error> {
    (0..limit)
        .find(|&s| {
            let c = ChoiceStream::new(s);
            picks.iter().all(|&(pid, counter, options, ix)| c.pick(pid, counter, options) == ix)
        })
        .ok_or(Error::SeedSearch(limit))
}

/// Turns a delivery step back into a delay-pattern entry.
pub fn delivery_for(step: u32, emitted: u32, horizon: u32) -> Delivery {
    if step == emitted {
        Delivery::Immediate
    } else if step == horizon {
        Delivery::Latest
    } else if step == Delivery::Mid.resolve(emitted, horizon) {
        Delivery::Mid
    } else {
        Delivery::Step(step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{AlgorithmKind, ValueSet};

    fn cfg(n: usize, t: usize, timing: Timing) -> SystemConfig {
        SystemConfig::new(n, t, timing).unwrap()
    }

    fn seed_with(picks: &[(u16, u32, usize, usize)]) -> u64 {
        let v: Vec<_> = picks.iter().map(|&(p, c, o, i)| (ProcessId::new(p), c, o, i)).collect();
        find_seed(&v, 1 << 20).unwrap()
    }

    fn consensus(n: usize) -> AlgorithmInstance {
        AlgorithmInstance::new(AlgorithmKind::SyncConsensus, n, 0).unwrap()
    }

    #[test]
    fn sync_consensus_all_ones() {
        let seed = seed_with(&[(1, 0, 2, 1), (2, 0, 2, 1)]);
        let tr = run_sync(&consensus(2), cfg(2, 1, Timing::Sync), seed, &FailurePattern::none()).unwrap();
        assert_eq!(tr.termination, Termination::AllDone);
        assert_eq!(tr.outputs.0, alloc::vec![Some(Bit::One), Some(Bit::One)]);
    }

    #[test]
    fn sync_consensus_adopts_zero() {
        let seed = seed_with(&[(1, 0, 2, 0), (2, 0, 2, 1)]);
        let tr = run_sync(&consensus(2), cfg(2, 1, Timing::Sync), seed, &FailurePattern::none()).unwrap();
        assert_eq!(tr.outputs.0, alloc::vec![Some(Bit::Zero), Some(Bit::Zero)]);
    }

    #[test]
    fn sync_consensus_single_process_sees_itself() {
        let seed = seed_with(&[(1, 0, 2, 0)]);
        let tr = run_sync(&consensus(1), cfg(1, 0, Timing::Sync), seed, &FailurePattern::none()).unwrap();
        assert_eq!(tr.outputs.0, alloc::vec![Some(Bit::Zero)]);
        assert!(tr.events.iter().any(|e| matches!(e.kind, EventKind::Observe { .. }) && e.pid == ProcessId::new(1)));
    }

    #[test]
    fn async_disagreement_immediate_delivery() {
        let inst = AlgorithmInstance::new(AlgorithmKind::AsyncDisagreement { no_out: false }, 5, 2).unwrap();
        let tr = run_async(
            &inst,
            cfg(5, 2, Timing::Async),
            0,
            &FailurePattern::none(),
            &DelayPattern::all_immediate(),
            RunOptions::default(),
        )
        .unwrap();
        assert_eq!(tr.termination, Termination::AllDone);
        let o: Vec<_> = tr.outputs.0.clone();
        assert_eq!(&o[..3], &[Some(Bit::Zero), Some(Bit::Zero), Some(Bit::One)]);
        // p4 and p5 first observe p1's OUTPUT(0)
        assert_eq!(&o[3..], &[Some(Bit::One), Some(Bit::One)]);
        assert_eq!(tr.output_set(), OutputSet::Both);
    }

    #[test]
    fn async_disagreement_without_init_is_quiescent() {
        let inst = AlgorithmInstance::new(AlgorithmKind::AsyncDisagreement { no_out: true }, 5, 2).unwrap();
        let seed = seed_with(&[(1, 0, 2, 1), (2, 0, 2, 1), (3, 0, 2, 1)]);
        for dp in [DelayPattern::all_immediate(), DelayPattern::all_latest()] {
            let tr =
                run_async(&inst, cfg(5, 2, Timing::Async), seed, &FailurePattern::none(), &dp, RunOptions::default())
                    .unwrap();
            assert_eq!(tr.termination, Termination::Quiescent);
            assert_eq!(tr.output_set(), OutputSet::Empty);
        }
    }

    #[test]
    fn communication_less_ignores_delays() {
        let inst =
            AlgorithmInstance::new(AlgorithmKind::AllOutput { values: ValueSet::new(true, true, true).unwrap() }, 3, 1)
                .unwrap();
        let c = cfg(3, 1, Timing::Async);
        let a = run_async(&inst, c, 9, &FailurePattern::none(), &DelayPattern::all_immediate(), RunOptions::default())
            .unwrap();
        let b = run_async(&inst, c, 9, &FailurePattern::none(), &DelayPattern::all_latest(), RunOptions::default())
            .unwrap();
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn crash_before_output_suppresses_it() {
        let inst = AlgorithmInstance::new(AlgorithmKind::AsyncDisagreement { no_out: false }, 3, 1).unwrap();
        let fp = FailurePattern::none().crash(ProcessId::new(2), 0);
        let tr =
            run_async(&inst, cfg(3, 1, Timing::Async), 0, &fp, &DelayPattern::all_immediate(), RunOptions::default())
                .unwrap();
        assert_eq!(tr.outputs.0, alloc::vec![Some(Bit::Zero), None, Some(Bit::One)]);
        assert!(tr.crashed(ProcessId::new(2)));
        assert!(tr.events.iter().all(|e| e.pid != ProcessId::new(2) || matches!(e.kind, EventKind::Crash { slot: 0 })));
    }

    #[test]
    fn timing_adaptive_branches_on_delay() {
        let kind = AlgorithmKind::TimingAdaptive { v: Bit::Zero, no_out: false };
        let inst = AlgorithmInstance::new(kind, 2, 1).unwrap();
        let c = cfg(2, 1, Timing::Async);
        let late = run_async(&inst, c, 0, &FailurePattern::none(), &DelayPattern::all_latest(), RunOptions::default())
            .unwrap();
        assert_eq!(late.outputs.0, alloc::vec![Some(Bit::Zero), Some(Bit::Zero)]);
        let seed = seed_with(&[(1, 0, 2, 1)]);
        let early =
            run_async(&inst, c, seed, &FailurePattern::none(), &DelayPattern::all_immediate(), RunOptions::default())
                .unwrap();
        assert_eq!(early.output_set(), OutputSet::Both);
    }

    #[test]
    fn rejects_bad_patterns() {
        let inst = AlgorithmInstance::new(AlgorithmKind::AsyncDisagreement { no_out: false }, 3, 0).unwrap();
        let c = cfg(3, 0, Timing::Async);
        let none = FailurePattern::none();
        let missing = DelayPattern::default();
        assert!(matches!(
            run_async(&inst, c, 0, &none, &missing, RunOptions::default()),
            Err(Error::MissingDelivery { .. })
        ));
        let past = DelayPattern::uniform(Delivery::Step(99));
        assert!(matches!(
            run_async(&inst, c, 0, &none, &past, RunOptions::default()),
            Err(Error::DeliveryPastHorizon { .. })
        ));
        let too_many = FailurePattern::none().crash(ProcessId::new(1), 0);
        assert!(matches!(
            run_async(&inst, c, 0, &too_many, &DelayPattern::all_immediate(), RunOptions::default()),
            Err(Error::TooManyCrashes { .. })
        ));
        assert!(matches!(run_sync(&inst, cfg(3, 0, Timing::Sync), 0, &none), Err(Error::TimingMismatch { .. })));
    }

    #[test]
    fn replay_matches() {
        let inst = AlgorithmInstance::new(AlgorithmKind::SyncDisagreement { no_out: true }, 4, 2).unwrap();
        let fp = FailurePattern::none().crash(ProcessId::new(1), 2);
        let tr = run_sync(&inst, cfg(4, 2, Timing::Sync), 17, &fp).unwrap();
        assert_eq!(replay(&tr.header).unwrap(), tr);
    }
}
