//! Brute-force interleaving interpreter used as an oracle.
//!
//! Each algorithm is written again as a plain per-process state machine.
//! Asynchronous executions interleave single process actions, pick
//! outcomes, individual deliveries, crashes at any moment and timer
//! expiries in every possible order, with no delay lattice. Synchronous
//! executions run lock-step rounds with crashes between any two actions.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use binsos_core::algorithms::RoleAssignment;
use binsos_core::{
    AlgorithmInstance, AlgorithmKind, Bit, Kernel, OutputSet, RunOptions, SetOfOutputSets, SystemConfig, Timing,
    ValueSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum M {
    Init,
    Out(u8),
    Prop(u8),
}

const DONE: u8 = 255;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct P {
    pc: u8,
    val: Option<u8>,
    out: Option<u8>,
    crashed: bool,
    seen: BTreeSet<M>,
    first_out: Option<u8>,
    sent: u8,
    timer: bool,
}

impl P {
    fn new() -> Self {
        P { pc: 0, val: None, out: None, crashed: false, seen: BTreeSet::new(), first_out: None, sent: 0, timer: false }
    }

    fn at(&self, pc: u8) -> P {
        P { pc, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    V(u8),
    Unknown,
}

#[derive(Clone, Debug)]
enum Alg {
    All { vals: Vec<Option<u8>> },
    Single { no_out: bool },
    Adaptive { v: u8, no_out: bool },
    ADis { no_out: bool, side: Vec<Side>, init: Vec<bool> },
    SDis { no_out: bool, seq: Vec<(u8, u8)>, init: Vec<bool>, rounds: u8 },
    Cons,
}

fn bit(b: Bit) -> u8 {
    match b {
        Bit::Zero => 0,
        Bit::One => 1,
    }
}

impl Alg {
    fn from(inst: &AlgorithmInstance) -> Alg {
        let n = inst.n;
        let member = |v: &[binsos_core::ProcessId], i: usize| v.iter().any(|p| p.index() == i);
        match (inst.kind, &inst.assignment) {
            (AlgorithmKind::AllOutput { values }, _) => {
                Alg::All { vals: values.options().into_iter().map(|o| o.map(bit)).collect() }
            }
            (AlgorithmKind::SingleOutput { no_out }, _) => Alg::Single { no_out },
            (AlgorithmKind::TimingAdaptive { v, no_out }, _) => Alg::Adaptive { v: bit(v), no_out },
            (AlgorithmKind::AsyncDisagreement { no_out }, RoleAssignment::Partition { p0, p1, init, .. }) => {
                Alg::ADis {
                    no_out,
                    side: (0..n)
                        .map(|i| {
                            if member(p0, i) {
                                Side::V(0)
                            } else if member(p1, i) {
                                Side::V(1)
                            } else {
                                Side::Unknown
                            }
                        })
                        .collect(),
                    init: (0..n).map(|i| member(init, i)).collect(),
                }
            }
            (AlgorithmKind::SyncDisagreement { no_out }, RoleAssignment::Sequences { s0, s1, init }) => Alg::SDis {
                no_out,
                seq: (0..n)
                    .map(|i| match s0.iter().position(|p| p.index() == i) {
                        Some(k) => (0, k as u8 + 1),
                        None => (1, s1.iter().position(|p| p.index() == i).unwrap() as u8 + 1),
                    })
                    .collect(),
                init: (0..n).map(|i| member(init, i)).collect(),
                rounds: (n as u8).div_ceil(2).max(1),
            },
            (AlgorithmKind::SyncConsensus, _) => Alg::Cons,
            other => panic!("unsupported instance {other:?}"),
        }
    }

    fn rounds(&self) -> u8 {
        match self {
            Alg::SDis { rounds, .. } => *rounds,
            _ => 1,
        }
    }
}

/// Synchronous position: (round, in computation step).
type Clock = Option<(u8, bool)>;

enum Next {
    Stop,
    Alts(Vec<(P, Option<M>)>),
}

fn reached(clock: Clock, round: u8, comp: bool) -> bool {
    match clock {
        Some(now) => now >= (round, comp),
        None => true,
    }
}

fn one(p: P) -> Next {
    Next::Alts(vec![(p, None)])
}

fn send(p: P, m: M) -> Next {
    Next::Alts(vec![(p, Some(m))])
}

fn coin(p: &P, on: impl Fn(&P, u8) -> (P, Option<M>)) -> Next {
    Next::Alts((0..2).map(|g| on(p, g)).collect())
}

/// Alternatives for process `i`'s next atomic action.
fn next(alg: &Alg, i: usize, p: &P, clock: Clock) -> Next {
    if p.crashed || p.pc == DONE {
        return Next::Stop;
    }
    match alg {
        Alg::All { vals } => match p.pc {
            0 => Next::Alts(vals.iter().map(|&x| (P { val: x, ..p.at(1) }, None)).collect()),
            _ => one(P { out: p.val, ..p.at(DONE) }),
        },
        Alg::Single { no_out } => {
            if i != 0 {
                return one(p.at(DONE));
            }
            match p.pc {
                0 => {
                    let mut vals = vec![Some(0), Some(1)];
                    if *no_out {
                        vals.push(None);
                    }
                    Next::Alts(vals.into_iter().map(|x| (P { val: x, ..p.at(1) }, None)).collect())
                }
                _ => one(P { out: p.val, ..p.at(DONE) }),
            }
        }
        Alg::Adaptive { v, no_out } => match p.pc {
            0 if *no_out => coin(p, |p, g| (if g == 0 { p.at(1) } else { p.at(DONE) }, None)),
            0 => one(p.at(1)),
            1 if i != 0 => one(P { out: Some(*v), ..p.at(2) }),
            2 if i != 0 => send(p.at(DONE), M::Out(*v)),
            1 => {
                let expired = match clock {
                    Some(_) => reached(clock, 1, true),
                    None => p.timer,
                };
                if expired {
                    one(p.at(2))
                } else {
                    Next::Stop
                }
            }
            _ => {
                if p.seen.contains(&M::Out(*v)) {
                    coin(p, |p, b| (P { out: Some(b), ..p.at(DONE) }, None))
                } else {
                    one(P { out: Some(*v), ..p.at(DONE) })
                }
            }
        },
        Alg::ADis { no_out, side, init } => match (p.pc, side[i]) {
            (0, _) if *no_out && init[i] => coin(p, |p, g| (if g == 0 { p.at(1) } else { p.at(2) }, None)),
            (0, _) => one(p.at(2)),
            (1, _) => send(p.at(2), M::Init),
            (2, Side::V(_)) if *no_out && !p.seen.contains(&M::Init) => Next::Stop,
            (2, Side::V(v)) => one(P { out: Some(v), ..p.at(3) }),
            (3, Side::V(v)) => send(p.at(DONE), M::Out(v)),
            (2, Side::Unknown) => match p.first_out {
                Some(w) => one(P { out: Some(1 - w), ..p.at(DONE) }),
                None => Next::Stop,
            },
            _ => unreachable!(),
        },
        Alg::SDis { no_out, seq, init, rounds } => {
            let (v, pos) = seq[i];
            match p.pc {
                0 if *no_out && init[i] => coin(p, |p, g| (p.at(1), (g == 0).then_some(M::Init))),
                0 => one(p.at(1)),
                1 if !reached(clock, pos, true) => Next::Stop,
                1 => {
                    if !*no_out || p.seen.contains(&M::Init) {
                        let chosen = if p.seen.contains(&M::Out(v)) { 1 - v } else { v };
                        one(P { out: Some(chosen), val: Some(chosen), ..p.at(2) })
                    } else {
                        one(p.at(DONE))
                    }
                }
                _ if pos >= *rounds => one(p.at(DONE)),
                _ if !reached(clock, pos + 1, false) => Next::Stop,
                _ => send(p.at(DONE), M::Out(p.val.unwrap())),
            }
        }
        Alg::Cons => match p.pc {
            0 => coin(p, |p, b| (P { val: Some(b), ..p.at(1) }, Some(M::Prop(b)))),
            _ if !reached(clock, 1, true) => Next::Stop,
            _ => one(P { out: Some(if p.seen.contains(&M::Prop(0)) { 0 } else { 1 }), ..p.at(DONE) }),
        },
    }
}

fn waits_for_timer(alg: &Alg, i: usize, p: &P) -> bool {
    matches!(alg, Alg::Adaptive { .. }) && i == 0 && p.pc == 1 && !p.timer && !p.crashed
}

fn output_set(ps: &[P]) -> OutputSet {
    ps.iter().filter_map(|p| p.out).fold(OutputSet::Empty, |o, b| o.insert(if b == 0 { Bit::Zero } else { Bit::One }))
}

/// (receiver, sender, slot, msg)
type Edge = (u8, u8, u8, M);

#[derive(Clone, PartialEq, Eq, Hash)]
struct G {
    ps: Vec<P>,
    pending: BTreeSet<Edge>,
    observed: BTreeSet<(u8, u8)>,
    crashes: u8,
}

struct Async<'a> {
    alg: &'a Alg,
    t: u8,
    seen: HashSet<G>,
    result: SetOfOutputSets,
}

impl Async<'_> {
    fn emit(g: &mut G, i: usize, m: M) {
        let slot = g.ps[i].sent;
        g.ps[i].sent += 1;
        for r in 0..g.ps.len() {
            if !g.ps[r].crashed {
                g.pending.insert((r as u8, i as u8, slot, m));
            }
        }
    }

    fn dfs(&mut self, g: G) {
        if !self.seen.insert(g.clone()) {
            return;
        }
        let n = g.ps.len();
        let mut moved = false;
        for i in 0..n {
            if let Next::Alts(alts) = next(self.alg, i, &g.ps[i], None) {
                for (p, m) in alts {
                    let mut h = g.clone();
                    h.ps[i] = p;
                    if let Some(m) = m {
                        Self::emit(&mut h, i, m);
                    }
                    moved = true;
                    self.dfs(h);
                }
            }
            if waits_for_timer(self.alg, i, &g.ps[i]) {
                let mut h = g.clone();
                h.ps[i].timer = true;
                moved = true;
                self.dfs(h);
            }
        }
        for &e @ (r, s, slot, m) in &g.pending {
            let mut h = g.clone();
            h.pending.remove(&e);
            let p = &mut h.ps[r as usize];
            p.seen.insert(m);
            if let (M::Out(b), None) = (m, p.first_out) {
                p.first_out = Some(b);
            }
            h.observed.insert((s, slot));
            moved = true;
            self.dfs(h);
        }
        // an item nobody observed from a crashed sender may never arrive
        let droppable: BTreeSet<(u8, u8)> = g
            .pending
            .iter()
            .filter(|(_, s, slot, _)| g.ps[*s as usize].crashed && !g.observed.contains(&(*s, *slot)))
            .map(|(_, s, slot, _)| (*s, *slot))
            .collect();
        for (s, slot) in droppable {
            let mut h = g.clone();
            h.pending.retain(|e| (e.1, e.2) != (s, slot));
            moved = true;
            self.dfs(h);
        }
        if g.crashes < self.t {
            for i in 0..n {
                if !g.ps[i].crashed && g.ps[i].pc != DONE {
                    let mut h = g.clone();
                    h.ps[i].crashed = true;
                    h.crashes += 1;
                    h.pending.retain(|e| e.0 as usize != i);
                    self.dfs(h);
                }
            }
        }
        if !moved {
            self.result = self.result.with(output_set(&g.ps));
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct S {
    ps: Vec<P>,
    round_items: BTreeSet<(u8, u8, M)>,
    crashes: u8,
    round: u8,
    comp: bool,
    cursor: usize,
}

struct Sync<'a> {
    alg: &'a Alg,
    t: u8,
    seen: HashSet<S>,
    result: SetOfOutputSets,
}

impl Sync<'_> {
    fn dfs(&mut self, mut s: S) {
        if !self.seen.insert(s.clone()) {
            return;
        }
        let n = s.ps.len();
        if s.cursor == n {
            if !s.comp {
                let items = std::mem::take(&mut s.round_items);
                for p in s.ps.iter_mut().filter(|p| !p.crashed) {
                    p.seen.extend(items.iter().map(|x| x.2));
                }
                s.comp = true;
            } else if s.round == self.alg.rounds() {
                self.result = self.result.with(output_set(&s.ps));
                return;
            } else {
                s.round += 1;
                s.comp = false;
            }
            s.cursor = 0;
            return self.dfs(s);
        }
        let i = s.cursor;
        if s.crashes < self.t && !s.ps[i].crashed && s.ps[i].pc != DONE {
            let mut h = s.clone();
            h.ps[i].crashed = true;
            h.crashes += 1;
            h.cursor += 1;
            self.dfs(h);
        }
        match next(self.alg, i, &s.ps[i], Some((s.round, s.comp))) {
            Next::Stop => {
                let mut h = s;
                h.cursor += 1;
                self.dfs(h);
            }
            Next::Alts(alts) => {
                for (p, m) in alts {
                    let mut h = s.clone();
                    h.ps[i] = p;
                    if let Some(m) = m {
                        let slot = h.ps[i].sent;
                        h.ps[i].sent += 1;
                        h.round_items.insert((i as u8, slot, m));
                    }
                    self.dfs(h);
                }
            }
        }
    }
}

/// Every output set reachable by `instance` with at most `t` crashes.
pub fn oracle_output_sets(instance: &AlgorithmInstance, t: usize, timing: Timing) -> SetOfOutputSets {
    let alg = Alg::from(instance);
    let ps = vec![P::new(); instance.n];
    match timing {
        Timing::Async => {
            let mut a = Async { alg: &alg, t: t as u8, seen: HashSet::new(), result: SetOfOutputSets::EMPTY };
            a.dfs(G { ps, pending: BTreeSet::new(), observed: BTreeSet::new(), crashes: 0 });
            a.result
        }
        Timing::Sync => {
            let mut s = Sync { alg: &alg, t: t as u8, seen: HashSet::new(), result: SetOfOutputSets::EMPTY };
            s.dfs(S { ps, round_items: BTreeSet::new(), crashes: 0, round: 1, comp: false, cursor: 0 });
            s.result
        }
    }
}

/// Distinct constructible line instances with `n ≤ 3`, `t ≤ 1`, `t ≤ n`.
pub fn small_instances() -> Vec<(AlgorithmInstance, SystemConfig)> {
    let mut out: Vec<(AlgorithmInstance, SystemConfig)> = Vec::new();
    for line in 1..=15u8 {
        for timing in Timing::ALL {
            let Ok(kind) = binsos_core::instance_for_line(line, timing) else { continue };
            for n in 1..=3 {
                for t in 0..=1.min(n) {
                    let Ok(inst) = AlgorithmInstance::new(kind, n, t) else { continue };
                    let cfg = SystemConfig::new(n, t, timing).unwrap();
                    if !out.iter().any(|(i, c)| *i == inst && *c == cfg) {
                        out.push((inst, cfg));
                    }
                }
            }
        }
    }
    out
}

pub fn all_kinds() -> Vec<AlgorithmKind> {
    let mut kinds = vec![AlgorithmKind::SyncConsensus];
    for no_out in [false, true] {
        kinds.push(AlgorithmKind::SingleOutput { no_out });
        kinds.push(AlgorithmKind::AsyncDisagreement { no_out });
        kinds.push(AlgorithmKind::SyncDisagreement { no_out });
        for v in Bit::ALL {
            kinds.push(AlgorithmKind::TimingAdaptive { v, no_out });
        }
    }
    for mask in 1..8u8 {
        let values = ValueSet::new(mask & 1 != 0, mask & 2 != 0, mask & 4 != 0).unwrap();
        kinds.push(AlgorithmKind::AllOutput { values });
    }
    kinds
}

/// Every supported `(kind, timing, n, t)` with `n ≤ 5` whose roles can be built.
pub fn kernels() -> Vec<Kernel> {
    let mut out = Vec::new();
    for kind in all_kinds() {
        for timing in Timing::ALL.into_iter().filter(|&tm| kind.supports(tm)) {
            for n in 1..=5 {
                for t in 0..=n {
                    let Ok(inst) = AlgorithmInstance::new(kind, n, t) else { continue };
                    let cfg = SystemConfig::new(n, t, timing).unwrap();
                    out.push(Kernel::new(inst, cfg, RunOptions::default()).unwrap());
                }
            }
        }
    }
    out
}
