//! Guarded step programs: the small instruction set every algorithm is
//! compiled to, and the structured builder used to write them.
//!
//! A program is a flat list of instructions with forward jumps. Every
//! instruction except [`Instr::Jump`] and [`Instr::AwaitRound`] is a
//! *counted* step: it corresponds to one line of pseudocode and is a
//! position at which a failure pattern may crash the process.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::outputsets::{Bit, Output};

/// Local register index.
pub type Reg = u8;

/// Number of registers available to a program.
pub const REGISTERS: usize = 2;

/// Payload of a communicated item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Msg {
    Init,
    Output(Bit),
    Propose(Bit),
}

impl Msg {
    /// Bit of this payload in a [`Program::reads_from`] mask.
    pub fn kind_bit(self) -> u8 {
        match self {
            Msg::Init => 1,
            Msg::Output(Bit::Zero) => 2,
            Msg::Output(Bit::One) => 4,
            Msg::Propose(Bit::Zero) => 8,
            Msg::Propose(Bit::One) => 16,
        }
    }
}

impl fmt::Display for Msg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Msg::Init => f.write_str("INIT"),
            Msg::Output(b) => write!(f, "OUTPUT({b})"),
            Msg::Propose(b) => write!(f, "PROPOSE({b})"),
        }
    }
}

/// Matches observed payloads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pattern {
    Init,
    AnyOutput,
    Output(Bit),
    Propose(Bit),
}

impl Pattern {
    /// Payload kinds the pattern can match.
    pub fn kind_bits(self) -> u8 {
        match self {
            Pattern::Init => Msg::Init.kind_bit(),
            Pattern::AnyOutput => Msg::Output(Bit::Zero).kind_bit() | Msg::Output(Bit::One).kind_bit(),
            Pattern::Output(b) => Msg::Output(b).kind_bit(),
            Pattern::Propose(b) => Msg::Propose(b).kind_bit(),
        }
    }

    pub fn matches(self, msg: Msg) -> bool {
        match (self, msg) {
            (Pattern::Init, Msg::Init) => true,
            (Pattern::AnyOutput, Msg::Output(_)) => true,
            (Pattern::Output(a), Msg::Output(b)) => a == b,
            (Pattern::Propose(a), Msg::Propose(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(Output),
    Reg(Reg),
    Complement(Box<Expr>),
    /// Value carried by the first `OUTPUT` item observed, ⊥ if none.
    FirstObservedOutput,
    /// `then` if some observed item matches, else `otherwise`.
    IfObserved(Pattern, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Payload kinds whose observation can change the value.
    pub fn reads(&self) -> u8 {
        match self {
            Expr::Const(_) | Expr::Reg(_) => 0,
            Expr::Complement(e) => e.reads(),
            Expr::FirstObservedOutput => Pattern::AnyOutput.kind_bits(),
            Expr::IfObserved(p, a, b) => p.kind_bits() | a.reads() | b.reads(),
        }
    }

    pub fn bit(b: Bit) -> Expr {
        Expr::Const(Some(b))
    }

    pub fn complement(e: Expr) -> Expr {
        Expr::Complement(Box::new(e))
    }

    pub fn if_observed(p: Pattern, then: Expr, otherwise: Expr) -> Expr {
        Expr::IfObserved(p, Box::new(then), Box::new(otherwise))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cond {
    True,
    Observed(Pattern),
    /// Expression is not ⊥.
    Defined(Expr),
    Equals(Expr, Output),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub fn reads(&self) -> u8 {
        match self {
            Cond::True => 0,
            Cond::Observed(p) => p.kind_bits(),
            Cond::Defined(e) | Cond::Equals(e, _) => e.reads(),
            Cond::Or(a, b) => a.reads() | b.reads(),
        }
    }

    pub fn or(a: Cond, b: Cond) -> Cond {
        Cond::Or(Box::new(a), Box::new(b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MsgExpr {
    Init,
    Output(Expr),
    Propose(Expr),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Communication,
    Computation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instr {
    /// `dst ← pseudo_random_pick(from)`.
    Pick {
        dst: Reg,
        from: Vec<Output>,
    },
    Assign {
        dst: Reg,
        expr: Expr,
    },
    Communicate(MsgExpr),
    Output(Expr),
    /// Block until the condition holds.
    WaitUntil(Cond),
    /// Local-time wait: the round-1 communication step under synchrony, a
    /// fixed logical deadline under asynchrony.
    WaitTimer,
    /// Synchronous only: block until the given round step begins. Uncounted.
    AwaitRound {
        round: u32,
        phase: Phase,
    },
    /// Evaluate `cond`; fall through if it holds, jump to `otherwise` if not.
    Branch {
        cond: Cond,
        otherwise: usize,
    },
    /// Uncounted.
    Jump(usize),
}

impl Instr {
    pub fn reads(&self) -> u8 {
        match self {
            Instr::Assign { expr, .. } | Instr::Output(expr) => expr.reads(),
            Instr::Communicate(MsgExpr::Output(e) | MsgExpr::Propose(e)) => e.reads(),
            Instr::WaitUntil(c) | Instr::Branch { cond: c, .. } => c.reads(),
            _ => 0,
        }
    }

    pub fn is_counted(&self) -> bool {
        !matches!(self, Instr::Jump(_) | Instr::AwaitRound { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Line {
    pub label: &'static str,
    pub instr: Instr,
}

/// One process's compiled program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub lines: Vec<Line>,
}

impl Program {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Longest number of counted steps along any path.
    pub fn max_steps(&self) -> usize {
        self.longest_path(|i| i.is_counted())
    }

    /// Largest number of `communicate` statements along any path.
    pub fn max_emissions(&self) -> usize {
        self.longest_path(|i| matches!(i, Instr::Communicate(_)))
    }

    /// For every pc (and the end), the payload kinds any instruction from
    /// there on may read. Jumps only go forward, so suffixes over-approximate.
    pub fn reads_from(&self) -> Vec<u8> {
        let mut masks = alloc::vec![0u8; self.lines.len() + 1];
        for pc in (0..self.lines.len()).rev() {
            masks[pc] = masks[pc + 1] | self.lines[pc].instr.reads();
        }
        masks
    }

    fn longest_path(&self, weight: impl Fn(&Instr) -> bool) -> usize {
        // jumps only go forward, so a reverse sweep suffices
        let len = self.lines.len();
        let mut best = alloc::vec![0usize; len + 1];
        for pc in (0..len).rev() {
            let instr = &self.lines[pc].instr;
            let w = usize::from(weight(instr));
            let succ = match instr {
                Instr::Jump(to) => best[*to],
                Instr::Branch { otherwise, .. } => best[pc + 1].max(best[*otherwise]),
                _ => best[pc + 1],
            };
            best[pc] = w + succ;
        }
        best[0]
    }
}

/// Structured builder producing a [`Program`].
#[derive(Default)]
pub struct ProgramBuilder {
    lines: Vec<Line>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: &'static str, instr: Instr) -> &mut Self {
        self.lines.push(Line { label, instr });
        self
    }

    /// `if cond { body }`
    pub fn if_then(&mut self, label: &'static str, cond: Cond, body: impl FnOnce(&mut Self)) -> &mut Self {
        let at = self.lines.len();
        self.push(label, Instr::Branch { cond, otherwise: usize::MAX });
        body(self);
        let end = self.lines.len();
        self.patch(at, end);
        self
    }

    /// `if cond { then } else { otherwise }`
    pub fn if_else(
        &mut self,
        label: &'static str,
        cond: Cond,
        then: impl FnOnce(&mut Self),
        otherwise: impl FnOnce(&mut Self),
    ) -> &mut Self {
        let at = self.lines.len();
        self.push(label, Instr::Branch { cond, otherwise: usize::MAX });
        then(self);
        let jump = self.lines.len();
        self.push(label, Instr::Jump(usize::MAX));
        let else_start = self.lines.len();
        self.patch(at, else_start);
        otherwise(self);
        let end = self.lines.len();
        self.lines[jump].instr = Instr::Jump(end);
        self
    }

    fn patch(&mut self, at: usize, target: usize) {
        if let Instr::Branch { otherwise, .. } = &mut self.lines[at].instr {
            *otherwise = target;
        }
    }

    pub fn build(self) -> Program {
        Program { lines: self.lines }
    }
}
