//! Binary output sets, the sixteen sets of output sets, and the tight
//! solvability conditions attached to each of them.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A binary output value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub const ALL: [Bit; 2] = [Bit::Zero, Bit::One];

    /// One's complement, `1 ⊕ v`.
    pub fn complement(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Bit> {
        match v {
            0 => Some(Bit::Zero),
            1 => Some(Bit::One),
            _ => None,
        }
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// A possibly-absent output: `None` is the "no output" sentinel.
pub type Output = Option<Bit>;

/// Per-process outputs of one execution, indexed by process position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutputVector(pub Vec<Output>);

impl OutputVector {
    pub fn empty(n: usize) -> Self {
        OutputVector(alloc::vec![None; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn output_set(&self) -> OutputSet {
        output_set(&self.0)
    }
}

impl fmt::Display for OutputVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, o) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match o {
                Some(b) => write!(f, "{b}")?,
                None => f.write_str("⊥")?,
            }
        }
        f.write_str(")")
    }
}

/// The set of distinct values produced by an execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutputSet {
    Empty,
    Zero,
    One,
    Both,
}

impl OutputSet {
    /// Column order of the characterization table.
    pub const ALL: [OutputSet; 4] = [OutputSet::Empty, OutputSet::Zero, OutputSet::One, OutputSet::Both];

    pub fn singleton(b: Bit) -> OutputSet {
        match b {
            Bit::Zero => OutputSet::Zero,
            Bit::One => OutputSet::One,
        }
    }

    pub fn contains(self, b: Bit) -> bool {
        matches!((self, b), (OutputSet::Both, _) | (OutputSet::Zero, Bit::Zero) | (OutputSet::One, Bit::One))
    }

    pub fn insert(self, b: Bit) -> OutputSet {
        self.union(OutputSet::singleton(b))
    }

    pub fn union(self, other: OutputSet) -> OutputSet {
        OutputSet::from_values(
            self.contains(Bit::Zero) || other.contains(Bit::Zero),
            self.contains(Bit::One) || other.contains(Bit::One),
        )
    }

    pub fn intersection(self, other: OutputSet) -> OutputSet {
        OutputSet::from_values(
            self.contains(Bit::Zero) && other.contains(Bit::Zero),
            self.contains(Bit::One) && other.contains(Bit::One),
        )
    }

    pub fn is_subset(self, other: OutputSet) -> bool {
        self.union(other) == other
    }

    fn from_values(zero: bool, one: bool) -> OutputSet {
        match (zero, one) {
            (false, false) => OutputSet::Empty,
            (true, false) => OutputSet::Zero,
            (false, true) => OutputSet::One,
            (true, true) => OutputSet::Both,
        }
    }

    pub fn cardinality(self) -> usize {
        match self {
            OutputSet::Empty => 0,
            OutputSet::Zero | OutputSet::One => 1,
            OutputSet::Both => 2,
        }
    }

    /// Bit position inside a [`SetOfOutputSets`] mask.
    pub fn mask_bit(self) -> u8 {
        match self {
            OutputSet::Empty => 1,
            OutputSet::Zero => 2,
            OutputSet::One => 4,
            OutputSet::Both => 8,
        }
    }

    pub fn is_singleton(self) -> bool {
        self.cardinality() == 1
    }
}

impl fmt::Display for OutputSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputSet::Empty => "∅",
            OutputSet::Zero => "{0}",
            OutputSet::One => "{1}",
            OutputSet::Both => "{0,1}",
        })
    }
}

/// Set of distinct non-⊥ values among `outputs`.
pub fn output_set(outputs: &[Output]) -> OutputSet {
    outputs.iter().flatten().fold(OutputSet::Empty, |acc, &b| acc.insert(b))
}

/// A subset of the four output sets, stored as a 4-bit mask
/// (bit 0 = ∅, bit 1 = {0}, bit 2 = {1}, bit 3 = {0,1}).
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SetOfOutputSets(u8);

impl SetOfOutputSets {
    pub const EMPTY: SetOfOutputSets = SetOfOutputSets(0);
    pub const FULL: SetOfOutputSets = SetOfOutputSets(0b1111);

    pub fn from_mask(mask: u8) -> Result<Self, Error> {
        if mask > 0b1111 {
            return Err(Error::InvalidMask(mask));
        }
        Ok(SetOfOutputSets(mask))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn of(members: &[OutputSet]) -> Self {
        members.iter().fold(Self::EMPTY, |acc, &o| acc.with(o))
    }

    pub fn with(self, o: OutputSet) -> Self {
        SetOfOutputSets(self.0 | o.mask_bit())
    }

    pub fn contains(self, o: OutputSet) -> bool {
        self.0 & o.mask_bit() != 0
    }

    pub fn union(self, other: Self) -> Self {
        SetOfOutputSets(self.0 | other.0)
    }

    /// Members of `self` that are not in `other`.
    pub fn difference(self, other: Self) -> Self {
        SetOfOutputSets(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn members(self) -> impl Iterator<Item = OutputSet> {
        OutputSet::ALL.into_iter().filter(move |o| self.contains(*o))
    }

    /// All sixteen subsets, by increasing mask.
    pub fn all() -> impl Iterator<Item = SetOfOutputSets> {
        (0u8..16).map(SetOfOutputSets)
    }
}

impl fmt::Debug for SetOfOutputSets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SetOfOutputSets({self})")
    }
}

impl fmt::Display for SetOfOutputSets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, o) in self.members().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{o}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Timing {
    Async,
    Sync,
}

impl Timing {
    pub const ALL: [Timing; 2] = [Timing::Async, Timing::Sync];
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Timing::Async => "async",
            Timing::Sync => "sync",
        })
    }
}

/// `(n, t, timing)`: process count, crash bound, timing model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: usize,
    pub t: usize,
    pub timing: Timing,
}

impl SystemConfig {
    pub fn new(n: usize, t: usize, timing: Timing) -> Result<Self, Error> {
        if t > n {
            return Err(Error::CrashBoundExceedsProcesses { n, t });
        }
        Ok(SystemConfig { n, t, timing })
    }
}

impl fmt::Display for SystemConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} t={} {}", self.n, self.t, self.timing)
    }
}

/// Row index (1..=16) of the characterization table for `o`.
///
/// Rows run from "everything allowed" down to "nothing allowed", so the row
/// is the complement of the member mask.
pub fn classify_line(o: SetOfOutputSets) -> u8 {
    16 - o.mask()
}

/// Inverse of [`classify_line`].
pub fn line_members(line: u8) -> Result<SetOfOutputSets, Error> {
    if !(1..=16).contains(&line) {
        return Err(Error::InvalidLine(line));
    }
    Ok(SetOfOutputSets(16 - line))
}

/// Integer-only predicate over `(n, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// `n >= t && n >= min_n`
    AtLeast { min_n: usize },
    /// `n > t && n >= min_n`
    MoreThanT { min_n: usize },
    /// `n >= t + 2 && n >= 2`
    TwoCorrect,
    /// `2n > 3t + 2 && n >= 2`
    ThreeHalves,
    /// `t == 0 && n >= 1`
    NoCrashes,
    /// Always false.
    Unsolvable,
}

impl Condition {
    pub fn holds(self, n: usize, t: usize) -> bool {
        match self {
            Condition::AtLeast { min_n } => n >= t && n >= min_n,
            Condition::MoreThanT { min_n } => n > t && n >= min_n,
            Condition::TwoCorrect => n >= t + 2 && n >= 2,
            Condition::ThreeHalves => 2 * n > 3 * t + 2 && n >= 2,
            Condition::NoCrashes => t == 0 && n >= 1,
            Condition::Unsolvable => false,
        }
    }

    /// Integer form, e.g. `2n > 3t+2 && n >= 2`.
    pub fn render(self) -> alloc::string::String {
        use alloc::format;
        match self {
            Condition::AtLeast { min_n } => format!("n >= t && n >= {min_n}"),
            Condition::MoreThanT { min_n } => format!("n > t && n >= {min_n}"),
            Condition::TwoCorrect => "n >= t+2 && n >= 2".into(),
            Condition::ThreeHalves => "2n > 3t+2 && n >= 2".into(),
            Condition::NoCrashes => "t == 0 && n >= 1".into(),
            Condition::Unsolvable => "false".into(),
        }
    }
}

/// Tight solvability condition for a table row under a timing model.
pub fn tight_condition(line: u8, timing: Timing) -> Result<Condition, Error> {
    use Condition::*;
    Ok(match (line, timing) {
        (1 | 3 | 5, _) => AtLeast { min_n: 2 },
        (2 | 4 | 6, _) => MoreThanT { min_n: 2 },
        (7 | 8, Timing::Async) => ThreeHalves,
        (7 | 8, Timing::Sync) => TwoCorrect,
        (9 | 11 | 13, _) => AtLeast { min_n: 1 },
        (10, Timing::Async) => NoCrashes,
        (10, Timing::Sync) => MoreThanT { min_n: 1 },
        (12 | 14, _) => MoreThanT { min_n: 1 },
        (15, _) => AtLeast { min_n: 0 },
        (16, _) => Unsolvable,
        _ => return Err(Error::InvalidLine(line)),
    })
}

/// `(max |o|, min |o|)` over the members of `o`: the least `n` and the least
/// `n - t` any implementation needs.
pub fn observation1_bounds(o: SetOfOutputSets) -> Result<(usize, usize), Error> {
    let max = o.members().map(OutputSet::cardinality).max();
    let min = o.members().map(OutputSet::cardinality).min();
    match (max, min) {
        (Some(max), Some(min)) => Ok((max, min)),
        _ => Err(Error::EmptyTarget),
    }
}

/// One exported row of the characterization table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub line: u8,
    pub members_mask: u8,
    pub timing: Timing,
    pub condition: alloc::string::String,
}

/// All 16 rows × both timing models.
pub fn table_rows() -> Vec<TableRow> {
    let mut rows = Vec::with_capacity(32);
    for line in 1..=16u8 {
        for timing in Timing::ALL {
            let cond = tight_condition(line, timing).expect("line in range");
            rows.push(TableRow {
                line,
                members_mask: line_members(line).expect("line in range").mask(),
                timing,
                condition: cond.render(),
            });
        }
    }
    rows
}
