use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{explore_against, ExplorationBudget, Verdict};
use crate::algorithms::{instance_for_line, AlgorithmInstance};
use crate::error::Error;
use crate::outputsets::{line_members, tight_condition, SystemConfig, Timing};

/// One `(line, timing, n, t)` cell of the characterization matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellReport {
    pub line: u8,
    pub timing: Timing,
    pub n: usize,
    pub t: usize,
    pub condition_holds: bool,
    /// Present only where the condition holds.
    pub verdict: Option<Verdict>,
}

impl CellReport {
    pub fn passed(&self) -> bool {
        !self.condition_holds || self.verdict.as_ref().is_some_and(Verdict::passed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableReport {
    pub n_max: usize,
    pub cells: Vec<CellReport>,
}

impl TableReport {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(CellReport::passed)
    }

    /// Cells whose condition holds.
    pub fn checked(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| c.condition_holds)
    }

    pub fn budget_exhausted(&self) -> bool {
        self.checked().any(|c| c.verdict.as_ref().is_some_and(|v| v.budget_exhausted))
    }
}

/// Every `(line, timing, n, t, condition holds)` with `line ≤ 15`,
/// `n ≤ n_max` and `t ≤ n`.
pub fn table_cells(n_max: usize) -> Vec<(u8, Timing, usize, usize, bool)> {
    let mut cells = Vec::new();
    for line in 1..=15u8 {
        for timing in Timing::ALL {
            let cond = tight_condition(line, timing).expect("line in range");
            for n in 0..=n_max {
                for t in 0..=n {
                    cells.push((line, timing, n, t, cond.holds(n, t)));
                }
            }
        }
    }
    cells
}

/// Explores the line's instance at `(n, t)` against the line's members.
pub fn check_cell(
    line: u8,
    timing: Timing,
    n: usize,
    t: usize,
    budget: ExplorationBudget,
) -> Result<CellReport, Error> {
    let holds = tight_condition(line, timing)?.holds(n, t);
    let verdict = if holds {
        let instance = AlgorithmInstance::new(instance_for_line(line, timing)?, n, t)?;
        let cfg = SystemConfig::new(n, t, timing)?;
        Some(explore_against(&instance, cfg, line_members(line)?, budget)?)
    } else {
        None
    };
    Ok(CellReport { line, timing, n, t, condition_holds: holds, verdict })
}

/// Sequential matrix check; the command-line driver runs cells in parallel.
pub fn check_table(budget: ExplorationBudget, n_max: usize) -> Result<TableReport, Error> {
    if n_max < 2 {
        return Err(Error::Precondition("the table check needs n_max ≥ 2".into()));
    }
    let cells = table_cells(n_max)
        .into_iter()
        .map(|(line, timing, n, t, _)| check_cell(line, timing, n, t, budget))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TableReport { n_max, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn holding(n_max: usize, line: u8, timing: Timing) -> Vec<(usize, usize)> {
        table_cells(n_max).into_iter().filter(|c| c.0 == line && c.1 == timing && c.4).map(|c| (c.2, c.3)).collect()
    }

    #[test]
    fn line_10_async_cells() {
        assert_eq!(holding(4, 10, Timing::Async), [(1, 0), (2, 0), (3, 0), (4, 0)]);
    }

    #[test]
    fn line_8_async_cells() {
        // 2n > 3t+2 and n ≥ 2 over n ≤ 4
        assert_eq!(holding(4, 8, Timing::Async), [(2, 0), (3, 0), (3, 1), (4, 0), (4, 1)]);
    }

    #[test]
    fn sync_disagreement_cells_at_two() {
        assert_eq!(holding(2, 7, Timing::Sync), [(2, 0)]);
        assert_eq!(holding(2, 8, Timing::Sync), [(2, 0)]);
    }

    #[test]
    fn small_table_passes() {
        assert!(check_table(ExplorationBudget::exhaustive(100_000), 1).is_err());
        let r = check_table(ExplorationBudget::exhaustive(100_000), 2).unwrap();
        assert!(r.passed(), "{:?}", r.cells.iter().filter(|c| !c.passed()).collect::<Vec<_>>());
    }
}
