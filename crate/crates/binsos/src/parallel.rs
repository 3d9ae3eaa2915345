//! Multi-threaded exploration. Sampled triples are split into index
//! chunks and the per-chunk verdicts merged; table cells run side by side.

use binsos_core::checker::{
    check_cell, explore_exhaustive, explore_samples, table_cells, ExplorationBudget, TableReport, Verdict,
};
use binsos_core::{AlgorithmInstance, Kernel, RunOptions, SetOfOutputSets, SystemConfig};
use rayon::prelude::*;

use crate::error::Error;

const CHUNK: u64 = 512;

/// Sampled triples `0..count`, explored in parallel chunks.
pub fn sample_parallel(
    kernel: &Kernel,
    target: SetOfOutputSets,
    count: u64,
    sample_seed: u64,
) -> Result<Verdict, Error> {
    let chunks: Vec<u64> = (0..count.div_ceil(CHUNK)).collect();
    let parts = chunks
        .par_iter()
        .map(|&c| explore_samples(kernel, target, c * CHUNK..((c + 1) * CHUNK).min(count), sample_seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.into_iter().fold(Verdict::empty(target), Verdict::merge))
}

/// Same contract as the sequential explorer, with sampling spread over threads.
pub fn explore_parallel(
    instance: &AlgorithmInstance,
    cfg: SystemConfig,
    target: SetOfOutputSets,
    budget: ExplorationBudget,
) -> Result<Verdict, Error> {
    let kernel = Kernel::new(instance.clone(), cfg, RunOptions { horizon: budget.horizon, deadline: budget.deadline })?;
    // the two extreme triples come on top of the requested samples
    let sampled = || sample_parallel(&kernel, target, budget.samples as u64 + 2, budget.sample_seed);
    match budget.exhaustive {
        Some(true) => Ok(explore_exhaustive(&kernel, target, budget.state_cap)?),
        Some(false) => sampled(),
        None => {
            let v = explore_exhaustive(&kernel, target, budget.state_cap)?;
            if v.budget_exhausted {
                sampled()
            } else {
                Ok(v)
            }
        }
    }
}

/// Every table cell up to `n_max`, checked concurrently.
pub fn check_table_parallel(budget: ExplorationBudget, n_max: usize) -> Result<TableReport, Error> {
    if n_max < 2 {
        return Err(Error::usage("the table check needs n_max ≥ 2"));
    }
    let cells = table_cells(n_max)
        .into_par_iter()
        .map(|(line, timing, n, t, _)| check_cell(line, timing, n, t, budget))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TableReport { n_max, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use binsos_core::checker::{check_table, explore_against};
    use binsos_core::{AlgorithmKind, Timing};

    #[test]
    fn parallel_sampling_matches_sequential() {
        let inst = AlgorithmInstance::new(AlgorithmKind::AsyncDisagreement { no_out: true }, 5, 2).unwrap();
        let cfg = SystemConfig::new(5, 2, Timing::Async).unwrap();
        let budget = ExplorationBudget::sampled(2000, 3);
        let target = inst.kind.claimed_set();
        let seq = explore_against(&inst, cfg, target, budget).unwrap();
        let par = explore_parallel(&inst, cfg, target, budget).unwrap();
        assert_eq!(seq.observed, par.observed);
        assert_eq!(seq.executions, par.executions);
        assert_eq!(seq.violation_count, par.violation_count);
        let sets = |v: &Verdict| v.witnesses.iter().map(|w| w.output_set).collect::<Vec<_>>();
        assert_eq!(sets(&seq), sets(&par));
    }

    #[test]
    fn parallel_table_matches_sequential() {
        let budget = ExplorationBudget::exhaustive(100_000);
        assert_eq!(check_table_parallel(budget, 3).unwrap(), check_table(budget, 3).unwrap());
        assert!(matches!(check_table_parallel(budget, 1), Err(Error::Usage(_))));
    }
}
