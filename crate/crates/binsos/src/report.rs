//! Serialized verdicts and table reports.

use binsos_core::checker::{CellReport, Completeness, Safety, TableReport, Verdict};
use binsos_core::{AlgorithmKind, DelayPattern, FailurePattern, OutputSet, SystemConfig, Timing, TraceHeader};
use serde::{Deserialize, Serialize};

/// Replay key of a witness or violation; the instance follows from the
/// record it sits in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRef {
    pub output_set: OutputSet,
    pub seed: u64,
    pub fp: FailurePattern,
    pub dp: DelayPattern,
}

impl ExecutionRef {
    fn new(output_set: OutputSet, h: &TraceHeader) -> Self {
        ExecutionRef { output_set, seed: h.seed, fp: h.fp.clone(), dp: h.dp.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub line: u8,
    pub timing: Timing,
    pub n: usize,
    pub t: usize,
    pub condition_holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_mask: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<Safety>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completeness: Option<Completeness>,
    pub horizon_hits: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witness_refs: Vec<ExecutionRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violation_refs: Vec<ExecutionRef>,
    pub executions: u64,
    pub states: u64,
    pub exhaustive: bool,
    pub budget_exhausted: bool,
}

impl CellRecord {
    pub fn new(line: u8, cfg: SystemConfig, condition_holds: bool, verdict: Option<&Verdict>) -> Self {
        let mut r = CellRecord {
            line,
            timing: cfg.timing,
            n: cfg.n,
            t: cfg.t,
            condition_holds,
            observed_mask: None,
            safety: None,
            completeness: None,
            horizon_hits: 0,
            witness_refs: Vec::new(),
            violation_refs: Vec::new(),
            executions: 0,
            states: 0,
            exhaustive: false,
            budget_exhausted: false,
        };
        if let Some(v) = verdict {
            r.observed_mask = Some(v.observed.mask());
            r.safety = Some(v.safety());
            r.completeness = Some(v.completeness());
            r.horizon_hits = v.horizon_hits;
            r.witness_refs = v.witnesses.iter().map(|w| ExecutionRef::new(w.output_set, &w.header)).collect();
            r.violation_refs = v
                .violations
                .iter()
                .filter_map(|x| x.header.as_ref().map(|h| ExecutionRef::new(x.output_set, h)))
                .collect();
            r.executions = v.executions;
            r.states = v.states;
            r.exhaustive = v.exhaustive;
            r.budget_exhausted = v.budget_exhausted;
        }
        r
    }

    pub fn from_cell(c: &CellReport) -> Self {
        let cfg = SystemConfig { n: c.n, t: c.t, timing: c.timing };
        Self::new(c.line, cfg, c.condition_holds, c.verdict.as_ref())
    }

    pub fn passed(&self) -> bool {
        !self.condition_holds || (self.safety == Some(Safety::Ok) && self.completeness == Some(Completeness::Complete))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDocument {
    pub n_max: usize,
    pub passed: bool,
    pub cells: Vec<CellRecord>,
}

impl From<&TableReport> for TableDocument {
    fn from(r: &TableReport) -> Self {
        TableDocument { n_max: r.n_max, passed: r.passed(), cells: r.cells.iter().map(CellRecord::from_cell).collect() }
    }
}

/// Result of checking one instance against the set it claims.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckDocument {
    pub algorithm: AlgorithmKind,
    pub target_mask: u8,
    #[serde(flatten)]
    pub cell: CellRecord,
}

/// `{∅,{0,1}}`-style rendering of a mask.
pub fn render_mask(mask: u8) -> String {
    let sets: Vec<String> = OutputSet::ALL.iter().filter(|o| mask & o.mask_bit() != 0).map(|o| o.to_string()).collect();
    format!("{{{}}}", sets.join(","))
}
