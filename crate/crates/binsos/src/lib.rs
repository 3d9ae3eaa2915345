//! Trace files, reports, parallel checking and the `binsos` command line on
//! top of `binsos-core`.

pub mod cli;
pub mod error;
pub mod parallel;
pub mod report;
pub mod spec;
pub mod trace_io;

pub use error::{Error, Exit};
pub use report::{CellRecord, CheckDocument, ExecutionRef, TableDocument};
pub use spec::RunSpec;
pub use trace_io::{read_header, read_trace, write_trace};
