//! Line-delimited JSON trace files.
//!
//! The first line holds the header, then one line per event with fields
//! `seq, time, pid, kind, payload`, then a closing line with the outcome.
//! Replaying needs the header line only.

use std::io::{BufRead, Write};

use binsos_core::kernel::Status;
use binsos_core::{Event, EventKind, ExecutionTrace, OutputVector, ProcessId, Termination, TraceHeader};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Error;

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub time: u32,
    pub pid: ProcessId,
    pub kind: String,
    pub payload: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct Outcome {
    termination: Termination,
    outputs: OutputVector,
    statuses: Vec<Status>,
}

#[derive(Serialize, Deserialize)]
struct EndLine {
    end: Outcome,
}

impl EventRecord {
    pub fn from_event(e: &Event) -> Result<Self, Error> {
        let Value::Object(mut payload) = serde_json::to_value(e.kind)? else {
            unreachable!("event kinds serialize as objects")
        };
        let Some(Value::String(kind)) = payload.remove("kind") else { unreachable!("event kinds carry a tag") };
        Ok(EventRecord { seq: e.seq, time: e.time, pid: e.pid, kind, payload })
    }

    pub fn to_event(&self) -> Result<Event, Error> {
        let mut obj = self.payload.clone();
        obj.insert("kind".into(), Value::String(self.kind.clone()));
        let kind: EventKind = serde_json::from_value(Value::Object(obj))?;
        Ok(Event { seq: self.seq, time: self.time, pid: self.pid, kind })
    }
}

pub fn write_trace(mut w: impl Write, trace: &ExecutionTrace) -> Result<(), Error> {
    serde_json::to_writer(&mut w, &HeaderLine { header: trace.header.clone() })?;
    w.write_all(b"\n")?;
    for e in &trace.events {
        serde_json::to_writer(&mut w, &EventRecord::from_event(e)?)?;
        w.write_all(b"\n")?;
    }
    let end = EndLine {
        end: Outcome {
            termination: trace.termination,
            outputs: trace.outputs.clone(),
            statuses: trace.statuses.clone(),
        },
    };
    serde_json::to_writer(&mut w, &end)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(trace: &ExecutionTrace) -> Result<String, Error> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace)?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::TraceFormat { line, reason: reason.into() }
}

fn numbered(r: impl BufRead) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    r.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()))
}

/// Reads only the header line.
pub fn read_header(r: impl BufRead) -> Result<TraceHeader, Error> {
    let (no, line) = numbered(r).next().ok_or_else(|| bad(1, "empty trace file"))?;
    let line = line?;
    let h: HeaderLine = serde_json::from_str(&line).map_err(|e| bad(no, e.to_string()))?;
    Ok(h.header)
}

pub fn read_trace(r: impl BufRead) -> Result<ExecutionTrace, Error> {
    let mut lines = numbered(r);
    let (no, first) = lines.next().ok_or_else(|| bad(1, "empty trace file"))?;
    let header = serde_json::from_str::<HeaderLine>(&first?).map_err(|e| bad(no, e.to_string()))?.header;
    let mut events = Vec::new();
    let mut end = None;
    for (no, line) in lines {
        let line = line?;
        if end.is_some() {
            return Err(bad(no, "content after the closing line"));
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| bad(no, e.to_string()))?;
        if v.get("end").is_some() {
            end = Some(serde_json::from_value::<EndLine>(v).map_err(|e| bad(no, e.to_string()))?.end);
        } else {
            let rec: EventRecord = serde_json::from_value(v).map_err(|e| bad(no, e.to_string()))?;
            events.push(rec.to_event().map_err(|e| bad(no, e.to_string()))?);
        }
    }
    let end = end.ok_or_else(|| bad(0, "missing closing line"))?;
    Ok(ExecutionTrace { header, events, outputs: end.outputs, termination: end.termination, statuses: end.statuses })
}
