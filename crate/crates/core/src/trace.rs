//! Operation traces: the unit of exchange between the simulator and the
//! analyzer, plus CSV persistence.
//!
//! On disk a trace is UTF-8 CSV with LF line endings. Optional metadata lines
//! of the form `# key=value` may precede the header row.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{OperationRecord, INITIAL_VALUE};

pub const TRACE_HEADER: &str =
    "op_id,client_id,key,kind,value_id,invoke_us,response_us,level,pre_delay_us,post_delay_us";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceMeta {
    pub config_digest: String,
    pub seed: u64,
    /// Virtual duration of the transaction phase.
    pub duration_us: i64,
    /// Number of leading records that belong to the load phase.
    pub load_ops: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<OperationRecord>,
}

impl Trace {
    pub fn new(records: Vec<OperationRecord>) -> Self {
        Trace {
            meta: TraceMeta::default(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: OperationRecord) {
        self.records.push(record);
    }

    /// Records of the transaction phase, i.e. everything after the load prefix.
    pub fn transaction_records(&self) -> &[OperationRecord] {
        &self.records[self.meta.load_ops.min(self.records.len())..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    TimeOrder,
    DanglingValue,
    DuplicateOpId,
    DuplicateWriteValue,
    NegativeDelay,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::TimeOrder => "time order",
            Rule::DanglingValue => "dangling value",
            Rule::DuplicateOpId => "duplicate op_id",
            Rule::DuplicateWriteValue => "duplicate write value",
            Rule::NegativeDelay => "negative delay",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub op_id: u64,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "op {}: {}", self.op_id, self.rule)
    }
}

/// Checks every trace invariant and returns the violations found, in record order.
pub fn validate_trace(trace: &Trace) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut ids = HashSet::with_capacity(trace.len());
    let mut written: HashMap<(u64, u64), u64> = HashMap::new();

    for r in &trace.records {
        if !ids.insert(r.op_id) {
            violations.push(Violation { op_id: r.op_id, rule: Rule::DuplicateOpId });
        }
        if r.response < r.invoke {
            violations.push(Violation { op_id: r.op_id, rule: Rule::TimeOrder });
        }
        if r.pre_delay_us < 0 || r.post_delay_us < 0 {
            violations.push(Violation { op_id: r.op_id, rule: Rule::NegativeDelay });
        }
        if r.is_write() && written.insert((r.key, r.value_id), r.op_id).is_some() {
            violations.push(Violation { op_id: r.op_id, rule: Rule::DuplicateWriteValue });
        }
    }
    for r in trace.records.iter().filter(|r| r.is_read()) {
        if r.value_id != INITIAL_VALUE && !written.contains_key(&(r.key, r.value_id)) {
            violations.push(Violation { op_id: r.op_id, rule: Rule::DanglingValue });
        }
    }
    violations
}

pub fn write_trace<W: Write>(trace: &Trace, out: W) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let m = &trace.meta;
    writeln!(out, "# seed={}", m.seed)?;
    writeln!(out, "# config_digest={}", m.config_digest)?;
    writeln!(out, "# duration_us={}", m.duration_us)?;
    writeln!(out, "# load_ops={}", m.load_ops)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if trace.records.is_empty() {
        w.write_record(TRACE_HEADER.split(','))?;
    }
    for r in &trace.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(trace: &Trace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(trace, file).map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(file, path)
}

/// Parses a trace; `origin` only labels error messages.
pub fn read_trace<R: Read>(input: R, origin: &Path) -> Result<Trace> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut reader = BufReader::new(input);
    let mut meta = TraceMeta::default();
    let mut line_no = 0u64;
    let mut line = String::new();

    let header = loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::io(origin, e))?;
        line_no += 1;
        if n == 0 {
            return Err(parse_err(line_no, "missing header row".into()));
        }
        let text = line.trim_end_matches(['\n', '\r']);
        let Some(comment) = text.strip_prefix('#') else {
            break text.to_owned();
        };
        let Some((k, v)) = comment.trim().split_once('=') else {
            continue;
        };
        let num_err = |e: std::num::ParseIntError| parse_err(line_no, format!("{k}: {e}"));
        match k.trim() {
            "seed" => meta.seed = v.trim().parse().map_err(num_err)?,
            "config_digest" => meta.config_digest = v.trim().to_owned(),
            "duration_us" => meta.duration_us = v.trim().parse().map_err(num_err)?,
            "load_ops" => meta.load_ops = v.trim().parse().map_err(num_err)?,
            _ => {}
        }
    };
    if header != TRACE_HEADER {
        return Err(parse_err(line_no, format!("unexpected header `{header}`")));
    }

    let header_line = line_no;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let headers = csv::StringRecord::from(TRACE_HEADER.split(',').collect::<Vec<_>>());
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line()) + header_line;
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line()) + header_line;
        let rec: OperationRecord = row
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, e.to_string()))?;
        records.push(rec);
    }
    Ok(Trace { meta, records })
}
