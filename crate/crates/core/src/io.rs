//! CSV formats for observation streams and state paths.
//!
//! Observations: optional `#` comment lines, an optional `t,x` header, then
//! one sample per row (`t,x` or just `x`). Paths: `phase_index,state,duration,censored`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::State;
use crate::sequence::{Phase, PhaseSequence};

/// Input with blank and `#` lines removed, plus the original line number of every kept
/// line, so that parse errors point at the file the user wrote.
struct Uncommented {
    text: String,
    lines: Vec<u64>,
}

impl Uncommented {
    fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut raw = String::new();
        input.read_to_string(&mut raw)?;
        let mut text = String::with_capacity(raw.len());
        let mut lines = Vec::new();
        for (i, l) in raw.lines().enumerate() {
            let trimmed = l.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            text.push_str(l);
            text.push('\n');
            lines.push(i as u64 + 1);
        }
        Ok(Uncommented { text, lines })
    }

    fn original(&self, line: u64) -> u64 {
        self.lines.get((line as usize).wrapping_sub(1)).copied().unwrap_or(line)
    }

    fn reader(&self, has_headers: bool) -> csv::Reader<&[u8]> {
        csv::ReaderBuilder::new()
            .has_headers(has_headers)
            .trim(csv::Trim::All)
            .flexible(!has_headers)
            .from_reader(self.text.as_bytes())
    }

    fn line_of(&self, record: &csv::StringRecord) -> u64 {
        self.original(record.position().map_or(0, |p| p.line()))
    }

    fn error(&self, e: csv::Error) -> Error {
        let line = e.position().map_or(0, |p| self.original(p.line()));
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}

fn write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("{other:?}")),
    }
}

/// Reads an observation stream. Every value must be finite.
pub fn read_observations<R: Read>(input: R) -> Result<Vec<f64>> {
    let src = Uncommented::read(input)?;
    let mut out = Vec::new();
    let mut first = true;
    for record in src.reader(false).records() {
        let record = record.map_err(|e| src.error(e))?;
        let line = src.line_of(&record);
        let field = match record.len() {
            1 => &record[0],
            2 => &record[1],
            n => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 1 or 2 columns, found {n}"),
                })
            }
        };
        let is_header = first && field.parse::<f64>().is_err();
        first = false;
        if is_header {
            continue;
        }
        let value: f64 = field.parse().map_err(|_| Error::Parse {
            line,
            message: format!("not a number: {field:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite sample {field:?}"),
            });
        }
        out.push(value);
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("observation file contains no samples".into()));
    }
    Ok(out)
}

/// Writes `t,x` rows (1-based `t`) after one `#` line per metadata entry.
pub fn write_observations<W: Write>(mut out: W, x: &[f64], metadata: &[(&str, String)]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x"]).map_err(write_error)?;
    for (i, v) in x.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()]).map_err(write_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PhaseRow {
    phase_index: usize,
    state: u8,
    duration: usize,
    censored: bool,
}

pub fn write_phase_sequence<W: Write>(out: W, seq: &PhaseSequence) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, p) in seq.phases().iter().enumerate() {
        w.serialize(PhaseRow {
            phase_index: i + 1,
            state: p.state.number(),
            duration: p.duration,
            censored: p.censored,
        })
        .map_err(write_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_phase_sequence<R: Read>(input: R, delta: usize) -> Result<PhaseSequence> {
    let src = Uncommented::read(input)?;
    let mut rdr = src.reader(true);
    let mut phases = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| src.error(e))?;
        let line = src.line_of(&record);
        let row: PhaseRow = record.deserialize(None).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if row.phase_index != phases.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected phase_index {}, found {}", phases.len() + 1, row.phase_index),
            });
        }
        let state = State::from_number(row.state).ok_or_else(|| Error::Parse {
            line,
            message: format!("state must be 1 or 2, found {}", row.state),
        })?;
        phases.push(Phase {
            state,
            duration: row.duration,
            censored: row.censored,
        });
    }
    PhaseSequence::new(phases, delta)
}
