//! Event log: one tab-separated record per line, `time seq kind payload`.

use std::fmt::Write as _;
use std::io::{self, BufWriter, Write};

pub const ABORT_KIND: &str = "Abort";

enum Sink {
    Memory(Vec<u8>),
    Writer(BufWriter<Box<dyn Write + Send>>),
    Null,
}

pub struct EventLog {
    sink: Sink,
    records: u64,
    line: String,
    error: Option<io::Error>,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog").field("records", &self.records).finish()
    }
}

impl EventLog {
    pub fn memory() -> Self {
        Self::with(Sink::Memory(Vec::new()))
    }

    pub fn to_writer(w: Box<dyn Write + Send>) -> Self {
        Self::with(Sink::Writer(BufWriter::with_capacity(1 << 16, w)))
    }

    /// Counts records but keeps nothing.
    pub fn null() -> Self {
        Self::with(Sink::Null)
    }

    fn with(sink: Sink) -> Self {
        Self {
            sink,
            records: 0,
            line: String::with_capacity(128),
            error: None,
        }
    }

    pub fn record(&mut self, time: f64, seq: u64, kind: &str, payload: &str) {
        self.records += 1;
        if matches!(self.sink, Sink::Null) {
            return;
        }
        self.line.clear();
        let _ = writeln!(self.line, "{time:.6}\t{seq}\t{kind}\t{payload}");
        let res = match &mut self.sink {
            Sink::Memory(buf) => {
                buf.extend_from_slice(self.line.as_bytes());
                Ok(())
            }
            Sink::Writer(w) => w.write_all(self.line.as_bytes()),
            Sink::Null => Ok(()),
        };
        if let Err(e) = res {
            self.error.get_or_insert(e);
        }
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn flush(&mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        match &mut self.sink {
            Sink::Writer(w) => w.flush(),
            _ => Ok(()),
        }
    }

    /// Bytes written so far, for in-memory logs.
    pub fn bytes(&self) -> Option<&[u8]> {
        match &self.sink {
            Sink::Memory(b) => Some(b),
            _ => None,
        }
    }

    pub fn into_bytes(self) -> Option<Vec<u8>> {
        match self.sink {
            Sink::Memory(b) => Some(b),
            _ => None,
        }
    }
}

/// One parsed log line.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord<'a> {
    pub time: f64,
    pub seq: u64,
    pub kind: &'a str,
    pub payload: &'a str,
}

pub fn parse_line(line: &str) -> Option<LogRecord<'_>> {
    let mut it = line.splitn(4, '\t');
    let time = it.next()?.parse().ok()?;
    let seq = it.next()?.parse().ok()?;
    let kind = it.next()?;
    let payload = it.next().unwrap_or("");
    Some(LogRecord {
        time,
        seq,
        kind,
        payload,
    })
}

/// Value of `key=value` in a record payload.
pub fn field<'a>(payload: &'a str, key: &str) -> Option<&'a str> {
    payload.split(' ').find_map(|tok| {
        let (k, v) = tok.split_once('=')?;
        (k == key).then_some(v)
    })
}
