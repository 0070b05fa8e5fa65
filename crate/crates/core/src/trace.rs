//! Line-delimited JSON trace records.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde_json::{Map, Value};

/// Cloneable handle to a trace sink. Records are written one JSON object
/// per line, in the order they were emitted.
#[derive(Clone, Default)]
pub struct Tracer {
    inner: Option<Arc<Mutex<Sink>>>,
}

enum Sink {
    Memory(Vec<Value>),
    Writer(Box<dyn Write + Send>),
}

impl Tracer {
    /// Discards every record.
    pub fn disabled() -> Self {
        Self { inner: None }
    }

    /// Keeps records in memory; read them back with [`Tracer::records`].
    pub fn memory() -> Self {
        Self {
            inner: Some(Arc::new(Mutex::new(Sink::Memory(Vec::new())))),
        }
    }

    pub fn to_writer(writer: Box<dyn Write + Send>) -> Self {
        Self {
            inner: Some(Arc::new(Mutex::new(Sink::Writer(writer)))),
        }
    }

    pub fn to_file(path: &Path) -> io::Result<Self> {
        let file = File::create(path)?;
        Ok(Self::to_writer(Box::new(BufWriter::new(file))))
    }

    /// Emits `{"kind": kind, ...fields}`.
    pub fn emit(&self, kind: &str, fields: Value) {
        let Some(inner) = &self.inner else { return };
        let mut record = Map::new();
        record.insert("kind".into(), Value::String(kind.into()));
        if let Value::Object(extra) = fields {
            record.extend(extra);
        } else if !fields.is_null() {
            record.insert("detail".into(), fields);
        }
        let record = Value::Object(record);
        let mut sink = inner.lock().expect("trace sink poisoned");
        match &mut *sink {
            Sink::Memory(records) => records.push(record),
            Sink::Writer(w) => {
                // Trace output is best-effort.
                let _ = writeln!(w, "{record}");
            }
        }
    }

    pub fn records(&self) -> Vec<Value> {
        match &self.inner {
            Some(inner) => match &*inner.lock().expect("trace sink poisoned") {
                Sink::Memory(records) => records.clone(),
                Sink::Writer(_) => Vec::new(),
            },
            None => Vec::new(),
        }
    }

    pub fn records_of(&self, kind: &str) -> Vec<Value> {
        self.records()
            .into_iter()
            .filter(|r| r.get("kind").and_then(Value::as_str) == Some(kind))
            .collect()
    }

    pub fn flush(&self) {
        if let Some(inner) = &self.inner {
            if let Sink::Writer(w) = &mut *inner.lock().expect("trace sink poisoned") {
                let _ = w.flush();
            }
        }
    }
}

impl std::fmt::Debug for Tracer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tracer")
            .field("enabled", &self.inner.is_some())
            .finish()
    }
}
