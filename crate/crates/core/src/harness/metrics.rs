//! JSONL metrics stream.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(MetricsWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    /// Writes `record` as one line, prefixed with a `kind` field.
    pub fn write<S: Serialize>(&mut self, kind: &str, record: &S) -> Result<()> {
        let mut v = serde_json::to_value(record)?;
        if let Value::Object(map) = &mut v {
            let mut tagged = serde_json::Map::new();
            tagged.insert("kind".into(), Value::String(kind.into()));
            tagged.extend(std::mem::take(map));
            v = Value::Object(tagged);
        }
        serde_json::to_writer(&mut self.out, &v)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<Value>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
