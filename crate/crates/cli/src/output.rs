use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Emitter {
    format: Format,
    out: Option<PathBuf>,
}

impl Emitter {
    pub fn new(format: Option<Format>, default: Format, out: Option<PathBuf>) -> Self {
        Emitter {
            format: format.unwrap_or(default),
            out,
        }
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
            None => Box::new(io::stdout().lock()),
        })
    }

    /// A table: CSV with a header row, or a JSON object holding the rows.
    pub fn rows<T: Serialize>(&self, schema: &str, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(self.sink()?);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
                Ok(())
            }
            Format::Json => self.json(&Versioned { schema, rows }),
        }
    }

    pub fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut sink = self.sink()?;
        serde_json::to_writer_pretty(&mut sink, value)?;
        writeln!(sink)?;
        Ok(())
    }

    /// One compact JSON value per line.
    pub fn lines<T: Serialize>(&self, values: &[T]) -> Result<()> {
        if self.format == Format::Csv {
            return Err(crate::ConfigError("this command only produces JSON".into()).into());
        }
        let mut sink = self.sink()?;
        for v in values {
            serde_json::to_writer(&mut sink, v)?;
            writeln!(sink)?;
        }
        Ok(())
    }

    /// A single JSON document; CSV is not available for nested reports.
    pub fn document<T: Serialize>(&self, value: &T) -> Result<()> {
        if self.format == Format::Csv {
            return Err(crate::ConfigError("this command only produces JSON".into()).into());
        }
        self.json(value)
    }
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    schema: &'a str,
    rows: &'a [T],
}
