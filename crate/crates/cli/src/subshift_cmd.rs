use anyhow::Result;
use clap::Subcommand;
use serde::Serialize;

use crate::output::Format;
use crate::Common;

const DEFAULT_POINT_WINDOW: u64 = 32;
const DEFAULT_RECURRENCE_HORIZON: u64 = 4096;

#[derive(Subcommand)]
pub enum SubshiftCmd {
    /// Admissible words of length --length.
    Language,
    /// The fixed point on [-window, window].
    Point,
    /// Recurrence bounds for every word length up to --length.
    Recurrence,
}

#[derive(Serialize)]
struct Language {
    schema: &'static str,
    system: String,
    length: u64,
    count: usize,
    words: Vec<String>,
}

#[derive(Serialize)]
struct Point {
    schema: &'static str,
    system: String,
    lo: i64,
    hi: i64,
    word: String,
}

#[derive(Serialize)]
struct RecurrenceRow {
    length: usize,
    words: usize,
    recurrence: usize,
    ratio: f64,
}

pub fn run(cmd: SubshiftCmd, c: &Common) -> Result<bool> {
    match cmd {
        SubshiftCmd::Language => {
            let length = c.require(c.length, "length")?;
            let sys = c.load_system(c.orbit_horizon)?;
            let lang = sys.language(length as usize)?;
            let sub = sys.substitution();
            c.emitter(Format::Json).document(&Language {
                schema: "fgl.subshift.language/1",
                system: c.system.clone(),
                length,
                count: lang.len(),
                words: lang.words.iter().map(|w| sub.format_word(w)).collect(),
            })?;
        }
        SubshiftCmd::Point => {
            let w = c.window.unwrap_or(DEFAULT_POINT_WINDOW);
            let sys = c.load_system(c.orbit_horizon.max(w as usize + 1))?;
            let lo = -(w as i64);
            let word = sys.factor(lo, 2 * w as usize + 1)?;
            c.emitter(Format::Json).document(&Point {
                schema: "fgl.subshift.point/1",
                system: c.system.clone(),
                lo,
                hi: w as i64,
                word: sys.substitution().format_word(word),
            })?;
        }
        SubshiftCmd::Recurrence => {
            let length = c.require(c.length, "length")? as usize;
            let horizon = c.horizon.unwrap_or(DEFAULT_RECURRENCE_HORIZON) as usize;
            let sys = c.load_system(c.orbit_horizon.max(horizon))?;
            let mut rows = Vec::new();
            for len in 1..=length {
                let words = sys.language(len)?.len();
                let recurrence = sys.recurrence_bound(len, horizon)?;
                rows.push(RecurrenceRow {
                    length: len,
                    words,
                    recurrence,
                    ratio: recurrence as f64 / len as f64,
                });
            }
            c.emitter(Format::Csv).rows("fgl.subshift.recurrence/1", &rows)?;
        }
    }
    Ok(true)
}
