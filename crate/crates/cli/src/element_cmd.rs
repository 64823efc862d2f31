use anyhow::Result;
use clap::Subcommand;
use fgl::fullgroup::{ElementSpec, EMBED_CHECK_WINDOW};
use fgl::wobbling::MapSpec;
use serde::Serialize;

use crate::output::Format;
use crate::Common;

const DEFAULT_EMBED_WINDOW: u64 = 20;

#[derive(Subcommand)]
pub enum ElementCmd {
    /// JSON descriptions of the elements.
    Build,
    /// Bijectivity and displacement checks on [-window, window].
    Verify,
    /// Images j -> g(j) on [-window, window].
    Embed,
}

#[derive(Serialize)]
struct Built {
    id: String,
    certified_bound: u64,
    local_rule: Option<ElementSpec>,
    map: MapSpec,
}

#[derive(Serialize)]
struct BuildReport {
    schema: &'static str,
    elements: Vec<Built>,
}

#[derive(Serialize)]
pub struct VerifyRow {
    pub g_id: String,
    pub window: u64,
    pub bijective: bool,
    pub local_rule_consistent: bool,
    pub observed_bound: u64,
    pub certified_bound: u64,
    pub pass: bool,
}

#[derive(Serialize)]
struct EmbedRow {
    g_id: String,
    j: i64,
    image: i64,
    displacement: i64,
}

pub fn verify_rows(elements: &[fgl::catalog::NamedElement], w: u64) -> Result<Vec<VerifyRow>> {
    let (lo, hi) = (-(w as i64), w as i64);
    let mut rows = Vec::new();
    for e in elements {
        let bijective = e.map.verify_bijectivity_window(lo, hi)?;
        let observed = e.map.observed_bound(lo, hi)?;
        let local_ok = match &e.local {
            Some(l) => l.verify(hi)?,
            None => true,
        };
        rows.push(VerifyRow {
            g_id: e.id.clone(),
            window: w,
            bijective,
            local_rule_consistent: local_ok,
            observed_bound: observed,
            certified_bound: e.map.certified_bound(),
            pass: bijective && local_ok && observed <= e.map.certified_bound(),
        });
    }
    Ok(rows)
}

pub fn run(cmd: ElementCmd, c: &Common) -> Result<bool> {
    let elements = c.elements()?;
    match cmd {
        ElementCmd::Build => {
            let built: Vec<Built> = elements
                .iter()
                .map(|e| Built {
                    id: e.id.clone(),
                    certified_bound: e.map.certified_bound(),
                    local_rule: e.local.as_ref().map(|l| l.to_spec()),
                    map: e.map.to_spec(),
                })
                .collect();
            c.emitter(Format::Json).document(&BuildReport {
                schema: "fgl.element.build/1",
                elements: built,
            })?;
            Ok(true)
        }
        ElementCmd::Verify => {
            let w = c.window.unwrap_or(EMBED_CHECK_WINDOW as u64);
            let rows = verify_rows(&elements, w)?;
            c.emitter(Format::Csv).rows("fgl.element.verify/1", &rows)?;
            Ok(rows.iter().all(|r| r.pass))
        }
        ElementCmd::Embed => {
            let w = c.window.unwrap_or(DEFAULT_EMBED_WINDOW) as i64;
            let mut rows = Vec::new();
            for e in &elements {
                for j in -w..=w {
                    let image = e.map.evaluate(j)?;
                    rows.push(EmbedRow {
                        g_id: e.id.clone(),
                        j,
                        image,
                        displacement: image - j,
                    });
                }
            }
            c.emitter(Format::Csv).rows("fgl.element.embed/1", &rows)?;
            Ok(true)
        }
    }
}
