use std::collections::BTreeSet;

use anyhow::Result;
use clap::Subcommand;
use fgl::catalog::{fibonacci_pool, NamedElement, FIBONACCI_POOL};
use fgl::meanlab::{fourier_measure, monte_carlo_tv, sample_sets, Subset};
use fgl::wobbling::WobblingMap;
use serde::Serialize;

use crate::density_cmd::{correlate_rows, functional_rows, lemma_rows, CheckRow, ValueRow, DEFAULT_GRID};
use crate::element_cmd::{verify_rows, VerifyRow};
use crate::mean_cmd::{default_window, defect_rows, twist_lines, DefectRow, TwistLine};
use crate::output::Format;
use crate::stab_cmd::{certificate, orbit_for, Certificate, DEFAULT_WINDOW};
use crate::{Common, ConfigError};

const VERIFY_WINDOW: u64 = 1000;
const EMBED_WINDOW: i64 = 300;
const LANGUAGE_LENGTHS: usize = 8;
const SAMPLE_N: u32 = 2;
const SAMPLE_COUNT: usize = 5;
const MC_SAMPLES: usize = 5_000;
const BOOST_K: usize = 5;
/// Pool members that fix `N` and `N △ {2}`, used for the block certificate.
const BLOCK_GENERATORS: [&str; 2] = ["swap:01", "comm:01,00100"];

#[derive(Subcommand)]
pub enum ReportCmd {
    /// Fibonacci system, swaps, embedding, density curves, measures and blocks.
    All,
}

#[derive(Serialize)]
struct LanguageCount {
    length: usize,
    words: usize,
}

#[derive(Serialize)]
struct EmbedCheck {
    a: String,
    b: String,
    multiplicative: bool,
}

#[derive(Serialize)]
struct Trend {
    g_id: String,
    gap: Vec<f64>,
    functional: Vec<f64>,
    decreasing: bool,
}

#[derive(Serialize)]
struct MonteCarlo {
    g_id: String,
    n: u32,
    samples: usize,
    tv: f64,
    standard_error: f64,
}

#[derive(Serialize)]
struct Boost {
    n: u32,
    k: usize,
    p0: f64,
    boosted_p0: f64,
    guaranteed: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Measures {
    defects: Vec<DefectRow>,
    samples: Vec<Subset>,
    boost: Boost,
    monte_carlo: Vec<MonteCarlo>,
}

#[derive(Serialize)]
struct Report {
    schema: &'static str,
    system: String,
    seed: u64,
    eps: f64,
    n_grid: Vec<u32>,
    language: Vec<LanguageCount>,
    pool: Vec<VerifyRow>,
    embedding: Vec<EmbedCheck>,
    correlation: Vec<ValueRow>,
    functional: Vec<ValueRow>,
    trends: Vec<Trend>,
    lemmas: Vec<CheckRow>,
    measures: Measures,
    twist: Vec<TwistLine>,
    blocks: Vec<Certificate>,
    pass: bool,
}

fn embed_checks(pool: &[NamedElement]) -> Result<Vec<EmbedCheck>> {
    let local: Vec<_> = pool.iter().filter_map(|e| Some((e, e.local.as_ref()?))).collect();
    let mut out = Vec::new();
    for (ea, a) in &local {
        for (eb, b) in &local {
            let lhs = a.compose(b)?.embed()?;
            let rhs = ea.map.compose(&eb.map);
            let mut same = true;
            for j in -EMBED_WINDOW..=EMBED_WINDOW {
                same &= lhs.evaluate(j)? == rhs.evaluate(j)?;
            }
            out.push(EmbedCheck {
                a: ea.id.clone(),
                b: eb.id.clone(),
                multiplicative: same,
            });
        }
    }
    Ok(out)
}

fn trends(corr: &[ValueRow], func: &[ValueRow], ids: &[String]) -> Vec<Trend> {
    ids.iter()
        .map(|id| {
            let pick = |rows: &[ValueRow], f: fn(f64) -> f64| -> Vec<f64> {
                rows.iter()
                    .filter(|r| &r.g_id == id && r.n > 1)
                    .map(|r| f(r.value))
                    .collect()
            };
            let gap = pick(corr, |v| (1.0 - v).abs());
            let functional = pick(func, f64::abs);
            let down = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
            Trend {
                g_id: id.clone(),
                decreasing: down(&gap) && down(&functional),
                gap,
                functional,
            }
        })
        .collect()
}

pub fn run(cmd: ReportCmd, c: &Common) -> Result<bool> {
    let ReportCmd::All = cmd;
    let seed = c.require_seed()?;
    c.check_eps()?;
    if c.system != "fibonacci" {
        return Err(ConfigError("the report is defined for the fibonacci system".into()).into());
    }
    let window = c.window.unwrap_or(DEFAULT_WINDOW);
    let (system, pool) = fibonacci_pool(orbit_for(c, 4 * window))?;
    let ids: Vec<String> = FIBONACCI_POOL.iter().map(|s| s.to_string()).collect();
    let pairs: Vec<(&str, &WobblingMap)> = pool.iter().map(|e| (e.id.as_str(), &e.map)).collect();
    let ns = DEFAULT_GRID.to_vec();

    let language = (1..=LANGUAGE_LENGTHS)
        .map(|length| {
            Ok(LanguageCount {
                length,
                words: system.language(length)?.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verify = verify_rows(&pool, VERIFY_WINDOW)?;
    let embedding = embed_checks(&pool)?;
    let correlation = correlate_rows(&pairs, &ns, c.eps)?;
    let functional = functional_rows(&pairs, &ns, c.eps)?;
    let trend = trends(&correlation, &functional, &ids);
    let lemmas = lemma_rows(&pairs, &ns, c.eps)?;

    let m = fourier_measure::<f64>(SAMPLE_N, default_window(SAMPLE_N));
    let boosted = m.boost_union(BOOST_K)?;
    let guaranteed = 1.0 - 0.5f64.powi(BOOST_K as i32);
    let boost = Boost {
        n: SAMPLE_N,
        k: BOOST_K,
        p0: m.p(0),
        boosted_p0: boosted.p(0),
        guaranteed,
        pass: m.p(0) < 0.5 || boosted.p(0) >= guaranteed,
    };
    let monte_carlo = pool
        .iter()
        .map(|e| {
            let (tv, se) = monte_carlo_tv(&m, &e.map, MC_SAMPLES, seed)?;
            Ok(MonteCarlo {
                g_id: e.id.clone(),
                n: SAMPLE_N,
                samples: MC_SAMPLES,
                tv,
                standard_error: se,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let measures = Measures {
        defects: defect_rows(&pairs, &ns, default_window)?,
        samples: sample_sets(&m, seed, SAMPLE_COUNT),
        boost,
        monte_carlo,
    };
    let twist = twist_lines(&pool)?;

    let generators: Vec<WobblingMap> = BLOCK_GENERATORS
        .iter()
        .map(|id| pool.iter().find(|e| e.id == *id).map(|e| e.map.clone()).unwrap())
        .collect();
    let blocks = [BTreeSet::new(), BTreeSet::from([2])]
        .iter()
        .map(|e| certificate(&generators, e, window))
        .collect::<Result<Vec<_>>>()?;

    let pass = verify.iter().all(|r| r.pass)
        && embedding.iter().all(|r| r.multiplicative)
        && correlation.iter().all(|r| r.pass)
        && functional.iter().all(|r| r.pass)
        && trend.iter().all(|t| t.decreasing)
        && lemmas.iter().all(|r| r.pass)
        && measures.boost.pass
        && blocks.iter().all(|b| b.checks.pass());
    c.emitter(Format::Json).document(&Report {
        schema: "fgl.report/1",
        system: c.system.clone(),
        seed,
        eps: c.eps,
        n_grid: ns,
        language,
        pool: verify,
        embedding,
        correlation,
        functional,
        trends: trend,
        lemmas,
        measures,
        twist,
        blocks,
        pass,
    })?;
    Ok(pass)
}
